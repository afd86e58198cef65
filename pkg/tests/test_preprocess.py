"""Resampling to seconds and binarization to condition vectors."""

import pytest

from sixthsense import (
    EmptyTrace,
    ProfileMismatch,
    RawTrace,
    SensorReading,
    TooShort,
    binarize,
    resample,
)
from sixthsense.preprocess import dump_conditions


def data(ts, sensor, *values):
    return SensorReading(ts, sensor, tuple(values), None)


def logic(ts, sensor, state):
    return SensorReading(ts, sensor, None, state)


def trace(watch, readings):
    return RawTrace(
        profile_name=watch.name,
        readings=sorted(readings, key=lambda r: r.timestamp_ms),
        duration_ms=max(r.timestamp_ms for r in readings),
    )


def test_per_second_mean(watch):
    t = trace(
        watch,
        [
            data(0, "light", 100.0),
            data(300, "light", 102.0),
            data(900, "light", 104.0),
            data(1000, "light", 200.0),
        ],
    )
    frames = resample(t, watch)
    assert len(frames) == 2
    light_idx = watch.sensor("light").bit_index
    assert frames[0].aggregates[light_idx] == (102.0,)
    assert frames[1].aggregates[light_idx] == (200.0,)
    assert frames[0].second == 0


def test_carry_forward_fills_empty_seconds(watch):
    t = trace(
        watch,
        [
            data(0, "light", 50.0),
            logic(0, "speaker", 1),
            data(3200, "light", 60.0),
        ],
    )
    frames = resample(t, watch)
    assert len(frames) == 4
    light_idx = watch.sensor("light").bit_index
    spk_idx = watch.sensor("speaker").bit_index
    # seconds 1 and 2 saw nothing: values persist
    assert frames[1].aggregates[light_idx] == (50.0,)
    assert frames[2].aggregates[light_idx] == (50.0,)
    assert frames[3].aggregates[light_idx] == (60.0,)
    assert frames[1].aggregates[spk_idx] == 1
    assert frames[1].coverage[light_idx] is False
    assert frames[0].coverage[light_idx] is True


def test_unseen_sensor_defaults(watch):
    t = trace(watch, [data(500, "light", 9.0)])
    frames = resample(t, watch)
    acc_idx = watch.sensor("accelerometer").bit_index
    mic_idx = watch.sensor("microphone").bit_index
    assert frames[0].aggregates[acc_idx] == (0.0, 0.0, 0.0)
    assert frames[0].aggregates[mic_idx] == 0


def test_partial_second_is_a_frame(watch):
    t = trace(watch, [data(0, "light", 1.0), data(200, "light", 2.0)])
    frames = resample(t, watch)
    assert len(frames) == 1


def test_empty_trace_rejected(watch):
    with pytest.raises(EmptyTrace):
        resample(RawTrace(profile_name=watch.name, readings=[]), watch)


def test_profile_name_checked(watch, phone):
    t = trace(watch, [data(0, "light", 1.0)])
    with pytest.raises(ProfileMismatch):
        resample(t, phone)


def test_binarize_needs_two_frames(watch):
    t = trace(watch, [data(100, "light", 5.0)])
    frames = resample(t, watch)
    with pytest.raises(TooShort):
        binarize(frames, watch)


def test_tolerance_is_strict_inequality(watch):
    # light tolerance is 2.0: a delta of exactly 2.0 stays 0
    t = trace(
        watch,
        [
            data(500, "light", 10.0),
            data(1500, "light", 12.0),
            data(2500, "light", 14.001),
        ],
    )
    seq = binarize(resample(t, watch), watch)
    light_idx = watch.sensor("light").bit_index
    assert seq.conditions[0].bits[light_idx] == 0
    assert seq.conditions[1].bits[light_idx] == 1


def test_any_axis_trips_data_bit(watch):
    t = trace(
        watch,
        [
            data(0, "accelerometer", 1.0, 1.0, 1.0),
            data(1000, "accelerometer", 1.0, 1.06, 1.0),
        ],
    )
    seq = binarize(resample(t, watch), watch)
    assert seq.conditions[0].bits[0] == 1


def test_logic_bit_is_current_state(watch):
    t = trace(
        watch,
        [
            logic(0, "microphone", 0),
            logic(1000, "microphone", 1),
            logic(2000, "microphone", 0),
        ],
    )
    seq = binarize(resample(t, watch), watch)
    mic_idx = watch.sensor("microphone").bit_index
    assert [c.bits[mic_idx] for c in seq.conditions] == [1, 0]


def test_condition_timestamps_start_at_one(watch):
    t = trace(
        watch,
        [data(0, "light", 0.0), data(1000, "light", 10.0), data(2000, "light", 0.0)],
    )
    seq = binarize(resample(t, watch), watch)
    assert [c.timestamp_s for c in seq.conditions] == [1, 2]
    assert len(seq) == 2


def test_states_match_conditions(watch):
    t = trace(
        watch,
        [
            data(0, "light", 0.0),
            logic(1000, "speaker", 1),
            data(1000, "light", 10.0),
        ],
    )
    seq = binarize(resample(t, watch), watch)
    # light changed (bit 2) and speaker on (bit 5): 4 + 32
    assert seq.states == [36]


def test_dump_conditions_csv(tmp_path, watch):
    t = trace(
        watch,
        [data(0, "light", 0.0), data(1000, "light", 10.0), data(2000, "light", 0.0)],
    )
    seq = binarize(resample(t, watch), watch)
    out = tmp_path / "cond.csv"
    rows = dump_conditions(seq, watch, out)
    lines = out.read_text().splitlines()
    assert rows == 2
    assert lines[0].startswith("second,accelerometer,")
    assert lines[0].endswith(",state_code")
    assert lines[1].split(",")[0] == "1"
