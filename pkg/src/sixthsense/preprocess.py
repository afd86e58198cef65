"""Multi-rate readings to per-second frames to encoded state sequences.

The pipeline has two steps.  ``resample`` folds raw readings into one frame
per second: data-oriented sensors get the per-axis mean of the readings that
fell inside the second, logic-oriented sensors get the last reported on/off
value.  Seconds without a reading carry the previous aggregate forward and
are marked uncovered.  ``binarize`` then compares consecutive frames: a
data bit is 1 when any axis moved by more than the sensor's absolute
tolerance, a logic bit is the frame's on/off value itself.  The first frame
only seeds the comparison, so a trace spanning N whole seconds yields N-1
conditions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from .errors import EmptyTrace, ProfileMismatch, TooShort
from .ingest import RawTrace, SessionRecord
from .profiles import ConditionVector, DeviceProfile, SensorKind, encode_state


class SecondFrame(NamedTuple):
    """Aggregates for one second, in profile bit order.

    Data sensor entries are per-axis mean tuples, logic entries are 0/1
    ints.  ``coverage[i]`` is False where sensor i had no reading in this
    second and the previous aggregate was carried forward.
    """

    second: int
    aggregates: tuple
    coverage: tuple[bool, ...]


@dataclass
class StateSequence:
    """Encoded per-second states for one session.

    ``conditions[k].timestamp_s`` is the index of the frame that produced
    the condition, so it starts at 1 (frame 0 is the baseline).
    """

    profile_name: str
    states: list[int] = field(default_factory=list)
    conditions: list[ConditionVector] = field(default_factory=list)
    label: str | None = None
    tag: str | None = None
    source_id: str | None = None

    def __len__(self) -> int:
        return len(self.states)


def resample(trace: RawTrace, profile: DeviceProfile) -> list[SecondFrame]:
    """One frame per second touched by the trace, gaps carried forward."""
    if trace.profile_name != profile.name:
        raise ProfileMismatch(
            f"trace was parsed against {trace.profile_name!r}, "
            f"resampling against {profile.name!r}"
        )
    readings = trace.readings
    if not readings:
        raise EmptyTrace("trace has no readings")
    n = profile.n
    is_data = [s.kind is SensorKind.DATA for s in profile.sensors]
    axes = [s.axes for s in profile.sensors]
    bit_of = {s.id: s.bit_index for s in profile.sensors}

    n_frames = readings[-1].timestamp_ms // 1000 + 1
    # Carry state: data sensors start at zero vectors, logic sensors at off.
    current: list = [
        tuple(0.0 for _ in range(axes[i])) if is_data[i] else 0 for i in range(n)
    ]

    frames: list[SecondFrame] = []
    sums: list = [None] * n
    counts = [0] * n
    logic_last: list = [None] * n
    idx = 0
    total = len(readings)
    for second in range(n_frames):
        end_ms = (second + 1) * 1000
        touched: list[int] = []
        while idx < total and readings[idx].timestamp_ms < end_ms:
            r = readings[idx]
            bit = bit_of[r.sensor_id]
            if r.values is not None:
                acc = sums[bit]
                if acc is None:
                    sums[bit] = list(r.values)
                    counts[bit] = 1
                    touched.append(bit)
                else:
                    for a, v in enumerate(r.values):
                        acc[a] += v
                    counts[bit] += 1
            else:
                if logic_last[bit] is None:
                    touched.append(bit)
                logic_last[bit] = r.logic_state
            idx += 1
        coverage = [False] * n
        for bit in range(n):
            if is_data[bit]:
                if sums[bit] is not None:
                    c = counts[bit]
                    current[bit] = tuple(v / c for v in sums[bit])
                    coverage[bit] = True
                    sums[bit] = None
                    counts[bit] = 0
            else:
                if logic_last[bit] is not None:
                    current[bit] = logic_last[bit]
                    coverage[bit] = True
                    logic_last[bit] = None
        frames.append(
            SecondFrame(
                second=second,
                aggregates=tuple(current),
                coverage=tuple(coverage),
            )
        )
    return frames


def binarize(frames: list[SecondFrame], profile: DeviceProfile) -> StateSequence:
    """Turn consecutive frame pairs into condition vectors and state codes.

    Raising a sensor's tolerance can only turn data bits off, never on.
    """
    if len(frames) < 2:
        raise TooShort(f"need at least 2 frames to binarize, got {len(frames)}")
    n = profile.n
    is_data = [s.kind is SensorKind.DATA for s in profile.sensors]
    tol = [s.change_tolerance for s in profile.sensors]
    seq = StateSequence(profile_name=profile.name)
    prev = frames[0].aggregates
    for t in range(1, len(frames)):
        cur = frames[t].aggregates
        bits = []
        for i in range(n):
            if is_data[i]:
                a, b = prev[i], cur[i]
                changed = any(abs(x - y) > tol[i] for x, y in zip(a, b))
                bits.append(1 if changed else 0)
            else:
                bits.append(1 if cur[i] else 0)
        v = ConditionVector(bits=tuple(bits), timestamp_s=frames[t].second)
        seq.conditions.append(v)
        seq.states.append(encode_state(v, profile))
        prev = cur
    return seq


def prepare_session(record: SessionRecord, profile: DeviceProfile) -> StateSequence:
    """Full trace-to-states pass for one manifest entry."""
    seq = binarize(resample(record.trace, profile), profile)
    seq.label = record.label
    seq.tag = record.tag
    seq.source_id = record.source_id
    return seq


def dump_conditions(
    seq: StateSequence, profile: DeviceProfile, path: str | Path
) -> int:
    """Write the per-second condition matrix as a debugging CSV.

    Header is ``second,<sensor ids...>,state_code``; returns rows written.
    """
    if seq.profile_name != profile.name:
        raise ProfileMismatch(
            f"sequence built against {seq.profile_name!r}, dumping against "
            f"{profile.name!r}"
        )
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["second", *profile.sensor_ids(), "state_code"])
        for v, code in zip(seq.conditions, seq.states):
            writer.writerow([v.timestamp_s, *v.bits, code])
    return len(seq.states)
