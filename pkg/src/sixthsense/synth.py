"""Deterministic labelled corpora: benign activity traces plus injected attacks.

Benign generation is plan-then-emit.  For each sensor a per-second plan is
drawn first: data-oriented sensors alternate "changing" and "steady" dwell
segments (exponential dwell lengths), and while changing their per-second
target value jumps by more than the sensor tolerance each second; logic
sensors draw on/off dwell segments, each segment on with a configured
probability.  Emission then walks the plan at the sensor's nominal rate,
adding sub-tolerance jitter to data readings, so the plan fully determines
the condition bits the preprocessing stage will recover.

Threat injection rewrites the plan from an onset second onward:

- ``trigger_via_sensor``: every sensor idles except the light value, which
  oscillates hard every second (out-of-context stimulus pattern).
- ``leak_via_sensor``: the base activity continues but microphone and
  speaker are forced on together (record-and-transmit pattern).
- ``steal_when_idle``: everything idles, then after a quiet gap the camera
  (or the microphone when no camera exists) switches on.

All randomness flows from numpy's default PCG64 generator; corpus runs seed
each session with ``[master_seed, session_index]`` so any session can be
regenerated in isolation.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from importlib.resources import files as package_files
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ProfileInvalid, ThreatSpecInvalid
from .ingest import (
    LABEL_BENIGN,
    LABEL_MALICIOUS,
    MANIFEST_HEADER,
    TRACE_HEADER,
    RawTrace,
    SensorReading,
)
from .profiles import DeviceProfile, SensorKind, resolve_profile

log = logging.getLogger(__name__)

THREAT_KINDS = ("trigger_via_sensor", "leak_via_sensor", "steal_when_idle")

RNG_DESCRIPTION = (
    "numpy.random.default_rng (PCG64); session seed = "
    "SeedSequence([master_seed, session_index])"
)

# Fallback (base value, low bound, high bound) per sensor id for target walks.
SENSOR_VALUE_DEFAULTS = {
    "accelerometer": (9.81, 0.0, 30.0),
    "gyroscope": (0.0, -10.0, 10.0),
    "light": (140.0, 0.0, 3000.0),
    "proximity": (5.0, 0.0, 10.0),
}
GENERIC_VALUE_DEFAULT = (0.0, -1e6, 1e6)


@dataclass(frozen=True)
class DataBehavior:
    """Dwell-driven target walk for one data-oriented sensor.

    While changing, the per-second target jumps by a magnitude in
    [jump, 2*jump]; pick jump comfortably above the sensor tolerance.
    ``jitter`` is per-reading noise and must stay well below tolerance,
    or steady seconds stop being steady.  ``None`` means use the
    per-sensor defaults.
    """

    change_dwell_s: float
    steady_dwell_s: float
    jump: float
    jitter: float | None = None
    base: float | None = None
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self) -> None:
        if self.change_dwell_s <= 0 or self.steady_dwell_s <= 0:
            raise ProfileInvalid("dwell means must be > 0")
        if self.jump < 0:
            raise ProfileInvalid("jump must be >= 0")
        if self.jitter is not None and self.jitter < 0:
            raise ProfileInvalid("jitter must be >= 0")


@dataclass(frozen=True)
class LogicBehavior:
    """On/off dwell process for one logic-oriented sensor."""

    on_prob: float
    dwell_s: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.on_prob <= 1.0:
            raise ProfileInvalid("on_prob must be in [0, 1]")
        if self.dwell_s <= 0:
            raise ProfileInvalid("dwell mean must be > 0")


@dataclass(frozen=True)
class ActivityProfile:
    """Generation parameters for one benign activity.

    Sensors missing from both maps idle: data sensors hold a steady value,
    logic sensors stay off.
    """

    activity: str
    duration_s: int = 300
    data: Mapping[str, DataBehavior] = field(default_factory=dict)
    logic: Mapping[str, LogicBehavior] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.duration_s < 2:
            raise ProfileInvalid(
                f"activity {self.activity!r}: duration_s must be >= 2"
            )


@dataclass(frozen=True)
class ThreatSpec:
    """One attack injection.  ``onset_s`` must fall inside the session."""

    kind: str
    onset_s: int
    idle_gap_s: int = 30
    target_sensor: str | None = None
    oscillation_scale: float = 4.0

    def __post_init__(self) -> None:
        if self.kind not in THREAT_KINDS:
            raise ThreatSpecInvalid(
                f"unknown threat kind {self.kind!r}; known: {THREAT_KINDS}"
            )
        if self.onset_s < 1:
            raise ThreatSpecInvalid(f"onset_s must be >= 1, got {self.onset_s}")
        if self.idle_gap_s < 1:
            raise ThreatSpecInvalid(f"idle_gap_s must be >= 1, got {self.idle_gap_s}")
        if self.oscillation_scale < 2.5:
            raise ThreatSpecInvalid(
                f"oscillation_scale must be >= 2.5 tolerances, "
                f"got {self.oscillation_scale}"
            )


def load_activity_profiles(
    path: str | Path | None = None, duration_s: int | None = None
) -> dict[str, ActivityProfile]:
    """Load activity generation parameters from JSON.

    With no path, the packaged defaults covering the nine stock activities
    are used.  ``duration_s`` overrides every activity's session length.
    """
    if path is None:
        text = package_files("sixthsense").joinpath("data/activities.json").read_text()
        source = "<packaged activities>"
    else:
        text = Path(path).read_text()
        source = str(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProfileInvalid(f"{source} is not valid JSON: {exc}") from exc
    out: dict[str, ActivityProfile] = {}
    for name, spec in doc.get("activities", {}).items():
        data: dict[str, DataBehavior] = {}
        logic: dict[str, LogicBehavior] = {}
        for sensor_id, b in spec.get("sensors", {}).items():
            process = b.get("process")
            if process == "data":
                data[sensor_id] = DataBehavior(
                    change_dwell_s=float(b["change_dwell_s"]),
                    steady_dwell_s=float(b["steady_dwell_s"]),
                    jump=float(b["jump"]),
                    jitter=b.get("jitter"),
                    base=b.get("base"),
                    lo=b.get("lo"),
                    hi=b.get("hi"),
                )
            elif process == "logic":
                logic[sensor_id] = LogicBehavior(
                    on_prob=float(b["on_prob"]), dwell_s=float(b["dwell_s"])
                )
            else:
                raise ProfileInvalid(
                    f"{source}: activity {name!r} sensor {sensor_id!r} has "
                    f"bad process {process!r}"
                )
        out[name] = ActivityProfile(
            activity=name,
            duration_s=duration_s or int(spec.get("duration_s", 300)),
            data=data,
            logic=logic,
        )
    if not out:
        raise ProfileInvalid(f"{source}: no activities defined")
    return out


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _dwell_modes(
    rng: np.random.Generator, duration: int, change_dwell: float, steady_dwell: float
) -> np.ndarray:
    """Boolean per-second array, True while in a changing dwell."""
    changing = change_dwell >= steady_dwell  # start in the dominant regime
    out = np.zeros(duration, dtype=bool)
    t = 0
    while t < duration:
        mean = change_dwell if changing else steady_dwell
        span = max(1, int(round(rng.exponential(mean))))
        out[t : t + span] = changing
        t += span
        changing = not changing
    return out


def _logic_plan(
    rng: np.random.Generator, duration: int, on_prob: float, dwell: float
) -> np.ndarray:
    out = np.zeros(duration, dtype=np.int8)
    t = 0
    while t < duration:
        span = max(1, int(round(rng.exponential(dwell))))
        on = rng.random() < on_prob
        out[t : t + span] = 1 if on else 0
        t += span
    return out


def _data_targets(
    rng: np.random.Generator,
    modes: np.ndarray,
    base: float,
    jump: float,
    lo: float,
    hi: float,
) -> np.ndarray:
    targets = np.empty(len(modes), dtype=np.float64)
    v = base
    for s, changing in enumerate(modes):
        if changing and jump > 0:
            magnitude = jump * (1.0 + rng.random())
            step = magnitude if rng.random() < 0.5 else -magnitude
            nv = v + step
            if nv < lo or nv > hi:
                nv = v - step  # reflect off the bound
            v = min(max(nv, lo), hi)
        targets[s] = v
    return targets


@dataclass
class _SessionPlan:
    duration_s: int
    data_targets: dict[str, np.ndarray]
    jitter: dict[str, float]
    logic_states: dict[str, np.ndarray]


def _resolve_values(spec_id: str, b: DataBehavior) -> tuple[float, float, float]:
    base_d, lo_d, hi_d = SENSOR_VALUE_DEFAULTS.get(spec_id, GENERIC_VALUE_DEFAULT)
    return (
        base_d if b.base is None else b.base,
        lo_d if b.lo is None else b.lo,
        hi_d if b.hi is None else b.hi,
    )


_IDLE_DATA = DataBehavior(
    change_dwell_s=1.0, steady_dwell_s=1e6, jump=0.0, jitter=None
)
_IDLE_LOGIC = LogicBehavior(on_prob=0.0, dwell_s=600.0)


def _build_plan(
    profile: DeviceProfile, ap: ActivityProfile, rng: np.random.Generator
) -> _SessionPlan:
    duration = ap.duration_s
    data_targets: dict[str, np.ndarray] = {}
    jitter: dict[str, float] = {}
    logic_states: dict[str, np.ndarray] = {}
    for s in profile.sensors:
        if s.kind is SensorKind.DATA:
            b = ap.data.get(s.id, _IDLE_DATA)
            modes = _dwell_modes(rng, duration, b.change_dwell_s, b.steady_dwell_s)
            base, lo, hi = _resolve_values(s.id, b)
            data_targets[s.id] = _data_targets(rng, modes, base, b.jump, lo, hi)
            jitter[s.id] = (
                b.jitter if b.jitter is not None else s.change_tolerance / 5.0
            )
        else:
            b = ap.logic.get(s.id, _IDLE_LOGIC)
            logic_states[s.id] = _logic_plan(rng, duration, b.on_prob, b.dwell_s)
    return _SessionPlan(
        duration_s=duration,
        data_targets=data_targets,
        jitter=jitter,
        logic_states=logic_states,
    )


def _emit_readings(
    profile: DeviceProfile, plan: _SessionPlan, rng: np.random.Generator
) -> list[SensorReading]:
    duration = plan.duration_s
    bit_of = {s.id: s.bit_index for s in profile.sensors}
    readings: list[SensorReading] = []
    for s in profile.sensors:
        count = int(s.nominal_rate_hz * duration)
        if count == 0:
            continue
        ts = (np.arange(count) * (1000.0 / s.nominal_rate_hz)).astype(np.int64)
        secs = ts // 1000
        ts_list = ts.tolist()
        if s.kind is SensorKind.DATA:
            targets = plan.data_targets[s.id][secs]
            j = plan.jitter[s.id]
            noise = rng.uniform(-j, j, size=(count, s.axes)) if j > 0 else None
            vals = targets[:, None] + noise if noise is not None else (
                np.repeat(targets[:, None], s.axes, axis=1)
            )
            rows = vals.tolist()
            sid = s.id
            for i, t in enumerate(ts_list):
                readings.append(SensorReading(t, sid, tuple(rows[i]), None))
        else:
            states = plan.logic_states[s.id][secs].tolist()
            sid = s.id
            for i, t in enumerate(ts_list):
                readings.append(SensorReading(t, sid, None, states[i]))
    readings.sort(key=lambda r: (r.timestamp_ms, bit_of[r.sensor_id]))
    return readings


def generate_benign(
    profile: DeviceProfile, activity: ActivityProfile, seed
) -> RawTrace:
    """One benign session trace; fully determined by the seed."""
    rng = _as_rng(seed)
    plan = _build_plan(profile, activity, rng)
    readings = _emit_readings(profile, plan, rng)
    return RawTrace(
        profile_name=profile.name,
        readings=readings,
        duration_ms=readings[-1].timestamp_ms,
    )


def _apply_threat(
    plan: _SessionPlan, profile: DeviceProfile, spec: ThreatSpec
) -> None:
    duration = plan.duration_s
    onset = spec.onset_s
    if onset >= duration:
        raise ThreatSpecInvalid(
            f"onset_s {onset} not inside the {duration}s session"
        )

    def freeze_data() -> None:
        for sensor_id, targets in plan.data_targets.items():
            targets[onset:] = targets[onset - 1]

    def all_logic_off() -> None:
        for states in plan.logic_states.values():
            states[onset:] = 0

    def require_logic(sensor_id: str) -> None:
        if sensor_id not in plan.logic_states:
            raise ThreatSpecInvalid(
                f"threat {spec.kind!r} needs logic sensor {sensor_id!r}, "
                f"profile {profile.name!r} has none"
            )

    if spec.kind == "trigger_via_sensor":
        if "light" not in plan.data_targets:
            raise ThreatSpecInvalid(
                f"trigger_via_sensor needs a light sensor in profile "
                f"{profile.name!r}"
            )
        freeze_data()
        all_logic_off()
        light = plan.data_targets["light"]
        tol = profile.sensor("light").change_tolerance
        osc = spec.oscillation_scale * tol
        base = float(light[onset - 1])
        span = duration - onset
        swings = np.where(np.arange(span) % 2 == 0, osc, -osc)
        light[onset:] = base + swings
    elif spec.kind == "leak_via_sensor":
        require_logic("microphone")
        require_logic("speaker")
        plan.logic_states["microphone"][onset:] = 1
        plan.logic_states["speaker"][onset:] = 1
    elif spec.kind == "steal_when_idle":
        target = spec.target_sensor
        if target is None:
            target = "camera" if "camera" in plan.logic_states else "microphone"
        require_logic(target)
        on_from = onset + spec.idle_gap_s
        if on_from >= duration:
            raise ThreatSpecInvalid(
                f"onset_s {onset} + idle_gap_s {spec.idle_gap_s} leaves no "
                f"room in the {duration}s session"
            )
        freeze_data()
        all_logic_off()
        plan.logic_states[target][on_from:] = 1


def generate_threat(
    profile: DeviceProfile, base: ActivityProfile, spec: ThreatSpec, seed
) -> RawTrace:
    """A session that starts as the base activity and turns hostile."""
    rng = _as_rng(seed)
    plan = _build_plan(profile, base, rng)
    _apply_threat(plan, profile, spec)
    readings = _emit_readings(profile, plan, rng)
    return RawTrace(
        profile_name=profile.name,
        readings=readings,
        duration_ms=readings[-1].timestamp_ms,
    )


def write_trace(trace: RawTrace, path: str | Path) -> None:
    """Inverse of trace parsing; written files re-parse to an equal trace."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for r in trace.readings:
            if r.values is not None:
                pad = [""] * (3 - len(r.values))
                writer.writerow([r.timestamp_ms, r.sensor_id, *r.values, *pad])
            else:
                writer.writerow([r.timestamp_ms, r.sensor_id, r.logic_state, "", ""])


@dataclass(frozen=True)
class BenignGroup:
    activity: str
    count: int


@dataclass(frozen=True)
class ThreatGroup:
    kind: str
    count: int
    base_activity: str


@dataclass(frozen=True)
class CorpusSpec:
    """Recipe for one labelled corpus."""

    master_seed: int = 7
    duration_s: int = 300
    profile: str = "watch9"
    benign: tuple[BenignGroup, ...] = (
        BenignGroup("walking", 8),
        BenignGroup("gaming", 8),
        BenignGroup("browsing", 8),
        BenignGroup("phone_call", 8),
        BenignGroup("sleeping", 6),
        BenignGroup("driving_driver", 6),
        BenignGroup("driving_passenger", 6),
    )
    threats: tuple[ThreatGroup, ...] = (
        ThreatGroup("trigger_via_sensor", 3, "browsing"),
        ThreatGroup("leak_via_sensor", 3, "walking"),
        ThreatGroup("steal_when_idle", 3, "sleeping"),
    )

    @classmethod
    def from_dict(cls, doc: dict) -> "CorpusSpec":
        defaults = cls()
        try:
            benign = tuple(
                BenignGroup(activity=str(g["activity"]), count=int(g["count"]))
                for g in doc.get("benign", [])
            ) or defaults.benign
            threats = tuple(
                ThreatGroup(
                    kind=str(g["kind"]),
                    count=int(g["count"]),
                    base_activity=str(g["base_activity"]),
                )
                for g in doc.get("threats", [])
            )
        except KeyError as exc:
            raise ProfileInvalid(
                f"corpus spec group missing field {exc.args[0]!r}"
            ) from None
        if "threats" not in doc:
            threats = defaults.threats
        return cls(
            master_seed=int(doc.get("master_seed", defaults.master_seed)),
            duration_s=int(doc.get("duration_s", defaults.duration_s)),
            profile=str(doc.get("profile", defaults.profile)),
            benign=benign,
            threats=threats,
        )

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "duration_s": self.duration_s,
            "profile": self.profile,
            "benign": [
                {"activity": g.activity, "count": g.count} for g in self.benign
            ],
            "threats": [
                {"kind": g.kind, "count": g.count, "base_activity": g.base_activity}
                for g in self.threats
            ],
        }


def load_corpus_spec(path: str | Path) -> CorpusSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ProfileInvalid(f"cannot read corpus spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ProfileInvalid(f"corpus spec {path} is not valid JSON: {exc}") from exc
    return CorpusSpec.from_dict(doc)


def generate_corpus(
    spec: CorpusSpec | None,
    out_dir: str | Path,
    profile: DeviceProfile | None = None,
    activity_profiles: Mapping[str, ActivityProfile] | None = None,
) -> Path:
    """Write every session trace plus ``manifest.csv`` and return its path.

    Each session is seeded by ``[master_seed, session_index]``, so equal
    specs produce byte-identical corpora and any single session can be
    rebuilt without the rest.
    """
    spec = spec or CorpusSpec()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prof = profile or resolve_profile(spec.profile)
    duration = spec.duration_s
    if activity_profiles is None:
        activity_profiles = load_activity_profiles(duration_s=duration)
    else:
        activity_profiles = {
            name: replace(ap, duration_s=duration)
            for name, ap in activity_profiles.items()
        }

    def activity_for(name: str) -> ActivityProfile:
        try:
            return activity_profiles[name]
        except KeyError:
            raise ProfileInvalid(
                f"corpus spec references unknown activity {name!r}"
            ) from None

    rows: list[tuple[str, str, str, str]] = []
    index = 0
    for group in spec.benign:
        ap = activity_for(group.activity)
        for _ in range(group.count):
            rng = np.random.default_rng([spec.master_seed, index])
            trace = generate_benign(prof, ap, rng)
            name = f"trace_{index:04d}_benign_{group.activity}.csv"
            write_trace(trace, out / name)
            rows.append((name, LABEL_BENIGN, group.activity, f"synth-{index:04d}"))
            index += 1
    onset_low = max(5, duration // 6)
    onset_high = max(onset_low + 1, duration // 2)
    idle_gap = max(2, duration // 10)
    for group in spec.threats:
        ap = activity_for(group.base_activity)
        for _ in range(group.count):
            rng = np.random.default_rng([spec.master_seed, index])
            onset = int(rng.integers(onset_low, onset_high))
            tspec = ThreatSpec(kind=group.kind, onset_s=onset, idle_gap_s=idle_gap)
            trace = generate_threat(prof, ap, tspec, rng)
            name = f"trace_{index:04d}_malicious_{group.kind}.csv"
            write_trace(trace, out / name)
            rows.append((name, LABEL_MALICIOUS, group.kind, f"synth-{index:04d}"))
            index += 1

    manifest = out / "manifest.csv"
    with manifest.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        writer.writerows(rows)
    meta = {
        "rng": RNG_DESCRIPTION,
        "sessions": index,
        "spec": spec.to_dict(),
    }
    (out / "corpus_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    log.info("generated %d sessions into %s", index, out)
    return manifest
