"""Trace and manifest ingestion.

Trace CSV format, one reading per row, header included::

    timestamp_ms,sensor_id,v0,v1,v2

Data-oriented sensors fill ``v0..v(axes-1)`` with floats and leave the rest
empty; logic-oriented sensors put 0 or 1 in ``v0``.  Manifest CSV format::

    trace_path,label,tag,source_id

with ``label`` one of ``benign``/``malicious`` and ``trace_path`` resolved
relative to the manifest's own directory.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from .errors import ManifestError, ParseError, SixthSenseError, UnknownSensor
from .profiles import DeviceProfile, SensorKind

log = logging.getLogger(__name__)

TRACE_HEADER = ("timestamp_ms", "sensor_id", "v0", "v1", "v2")
MANIFEST_HEADER = ("trace_path", "label", "tag", "source_id")

LABEL_BENIGN = "benign"
LABEL_MALICIOUS = "malicious"
LABELS = (LABEL_BENIGN, LABEL_MALICIOUS)

# Benign session tags accepted by default: the seven wearable activities plus
# the two that only make sense for a handset.
WATCH_ACTIVITIES = (
    "sleeping",
    "driving_driver",
    "driving_passenger",
    "walking",
    "gaming",
    "browsing",
    "phone_call",
)
PHONE_ONLY_ACTIVITIES = ("walking_pocket", "video_call")
DEFAULT_ACTIVITIES = WATCH_ACTIVITIES + PHONE_ONLY_ACTIVITIES


class SensorReading(NamedTuple):
    """One raw sample.  Exactly one of values/logic_state is set."""

    timestamp_ms: int
    sensor_id: str
    values: tuple[float, ...] | None
    logic_state: int | None


@dataclass
class RawTrace:
    """Parsed readings for one session, sorted by timestamp.

    ``duration_ms`` equals the last reading's timestamp.  ``out_of_order``
    counts rows the parser had to re-sort; nonzero means the source device
    delivered jittered timestamps, not that data was lost.
    """

    profile_name: str
    readings: list[SensorReading] = field(default_factory=list)
    duration_ms: int = 0
    out_of_order: int = 0


@dataclass(frozen=True)
class SessionRecord:
    """One manifest entry with its trace already parsed."""

    trace: RawTrace
    label: str
    tag: str
    source_id: str


def parse_trace(path: str | Path, profile: DeviceProfile) -> RawTrace:
    """Parse a trace CSV against a profile.

    Raises :class:`ParseError` (with the offending 1-based line number) for
    malformed rows and :class:`UnknownSensor` for sensors the profile does
    not declare.  Out-of-order timestamps are tolerated: rows are re-sorted
    and counted in ``RawTrace.out_of_order``.
    """
    path = Path(path)
    # (kind is data, expected arity) per sensor id, resolved once up front.
    expect = {
        s.id: (s.kind is SensorKind.DATA, s.axes) for s in profile.sensors
    }
    readings: list[SensorReading] = []
    out_of_order = 0
    prev_ts = -1
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise ParseError(f"cannot read trace {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        lineno = 0
        for row in reader:
            lineno += 1
            if lineno == 1:
                if tuple(row) != TRACE_HEADER:
                    raise ParseError(
                        f"bad header {row!r}, expected {','.join(TRACE_HEADER)}",
                        line=1,
                    )
                continue
            if not row:
                continue
            if not 3 <= len(row) <= 5:
                raise ParseError(f"expected 3..5 columns, got {len(row)}", line=lineno)
            try:
                ts = int(row[0])
            except ValueError:
                raise ParseError(f"bad timestamp {row[0]!r}", line=lineno) from None
            if ts < 0:
                raise ParseError(f"negative timestamp {ts}", line=lineno)
            sensor_id = row[1]
            info = expect.get(sensor_id)
            if info is None:
                raise UnknownSensor(
                    f"sensor {sensor_id!r} not in profile {profile.name!r}",
                    line=lineno,
                )
            is_data, axes = info
            raw_vals = [c for c in row[2:] if c != ""]
            if is_data:
                if len(raw_vals) != axes:
                    raise ParseError(
                        f"sensor {sensor_id!r} expects {axes} value(s), "
                        f"got {len(raw_vals)}",
                        line=lineno,
                    )
                try:
                    vals = tuple(float(c) for c in raw_vals)
                except ValueError:
                    raise ParseError(
                        f"non-numeric value in {raw_vals!r}", line=lineno
                    ) from None
                if not all(math.isfinite(v) for v in vals):
                    raise ParseError(f"non-finite value in {vals!r}", line=lineno)
                reading = SensorReading(ts, sensor_id, vals, None)
            else:
                if len(raw_vals) != 1:
                    raise ParseError(
                        f"logic sensor {sensor_id!r} expects exactly one value, "
                        f"got {len(raw_vals)}",
                        line=lineno,
                    )
                try:
                    state = float(raw_vals[0])
                except ValueError:
                    raise ParseError(
                        f"non-numeric value {raw_vals[0]!r}", line=lineno
                    ) from None
                if state not in (0.0, 1.0):
                    raise ParseError(
                        f"logic sensor {sensor_id!r} value must be 0 or 1, "
                        f"got {raw_vals[0]!r}",
                        line=lineno,
                    )
                reading = SensorReading(ts, sensor_id, None, int(state))
            if ts < prev_ts:
                out_of_order += 1
            else:
                prev_ts = ts
            readings.append(reading)
    if out_of_order:
        log.warning("%s: re-sorted %d out-of-order rows", path, out_of_order)
        readings.sort(key=lambda r: r.timestamp_ms)
    duration = readings[-1].timestamp_ms if readings else 0
    return RawTrace(
        profile_name=profile.name,
        readings=readings,
        duration_ms=duration,
        out_of_order=out_of_order,
    )


def load_manifest(
    path: str | Path,
    profile: DeviceProfile,
    activities: tuple[str, ...] = DEFAULT_ACTIVITIES,
) -> list[SessionRecord]:
    """Load a manifest and eagerly parse every referenced trace.

    All problems are collected and reported together in one
    :class:`ManifestError` so a broken corpus surfaces as a single
    actionable report instead of a fix-one-rerun loop.
    """
    path = Path(path)
    base = path.parent
    records: list[SessionRecord] = []
    problems: list[str] = []
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows or tuple(rows[0]) != MANIFEST_HEADER:
        raise ManifestError(
            f"manifest {path}: bad header, expected {','.join(MANIFEST_HEADER)}"
        )
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            problems.append(f"line {lineno}: expected 4 columns, got {len(row)}")
            continue
        trace_path, label, tag, source_id = row
        if label not in LABELS:
            problems.append(
                f"line {lineno}: label must be one of {LABELS}, got {label!r}"
            )
            continue
        if label == LABEL_BENIGN and tag not in activities:
            problems.append(
                f"line {lineno}: benign tag {tag!r} not in the configured "
                f"activity list"
            )
            continue
        resolved = Path(trace_path)
        if not resolved.is_absolute():
            resolved = base / resolved
        try:
            trace = parse_trace(resolved, profile)
        except SixthSenseError as exc:
            problems.append(f"line {lineno} ({trace_path}): {exc}")
            continue
        records.append(
            SessionRecord(trace=trace, label=label, tag=tag, source_id=source_id)
        )
    if problems:
        raise ManifestError(
            f"manifest {path}: {len(problems)} unusable entr"
            f"{'y' if len(problems) == 1 else 'ies'}:\n  " + "\n  ".join(problems)
        )
    return records
