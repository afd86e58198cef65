"""Sensor registry, condition vectors, and the integer state encoding.

A device profile fixes the sensor universe for one device class and pins the
bit layout every later stage depends on: bit ``i`` of a condition vector
belongs to the sensor with ``bit_index == i``, and a state code is the
little-endian integer reading of those bits, so codes live in ``[0, 2**n)``.

Two profiles ship built in.  ``watch9`` carries nine bits: four data-oriented
sensors (accelerometer, gyroscope, light, proximity) whose bits mean "value
moved beyond tolerance since the previous second", and five logic-oriented
bits (microphone, speaker, headset, and two GPS bits: receiver on, and
position actually moving) that mirror an on/off state directly.  ``phone10``
adds a camera bit for 1024 states.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import ProfileInvalid, ProfileMismatch, StateOutOfRange

# Hard cap on condition-vector width; state codes must stay cheap integers.
MAX_SENSOR_BITS = 16

# Readings per sample for multi-axis sensors; anything unlisted reports one.
DEFAULT_AXES = {"accelerometer": 3, "gyroscope": 3, "magnetometer": 3}

# A state code.  Kept as a plain int so sequences and count tables stay light.
DeviceState = int


class SensorKind(str, Enum):
    DATA = "data_oriented"
    LOGIC = "logic_oriented"


@dataclass(frozen=True)
class SensorSpec:
    """One sensor's identity and its slot in the condition vector."""

    id: str
    name: str
    kind: SensorKind
    bit_index: int
    change_tolerance: float = 0.0
    nominal_rate_hz: float = 1.0
    axes: int = 1

    def __post_init__(self) -> None:
        if not self.id:
            raise ProfileInvalid("sensor id must be non-empty")
        if self.change_tolerance < 0:
            raise ProfileInvalid(f"sensor {self.id!r}: change_tolerance must be >= 0")
        if self.nominal_rate_hz <= 0:
            raise ProfileInvalid(f"sensor {self.id!r}: nominal_rate_hz must be > 0")
        if self.bit_index < 0:
            raise ProfileInvalid(f"sensor {self.id!r}: bit_index must be >= 0")
        if not 1 <= self.axes <= 3:
            raise ProfileInvalid(f"sensor {self.id!r}: axes must be in 1..3")


@dataclass(frozen=True)
class DeviceProfile:
    """Immutable, validated sensor registry.  Safe to share across threads.

    Sensors are stored sorted by bit index, so ``profile.sensors[i]`` is the
    owner of bit ``i``.
    """

    name: str
    sensors: tuple[SensorSpec, ...]

    def __post_init__(self) -> None:
        if not self.name:
            raise ProfileInvalid("profile name must be non-empty")
        ordered = tuple(sorted(self.sensors, key=lambda s: s.bit_index))
        n = len(ordered)
        if n == 0:
            raise ProfileInvalid(f"profile {self.name!r}: needs at least one sensor")
        if n > MAX_SENSOR_BITS:
            raise ProfileInvalid(
                f"profile {self.name!r}: {n} sensors exceeds the cap of {MAX_SENSOR_BITS}"
            )
        indices = [s.bit_index for s in ordered]
        if indices != list(range(n)):
            raise ProfileInvalid(
                f"profile {self.name!r}: bit indices must be unique and contiguous "
                f"from 0, got {indices}"
            )
        ids = [s.id for s in ordered]
        if len(set(ids)) != n:
            raise ProfileInvalid(f"profile {self.name!r}: duplicate sensor ids in {ids}")
        object.__setattr__(self, "sensors", ordered)
        object.__setattr__(self, "_by_id", {s.id: s for s in ordered})

    @property
    def n(self) -> int:
        return len(self.sensors)

    @property
    def state_count(self) -> int:
        return 1 << self.n

    def sensor(self, sensor_id: str) -> SensorSpec:
        try:
            return self._by_id[sensor_id]  # type: ignore[attr-defined]
        except KeyError:
            raise ProfileInvalid(
                f"profile {self.name!r} has no sensor {sensor_id!r}"
            ) from None

    def sensor_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.sensors)


@dataclass(frozen=True)
class ConditionVector:
    """Per-second condition bits in profile bit order, values 0 or 1."""

    bits: tuple[int, ...]
    timestamp_s: int = 0


def encode_state(v: ConditionVector, profile: DeviceProfile) -> DeviceState:
    """Little-endian encoding: bit i contributes ``bits[i] << i``."""
    bits = v.bits
    if len(bits) != profile.n:
        raise ProfileMismatch(
            f"condition vector has {len(bits)} bits, profile {profile.name!r} "
            f"expects {profile.n}"
        )
    code = 0
    for i, b in enumerate(bits):
        if b:
            code |= 1 << i
    return code


def decode_state(
    code: DeviceState, profile: DeviceProfile, timestamp_s: int = 0
) -> ConditionVector:
    """Inverse of :func:`encode_state` for codes in ``[0, 2**n)``."""
    if not 0 <= code < profile.state_count:
        raise StateOutOfRange(
            f"state code {code} outside [0, {profile.state_count}) for "
            f"profile {profile.name!r}"
        )
    bits = tuple((code >> i) & 1 for i in range(profile.n))
    return ConditionVector(bits=bits, timestamp_s=timestamp_s)


def _sensor_from_dict(doc: dict, where: str) -> SensorSpec:
    try:
        kind_raw = doc["kind"]
        try:
            kind = SensorKind(kind_raw)
        except ValueError:
            raise ProfileInvalid(
                f"{where}: kind must be one of "
                f"{[k.value for k in SensorKind]}, got {kind_raw!r}"
            ) from None
        sensor_id = doc["id"]
        return SensorSpec(
            id=sensor_id,
            name=doc["name"],
            kind=kind,
            bit_index=int(doc["bit_index"]),
            change_tolerance=float(doc.get("change_tolerance", 0.0)),
            nominal_rate_hz=float(doc.get("nominal_rate_hz", 1.0)),
            axes=int(doc.get("axes", DEFAULT_AXES.get(sensor_id, 1))),
        )
    except KeyError as exc:
        raise ProfileInvalid(f"{where}: missing required field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ProfileInvalid(f"{where}: {exc}") from None


def load_profile(path: str | Path) -> DeviceProfile:
    """Load and validate a profile JSON document.

    Expected shape::

        {"name": ..., "sensors": [{"id": ..., "name": ..., "kind": ...,
                                   "bit_index": ..., "change_tolerance": ...,
                                   "nominal_rate_hz": ...}, ...]}
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ProfileInvalid(f"cannot read profile {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ProfileInvalid(f"profile {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "name" not in doc or "sensors" not in doc:
        raise ProfileInvalid(f"profile {path} must be an object with 'name' and 'sensors'")
    sensors = tuple(
        _sensor_from_dict(s, f"profile {path} sensor[{i}]")
        for i, s in enumerate(doc["sensors"])
    )
    return DeviceProfile(name=str(doc["name"]), sensors=sensors)


def save_profile(profile: DeviceProfile, path: str | Path) -> None:
    doc = {
        "name": profile.name,
        "sensors": [
            {
                "id": s.id,
                "name": s.name,
                "kind": s.kind.value,
                "bit_index": s.bit_index,
                "change_tolerance": s.change_tolerance,
                "nominal_rate_hz": s.nominal_rate_hz,
                "axes": s.axes,
            }
            for s in profile.sensors
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _watch9() -> DeviceProfile:
    d, l = SensorKind.DATA, SensorKind.LOGIC
    return DeviceProfile(
        name="watch9",
        sensors=(
            SensorSpec("accelerometer", "Accelerometer", d, 0, 0.05, 50.0, 3),
            SensorSpec("gyroscope", "Gyroscope", d, 1, 0.01, 50.0, 3),
            SensorSpec("light", "Ambient light", d, 2, 2.0, 5.0, 1),
            SensorSpec("proximity", "Proximity", d, 3, 0.1, 2.0, 1),
            SensorSpec("microphone", "Microphone", l, 4, 0.0, 1.0, 1),
            SensorSpec("speaker", "Speaker", l, 5, 0.0, 1.0, 1),
            SensorSpec("gps_on", "GPS receiver active", l, 6, 0.0, 1.0, 1),
            SensorSpec("gps_location_changing", "GPS position moving", l, 7, 0.0, 1.0, 1),
            SensorSpec("headset", "Headset plugged", l, 8, 0.0, 1.0, 1),
        ),
    )


def _phone10() -> DeviceProfile:
    base = _watch9()
    camera = SensorSpec("camera", "Camera", SensorKind.LOGIC, 9, 0.0, 1.0, 1)
    return DeviceProfile(name="phone10", sensors=base.sensors + (camera,))


_BUILTINS = {"watch9": _watch9, "phone10": _phone10}


def builtin_profile(name: str) -> DeviceProfile:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ProfileInvalid(
            f"no built-in profile {name!r}; available: {sorted(_BUILTINS)}"
        ) from None


def resolve_profile(ref: str | Path) -> DeviceProfile:
    """Accept a built-in profile name or a path to a profile document."""
    if isinstance(ref, str) and ref in _BUILTINS:
        return _BUILTINS[ref]()
    return load_profile(ref)
