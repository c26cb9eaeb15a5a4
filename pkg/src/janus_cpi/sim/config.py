from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Mapping

SPEED_OF_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Invalid simulation or pipeline configuration."""


@dataclass(frozen=True)
class Inhibitor:
    """A beacon that puts nearby devices to sleep while it is powered.

    ``position`` of ``None`` means every device hears it regardless of location.
    """

    intervals: tuple[tuple[int, int], ...]
    position: tuple[float, float] | None = None
    range: float | None = None

    def active(self, t: float) -> bool:
        return any(s <= t < e for s, e in self.intervals)


@dataclass(frozen=True)
class SimConfig:
    start: int
    end: int
    seed: int = 0
    epoch_length: int = 30
    discovery_probability: float = 0.95
    max_neighbors: int = 20
    neighbor_expiry: int = 3
    ranging_period: int = 30
    ranging_window: float = 1.0
    slot_width: float = 0.05
    reply_delay: float = 290e-6
    range_noise_sigma: float = 0.1
    detection_range: float = 10.0
    max_range: float = 10.0
    speed_of_light: float = SPEED_OF_LIGHT
    inhibitor_sleep: int = 300
    inhibitor_detection_probability: float = 1.0
    inhibitors: tuple[Inhibitor, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise ConfigError(f"simulation start {self.start} must precede end {self.end}")
        if not 0 < self.discovery_probability <= 1:
            raise ConfigError("discovery_probability must lie in (0, 1]")
        if not 0 <= self.inhibitor_detection_probability <= 1:
            raise ConfigError("inhibitor_detection_probability must lie in [0, 1]")
        for name in ("epoch_length", "ranging_period", "ranging_window", "slot_width",
                     "reply_delay", "detection_range", "max_range", "inhibitor_sleep",
                     "speed_of_light"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.max_neighbors < 1 or self.neighbor_expiry < 1:
            raise ConfigError("max_neighbors and neighbor_expiry must be at least 1")
        if self.range_noise_sigma < 0:
            raise ConfigError("range_noise_sigma must be non-negative")
        if self.slot_width * self.max_neighbors > self.ranging_window + 1e-12:
            raise ConfigError(
                f"{self.max_neighbors} slots of {self.slot_width} s do not fit a "
                f"{self.ranging_window} s ranging window"
            )
        if self.ranging_window > self.ranging_period:
            raise ConfigError("ranging_window cannot exceed ranging_period")
        for inh in self.inhibitors:
            for s, e in inh.intervals:
                if s >= e:
                    raise ConfigError(f"inhibitor interval [{s}, {e}) is empty")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], **overrides: Any) -> "SimConfig":
        values = dict(data)
        values.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown simulation keys: {', '.join(unknown)}")
        for required in ("start", "end"):
            if required not in values:
                raise ConfigError(f"simulation config needs {required!r}")
        inhibitors = []
        for raw in values.pop("inhibitors", ()) or ():
            if isinstance(raw, Inhibitor):
                inhibitors.append(raw)
                continue
            pos = raw.get("position")
            inhibitors.append(
                Inhibitor(
                    intervals=tuple((int(s), int(e)) for s, e in raw.get("intervals", ())),
                    position=None if pos is None else (float(pos[0]), float(pos[1])),
                    range=None if raw.get("range") is None else float(raw["range"]),
                )
            )
        try:
            return cls(inhibitors=tuple(inhibitors), **values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_mapping(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["inhibitors"] = [
            {
                "intervals": [list(iv) for iv in inh.intervals],
                "position": None if inh.position is None else list(inh.position),
                "range": inh.range,
            }
            for inh in self.inhibitors
        ]
        return out
