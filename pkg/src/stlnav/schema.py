"""Signal schema shared by the specification language and trace builders.

A schema maps signal names to their kind and unit. Real-valued signals carry
a unit tag (kph, m, s) that predicate thresholds are checked against;
Boolean signals are encoded as +1 / -1 in traces.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

KNOWN_UNITS = ("kph", "m", "s")


@dataclass(frozen=True)
class SignalInfo:
    """Kind and unit of one named signal."""

    kind: str  # "real" or "bool"
    unit: Optional[str] = None  # for real signals: "kph", "m" or "s"

    def __post_init__(self) -> None:
        if self.kind not in ("real", "bool"):
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.unit is not None and self.unit not in KNOWN_UNITS:
            raise ValueError(f"unknown unit {self.unit!r}")
        if self.kind == "bool" and self.unit is not None:
            raise ValueError("boolean signals carry no unit")


Schema = Mapping[str, SignalInfo]


def base_schema(labels: tuple[str, ...] = ()) -> dict[str, SignalInfo]:
    """Schema for the standard navigation signals plus one status_* Boolean
    per semantic label."""
    schema: dict[str, SignalInfo] = {
        "x": SignalInfo("real", "m"),
        "y": SignalInfo("real", "m"),
        "speed": SignalInfo("real", "kph"),
        "dist_o": SignalInfo("real", "m"),
        "stop_obs": SignalInfo("bool"),
        "at_stop": SignalInfo("bool"),
        "slow": SignalInfo("bool"),
        "stop": SignalInfo("bool"),
    }
    for label in labels:
        schema[f"status_{label}"] = SignalInfo("bool")
    return schema
