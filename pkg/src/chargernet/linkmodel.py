"""Coarse link feasibility: attenuation laws, technique ranges, EIRP cap."""
from __future__ import annotations

from dataclasses import dataclass

EIRP_CAP_W = 4.0


@dataclass(frozen=True)
class TechniqueProfile:
    technique: str
    field: str  # "near" or "far"
    min_range: float  # meters
    max_range: float  # meters
    notes: str = ""


PROFILES: dict[str, TechniqueProfile] = {
    "inductive": TechniqueProfile(
        "inductive", "near", 0.001, 0.05, "millimeters to a few centimeters"
    ),
    "resonance": TechniqueProfile(
        "resonance", "near", 0.01, 5.0, "centimeters to a few meters"
    ),
    # kilometer-scale beaming exists but is capped for consumer devices
    "microwave": TechniqueProfile(
        "microwave", "far", 0.1, 50.0, "several tens of meters"
    ),
}


def profile(technique: str) -> TechniqueProfile:
    try:
        return PROFILES[technique]
    except KeyError:
        raise ValueError(f"unknown technique {technique!r}") from None


def attenuation_factor(field: str, d: float, d0: float) -> float:
    """Relative received power at distance ``d`` versus reference ``d0``.

    Near field falls with the cube of distance, far field with distance.
    """
    if d0 <= 0 or d < d0:
        raise ValueError(f"need d >= d0 > 0, got d={d}, d0={d0}")
    ratio = d0 / d
    if field == "near":
        return ratio**3
    if field == "far":
        return ratio
    raise ValueError(f"unknown field {field!r}")


def technique_attenuation(technique: str, d: float, d0: float | None = None) -> float:
    prof = profile(technique)
    return attenuation_factor(prof.field, d, prof.min_range if d0 is None else d0)


def in_range(technique: str, d: float) -> bool:
    if d < 0:
        raise ValueError("distance must be nonnegative")
    return d <= profile(technique).max_range


def eirp_check(device_power: float, antenna_gain_dbi: float) -> bool:
    if device_power < 0:
        raise ValueError("device power must be nonnegative")
    return device_power * 10 ** (antenna_gain_dbi / 10) <= EIRP_CAP_W


def validate_range(technique: str, effective_range: float) -> None:
    """Raise ValueError unless the range sits inside the technique's bounds."""
    prof = profile(technique)
    if not (prof.min_range <= effective_range <= prof.max_range):
        raise ValueError(
            f"effective range {effective_range} m outside [{prof.min_range}, "
            f"{prof.max_range}] m for {technique}"
        )
