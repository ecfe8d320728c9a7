"""Unit conversions shared by the rotor and the scenario builder.

Time is measured in t0 = 1 / B(Hz) and energies in E0 = hbar / t0, so a level
at frequency nu sits at 2*pi*nu / B(Hz) in reduced units.
"""

from __future__ import annotations

import math

from scipy import constants

__all__ = [
    "DEBYE",
    "CM1_TO_MHZ",
    "field_amplitude",
    "coupling_over_hb",
    "time_unit",
    "mhz_to_reduced",
]

DEBYE = 3.33564e-30  # C m
CM1_TO_MHZ = constants.c * 100 / 1e6


def field_amplitude(intensity: float) -> float:
    """Peak electric field (V/m) of a plane wave with intensity in W/cm^2."""
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    return math.sqrt(2 * intensity * 1e4 / (constants.epsilon_0 * constants.c))


def coupling_over_hb(mu_debye: float, intensity: float, b_mhz: float) -> float:
    """mu * E / (h B): dipole coupling in units of the rotational constant."""
    return mu_debye * DEBYE * field_amplitude(intensity) / (constants.h * b_mhz * 1e6)


def time_unit(b_mhz: float) -> float:
    """t0 in seconds for a rotational constant B given in MHz."""
    if b_mhz <= 0:
        raise ValueError("B must be positive")
    return 1.0 / (b_mhz * 1e6)


def mhz_to_reduced(nu_mhz: float, b_mhz: float) -> float:
    """Angular frequency in units of 1/t0 for a frequency given in MHz."""
    return 2 * math.pi * nu_mhz / b_mhz
