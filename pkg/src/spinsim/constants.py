"""Internal unit system and physical constants.

Energies are expressed in micro-electronvolts (ueV), times in nanoseconds
(ns) and angular frequencies in rad/ns.  This keeps every quantity near
unity for the device parameters of interest (exchange couplings of
neV..ueV, gate times of ns..us).
"""

import math

# Reduced and plain Planck constant in ueV * ns (CODATA 2018).
HBAR = 0.6582119569
PLANCK = 4.135667696

TWO_PI = 2.0 * math.pi


def hz_to_rad_per_ns(frequency_hz: float) -> float:
    """Ordinary frequency in Hz -> angular frequency in rad/ns."""
    return TWO_PI * frequency_hz * 1e-9


def nev_to_uev(energy_nev: float) -> float:
    return energy_nev * 1e-3


def ps_to_ns(time_ps: float) -> float:
    return time_ps * 1e-3
