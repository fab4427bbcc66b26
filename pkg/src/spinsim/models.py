"""Qubit Hamiltonians for the three spin-qubit encodings.

Each model exposes the same two views of its Hamiltonian:

* the full multi-spin matrix (2x2, 4x4 or 8x8) in the product basis
  {|up>, |down>}^n with tensor factors ordered by electron index, and
* the effective 2x2 matrix in the logical basis, written as
  ``a0*I + ax*sx + ay*sy + az*sz`` with coefficients that are linear in
  the control-channel values.

The linear coefficient map is what the evolution engine consumes; the
full-space view is retained as a verification oracle (the logical
subspaces of the two- and three-spin models are exactly invariant, which
``leakage_check`` confirms).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import HBAR, hz_to_rad_per_ns
from .quantum_core import IDENTITY_2, SIGMA_X, SIGMA_Y, SIGMA_Z, expm_hermitian

MODE_PHYSICAL = "physical"
MODE_TABLE_LITERAL = "table_literal"
MODES = (MODE_PHYSICAL, MODE_TABLE_LITERAL)


def _embed(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Single-spin operator acting on `site` (0-based) of an n-spin register."""
    out = np.eye(1, dtype=complex)
    for k in range(n_sites):
        out = np.kron(out, op if k == site else IDENTITY_2)
    return out


def _exchange(site_a: int, site_b: int, n_sites: int) -> np.ndarray:
    """Heisenberg coupling sigma_a . sigma_b on an n-spin register."""
    total = np.zeros((2 ** n_sites, 2 ** n_sites), dtype=complex)
    for pauli in (SIGMA_X, SIGMA_Y, SIGMA_Z):
        total += _embed(pauli, site_a, n_sites) @ _embed(pauli, site_b, n_sites)
    return total


def build_ss_hamiltonian(omega_x: float, omega_y: float,
                         delta_omega_z: float = 0.0) -> np.ndarray:
    """Rotating-frame single-spin Hamiltonian (angular frequencies in rad/ns).

    H = (hbar/2) (delta_omega_z * sz + omega_x * sx + omega_y * sy), in ueV.
    """
    return 0.5 * HBAR * (delta_omega_z * SIGMA_Z + omega_x * SIGMA_X
                         + omega_y * SIGMA_Y)


def build_st_full(delta_ez_uev: float, j_uev: float) -> np.ndarray:
    """Two-spin Hamiltonian of the singlet-triplet qubit, 4x4 in ueV.

    H = (1/2) dEz (s1z - s2z) + (1/4) J s1.s2
    """
    h = 0.5 * delta_ez_uev * (_embed(SIGMA_Z, 0, 2) - _embed(SIGMA_Z, 1, 2))
    h += 0.25 * j_uev * _exchange(0, 1, 2)
    return h


def build_hy_full(ez_uev: float, j_uev: float, j1_uev: float,
                  j2_uev: float) -> np.ndarray:
    """Three-spin Hamiltonian of the hybrid qubit, 8x8 in ueV.

    H = (1/2) Ez (s1z + s2z + s3z) + (1/4) J s1.s2
        + (1/4) J1 s1.s3 + (1/4) J2 s2.s3
    """
    h = 0.5 * ez_uev * sum(_embed(SIGMA_Z, k, 3) for k in range(3))
    h += 0.25 * j_uev * _exchange(0, 1, 3)
    h += 0.25 * j1_uev * _exchange(0, 2, 3)
    h += 0.25 * j2_uev * _exchange(1, 2, 3)
    return h


def st_logical_basis() -> np.ndarray:
    """Columns |0> = |S>, |1> = |T0> in the {uu, ud, du, dd} product basis."""
    s = np.zeros(4, dtype=complex)
    t0 = np.zeros(4, dtype=complex)
    s[[1, 2]] = [1.0, -1.0]
    t0[[1, 2]] = [1.0, 1.0]
    return np.stack([s, t0], axis=1) / math.sqrt(2.0)


def hy_logical_basis() -> np.ndarray:
    """Columns |0> = |S>|up>, |1> = sqrt(1/3)|T0>|up> - sqrt(2/3)|T+>|down>.

    Electrons 1 and 2 form the singlet/triplet pair, electron 3 is the
    lone spin; basis index is the bit string b1 b2 b3 with up = 0.
    """
    v0 = np.zeros(8, dtype=complex)
    v0[0b010] = 1.0 / math.sqrt(2.0)   # |up down up>
    v0[0b100] = -1.0 / math.sqrt(2.0)  # |down up up>
    v1 = np.zeros(8, dtype=complex)
    v1[0b010] = 1.0 / math.sqrt(6.0)
    v1[0b100] = 1.0 / math.sqrt(6.0)
    v1[0b001] = -math.sqrt(2.0 / 3.0)  # |up up down>
    return np.stack([v0, v1], axis=1)


def project_to_logical(h_full: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """2x2 block [[<0|H|0>, <0|H|1>], [<1|H|0>, <1|H|1>]]."""
    h_full = np.asarray(h_full, dtype=complex)
    if h_full.shape[0] != basis.shape[0]:
        raise ValueError(
            f"dimension mismatch: H is {h_full.shape}, basis is {basis.shape}")
    return basis.conj().T @ h_full @ basis


def leakage_check(h_full: np.ndarray, basis: np.ndarray, t_grid,
                  psi_logical: np.ndarray) -> float:
    """Max over t of 1 - |P psi(t)|^2 with P the projector onto span(basis)."""
    psi0 = basis @ np.asarray(psi_logical, dtype=complex)
    u = expm_hermitian(h_full, np.asarray(t_grid, dtype=float))
    psi_t = u @ psi0
    inside = np.abs(basis.conj().T @ psi_t[..., None])[..., 0] ** 2
    return float(np.max(1.0 - inside.sum(axis=-1)))


# ---------------------------------------------------------------------------
# Parameter records (figure-caption units at the boundary, ueV/ns inside)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SSParams:
    """Single-spin qubit: Rabi strength and detuning as ordinary frequencies."""
    omega_over_2pi_hz: float
    delta_omega_z_over_2pi_hz: float = 0.0

    @property
    def omega(self) -> float:
        return hz_to_rad_per_ns(self.omega_over_2pi_hz)

    @property
    def delta_omega_z(self) -> float:
        return hz_to_rad_per_ns(self.delta_omega_z_over_2pi_hz)


@dataclass(frozen=True)
class STParams:
    """Singlet-triplet qubit: tunable exchange J and static gradient dEz."""
    j_uev: float
    delta_ez_uev: float

    def __post_init__(self):
        if self.j_uev < 0 or self.delta_ez_uev < 0:
            raise ValueError("ST couplings must be non-negative")


@dataclass(frozen=True)
class HYParams:
    """Hybrid qubit: Zeeman energy, fixed J and the pulsed-coupling ceiling."""
    ez_uev: float
    j_uev: float
    jmax_uev: float

    def __post_init__(self):
        if self.jmax_uev <= 0:
            raise ValueError("jmax must be positive")
        if not 0 <= self.j_uev:
            raise ValueError("J must be non-negative")


# ---------------------------------------------------------------------------
# Channel-level model objects consumed by the pulse and evolution layers
# ---------------------------------------------------------------------------

class QubitModel:
    """Shared behaviour: linear map channel values -> Pauli coefficients."""

    name: str
    channels: tuple
    dim_full: int

    def coeffs(self, values: np.ndarray) -> np.ndarray:
        """(..., C) channel values -> (..., 4) coefficients (a0, ax, ay, az)."""
        return values @ self.coeff_matrix.T + self.coeff_const

    def full_hamiltonian(self, values: np.ndarray) -> np.ndarray:
        h = self.full_const.copy()
        for op, v in zip(self.full_ops, np.asarray(values)):
            h += v * op
        return h

    def logical_hamiltonian(self, values: np.ndarray) -> np.ndarray:
        a0, ax, ay, az = self.coeffs(np.asarray(values, dtype=float))
        return (a0 * IDENTITY_2 + ax * SIGMA_X + ay * SIGMA_Y + az * SIGMA_Z)


class SSModel(QubitModel):
    name = "ss"
    channels = ("omega_x", "omega_y", "delta_omega_z")
    dim_full = 2
    noise_channels = ("delta_omega_z", "omega")

    def __init__(self, params: SSParams):
        self.params = params
        half = 0.5 * HBAR
        self.coeff_matrix = np.array([
            [0.0, 0.0, 0.0],
            [half, 0.0, 0.0],
            [0.0, half, 0.0],
            [0.0, 0.0, half],
        ])
        self.coeff_const = np.zeros(4)
        self.full_ops = [half * SIGMA_X, half * SIGMA_Y, half * SIGMA_Z]
        self.full_const = np.zeros((2, 2), dtype=complex)
        self.basis = np.eye(2, dtype=complex)

    def idle_values(self, mode: str) -> dict:
        return {"omega_x": 0.0, "omega_y": 0.0,
                "delta_omega_z": self.params.delta_omega_z}

    def noise_pattern(self, signal, noise_channel: str, noise_when_off: bool):
        """Per-segment coupling of a unit noise offset into the channels.

        The Rabi amplitude offset acts radially, along each segment's
        drive phase; segments with no drive reuse the first driven
        phase so a quasi-static source offset stays constant in time.
        """
        n_seg = len(signal.durations)
        seg = np.zeros((n_seg, len(self.channels)))
        idle = np.zeros(len(self.channels))
        if noise_channel == "delta_omega_z":
            seg[:, 2] = 1.0
            idle[2] = 1.0
            return seg, idle
        phases = signal.phases if signal.phases is not None else (None,) * n_seg
        default_phase = next((p for p in phases if p is not None), 0.0)
        for k, phase in enumerate(phases):
            amplitude = math.hypot(signal.values[k, 0], signal.values[k, 1])
            if amplitude == 0.0 and not noise_when_off:
                continue
            p = phase if phase is not None else default_phase
            seg[k, 0] = math.cos(p)
            seg[k, 1] = math.sin(p)
        if noise_when_off:
            idle[0] = math.cos(default_phase)
            idle[1] = math.sin(default_phase)
        return seg, idle


class STModel(QubitModel):
    name = "st"
    channels = ("j", "delta_ez")
    dim_full = 4
    noise_channels = ("delta_ez", "j")

    def __init__(self, params: STParams):
        self.params = params
        self.coeff_matrix = np.array([
            [-0.25, 0.0],
            [0.0, 1.0],
            [0.0, 0.0],
            [-0.5, 0.0],
        ])
        self.coeff_const = np.zeros(4)
        self.full_ops = [0.25 * _exchange(0, 1, 2),
                         0.5 * (_embed(SIGMA_Z, 0, 2) - _embed(SIGMA_Z, 1, 2))]
        self.full_const = np.zeros((4, 4), dtype=complex)
        self.basis = st_logical_basis()

    def idle_values(self, mode: str) -> dict:
        if mode == MODE_TABLE_LITERAL:
            return {"j": 0.0, "delta_ez": 0.0}
        return {"j": 0.0, "delta_ez": self.params.delta_ez_uev}

    def noise_pattern(self, signal, noise_channel: str, noise_when_off: bool):
        return _indicator_pattern(self, signal, noise_channel, noise_when_off)


class HYModel(QubitModel):
    name = "hy"
    channels = ("j", "j1", "j2")
    dim_full = 8
    noise_channels = ("j", "j1", "j2")

    def __init__(self, params: HYParams):
        self.params = params
        root3 = math.sqrt(3.0)
        self.coeff_matrix = np.array([
            [-0.25, -0.25, -0.25],
            [0.0, root3 / 4.0, -root3 / 4.0],
            [0.0, 0.0, 0.0],
            [-0.5, 0.25, 0.25],
        ])
        self.coeff_const = np.array([0.5 * params.ez_uev, 0.0, 0.0, 0.0])
        self.full_ops = [0.25 * _exchange(0, 1, 3),
                         0.25 * _exchange(0, 2, 3),
                         0.25 * _exchange(1, 2, 3)]
        self.full_const = 0.5 * params.ez_uev * sum(
            _embed(SIGMA_Z, k, 3) for k in range(3))
        self.basis = hy_logical_basis()

    def idle_values(self, mode: str) -> dict:
        # J is not gate-tunable: it stays on at its static value in every
        # mode, during every step and at idle.
        return {"j": self.params.j_uev, "j1": 0.0, "j2": 0.0}

    def noise_pattern(self, signal, noise_channel: str, noise_when_off: bool):
        return _indicator_pattern(self, signal, noise_channel, noise_when_off)


class NoOpModel(QubitModel):
    """Reference 'qubit' with no controls: the state never moves."""
    name = "noop"
    channels = ()
    dim_full = 2
    noise_channels = ()

    def __init__(self):
        self.coeff_matrix = np.zeros((4, 0))
        self.coeff_const = np.zeros(4)
        self.full_ops = []
        self.full_const = np.zeros((2, 2), dtype=complex)
        self.basis = np.eye(2, dtype=complex)

    def idle_values(self, mode: str) -> dict:
        return {}

    def noise_pattern(self, signal, noise_channel: str, noise_when_off: bool):
        raise ValueError("the no-operation reference has no noise channels")


def _indicator_pattern(model, signal, noise_channel, noise_when_off):
    """Unit offset on one named channel, gated by where it is nominally on."""
    if noise_channel not in model.channels:
        raise ValueError(f"unknown noise channel {noise_channel!r}")
    col = model.channels.index(noise_channel)
    n_seg = len(signal.durations)
    seg = np.zeros((n_seg, len(model.channels)))
    idle = np.zeros(len(model.channels))
    if noise_when_off:
        seg[:, col] = 1.0
        idle[col] = 1.0
    else:
        seg[:, col] = (signal.values[:, col] != 0.0).astype(float)
        idle[col] = 1.0 if signal.idle[col] != 0.0 else 0.0
    return seg, idle
