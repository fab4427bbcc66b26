"""Exact small-matrix quantum algebra.

Dense complex matrices up to 8x8: Pauli operators, closed-form SU(2)
propagators, spectral-decomposition propagators, density matrices, Bloch
vectors and the Uhlmann state fidelity.  Everything here is a pure
function on immutable inputs.
"""

from __future__ import annotations

import numpy as np

from .constants import HBAR

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

for _m in (SIGMA_X, SIGMA_Y, SIGMA_Z, IDENTITY_2):
    _m.setflags(write=False)

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
TRACE_TOL = 1e-12


class MatrixValidationError(ValueError):
    """A matrix failed one of its structural invariants."""


def is_hermitian(matrix: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    scale = max(1.0, float(np.abs(matrix).max(initial=0.0)))
    return bool(np.abs(matrix - matrix.conj().T).max(initial=0.0) <= tol * scale)


def unitarity_defect(u: np.ndarray) -> float:
    """Max-entry deviation of U†U from the identity."""
    n = u.shape[-1]
    defect = u.conj().swapaxes(-1, -2) @ u - np.eye(n)
    return float(np.abs(defect).max())


def su2_propagator(a0, ax, ay, az, dt, hbar: float = HBAR) -> np.ndarray:
    """Closed-form exp(-i H dt / hbar) for H = a0*I + ax*sx + ay*sy + az*sz.

    All coefficient arguments broadcast, so a whole batch of 2x2
    propagators is produced in one call; the result has shape
    broadcast(...)+(2, 2).  The zero generator maps to the identity.
    """
    a0, ax, ay, az, dt = np.broadcast_arrays(a0, ax, ay, az, dt)
    norm = np.sqrt(ax * ax + ay * ay + az * az)
    angle = norm * dt / hbar
    cos = np.cos(angle)
    sinc = np.where(norm > 0.0, np.sin(angle) / np.where(norm > 0.0, norm, 1.0), dt / hbar)
    phase = np.exp(-1j * a0 * dt / hbar)
    u = np.empty(np.shape(a0) + (2, 2), dtype=complex)
    u[..., 0, 0] = phase * (cos - 1j * sinc * az)
    u[..., 0, 1] = phase * (-1j * sinc * (ax - 1j * ay))
    u[..., 1, 0] = phase * (-1j * sinc * (ax + 1j * ay))
    u[..., 1, 1] = phase * (cos + 1j * sinc * az)
    return u


def pauli_expm(a0: float, ax: float, ay: float, az: float, t: float,
               hbar: float = HBAR) -> np.ndarray:
    """Exact 2x2 unitary exp(-i(a0*I + a.sigma)t/hbar)."""
    values = (a0, ax, ay, az, t, hbar)
    if not all(np.isfinite(v) for v in values):
        raise ValueError("non-finite input to pauli_expm")
    if t < 0:
        raise ValueError("negative evolution time")
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    return su2_propagator(float(a0), float(ax), float(ay), float(az), float(t), hbar)


def expm_hermitian(h: np.ndarray, t, hbar: float = HBAR) -> np.ndarray:
    """exp(-i H t / hbar) for Hermitian H via spectral decomposition.

    `t` may be a scalar or an array; an array yields a batch of unitaries
    sharing the same eigendecomposition.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, tol=1e-10):
        raise MatrixValidationError("matrix is not Hermitian within tolerance")
    try:
        eigvals, eigvecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - numpy rarely fails here
        raise MatrixValidationError(f"eigendecomposition failed: {exc}") from exc
    t = np.asarray(t, dtype=float)
    phases = np.exp(-1j * np.multiply.outer(t, eigvals) / hbar)
    u = np.einsum("ij,...j,kj->...ik", eigvecs, phases, eigvecs.conj())
    return u


def expm_hermitian_batch(h: np.ndarray, dt: np.ndarray, hbar: float = HBAR) -> np.ndarray:
    """Batched exp(-i H_k dt_k / hbar) for a stack of Hermitian matrices."""
    eigvals, eigvecs = np.linalg.eigh(h)
    phases = np.exp(-1j * eigvals * dt[..., None] / hbar)
    return np.einsum("...ij,...j,...kj->...ik", eigvecs, phases, eigvecs.conj())


def compose_chain(unitaries: np.ndarray) -> np.ndarray:
    """Ordered product U[n-1] @ ... @ U[0] of a stack of square matrices.

    Uses pairwise tree reduction along axis -3, which keeps the number of
    broadcast matmul calls logarithmic in the chain length.  Leading axes
    are treated as independent batches.
    """
    u = unitaries
    while u.shape[-3] > 1:
        n = u.shape[-3]
        m = n // 2
        paired = np.matmul(u[..., 1:2 * m:2, :, :], u[..., 0:2 * m:2, :, :])
        if n % 2:
            u = np.concatenate([paired, u[..., 2 * m:, :, :]], axis=-3)
        else:
            u = paired
    return u[..., 0, :, :]


def pure_state_density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def validate_density_matrix(rho: np.ndarray, tol: float = TRACE_TOL) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise MatrixValidationError("density matrix must be square")
    if abs(np.trace(rho) - 1.0) > 1e-9:
        raise MatrixValidationError(f"trace(rho) = {np.trace(rho)} != 1")
    if not is_hermitian(rho, tol=1e-9):
        raise MatrixValidationError("density matrix is not Hermitian")
    eigvals = np.linalg.eigvalsh(rho)
    if eigvals.min() < -1e-9:
        raise MatrixValidationError(f"negative eigenvalue {eigvals.min()}")
    return rho


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    # Clamp tiny negative eigenvalues produced by round-off before sqrt.
    eigvals, eigvecs = np.linalg.eigh(rho)
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.conj().T


def state_fidelity(rho_ideal: np.ndarray, rho_real: np.ndarray) -> float:
    """Uhlmann fidelity F = [tr sqrt(sqrt(r1) r2 sqrt(r1))]^2, in [0, 1]."""
    rho_ideal = validate_density_matrix(rho_ideal)
    rho_real = validate_density_matrix(rho_real)
    if rho_ideal.shape != rho_real.shape:
        raise MatrixValidationError(
            f"dimension mismatch {rho_ideal.shape} vs {rho_real.shape}")
    sqrt_ideal = _psd_sqrt(rho_ideal)
    inner = sqrt_ideal @ rho_real @ sqrt_ideal
    eigvals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    value = float(np.sqrt(eigvals).sum() ** 2)
    return min(max(value, 0.0), 1.0)


def pure_overlap_fidelity(psi_ideal: np.ndarray, psi_real: np.ndarray):
    """|<ideal|real>|^2, the Uhlmann fidelity specialised to pure states.

    `psi_real` may carry leading batch axes.
    """
    amp = np.einsum("i,...i->...", psi_ideal.conj(), psi_real)
    return (amp * amp.conj()).real


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    """(x, y, z) = (tr rho sx, tr rho sy, tr rho sz) for a 2x2 rho."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise MatrixValidationError("Bloch vector requires a 2x2 density matrix")
    x = np.trace(rho @ SIGMA_X).real
    y = np.trace(rho @ SIGMA_Y).real
    z = np.trace(rho @ SIGMA_Z).real
    return np.array([x, y, z])


def trace_distance(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """(1/2) tr |rho_a - rho_b|."""
    eigvals = np.linalg.eigvalsh(np.asarray(rho_a) - np.asarray(rho_b))
    return 0.5 * float(np.abs(eigvals).sum())
