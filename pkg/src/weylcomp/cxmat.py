"""Dense complex matrix helpers.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Everything here is a
pure function; nothing caches state between calls.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NonFinite, NonHermitian, NonSquare

HERMITIAN_GATE = 1e-6


@dataclass(frozen=True)
class HermEig:
    """Eigendecomposition ``M = V diag(w) V^dagger`` with ``w`` ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_cmatrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise NonSquare(f"expected a 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix contains NaN or Inf entries")
    return a


def frob(m) -> float:
    return float(np.linalg.norm(m))


def hermitian_part(m) -> np.ndarray:
    """Return ``(M + M^dagger)/2`` after checking that ``M`` is nearly Hermitian.

    Raises :class:`NonHermitian` when ``||M - M^dagger||_F`` exceeds
    ``1e-6 * max(1, ||M||_F)`` and :class:`NonSquare` for rectangular input.
    """
    a = as_cmatrix(m)
    if a.shape[0] != a.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {a.shape}")
    defect = frob(a - a.conj().T)
    if defect > HERMITIAN_GATE * max(1.0, frob(a)):
        raise NonHermitian(f"Hermitian defect {defect:.3e} is above the gate")
    return 0.5 * (a + a.conj().T)


def herm_eig(m) -> HermEig:
    h = hermitian_part(m)
    w, v = np.linalg.eigh(h)
    return HermEig(eigenvalues=w, eigenvectors=v)


def eigvalsh(m) -> np.ndarray:
    return np.linalg.eigvalsh(hermitian_part(m))


def min_eig(m) -> float:
    return float(eigvalsh(m)[0])


def is_psd(m, tol: float = 1e-10) -> bool:
    return min_eig(m) >= -tol


def psd_project(m) -> np.ndarray:
    """Frobenius-nearest positive semidefinite matrix (negative eigenvalues clamped to 0)."""
    e = herm_eig(m)
    w = np.clip(e.eigenvalues, 0.0, None)
    v = e.eigenvectors
    out = (v * w) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def kron(a, b) -> np.ndarray:
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (g + g.conj().T)


def random_psd(n: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    k = n if rank is None else rank
    g = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    return g @ g.conj().T


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# ---------------------------------------------------------------------------
# Dykstra projections onto (PSD cone) ∩ (affine set)
# ---------------------------------------------------------------------------


@dataclass
class DykstraResult:
    status: str  # "certified", "separated", "exhausted"
    x_psd: np.ndarray
    x_aff: np.ndarray
    gap: float
    iterations: int
    certificate: object = None
    gap_history: list = field(default_factory=list)


def dykstra_psd_affine(
    x0: np.ndarray,
    project_affine: Callable[[np.ndarray], np.ndarray],
    certify: Callable[[np.ndarray, np.ndarray], object],
    *,
    infeas_tol: float,
    max_iter: int,
    check_every: int = 20,
    stall_window: int = 400,
) -> DykstraResult:
    """Run Dykstra's algorithm between the PSD cone and an affine set.

    ``certify(x_psd, x_aff)`` is called every ``check_every`` iterations and
    returns something truthy once an acceptable point has been found.

    The run is declared ``"separated"`` when the distance between the two
    current iterates is at or above ``infeas_tol`` and cannot reach it within the
    remaining budget even if it kept shrinking at its recent rate (slope measured
    over the last ``stall_window`` iterations, extrapolated linearly). Gaps of
    feasible instances decay at least like ``1/k``, so the extrapolation crosses
    zero for them. This is a heuristic signal, not a dual certificate.
    """
    y = project_affine(np.asarray(x0, dtype=complex))
    correction = np.zeros_like(y)
    x = y
    gap = np.inf
    history: list[tuple[int, float]] = []
    it = 0
    for it in range(1, max_iter + 1):
        r = y - correction
        x = psd_project(r)
        correction = x - r
        y = project_affine(x)
        if it % check_every and it != max_iter:
            continue
        gap = frob(x - y)
        history.append((it, gap))
        cert = certify(x, y)
        if cert:
            return DykstraResult("certified", x, y, gap, it, cert, history)
        if gap >= infeas_tol and it >= stall_window:
            past = [(k, g) for (k, g) in history if k <= it - stall_window]
            if past:
                k0, g0 = past[-1]
                slope = max(g0 - gap, 0.0) / (it - k0)
                if gap - slope * (max_iter - it) >= infeas_tol:
                    return DykstraResult("separated", x, y, gap, it, None, history)
    return DykstraResult("exhausted", x, y, gap, it, None, history)
