"""Gaussian channels on R^{2N}, handled purely through their matrix conditions.

A Gaussian channel is described by ``(A0, B0, c0)`` and acts on Weyl operators as

    Phi(W(z)) = exp(-z^T B0 z / 4 - i c0^T z) W(A0 z).

It is completely positive when ``B0 + i Omega - i A0^T Omega A0`` is positive
semidefinite, and Weyl-covariant when ``A0 = I`` and ``B0 >= 0``. Two covariant
channels with noise matrices ``B11`` and ``B22`` are compatible if some real
``B12`` makes

    [[B11,              B12 - i Omega],
     [B12^T + i Omega^T, B22         ]]

positive semidefinite. No operator on L^2(R^N) is ever built.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import cxmat
from .errors import DimensionMismatch, InvalidJoint, ParamOutOfRange, SingularB

MAX_N = 8
PSD_TOL = 1e-9
SYM_TOL = 1e-12


def omega_matrix(n: int) -> np.ndarray:
    """``[[0, I_N], [-I_N, 0]]``."""
    if n < 1:
        raise ParamOutOfRange("N must be >= 1")
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class SymplecticSpace:
    N: int
    cap: int = MAX_N

    def __post_init__(self):
        if not 1 <= self.N <= self.cap:
            raise ParamOutOfRange(f"N must lie in [1, {self.cap}], got {self.N}")

    @property
    def dim(self) -> int:
        return 2 * self.N

    @property
    def Omega(self) -> np.ndarray:
        return omega_matrix(self.N)


def _real_square(m, size: int, name: str) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.shape != (size, size):
        raise DimensionMismatch(f"{name} must be {size}x{size}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionMismatch(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True, eq=False)
class GaussChannel:
    N: int
    A0: np.ndarray
    B0: np.ndarray
    c0: Optional[np.ndarray] = None

    def __post_init__(self):
        SymplecticSpace(self.N)
        k = 2 * self.N
        object.__setattr__(self, "A0", _real_square(self.A0, k, "A0"))
        object.__setattr__(self, "B0", _real_square(self.B0, k, "B0"))
        c = np.zeros(k) if self.c0 is None else np.asarray(self.c0, dtype=float).ravel()
        if c.size != k:
            raise DimensionMismatch(f"c0 must have length {k}")
        object.__setattr__(self, "c0", c)

    @classmethod
    def covariant(cls, B0, c0=None) -> "GaussChannel":
        b = np.asarray(B0, dtype=float)
        return cls(b.shape[0] // 2, np.eye(b.shape[0]), b, c0)


@dataclass(frozen=True, eq=False)
class GaussJoint:
    N: int
    B: np.ndarray
    c: Optional[np.ndarray] = None
    m: int = 2

    def __post_init__(self):
        SymplecticSpace(self.N)
        if self.m < 2:
            raise ParamOutOfRange("a joint needs m >= 2 parties")
        k = 2 * self.N * self.m
        b = _real_square(self.B, k, "B")
        if np.max(np.abs(b - b.T)) > SYM_TOL * max(1.0, np.max(np.abs(b))):
            raise InvalidJoint("B is not symmetric")
        object.__setattr__(self, "B", 0.5 * (b + b.T))
        c = np.zeros(k) if self.c is None else np.asarray(self.c, dtype=float).ravel()
        if c.size != k:
            raise DimensionMismatch(f"c must have length {k}")
        object.__setattr__(self, "c", c)

    def block(self, k: int, l: int) -> np.ndarray:
        s = 2 * self.N
        return self.B[k * s:(k + 1) * s, l * s:(l + 1) * s]

    @classmethod
    def from_blocks(cls, B11, B22, B12=None, c=None) -> "GaussJoint":
        B11 = np.asarray(B11, dtype=float)
        B12 = np.zeros_like(B11) if B12 is None else np.asarray(B12, dtype=float)
        B = np.block([[B11, B12], [B12.T, np.asarray(B22, dtype=float)]])
        return cls(B11.shape[0] // 2, B, c)


@dataclass
class MatrixCheck:
    ok: bool
    min_eig: float
    extra: Optional[dict] = None

    def to_json(self) -> dict:
        doc = {"ok": bool(self.ok), "min_eig": float(self.min_eig)}
        if self.extra:
            doc.update(self.extra)
        return doc


@dataclass
class ChannelCheck:
    valid: bool
    covariant: bool
    min_eig: float


def validate_channel(ch: GaussChannel, tol: float = 1e-10) -> ChannelCheck:
    om = omega_matrix(ch.N)
    b = ch.B0
    sym_defect = float(np.max(np.abs(b - b.T)))
    h = b + 1j * om - 1j * ch.A0.T @ om @ ch.A0
    lam = float(np.linalg.eigvalsh(0.5 * (h + h.conj().T))[0])
    valid = sym_defect <= tol and lam >= -tol
    covariant = (
        bool(np.max(np.abs(ch.A0 - np.eye(2 * ch.N))) <= tol)
        and sym_defect <= tol
        and float(np.linalg.eigvalsh(0.5 * (b + b.T))[0]) >= -tol
    )
    return ChannelCheck(valid, covariant, lam)


def joint_block_matrix(B: np.ndarray, N: int, m: int) -> np.ndarray:
    """``B`` with ``-i Omega`` added to every strictly upper off-diagonal block and
    ``+i Omega^T`` to every strictly lower one."""
    om = omega_matrix(N)
    s = 2 * N
    h = np.asarray(B, dtype=complex).copy()
    for k in range(m):
        for l in range(m):
            if k < l:
                h[k * s:(k + 1) * s, l * s:(l + 1) * s] -= 1j * om
            elif k > l:
                h[k * s:(k + 1) * s, l * s:(l + 1) * s] += 1j * om.T
    return h


def covariant_joint_check(joint: GaussJoint, tol: float = PSD_TOL) -> MatrixCheck:
    h = joint_block_matrix(joint.B, joint.N, joint.m)
    lam = float(np.linalg.eigvalsh(h)[0])
    return MatrixCheck(lam >= -tol, lam)


def margins_of_joint(joint: GaussJoint) -> list[GaussChannel]:
    chk = covariant_joint_check(joint)
    if not chk.ok:
        raise InvalidJoint(f"joint fails the block condition (min_eig {chk.min_eig:.3e})")
    s = 2 * joint.N
    eye = np.eye(s)
    return [
        GaussChannel(joint.N, eye, joint.block(k, k), joint.c[k * s:(k + 1) * s])
        for k in range(joint.m)
    ]


def necessary_compat(B, C, factor: float = 2.0, tol: float = PSD_TOL, max_cond: float = 1e12) -> MatrixCheck:
    """Test ``Omega C Omega^T - factor * B^{-1} >= 0``.

    ``B`` is the noise matrix of the first channel and ``C`` of the second. The
    condition number of ``B`` is returned in ``extra``.
    """
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    if B.shape != C.shape or B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] % 2:
        raise DimensionMismatch("B and C must be square of the same even size")
    cond = float(np.linalg.cond(B))
    if not np.isfinite(cond) or cond > max_cond:
        raise SingularB(f"B is singular or ill-conditioned (cond {cond:.3e})")
    om = omega_matrix(B.shape[0] // 2)
    h = om @ C @ om.T - factor * np.linalg.inv(B)
    lam = float(np.linalg.eigvalsh(0.5 * (h + h.T))[0])
    return MatrixCheck(lam >= -tol, lam, {"cond": cond, "factor": float(factor)})


@dataclass(frozen=True)
class GaussOptions:
    psd_tol: float = PSD_TOL
    infeas_tol: float = 1e-5
    max_iter: int = 20_000
    check_every: int = 10


@dataclass
class GaussVerdict:
    status: str
    B12: Optional[np.ndarray] = None
    min_eig: float = float("nan")
    gap: float = float("nan")
    iterations: int = 0

    def to_json(self) -> dict:
        doc = {
            "status": self.status,
            "min_eig": float(self.min_eig),
            "gap": float(self.gap),
            "iterations": int(self.iterations),
        }
        if self.B12 is not None:
            doc["B12"] = [[float(x) for x in row] for row in self.B12]
        return doc


def sufficient_compat(B11, B22, opts: GaussOptions | None = None, **kw) -> GaussVerdict:
    """Search for a real ``B12`` satisfying the joint block condition.

    Dykstra projections between the PSD cone and the affine set of Hermitian
    matrices with the prescribed diagonal blocks and an off-diagonal block whose
    imaginary part is ``-Omega``. Any ``B12`` returned has been re-checked with
    :func:`covariant_joint_check`.
    """
    opts = opts or GaussOptions(**kw)
    B11 = np.asarray(B11, dtype=float)
    B22 = np.asarray(B22, dtype=float)
    if B11.shape != B22.shape or B11.ndim != 2 or B11.shape[0] != B11.shape[1] or B11.shape[0] % 2:
        raise DimensionMismatch("B11 and B22 must be square of the same even size")
    N = B11.shape[0] // 2
    SymplecticSpace(N)
    s = 2 * N
    om = omega_matrix(N)
    B11 = 0.5 * (B11 + B11.T)
    B22 = 0.5 * (B22 + B22.T)

    def project(x):
        y = x.copy()
        y[:s, :s] = B11
        y[s:, s:] = B22
        off = 0.5 * (x[:s, s:] + x[s:, :s].conj().T).real - 1j * om
        y[:s, s:] = off
        y[s:, :s] = off.conj().T
        return y

    found = {}

    def certify(x_psd, x_aff):
        for cand in (x_psd, x_aff):
            b12 = 0.5 * (cand[:s, s:] + cand[s:, :s].T).real
            chk = covariant_joint_check(GaussJoint.from_blocks(B11, B22, b12), tol=opts.psd_tol)
            if chk.ok:
                found["B12"], found["min_eig"] = b12, chk.min_eig
                return True
        return False

    # B12 = 0 is optimal in the symmetric cases; try it before iterating
    if certify(project(np.zeros((2 * s, 2 * s), dtype=complex)), np.zeros((2 * s, 2 * s))):
        return GaussVerdict("feasible", found["B12"], found["min_eig"], 0.0, 0)

    run = cxmat.dykstra_psd_affine(
        np.zeros((2 * s, 2 * s), dtype=complex),
        project,
        certify,
        infeas_tol=opts.infeas_tol,
        max_iter=opts.max_iter,
        check_every=opts.check_every,
    )
    if run.status == "certified":
        return GaussVerdict("feasible", found["B12"], found["min_eig"], run.gap, run.iterations)
    b12 = 0.5 * (run.x_aff[:s, s:] + run.x_aff[s:, :s].T).real
    lam = covariant_joint_check(GaussJoint.from_blocks(B11, B22, b12)).min_eig
    status = "infeasible" if run.status == "separated" else "undecided"
    return GaussVerdict(status, None, lam, run.gap, run.iterations)


def gauss_char(B, c, z) -> complex:
    """``exp(-z^T B z / 4 - i c^T z)``."""
    B = np.asarray(B, dtype=float)
    c = np.asarray(c, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if B.shape != (z.size, z.size) or c.size != z.size:
        raise DimensionMismatch("B, c and z have inconsistent sizes")
    return complex(np.exp(-0.25 * z @ B @ z - 1j * c @ z))


def random_noise_matrix(N: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Random real symmetric positive definite ``2N x 2N`` matrix."""
    g = rng.normal(size=(2 * N, 2 * N))
    return scale * (g @ g.T / (2 * N) + 0.05 * np.eye(2 * N))


def necessary_audit(n_pairs: int = 200, N: int = 1, seed: int = 0, max_draws: int = 20_000) -> dict:
    """Compare the necessary inequality (factors 1 and 2) against the block condition.

    Draws random noise pairs (every other draw placed near the tight region)
    until ``n_pairs`` of them are certified compatible by :func:`sufficient_compat`, then counts how many violate each variant of
    the necessary inequality. The fixed pair ``B = C = I`` is reported separately.
    """
    rng = np.random.default_rng(seed)
    feasible = 0
    drawn = 0
    viol = {1.0: 0, 2.0: 0}
    worst = {1.0: np.inf, 2.0: np.inf}
    while feasible < n_pairs and drawn < max_draws:
        drawn += 1
        b11 = random_noise_matrix(N, rng, scale=float(rng.uniform(0.5, 3.0)))
        if drawn % 2:
            b22 = random_noise_matrix(N, rng, scale=float(rng.uniform(0.5, 3.0)))
        else:
            # straddle the tight region: a multiple of Omega^T B11^{-1} Omega plus a little noise
            om = omega_matrix(N)
            b22 = float(rng.uniform(0.6, 1.4)) * om.T @ np.linalg.inv(b11) @ om
            b22 = b22 + random_noise_matrix(N, rng, scale=float(rng.uniform(0.0, 0.3)))
        if sufficient_compat(b11, b22).status != "feasible":
            continue
        feasible += 1
        for f in viol:
            chk = necessary_compat(b11, b22, factor=f)
            worst[f] = min(worst[f], chk.min_eig)
            if not chk.ok:
                viol[f] += 1
    eye = np.eye(2 * N)
    ident = sufficient_compat(eye, eye)
    return {
        "N": N,
        "feasible_pairs": feasible,
        "draws": drawn,
        "violations_factor1": viol[1.0],
        "violations_factor2": viol[2.0],
        "worst_min_eig_factor1": float(worst[1.0]),
        "worst_min_eig_factor2": float(worst[2.0]),
        "identity_pair": {
            "sufficient_status": ident.status,
            "factor1": necessary_compat(eye, eye, factor=1.0).to_json(),
            "factor2": necessary_compat(eye, eye, factor=2.0).to_json(),
        },
    }
