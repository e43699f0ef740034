"""Compatibility of pairs of Weyl-covariant channels on Z_d x Z_d.

Two covariant channels with probability vectors ``p1`` and ``p2`` are compatible
exactly when there is a positive semidefinite kernel ``beta`` over phase space
with unit diagonal such that

    p2(r) = d^-2 sum_{m,n} exp(i S(m - n, r)) beta(m, n) sqrt(p1(m) p1(n)).

``feasibility`` searches for such a kernel with Dykstra's alternating
projections; ``joint_fn_from_kernel`` turns a kernel into the function ``f`` of
an explicit covariant broadcasting channel, ``Psi(W(g) (x) W(h)) = f(g, h) W(g + h)``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from . import cxmat
from .channel import CharFn, CovChannel, as_probability, space
from .errors import (
    DimensionMismatch,
    InvalidKernel,
    NonMember,
    ParamOutOfRange,
    SizeCap,
    WrongDimension,
)

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNDECIDED = "undecided"

DEFAULT_FEAS_CAP_D = 5
MEMBERSHIP_TOL = 1e-8
POLISH_CHECKS = 100


def feasibility_cap_d() -> int:
    return int(os.environ.get("WEYLCOMP_CAP_D", DEFAULT_FEAS_CAP_D))


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Kernel:
    d: int
    beta: np.ndarray

    def __post_init__(self):
        b = cxmat.as_cmatrix(self.beta)
        n = self.d * self.d
        if b.shape != (n, n):
            raise InvalidKernel(f"kernel must be {n}x{n}, got {b.shape}")
        object.__setattr__(self, "beta", b)

    def defects(self) -> dict:
        b = self.beta
        return {
            "hermitian": float(np.max(np.abs(b - b.conj().T))),
            "diagonal": float(np.max(np.abs(np.diag(b) - 1.0))),
            "min_eig": float(np.linalg.eigvalsh(0.5 * (b + b.conj().T))[0]),
        }

    def validate(self, herm_tol: float = 1e-9, diag_tol: float = 1e-9, psd_tol: float = 1e-8) -> "Kernel":
        e = self.defects()
        if e["hermitian"] > herm_tol:
            raise InvalidKernel(f"kernel is not Hermitian (defect {e['hermitian']:.3e})")
        if e["diagonal"] > diag_tol:
            raise InvalidKernel(f"kernel diagonal deviates from 1 by {e['diagonal']:.3e}")
        if e["min_eig"] < -psd_tol:
            raise InvalidKernel(f"kernel has negative eigenvalue {e['min_eig']:.3e}")
        return self

    def to_json(self) -> list:
        return complex_matrix_to_json(self.beta)


@dataclass(frozen=True, eq=False)
class JointFn:
    """Values ``f[g, h]`` on ``Z_d^2 x Z_d^2`` (flat phase-point indices)."""

    d: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        n = self.d * self.d
        if v.shape != (n, n):
            raise DimensionMismatch(f"joint function must have shape {(n, n)}, got {v.shape}")
        object.__setattr__(self, "values", v)


@dataclass
class FeasibilityVerdict:
    status: str
    kernel: Optional[Kernel] = None
    residual: float = float("nan")
    gap: float = float("nan")
    iterations: int = 0
    margin: Optional[float] = None  # qubit solver only: max over (x, y, z) of the min eigenvalue
    params: Optional[tuple] = None  # qubit solver only: maximizing (x, y, z)

    def to_json(self, with_kernel: bool = True) -> dict:
        doc = {
            "status": self.status,
            "residual": float(self.residual),
            "gap": float(self.gap),
            "iterations": int(self.iterations),
        }
        if with_kernel and self.kernel is not None:
            doc["kernel"] = self.kernel.to_json()
        return doc


@dataclass
class MembershipReport:
    is_member: bool
    min_eig: float
    hermitian_defect: float
    witness: Optional[dict] = None

    def __bool__(self) -> bool:
        return self.is_member


@dataclass(frozen=True)
class FeasibilityOptions:
    feas_tol: float = 1e-7
    infeas_tol: float = 1e-5
    max_iter: int = 100_000
    polish_tol: float = 1e-11
    check_every: int = 20
    max_d: int = field(default_factory=feasibility_cap_d)

    def __post_init__(self):
        if self.feas_tol <= 0 or self.infeas_tol <= 0 or self.max_iter < 1:
            raise ParamOutOfRange("tolerances must be positive and max_iter >= 1")


def complex_matrix_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def complex_matrix_from_json(rows) -> np.ndarray:
    a = np.asarray(rows, dtype=float)
    if a.ndim != 3 or a.shape[2] != 2:
        raise InvalidKernel("expected nested [[ [re, im], ... ], ...] rows")
    return a[..., 0] + 1j * a[..., 1]


# ---------------------------------------------------------------------------
# Forward map and the explicit kernels
# ---------------------------------------------------------------------------


def _probs(p, d=None) -> np.ndarray:
    if isinstance(p, CovChannel):
        return p.p
    return as_probability(p, d)


def _fourier_out(d: int) -> np.ndarray:
    """``E[m, r] = exp(i S(m, r))``."""
    return np.conj(space(d).char)


def forward_map(p1, beta) -> np.ndarray:
    """Probability vector of the second channel induced by ``p1`` and a kernel."""
    p1 = _probs(p1)
    d = int(round(np.sqrt(p1.size)))
    if not isinstance(beta, Kernel):
        beta = Kernel(d, beta)
    if beta.d != d:
        raise DimensionMismatch("kernel and channel dimensions differ")
    beta.validate()
    return _forward_raw(p1, beta.beta)


def _forward_raw(p1: np.ndarray, beta: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(p1.size)))
    w = np.sqrt(p1)
    e = _fourier_out(d)
    bt = beta * np.outer(w, w)
    return np.einsum("mr,mn,nr->r", e, bt, np.conj(e)).real / (d * d)


def kernel_for_depolarizing(q, d: int) -> Kernel:
    """Kernel ``beta(m, n) = sum_s q(s) exp(i S(n - m, s))``.

    Paired with the completely depolarizing first channel it reproduces any
    target ``q`` through :func:`forward_map`.
    """
    q = as_probability(q, d)
    c = space(d).char
    beta = (c * q) @ c.conj().T
    return Kernel(d, beta)


def transport_kernel(beta: Kernel, k1, k2) -> Kernel:
    """Kernel certifying ``(shift(p1, k1), shift(p2, k2))`` given one for ``(p1, p2)``."""
    sp = space(beta.d)
    i1, i2 = sp.index(k1), sp.index(k2)
    src = sp.sub_table[:, i1]  # m -> m - k1
    moved = beta.beta[np.ix_(src, src)]
    ph = np.exp(-1j * sp.S[:, i2])  # exp(-i S(m, k2))
    return Kernel(beta.d, ph[:, None] * moved * np.conj(ph)[None, :])


# ---------------------------------------------------------------------------
# Joint channels
# ---------------------------------------------------------------------------


def joint_fn_from_kernel(p1, beta) -> JointFn:
    """Function of the covariant joint channel built from ``p1`` and a kernel.

    ``f(g, h) = omega(g, h) sum_k sqrt(p1(k) p1(k + h)) beta(k + h, k) exp(-i S(g, k))``
    where ``omega`` is the product phase ``W(g) W(h) = omega(g, h) W(g + h)``. The
    first margin is ``char_fn(p1)`` and the second margin is the characteristic
    function of ``forward_map(p1, beta)``.
    """
    p1 = _probs(p1)
    d = int(round(np.sqrt(p1.size)))
    if not isinstance(beta, Kernel):
        beta = Kernel(d, beta)
    beta.validate()
    sp = space(d)
    w = np.sqrt(p1)
    kh = sp.add_table  # kh[k, h] = k + h
    k = np.arange(sp.n)[:, None]
    terms = w[:, None] * w[kh] * beta.beta[kh, k]  # [k, h]
    f = sp.omega * (sp.char @ terms)
    return JointFn(d, f)


def margins_of_joint(f: JointFn) -> tuple[CharFn, CharFn]:
    return CharFn(f.d, f.values[:, 0]), CharFn(f.d, f.values[0, :])


def membership_matrix(f: JointFn) -> np.ndarray:
    """Twisted positivity matrix of a joint function over all pairs of phase points.

    Row ``(a, b)``, column ``(c, e)``:
    ``kappa(a, c) kappa(b, e) conj(kappa(a + b, c + e)) f(c - a, e - b)`` where
    ``W(a)^dagger W(c) = kappa(a, c) W(c - a)``. The channel defined by ``f`` is
    completely positive exactly when this matrix is positive semidefinite.
    """
    return _tuple_membership_matrix(f.values, f.d, 2)


def _tuple_membership_matrix(values: np.ndarray, d: int, m: int) -> np.ndarray:
    sp = space(d)
    n = sp.n
    tuples = np.indices((n,) * m).reshape(m, -1)  # tuples[k, i] = g_{k,i}
    size = tuples.shape[1]
    mat = np.ones((size, size), dtype=complex)
    total = np.zeros(size, dtype=int)
    for k in range(m):
        g = tuples[k]
        mat *= sp.kappa[np.ix_(g, g)]
        total = sp.add_table[total, g]
    mat *= np.conj(sp.kappa[np.ix_(total, total)])
    diffs = tuple(sp.sub_table[np.ix_(tuples[k], tuples[k])].T for k in range(m))
    mat *= values[diffs]
    return mat


def _membership_report(mat: np.ndarray, f00: complex, tol: float) -> MembershipReport:
    defect = float(np.max(np.abs(mat - mat.conj().T)))
    lam = float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0])
    ok = defect <= tol and lam >= -tol and abs(f00 - 1.0) <= 1e-10
    return MembershipReport(ok, lam, defect)


def csz_membership(f: JointFn, tol: float = MEMBERSHIP_TOL, witness: bool = True) -> MembershipReport:
    """Decide whether ``f`` defines a covariant joint channel (twisted positivity)."""
    mat = membership_matrix(f)
    rep = _membership_report(mat, f.values[0, 0], tol)
    if witness and not rep.is_member:
        rep.witness = principal_witness(mat, f.d, tol)
    return rep


def principal_witness(mat: np.ndarray, d: int, tol: float = MEMBERSHIP_TOL) -> Optional[dict]:
    """Worst 2x2 principal submatrix on rows ``{(g, h), (0, 0)}``."""
    n = d * d
    best = None
    for i in range(1, n * n):
        sub = mat[np.ix_([i, 0], [i, 0])]
        defect = float(np.max(np.abs(sub - sub.conj().T)))
        lam = float(np.linalg.eigvalsh(0.5 * (sub + sub.conj().T))[0])
        score = max(defect, -lam)
        if score > tol and (best is None or score > best["score"]):
            g, h = divmod(i, n)
            best = {
                "g": (int(g // d), int(g % d)),
                "h": (int(h // d), int(h % d)),
                "submatrix": sub,
                "hermitian_defect": defect,
                "min_eig": lam,
                "score": score,
            }
    return best


def multipartite_membership(values, d: int, m: int, cap: int = 4096, tol: float = MEMBERSHIP_TOL) -> MembershipReport:
    """Twisted positivity test for a function on ``(Z_d^2)^m``.

    ``values`` has shape ``(d^2,) * m``. The matrix has ``d^(2m)`` rows; larger
    instances than ``cap`` rows are refused.
    """
    if m < 2:
        raise ParamOutOfRange("m must be >= 2")
    rows = (d * d) ** m
    if rows > cap:
        raise SizeCap(f"{rows} rows exceeds the cap of {cap}")
    v = np.asarray(values, dtype=complex)
    if v.shape != (d * d,) * m:
        raise DimensionMismatch(f"expected shape {(d * d,) * m}, got {v.shape}")
    mat = _tuple_membership_matrix(v, d, m)
    return _membership_report(mat, v[(0,) * m], tol)


def joint_apply(f: JointFn, c, check: bool = True) -> np.ndarray:
    """Heisenberg action ``Psi(C)`` of the joint channel on a ``d^2 x d^2`` operator."""
    if check:
        rep = csz_membership(f, witness=False)
        if not rep.is_member:
            raise NonMember(f"joint function fails membership (min_eig {rep.min_eig:.3e})")
    d = f.d
    sp = space(d)
    c = cxmat.as_cmatrix(c)
    if c.shape != (d * d, d * d):
        raise DimensionMismatch(f"operator must be {d * d}x{d * d}, got {c.shape}")
    w = sp.weyl
    c4 = c.reshape(d, d, d, d)
    coef = np.einsum("gac,hbd,abcd->gh", np.conj(w), np.conj(w), c4) / (d * d)
    out_coef = np.zeros(sp.n, dtype=complex)
    np.add.at(out_coef, sp.add_table.ravel(), (coef * f.values).ravel())
    return np.einsum("g,gij->ij", out_coef, w)


def joint_choi(f: JointFn) -> np.ndarray:
    """Choi matrix (``d^3 x d^3``) of the Schrödinger-picture joint channel."""
    d = f.d
    sp = space(d)
    w = sp.weyl
    n = sp.n
    # x[g, h] = W(g) (x) W(h) as a d^2 x d^2 matrix
    x = np.einsum("gac,hbd->ghabcd", w, w).reshape(n, n, n, n)
    coef = np.conj(x) * f.values[:, :, None, None] / n  # [g, h, B, A] -> coefficient for E_BA
    out_coef = np.zeros((n, n, n), dtype=complex)  # [target, B, A]
    np.add.at(out_coef, sp.add_table.ravel(), coef.reshape(n * n, n, n))
    psi = np.einsum("tba,tkj->bakj", out_coef, w)  # Psi(E_ba)[k, j]
    choi = np.einsum("bakj->jakb", psi)
    return choi.reshape(d * n, d * n)


def depolarizing_joint(d: int) -> JointFn:
    v = np.zeros((d * d, d * d), dtype=complex)
    v[0, 0] = 1.0
    return JointFn(d, v)


def symplectic_joint(d: int) -> JointFn:
    """``f(g, h) = exp(-i S(g, h)/2)``: a phase-only function that is never a member."""
    return JointFn(d, np.exp(-0.5j * space(d).S))


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def noise_boundary(d: int, s: float) -> float:
    """Smallest ``t`` for which the ``s``- and ``t``-noisy identity channels are compatible."""
    if not 0.0 <= s <= 1.0:
        raise ParamOutOfRange(f"s must lie in [0, 1], got {s}")
    root = np.sqrt(max(0.0, 1.0 - (1.0 - 1.0 / d**2) * s)) - np.sqrt(s) / d
    return float(max(root, 0.0) ** 2)


def noise_margin(d: int, s: float, t: float) -> float:
    """``s + (2/d) sqrt(s t) + t - 1``; nonnegative exactly on the compatible region."""
    return float(s + 2.0 / d * np.sqrt(s * t) + t - 1.0)


# ---------------------------------------------------------------------------
# General solver
# ---------------------------------------------------------------------------


class _HermCoords:
    """Orthonormal real coordinates for ``k x k`` Hermitian matrices (Frobenius metric)."""

    def __init__(self, k: int):
        self.k = k
        iu, ju = np.triu_indices(k, 1)
        self.iu, self.ju = iu, ju
        self.dim = k * k

    def to_vec(self, x: np.ndarray) -> np.ndarray:
        off = x[self.iu, self.ju]
        r2 = np.sqrt(2.0)
        return np.concatenate([np.diag(x).real, r2 * off.real, r2 * off.imag])

    def to_mat(self, v: np.ndarray) -> np.ndarray:
        k = self.k
        nu = self.iu.size
        x = np.zeros((k, k), dtype=complex)
        x[np.arange(k), np.arange(k)] = v[:k]
        off = (v[k:k + nu] + 1j * v[k + nu:]) / np.sqrt(2.0)
        x[self.iu, self.ju] = off
        x[self.ju, self.iu] = np.conj(off)
        return x


class _AffineKernelSet:
    """Hermitian kernels on ``supp(p1)`` with unit diagonal that reproduce ``p2``."""

    def __init__(self, p1: np.ndarray, p2: np.ndarray):
        d = int(round(np.sqrt(p1.size)))
        self.d = d
        self.p1, self.p2 = p1, p2
        self.supp = np.flatnonzero(p1 > 0)
        k = self.supp.size
        self.coords = _HermCoords(k)
        w = np.sqrt(p1[self.supp])
        e = _fourier_out(d)[self.supp]  # [i, r]
        self._w, self._e = w, e
        # Fourier rows: coefficient of X[i, j] in p2(r) is e[i, r] conj(e[j, r]) w_i w_j / d^2
        c = np.einsum("ir,jr->rij", e, np.conj(e)) * np.outer(w, w) / (d * d)
        iu, ju = self.coords.iu, self.coords.ju
        r2 = np.sqrt(2.0)
        four = np.concatenate(
            [np.einsum("rii->ri", c).real, r2 * c[:, iu, ju].real, -r2 * c[:, iu, ju].imag], axis=1
        )
        diag = np.zeros((k, self.coords.dim))
        diag[np.arange(k), np.arange(k)] = 1.0
        a = np.vstack([diag, four])
        self.matrix = a
        rhs = np.concatenate([np.ones(k), p2])
        # least-squares solution and an orthonormal basis of the row space (rank <= k + d^2)
        u, sv, vt = np.linalg.svd(a, full_matrices=False)
        rank = int(np.sum(sv > 1e-12 * sv[0]))
        self.rows = vt[:rank].T
        self.x_part = self.rows @ ((u[:, :rank].T @ rhs) / sv[:rank])
        self.inconsistency = float(np.linalg.norm(a @ self.x_part - rhs))

    def project(self, x: np.ndarray) -> np.ndarray:
        v = self.coords.to_vec(x)
        v = v - self.rows @ (self.rows.T @ v) + self.x_part
        return self.coords.to_mat(v)

    def forward(self, x: np.ndarray) -> np.ndarray:
        d = self.d
        bt = x * np.outer(self._w, self._w)
        return np.einsum("ir,ij,jr->r", self._e, bt, np.conj(self._e)).real / (d * d)

    def residual(self, x: np.ndarray) -> float:
        return float(max(np.max(np.abs(self.forward(x) - self.p2)), np.max(np.abs(np.diag(x) - 1.0))))

    def embed(self, x: np.ndarray) -> np.ndarray:
        n = self.d * self.d
        full = np.eye(n, dtype=complex)
        full[np.ix_(self.supp, self.supp)] = x
        return full


def _unit_diagonal(x: np.ndarray) -> Optional[np.ndarray]:
    dg = np.diag(x).real
    if dg.min() <= 1e-12:
        return None
    s = 1.0 / np.sqrt(dg)
    y = x * np.outer(s, s)
    return 0.5 * (y + y.conj().T)


def feasibility(p1, p2, opts: FeasibilityOptions | None = None, **kw) -> FeasibilityVerdict:
    """Decide whether the channels with probability vectors ``p1`` and ``p2`` are compatible.

    Returns ``feasible`` with a re-validated kernel, ``infeasible`` when the
    distance between the PSD cone and the affine constraint set settles above
    ``infeas_tol``, and ``undecided`` when the iteration budget runs out.
    """
    opts = opts or FeasibilityOptions(**kw)
    p1 = _probs(p1)
    p2 = _probs(p2)
    if p1.size != p2.size:
        raise DimensionMismatch("p1 and p2 have different lengths")
    d = int(round(np.sqrt(p1.size)))
    if d > opts.max_d:
        raise ParamOutOfRange(f"d={d} exceeds the feasibility cap {opts.max_d}")

    aff = _AffineKernelSet(p1, p2)
    if aff.inconsistency > 1e-9:
        status = INFEASIBLE if aff.inconsistency >= opts.infeas_tol else UNDECIDED
        return FeasibilityVerdict(status, None, aff.inconsistency, aff.inconsistency, 0)

    best = {"res": np.inf, "kernel": None, "first": None}

    def certify(x_psd, x_aff):
        y = _unit_diagonal(x_psd)
        if y is None:
            return False
        res = aff.residual(y)
        if res < best["res"]:
            best["res"], best["kernel"] = res, y
        if res <= opts.feas_tol and best["first"] is None:
            best["first"] = certify.calls
        certify.calls += 1
        if best["res"] <= opts.polish_tol:
            return True
        # polish for a bounded number of extra checks once within feas_tol
        return best["first"] is not None and certify.calls >= best["first"] + POLISH_CHECKS

    certify.calls = 0
    k = aff.supp.size
    run = cxmat.dykstra_psd_affine(
        np.eye(k, dtype=complex),
        aff.project,
        certify,
        infeas_tol=opts.infeas_tol,
        max_iter=opts.max_iter,
        check_every=opts.check_every,
    )
    if best["res"] <= opts.feas_tol:
        kernel = Kernel(d, aff.embed(best["kernel"]))
        res = float(np.max(np.abs(_forward_raw(p1, kernel.beta) - p2)))
        defects = kernel.defects()
        if res <= opts.feas_tol and defects["min_eig"] >= -1e-8 and defects["diagonal"] <= 1e-9:
            return FeasibilityVerdict(FEASIBLE, kernel, res, run.gap, run.iterations)
    if run.status == "separated":
        return FeasibilityVerdict(INFEASIBLE, None, best["res"], run.gap, run.iterations)
    return FeasibilityVerdict(UNDECIDED, None, best["res"], run.gap, run.iterations)


# ---------------------------------------------------------------------------
# Qubit specialization
# ---------------------------------------------------------------------------


def qubit_matrix(p1, p2, x: float, y: float, z: float) -> np.ndarray:
    """The 4x4 real matrix whose positivity for some ``(x, y, z)`` decides qubit compatibility.

    Phase points are ordered ``(0,0), (0,1), (1,0), (1,1)``.
    """
    a, b, c, e = p1
    q00, q01, q10, q11 = p2
    dz = 0.5 * (q00 - q01 - q10 + q11) - z
    ey = 0.5 * (q00 - q01 + q10 - q11) - y
    fx = 0.5 * (q00 + q01 - q10 - q11) - x
    return np.array(
        [
            [a, x, y, dz],
            [x, b, z, ey],
            [y, z, c, fx],
            [dz, ey, fx, e],
        ]
    )


def _soft_min(mats, base, v, tau):
    m = base + mats[0] * v[0] + mats[1] * v[1] + mats[2] * v[2]
    lam, vec = np.linalg.eigh(m)
    shift = lam[0]
    wts = np.exp(-tau * (lam - shift))
    z = wts.sum()
    val = shift - np.log(z) / tau
    grads = np.array([np.sum(wts / z * np.einsum("ij,ik,kj->j", vec, mk, vec)) for mk in mats])
    return val, grads


def qubit_feasibility(p1, p2, tol: float = 1e-9) -> FeasibilityVerdict:
    """Qubit compatibility via maximization of the smallest eigenvalue over ``(x, y, z)``.

    The smallest eigenvalue is concave in ``(x, y, z)``; it is maximized through
    a log-sum-exp smoothing with an increasing sharpness parameter (L-BFGS at
    each stage), and the exact smallest eigenvalue is reported at the end.
    """
    p1 = _probs(p1)
    p2 = _probs(p2)
    if p1.size != 4 or p2.size != 4:
        raise WrongDimension("the qubit test needs d = 2")
    base = qubit_matrix(p1, p2, 0.0, 0.0, 0.0)
    mats = [qubit_matrix(p1, p2, *u) - base for u in np.eye(3)]
    v = np.zeros(3)
    nit = 0
    for tau in (1e1, 1e2, 1e3, 1e4, 1e5, 1e6):
        res = minimize(
            lambda u: tuple(-t for t in _soft_min(mats, base, u, tau)),
            v,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": 500, "gtol": 1e-12, "ftol": 1e-15},
        )
        v = res.x
        nit += res.nit
    margin = float(np.linalg.eigvalsh(qubit_matrix(p1, p2, *v))[0])
    status = FEASIBLE if margin >= -tol else INFEASIBLE
    viol = max(0.0, -margin)
    return FeasibilityVerdict(status, None, viol, viol, nit, margin=margin, params=tuple(float(t) for t in v))
