"""Weyl-covariant channels on C^d, stored as probability vectors over phase space.

A channel with probability vector ``p`` acts in the Heisenberg picture as

    Phi(B) = sum_m p[m] W(m)^dagger B W(m)

and in the Schrödinger picture as ``Phi_*(T) = sum_m p[m] W(m) T W(m)^dagger``.
Index layout is ``m = q * d + p``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import cxmat
from .errors import DimensionMismatch, InvalidProbability, NotPositiveType, ParamOutOfRange
from .weyl import PhasePoint, PhaseSpace

CLAMP_TOL = 1e-14
SUM_TOL = 1e-12


@lru_cache(maxsize=None)
def space(d: int) -> PhaseSpace:
    return PhaseSpace(d)


def as_probability(p, d: int | None = None, *, sum_tol: float = SUM_TOL) -> np.ndarray:
    """Validate a probability vector over ``Z_d^2``; tiny negatives are clamped to 0."""
    v = np.asarray(p, dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        raise InvalidProbability("probability vector has non-finite entries")
    if d is not None and v.size != d * d:
        raise DimensionMismatch(f"expected {d * d} entries, got {v.size}")
    dd = int(round(np.sqrt(v.size)))
    if dd * dd != v.size or dd < 2:
        raise InvalidProbability(f"length {v.size} is not d^2 for some d >= 2")
    if v.min() < -CLAMP_TOL:
        raise InvalidProbability(f"negative entry {v.min():.3e}")
    v = np.clip(v, 0.0, None)
    if abs(v.sum() - 1.0) > sum_tol:
        raise InvalidProbability(f"entries sum to {v.sum():.15g}, not 1")
    return v


@dataclass(frozen=True, eq=False)
class CovChannel:
    d: int
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", as_probability(self.p, self.d))
        self.p.setflags(write=False)

    @classmethod
    def from_probs(cls, p, sum_tol: float = SUM_TOL) -> "CovChannel":
        v = as_probability(p, sum_tol=sum_tol)
        v = v / v.sum()
        return cls(int(round(np.sqrt(v.size))), v)

    @property
    def space(self) -> PhaseSpace:
        return space(self.d)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.p > 0)

    def to_json(self) -> dict:
        return {"d": self.d, "p": [float(x) for x in self.p]}

    @classmethod
    def from_json(cls, doc: dict) -> "CovChannel":
        return cls(int(doc["d"]), np.asarray(doc["p"], dtype=float))


@dataclass(frozen=True, eq=False)
class CharFn:
    """Characteristic function ``f(g)`` of a covariant channel, one value per phase point."""

    d: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).ravel()
        if v.size != self.d * self.d:
            raise DimensionMismatch(f"expected {self.d * self.d} values, got {v.size}")
        object.__setattr__(self, "values", v)

    def positive_type_matrix(self) -> np.ndarray:
        """The matrix ``[f(g_j - g_i)]_{i,j}`` over all phase points."""
        sp = space(self.d)
        return self.values[sp.sub_table.T]


def delta(d: int, m=0) -> CovChannel:
    p = np.zeros(d * d)
    p[space(d).index(m) if not isinstance(m, (int, np.integer)) else int(m)] = 1.0
    return CovChannel(d, p)


def uniform(d: int) -> CovChannel:
    return CovChannel(d, np.full(d * d, 1.0 / (d * d)))


def apply(ch: CovChannel, b) -> np.ndarray:
    """Heisenberg-picture action ``sum_m p[m] W(m)^dagger B W(m)``."""
    b = cxmat.as_cmatrix(b)
    if b.shape != (ch.d, ch.d):
        raise DimensionMismatch(f"operator shape {b.shape} does not match d={ch.d}")
    w = ch.space.weyl[ch.support]
    wd = np.conj(np.swapaxes(w, 1, 2))
    return np.einsum("m,mij,jk,mkl->il", ch.p[ch.support], wd, b, w)


def apply_predual(ch: CovChannel, t) -> np.ndarray:
    t = cxmat.as_cmatrix(t)
    if t.shape != (ch.d, ch.d):
        raise DimensionMismatch(f"operator shape {t.shape} does not match d={ch.d}")
    w = ch.space.weyl[ch.support]
    wd = np.conj(np.swapaxes(w, 1, 2))
    return np.einsum("m,mij,jk,mkl->il", ch.p[ch.support], w, t, wd)


def char_fn(ch: CovChannel) -> CharFn:
    """``f(g) = sum_h p[h] exp(-i S(g, h))``; ``apply(ch, W(g)) == f(g) W(g)``."""
    return CharFn(ch.d, ch.space.char @ ch.p)


def from_char(f: CharFn, tol: float = 1e-9) -> CovChannel:
    """Inverse transform ``p[h] = d^-2 sum_g f(g) exp(i S(g, h))``.

    Raises :class:`NotPositiveType` when the result is not a probability vector.
    """
    v = np.asarray(f.values)
    if abs(v[0] - 1.0) > tol:
        raise NotPositiveType(f"f(0) = {v[0]} is not 1")
    sp = space(f.d)
    p = (np.conj(sp.char).T @ v) / sp.n
    if np.max(np.abs(p.imag)) > tol:
        raise NotPositiveType(f"inverse transform has imaginary part {np.max(np.abs(p.imag)):.3e}")
    p = p.real
    if p.min() < -tol:
        raise NotPositiveType(f"inverse transform has negative entry {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    return CovChannel(f.d, p / p.sum())


def choi(ch: CovChannel) -> np.ndarray:
    """Choi matrix ``sum_{jk} E_jk (x) Phi_*(E_jk)`` of the Schrödinger-picture map (trace d)."""
    d = ch.d
    out = np.zeros((d * d, d * d), dtype=complex)
    for j in range(d):
        for k in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[j, k] = 1.0
            out[j * d:(j + 1) * d, k * d:(k + 1) * d] = apply_predual(ch, e)
    return out


def choi_from_weights(d: int, weights, sp: PhaseSpace | None = None) -> np.ndarray:
    """Choi matrix of ``T -> sum_m v[m] W(m) T W(m)^dagger`` for an arbitrary real ``v``.

    ``v`` need not be a probability vector; this is the oracle used to check that
    complete positivity is equivalent to nonnegative weights.
    """
    sp = sp or space(d)
    v = np.asarray(weights, dtype=float)
    # |W>> = sum_j e_j (x) W e_j, so entry (j, a) is W[a, j]
    vecs = np.stack([w.T.reshape(-1) for w in sp.weyl])
    return np.einsum("m,mi,mj->ij", v, vecs, np.conj(vecs))


def verify_covariance(ch: CovChannel, trials: int = 1, rng: np.random.Generator | None = None) -> float:
    """Max ``||Phi(W B W^dagger) - W Phi(B) W^dagger||_F`` over random ``B`` and every ``W(g)``."""
    if trials < 1:
        raise ParamOutOfRange("trials must be >= 1")
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for _ in range(trials):
        b = rng.normal(size=(ch.d, ch.d)) + 1j * rng.normal(size=(ch.d, ch.d))
        phi_b = apply(ch, b)
        for w in ch.space.weyl:
            lhs = apply(ch, w @ b @ w.conj().T)
            rhs = w @ phi_b @ w.conj().T
            worst = max(worst, cxmat.frob(lhs - rhs))
    return worst


def shift(ch: CovChannel, k) -> CovChannel:
    """Translate the probability vector: ``p'(m) = p(m - k)``."""
    sp = ch.space
    ki = k.index if isinstance(k, PhasePoint) else sp.index(k)
    return CovChannel(ch.d, ch.p[sp.sub_table[:, ki]])


def noise_mix(target, s: float, d: int) -> CovChannel:
    """``(1 - s) delta_target + s * uniform``."""
    if not 0.0 <= s <= 1.0:
        raise ParamOutOfRange(f"s must lie in [0, 1], got {s}")
    sp = space(d)
    i = target.index if isinstance(target, PhasePoint) else sp.index(target)
    p = np.full(d * d, s / (d * d))
    p[i] += 1.0 - s
    return CovChannel(d, p)


def compose(ch1: CovChannel, ch2: CovChannel) -> CovChannel:
    """Probability vector of ``Phi_1 o Phi_2``: the convolution ``p1 * p2``."""
    if ch1.d != ch2.d:
        raise DimensionMismatch("channels act on different dimensions")
    sp = ch1.space
    p = np.zeros(sp.n)
    np.add.at(p, sp.add_table.ravel(), np.outer(ch1.p, ch2.p).ravel())
    return CovChannel(ch1.d, p)
