"""Finite phase space Z_d x Z_d and its displacement (Weyl) matrices.

Phase points are pairs ``(q, p)`` reduced mod ``d``; the flat index used by every
array in the package is ``q * d + p``.

Convention::

    W(q, p) = exp(i*pi*q*p/d) * X^q Z^p,   X|j> = |j+q>,  Z|j> = exp(2*pi*i*j/d)|j>

with representatives ``q, p`` in ``[0, d)``. The commutation relation
``W(g) W(h) = exp(-i S(g, h)) W(h) W(g)`` holds exactly. The product rule
``W(g) W(h) = omega(g, h) W(g + h)`` holds with the exactly computed cocycle
``omega``; it agrees with ``exp(-i S(g, h)/2)`` up to a sign that appears
whenever a representative wraps around mod ``d``. For ``d = 2`` this labeling
gives ``W(1,0) = sigma_x``, ``W(0,1) = sigma_z``, ``W(1,1) = sigma_y``, which is a
relabeling of the table sometimes used for qubits (``W(0,1) = sigma_x`` and so
on). Nothing downstream depends on the labeling, only on the relations above.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ParamOutOfRange

DEFAULT_CAP_D = 32


def cap_d() -> int:
    return int(os.environ.get("WEYLCOMP_CAP_D", DEFAULT_CAP_D))


@dataclass(frozen=True)
class PhasePoint:
    q: int
    p: int
    d: int

    def __post_init__(self):
        object.__setattr__(self, "q", self.q % self.d)
        object.__setattr__(self, "p", self.p % self.d)

    @property
    def index(self) -> int:
        return self.q * self.d + self.p

    @classmethod
    def from_index(cls, i: int, d: int) -> "PhasePoint":
        return cls(i // d, i % d, d)

    def __add__(self, other: "PhasePoint") -> "PhasePoint":
        return PhasePoint(self.q + other.q, self.p + other.p, self.d)

    def __neg__(self) -> "PhasePoint":
        return PhasePoint(-self.q, -self.p, self.d)

    def __sub__(self, other: "PhasePoint") -> "PhasePoint":
        return self + (-other)


def symplectic(d: int, m, n) -> float:
    """``S(m, n) = (2 pi / d)(m.q n.p - n.q m.p)`` on canonical representatives."""
    mq, mp = _coords(d, m)
    nq, np_ = _coords(d, n)
    return 2.0 * np.pi / d * (mq * np_ - nq * mp)


def _coords(d: int, m) -> tuple[int, int]:
    if isinstance(m, PhasePoint):
        return m.q, m.p
    if isinstance(m, (int, np.integer)):
        return int(m) // d, int(m) % d
    q, p = m
    return int(q) % d, int(p) % d


def shift_matrix(d: int, q: int) -> np.ndarray:
    return np.roll(np.eye(d, dtype=complex), q % d, axis=0)


def phase_matrix(d: int, p: int) -> np.ndarray:
    j = np.arange(d)
    return np.diag(np.exp(2j * np.pi * j * (p % d) / d))


def weyl_matrix_raw(d: int, q: int, p: int) -> np.ndarray:
    q, p = q % d, p % d
    return np.exp(1j * np.pi * q * p / d) * shift_matrix(d, q) @ phase_matrix(d, p)


@dataclass(frozen=True, eq=False)
class PhaseSpace:
    """Phase space ``Z_d x Z_d`` with all ``d^2`` Weyl matrices precomputed."""

    d: int
    cap: int = field(default_factory=cap_d)

    def __post_init__(self):
        if self.d < 2:
            raise ParamOutOfRange(f"d must be >= 2, got {self.d}")
        if self.d > self.cap:
            raise ParamOutOfRange(f"d={self.d} exceeds the cap {self.cap}")

    @property
    def n(self) -> int:
        return self.d * self.d

    def point(self, i: int) -> PhasePoint:
        return PhasePoint.from_index(i, self.d)

    def points(self) -> list[PhasePoint]:
        return [self.point(i) for i in range(self.n)]

    @cached_property
    def qp(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.arange(self.n)
        return idx // self.d, idx % self.d

    @cached_property
    def weyl(self) -> np.ndarray:
        """Array of shape ``(d^2, d, d)``; ``weyl[i]`` is ``W(point(i))``."""
        d = self.d
        q, p = self.qp
        return np.stack([weyl_matrix_raw(d, a, b) for a, b in zip(q, p)])

    def weyl_matrix(self, m) -> np.ndarray:
        return self.weyl[self.index(m)]

    def index(self, m) -> int:
        q, p = _coords(self.d, m)
        return q * self.d + p

    @cached_property
    def add_table(self) -> np.ndarray:
        """``add_table[i, j]`` is the index of ``point(i) + point(j)``."""
        d = self.d
        q, p = self.qp
        return ((q[:, None] + q[None, :]) % d) * d + (p[:, None] + p[None, :]) % d

    @cached_property
    def neg(self) -> np.ndarray:
        d = self.d
        q, p = self.qp
        return ((-q) % d) * d + (-p) % d

    @cached_property
    def sub_table(self) -> np.ndarray:
        """``sub_table[i, j]`` is the index of ``point(i) - point(j)``."""
        return self.add_table[:, self.neg]

    @cached_property
    def S(self) -> np.ndarray:
        """Symplectic form on all pairs, ``S[i, j] = S(point(i), point(j))``."""
        q, p = self.qp
        return 2.0 * np.pi / self.d * (np.outer(q, p) - np.outer(p, q))

    @cached_property
    def char(self) -> np.ndarray:
        """``exp(-i S[i, j])``, the character table of the phase space."""
        return np.exp(-1j * self.S)

    @cached_property
    def omega(self) -> np.ndarray:
        """Cocycle with ``W(g) W(h) = omega[g, h] W(g + h)``, exact for this convention."""
        d = self.d
        q, p = self.qp
        q3 = (q[:, None] + q[None, :]) % d
        p3 = (p[:, None] + p[None, :]) % d
        e = (q * p)[:, None] + (q * p)[None, :] + 2 * np.outer(p, q) - q3 * p3
        return np.exp(1j * np.pi * (e % (2 * d)) / d)

    @cached_property
    def kappa(self) -> np.ndarray:
        """Phase with ``W(a)^dagger W(c) = kappa[a, c] W(c - a)``."""
        om = self.omega
        neg = self.neg
        # W(a)^{-1} = conj(omega(-a, a)) W(-a)
        inv_phase = np.conj(om[neg, np.arange(self.n)])
        return inv_phase[:, None] * om[neg, :]

    def adjoint_phase(self) -> np.ndarray:
        """Phase ``c[g]`` with ``W(g)^dagger = c[g] W(-g)``."""
        return np.conj(self.omega[self.neg, np.arange(self.n)])


def ccr_report(space: PhaseSpace) -> dict:
    """Maximal Frobenius deviations from the canonical commutation relations.

    ``commutation``: ``||W(g)W(h) - exp(-iS(g,h)) W(h)W(g)||_F`` over all pairs.
    ``unitarity``: ``||W(g)^dagger W(g) - I||_F``.
    ``adjoint``: distance of ``W(g)^dagger`` from ``W(-g)`` after removing the
    best unimodular scalar, plus the deviation of that scalar's modulus from 1.
    """
    w = space.weyl
    d = space.d
    eye = np.eye(d)
    comm = 0.0
    for a in range(space.n):
        left = np.einsum("ij,bjk->bik", w[a], w)
        right = np.einsum("bij,jk->bik", w, w[a])
        dev = np.linalg.norm(left - space.char[a][:, None, None] * right, axis=(1, 2))
        comm = max(comm, float(dev.max()))
    wd = np.conj(np.swapaxes(w, 1, 2))
    unit = float(np.max(np.linalg.norm(wd @ w - eye, axis=(1, 2))))
    wneg = w[space.neg]
    c = np.einsum("aij,aij->a", np.conj(wneg), wd) / d
    adj = float(
        max(
            np.max(np.linalg.norm(wd - c[:, None, None] * wneg, axis=(1, 2))),
            np.max(np.abs(np.abs(c) - 1.0)),
        )
    )
    return {
        "d": d,
        "max_violation_commutation": comm,
        "max_violation_unitarity": unit,
        "max_violation_adjoint": adj,
    }


def weyl_coefficients(space: PhaseSpace, m: np.ndarray) -> np.ndarray:
    """Coefficients ``tr(W(g)^dagger M)/d`` so that ``M = sum_g c[g] W(g)``."""
    return np.einsum("gij,ij->g", np.conj(space.weyl), m) / space.d


def from_weyl_coefficients(space: PhaseSpace, c: np.ndarray) -> np.ndarray:
    return np.einsum("g,gij->ij", c, space.weyl)
