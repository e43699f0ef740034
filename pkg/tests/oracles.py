"""Slow, loop-based reference implementations used to check the vectorized code.

Nothing here reuses package internals beyond plain data; each function is a
direct transcription of a defining formula.
"""
import cmath
import math

import numpy as np


def weyl(d, q, p):
    w = np.zeros((d, d), dtype=complex)
    for j in range(d):
        w[(j + q) % d, j] = cmath.exp(1j * math.pi * q * p / d) * cmath.exp(2j * math.pi * j * p / d)
    return w


def points(d):
    return [(q, p) for q in range(d) for p in range(d)]


def S(d, m, n):
    return 2 * math.pi / d * (m[0] * n[1] - n[0] * m[1])


def sub(d, a, b):
    return ((a[0] - b[0]) % d, (a[1] - b[1]) % d)


def add(d, a, b):
    return ((a[0] + b[0]) % d, (a[1] + b[1]) % d)


def forward_map(d, p1, beta):
    pts = points(d)
    out = []
    for r in pts:
        acc = 0j
        for i, m in enumerate(pts):
            for j, n in enumerate(pts):
                acc += cmath.exp(1j * S(d, sub(d, m, n), r)) * beta[i, j] * math.sqrt(p1[i] * p1[j])
        out.append(acc / d**2)
    return np.array(out)


def choi_predual(d, apply_predual):
    """``sum_jk E_jk (x) Phi_*(E_jk)`` from a black-box predual map."""
    out = np.zeros((d * d, d * d), dtype=complex)
    for j in range(d):
        for k in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[j, k] = 1
            out += np.kron(e, apply_predual(e))
    return out


def choi_mixture(d, p):
    pts = points(d)
    ws = [weyl(d, *m) for m in pts]
    return choi_predual(d, lambda t: sum(pm * w @ t @ w.conj().T for pm, w in zip(p, ws)))


def joint_heisenberg(d, f, c):
    """``Psi(C) = sum_{g,h} tr((W(g) (x) W(h))^dagger C)/d^2 f(g,h) W(g+h)`` by loops."""
    pts = points(d)
    out = np.zeros((d, d), dtype=complex)
    for i, g in enumerate(pts):
        for j, h in enumerate(pts):
            x = np.kron(weyl(d, *g), weyl(d, *h))
            coef = np.trace(x.conj().T @ c) / d**2
            out += coef * f[i, j] * weyl(d, *add(d, g, h))
    return out


def joint_choi(d, f):
    """Choi matrix of the predual of ``joint_heisenberg`` via ``tr(E_jk Psi(E_ba))``."""
    n = d * d
    out = np.zeros((d * n, d * n), dtype=complex)
    for a in range(n):
        for b in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[b, a] = 1
            psi = joint_heisenberg(d, f, e)
            for j in range(d):
                for k in range(d):
                    out[j * n + a, k * n + b] = psi[k, j]
    return out


def membership_matrix(d, f):
    """Rows ``(a, b)``; the phase of ``W(a)^dagger W(c)`` is read off by traces."""
    pts = points(d)
    idx = {m: i for i, m in enumerate(pts)}
    ws = {m: weyl(d, *m) for m in pts}

    def kappa(a, c):
        return np.trace(ws[sub(d, c, a)].conj().T @ ws[a].conj().T @ ws[c]) / d

    n = len(pts)
    mat = np.zeros((n * n, n * n), dtype=complex)
    for a in pts:
        for b in pts:
            for c in pts:
                for e in pts:
                    i = idx[a] * n + idx[b]
                    j = idx[c] * n + idx[e]
                    ph = kappa(a, c) * kappa(b, e) * np.conj(kappa(add(d, a, b), add(d, c, e)))
                    mat[i, j] = ph * f[idx[sub(d, c, a)], idx[sub(d, e, b)]]
    return mat
