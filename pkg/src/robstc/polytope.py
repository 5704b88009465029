"""Feasibility, Chebyshev centre and quadratic minimization over small polytopes.

Polytopes are given as ``A u <= b`` with a handful of rows (at most
``2**(m+1) + 2m`` for the admissible-control sets used here), so exact vertex
enumeration is affordable and avoids any iterative LP machinery.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

TOL = 1e-9


@lru_cache(maxsize=64)
def _combinations(k: int, r: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(k), r)), dtype=int).reshape(-1, r)


def _solve_square_systems(A, b, r):
    """Solve every ``r x r`` subsystem of ``A x = b``; drop the singular ones."""
    idx = _combinations(A.shape[0], r)
    if idx.size == 0:
        return np.empty((0, A.shape[1]))
    M = A[idx]
    rhs = b[idx]
    with np.errstate(all="ignore"):
        det = np.linalg.det(M)
        scale = np.prod(np.linalg.norm(M, axis=2), axis=1)
        ok = np.abs(det) > 1e-12 * np.maximum(scale, 1e-300)
        if not np.any(ok):
            return np.empty((0, A.shape[1]))
        X = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
    return X[np.all(np.isfinite(X), axis=1)]


def _raw_interval(A, b, tol=TOL):
    a = A[:, 0]
    lo, hi = -np.inf, np.inf
    for ai, bi in zip(a, b):
        if ai > 0:
            hi = min(hi, bi / ai)
        elif ai < 0:
            lo = max(lo, bi / ai)
        elif bi < -tol:
            return np.inf, -np.inf
    return lo, hi


def interval(A, b, tol=TOL):
    """Feasible interval of ``a u <= b`` for scalar ``u``; ``None`` when empty."""
    lo, hi = _raw_interval(A, b, tol)
    if lo > hi + tol:
        return None
    if lo > hi:
        lo = hi = 0.5 * (lo + hi)
    return lo, hi


def vertices(A, b, tol=TOL):
    """All vertices of ``{u : A u <= b}`` (assumed bounded)."""
    m = A.shape[1]
    V = _solve_square_systems(A, b, m)
    if len(V) == 0:
        return V
    feas = np.all(V @ A.T <= b + tol * (1 + np.abs(b)), axis=1)
    return V[feas]


def chebyshev_center(A, b, tol=TOL):
    """Centre and radius of the largest inscribed ball.

    Returns ``(u, radius)``; a negative radius means the polytope is empty.
    Ties between optimal centres are broken by the minimum Euclidean norm.
    """
    m = A.shape[1]
    norms = np.linalg.norm(A, axis=1)
    Aext = np.hstack([A, norms[:, None]])
    if m == 1:
        lo, hi = _raw_interval(A, b, tol)
        if not np.isfinite(lo - hi):
            return None, -np.inf
        return np.array([0.5 * (lo + hi)]), 0.5 * (hi - lo)
    Z = _solve_square_systems(Aext, b, m + 1)
    feas = np.all(Z @ Aext.T <= b + tol * (1 + np.abs(b)), axis=1)
    Z = Z[feas]
    if len(Z) == 0:
        return None, -np.inf
    k = int(np.argmax(Z[:, -1]))
    t_best = float(Z[k, -1])
    tie = Z[Z[:, -1] >= t_best - tol]
    if len(tie) == 1 or t_best < 0:
        return Z[k, :m], t_best
    # optimal face is not a single vertex: minimum-norm point on it
    u = min_quadratic(np.eye(m), A, b - norms * t_best, tol)
    return (Z[k, :m] if u is None else u), t_best


def min_quadratic(R, A, b, tol=TOL):
    """Minimize ``0.5 u'Ru`` subject to ``A u <= b`` by active-set enumeration.

    The optimum is the minimizer of the cost on the affine hull of some
    linearly independent active set of at most ``m`` rows. Every such set is
    solved in closed form; the cheapest candidate that satisfies all rows
    within ``tol`` wins. Returns ``None`` when no candidate is feasible.
    ``R`` must be symmetric positive definite. Exhaustive, so meant for the
    small ``m`` and row counts of input polytopes.
    """
    R = np.asarray(R, dtype=float)
    m = A.shape[1]
    Rinv = np.linalg.inv(R)
    cands = [np.zeros((1, m))]
    with np.errstate(all="ignore"):
        for r in range(1, min(m, A.shape[0]) + 1):
            idx = _combinations(A.shape[0], r)
            Aw, bw = A[idx], b[idx]
            G = Aw @ Rinv @ np.swapaxes(Aw, 1, 2)
            det = np.linalg.det(G)
            scale = np.prod(np.einsum("nij,nij->ni", Aw, Aw), axis=1)
            ok = np.abs(det) > 1e-12 * np.maximum(scale, 1e-300) * max(1.0, np.linalg.norm(Rinv)) ** r
            if not np.any(ok):
                continue
            lam = np.linalg.solve(G[ok], bw[ok][..., None])
            U = (Rinv @ np.swapaxes(Aw[ok], 1, 2) @ lam)[..., 0]
            cands.append(U[np.all(np.isfinite(U), axis=1)])
    U = np.vstack(cands)
    U = U[np.all(U @ A.T <= b + tol, axis=1)]
    if len(U) == 0:
        return None
    cost = 0.5 * np.einsum("ij,jk,ik->i", U, R, U)
    return U[int(np.argmin(cost))]
