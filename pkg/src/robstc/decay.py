"""Scalarized decay condition and admissible-control polytopes.

The decay condition ``<gradV(x), f(x) + g(x) u> + w(x) <= 0`` is affine in
``u``: ``beta0(x) + sum_i beta_i(x) u_i <= 0``. Measurement uncertainty is
handled by widening every coefficient by its Lipschitz constant times the
uncertainty radius, which yields ``2**(m+1)`` halfspaces.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import polytope
from .errors import EmptyPolytope, EvaluatorError
from .sysmodel import ControlAffineSystem, InputBox, LyapunovPackage

TOL = polytope.TOL


@dataclass(frozen=True)
class BetaVector:
    """Coefficients ``(beta0, beta_1..beta_m)`` of the decay condition at one state."""

    beta0: float
    beta: np.ndarray
    decay_tag: str = "w_tilde"

    def __post_init__(self):
        b = np.array(np.atleast_1d(self.beta), dtype=float)
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "beta0", float(self.beta0))

    @property
    def m(self) -> int:
        return self.beta.size

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.beta0], self.beta])


def beta_batch(system: ControlAffineSystem, lyap: LyapunovPackage, X,
               decay: str = "w_tilde") -> np.ndarray:
    """Decay coefficients for a batch of states; returns shape ``(..., m+1)``."""
    X = np.asarray(X, dtype=float)
    dV = lyap.grad(X)
    b0 = np.einsum("...i,...i->...", dV, system.drift(X)) + lyap.decay(decay)(X)
    bi = np.einsum("...i,...ij->...j", dV, system.input_map(X))
    out = np.concatenate([b0[..., None], bi], axis=-1)
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.all(np.isfinite(out), axis=-1))
        raise EvaluatorError("decay coefficients are not finite", state=X[tuple(bad[0])])
    return out


def beta(system: ControlAffineSystem, lyap: LyapunovPackage, x,
         decay: str = "w_tilde") -> BetaVector:
    """Decay coefficients at a single state."""
    b = beta_batch(system, lyap, np.asarray(x, dtype=float)[None, :], decay)[0]
    return BetaVector(b[0], b[1:], decay)


def phi(betav: BetaVector, u) -> float:
    """Decay-condition value; ``<= 0`` means ``u`` is admissible."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != betav.beta.shape:
        raise ValueError(f"input has shape {u.shape}, expected {betav.beta.shape}")
    return betav.beta0 + float(betav.beta @ u)


@dataclass(frozen=True)
class AdmissiblePolytope:
    """Input box intersected with halfspaces ``a0 + a'u <= 0``.

    ``offsets`` holds the ``a0`` values and ``normals`` the ``a`` rows.
    """

    box: InputBox
    offsets: np.ndarray
    normals: np.ndarray

    @property
    def m(self) -> int:
        return self.box.m

    @property
    def halfspace_count(self) -> int:
        return len(self.offsets)

    def constraints(self):
        """All constraints, box faces included, as ``(A, b)`` with ``A u <= b``."""
        Ab, bb = self.box.halfspaces()
        A = np.vstack([self.normals.reshape(-1, self.m), Ab])
        b = np.concatenate([-self.offsets, bb])
        return A, b

    def contains(self, u, tol: float = TOL) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if not self.box.contains(u, tol):
            return False
        if self.halfspace_count == 0:
            return True
        return bool(np.all(self.offsets + self.normals @ u <= tol))

    def contains_many(self, U, tol: float = TOL) -> np.ndarray:
        """Membership for a batch of inputs of shape ``(N, m)``."""
        U = np.asarray(U, dtype=float)
        ok = np.all((U >= self.box.lower - tol) & (U <= self.box.upper + tol), axis=1)
        if self.halfspace_count:
            ok &= np.all(self.offsets[None, :] + U @ self.normals.T <= tol, axis=1)
        return ok


def nominal_polytope(betav: BetaVector, box: InputBox) -> AdmissiblePolytope:
    return AdmissiblePolytope(box, np.array([betav.beta0]), betav.beta[None, :].copy())


def robust_polytope(betav: BetaVector, L, eps: float, box: InputBox) -> AdmissiblePolytope:
    """Inputs admissible for every coefficient vector within ``L * eps`` of ``betav``.

    All ``2**(m+1)`` sign combinations are kept; with ``eps == 0`` the set is the
    nominal halfspace.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    L = np.asarray(L, dtype=float)
    if L.shape != (betav.m + 1,) or np.any(L < 0):
        raise ValueError("need m+1 nonnegative Lipschitz constants")
    if eps == 0:
        return nominal_polytope(betav, box)
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=betav.m + 1)))
    coeffs = betav.as_array()[None, :] + signs * (L * eps)[None, :]
    return AdmissiblePolytope(box, coeffs[:, 0].copy(), coeffs[:, 1:].copy())


def is_nonempty(poly: AdmissiblePolytope):
    """Return ``(nonempty, witness)``; the witness is ``None`` for an empty set."""
    if poly.halfspace_count == 0:
        return True, poly.box.center.copy()
    A, b = poly.constraints()
    if poly.m == 1:
        iv = polytope.interval(A, b)
        u = None if iv is None else np.array([0.5 * (iv[0] + iv[1])])
    else:
        u, radius = polytope.chebyshev_center(A, b)
        if radius < -TOL:
            u = None
    # a witness must be a member within the common tolerance
    if u is None or not poly.contains(u):
        return False, None
    return True, u


def select_control(poly: AdmissiblePolytope, strategy: str = "midpoint", R=None):
    """Pick an input from a nonempty admissible polytope.

    ``midpoint`` is the interval midpoint for one input and falls back to the
    Chebyshev centre otherwise; ``mincost`` minimizes ``0.5 u'Ru``.
    """
    A, b = poly.constraints()
    if strategy in ("midpoint", "chebyshev"):
        ok, u = is_nonempty(poly)
        if not ok:
            raise EmptyPolytope("no admissible input")
        return u
    if strategy == "mincost":
        R = np.eye(poly.m) if R is None else np.asarray(R, dtype=float)
        if poly.contains(np.zeros(poly.m)):
            return np.zeros(poly.m)
        if poly.m == 1:
            iv = polytope.interval(A, b)
            u = None if iv is None else np.array([min(max(0.0, iv[0]), iv[1])])
        else:
            u = polytope.min_quadratic(R, A, b)
        if u is None or not poly.contains(u):
            raise EmptyPolytope("no admissible input")
        return u
    raise ValueError(f"unknown strategy {strategy!r}")
