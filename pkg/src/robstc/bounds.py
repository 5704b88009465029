"""Working set, Lipschitz constants, sup norms and measurement-error bounds.

All global quantities (Lipschitz constants, sup norms, the minimum decay gap)
are estimated on deterministic grids and inflated by a safety factor. This
is a heuristic, not a certified global bound; the grid density and factor are
part of the returned metadata so results can be reproduced.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import decay
from .errors import DomainError, NoBoundExists
from .sysmodel import ControlAffineSystem, InputBox, LyapunovPackage, Region, sphere_points

ZERO_BETA = 1e-12
DEFAULT_POINTS = {1: 2001, 2: 201, 3: 41}


@dataclass(frozen=True)
class GridSpec:
    """Sampling resolution for the grid-based estimates.

    ``points_per_axis`` of ``None`` picks a default by state dimension.
    ``padding`` is a relative enlargement applied to ball regions.
    """

    points_per_axis: Optional[int] = None
    safety: float = 1.1
    padding: float = 0.0
    fd_step: float = 1e-6
    sphere_count: int = 400

    def points_for(self, dim: int) -> int:
        if self.points_per_axis is not None:
            return int(self.points_per_axis)
        return DEFAULT_POINTS.get(dim, 15)

    def as_dict(self) -> dict:
        return dict(points_per_axis=self.points_per_axis, safety=self.safety,
                    padding=self.padding, fd_step=self.fd_step,
                    sphere_count=self.sphere_count)


def working_set(lyap: LyapunovPackage, xhat0, eps: float, domain: Optional[Region] = None):
    """Starting-ball radius, the largest CLF value on it, and the overshoot radius."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    xhat0 = np.atleast_1d(np.asarray(xhat0, dtype=float))
    Rhat = float(np.linalg.norm(xhat0 - lyap.x_star)) + 2.0 * eps
    Vhat = lyap.max_on_ball(Rhat, domain=None if lyap.alpha2_exact else domain)
    Rstar = float(lyap.alpha1_inv(Vhat))
    if not np.isfinite(Rstar):
        raise DomainError(f"class-K inverse undefined at level {Vhat}")
    # a fitted sandwich may undershoot by rounding; the ball must contain the start
    return Rhat, Vhat, max(Rstar, Rhat)


def sample_points(region: Region, grid: GridSpec) -> np.ndarray:
    """Grid points of the region plus, for ball regions, points on the sphere."""
    X = region.grid(grid.points_for(region.dim))
    if region.center is not None:
        S = region.center + region.radius * sphere_points(region.dim, grid.sphere_count)
        S = S[region.contains(S, tol=1e-12)]
        X = np.vstack([X, S])
    if len(X) == 0:
        raise DomainError("region contains no grid points")
    return X


def lipschitz_constants(system: ControlAffineSystem, lyap: LyapunovPackage,
                        region: Region, grid: GridSpec = GridSpec(),
                        decay_choice: str = "w_tilde") -> np.ndarray:
    """Safety-scaled maxima of ``|grad beta_i|`` over the region, ``i = 0..m``."""
    X = sample_points(region, grid)
    n = region.dim
    scale = max(1.0, float(np.max(np.abs(X))))
    h = grid.fd_step * scale
    G = np.zeros((len(X), system.m + 1, n))
    for j in range(n):
        step = np.zeros(n)
        step[j] = h
        hi = decay.beta_batch(system, lyap, X + step, decay_choice)
        lo = decay.beta_batch(system, lyap, X - step, decay_choice)
        G[:, :, j] = (hi - lo) / (2 * h)
    return grid.safety * np.max(np.linalg.norm(G, axis=2), axis=0)


def sup_dynamics(system: ControlAffineSystem, region: Region, box: InputBox,
                 grid: GridSpec = GridSpec()):
    """Safety-scaled sups of ``|f + g u|`` over region x box and of ``|f|``."""
    X = sample_points(region, grid)
    f = system.drift(X)
    g = system.input_map(X)
    F = f[:, None, :] + np.einsum("nij,vj->nvi", g, box.vertices())
    Fbar = float(np.max(np.linalg.norm(F, axis=2)))
    Fbar0 = float(np.max(np.linalg.norm(f, axis=1)))
    return grid.safety * max(Fbar, Fbar0), grid.safety * Fbar0


def min_decay_gap(lyap: LyapunovPackage, region: Region, r_star: float,
                  grid: GridSpec = GridSpec()) -> float:
    """Smallest ``w - w_tilde`` over the region outside the core ball.

    Infinite when the region lies inside the core ball (an empty minimum).
    """
    X = sample_points(region, grid)
    S = lyap.x_star + r_star * sphere_points(region.dim, max(grid.sphere_count, 2))
    X = np.vstack([X, S[region.contains(S, tol=1e-12)]])
    X = X[np.linalg.norm(X - lyap.x_star, axis=1) >= r_star * (1 - 1e-12)]
    if len(X) == 0:
        return float("inf")
    return float(np.min(lyap.w(X) - lyap.w_tilde(X)))


@dataclass(frozen=True)
class BoundsContext:
    """Everything computed once on the compact working set."""

    Rhat: float
    Vhat: float
    Rstar: float
    L: np.ndarray
    Fbar: float
    Fbar0: float
    wbar: float
    r_star: float
    region: Region
    grid_spec: GridSpec = field(default_factory=GridSpec)

    def as_dict(self) -> dict:
        return dict(Rhat=self.Rhat, Vhat=self.Vhat, Rstar=self.Rstar,
                    L=[float(v) for v in self.L], Fbar=self.Fbar, Fbar0=self.Fbar0,
                    wbar=self.wbar, r_star=self.r_star, grid=self.grid_spec.as_dict())


def working_region(lyap: LyapunovPackage, radius: float, domain: Optional[Region] = None,
                   padding: float = 0.0) -> Region:
    """Ball of the given radius around ``x*``, clipped to the domain box if any."""
    radius = radius * (1.0 + padding)
    if domain is None:
        return Region.ball(lyap.x_star, radius)
    return domain.with_ball(lyap.x_star, radius)


def build_context(system: ControlAffineSystem, lyap: LyapunovPackage, xhat0, eps: float,
                  r_star: float, grid: GridSpec = GridSpec(),
                  domain: Optional[Region] = None, L_override=None,
                  radius: Optional[float] = None) -> BoundsContext:
    """Overshoot bound, then all grid estimates on the resulting working set.

    ``radius`` replaces the computed overshoot radius as the region size
    (used by the level-set refresh in the simulator).
    """
    Rhat, Vhat, Rstar = working_set(lyap, xhat0, eps, domain)
    region = working_region(lyap, Rstar if radius is None else radius, domain, grid.padding)
    if L_override is not None:
        L = np.asarray(L_override, dtype=float)
    else:
        L = lipschitz_constants(system, lyap, region, grid)
    Fbar, Fbar0 = sup_dynamics(system, region, system.box, grid)
    wbar = min_decay_gap(lyap, region, r_star, grid)
    return BoundsContext(Rhat, Vhat, Rstar, L, Fbar, Fbar0, wbar, float(r_star), region, grid)


# ---------------------------------------------------------------------------
# Maximum admissible measurement error
# ---------------------------------------------------------------------------

def index_set(betav: decay.BetaVector, box: InputBox) -> tuple:
    """Inputs that can on their own push the decay condition to zero at the box edge.

    Indices are zero based.
    """
    out = []
    for i, b in enumerate(betav.beta):
        if b > ZERO_BETA and betav.beta0 + b * box.lower[i] <= 0:
            out.append(i)
        elif b < -ZERO_BETA and betav.beta0 + b * box.upper[i] <= 0:
            out.append(i)
    return tuple(out)


@dataclass(frozen=True)
class EpsBarBreakdown:
    """Result of the maximum-error computation at one measured state.

    ``candidate_table`` maps each candidate subset (zero-based indices) to
    ``(min_i E_i, E_0T)``; its score is the smaller of the two.
    """

    eps_bar: float
    eps0: Optional[float]
    eps1: Optional[float]
    index_set: tuple
    winning_subset: Optional[tuple]
    candidate_table: dict


def _ratio(num, den):
    if den > 0:
        return num / den
    return np.inf if num > 0 else (0.0 if num == 0 else -np.inf)


def subset_score(betav: decay.BetaVector, L, box: InputBox, T) -> tuple:
    """``(min_{i in T} E_i, E_0T)`` for one subset of inputs."""
    L = np.asarray(L, dtype=float)
    b = betav.beta
    e_min = min(_ratio(abs(b[i]), L[i + 1]) for i in T)
    num = betav.beta0
    den = L[0]
    for i in T:
        u = box.lower[i] if b[i] > 0 else box.upper[i]
        num += b[i] * u
        den += L[i + 1] * abs(u)
    return e_min, _ratio(-num, den)


def eps_bar(betav: decay.BetaVector, L, box: InputBox, state=None) -> EpsBarBreakdown:
    """Largest measurement error for which one input keeps the relaxed decay."""
    L = np.asarray(L, dtype=float)
    eps0 = _ratio(-betav.beta0, L[0]) if betav.beta0 < 0 else None
    support = tuple(i for i, b in enumerate(betav.beta) if abs(b) > ZERO_BETA)
    I = index_set(betav, box)
    candidates = [support] if support else []
    for k in range(1, len(support) + 1):
        for T in itertools.combinations(support, k):
            if T != support and set(T) & set(I):
                candidates.append(T)
    table = {T: subset_score(betav, L, box, T) for T in candidates}
    eps1, winner = None, None
    for T, (e, e0) in table.items():
        s = min(e, e0)
        if s > 0 and (eps1 is None or s > eps1):
            eps1, winner = s, T
    if betav.beta0 >= 0:
        if eps1 is None:
            raise NoBoundExists("no input keeps the decay condition under any error",
                                state=state)
        value = eps1
    elif not support or eps1 is None:
        value = eps0
    else:
        value = max(eps0, eps1)
    return EpsBarBreakdown(float(value), eps0, eps1, I, winner, table)


def eps_min(ctx: BoundsContext, box: InputBox) -> float:
    """Uniform sensor-accuracy requirement outside the core ball."""
    return 0.5 * ctx.wbar / (ctx.L[0] + float(np.sum(ctx.L[1:] * box.magnitude)))


@dataclass
class FieldResult:
    """Sampled maximum-error field; ``required_accuracy`` is half the minimum."""

    points: np.ndarray
    eps_bar: np.ndarray
    eps0: np.ndarray
    eps1: np.ndarray
    winning: list
    minimum: float
    argmin: Optional[np.ndarray]

    @property
    def required_accuracy(self) -> float:
        return 0.5 * self.minimum


def field_points(ctx: BoundsContext, lyap: LyapunovPackage, points_per_axis=None) -> np.ndarray:
    """Grid of the working region outside the core ball."""
    n = ctx.region.dim
    X = ctx.region.grid(points_per_axis or ctx.grid_spec.points_for(n))
    return X[np.linalg.norm(X - lyap.x_star, axis=1) >= ctx.r_star]


def eps_bar_field(system: ControlAffineSystem, lyap: LyapunovPackage, ctx: BoundsContext,
                  points=None) -> FieldResult:
    """Evaluate the maximum-error bound on grid points outside the core ball."""
    X = field_points(ctx, lyap) if points is None else np.asarray(points, dtype=float)
    if len(X) == 0:
        return FieldResult(X, np.empty(0), np.empty(0), np.empty(0), [], np.inf, None)
    B = decay.beta_batch(system, lyap, X, "w_tilde")
    vals, e0s, e1s, wins = [], [], [], []
    for x, b in zip(X, B):
        res = eps_bar(decay.BetaVector(b[0], b[1:]), ctx.L, system.box, state=x)
        vals.append(res.eps_bar)
        e0s.append(np.nan if res.eps0 is None else res.eps0)
        e1s.append(np.nan if res.eps1 is None else res.eps1)
        wins.append(res.winning_subset)
    vals = np.array(vals)
    k = int(np.argmin(vals))
    return FieldResult(X, vals, np.array(e0s), np.array(e1s), wins, float(vals[k]), X[k])
