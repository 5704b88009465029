"""Input-affine systems, input boxes and control Lyapunov function packages.

Let n be the number of states and m the number of inputs. Every evaluator
accepts batched states of shape ``(..., n)`` and returns

* ``f(x)``: ``(..., n)``
* ``g(x)``: ``(..., n, m)``
* ``V(x)``, ``w(x)``: ``(...)``
* ``gradV(x)``: ``(..., n)``

The three built-in systems (train speed control, a cubic three-state system
and a controlled Lotka-Volterra model) live at the bottom of this module.
"""
from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, EvaluatorError

Array = np.ndarray


def _readonly(a) -> Array:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class InputBox:
    """Box constraints ``lower[i] <= u[i] <= upper[i]`` containing the origin."""

    lower: Array
    upper: Array

    def __post_init__(self):
        lo = _readonly(np.atleast_1d(self.lower))
        hi = _readonly(np.atleast_1d(self.upper))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be 1-D arrays of equal length")
        if np.any(lo > 0) or np.any(hi < 0):
            raise ValueError("the input box must contain u = 0")
        if np.any(lo >= hi):
            raise ValueError("the input box must be non-degenerate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def m(self) -> int:
        return self.lower.size

    @property
    def center(self) -> Array:
        return 0.5 * (self.lower + self.upper)

    @property
    def magnitude(self) -> Array:
        """Per-coordinate ``max(|u_min|, u_max)``."""
        return np.maximum(np.abs(self.lower), self.upper)

    def vertices(self) -> Array:
        return np.array(list(itertools.product(*zip(self.lower, self.upper))))

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lower - tol) and np.all(u <= self.upper + tol))

    def halfspaces(self):
        """Box faces as ``(A, b)`` with ``A u <= b``."""
        eye = np.eye(self.m)
        return np.vstack([eye, -eye]), np.concatenate([self.upper, -self.lower])


@dataclass(frozen=True)
class Region:
    """Intersection of a closed ball and an axis-aligned box; either part may be absent."""

    center: Optional[Array] = None
    radius: Optional[float] = None
    lower: Optional[Array] = None
    upper: Optional[Array] = None

    def __post_init__(self):
        for name in ("center", "lower", "upper"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _readonly(np.atleast_1d(val)))
        if (self.center is None) != (self.radius is None):
            raise ValueError("ball part needs both center and radius")
        if (self.lower is None) != (self.upper is None):
            raise ValueError("box part needs both lower and upper")
        if self.center is None and self.lower is None:
            raise ValueError("a region needs a ball or a box")
        if self.radius is not None:
            object.__setattr__(self, "radius", float(self.radius))

    @classmethod
    def ball(cls, center, radius) -> "Region":
        return cls(center=center, radius=radius)

    @classmethod
    def box(cls, lower, upper) -> "Region":
        return cls(lower=lower, upper=upper)

    @property
    def dim(self) -> int:
        return (self.center if self.center is not None else self.lower).size

    def with_ball(self, center, radius) -> "Region":
        """Same box part, new ball part."""
        return Region(center=center, radius=radius, lower=self.lower, upper=self.upper)

    def bounding_box(self):
        if self.center is not None:
            lo, hi = self.center - self.radius, self.center + self.radius
            if self.lower is not None:
                lo, hi = np.maximum(lo, self.lower), np.minimum(hi, self.upper)
        else:
            lo, hi = self.lower, self.upper
        return np.array(lo), np.array(hi)

    def contains(self, X, tol: float = 0.0):
        X = np.asarray(X, dtype=float)
        ok = np.ones(X.shape[:-1], dtype=bool)
        if self.center is not None:
            ok &= np.linalg.norm(X - self.center, axis=-1) <= self.radius + tol
        if self.lower is not None:
            ok &= np.all((X >= self.lower - tol) & (X <= self.upper + tol), axis=-1)
        return ok

    def margin(self, x) -> float:
        """Signed distance from ``x`` to the region boundary (positive inside)."""
        x = np.asarray(x, dtype=float)
        out = np.inf
        if self.center is not None:
            out = self.radius - np.linalg.norm(x - self.center)
        if self.lower is not None:
            out = min(out, float(np.min(x - self.lower)), float(np.min(self.upper - x)))
        return float(out)

    def grid(self, points_per_axis: int) -> Array:
        """Uniform tensor grid over the bounding box, restricted to the region."""
        lo, hi = self.bounding_box()
        axes = [np.linspace(a, b, points_per_axis) for a, b in zip(lo, hi)]
        X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        return X[self.contains(X, tol=1e-12)]

    def sample(self, count: int, rng: np.random.Generator) -> Array:
        """Uniform samples by rejection from the bounding box."""
        lo, hi = self.bounding_box()
        out = []
        got = 0
        while got < count:
            X = rng.uniform(lo, hi, size=(max(2 * count, 64), self.dim))
            X = X[self.contains(X)]
            out.append(X)
            got += len(X)
        return np.concatenate(out)[:count]


def sphere_points(dim: int, count: int) -> Array:
    """Deterministic, roughly uniform unit vectors."""
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    if dim == 2:
        th = np.linspace(0.0, 2 * np.pi, count, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    if dim == 3:
        # Fibonacci lattice
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        phi = np.pi * (1 + 5 ** 0.5) * k
        rho = np.sqrt(1 - z ** 2)
        return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)
    v = np.random.default_rng(12345).normal(size=(count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass(frozen=True)
class ControlAffineSystem:
    """``xdot = f(x) + g(x) u`` with ``u`` restricted to an input box."""

    n: int
    m: int
    f: Callable[[Array], Array]
    g: Callable[[Array], Array]
    box: InputBox
    name: str = ""

    def __post_init__(self):
        if self.box.m != self.m:
            raise ValueError("input box dimension does not match m")

    def drift(self, x) -> Array:
        out = np.asarray(self.f(np.asarray(x, dtype=float)), dtype=float)
        if not np.isfinite(out).all():
            raise EvaluatorError("drift evaluated to a non-finite value", state=x)
        return out

    def input_map(self, x) -> Array:
        out = np.asarray(self.g(np.asarray(x, dtype=float)), dtype=float)
        if out.shape[-1] != self.m:
            raise ValueError("input map must have m columns")
        if not np.isfinite(out).all():
            raise EvaluatorError("input map evaluated to a non-finite value", state=x)
        return out

    def dynamics(self, x, u) -> Array:
        u = np.asarray(u, dtype=float)
        return self.drift(x) + np.einsum("...ij,...j->...i", self.input_map(x), u)


@dataclass(frozen=True)
class LyapunovPackage:
    """CLF with gradient, decay rates and a class-K sandwich.

    ``alpha1(|x - x*|) <= V(x) <= alpha2(|x - x*|)``. When ``alpha2_exact`` is
    set, the maximum of V over a ball of radius R equals ``alpha2(R)``.
    """

    V: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    w: Callable[[Array], Array]
    w_tilde: Callable[[Array], Array]
    alpha1: Callable
    alpha2: Callable
    alpha1_inv: Callable
    alpha2_inv: Callable
    x_star: Array
    alpha2_exact: bool = True
    class_k_fitted: bool = False

    def __post_init__(self):
        object.__setattr__(self, "x_star", _readonly(np.atleast_1d(self.x_star)))

    def relaxed(self, factor: float) -> "LyapunovPackage":
        """Copy with ``w_tilde = factor * w``."""
        if not 0.0 < factor < 1.0:
            raise ValueError("relaxation factor must lie in (0, 1)")
        w = self.w
        return dataclasses.replace(self, w_tilde=lambda x: factor * w(x))

    def decay(self, which: str) -> Callable[[Array], Array]:
        if which == "w":
            return self.w
        if which == "w_tilde":
            return self.w_tilde
        raise ValueError(f"unknown decay {which!r}")

    def max_on_ball(self, radius: float, domain: Optional[Region] = None,
                    samples: int = 2000) -> float:
        """Largest V on the ball of given radius around ``x_star``."""
        if self.alpha2_exact and domain is None:
            return float(self.alpha2(radius))
        n = self.x_star.size
        dirs = sphere_points(n, samples)
        radii = np.linspace(0.0, radius, 200)
        X = self.x_star + radii[:, None, None] * dirs[None, :, :]
        X = X.reshape(-1, n)
        if domain is not None:
            X = X[domain.contains(X)]
        if len(X) == 0:
            raise DomainError("ball does not intersect the domain")
        return float(np.max(self.V(X)))


@dataclass(frozen=True)
class StabilizingFeedback:
    """Continuously differentiable feedback ``kappa: R^n -> U``."""

    kappa: Callable[[Array], Array]

    def __call__(self, x) -> Array:
        return self.kappa(np.asarray(x, dtype=float))


class QuadraticClassK:
    """``alpha(s) = 0.5 * c * s**2`` with its closed-form inverse."""

    def __init__(self, c: float):
        self.c = float(c)

    def __call__(self, s):
        return 0.5 * self.c * np.square(s)

    def inverse(self, v):
        return np.sqrt(2.0 * np.maximum(v, 0.0) / self.c)


class TabulatedClassK:
    """Strictly increasing piecewise-linear class-K function with its inverse."""

    def __init__(self, s: Array, values: Array):
        s = np.asarray(s, dtype=float)
        values = np.maximum.accumulate(np.asarray(values, dtype=float))
        # strict monotonicity so the inverse is single valued
        values = values + 1e-12 * s
        self.s, self.values = s, values
        self._slope = (values[-1] - values[-2]) / (s[-1] - s[-2])

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.interp(s, self.s, self.values)
        beyond = s > self.s[-1]
        return np.where(beyond, self.values[-1] + self._slope * (s - self.s[-1]), out)

    def inverse(self, v):
        v = np.asarray(v, dtype=float)
        out = np.interp(v, self.values, self.s)
        beyond = v > self.values[-1]
        return np.where(beyond, self.s[-1] + (v - self.values[-1]) / self._slope, out)


def fit_class_k(V, x_star, domain: Region, n_radii: int = 400, n_dirs: int = 720,
                grid_points: int = 640_000):
    """Fit a conservative class-K sandwich of ``V`` on ``domain``.

    ``alpha1(s)`` underestimates ``min V`` over states at distance ``>= s`` from
    ``x_star``, ``alpha2(s)`` overestimates ``max V`` over distance ``<= s``.
    Both are tabulated on a radius grid from rays out of ``x_star`` and shifted
    by one grid cell in the conservative direction. ``alpha2`` also takes the
    maximum over a tensor grid of the domain with distances reduced by one cell
    diagonal; for convex ``V`` this makes it a rigorous upper bound, because a
    convex function peaks at cell vertices.
    """
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    n = x_star.size
    lo, hi = domain.bounding_box()
    corners = np.array(list(itertools.product(*zip(lo, hi))))
    s_max = float(np.max(np.linalg.norm(corners - x_star, axis=1)))
    s = np.linspace(0.0, s_max, n_radii)
    dirs = sphere_points(n, n_dirs)
    X = x_star + s[:, None, None] * dirs[None, :, :]
    inside = domain.contains(X)
    Vals = np.full(inside.shape, np.nan)
    Vals[inside] = V(X[inside])
    with np.errstate(all="ignore"):
        ring_min = np.nanmin(np.where(inside, Vals, np.inf), axis=1)
        ring_max = np.nanmax(np.where(inside, Vals, -np.inf), axis=1)
    ring_min[0] = ring_max[0] = 0.0

    per_axis = max(2, int(round(grid_points ** (1.0 / n))))
    axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    G = G[domain.contains(G, tol=1e-12)]
    diag = float(np.linalg.norm([(b - a) / (per_axis - 1) for a, b in zip(lo, hi)]))
    dist = np.linalg.norm(G - x_star, axis=1) - diag
    order = np.argsort(dist)
    cummax = np.maximum.accumulate(V(G[order]))
    k = np.searchsorted(dist[order], s, side="right") - 1
    grid_max = np.where(k >= 0, cummax[np.maximum(k, 0)], -np.inf)
    ring_max = np.maximum(ring_max, grid_max)

    a1 = np.minimum.accumulate(ring_min[::-1])[::-1]
    a2 = np.maximum.accumulate(ring_max)
    # a radius with no domain state carries no constraint; keep the table finite
    last = np.max(np.nonzero(np.isfinite(a1) & np.isfinite(a2))[0])
    s, a1, a2 = s[: last + 1], a1[: last + 1], a2[: last + 1]
    a1_cons = np.concatenate([[0.0], a1[:-1]])
    a2_cons = np.concatenate([[0.0], a2[2:], [a2[-1] + (a2[-1] - a2[-2])]])
    return TabulatedClassK(s, a1_cons), TabulatedClassK(s, a2_cons)


# ---------------------------------------------------------------------------
# Built-in scenarios
# ---------------------------------------------------------------------------

TRAIN_PARAMS = dict(p=5.18, q=13046.32, mass=68200.0, k1=1.516e5, k2=0.1147,
                    k3=1.564e4, v_wind=5.0, x_star=30.0, w_gain=0.025,
                    w_tilde_gain=0.015)


def make_train_system(**overrides):
    """Scalar train speed model driven by a normalized lever position in [-1, 1]."""
    prm = {**TRAIN_PARAMS, **overrides}
    p, q, mass = prm["p"], prm["q"], prm["mass"]
    k1, k2, k3, vw, xs = prm["k1"], prm["k2"], prm["k3"], prm["v_wind"], prm["x_star"]

    def f_res(v):
        return p * (v - vw) ** 2 + q

    def f_train(v):
        return k1 * np.exp(-k2 * v) + k3

    def f(x):
        return -f_res(x) / mass

    def g(x):
        return (f_train(x[..., 0]) / mass)[..., None, None]

    u_eq = f_res(xs) / f_train(xs)
    system = ControlAffineSystem(1, 1, f, g, InputBox([-1.0], [1.0]), name="train")
    a = QuadraticClassK(1.0)
    lyap = LyapunovPackage(
        V=lambda x: 0.5 * (x[..., 0] - xs) ** 2,
        grad=lambda x: x - xs,
        w=lambda x: prm["w_gain"] * (x[..., 0] - xs) ** 2,
        w_tilde=lambda x: prm["w_tilde_gain"] * (x[..., 0] - xs) ** 2,
        alpha1=a, alpha2=a, alpha1_inv=a.inverse, alpha2_inv=a.inverse,
        x_star=[xs],
    )
    feedback = StabilizingFeedback(
        lambda x: -np.tanh(x - np.arctanh(u_eq) - xs))
    return system, lyap, feedback


def train_equilibrium_input(**overrides) -> float:
    prm = {**TRAIN_PARAMS, **overrides}
    xs = prm["x_star"]
    f_res = prm["p"] * (xs - prm["v_wind"]) ** 2 + prm["q"]
    f_train = prm["k1"] * np.exp(-prm["k2"] * xs) + prm["k3"]
    return f_res / f_train


CUBIC_P = np.array([[1.0, 0.5, 0.0], [0.5, 1.5, 0.5], [0.0, 0.5, 1.0]])
CUBIC_DECAY_WEIGHTS = np.array([0.5, 0.2, 0.25])


def make_cubic3d_system(relaxation: float = 0.5):
    """Three-state system with cubic terms, unstable at the origin, two inputs."""
    P = CUBIC_P
    Q = P.T @ np.diag(CUBIC_DECAY_WEIGHTS) @ P
    G = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])

    def f(x):
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        return np.stack([
            -1.25 * x2 - 0.5 * x3 - (2 * x1 + x2) ** 3 / 16,
            0.9 * x1 + 0.7 * x2 + 0.9 * x3,
            -0.5 * x1 - 11 / 8 * x2 - 0.25 * x3 - (x2 + 2 * x3) ** 3 / 32,
        ], axis=-1)

    def g(x):
        return np.broadcast_to(G, x.shape[:-1] + G.shape)

    def w(x):
        return 0.5 * np.einsum("...i,ij,...j->...", x, Q, x)

    lam = np.linalg.eigvalsh(P)
    a1, a2 = QuadraticClassK(lam[0]), QuadraticClassK(lam[-1])
    system = ControlAffineSystem(3, 2, f, g, InputBox([-1.0, -0.5], [1.0, 0.5]),
                                 name="cubic3d")
    lyap = LyapunovPackage(
        V=lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, P, x),
        grad=lambda x: x @ P,
        w=w,
        w_tilde=lambda x: relaxation * w(x),
        alpha1=a1, alpha2=a2, alpha1_inv=a1.inverse, alpha2_inv=a2.inverse,
        x_star=np.zeros(3),
    )
    feedback = StabilizingFeedback(lambda x: np.stack(
        [-np.tanh(x @ P[0]), -0.5 * np.tanh(x @ P[2])], axis=-1))
    return system, lyap, feedback


LV_PARAMS = dict(a=1.1, b=0.4, c=0.4, d=0.1, x_star=(10.0, 4.0))
LV_WORKING_SET = Region.box([0.1, 0.1], [20.0, 8.0])


def make_lotka_volterra_system(relaxation: float = 0.5,
                               working_set: Region = LV_WORKING_SET, **overrides):
    """Predator-prey model with multiplicative inputs on both species."""
    prm = {**LV_PARAMS, **overrides}
    a, b, c, d = prm["a"], prm["b"], prm["c"], prm["d"]
    xs = np.asarray(prm["x_star"], dtype=float)

    def _check(x):
        if np.any(x <= 0):
            raise DomainError("Lotka-Volterra CLF is undefined for nonpositive populations")

    def f(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([a * x1 - b * x1 * x2, -c * x2 + d * x1 * x2], axis=-1)

    def g(x):
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = x[..., 0]
        out[..., 1, 1] = x[..., 1]
        return out

    def V(x):
        _check(x)
        return np.sum(x - xs - xs * np.log(x / xs), axis=-1)

    def grad(x):
        _check(x)
        return 1.0 - xs / x

    def w(x):
        e = x - xs
        return np.sum(e * np.tanh(e), axis=-1)

    alpha1, alpha2 = fit_class_k(V, xs, working_set)
    system = ControlAffineSystem(2, 2, f, g, InputBox([-3.0, -3.0], [4.0, 2.0]),
                                 name="lotka_volterra")
    lyap = LyapunovPackage(
        V=V, grad=grad, w=w, w_tilde=lambda x: relaxation * w(x),
        alpha1=alpha1, alpha2=alpha2,
        alpha1_inv=alpha1.inverse, alpha2_inv=alpha2.inverse,
        x_star=xs, alpha2_exact=False, class_k_fitted=True,
    )
    feedback = StabilizingFeedback(lambda x: np.stack([
        -a + b * x[..., 1] - np.tanh(x[..., 0] - xs[0]),
        c - d * x[..., 0] - np.tanh(x[..., 1] - xs[1]),
    ], axis=-1))
    return system, lyap, feedback
