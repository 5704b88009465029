"""Closed-loop simulation of the self-triggered scheme under measurement noise.

The true state and the controller's model copy are integrated with the same
input. At each measurement the model is reset to the noisy reading, the
maximum admissible error and the dwell time are computed, and until the next
measurement the input is re-selected from a robust admissible polytope at
every integrator step.

Intersample anchors
-------------------
``model``
    Robust polytope around the model state ``xm(t)`` with radius
    ``eps + 2 Fbar (tau + h)``; both copies move at speed at most ``Fbar``, so
    the true state lies in that ball over the whole step. When this set is
    empty (or leaves the estimation region) the step falls back to
    ``measurement``.
``measurement``
    Robust polytope around the last measurement with radius
    ``eps + Fbar (tau + h)``; never larger than ``eps_bar - eps``, so it is
    always nonempty.
``hold``
    One input per interval, selected at the measurement with radius ``eps_bar``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bounds, decay
from .errors import (DomainError, EmptyPolytope, EvaluatorError, NoBoundExists,
                     NonPositiveDwell)
from .sysmodel import ControlAffineSystem, LyapunovPackage, Region
from .trigger import BallGeometry, delta_k, displacement_bound

SCHEMA_VERSION = 1
NOISE_TAGS = ("uniform-in-ball", "sphere-surface", "adversarial-radial")
ANCHORS = ("model", "measurement", "hold")
TOL = 1e-9
CONTAIN_TOL = 1e-6


@dataclass(frozen=True)
class SimConfig:
    h: float = 1e-3
    T: float = 10.0
    eps: float = 0.0
    noise: str = "uniform-in-ball"
    seed: int = 0
    strategy: str = "midpoint"
    R: Optional[tuple] = None
    refresh: bool = True
    anchor: str = "model"
    padding: float = 0.05
    radius_step: float = 1.05

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("step h must be positive")
        if self.T < 0:
            raise ValueError("horizon T must be nonnegative")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.noise not in NOISE_TAGS:
            raise ValueError(f"unknown noise tag {self.noise!r}")
        if self.anchor not in ANCHORS:
            raise ValueError(f"unknown anchor {self.anchor!r}")

    def cost_matrix(self):
        return None if self.R is None else np.asarray(self.R, dtype=float)


def measure(x_true, eps: float, noise: str, rng: np.random.Generator, x_star=None):
    """Noisy reading within ``eps`` of the true state."""
    x = np.asarray(x_true, dtype=float)
    if eps == 0:
        return x.copy()
    n = x.size
    if noise == "adversarial-radial":
        d = x - (np.zeros(n) if x_star is None else x_star)
        nd = np.linalg.norm(d)
        if nd > 0:
            return x + eps * d / nd
    v = rng.normal(size=n)
    v /= np.linalg.norm(v)
    if noise == "uniform-in-ball":
        return x + eps * rng.uniform() ** (1.0 / n) * v
    if noise in ("sphere-surface", "adversarial-radial"):
        return x + eps * v
    raise ValueError(f"unknown noise tag {noise!r}")


def integrate_step(system: ControlAffineSystem, x, u, h: float):
    """Classical fourth-order Runge-Kutta step with the input held constant."""
    if not h > 0:
        raise ValueError("step h must be positive")
    F = lambda z: system.dynamics(z, u)
    k1 = F(x)
    k2 = F(x + 0.5 * h * k1)
    k3 = F(x + 0.5 * h * k2)
    k4 = F(x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass
class Trace:
    """Per-step records plus the measurement log and invariant tallies.

    Row ``i`` holds the states at ``t[i]``, the input applied from ``t[i]`` on,
    and the ``eps_bar``/``delta_k`` of the interval in progress (``nan`` inside
    the core ball for ``eps_bar``).
    """

    n: int
    m: int
    t: list = field(default_factory=list)
    x_true: list = field(default_factory=list)
    x_model: list = field(default_factory=list)
    u: list = field(default_factory=list)
    V_true: list = field(default_factory=list)
    V_model: list = field(default_factory=list)
    eps_bar: list = field(default_factory=list)
    delta_k: list = field(default_factory=list)
    event: list = field(default_factory=list)
    measurements: list = field(default_factory=list)
    violations: dict = field(default_factory=dict)
    messages: list = field(default_factory=list)
    fallbacks: int = 0
    failure: Optional[str] = None
    meta: dict = field(default_factory=dict)

    def add(self, t, xt, xm, u, Vt, Vm, eb, dk, events):
        self.t.append(float(t))
        self.x_true.append(np.array(xt, dtype=float))
        self.x_model.append(np.array(xm, dtype=float))
        self.u.append(np.array(u, dtype=float))
        self.V_true.append(float(Vt))
        self.V_model.append(float(Vm))
        self.eps_bar.append(float(eb))
        self.delta_k.append(float(dk))
        self.event.append(";".join(events))

    def violate(self, kind: str, message: str):
        self.violations[kind] = self.violations.get(kind, 0) + 1
        if len(self.messages) < 50:
            self.messages.append(f"{kind}: {message}")

    @property
    def violation_count(self) -> int:
        return int(sum(self.violations.values()))

    def arrays(self) -> dict:
        return dict(t=np.array(self.t), x_true=np.array(self.x_true).reshape(-1, self.n),
                    x_model=np.array(self.x_model).reshape(-1, self.n),
                    u=np.array(self.u).reshape(-1, self.m), V_true=np.array(self.V_true),
                    V_model=np.array(self.V_model), eps_bar=np.array(self.eps_bar),
                    delta_k=np.array(self.delta_k), event=list(self.event))

    # -- export ---------------------------------------------------------------

    def header(self):
        return (["t"] + [f"x_true_{i + 1}" for i in range(self.n)]
                + [f"x_model_{i + 1}" for i in range(self.n)]
                + [f"u_{i + 1}" for i in range(self.m)]
                + ["V_true", "V_model", "eps_bar", "delta_k", "event"])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.header())
        for i in range(len(self.t)):
            nums = ([self.t[i]] + list(self.x_true[i]) + list(self.x_model[i]) + list(self.u[i])
                    + [self.V_true[i], self.V_model[i], self.eps_bar[i], self.delta_k[i]])
            wr.writerow([repr(float(v)) for v in nums] + [self.event[i]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "Trace":
        rows = list(csv.reader(io.StringIO(text)))
        head = rows[0]
        n = sum(1 for h in head if h.startswith("x_true_"))
        m = sum(1 for h in head if h.startswith("u_"))
        tr = cls(n, m)
        for r in rows[1:]:
            v = [float(s) for s in r[:-1]]
            tr.add(v[0], v[1:1 + n], v[1 + n:1 + 2 * n], v[1 + 2 * n:1 + 2 * n + m],
                   *v[1 + 2 * n + m:], events=[r[-1]] if r[-1] else [])
        return tr

    def summary(self, geom: Optional[BallGeometry] = None, x_star=None) -> dict:
        a = self.arrays()
        out = dict(schema_version=SCHEMA_VERSION, steps=len(self.t),
                   measurement_count=len(self.measurements),
                   violations=self.violation_count,
                   violations_by_kind=dict(self.violations),
                   fallback_steps=self.fallbacks, failure=self.failure,
                   warnings=[e for e in self.messages if e.startswith("warning")])
        dks = [m["delta_k"] for m in self.measurements if np.isfinite(m["delta_k"])]
        out["delta_k_min"] = float(min(dks)) if dks else None
        out["delta_k_mean"] = float(np.mean(dks)) if dks else None
        if geom is not None and x_star is not None and len(self.t):
            dist = np.linalg.norm(a["x_true"] - np.asarray(x_star), axis=1)
            inside = np.nonzero(dist <= geom.r)[0]
            if len(inside):
                k = int(inside[0])
                out["entry_time"] = float(a["t"][k])
                out["max_distance_after_entry"] = float(np.max(dist[k:]))
                out["max_overshoot"] = float(max(0.0, np.max(dist[k:]) - geom.r))
                out["contained"] = bool(np.max(dist[k:]) <= geom.r + CONTAIN_TOL)
            else:
                out["entry_time"] = None
                out["max_distance_after_entry"] = None
                out["max_overshoot"] = None
                out["contained"] = False
            out["final_distance"] = float(dist[-1])
        out.update(self.meta)
        return out

    def write_summary(self, path, geom=None, x_star=None) -> dict:
        s = self.summary(geom, x_star)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(s, fh, indent=2, sort_keys=True)
        return s


class _ContextCache:
    """Bounds on balls around ``x*`` whose radii lie on a geometric grid."""

    def __init__(self, system, lyap, base: bounds.BoundsContext, domain, step):
        self.system, self.lyap, self.base = system, lyap, base
        self.domain, self.step = domain, step
        self._store = {}

    def radius_for(self, radius: float) -> tuple:
        k = math.ceil(math.log(radius) / math.log(self.step) - 1e-12)
        return k, self.step ** k

    def get(self, radius: float) -> bounds.BoundsContext:
        k, rad = self.radius_for(radius)
        if k not in self._store:
            grid = self.base.grid_spec
            region = bounds.working_region(self.lyap, rad, self.domain)
            L = bounds.lipschitz_constants(self.system, self.lyap, region, grid)
            Fbar, Fbar0 = bounds.sup_dynamics(self.system, region, self.system.box, grid)
            self._store[k] = bounds.BoundsContext(
                self.base.Rhat, self.base.Vhat, self.base.Rstar, L, Fbar, Fbar0,
                self.base.wbar, self.base.r_star, region, grid)
        return self._store[k]


def decay_band_constant(system, lyap, ctx: bounds.BoundsContext) -> float:
    """``C`` in the per-step decay band: ``sup |grad w_tilde| * Fbar``."""
    X = bounds.sample_points(ctx.region, ctx.grid_spec)
    n = X.shape[1]
    h = 1e-6 * max(1.0, float(np.max(np.abs(X))))
    G = np.zeros_like(X)
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        G[:, j] = (lyap.w_tilde(X + e) - lyap.w_tilde(X - e)) / (2 * h)
    return float(ctx.grid_spec.safety * np.max(np.linalg.norm(G, axis=1)) * ctx.Fbar)


def _ball_margin(region: Region, x) -> float:
    if region.center is None:
        return region.margin(x)
    return region.radius - float(np.linalg.norm(np.asarray(x) - region.center))


def run_closed_loop(system: ControlAffineSystem, lyap: LyapunovPackage, x0,
                    config: SimConfig, geom: BallGeometry, ctx: bounds.BoundsContext,
                    domain: Optional[Region] = None, warnings=()) -> Trace:
    """Simulate the self-triggered loop from the true initial state ``x0``.

    Hypothesis failures (non-positive dwell, empty polytope, missing bound,
    evaluator errors) end the run with a ``failure`` event; the partial trace
    is returned.
    """
    rng = np.random.default_rng(config.seed)
    xs = lyap.x_star
    eps, h, T = config.eps, config.h, config.T
    R = config.cost_matrix()
    box = system.box
    cache = _ContextCache(system, lyap, ctx, domain, config.radius_step)
    fixed_radius = max(ctx.Rstar, geom.r) * (1 + config.padding)
    C_band = decay_band_constant(system, lyap, cache.get(fixed_radius))
    tr = Trace(system.n, system.m)
    tr.meta.update(decay_band_C=C_band, anchor=config.anchor, strategy=config.strategy,
                   noise=config.noise, eps=eps, h=h, T=T, seed=config.seed,
                   refresh=config.refresh, geometry=geom.as_dict())

    x = np.array(x0, dtype=float)
    t = 0.0
    pending = [f"warning:{w}" for w in warnings]
    for w in warnings:
        tr.messages.append(f"warning: {w}")
    in_target = bool(np.linalg.norm(x - xs) <= geom.r)
    entered = in_target
    if in_target:
        pending.append("target-ball-entry")
    prev_core = False
    coarse_warned = False
    prev = None  # (xhat, eps_bar, delta, x_at_measure, core, Fbar)
    V = lambda z: float(lyap.V(z[None, :])[0])

    def fail(kind, exc, xm, u):
        tr.failure = f"{kind}: {exc}"
        try:
            Vm = V(xm)
        except (EvaluatorError, DomainError):
            Vm = np.nan
        tr.add(t, x, xm, u, V(x), Vm, np.nan, np.nan, pending + ["failure"])
        return tr

    while True:
        # ---- measurement --------------------------------------------------
        xhat = measure(x, eps, config.noise, rng, xs)
        pending.append("measurement")
        if np.linalg.norm(xhat - x) > eps + TOL:
            tr.violate("measurement", f"t={t}: reading farther than eps")
        if prev is not None and not prev[4]:
            p_xhat, p_eb, p_dt, p_x, _, p_F = prev
            if np.linalg.norm(x - p_xhat) > p_eb - eps + TOL:
                tr.violate("consistency", f"t={t}: true state left the certified ball")
            if np.linalg.norm(xhat - p_xhat) > min(p_F * p_dt + 2 * eps, p_eb) + TOL:
                tr.violate("chain", f"t={t}: measurement jump exceeds the bound")
        dist_hat = float(np.linalg.norm(xhat - xs))
        core = dist_hat <= geom.r_star
        if core and not prev_core:
            pending.append("core-ball-entry")
        if prev_core and not core:
            pending.append("core-ball-exit")
        prev_core = core

        try:
            Rhat_k = dist_hat + 2 * eps
            # alpha2 bounds V on the ball from above, so the level is conservative
            Vhat_k = float(lyap.alpha2(Rhat_k))
            if config.refresh:
                rad = max(float(lyap.alpha1_inv(Vhat_k)), Rhat_k, geom.r) * (1 + config.padding)
            else:
                rad = fixed_radius
            cx = cache.get(rad)
            if core:
                eb = np.nan
                dt = delta_k(cx, geom, eps, np.nan, True, state=xhat)
                poly_k, u_hold = None, np.zeros(system.m)
            else:
                bv = decay.beta(system, lyap, xhat)
                eb_raw = bounds.eps_bar(bv, cx.L, box, state=xhat).eps_bar
                eb = min(eb_raw, _ball_margin(cx.region, xhat))
                dt = delta_k(cx, geom, eps, eb, False, state=xhat)
                poly_k = decay.robust_polytope(bv, cx.L, eb, box)
                u_hold = decay.select_control(poly_k, config.strategy, R)
        except (NonPositiveDwell, NoBoundExists, EmptyPolytope, EvaluatorError,
                DomainError) as exc:
            return fail(type(exc).__name__, exc, xhat, np.zeros(system.m))

        tr.measurements.append(dict(t=t, xhat=xhat.tolist(), x=x.tolist(), core=bool(core),
                                    eps_bar=float(eb), delta_k=float(dt),
                                    region_radius=float(cx.region.radius), Vhat=Vhat_k))
        if dt < 10 * h and not coarse_warned:
            coarse_warned = True
            pending.append("warning:coarse-step")
            tr.messages.append(f"warning: t={t}: dwell {dt:.3g} below 10 h")

        t_end = min(t + dt, T)
        nsub = max(1, math.ceil((t_end - t) / h - 1e-9)) if t_end > t else 0
        hs = (t_end - t) / nsub if nsub else 0.0
        xm = xhat.copy()
        x_meas = x.copy()
        Fb = cx.Fbar0 if core else cx.Fbar

        if nsub == 0:
            tr.add(t, x, xm, u_hold, V(x), V(xm), eb, dt, pending)
            return tr

        for j in range(nsub):
            tau = j * hs
            try:
                if core or config.anchor == "hold":
                    u = u_hold
                else:
                    u = _intersample_input(system, lyap, config, cx, box, R, xhat, xm,
                                           eps, tau, hs, eb, tr)
            except (EmptyPolytope, EvaluatorError, DomainError, NoBoundExists) as exc:
                return fail(type(exc).__name__, exc, xm, np.zeros(system.m))
            Vx = V(x)
            tr.add(t, x, xm, u, Vx, V(xm), eb, dt, pending)
            pending = []
            try:
                x_new, xm = integrate_step(system, np.stack([x, xm]), u, hs)
            except (EvaluatorError, DomainError) as exc:
                return fail(type(exc).__name__, exc, xm, u)
            Vn = V(x_new)
            if not core:
                wt = float(lyap.w_tilde(x[None, :])[0])
                if Vn - Vx > -wt * hs + C_band * hs * hs + 1e-12:
                    tr.violate("decay", f"t={t}: V change {Vn - Vx:.3g} above the band")
                if Vn > Vhat_k + TOL * max(1.0, Vhat_k):
                    tr.violate("level-set", f"t={t}: V={Vn:.6g} above {Vhat_k:.6g}")
            x = x_new
            t = t + hs if j < nsub - 1 else t_end
            dist = float(np.linalg.norm(x - xs))
            if dist <= geom.r and not in_target:
                pending.append("target-ball-entry")
                in_target = entered = True
            elif dist > geom.r + CONTAIN_TOL and in_target:
                pending.append("target-ball-exit")
                in_target = False
                tr.violate("containment", f"t={t}: left the target ball ({dist:.6g})")
            elif dist > geom.r + CONTAIN_TOL and entered:
                tr.violate("containment", f"t={t}: outside the target ball ({dist:.6g})")

        if np.linalg.norm(x - x_meas) > displacement_bound(Fb, t_end - tr.measurements[-1]["t"]) + TOL:
            tr.violate("displacement", f"t={t}: moved farther than Fbar * delta")
        prev = (xhat, eb, t_end - tr.measurements[-1]["t"], x_meas, core, Fb)
        if t >= T - 1e-12:
            tr.add(t, x, xm, np.full(system.m, np.nan), V(x), V(xm), np.nan, np.nan,
                   pending + ["end"])
            break
    if tr.measurements:
        dks = [m["delta_k"] for m in tr.measurements]
        if h > min(dks) / 10:
            tr.messages.append("warning: integrator step exceeds a tenth of the smallest dwell")
    return tr


def _intersample_input(system, lyap, config, cx, box, R, xhat, xm, eps, tau, hs, eb, tr):
    if config.anchor == "model":
        rad = eps + 2 * cx.Fbar * (tau + hs)
        if _ball_margin(cx.region, xm) >= rad:
            poly = decay.robust_polytope(decay.beta(system, lyap, xm), cx.L, rad, box)
            ok, _ = decay.is_nonempty(poly)
            if ok:
                return decay.select_control(poly, config.strategy, R)
        tr.fallbacks += 1
    rad = min(eps + cx.Fbar * (tau + hs), eb)
    poly = decay.robust_polytope(decay.beta(system, lyap, xhat), cx.L, rad, box)
    return decay.select_control(poly, config.strategy, R)
