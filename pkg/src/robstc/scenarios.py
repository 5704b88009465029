"""Case-study parameter sets, assumption checks and run preparation.

A :class:`ScenarioSpec` bundles a system builder with the accuracy, radii,
relaxation factor, grid resolution and simulation defaults of one study.
User systems plug in by passing any builder that returns
``(ControlAffineSystem, LyapunovPackage, StabilizingFeedback)``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import yaml

from . import bounds, decay, sim, sysmodel, trigger
from .errors import AccuracyInsufficient, ConfigError, RobSTCError


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    builder: Callable
    eps: float
    r: float
    initial_conditions: tuple
    assumption_region: sysmodel.Region
    r_star: Optional[float] = None
    r_tilde: Optional[float] = None
    alpha: float = 0.5
    domain: Optional[sysmodel.Region] = None
    grid: bounds.GridSpec = field(default_factory=bounds.GridSpec)
    sim: sim.SimConfig = field(default_factory=sim.SimConfig)
    allow_infeasible_eps: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("relaxation factor alpha must lie in (0, 1)")
        for name in ("r", "r_star", "r_tilde"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        if self.eps < 0:
            raise ConfigError("eps must be nonnegative")
        if not self.initial_conditions:
            raise ConfigError("at least one initial condition is required")
        ics = tuple(tuple(float(v) for v in np.atleast_1d(x)) for x in self.initial_conditions)
        object.__setattr__(self, "initial_conditions", ics)

    def build(self):
        system, lyap, feedback = self.builder(**self.params)
        return system, lyap.relaxed(self.alpha), feedback

    def sim_config(self, **overrides) -> sim.SimConfig:
        return dataclasses.replace(self.sim, eps=self.eps, **overrides)


def _train_builder(**params):
    return sysmodel.make_train_system(**params)


def _cubic_builder(**params):
    return sysmodel.make_cubic3d_system(**params)


def _lv_builder(**params):
    return sysmodel.make_lotka_volterra_system(**params)


SCENARIOS = {
    "train": ScenarioSpec(
        name="train", builder=_train_builder, eps=0.03, r=1.0, r_star=0.9, alpha=0.6,
        initial_conditions=((27.0,),),
        # the feedback cannot reach the decay rate below about 23.6 m/s, so sampling starts at 24
        assumption_region=sysmodel.Region.box([24.0], [40.0]),
        sim=sim.SimConfig(h=0.002, T=40.0, strategy="midpoint"),
    ),
    "cubic3d": ScenarioSpec(
        name="cubic3d", builder=_cubic_builder, eps=1e-3, r=0.7, r_star=0.3, alpha=0.5,
        initial_conditions=((-0.5, 0.5, -0.5),),
        assumption_region=sysmodel.Region.ball(np.zeros(3), 2.0),
        sim=sim.SimConfig(h=1e-3, T=8.0, strategy="chebyshev"),
        allow_infeasible_eps=True,
    ),
    "lotka_volterra": ScenarioSpec(
        name="lotka_volterra", builder=_lv_builder, eps=1e-2, r=0.7, r_star=0.2,
        r_tilde=0.3, alpha=0.5,
        initial_conditions=((5, 8), (10, 6), (15, 4), (10, 3), (5, 2), (1, 3), (1, 5)),
        assumption_region=sysmodel.LV_WORKING_SET, domain=sysmodel.LV_WORKING_SET,
        sim=sim.SimConfig(h=1e-3, T=10.0, strategy="mincost", R=((3.0, 0.0), (0.0, 1.0))),
    ),
}


def register_scenario(spec: ScenarioSpec):
    SCENARIOS[spec.name] = spec


def get_scenario(name: str, **overrides) -> ScenarioSpec:
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; known: {sorted(SCENARIOS)}")
    spec = SCENARIOS[name]
    return dataclasses.replace(spec, **overrides) if overrides else spec


# ---------------------------------------------------------------------------
# Assumption verification
# ---------------------------------------------------------------------------

@dataclass
class Verdict:
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    witness: Optional[list] = None
    detail: str = ""

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class AssumptionReport:
    scenario: str
    verdicts: list
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name) -> Verdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    @property
    def all_passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def as_dict(self) -> dict:
        return dict(scenario=self.scenario, verdicts=[v.as_dict() for v in self.verdicts],
                    meta=self.meta)

    def format(self) -> str:
        lines = [f"assumption report: {self.scenario}"]
        for v in self.verdicts:
            val = "" if v.value is None else f" value={v.value:.6g}"
            thr = "" if v.threshold is None else f" threshold={v.threshold:.6g}"
            lines.append(f"  [{'PASS' if v.passed else 'FAIL'}] {v.name}{val}{thr} {v.detail}".rstrip())
        return "\n".join(lines)


def _worst(values, X, larger_is_worse=True):
    k = int(np.argmax(values) if larger_is_worse else np.argmin(values))
    return float(values[k]), X[k].tolist()


def verify_assumptions(spec: ScenarioSpec, samples: int = 10_000, seed: int = 0,
                       prepared: Optional["Prepared"] = None) -> AssumptionReport:
    """Sampled checks of the hypotheses the stabilization scheme relies on.

    Never raises for a failed hypothesis; failures are carried as verdicts.
    """
    system, lyap, feedback = spec.build() if prepared is None else (
        prepared.system, prepared.lyap, prepared.feedback)
    rng = np.random.default_rng(seed)
    X = spec.assumption_region.sample(samples, rng)
    xs = lyap.x_star
    out = []

    U = feedback(X)
    B = decay.beta_batch(system, lyap, X, "w")
    phi = B[:, 0] + np.einsum("ij,ij->i", B[:, 1:], U)
    val, wit = _worst(phi, X)
    out.append(Verdict("decay_condition", val <= 1e-9, val, 1e-9, wit,
                       "max of <gradV, f + g kappa> + w over samples"))

    lo, hi = system.box.lower, system.box.upper
    excess = np.max(np.maximum(U - hi, lo - U), axis=1)
    val, wit = _worst(excess, X)
    out.append(Verdict("feedback_in_box", val <= 1e-9, val, 1e-9, wit,
                       "largest box violation of kappa"))

    w, wt = lyap.w(X), lyap.w_tilde(X)
    dist = np.linalg.norm(X - xs, axis=1)
    off = dist > 1e-6
    gap = wt - w
    val, wit = _worst(gap, X)
    pos = bool(np.all(wt[off] > 0))
    out.append(Verdict("relaxed_decay", val <= 1e-12 and pos, val, 0.0, wit,
                       "max of w_tilde - w; w_tilde positive away from x*"))

    Vx = lyap.V(X)
    lower = lyap.alpha1(dist) - Vx
    upper = Vx - lyap.alpha2(dist)
    both = np.maximum(lower, upper)
    val, wit = _worst(both, X)
    tol = 1e-9 * max(1.0, float(np.max(np.abs(Vx))))
    out.append(Verdict("class_k_sandwich", val <= tol, val, tol, wit,
                       "fitted pair" if lyap.class_k_fitted else "closed-form pair"))

    Xg = X[: min(1000, len(X))]
    n = Xg.shape[1]
    G = np.zeros_like(Xg)
    hstep = 1e-5 * np.maximum(1.0, np.abs(Xg))
    for j in range(n):
        e = np.zeros_like(Xg)
        e[:, j] = hstep[:, j]
        G[:, j] = (lyap.V(Xg + e) - lyap.V(Xg - e)) / (2 * hstep[:, j])
    g = lyap.grad(Xg)
    rel = np.linalg.norm(G - g, axis=1) / np.maximum(np.linalg.norm(g, axis=1), 1e-3)
    val, wit = _worst(rel, Xg)
    out.append(Verdict("gradient_check", val < 1e-6, val, 1e-6, wit,
                       "relative error against central differences"))

    try:
        prep = prepared if prepared is not None else prepare(spec)
    except RobSTCError as exc:
        out.append(Verdict("preparation", False, detail=f"{type(exc).__name__}: {exc}"))
        return AssumptionReport(spec.name, out, dict(class_k_fitted=lyap.class_k_fitted))
    eps = spec.eps
    out.append(Verdict("eps_below_eps_min", eps == 0 or eps < prep.eps_min, eps, prep.eps_min,
                       detail="uniform guarantee"))
    req = prep.field.required_accuracy if prep.field is not None else None
    out.append(Verdict("eps_below_field_requirement",
                       eps == 0 or (req is not None and eps < req), eps, req,
                       prep.field.argmin.tolist() if prep.field is not None
                       and prep.field.argmin is not None else None,
                       "half the field minimum of the maximum admissible error"))
    out.append(Verdict("geometry", True, detail=str(prep.geometry.as_dict())))
    meta = dict(class_k_fitted=lyap.class_k_fitted, bounds=prep.ctx.as_dict(),
                eps_min=prep.eps_min)
    return AssumptionReport(spec.name, out, meta)


# ---------------------------------------------------------------------------
# Preparation and simulation
# ---------------------------------------------------------------------------

@dataclass
class Prepared:
    spec: ScenarioSpec
    system: sysmodel.ControlAffineSystem
    lyap: sysmodel.LyapunovPackage
    feedback: sysmodel.StabilizingFeedback
    ctx: bounds.BoundsContext
    geometry: trigger.BallGeometry
    eps_min: float
    field: Optional[bounds.FieldResult]

    @property
    def required_accuracy(self) -> Optional[float]:
        return None if self.field is None else self.field.required_accuracy


def prepare(spec: ScenarioSpec, with_field: bool = True, L_override=None) -> Prepared:
    """Overshoot bound, working set, Lipschitz constants, radii and accuracy bounds.

    The working set is sized for the initial condition farthest from ``x*``.
    """
    system, lyap, feedback = spec.build()
    ics = [np.array(x) for x in spec.initial_conditions]
    x0 = max(ics, key=lambda x: float(np.linalg.norm(x - lyap.x_star)))
    geom = trigger.ball_geometry(lyap, spec.r, spec.eps, spec.r_star, spec.r_tilde)
    ctx = bounds.build_context(system, lyap, x0, spec.eps, geom.r_star, spec.grid,
                               spec.domain, L_override)
    emin = bounds.eps_min(ctx, system.box)
    fld = bounds.eps_bar_field(system, lyap, ctx) if with_field else None
    return Prepared(spec, system, lyap, feedback, ctx, geom, emin, fld)


def check_accuracy(prep: Prepared) -> list:
    """Warnings for an accuracy above the field requirement (or raise)."""
    spec = prep.spec
    if spec.eps == 0:
        return []
    req = prep.required_accuracy
    if req is None:
        fld = bounds.eps_bar_field(prep.system, prep.lyap, prep.ctx)
        prep.field = fld
        req = fld.required_accuracy
    if spec.eps < req:
        return []
    msg = f"eps={spec.eps:.3g} is not below the field requirement {req:.3g}"
    if spec.allow_infeasible_eps:
        return [msg + " (override enabled)"]
    raise AccuracyInsufficient(msg)


def simulate(prep: Prepared, index: Optional[int] = None, **sim_overrides) -> list:
    """Run the closed loop from one or all initial conditions."""
    warnings = check_accuracy(prep)
    cfg = prep.spec.sim_config(**sim_overrides)
    ics = prep.spec.initial_conditions
    chosen = range(len(ics)) if index is None else [index]
    traces = []
    for i in chosen:
        x0 = np.array(ics[i])
        tr = sim.run_closed_loop(prep.system, prep.lyap, x0, cfg, prep.geometry, prep.ctx,
                                 domain=prep.spec.domain, warnings=warnings)
        tr.meta.update(scenario=prep.spec.name, initial_condition=list(ics[i]))
        traces.append(tr)
    return traces


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

TOP_KEYS = {"scenario", "eps", "r", "r_star", "r_tilde", "alpha", "initial_conditions",
            "allow_infeasible_eps", "params", "grid", "sim", "output"}
GRID_KEYS = {f.name for f in dataclasses.fields(bounds.GridSpec)}
SIM_KEYS = {f.name for f in dataclasses.fields(sim.SimConfig)} - {"eps"}


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return data


def spec_from_config(cfg: dict, scenario: Optional[str] = None) -> tuple:
    """Build a scenario spec from a config mapping; returns ``(spec, output_dir)``."""
    unknown = set(cfg) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    name = scenario or cfg.get("scenario")
    if not name:
        raise ConfigError("no scenario given")
    base = get_scenario(name)
    kw = {}
    try:
        for key in ("eps", "r", "r_star", "r_tilde", "alpha"):
            if cfg.get(key) is not None:
                kw[key] = float(cfg[key])
        if "initial_conditions" in cfg:
            kw["initial_conditions"] = tuple(tuple(map(float, np.atleast_1d(x)))
                                             for x in cfg["initial_conditions"])
        if "allow_infeasible_eps" in cfg:
            kw["allow_infeasible_eps"] = bool(cfg["allow_infeasible_eps"])
        if "params" in cfg:
            kw["params"] = {**base.params, **dict(cfg["params"])}
        if "grid" in cfg:
            g = dict(cfg["grid"])
            bad = set(g) - GRID_KEYS
            if bad:
                raise ConfigError(f"unknown grid keys: {sorted(bad)}")
            kw["grid"] = dataclasses.replace(base.grid, **g)
        if "sim" in cfg:
            s = dict(cfg["sim"])
            bad = set(s) - SIM_KEYS
            if bad:
                raise ConfigError(f"unknown sim keys: {sorted(bad)}")
            if s.get("R") is not None:
                s["R"] = tuple(tuple(map(float, row)) for row in s["R"])
            kw["sim"] = dataclasses.replace(base.sim, **s)
        spec = dataclasses.replace(base, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    out = (cfg.get("output") or {}).get("dir") if isinstance(cfg.get("output"), dict) else None
    return spec, out
