"""Target, triggering and core balls, and the self-triggered dwell time."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .bounds import BoundsContext
from .errors import GeometryInfeasible, NonPositiveDwell
from .sysmodel import LyapunovPackage


@dataclass(frozen=True)
class BallGeometry:
    """Radii around ``x*``.

    Measuring inside the triggering ball (radius ``r_tilde``) keeps the state in
    the target ball (radius ``r``); inside the core ball (``r_star``) no robust
    decay is needed and the input is free.
    """

    r: float
    r_tilde: float
    r_star: float
    V_r: float

    def as_dict(self) -> dict:
        return dict(r=self.r, r_tilde=self.r_tilde, r_star=self.r_star, V_r=self.V_r)


def ball_geometry(lyap: LyapunovPackage, r: float, eps: float,
                  r_star: Optional[float] = None,
                  r_tilde: Optional[float] = None) -> BallGeometry:
    """Derive the triggering ball from the target ball via the class-K pair.

    ``r_tilde`` may be given explicitly (as in the predator-prey study) but
    must not exceed the value implied by the class-K pair.
    """
    if r <= 0:
        raise ValueError("target radius must be positive")
    V_r = float(lyap.alpha1(r))
    implied = float(lyap.alpha2_inv(V_r))
    if r_tilde is None:
        r_tilde = implied
    elif r_tilde > implied * (1 + 1e-12):
        raise GeometryInfeasible(
            f"triggering radius {r_tilde} exceeds the class-K limit {implied:.6g}")
    if r_star is None:
        r_star = max(0.5 * r_tilde, r_tilde - 4 * eps)
    if r_star <= 0:
        raise GeometryInfeasible("core radius must be positive")
    if r_star + 2 * eps >= r_tilde:
        raise GeometryInfeasible(
            f"core radius {r_star} + 2 eps must stay below the triggering radius {r_tilde:.6g}")
    if r_tilde > r * (1 + 1e-12):
        raise GeometryInfeasible("triggering radius exceeds the target radius")
    return BallGeometry(float(r), float(r_tilde), float(r_star), V_r)


def delta_k(ctx: BoundsContext, geom: BallGeometry, eps: float, eps_bar_at_xhat: float,
            xhat_in_core: bool, state=None) -> float:
    """Time until the next measurement.

    Outside the core ball the state may drift ``eps_bar - 2 eps`` at speed at
    most ``Fbar``; inside it, the free input must not carry the state beyond the
    triggering ball.
    """
    if xhat_in_core:
        num, den = geom.r_tilde - 2 * eps - geom.r_star, ctx.Fbar0
    else:
        num, den = eps_bar_at_xhat - 2 * eps, ctx.Fbar
    if num <= 0:
        raise NonPositiveDwell(
            f"dwell time numerator {num:.3g} is not positive", state=state,
            eps_bar=eps_bar_at_xhat)
    if den <= 0:
        return float("inf")
    return num / den


def displacement_bound(Fbar: float, dt: float) -> float:
    """Largest distance travelled in ``dt`` at speed at most ``Fbar``."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    return Fbar * dt
