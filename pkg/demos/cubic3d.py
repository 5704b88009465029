"""Three-state system with cubic terms, unstable at the origin.

Shows the triggering radius obtained from the eigenvalues of the CLF matrix,
and a run with a sensor that is finer than the field requirement but coarser
than the uniform requirement.
"""
import numpy as np

from robstc import scenarios

spec = scenarios.get_scenario("cubic3d")
prep = scenarios.prepare(spec)
g = prep.geometry

print("eigenvalues of P     ", np.round(np.linalg.eigvalsh(np.array(
    [[1.0, 0.5, 0.0], [0.5, 1.5, 0.5], [0.0, 0.5, 1.0]])), 6))
print("target / trigger / core radius", g.r, round(g.r_tilde, 4), g.r_star)
print("uniform requirement  ", f"{prep.eps_min:.3g}")
print("field requirement    ", f"{prep.required_accuracy:.3g}")
print("sensor accuracy      ", spec.eps)

(trace,) = scenarios.simulate(prep, noise="adversarial-radial")
s = trace.summary(g, prep.lyap.x_star)
a = trace.arrays()
dist = np.linalg.norm(a["x_true"], axis=1)
print()
print("warnings             ", s["warnings"][:1])
print("entered target ball  ", f"{s['entry_time']:.3f}")
print("largest distance     ", f"{dist.max():.4f} (start {dist[0]:.4f})")
print("stayed inside        ", s["contained"], " violations", s["violations"])
