"""Train speed regulation with a coarse speed sensor.

The uniform sensor requirement is conservative for this system: a 3 cm/s
sensor violates it, yet the sampled maximum-error field shows the scheme
still works. This script prints both numbers and runs the closed loop.
"""
import numpy as np

from robstc import scenarios

spec = scenarios.get_scenario("train")
prep = scenarios.prepare(spec)
ctx = prep.ctx

print("working set radius   ", round(ctx.Rstar, 4))
print("Lipschitz constants  ", np.round(ctx.L, 4))
print("speed bounds         ", round(ctx.Fbar, 4), round(ctx.Fbar0, 4))
print("uniform requirement  ", f"{prep.eps_min:.4g}")
print("field requirement    ", f"{prep.required_accuracy:.4g}",
      "at v =", round(float(prep.field.argmin[0]), 3))
print("sensor accuracy      ", spec.eps)

(trace,) = scenarios.simulate(prep)
s = trace.summary(prep.geometry, prep.lyap.x_star)
print()
print("measurements         ", s["measurement_count"])
print("dwell min / mean     ", f"{s['delta_k_min']:.3f} / {s['delta_k_mean']:.3f}")
print("entered target ball  ", f"{s['entry_time']:.2f} s")
print("stayed inside        ", s["contained"])
print("invariant violations ", s["violations"])

a = trace.arrays()
core = sum(m["core"] for m in trace.measurements)
print("readings in core ball", core, "(input set to zero there)")
print("final speed          ", round(float(a["x_true"][-1, 0]), 4))
