"""How the sensor requirement reacts to the decay relaxation factor.

A larger relaxation factor leaves less decay slack, which shrinks both the
uniform requirement and the sampled field minimum.
"""
from robstc import scenarios

print("alpha  uniform   field/2   winning subsets")
for alpha in (0.3, 0.45, 0.6, 0.75, 0.9):
    prep = scenarios.prepare(scenarios.get_scenario("train", alpha=alpha))
    # subsets are zero based in the library; print input numbers from 1
    wins = sorted({tuple(i + 1 for i in w) for w in prep.field.winning if w is not None})
    print(f"{alpha:<6} {prep.eps_min:<9.4g} {prep.required_accuracy:<9.4g} {wins}")
