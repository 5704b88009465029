import dataclasses

import numpy as np
import pytest

from robstc import bounds, scenarios, sysmodel as sm
from robstc.errors import AccuracyInsufficient, ConfigError, NoBoundExists


@pytest.fixture(scope="module")
def train_report():
    return scenarios.verify_assumptions(scenarios.get_scenario("train"))


def test_train_verdicts(train_report):
    rep = train_report
    for name in ("decay_condition", "feedback_in_box", "relaxed_decay", "class_k_sandwich",
                 "gradient_check", "geometry"):
        assert rep[name].passed, rep.format()
    # the uniform guarantee is conservative; the sampled field is not
    assert not rep["eps_below_eps_min"].passed
    assert rep["eps_below_field_requirement"].passed
    assert not rep.all_passed
    assert "FAIL" in rep.format() and "PASS" in rep.format()


def test_report_lookup_and_dict(train_report):
    with pytest.raises(KeyError):
        train_report["nothing"]
    d = train_report.as_dict()
    assert d["scenario"] == "train"
    assert {v["name"] for v in d["verdicts"]} >= {"geometry", "eps_below_eps_min"}


def test_exact_sensor_passes_everything():
    spec = scenarios.get_scenario("train", eps=0.0)
    rep = scenarios.verify_assumptions(spec, samples=2000)
    assert rep.all_passed, rep.format()


def test_cubic_verdicts_with_override():
    spec = scenarios.get_scenario("cubic3d")
    grid = dataclasses.replace(spec.grid, points_per_axis=15)
    rep = scenarios.verify_assumptions(dataclasses.replace(spec, grid=grid), samples=2000)
    assert rep["decay_condition"].passed and rep["class_k_sandwich"].passed
    assert not rep["eps_below_eps_min"].passed


def test_lv_geometry_accepted():
    spec = scenarios.get_scenario("lotka_volterra")
    grid = dataclasses.replace(spec.grid, points_per_axis=41)
    prep = scenarios.prepare(dataclasses.replace(spec, grid=grid), with_field=False)
    g = prep.geometry
    assert (g.r, g.r_tilde, g.r_star) == (0.7, 0.3, 0.2)
    assert prep.lyap.class_k_fitted


def test_prepare_is_deterministic():
    spec = scenarios.get_scenario("train")
    a = scenarios.prepare(spec)
    b = scenarios.prepare(spec)
    assert a.ctx.as_dict() == b.ctx.as_dict()
    assert a.eps_min == b.eps_min
    np.testing.assert_array_equal(a.field.eps_bar, b.field.eps_bar)


def unstable_spec():
    """xdot = x with an input box that is (numerically) the origin only."""
    def builder():
        box = sm.InputBox([-1e-9], [1e-9])
        system = sm.ControlAffineSystem(1, 1, lambda x: x, lambda x: np.ones(x.shape + (1,)),
                                        box, name="unstable")
        a = sm.QuadraticClassK(1.0)
        lyap = sm.LyapunovPackage(
            V=lambda x: 0.5 * x[..., 0] ** 2, grad=lambda x: x,
            w=lambda x: 0.1 * x[..., 0] ** 2, w_tilde=lambda x: 0.05 * x[..., 0] ** 2,
            alpha1=a, alpha2=a, alpha1_inv=a.inverse, alpha2_inv=a.inverse, x_star=[0.0])
        return system, lyap, sm.StabilizingFeedback(lambda x: np.zeros_like(x))
    return scenarios.ScenarioSpec(
        name="unstable", builder=builder, eps=0.01, r=0.5, r_star=0.2,
        initial_conditions=((1.0,),), assumption_region=sm.Region.box([-1.0], [1.0]))


def test_unsatisfiable_decay_is_detected():
    spec = unstable_spec()
    with pytest.raises(NoBoundExists):
        scenarios.prepare(spec)
    rep = scenarios.verify_assumptions(spec, samples=500)
    assert not rep["decay_condition"].passed
    assert not rep["preparation"].passed
    assert "NoBoundExists" in rep["preparation"].detail


def test_register_user_scenario():
    spec = dataclasses.replace(unstable_spec(), name="user-test")
    scenarios.register_scenario(spec)
    try:
        assert scenarios.get_scenario("user-test") is spec
    finally:
        scenarios.SCENARIOS.pop("user-test")
    with pytest.raises(ConfigError):
        scenarios.get_scenario("user-test")


def test_spec_validation():
    base = scenarios.get_scenario("train")
    for kw in (dict(alpha=1.0), dict(alpha=0.0), dict(r=-1.0), dict(eps=-0.1),
               dict(initial_conditions=())):
        with pytest.raises(ConfigError):
            dataclasses.replace(base, **kw)


def test_accuracy_gate():
    spec = scenarios.get_scenario("cubic3d", allow_infeasible_eps=False)
    grid = dataclasses.replace(spec.grid, points_per_axis=21)
    prep = scenarios.prepare(dataclasses.replace(spec, grid=grid))
    with pytest.raises(AccuracyInsufficient):
        scenarios.check_accuracy(prep)
    prep.spec = dataclasses.replace(prep.spec, allow_infeasible_eps=True)
    (msg,) = scenarios.check_accuracy(prep)
    assert "override" in msg


def test_yaml_config(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("scenario: train\neps: 0.02\nr_star: 0.8\ngrid:\n  points_per_axis: 501\n"
                    "sim:\n  T: 3.0\n  seed: 9\noutput:\n  dir: outdir\n")
    spec, out = scenarios.spec_from_config(scenarios.load_config(path))
    assert spec.eps == 0.02 and spec.r_star == 0.8
    assert spec.grid.points_per_axis == 501
    assert spec.sim.T == 3.0 and spec.sim.seed == 9 and spec.sim.h == 0.002
    assert out == "outdir"
    assert spec.sim_config().eps == 0.02


@pytest.mark.parametrize("text", ["scenario: train\nbogus: 1\n", "scenario: nope\n",
                                  "scenario: train\nsim:\n  speed: 2\n",
                                  "scenario: train\ngrid:\n  density: 2\n",
                                  "scenario: train\neps: [1, 2]\n", "- a\n- b\n", "a: [\n"])
def test_bad_configs(tmp_path, text):
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        scenarios.spec_from_config(scenarios.load_config(path))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        scenarios.load_config(tmp_path / "absent.yaml")


def test_working_set_uses_farthest_initial_condition():
    spec = scenarios.get_scenario("train", initial_conditions=((29.0,), (26.0,)))
    prep = scenarios.prepare(spec, with_field=False)
    assert prep.ctx.Rhat == pytest.approx(4.0 + 0.06)
    assert prep.eps_min == bounds.eps_min(prep.ctx, prep.system.box)
