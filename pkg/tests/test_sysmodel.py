import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from robstc import sysmodel as sm
from robstc.errors import DomainError


@pytest.fixture(scope="module")
def train():
    return sm.make_train_system()


@pytest.fixture(scope="module")
def cubic():
    return sm.make_cubic3d_system()


@pytest.fixture(scope="module")
def lv():
    return sm.make_lotka_volterra_system()


def test_input_box_rejects_boxes_without_origin():
    with pytest.raises(ValueError):
        sm.InputBox([0.1], [1.0])
    with pytest.raises(ValueError):
        sm.InputBox([-1.0, 0.0], [1.0, 0.0])


def test_input_box_vertices_and_magnitude():
    box = sm.InputBox([-3.0, -3.0], [4.0, 2.0])
    assert len(box.vertices()) == 4
    np.testing.assert_array_equal(box.magnitude, [4.0, 3.0])
    A, b = box.halfspaces()
    assert np.all(box.vertices() @ A.T <= b + 1e-12)


def test_region_margin_and_grid():
    reg = sm.Region(center=[0.0, 0.0], radius=1.0, lower=[-2.0, -0.5], upper=[2.0, 0.5])
    assert reg.margin([0.0, 0.0]) == pytest.approx(0.5)
    assert reg.margin([0.9, 0.0]) == pytest.approx(0.1)
    X = reg.grid(21)
    assert np.all(reg.contains(X, tol=1e-12))


def test_train_equilibrium(train):
    system, lyap, _ = train
    u_eq = sm.train_equilibrium_input()
    assert system.dynamics(np.array([30.0]), np.array([u_eq]))[0] == pytest.approx(0.0, abs=1e-14)


def test_train_decay_value(train):
    _, lyap, _ = train
    assert lyap.w(np.array([27.0])) == pytest.approx(0.225)


def test_train_decay_condition_holds_on_working_range(train):
    system, lyap, kappa = train
    # the decay condition holds on [23.6, 40]; sampled from 24 upward
    X = np.linspace(24.0, 40.0, 1000)[:, None]
    dV = lyap.grad(X)[:, 0]
    phi = dV * system.dynamics(X, kappa(X))[:, 0] + lyap.w(X)
    assert np.all(phi <= 1e-9)


def test_train_decay_condition_fails_at_low_speed(train):
    """Below about 23.6 m/s the feedback cannot reach the decay rate."""
    system, lyap, kappa = train
    X = np.array([[21.0]])
    phi = lyap.grad(X)[:, 0] * system.dynamics(X, kappa(X))[:, 0] + lyap.w(X)
    assert phi[0] > 0


def test_cubic_unit_vector_value(cubic):
    _, lyap, _ = cubic
    assert lyap.V(np.array([1.0, 0.0, 0.0])) == pytest.approx(0.5)


def test_cubic_eigenvalues_match_characteristic_polynomial():
    roots = oracles.char_poly_roots_3x3(sm.CUBIC_P)
    np.testing.assert_allclose(roots, [0.5, 1.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(np.linalg.eigvalsh(sm.CUBIC_P), roots, atol=1e-12)


def test_cubic_drift_matches_scalar_transcription(cubic):
    system, _, _ = cubic
    X = np.random.default_rng(3).uniform(-2, 2, size=(50, 3))
    ref = np.array([oracles.cubic_drift_at(*x) for x in X])
    np.testing.assert_allclose(system.drift(X), ref, rtol=1e-14, atol=1e-14)


def test_cubic_feedback_achieves_decay(cubic):
    system, lyap, kappa = cubic
    rng = np.random.default_rng(7)
    d = rng.normal(size=(1000, 3))
    X = d / np.linalg.norm(d, axis=1, keepdims=True) * 2 * rng.uniform(size=(1000, 1)) ** (1 / 3)
    vdot = np.einsum("ij,ij->i", lyap.grad(X), system.dynamics(X, kappa(X)))
    assert np.all(vdot <= -lyap.w(X) + 1e-12)


def test_lv_value_at_fixpoint(lv):
    _, lyap, _ = lv
    assert lyap.V(np.array([10.0, 4.0])) == pytest.approx(0.0, abs=1e-15)


def test_lv_feedback_at_fixpoint(lv):
    _, _, kappa = lv
    np.testing.assert_allclose(kappa(np.array([10.0, 4.0])), [0.5, -0.6], atol=1e-15)


def test_lv_vdot_equals_minus_decay(lv):
    system, lyap, kappa = lv
    rng = np.random.default_rng(11)
    X = np.column_stack([rng.uniform(1, 20, 500), rng.uniform(1, 8, 500)])
    vdot = np.einsum("ij,ij->i", lyap.grad(X), system.dynamics(X, kappa(X)))
    np.testing.assert_allclose(vdot, -lyap.w(X), atol=1e-9)
    prm = sm.LV_PARAMS
    ref = [oracles.lv_vdot_symbolic(x1, x2, prm["a"], prm["b"], prm["c"], prm["d"], 10.0, 4.0)
           for x1, x2 in X]
    np.testing.assert_allclose(vdot, ref, atol=1e-9)


def test_lv_rejects_nonpositive_states(lv):
    _, lyap, _ = lv
    with pytest.raises(DomainError):
        lyap.V(np.array([0.0, 4.0]))
    with pytest.raises(DomainError):
        lyap.grad(np.array([[1.0, -1.0]]))


def test_lv_feedback_stays_in_box(lv):
    system, _, kappa = lv
    X = sm.LV_WORKING_SET.sample(10_000, np.random.default_rng(0))
    U = kappa(X)
    assert np.all(U >= system.box.lower) and np.all(U <= system.box.upper)


@pytest.mark.parametrize("which", ["train", "cubic", "lv"])
def test_gradient_matches_central_differences(which, train, cubic, lv):
    system, lyap, _ = dict(train=train, cubic=cubic, lv=lv)[which]
    reg = dict(train=sm.Region.box([24.0], [40.0]), cubic=sm.Region.ball(np.zeros(3), 2.0),
               lv=sm.LV_WORKING_SET)[which]
    X = reg.sample(1000, np.random.default_rng(5))
    h = 1e-5 * np.maximum(1.0, np.abs(X))
    G = np.zeros_like(X)
    for j in range(X.shape[1]):
        e = np.zeros_like(X)
        e[:, j] = h[:, j]
        G[:, j] = (lyap.V(X + e) - lyap.V(X - e)) / (2 * h[:, j])
    g = lyap.grad(X)
    rel = np.linalg.norm(G - g, axis=1) / np.maximum(np.linalg.norm(g, axis=1), 1e-3)
    assert rel.max() < 1e-6


@pytest.mark.parametrize("which", ["train", "cubic", "lv"])
def test_class_k_sandwich(which, train, cubic, lv):
    _, lyap, _ = dict(train=train, cubic=cubic, lv=lv)[which]
    reg = dict(train=sm.Region.box([20.0], [40.0]), cubic=sm.Region.ball(np.zeros(3), 2.0),
               lv=sm.LV_WORKING_SET)[which]
    X = reg.sample(20_000, np.random.default_rng(2))
    d = np.linalg.norm(X - lyap.x_star, axis=1)
    V = lyap.V(X)
    assert np.all(lyap.alpha1(d) <= V + 1e-12)
    assert np.all(V <= lyap.alpha2(d) + 1e-12)


@pytest.mark.parametrize("which", ["train", "cubic", "lv"])
def test_relaxed_decay_is_below_decay(which, train, cubic, lv):
    _, lyap, _ = dict(train=train, cubic=cubic, lv=lv)[which]
    reg = dict(train=sm.Region.box([20.0], [40.0]), cubic=sm.Region.ball(np.zeros(3), 2.0),
               lv=sm.LV_WORKING_SET)[which]
    X = reg.sample(2000, np.random.default_rng(4))
    w, wt = lyap.w(X), lyap.w_tilde(X)
    assert np.all(wt <= w)
    assert np.all(wt > 0)
    assert float(lyap.w_tilde(lyap.x_star[None, :])[0]) == 0.0


def test_tabulated_class_k_inverse_round_trip():
    s = np.linspace(0, 5, 50)
    a = sm.TabulatedClassK(s, s ** 2)
    v = np.linspace(0, 30, 17)
    np.testing.assert_allclose(a(a.inverse(v)), v, rtol=1e-9, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 10.0), st.floats(0.0, 100.0))
def test_quadratic_class_k_inverse(c, v):
    a = sm.QuadraticClassK(c)
    assert a(a.inverse(v)) == pytest.approx(v, rel=1e-9, abs=1e-12)


def test_max_on_ball_sampling_matches_closed_form(cubic):
    _, lyap, _ = cubic
    est = dataclass_replace_exact(lyap).max_on_ball(0.8)
    assert est <= lyap.alpha2(0.8) + 1e-12
    assert est >= 0.97 * lyap.alpha2(0.8)


def dataclass_replace_exact(lyap):
    import dataclasses
    return dataclasses.replace(lyap, alpha2_exact=False)
