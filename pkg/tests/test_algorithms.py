import numpy as np
import pytest

from lugt.algorithms import (NetworkState, RunConfig, Schedule, dgd_local_step, init_state, iterate,
                             lu_gt_step, run)
from lugt.errors import ConfigError, DivergenceError
from lugt.metrics import consensus_error
from lugt.objective import Objective, RegLSData, generate_synthetic, global_minimizer_quadratic
from lugt.topology import build_graph, metropolis_weights


def scalar_obj(cs):
    n = len(cs)
    return Objective(RegLSData(np.ones((n, 1, 1)), np.array(cs, float).reshape(n, 1)))


@pytest.fixture(scope="module")
def small():
    obj = Objective(generate_synthetic(5, 6, p=12, m=3, rho=0.5, hetero_scale=0.3))
    mix = metropolis_weights(build_graph("ring", 6))
    return obj, mix


def test_single_agent_is_gradient_descent():
    obj = Objective(RegLSData(np.ones((1, 1, 1)), np.zeros((1, 1))))  # f(x) = x^2
    eta, alpha = 0.3, 0.05
    s = init_state(obj, np.array([1.0]), "lu_gt", alpha)
    assert s.y[0, 0] == pytest.approx(2 * alpha)
    s1 = lu_gt_step(s, np.eye(1), obj, eta, alpha, communicate=True)
    assert s1.x[0, 0] == pytest.approx(1 - 2 * eta * alpha, abs=1e-15)
    s2 = lu_gt_step(s, np.eye(1), obj, eta, alpha, communicate=False)
    assert s2.x[0, 0] == s1.x[0, 0]


def test_homogeneous_stays_consensual():
    d0 = generate_synthetic(1, 1, p=8, m=3, rho=0.3)
    obj = Objective(RegLSData(np.repeat(d0.A, 5, 0), np.repeat(d0.b, 5, 0), rho=0.3))
    mix = metropolis_weights(build_graph("star", 5))
    cfg = RunConfig("lu_gt", 0.2, 0.01, Schedule(3, 40))
    for st in iterate(cfg, mix, obj, np.ones(3)):
        assert np.max(np.abs(st.x - st.x[0])) <= 1e-12


def hand_rolled_lu_gt(cs, w, eta, alpha, T_o, steps):
    """Plain-python Algorithm for scalar agents f_i = (x - c_i)^2."""
    n = len(cs)
    grad = [lambda x, c=c: 2 * (x - c) for c in cs]
    x = [0.0] * n
    y = [alpha * grad[i](x[i]) for i in range(n)]
    for k in range(steps):
        xn = [x[i] - eta * y[i] for i in range(n)]
        yn_pre = None
        if k % T_o == 0:
            xn = [sum(w[i][j] * xn[j] for j in range(n)) for i in range(n)]
        yn_pre = [y[i] + alpha * grad[i](xn[i]) - alpha * grad[i](x[i]) for i in range(n)]
        if k % T_o == 0:
            yn_pre = [sum(w[i][j] * yn_pre[j] for j in range(n)) for i in range(n)]
        x, y = xn, yn_pre
    return x, y


def test_three_agent_two_steps_against_hand_roll():
    cs = [0.0, 1.0, 5.0]
    w = [[1 / 3] * 3 for _ in range(3)]
    obj = scalar_obj(cs)
    cfg = RunConfig("lu_gt", 0.4, 0.1, Schedule(2, 2))
    states = list(iterate(cfg, np.array(w), obj, np.zeros(1)))
    x_ref, y_ref = hand_rolled_lu_gt(cs, w, 0.4, 0.1, 2, 2)
    np.testing.assert_allclose(states[-1].x[:, 0], x_ref, rtol=0, atol=1e-12)
    np.testing.assert_allclose(states[-1].y[:, 0], y_ref, rtol=0, atol=1e-12)


def test_ring_three_agents_T_o_three_against_hand_roll():
    cs = [-1.0, 0.5, 2.0, 4.0]
    mix = metropolis_weights(build_graph("ring", 4))
    cfg = RunConfig("lu_gt", 0.3, 0.2, Schedule(3, 7))
    st = list(iterate(cfg, mix, scalar_obj(cs), np.zeros(1)))[-1]
    x_ref, y_ref = hand_rolled_lu_gt(cs, mix.w.tolist(), 0.3, 0.2, 3, 7)
    np.testing.assert_allclose(st.x[:, 0], x_ref, atol=1e-12)
    np.testing.assert_allclose(st.y[:, 0], y_ref, atol=1e-12)


def test_comm_round_count(small):
    obj, mix = small
    cfg = RunConfig("lu_gt", 0.1, 0.01, Schedule(4, 23))
    for st in iterate(cfg, mix, obj, np.zeros(3)):
        assert st.comm_rounds == sum(1 for t in range(st.k) if t % 4 == 0)


def test_lu_gt_T1_equals_atc(small):
    obj, mix = small
    eta, alpha = 0.3, 0.004
    lu = list(iterate(RunConfig("lu_gt", eta, alpha, Schedule(1, 300)), mix, obj, np.zeros(3)))
    atc = list(iterate(RunConfig("atc_gt", eta, alpha, Schedule(1, 300)), mix, obj, np.zeros(3)))
    for a, b in zip(lu, atc):
        np.testing.assert_allclose(a.x, b.x, rtol=0, atol=1e-12)
        np.testing.assert_allclose(a.y, alpha * b.y, rtol=0, atol=1e-12)


@pytest.mark.parametrize("T_o", [1, 3, 7])
def test_tracking_and_average_identities(small, T_o):
    obj, mix = small
    eta, alpha = 0.5 / T_o, 0.004
    prev = None
    for st in iterate(RunConfig("lu_gt", eta, alpha, Schedule(T_o, 200)), mix, obj, np.zeros(3)):
        target = alpha * st.grad.mean(axis=0)
        assert np.linalg.norm(st.y.mean(axis=0) - target) <= 1e-9 * (1 + np.linalg.norm(target))
        if prev is not None:
            pred = prev.x.mean(axis=0) - eta * alpha * prev.grad.mean(axis=0)
            xb = st.x.mean(axis=0)
            assert np.linalg.norm(xb - pred) <= 1e-10 * (1 + np.linalg.norm(prev.x.mean(axis=0)))
        prev = st


def test_phi_matches_orthonormal_basis_projection(small):
    obj, mix = small
    n = obj.n
    q, _ = np.linalg.qr(np.column_stack([np.ones(n), np.eye(n)[:, : n - 1]]))
    q_hat = q[:, 1:]
    np.testing.assert_allclose(q_hat.T @ q_hat, np.eye(n - 1), atol=1e-12)
    np.testing.assert_allclose(q_hat @ q_hat.T, np.eye(n) - np.ones((n, n)) / n, atol=1e-12)
    for st in iterate(RunConfig("lu_gt", 0.2, 0.004, Schedule(3, 30)), mix, obj, np.zeros(3)):
        phi = consensus_error(st.x) + consensus_error(st.y)
        proj = np.sum((q_hat.T @ st.x) ** 2) + np.sum((q_hat.T @ st.y) ** 2)
        assert abs(phi - proj) <= 1e-9 * max(1.0, phi)


def test_converges_to_consensual_stationary_point(small):
    obj, mix = small
    states = list(iterate(RunConfig("lu_gt", 0.3, 0.01, Schedule(4, 6000)), mix, obj, np.zeros(3)))
    window = states[-40:]
    cauchy = max(np.max(np.abs(s.x - window[-1].x)) for s in window)
    assert cauchy <= 1e-12
    last = window[-1]
    assert np.linalg.norm(last.y) <= 1e-8
    assert np.max(np.abs(last.x - last.x[0])) <= 1e-8
    assert np.linalg.norm(obj.global_grad(last.x[0])) <= 1e-6


def test_permutation_equivariance(small):
    obj, mix = small
    perm = np.array([3, 0, 5, 1, 4, 2])
    d = obj.data
    pobj = Objective(RegLSData(d.A[perm], d.b[perm], rho=d.rho))
    pw = mix.w[np.ix_(perm, perm)]
    cfg = RunConfig("lu_gt", 0.2, 0.005, Schedule(3, 150))
    for a, b in zip(iterate(cfg, mix, obj, np.zeros(3)), iterate(cfg, pw, pobj, np.zeros(3))):
        np.testing.assert_allclose(a.x[perm], b.x, rtol=1e-12, atol=1e-13)
        np.testing.assert_allclose(a.y[perm], b.y, rtol=1e-12, atol=1e-13)


def test_run_reaches_closed_form_minimizer():
    d = generate_synthetic(2, 8, p=30, m=4, rho=0.0)
    obj = Objective(d)
    x_star = global_minimizer_quadratic(d)
    mix = metropolis_weights(build_graph("ring", 8))
    res = run(RunConfig("lu_gt", 0.2, 0.02, Schedule(5, 4000), record_every=100), mix, obj, np.zeros(4))
    assert not res.diverged
    assert res.records[-1].grad_norm_avg_point <= 1e-12
    assert np.max(np.abs(res.final.x - x_star)) <= 1e-5


def test_dgd_homogeneous_equals_centralized_gd():
    d0 = generate_synthetic(1, 1, p=8, m=3, rho=0.3)
    obj = Objective(RegLSData(np.repeat(d0.A, 4, 0), np.repeat(d0.b, 4, 0), rho=0.3))
    mix = metropolis_weights(build_graph("ring", 4))
    step = 0.002
    x = np.zeros(3)
    for st in iterate(RunConfig("dgd_local", 1.0, step, Schedule(2, 50)), mix, obj, np.zeros(3)):
        np.testing.assert_allclose(st.x, np.tile(x, (4, 1)), atol=1e-12)
        x = x - step * obj.global_grad(x)


def test_dgd_single_agent():
    obj = scalar_obj([3.0])
    s = init_state(obj, np.array([1.0]), "dgd_local")
    s = dgd_local_step(s, np.eye(1), obj, 0.1, True)
    assert s.x[0, 0] == pytest.approx(1 - 0.1 * 2 * (1 - 3))


def test_dgd_two_agent_fixed_point_bias():
    cs = np.array([0.0, 2.0])
    w = np.array([[0.75, 0.25], [0.25, 0.75]])
    s = 0.05
    # fixed point of x = W((1 - 2s) x + 2 s c)
    x_fp = np.linalg.solve(np.eye(2) - (1 - 2 * s) * w, 2 * s * w @ cs)
    res = list(iterate(RunConfig("dgd_local", 1.0, s, Schedule(1, 2000)), w, scalar_obj(cs), np.zeros(1)))
    np.testing.assert_allclose(res[-1].x[:, 0], x_fp, atol=1e-12)
    assert abs(x_fp[0] - 1.0) > 0.05  # biased away from the global minimizer 1


def test_divergence_flagged(small):
    obj, mix = small
    res = run(RunConfig("lu_gt", 0.9, 5.0, Schedule(1, 500)), mix, obj, np.zeros(3))
    assert res.diverged and res.diverged_at is not None
    assert len(res.records) < 501
    assert all(np.isfinite(r.phi_sq) for r in res.records)
    with pytest.raises(DivergenceError), np.errstate(invalid="ignore"):
        bad = NetworkState(np.full((6, 3), np.inf), np.zeros((6, 3)))
        lu_gt_step(bad, mix.w, obj, 0.1, 0.1, True)


def test_config_validation():
    with pytest.raises(ConfigError):
        Schedule(0, 10)
    with pytest.raises(ConfigError):
        Schedule(1, 0)
    with pytest.raises(ConfigError):
        RunConfig("extra", 0.1, 0.1, Schedule(1, 1))
    with pytest.raises(ConfigError):
        RunConfig("lu_gt", 0.0, 0.1, Schedule(1, 1))


def test_record_schedule(small):
    obj, mix = small
    res = run(RunConfig("lu_gt", 0.1, 0.001, Schedule(2, 23), record_every=5), mix, obj, np.zeros(3))
    assert [r.k for r in res.records] == [0, 5, 10, 15, 20, 23]
    assert len(res.records) == -(-23 // 5) + 1
