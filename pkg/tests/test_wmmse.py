import numpy as np
import pytest

from rabeam.channel import ChannelGeometry
from rabeam.linear_bf import mrt_raw
from rabeam.metrics import rates_raw
from rabeam.scene import SceneConfig, generate_topology
from rabeam.wmmse import (
    WmmseParams,
    mse,
    solve,
    solve_batch,
    update_beamformers,
    update_mse_weights,
    update_receive_filters,
)

from conftest import random_feasible_orientations, single_link_scene


def _random_instance(seed, K=4, M=4, noise=1e-8):
    config = SceneConfig(K=K, Mx=1, My=M, seed=seed)
    topo = generate_topology(config)
    geom = ChannelGeometry(config, topo)
    f = random_feasible_orientations(config, np.random.default_rng(seed)).f
    h = geom.channel(f)
    return h, np.full(K, noise), np.ones(K), config.budgets_mw()


def test_update_filters_zero_beamformers():
    h = np.ones((3, 3, 2), dtype=complex)
    u = update_receive_filters(h, np.zeros((3, 2), dtype=complex), np.full(3, 1e-8))
    np.testing.assert_array_equal(u, 0)


def test_update_filters_single_user_formula():
    h = np.array([[[0.7 - 0.2j]]])
    w = np.array([[1.5 + 0.5j]])
    d2 = 1e-3
    u = update_receive_filters(h, w, np.array([d2]))
    gain = np.conj(h[0, 0, 0]) * w[0, 0]
    assert u[0] == pytest.approx(gain / (abs(gain) ** 2 + d2), rel=1e-14)


def test_update_filters_minimizes_mse():
    h, noise, weights, budgets = _random_instance(0)
    w = mrt_raw(h, budgets)
    u = update_receive_filters(h, w, noise)
    e_star = mse(h, w, u, noise)
    # grid scan around each optimum in the complex plane
    for delta in (1e-3, -1e-3, 1e-3j, -1e-3j, 2e-4 + 3e-4j):
        e_perturbed = mse(h, w, u + delta * np.abs(u), noise)
        assert np.all(e_star <= e_perturbed + 1e-15)


def test_update_weights():
    np.testing.assert_array_equal(update_mse_weights(np.array([1.0])), 1.0)
    np.testing.assert_array_equal(update_mse_weights(np.array([0.25])), 4.0)
    with pytest.raises(ValueError):
        update_mse_weights(np.array([0.0]))


def test_mse_matches_definition():
    h, noise, weights, budgets = _random_instance(1)
    w = mrt_raw(h, budgets)
    u = update_receive_filters(h, w, noise)
    e = mse(h, w, u, noise)
    K = len(noise)
    for k in range(K):
        direct = np.conj(u[k]) * np.vdot(h[k, k], w[k])
        cross = sum(
            abs(np.conj(u[k]) * np.vdot(h[n, k], w[n])) ** 2 for n in range(K) if n != k
        )
        expected = abs(direct - 1.0) ** 2 + cross + abs(u[k]) ** 2 * noise[k]
        assert e[k] == pytest.approx(expected, rel=1e-12)


def test_update_beamformers_zero_filters():
    h, noise, weights, budgets = _random_instance(2)
    u = np.zeros(4, dtype=complex)
    v = np.ones(4)
    w, mu = update_beamformers(h, u, v, weights, budgets)
    np.testing.assert_array_equal(w, 0)
    np.testing.assert_array_equal(mu, 0)


def test_update_beamformers_single_user_binding_budget():
    h, noise, weights, budgets = _random_instance(3, K=1, M=4)
    w0 = mrt_raw(h, budgets)
    u = update_receive_filters(h, w0, noise)
    v = update_mse_weights(mse(h, w0, u, noise))
    w, mu = update_beamformers(h, u, v, weights, budgets)
    # the optimizer returns the aligned direction at exactly full power
    power = np.sum(np.abs(w) ** 2)
    assert power == pytest.approx(budgets[0], rel=1e-10)
    cosine = abs(np.vdot(w[0], h[0, 0])) / (np.linalg.norm(w[0]) * np.linalg.norm(h[0, 0]))
    assert cosine == pytest.approx(1.0, abs=1e-12)
    assert mu[0] > 0


@pytest.mark.parametrize("seed", range(5))
def test_update_beamformers_kkt(seed):
    h, noise, weights, budgets = _random_instance(seed)
    w0 = mrt_raw(h, budgets)
    u = update_receive_filters(h, w0, noise)
    v = update_mse_weights(mse(h, w0, u, noise))
    w, mu = update_beamformers(h, u, v, weights, budgets)
    K, M = w.shape
    coef = weights * v * np.abs(u) ** 2
    for k in range(K):
        quad = sum(coef[i] * np.outer(h[k, i], np.conj(h[k, i])) for i in range(K))
        rhs = weights[k] * v[k] * np.conj(u[k]) * h[k, k]
        residual = np.linalg.norm((quad + mu[k] * np.eye(M)) @ w[k] - rhs)
        assert residual < 1e-10
        power = np.sum(np.abs(w[k]) ** 2)
        assert power <= budgets[k] + 1e-9
        assert abs(mu[k] * (power - budgets[k])) < 1e-9
        if mu[k] > 0:
            assert power == pytest.approx(budgets[k], rel=1e-10)


def test_power_strictly_decreasing_in_mu():
    h, noise, weights, budgets = _random_instance(7)
    w0 = mrt_raw(h, budgets)
    u = update_receive_filters(h, w0, noise)
    v = update_mse_weights(mse(h, w0, u, noise))
    coef = weights * v * np.abs(u) ** 2
    quad = sum(coef[i] * np.outer(h[0, i], np.conj(h[0, i])) for i in range(len(noise)))
    rhs = weights[0] * v[0] * np.conj(u[0]) * h[0, 0]
    mus = np.logspace(-6, 4, 30)
    powers = [
        np.sum(np.abs(np.linalg.solve(quad + m * np.eye(len(rhs)), rhs)) ** 2) for m in mus
    ]
    assert np.all(np.diff(powers) < 0)


def test_solve_single_user_capacity():
    h, noise, weights, budgets = _random_instance(4, K=1, M=4)
    state = solve(h, noise, weights, budgets)
    capacity = np.log2(1 + budgets[0] * np.linalg.norm(h[0, 0]) ** 2 / noise[0])
    assert state.wsr == pytest.approx(capacity, abs=1e-8)


def test_solve_monotone_and_feasible():
    for seed in range(5):
        h, noise, weights, budgets = _random_instance(seed)
        state = solve(h, noise, weights, budgets)
        trace = state.objective_trace
        assert all(b >= a - 1e-9 for a, b in zip(trace, trace[1:]))
        assert state.beamformers.is_feasible(1e-9)
        assert state.wsr > 0
        # full-power alignment is a feasible competitor
        _, _, _, wsr_mrt = rates_raw(h, mrt_raw(h, budgets), noise, weights)
        assert state.wsr >= wsr_mrt - 1e-9


def test_solve_batch_matches_single():
    h0, noise, weights, budgets = _random_instance(8)
    h1, _, _, _ = _random_instance(9)
    batch = np.stack([h0, h1])
    w, wsr, sweeps, _ = solve_batch(batch, noise, weights, budgets)
    for i, h in enumerate((h0, h1)):
        state = solve(h, noise, weights, budgets)
        assert wsr[i] == pytest.approx(state.wsr, rel=1e-9)


def test_solve_respects_max_sweeps():
    h, noise, weights, budgets = _random_instance(10)
    state = solve(h, noise, weights, budgets, WmmseParams(tol=0.0, max_sweeps=7))
    assert len(state.objective_trace) == 8
