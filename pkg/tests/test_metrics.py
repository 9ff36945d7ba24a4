import numpy as np
import pytest

from rabeam.channel import ChannelGeometry, channel
from rabeam.metrics import (
    BeamformerSet,
    rates,
    rates_raw,
    wsr_gradient_raw,
    wsr_orientation_gradient,
)
from rabeam.orient_fw import tangent_basis, tangent_project

from conftest import random_beamformers, random_feasible_orientations


def _report(h, w, noise, weights):
    from rabeam.channel import ChannelTensor

    return rates(
        ChannelTensor(h=np.asarray(h, dtype=complex)),
        BeamformerSet(w=np.asarray(w, dtype=complex), budgets=np.ones(len(w))),
        noise,
        weights,
    )


def test_zero_beamformers_zero_rates():
    h = np.ones((3, 3, 2), dtype=complex)
    rep = _report(h, np.zeros((3, 2)), np.full(3, 1e-8), np.ones(3))
    assert np.all(rep.rate == 0) and rep.wsr == 0


def test_single_user_formula():
    h = np.array([[[0.3 + 0.4j, -0.2j]]])
    w = np.array([[0.5 - 0.1j, 0.8j]])
    noise = np.array([1e-6])
    rep = _report(h, w, noise, np.ones(1))
    gain = abs(np.vdot(h[0, 0], w[0])) ** 2
    assert rep.wsr == pytest.approx(np.log2(1 + gain / noise[0]), rel=1e-14)


def test_two_user_scalar_example():
    # one-element channels: desired gain 1, cross gain 0.5, full power P
    P, d2 = 2.0, 0.1
    h = np.array([[[1.0], [0.5]], [[0.5], [1.0]]], dtype=complex)
    w = np.full((2, 1), np.sqrt(P), dtype=complex)
    rep = _report(h, w, np.full(2, d2), np.ones(2))
    expected = np.log2(1 + P / (0.25 * P + d2))
    np.testing.assert_allclose(rep.rate, expected, rtol=1e-14)
    assert rep.wsr == pytest.approx(2 * expected, rel=1e-14)
    np.testing.assert_allclose(rep.signal, P, rtol=1e-14)
    np.testing.assert_allclose(rep.interference_plus_noise, 0.25 * P + d2, rtol=1e-14)


def test_weight_linearity():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(3, 3, 2)) + 1j * rng.normal(size=(3, 3, 2))
    w = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    noise = np.full(3, 0.01)
    alpha = np.array([0.2, 1.0, 3.0])
    rep = _report(h, w, noise, alpha)
    assert rep.wsr == pytest.approx(float(alpha @ rep.rate), rel=1e-14)


def test_monotone_in_power_single_user():
    h = np.array([[[0.3 + 0.4j, -0.2j]]])
    noise = np.array([1e-4])
    w = np.array([[0.1 + 0.2j, 0.05]])
    r1 = _report(h, w, noise, np.ones(1)).wsr
    r2 = _report(h, 1.5 * w, noise, np.ones(1)).wsr
    assert r2 > r1


def test_dimension_mismatch_rejected():
    h = np.ones((2, 2, 3), dtype=complex)
    with pytest.raises(ValueError):
        _report(h, np.zeros((3, 3)), np.full(2, 1e-8), np.ones(2))
    with pytest.raises(ValueError):
        _report(h, np.zeros((2, 3)), np.full(3, 1e-8), np.ones(2))


def test_gradient_zero_where_beamformer_zero(default_scene):
    config, topo = default_scene
    rng = np.random.default_rng(4)
    fset = random_feasible_orientations(config, rng)
    w = random_beamformers(config, rng)
    w[1, 2] = 0.0
    ct = channel(topo, fset, config, with_gradient=True)
    g = wsr_orientation_gradient(
        ct, BeamformerSet(w, config.budgets_mw()), config.noise_mw(), config.weights()
    )
    np.testing.assert_array_equal(g[1, 2], 0.0)


def test_gradient_single_user_desired_term_only():
    from conftest import single_link_scene

    config, topo = single_link_scene(p=4)
    fset = random_feasible_orientations(config, np.random.default_rng(1))
    ct = channel(topo, fset, config, with_gradient=True)
    w = random_beamformers(config, np.random.default_rng(2))
    noise, weights = config.noise_mw(), config.weights()
    g = wsr_orientation_gradient(ct, BeamformerSet(w, config.budgets_mw()), noise, weights)

    # independent evaluation of the desired-signal term
    gain = np.vdot(ct.h[0, 0], w[0])
    signal = abs(gain) ** 2
    total = signal + noise[0]
    expected = (
        (2 / np.log(2))
        * np.real(np.conj(w[0, 0]) * (weights[0] * gain / total) * ct.grad_h[0, 0, 0])
    )
    np.testing.assert_allclose(g[0, 0], expected, rtol=1e-12)


def test_gradient_matches_directional_finite_differences(default_scene):
    config, topo = default_scene
    geom = ChannelGeometry(config, topo)
    noise, weights = config.noise_mw(), config.weights()
    step = 1e-6
    for seed in range(3):
        rng = np.random.default_rng(seed)
        f = random_feasible_orientations(config, rng).f
        w = random_beamformers(config, rng)
        h, grad_h = geom.channel_with_gradient(f)
        g = wsr_gradient_raw(h, grad_h, w, noise, weights)
        tg = tangent_project(f, g)
        t1, t2 = tangent_basis(f)
        fd = np.zeros_like(f)
        for tb in (t1, t2):
            for k in range(config.K):
                for m in range(config.M):
                    fp, fm = f.copy(), f.copy()
                    vp, vm = f[k, m] + step * tb[k, m], f[k, m] - step * tb[k, m]
                    fp[k, m] = vp / np.linalg.norm(vp)
                    fm[k, m] = vm / np.linalg.norm(vm)
                    dval = (
                        rates_raw(geom.channel(fp), w, noise, weights)[3]
                        - rates_raw(geom.channel(fm), w, noise, weights)[3]
                    ) / (2 * step)
                    fd[k, m] += dval * tb[k, m]
        assert np.linalg.norm(fd - tg) / np.linalg.norm(tg) < 1e-5
