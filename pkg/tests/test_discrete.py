import numpy as np
import pytest

from rabeam.channel import ChannelGeometry, OrientationSet, boresight_from_angles
from rabeam.discrete import (
    CemParams,
    Codebook,
    brute_force,
    cem_solve,
    codebook_csv,
    fibonacci_codebook,
    nearest_projection,
    uniform_grid_codebook,
)
from rabeam.scene import SceneConfig, generate_topology

from conftest import random_feasible_orientations, single_link_scene


def test_uniform_grid_pole_degeneracy():
    book = uniform_grid_codebook(1, 7, np.pi / 3)
    assert len(book) == 1
    np.testing.assert_array_equal(book.directions[0], [0.0, 0.0, 1.0])


def test_uniform_grid_counts_and_feasibility():
    book = uniform_grid_codebook(2, 4, np.pi / 3)
    assert len(book) == 5  # pole + one full azimuth ring
    assert np.all(book.directions[:, 2] >= np.cos(np.pi / 3) - 1e-12)
    book2 = uniform_grid_codebook(5, 5, np.pi / 3)
    assert len(book2) == 1 + 4 * 5


def test_fibonacci_single_direction():
    book = fibonacci_codebook(1, np.pi / 3)
    # frozen: theta_0 = arccos(1 - 0.5 * 0.5) = arccos(0.75), phi_0 = 0
    assert len(book) == 1
    np.testing.assert_allclose(
        book.directions[0],
        boresight_from_angles(0.7227342478134156, 0.0),
        atol=1e-15,
    )
    np.testing.assert_allclose(
        book.directions[0], [0.6614378277661477, 0.0, 0.75], atol=1e-12
    )


def test_fibonacci_inside_cap_strictly():
    theta_max = np.pi / 3
    book = fibonacci_codebook(64, theta_max)
    zenith = np.arccos(book.directions[:, 2])
    assert np.all(zenith < theta_max)
    assert np.all(zenith >= 0)


def test_fibonacci_equal_area_z_levels():
    book = fibonacci_codebook(32, np.pi / 4)
    z = book.directions[:, 2]
    np.testing.assert_allclose(np.diff(z), np.diff(z)[0], rtol=1e-9)


def _nn_angle_cv(directions):
    cosines = np.clip(directions @ directions.T, -1.0, 1.0)
    np.fill_diagonal(cosines, -1.0)
    nn = np.arccos(np.max(cosines, axis=1))
    return np.std(nn) / np.mean(nn)


def test_fibonacci_more_uniform_than_grid():
    theta_max = np.pi / 3
    fib = fibonacci_codebook(100, theta_max)
    grid = uniform_grid_codebook(10, 10, theta_max)
    assert _nn_angle_cv(fib.directions) < _nn_angle_cv(grid.directions)


def test_codebook_rejects_duplicates_and_outsiders():
    with pytest.raises(ValueError):
        Codebook(
            directions=np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]),
            kind="uniform-grid",
            theta_max=np.pi / 3,
        )
    with pytest.raises(ValueError):
        Codebook(
            directions=np.array([[1.0, 0.0, 0.0]]), kind="fibonacci", theta_max=np.pi / 6
        )


def test_nearest_projection():
    book = fibonacci_codebook(16, np.pi / 3)
    exact = OrientationSet(book.directions[[3, 7, 11, 1]].reshape(2, 2, 3))
    np.testing.assert_array_equal(nearest_projection(exact, book).f, exact.f)

    pole_only = Codebook(
        directions=np.array([[0.0, 0.0, 1.0]]), kind="uniform-grid", theta_max=0.0
    )
    config = SceneConfig()
    fset = random_feasible_orientations(config, np.random.default_rng(0))
    projected = nearest_projection(fset, pole_only)
    assert np.all(projected.f[..., 2] == 1.0)


def test_nearest_projection_matches_exhaustive_scan():
    book = fibonacci_codebook(25, np.pi / 3)
    config = SceneConfig()
    fset = random_feasible_orientations(config, np.random.default_rng(1))
    projected = nearest_projection(fset, book)
    for k in range(config.K):
        for m in range(config.M):
            best = max(
                range(len(book)),
                key=lambda i: float(fset.f[k, m] @ book.directions[i]),
            )
            np.testing.assert_array_equal(projected.f[k, m], book.directions[best])


def test_codebook_csv():
    text = codebook_csv(fibonacci_codebook(4, np.pi / 3))
    lines = text.strip().split("\n")
    assert lines[0] == "index,theta,phi,x,y,z"
    assert len(lines) == 5


def _tiny_instance(seed):
    config = SceneConfig(K=2, Q=2, Mx=1, My=1, seed=seed)
    return config, generate_topology(config)


def test_cem_singleton_codebook():
    config, topo = _tiny_instance(0)
    book = Codebook(
        directions=np.array([[0.0, 0.0, 1.0]]), kind="uniform-grid", theta_max=config.theta_max
    )
    result = cem_solve(config, topo, book, CemParams(samples=4, max_iter=1))
    np.testing.assert_array_equal(result.orientations.f[..., 2], 1.0)
    assert result.wsr > 0


def test_cem_rejects_bad_params():
    config, topo = _tiny_instance(1)
    book = fibonacci_codebook(4, config.theta_max)
    with pytest.raises(ValueError):
        cem_solve(config, topo, book, CemParams(samples=0))
    with pytest.raises(ValueError):
        cem_solve(config, topo, book, CemParams(samples=10, elite_frac=0.0))


def test_cem_pmfs_stay_distributions():
    config, topo = _tiny_instance(2)
    book = fibonacci_codebook(4, config.theta_max)
    result = cem_solve(config, topo, book, CemParams(samples=16, max_iter=5, seed=2))
    assert np.all(result.pmfs >= 0)
    np.testing.assert_allclose(result.pmfs.sum(axis=1), 1.0, atol=1e-12)


def test_cem_trace_monotone_and_final_at_least_initial():
    config, topo = _tiny_instance(3)
    book = fibonacci_codebook(4, config.theta_max)
    result = cem_solve(config, topo, book, CemParams(seed=3))
    trace = result.best_trace
    assert all(b >= a for a, b in zip(trace, trace[1:]))
    assert result.wsr >= trace[0] - 1e-9


def test_brute_force_singleton():
    config, topo = _tiny_instance(4)
    book = Codebook(
        directions=np.array([[0.0, 0.0, 1.0]]), kind="uniform-grid", theta_max=config.theta_max
    )
    fset, wsr = brute_force(config, topo, book)
    np.testing.assert_array_equal(fset.f[..., 2], 1.0)
    assert wsr > 0


def test_brute_force_single_link_picks_max_cosine():
    config, topo = single_link_scene(p=4, user=(20.0, 5.0, 90.0))
    book = fibonacci_codebook(9, config.theta_max)
    fset, _ = brute_force(config, topo, book)
    direction = topo.users[0] - topo.element_positions[0, 0]
    direction /= np.linalg.norm(direction)
    best = int(np.argmax(book.directions @ direction))
    np.testing.assert_array_equal(fset.f[0, 0], book.directions[best])


def test_brute_force_guard():
    config, topo = _tiny_instance(5)
    config = config.with_overrides(Mx=4, My=4)  # 4^32 assignments
    topo = generate_topology(config)
    book = fibonacci_codebook(4, config.theta_max)
    with pytest.raises(ValueError):
        brute_force(config, topo, book)


def test_cem_bounded_by_brute_force():
    for seed in range(3):
        config, topo = _tiny_instance(seed)
        book = fibonacci_codebook(4, config.theta_max)
        _, best = brute_force(config, topo, book)
        result = cem_solve(config, topo, book, CemParams(seed=seed))
        assert result.wsr <= best + 1e-9
