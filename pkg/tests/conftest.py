import numpy as np
import pytest

from rabeam.channel import OrientationSet
from rabeam.scene import SceneConfig, Topology, element_positions, generate_topology


def random_feasible_orientations(config, rng, margin=0.05):
    """Feasible orientation set bounded away from the cap rim and pole."""
    theta = rng.uniform(margin, max(config.theta_max - margin, margin), (config.K, config.M))
    phi = rng.uniform(-np.pi, np.pi - 1e-9, (config.K, config.M))
    return OrientationSet.from_angles(theta, phi)


def random_beamformers(config, rng):
    """Random complex beamformers scaled to the full budget."""
    shape = (config.K, config.M)
    w = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    w *= np.sqrt(config.budgets_mw())[:, None] / np.linalg.norm(w, axis=1, keepdims=True)
    return w


def single_link_scene(p=4, user=(30.0, 10.0, 90.0), theta_max=np.pi / 3):
    """Deterministic K=1, M=1, LoS-only scene with the user inside the cap."""
    config = SceneConfig(K=1, Q=0, Mx=1, My=1, p=p, theta_max=theta_max, seed=0)
    tx = np.array([[0.0, 0.0, 0.0]])
    topo = Topology(
        tx_centers=tx,
        element_positions=element_positions(config, tx),
        users=np.array([user], dtype=float),
        clusters=np.zeros((0, 3)),
        rcs=np.zeros(0),
        phases=np.zeros(0),
    )
    return config, topo


@pytest.fixture
def default_scene():
    config = SceneConfig(seed=3)
    return config, generate_topology(config)
