"""Physical constants and seeded 3D topology generation.

A scene is a K-pair interference network: K transmitters, each an Mx-by-My
uniform planar array (UPA) lying parallel to the global x-y plane, K
single-antenna users, and Q scatterer clusters. Pairs and elements are
1-based in documentation and 0-based in code; element m (0-based) of a UPA
sits at column ``m % Mx`` and row ``m // Mx`` of the grid.

Unit conventions: distances in meters, angles in radians, powers in linear
milliwatts. dBm inputs are converted once at ingestion via
:func:`dbm_to_linear` so SINR ratios are unit-consistent.

Randomness: topologies are drawn from ``numpy.random.default_rng`` (PCG64)
with an explicit 64-bit seed; Monte-Carlo trials use ``seed + trial`` as
their substream. The same seed always yields a bit-identical topology.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Sequence, Union

import numpy as np

__all__ = [
    "SceneConfig",
    "Topology",
    "dbm_to_linear",
    "element_positions",
    "generate_topology",
]

PerUser = Union[float, Sequence[float]]


def dbm_to_linear(value_dbm):
    """Convert a power in dBm to linear milliwatts: 10^(value/10)."""
    return 10.0 ** (np.asarray(value_dbm, dtype=float) / 10.0)


def _per_user(value: PerUser, count: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return np.full(count, float(arr[0]))
    if arr.size != count:
        raise ValueError(f"{name} must be scalar or length {count}, got {arr.size}")
    return arr.copy()


@dataclass
class SceneConfig:
    """All physical constants of a scene.

    Defaults follow the desk-scale simulation setup: 4 pairs, 6 clusters,
    0.125 m wavelength, 2x2 UPAs with 2-wavelength spacing, -80 dBm noise,
    pi/3 maximum zenith angle, unit user weights.

    Attributes
    ----------
    K : int
        Number of transmitter-user pairs (>= 1).
    Q : int
        Number of scatterer clusters (>= 0).
    wavelength : float
        Carrier wavelength in meters.
    d : float
        Inter-element spacing in meters.
    Mx, My : int
        UPA dimensions; M = Mx * My elements per transmitter.
    p : int
        Element directivity factor (>= 0); p = 0 is the isotropic baseline.
    theta_max : float
        Maximum zenith angle of the orientation cap, in [0, pi/2].
    noise_dbm : float or sequence
        Per-user noise power in dBm (scalar broadcasts to all users).
    p_max_dbm : float or sequence
        Per-transmitter power budget in dBm.
    alpha : float or sequence
        Nonnegative per-user rate weights.
    eta_q : float
        Average scattering power per cluster; used directly as the radar
        cross section sigma_q of every cluster.
    seed : int
        64-bit RNG seed for topology generation.
    """

    K: int = 4
    Q: int = 6
    wavelength: float = 0.125
    d: float = 0.25
    Mx: int = 2
    My: int = 2
    p: int = 4
    theta_max: float = np.pi / 3
    noise_dbm: PerUser = -80.0
    p_max_dbm: PerUser = 0.0
    alpha: PerUser = 1.0
    eta_q: float = 0.5
    seed: int = 0

    @property
    def M(self) -> int:
        return self.Mx * self.My

    def noise_mw(self) -> np.ndarray:
        """Per-user noise powers in linear mW, shape (K,)."""
        return dbm_to_linear(_per_user(self.noise_dbm, self.K, "noise_dbm"))

    def budgets_mw(self) -> np.ndarray:
        """Per-transmitter power budgets in linear mW, shape (K,)."""
        return dbm_to_linear(_per_user(self.p_max_dbm, self.K, "p_max_dbm"))

    def weights(self) -> np.ndarray:
        """Per-user rate weights, shape (K,)."""
        return _per_user(self.alpha, self.K, "alpha")

    def validate(self) -> None:
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.Q < 0:
            raise ValueError("Q must be >= 0")
        if self.Mx < 1 or self.My < 1:
            raise ValueError("Mx and My must be >= 1")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.d <= 0:
            raise ValueError("d must be positive")
        if self.p < 0:
            raise ValueError("p must be >= 0")
        if not 0.0 <= self.theta_max <= np.pi / 2:
            raise ValueError("theta_max must lie in [0, pi/2]")
        if np.any(self.weights() < 0):
            raise ValueError("alpha weights must be nonnegative")
        self.noise_mw()
        self.budgets_mw()

    def with_overrides(self, **kwargs) -> "SceneConfig":
        return replace(self, **kwargs)


@dataclass
class Topology:
    """One realized 3D placement of a scene, all coordinates in meters.

    ``element_positions`` satisfies the UPA layout exactly; cluster phases
    lie in [0, 2*pi).
    """

    tx_centers: np.ndarray  # (K, 3)
    element_positions: np.ndarray  # (K, M, 3)
    users: np.ndarray  # (K, 3)
    clusters: np.ndarray  # (Q, 3)
    rcs: np.ndarray  # (Q,)
    phases: np.ndarray  # (Q,)

    def to_json(self) -> str:
        payload = {
            "tx_centers": self.tx_centers.tolist(),
            "element_positions": self.element_positions.tolist(),
            "users": self.users.tolist(),
            "clusters": self.clusters.tolist(),
            "rcs": self.rcs.tolist(),
            "phases": self.phases.tolist(),
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        data = json.loads(text)
        q = len(data["rcs"])
        return cls(
            tx_centers=np.asarray(data["tx_centers"], dtype=float),
            element_positions=np.asarray(data["element_positions"], dtype=float),
            users=np.asarray(data["users"], dtype=float),
            clusters=np.asarray(data["clusters"], dtype=float).reshape(q, 3),
            rcs=np.asarray(data["rcs"], dtype=float),
            phases=np.asarray(data["phases"], dtype=float),
        )


def element_positions(config: SceneConfig, tx_centers: np.ndarray) -> np.ndarray:
    """Global element coordinates for each UPA, shape (K, M, 3).

    Element m (0-based) is offset from the array center by
    ``d * [m % Mx - (Mx-1)/2, m // Mx - (My-1)/2, 0]``, so the array lies in
    a plane parallel to the global x-y plane and the offsets sum to zero.
    """
    tx_centers = np.asarray(tx_centers, dtype=float)
    m = np.arange(config.M)
    offsets = np.stack(
        [
            m % config.Mx - (config.Mx - 1) / 2.0,
            m // config.Mx - (config.My - 1) / 2.0,
            np.zeros_like(m, dtype=float),
        ],
        axis=-1,
    )
    return tx_centers[:, None, :] + config.d * offsets[None, :, :]


def generate_topology(config: SceneConfig) -> Topology:
    """Draw a random topology; a pure function of (config, seed).

    Transmitter centers sit at [x, 20, 0] with x ~ U[0, 80]; users at
    [x, 2, z] with x ~ U[0, 100], z ~ U[80, 100]; clusters at [x, 6, z]
    with x ~ U[0, 100], z ~ U[20, 40]. Cluster phases are U[0, 2*pi) and
    every cluster RCS equals eta_q.

    Draw order (fixed for reproducibility): transmitter x, user x, user z,
    cluster x, cluster z, cluster phases.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    k, q = config.K, config.Q

    tx = np.zeros((k, 3))
    tx[:, 0] = rng.uniform(0.0, 80.0, size=k)
    tx[:, 1] = 20.0

    users = np.zeros((k, 3))
    users[:, 0] = rng.uniform(0.0, 100.0, size=k)
    users[:, 1] = 2.0
    users[:, 2] = rng.uniform(80.0, 100.0, size=k)

    clusters = np.zeros((q, 3))
    clusters[:, 0] = rng.uniform(0.0, 100.0, size=q)
    clusters[:, 1] = 6.0
    clusters[:, 2] = rng.uniform(20.0, 40.0, size=q)

    phases = rng.uniform(0.0, 2.0 * np.pi, size=q)
    rcs = np.full(q, float(config.eta_q))

    return Topology(
        tx_centers=tx,
        element_positions=element_positions(config, tx),
        users=users,
        clusters=clusters,
        rcs=rcs,
        phases=phases,
    )
