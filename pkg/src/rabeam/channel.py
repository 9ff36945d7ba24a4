"""Orientation-dependent directional channels and their analytic gradients.

Every transmit element is a directional radiator with a steerable boresight
f (unit 3-vector). Its power gain toward a direction at angular offset eps
from the boresight is ``2*(2p+1) * cos(eps)^(2p)`` on the front hemisphere
and zero behind; the normalization makes the pattern integrate to 4*pi over
the full sphere for every p.

The channel from element m of transmitter k to user n superimposes a direct
component (Friis gain times the clipped pattern, with the exact per-element
propagation phase) and a two-hop scattered component through each cluster q
(pattern-weighted first hop, bi-static re-radiation sqrt(sigma_q/(4*pi))/r
second hop, plus the cluster's random phase). ``h[k, n]`` depends only on
transmitter k's orientations.

Clipping convention: ``[x]_+^e`` is defined as 0 whenever x <= 0, including
e = 0. The gradient therefore has a zero (Clarke) subgradient at the
visibility boundary, and the p = 0 isotropic pattern has an identically
zero orientation gradient.

All geometry that does not depend on orientations (distances, propagation
phases, unit direction vectors) is precomputed once per topology in
:class:`ChannelGeometry`; orientation-dependent evaluation is then a handful
of einsums and supports arbitrary leading batch dimensions on the
orientation array.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .scene import SceneConfig, Topology

__all__ = [
    "OrientationSet",
    "ChannelTensor",
    "ChannelGeometry",
    "boresight_from_angles",
    "element_gain",
    "los_channel",
    "nlos_channel",
    "channel",
    "channel_gradient",
]

UNIT_TOL = 1e-12
CAP_TOL = 1e-12


def boresight_from_angles(theta, phi) -> np.ndarray:
    """Map zenith/azimuth angles to the boresight unit vector.

    Returns ``[sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)]``.
    theta must lie in [0, pi/2] and phi in [-pi, pi); out-of-range angles
    are rejected. Accepts arrays (broadcast elementwise, vectors stacked on
    the last axis).
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(theta < -1e-12) or np.any(theta > np.pi / 2 + 1e-12):
        raise ValueError("zenith angle must lie in [0, pi/2]")
    if np.any(phi < -np.pi - 1e-12) or np.any(phi >= np.pi):
        raise ValueError("azimuth angle must lie in [-pi, pi)")
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def clipped_power(x, exponent: int) -> np.ndarray:
    """[x]_+^exponent with 0^0 := 0, i.e. zero whenever x <= 0."""
    x = np.asarray(x, dtype=float)
    if exponent == 0:
        return np.where(x > 0.0, 1.0, 0.0)
    if exponent == 1:
        return np.maximum(x, 0.0)
    return np.maximum(x, 0.0) ** exponent


def element_gain(cos_eps, p: int) -> np.ndarray:
    """Directional power gain 2*(2p+1) * [cos_eps]_+^(2p).

    cos_eps is the cosine of the offset between the boresight and the
    signal direction; the gain is zero behind the element plane. The peak
    gain 2*(2p+1) follows from normalizing the pattern integral to 4*pi.
    """
    cos_eps = np.asarray(cos_eps, dtype=float)
    if np.any(cos_eps < -1.0 - 1e-9) or np.any(cos_eps > 1.0 + 1e-9):
        raise ValueError("cos_eps must lie in [-1, 1]")
    return 2.0 * (2 * p + 1) * clipped_power(cos_eps, 2 * p)


def _normalize_rows(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@dataclass
class OrientationSet:
    """Boresight unit vectors for all elements, shape (K, M, 3).

    Feasible sets satisfy ||f|| = 1 and f . e_z >= cos(theta_max) per
    element; unit norm is checked at construction, the cap constraint via
    :meth:`assert_feasible` (optimizer iterates may probe slightly outside
    during finite-difference evaluation).
    """

    f: np.ndarray

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        if self.f.ndim != 3 or self.f.shape[-1] != 3:
            raise ValueError("orientations must have shape (K, M, 3)")
        norms = np.linalg.norm(self.f, axis=-1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise ValueError("boresight vectors must be unit-norm")

    @classmethod
    def plus_z(cls, K: int, M: int) -> "OrientationSet":
        f = np.zeros((K, M, 3))
        f[..., 2] = 1.0
        return cls(f)

    @classmethod
    def from_angles(cls, theta, phi) -> "OrientationSet":
        return cls(boresight_from_angles(theta, phi))

    def is_feasible(self, theta_max: float, tol: float = CAP_TOL) -> bool:
        within_cap = np.all(self.f[..., 2] >= np.cos(theta_max) - tol)
        unit = np.all(np.abs(np.linalg.norm(self.f, axis=-1) - 1.0) <= tol)
        return bool(within_cap and unit)

    def assert_feasible(self, theta_max: float, tol: float = CAP_TOL) -> None:
        if not self.is_feasible(theta_max, tol):
            raise ValueError("orientation set violates the spherical-cap constraint")

    def copy(self) -> "OrientationSet":
        return OrientationSet(self.f.copy())


@dataclass
class ChannelTensor:
    """Channels for all transmitter-user pairs.

    h[k, n] is the length-M complex channel from transmitter k to user n;
    it depends only on transmitter k's orientations. grad_h, when present,
    holds the per-element orientation gradients: grad_h[k, m, n] is the
    complex 3-vector derivative of entry m of h[k, n] with respect to the
    boresight of element (k, m).
    """

    h: np.ndarray  # (K, K, M) complex
    grad_h: Optional[np.ndarray] = None  # (K, M, K, 3) complex

    def to_json(self) -> str:
        """Debug dump; complex entries become [real, imag] pairs."""
        payload = {"h": np.stack([self.h.real, self.h.imag], axis=-1).tolist()}
        if self.grad_h is not None:
            payload["grad_h"] = np.stack(
                [self.grad_h.real, self.grad_h.imag], axis=-1
            ).tolist()
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ChannelTensor":
        data = json.loads(text)
        h_pairs = np.asarray(data["h"], dtype=float)
        h = h_pairs[..., 0] + 1j * h_pairs[..., 1]
        grad = None
        if "grad_h" in data:
            g = np.asarray(data["grad_h"], dtype=float)
            grad = g[..., 0] + 1j * g[..., 1]
        return cls(h=h, grad_h=grad)


class ChannelGeometry:
    """Orientation-independent channel factors, precomputed per topology.

    Evaluation accepts a raw orientation array of shape (..., K, M, 3)
    where leading dimensions batch independent orientation sets.
    """

    def __init__(self, config: SceneConfig, topology: Topology):
        config.validate()
        self.config = config
        self.p = config.p
        lam = config.wavelength
        beta0 = (lam / (4.0 * np.pi)) ** 2
        c0 = np.sqrt(beta0 * 2.0 * (2 * config.p + 1))
        wavenum = 2.0 * np.pi / lam

        elems = topology.element_positions  # (K, M, 3)
        users = topology.users  # (K, 3)

        diff = users[None, None, :, :] - elems[:, :, None, :]  # (K, M, N, 3)
        r = np.linalg.norm(diff, axis=-1)
        if np.any(r <= 0.0):
            raise ValueError("coincident element and user positions")
        self.user_dirs = diff / r[..., None]  # (K, M, N, 3)
        self.los_coef = (c0 / r) * np.exp(-1j * wavenum * r)  # (K, M, N)

        q = topology.clusters.shape[0]
        if q > 0:
            cdiff = topology.clusters[None, None, :, :] - elems[:, :, None, :]
            r1 = np.linalg.norm(cdiff, axis=-1)  # (K, M, Q)
            r2 = np.linalg.norm(
                topology.clusters[:, None, :] - users[None, :, :], axis=-1
            )  # (Q, N)
            if np.any(r1 <= 0.0) or np.any(r2 <= 0.0):
                raise ValueError("coincident scatterer position")
            self.cluster_dirs = cdiff / r1[..., None]  # (K, M, Q, 3)
            self.hop1 = (c0 / r1) * np.exp(
                -1j * wavenum * r1 + 1j * topology.phases[None, None, :]
            )  # (K, M, Q)
            self.hop2 = (
                np.sqrt(topology.rcs / (4.0 * np.pi))[:, None] / r2
            ) * np.exp(-1j * wavenum * r2)  # (Q, N)
        else:
            self.cluster_dirs = np.zeros(elems.shape[:2] + (0, 3))
            self.hop1 = np.zeros(elems.shape[:2] + (0,), dtype=complex)
            self.hop2 = np.zeros((0, users.shape[0]), dtype=complex)

    def los(self, f: np.ndarray) -> np.ndarray:
        """Direct component, shape (..., K, M, N) indexed (tx, element, user)."""
        cos_los = np.einsum("...kmd,kmnd->...kmn", f, self.user_dirs)
        return self.los_coef * clipped_power(cos_los, self.p)

    def nlos(self, f: np.ndarray) -> np.ndarray:
        """Scattered component, shape (..., K, M, N)."""
        cos_cl = np.einsum("...kmd,kmqd->...kmq", f, self.cluster_dirs)
        first_hop = self.hop1 * clipped_power(cos_cl, self.p)
        return np.einsum("...kmq,qn->...kmn", first_hop, self.hop2)

    def channel(self, f: np.ndarray) -> np.ndarray:
        """Total channel tensor, shape (..., K, N, M) with h[k, n] in C^M."""
        h_kmn = self.los(f) + self.nlos(f)
        return np.swapaxes(h_kmn, -1, -2)

    def channel_gradient(self, f: np.ndarray) -> np.ndarray:
        """Per-element boresight gradients, shape (..., K, M, N, 3).

        Entry (k, m, n) differentiates h[k, n][m] with respect to f[k, m];
        identically zero for p = 0 (the pattern is orientation-independent
        away from the measure-zero hemisphere boundary).
        """
        if self.p == 0:
            out_shape = f.shape[:-3] + self.user_dirs.shape[:3] + (3,)
            return np.zeros(out_shape, dtype=complex)
        cos_los = np.einsum("...kmd,kmnd->...kmn", f, self.user_dirs)
        grad = (
            self.los_coef * self.p * clipped_power(cos_los, self.p - 1)
        )[..., None] * self.user_dirs
        if self.hop1.shape[-1] > 0:
            cos_cl = np.einsum("...kmd,kmqd->...kmq", f, self.cluster_dirs)
            first = (self.hop1 * self.p * clipped_power(cos_cl, self.p - 1))[
                ..., None
            ] * self.cluster_dirs
            grad = grad + np.einsum("...kmqd,qn->...kmnd", first, self.hop2)
        return grad

    def channel_with_gradient(self, f: np.ndarray):
        return self.channel(f), self.channel_gradient(f)


def los_channel(
    topology: Topology, orientations: OrientationSet, config: SceneConfig
) -> np.ndarray:
    """Direct channel component only, shape (K, K, M) indexed (tx, user)."""
    geom = ChannelGeometry(config, topology)
    return np.swapaxes(geom.los(orientations.f), -1, -2)


def nlos_channel(
    topology: Topology, orientations: OrientationSet, config: SceneConfig
) -> np.ndarray:
    """Scattered channel component only, shape (K, K, M) indexed (tx, user)."""
    geom = ChannelGeometry(config, topology)
    return np.swapaxes(geom.nlos(orientations.f), -1, -2)


def channel(
    topology: Topology,
    orientations: OrientationSet,
    config: SceneConfig,
    with_gradient: bool = False,
) -> ChannelTensor:
    """Total channel (direct + scattered), optionally with gradients."""
    geom = ChannelGeometry(config, topology)
    h = geom.channel(orientations.f)
    grad = geom.channel_gradient(orientations.f) if with_gradient else None
    return ChannelTensor(h=h, grad_h=grad)


def channel_gradient(
    topology: Topology, orientations: OrientationSet, config: SceneConfig
) -> np.ndarray:
    """Boresight gradients of the channel, shape (K, M, K, 3).

    grad[k, m, n] is the derivative of h[k, n][m] with respect to f[k, m].
    """
    geom = ChannelGeometry(config, topology)
    return geom.channel_gradient(orientations.f)
