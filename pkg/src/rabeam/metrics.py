"""SINR, per-user rates, weighted sum-rate, and its orientation gradient.

Rates are in bps/Hz (base-2 logs). The raw ``*_raw`` entry points operate
on bare arrays with arbitrary leading batch dimensions and are the hot path
shared by the solvers; the dataclass wrappers are the public surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelTensor

__all__ = [
    "BeamformerSet",
    "RateReport",
    "rates",
    "rates_raw",
    "wsr_orientation_gradient",
]

LN2 = np.log(2.0)
BUDGET_TOL_MW = 1e-9


@dataclass
class BeamformerSet:
    """Per-transmitter beamformers w[k] in C^M under power budgets in mW."""

    w: np.ndarray  # (K, M) complex
    budgets: np.ndarray  # (K,) mW

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=complex)
        self.budgets = np.asarray(self.budgets, dtype=float)
        if self.w.ndim != 2 or self.budgets.shape != (self.w.shape[0],):
            raise ValueError("beamformers must be (K, M) with K budgets")

    def powers(self) -> np.ndarray:
        return np.sum(np.abs(self.w) ** 2, axis=-1)

    def is_feasible(self, tol: float = BUDGET_TOL_MW) -> bool:
        return bool(np.all(self.powers() <= self.budgets + tol))


@dataclass
class RateReport:
    """Per-user link quality and the weighted sum-rate.

    signal[k] = |h_kk^H w_k|^2, interference_plus_noise[k] adds every
    cross-link power |h_nk^H w_n|^2 (n != k) to the noise power, and
    rate[k] = log2(1 + signal/interference_plus_noise).
    """

    signal: np.ndarray
    interference_plus_noise: np.ndarray
    rate: np.ndarray
    wsr: float


def rates_raw(h: np.ndarray, w: np.ndarray, noise: np.ndarray, weights: np.ndarray):
    """Rate computation on raw arrays.

    h: (..., K, K, M) with h[k, n] the channel from transmitter k to user n;
    w: (..., K, M); noise, weights: (K,). Returns (signal, inter, rate, wsr)
    where wsr has the leading batch shape.
    """
    gains = np.einsum("...nkm,...nm->...nk", np.conj(h), w)  # rx gain of tx n at user k
    powers = np.abs(gains) ** 2
    signal = np.einsum("...kk->...k", powers)
    inter = powers.sum(axis=-2) - signal + noise
    rate = np.log2(1.0 + signal / inter)
    wsr = np.einsum("...k,k->...", rate, weights)
    return signal, inter, rate, wsr


def rates(
    channels: ChannelTensor,
    beamformers: BeamformerSet,
    noise: np.ndarray,
    weights: np.ndarray,
) -> RateReport:
    """Per-user rates and weighted sum-rate for one channel realization."""
    noise = np.asarray(noise, dtype=float)
    weights = np.asarray(weights, dtype=float)
    k = channels.h.shape[0]
    if beamformers.w.shape[0] != k or noise.shape != (k,) or weights.shape != (k,):
        raise ValueError("inconsistent dimensions between channels and beamformers")
    if np.any(noise <= 0):
        raise ValueError("noise powers must be positive")
    signal, inter, rate, wsr = rates_raw(channels.h, beamformers.w, noise, weights)
    return RateReport(signal=signal, interference_plus_noise=inter, rate=rate, wsr=float(wsr))


def wsr_gradient_raw(
    h: np.ndarray,
    grad_h: np.ndarray,
    w: np.ndarray,
    noise: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    """Ambient-space WSR gradient with respect to every boresight.

    For element (k, m):

        g = (2/ln2) * Re{ conj(w[k,m]) * (
              a_k * (h_kk^H w_k) / (I_k + S_k) * grad_h[k,m,k]
              - sum_{l != k} a_l * S_l / (I_l (I_l + S_l))
                * (h_kl^H w_k) * grad_h[k,m,l] ) }

    Only channels radiated from transmitter k depend on f[k, m], so the
    interference term collects the rate loss this element inflicts on every
    other user. Tangent projection is left to the optimizer.
    """
    gains = np.einsum("nkm,nm->nk", np.conj(h), w)  # gains[k, l] = h_kl^H w_k
    powers = np.abs(gains) ** 2
    diag = np.arange(h.shape[0])
    signal = powers[diag, diag]
    inter = powers.sum(axis=0) - signal + noise
    total = signal + inter

    coef = gains * (-(weights * signal) / (inter * total))[None, :]
    coef[diag, diag] = weights * gains[diag, diag] / total
    ambient = np.einsum("kl,kmld->kmd", coef, grad_h)
    return (2.0 / LN2) * np.real(np.conj(w)[..., None] * ambient)


def wsr_orientation_gradient(
    channels: ChannelTensor,
    beamformers: BeamformerSet,
    noise: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    """WSR gradient for every element, shape (K, M, 3); requires grad_h."""
    if channels.grad_h is None:
        raise ValueError("channel tensor must carry gradients (with_gradient=True)")
    return wsr_gradient_raw(
        channels.h,
        channels.grad_h,
        beamformers.w,
        np.asarray(noise, dtype=float),
        np.asarray(weights, dtype=float),
    )
