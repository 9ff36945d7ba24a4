"""WMMSE solver for the fixed-orientation beamforming subproblem.

Weighted sum-rate maximization under per-transmitter power budgets is
solved through its weighted-MMSE reformulation: alternating closed-form
updates of scalar receive filters, MSE weights, and beamformers, the last
with a bisection on the power multiplier. Every full sweep is nondecreasing
in the weighted sum-rate.

All update rules broadcast over leading batch dimensions, so a batch of
independent instances (e.g. the candidate sets of one stochastic-search
iteration) is solved in lockstep with per-instance stopping: once an
instance converges its beamformers are frozen, which makes the batched
result identical to solving each instance alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import linear_bf
from .metrics import BeamformerSet, rates_raw

__all__ = [
    "WmmseParams",
    "WmmseState",
    "update_receive_filters",
    "mse",
    "update_mse_weights",
    "update_beamformers",
    "solve",
    "solve_batch",
]

# bisection targets: power within 1e-10 relative of the budget and
# complementary slackness |mu * (power - budget)| below 1e-9
POWER_REL_TOL = 1e-11
SLACK_TOL = 1e-10
BISECT_MAX_ITER = 200


@dataclass
class WmmseParams:
    tol: float = 1e-6
    max_sweeps: int = 200


@dataclass
class WmmseState:
    """Solver state: receive filters, MSE weights, beamformers, wsr trace."""

    receive_filters: np.ndarray  # (K,) complex
    mse_weights: np.ndarray  # (K,) positive
    beamformers: BeamformerSet
    objective_trace: List[float] = field(default_factory=list)

    @property
    def wsr(self) -> float:
        return self.objective_trace[-1]


def update_receive_filters(h: np.ndarray, w: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Optimal scalar receive filters for fixed beamformers.

    filter_k = h_kk^H w_k / (sum_n |h_nk^H w_n|^2 + noise_k).
    """
    gains = np.einsum("...nkm,...nm->...nk", np.conj(h), w)
    denom = np.sum(np.abs(gains) ** 2, axis=-2) + noise
    kk = np.arange(h.shape[-2])
    return gains[..., kk, kk] / denom


def mse(h: np.ndarray, w: np.ndarray, u: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Per-user mean-square error of the filtered received symbol.

    e_k = |u_k^* h_kk^H w_k - 1|^2 + sum_{n != k} |u_k^* h_nk^H w_n|^2
          + |u_k|^2 noise_k.
    """
    gains = np.einsum("...nkm,...nm->...nk", np.conj(h), w)
    kk = np.arange(h.shape[-2])
    direct = np.conj(u) * gains[..., kk, kk]
    cross = np.sum(np.abs(gains) ** 2, axis=-2) - np.abs(gains[..., kk, kk]) ** 2
    return np.abs(direct - 1.0) ** 2 + np.abs(u) ** 2 * (cross + noise)


def update_mse_weights(e: np.ndarray) -> np.ndarray:
    """Weight update: reciprocal of the per-user MSE (must be positive)."""
    e = np.asarray(e, dtype=float)
    if np.any(e <= 0.0):
        raise ValueError("MSE values must be positive")
    return 1.0 / e


def _power_given_mu(c2: np.ndarray, lam: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """||w(mu)||^2 = sum_i |c_i|^2 / (lam_i + mu)^2 in the eigenbasis."""
    return np.sum(c2 / (lam + mu[..., None]) ** 2, axis=-1)


def update_beamformers(
    h: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    weights: np.ndarray,
    budgets: np.ndarray,
):
    """Closed-form beamformer update with budget bisection.

    Solves (sum_i a_i v_i |u_i|^2 h_ki h_ki^H + mu_k I) w_k
    = a_k v_k u_k^* h_kk per transmitter, with mu_k = 0 when the
    unconstrained solution fits the budget and otherwise the unique
    mu_k > 0 driving ||w_k||^2 to the budget (||w(mu)||^2 is strictly
    decreasing in mu). Returns (w, mu).
    """
    coef = weights * v * np.abs(u) ** 2  # (..., K)
    quad = np.einsum("...i,...kim,...kin->...kmn", coef, h, np.conj(h))
    kk = np.arange(h.shape[-2])
    rhs = (weights * v * np.conj(u))[..., None] * h[..., kk, kk, :]

    lam, vec = np.linalg.eigh(quad)
    lam = np.maximum(lam, 0.0)
    c = np.einsum("...mi,...m->...i", np.conj(vec), rhs)
    c2 = np.abs(c) ** 2

    # unconstrained attempt: valid only where the quadratic form is
    # comfortably nonsingular; otherwise force the mu > 0 branch
    lam_max = lam[..., -1]
    nonsingular = lam[..., 0] > np.maximum(lam_max, 1e-300) * 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        power0 = np.where(
            nonsingular, np.sum(c2 / np.where(lam > 0, lam, 1.0) ** 2, axis=-1), np.inf
        )
    zero_rhs = np.sum(c2, axis=-1) == 0.0
    power0 = np.where(zero_rhs, 0.0, power0)

    need = power0 > budgets * (1.0 + 1e-12)
    mu = np.zeros(lam.shape[:-1])

    if np.any(need):
        hi = np.ones_like(mu)
        for _ in range(BISECT_MAX_ITER):
            grow = need & (_power_given_mu(c2, lam, hi) >= budgets)
            if not np.any(grow):
                break
            hi = np.where(grow, 2.0 * hi, hi)
        lo = np.zeros_like(mu)
        mid = 0.5 * (lo + hi)
        for _ in range(BISECT_MAX_ITER):
            power = _power_given_mu(c2, lam, mid)
            high_side = power > budgets
            lo = np.where(need & high_side, mid, lo)
            hi = np.where(need & ~high_side, mid, hi)
            gap = np.abs(power - budgets)
            done = (gap <= POWER_REL_TOL * budgets) & (mid * gap <= SLACK_TOL)
            if np.all(done | ~need):
                break
            mid = np.where(need & ~done, 0.5 * (lo + hi), mid)
        mu = np.where(need, mid, mu)

    scale = lam + mu[..., None]
    scale = np.where(scale > 0.0, scale, 1.0)  # only hit where c == 0
    w = np.einsum("...mi,...i->...m", vec, c / scale)
    w = np.where(zero_rhs[..., None], 0.0, w)
    return w, mu


def solve_batch(
    h: np.ndarray,
    noise: np.ndarray,
    weights: np.ndarray,
    budgets: np.ndarray,
    params: WmmseParams = WmmseParams(),
    w0: Optional[np.ndarray] = None,
):
    """Run WMMSE sweeps on a batch of channel tensors.

    h has shape (..., K, K, M); returns (w, wsr, sweeps, traces) where
    traces is the per-sweep wsr array of shape (n_sweeps + 1, ...). Each
    batch element stops by its own relative-change criterion; converged
    elements are frozen so extra sweeps of the batch never touch them.
    """
    w = linear_bf.mrt_raw(h, budgets) if w0 is None else np.array(w0, dtype=complex)
    _, _, _, wsr = rates_raw(h, w, noise, weights)
    wsr = np.asarray(wsr, dtype=float)
    trace = [wsr.copy()]
    active = np.ones(wsr.shape, dtype=bool)
    sweeps = np.zeros(wsr.shape, dtype=int)

    for _ in range(params.max_sweeps):
        u = update_receive_filters(h, w, noise)
        v = update_mse_weights(mse(h, w, u, noise))
        w_new, _ = update_beamformers(h, u, v, weights, budgets)
        w = np.where(active[..., None, None], w_new, w)
        _, _, _, wsr_new = rates_raw(h, w, noise, weights)
        wsr_new = np.asarray(wsr_new, dtype=float)
        sweeps = sweeps + active
        change = np.abs(wsr_new - wsr) / np.maximum(np.abs(wsr), 1e-300)
        wsr = np.where(active, wsr_new, wsr)
        trace.append(wsr.copy())
        active = active & (change >= params.tol)
        if not np.any(active):
            break
    return w, wsr, sweeps, np.stack(trace)


def solve(
    h: np.ndarray,
    noise: np.ndarray,
    weights: np.ndarray,
    budgets: np.ndarray,
    params: WmmseParams = WmmseParams(),
    w0: Optional[np.ndarray] = None,
) -> WmmseState:
    """Solve one fixed-orientation beamforming instance.

    Alternates the three closed-form updates until the relative wsr change
    drops below params.tol or params.max_sweeps is hit. Initialization is
    full-power alignment with the desired channels unless a warm start w0
    is given. The wsr trace is nondecreasing (within numerical tolerance)
    and the final iterate is returned.
    """
    w, _, _, trace = solve_batch(h, noise, weights, budgets, params, w0)
    u = update_receive_filters(h, w, noise)
    v = update_mse_weights(mse(h, w, u, noise))
    return WmmseState(
        receive_filters=u,
        mse_weights=v,
        beamformers=BeamformerSet(w=w, budgets=np.asarray(budgets, dtype=float)),
        objective_trace=[float(x) for x in trace],
    )
