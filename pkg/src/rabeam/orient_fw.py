"""Frank-Wolfe orientation optimization on the product of spherical caps.

The feasible set of each boresight is the spherical cap
{x : ||x|| = 1, x . e_z >= cos(theta_max)}. One Frank-Wolfe step projects
the objective gradient onto the tangent space of each boresight, maximizes
the resulting linear form over the cap in closed form (the "cap oracle"),
moves along the chord toward the maximizer with an Armijo-backtracked
stepsize, and renormalizes. The chord of two cap points stays inside the
cap cone, so the renormalized update is always feasible, and the gap
(the sum of oracle inner products) is nonnegative by construction: zero
exactly at stationary points.

The module also hosts the alternating driver that interleaves WMMSE
beamforming with orientation steps, and the single-block variants that fold
closed-form MRT/ZF beamformers into the objective, differentiating it by
tangent-space central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import linear_bf, wmmse
from .channel import CAP_TOL, ChannelGeometry, OrientationSet, UNIT_TOL
from .metrics import BeamformerSet, rates_raw, wsr_gradient_raw
from .scene import SceneConfig, Topology

__all__ = [
    "FwParams",
    "FwIterate",
    "AoParams",
    "AoOuterRecord",
    "AoResult",
    "LinearBfResult",
    "tangent_project",
    "tangent_basis",
    "cap_oracle",
    "fw_gap",
    "fw_update",
    "armijo_fw_step",
    "optimize_orientations",
    "ao_solve",
    "optimize_orientations_mrt",
    "optimize_orientations_zf",
    "fd_tangent_gradient",
]


@dataclass
class FwParams:
    """Frank-Wolfe step controls.

    armijo_c is the sufficient-increase fraction, backtrack the stepsize
    shrink factor, min_step the backtracking floor, stationarity_tol the
    tangent-gradient norm treated as zero, tol / max_iter the loop
    stopping rule, fd_step the tangent finite-difference stepsize used by
    the MRT/ZF variants.
    """

    armijo_c: float = 0.1
    backtrack: float = 0.5
    min_step: float = 1e-8
    tol: float = 1e-6
    max_iter: int = 200
    stationarity_tol: float = 1e-14
    fd_step: float = 1e-6


@dataclass
class FwIterate:
    """One Frank-Wolfe iterate: point, gap, accepted stepsize, objective."""

    orientations: OrientationSet
    gap: float
    step: float
    wsr: float
    accepted: bool


def tangent_project(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """(I - f f^T) g per element; output orthogonal to each unit f."""
    return g - np.sum(f * g, axis=-1, keepdims=True) * f


def tangent_basis(f: np.ndarray):
    """Deterministic orthonormal tangent pair (t1, t2) at each unit f."""
    anchor = np.zeros_like(f)
    use_x = np.abs(f[..., 0]) < 0.9
    anchor[..., 0] = np.where(use_x, 1.0, 0.0)
    anchor[..., 1] = np.where(use_x, 0.0, 1.0)
    t1 = tangent_project(f, anchor)
    t1 = t1 / np.linalg.norm(t1, axis=-1, keepdims=True)
    t2 = np.cross(f, t1)
    return t1, t2


def cap_oracle(
    f: np.ndarray,
    tg: np.ndarray,
    theta_max: float,
    stationarity_tol: float = 1e-14,
) -> np.ndarray:
    """Exact maximizer of <tg, x> over the spherical cap, per element.

    With ghat the unit-normalized tangent gradient: ghat itself when it
    already satisfies the cap constraint; otherwise the cap-rim point whose
    x-y part follows ghat's (or a fixed rim point [sin, 0, .., cos] when
    ghat is antiparallel to e_z). Elements with ||tg|| below
    stationarity_tol keep their current orientation.
    """
    f = np.asarray(f, dtype=float)
    tg = np.asarray(tg, dtype=float)
    single = f.ndim == 1
    if single:
        f, tg = f[None, :], tg[None, :]

    cos_max = np.cos(theta_max)
    sin_max = np.sin(theta_max)
    norm = np.linalg.norm(tg, axis=-1, keepdims=True)
    ghat = tg / np.where(norm > 0.0, norm, 1.0)

    xy = ghat[..., :2]
    xy_norm = np.linalg.norm(xy, axis=-1, keepdims=True)
    rim_xy = np.where(
        xy_norm > 0.0, xy / np.where(xy_norm > 0.0, xy_norm, 1.0), [1.0, 0.0]
    )
    rim = np.concatenate(
        [sin_max * rim_xy, np.full(xy.shape[:-1] + (1,), cos_max)], axis=-1
    )
    inside = ghat[..., 2:] >= cos_max
    s = np.where(inside, ghat, rim)
    s = np.where(norm < stationarity_tol, f, s)
    return s[0] if single else s


def fw_gap(tangent_gradients: np.ndarray, directions: np.ndarray) -> float:
    """Sum over elements of <tangent gradient, oracle direction>."""
    return float(np.sum(tangent_gradients * directions))


def fw_update(f: np.ndarray, d: np.ndarray, rho) -> np.ndarray:
    """Move along the chord and renormalize: (f + rho d) / ||f + rho d||.

    rho may carry leading broadcast dimensions to build a batch of
    candidate stepsizes at once.
    """
    moved = f + rho * d
    return moved / np.linalg.norm(moved, axis=-1, keepdims=True)


def armijo_fw_step(
    objective_fn: Callable[[np.ndarray], np.ndarray],
    f: np.ndarray,
    wsr: float,
    tangent_gradients: np.ndarray,
    oracle_points: np.ndarray,
    params: FwParams,
) -> FwIterate:
    """Backtrack a stepsize satisfying the sufficient-increase condition.

    Accepts the first rho in {1, b, b^2, ...} (i.e. the largest, since the
    ladder descends) with objective(new) >= objective(old)
    + armijo_c * rho * gap; the whole ladder is scored in one batched
    objective call. A zero gap is the stationary case (old iterate
    returned, condition holds with equality); if every rho down to
    min_step fails with a positive gap the old iterate is returned flagged
    as a stall.
    """
    d = oracle_points - f
    gap = fw_gap(tangent_gradients, d)
    if gap <= 0.0:
        return FwIterate(OrientationSet(f.copy()), gap, 1.0, wsr, accepted=True)
    n_rungs = max(int(np.log(params.min_step) / np.log(params.backtrack)) + 1, 1)
    rhos = params.backtrack ** np.arange(n_rungs)
    rhos = rhos[rhos >= params.min_step] if rhos[-1] < params.min_step else rhos
    candidates = fw_update(f, d, rhos[:, None, None, None])
    values = np.asarray(objective_fn(candidates), dtype=float)
    passing = values >= wsr + params.armijo_c * rhos * gap
    if np.any(passing):
        idx = int(np.argmax(passing))
        return FwIterate(
            OrientationSet(candidates[idx]), gap, float(rhos[idx]), float(values[idx]), True
        )
    return FwIterate(OrientationSet(f.copy()), gap, float(rhos[-1]), wsr, accepted=False)


def _check_feasible(f: np.ndarray, theta_max: float) -> None:
    norms = np.linalg.norm(f, axis=-1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOL):
        raise AssertionError("iterate lost unit norm")
    if np.any(f[..., 2] < np.cos(theta_max) - CAP_TOL):
        raise AssertionError("iterate left the spherical cap")


def optimize_orientations(
    objective_fn: Callable[[np.ndarray], np.ndarray],
    gradient_fn: Callable[[np.ndarray], np.ndarray],
    initial: OrientationSet,
    theta_max: float,
    params: FwParams = FwParams(),
):
    """Frank-Wolfe loop over all boresights for a fixed objective.

    objective_fn must accept orientation arrays with leading batch
    dimensions, (..., K, M, 3) -> (...,), so the Armijo ladder can be
    scored in one call. gradient_fn returns ambient gradients of shape
    (K, M, 3); the loop projects them, queries the cap oracle, backtracks,
    and stops when the relative objective change falls below params.tol,
    the gap vanishes, backtracking stalls, or params.max_iter is reached.
    Returns the final orientations and the per-iteration trace (index 0 is
    the initial point); the wsr trace is nondecreasing.
    """
    initial.assert_feasible(theta_max)
    f = initial.f.copy()
    wsr = float(objective_fn(f))
    trace: List[FwIterate] = [
        FwIterate(OrientationSet(f.copy()), 0.0, 1.0, wsr, accepted=True)
    ]
    for _ in range(params.max_iter):
        g = gradient_fn(f)
        tg = tangent_project(f, g)
        s = cap_oracle(f, tg, theta_max, params.stationarity_tol)
        it = armijo_fw_step(objective_fn, f, wsr, tg, s, params)
        _check_feasible(it.orientations.f, theta_max)
        trace.append(it)
        prev = wsr
        f, wsr = it.orientations.f, it.wsr
        if not it.accepted:
            break
        if it.gap <= params.stationarity_tol:
            break
        if abs(wsr - prev) <= params.tol * max(abs(prev), 1e-300):
            break
    return OrientationSet(f), trace


@dataclass
class AoParams:
    """Alternating-driver controls.

    The inner Frank-Wolfe budget is deliberately small (50 steps per outer
    round): interleaving the beamformer re-solve more often converges
    faster than exhausting the orientation block each round. max_outer is
    sized so interference-limited instances (high budgets, directive
    elements) actually converge rather than stopping at the cap.
    """

    tol: float = 1e-6
    max_outer: int = 300
    wmmse: wmmse.WmmseParams = field(default_factory=wmmse.WmmseParams)
    fw: FwParams = field(default_factory=lambda: FwParams(max_iter=50))


@dataclass
class AoOuterRecord:
    """One outer alternation: wsr after each block plus the inner FW trace."""

    wsr_after_beamforming: float
    wsr: float
    beamformers: BeamformerSet
    orientations: OrientationSet
    fw_trace: List[FwIterate]


@dataclass
class AoResult:
    beamformers: BeamformerSet
    orientations: OrientationSet
    wsr: float
    rates: np.ndarray
    initial_wsr: float
    outer_trace: List[AoOuterRecord]

    @property
    def iterations(self) -> int:
        return len(self.outer_trace)


def ao_solve(
    config: SceneConfig,
    topology: Topology,
    params: AoParams = AoParams(),
    initial: Optional[OrientationSet] = None,
) -> AoResult:
    """Alternate WMMSE beamforming and Frank-Wolfe orientation updates.

    Starts from +z boresights and full-power aligned beamformers unless an
    initial orientation set is given. Stops when the relative wsr change
    over one outer iteration falls below params.tol, when the orientation
    block cannot move (the alternation is then block-stationary; for
    theta_max = 0 this reproduces the fixed-orientation WMMSE baseline
    exactly), or after params.max_outer iterations. The outer wsr sequence
    is nondecreasing.
    """
    geom = ChannelGeometry(config, topology)
    noise = config.noise_mw()
    weights = config.weights()
    budgets = config.budgets_mw()
    theta_max = config.theta_max

    fset = initial.copy() if initial is not None else OrientationSet.plus_z(config.K, config.M)
    fset.assert_feasible(theta_max)
    f = fset.f
    h = geom.channel(f)
    w = linear_bf.mrt_raw(h, budgets)
    _, _, _, wsr = rates_raw(h, w, noise, weights)
    initial_wsr = float(wsr)

    def objective(f_trial: np.ndarray):
        return rates_raw(geom.channel(f_trial), w, noise, weights)[3]

    def gradient(f_cur: np.ndarray) -> np.ndarray:
        h_cur, grad_h = geom.channel_with_gradient(f_cur)
        return wsr_gradient_raw(h_cur, grad_h, w, noise, weights)

    outer: List[AoOuterRecord] = []
    prev_wsr = initial_wsr
    wsr_now = initial_wsr
    for _ in range(params.max_outer):
        state = wmmse.solve(h, noise, weights, budgets, params.wmmse, w0=w)
        w = state.beamformers.w
        wsr_bf = state.wsr

        fset_new, fw_trace = optimize_orientations(
            objective, gradient, OrientationSet(f), theta_max, params.fw
        )
        moved = not np.array_equal(fset_new.f, f)
        f = fset_new.f
        h = geom.channel(f)
        wsr_now = fw_trace[-1].wsr
        outer.append(
            AoOuterRecord(
                wsr_after_beamforming=wsr_bf,
                wsr=wsr_now,
                beamformers=BeamformerSet(w=w.copy(), budgets=budgets),
                orientations=fset_new.copy(),
                fw_trace=fw_trace,
            )
        )
        if not moved:
            break
        if abs(wsr_now - prev_wsr) <= params.tol * max(abs(prev_wsr), 1e-300):
            break
        prev_wsr = wsr_now

    _, _, per_user, final = rates_raw(h, w, noise, weights)
    return AoResult(
        beamformers=BeamformerSet(w=w, budgets=budgets),
        orientations=OrientationSet(f),
        wsr=float(final),
        rates=per_user,
        initial_wsr=initial_wsr,
        outer_trace=outer,
    )


def fd_tangent_gradient(
    objective_fn: Callable[[np.ndarray], np.ndarray],
    f: np.ndarray,
    step: float,
) -> np.ndarray:
    """Tangent-space central finite differences of a scalar objective.

    objective_fn must accept a batch of orientation sets (..., K, M, 3) and
    return (...,) objective values. Each element is perturbed along its two
    tangent basis vectors with intrinsic (renormalized) steps; the result
    already lies in the tangent space at f.
    """
    k, m, _ = f.shape
    t1, t2 = tangent_basis(f)
    probes = []
    for basis in (t1, t2):
        for sign in (step, -step):
            batch = np.broadcast_to(f, (k * m, k, m, 3)).copy()
            flat = batch.reshape(k * m, k * m, 3)
            idx = np.arange(k * m)
            flat[idx, idx, :] = f.reshape(k * m, 3) + sign * basis.reshape(k * m, 3)
            flat[idx, idx, :] /= np.linalg.norm(flat[idx, idx, :], axis=-1, keepdims=True)
            probes.append(batch)
    values = objective_fn(np.concatenate(probes, axis=0))
    v1p, v1m, v2p, v2m = np.split(np.asarray(values), 4)
    d1 = ((v1p - v1m) / (2.0 * step)).reshape(k, m, 1)
    d2 = ((v2p - v2m) / (2.0 * step)).reshape(k, m, 1)
    return d1 * t1 + d2 * t2


@dataclass
class LinearBfResult:
    beamformers: BeamformerSet
    orientations: OrientationSet
    wsr: float
    rates: np.ndarray
    trace: List[FwIterate]

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1


def _optimize_with_linear_bf(
    config: SceneConfig,
    topology: Topology,
    beamformer_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    params: FwParams,
    initial: Optional[OrientationSet],
) -> LinearBfResult:
    geom = ChannelGeometry(config, topology)
    noise = config.noise_mw()
    weights = config.weights()
    budgets = config.budgets_mw()

    def batched_objective(f_batch: np.ndarray) -> np.ndarray:
        h = geom.channel(f_batch)
        w = beamformer_fn(h, budgets)
        _, _, _, wsr = rates_raw(h, w, noise, weights)
        return wsr

    def gradient(f: np.ndarray) -> np.ndarray:
        return fd_tangent_gradient(batched_objective, f, params.fd_step)

    start = initial.copy() if initial is not None else OrientationSet.plus_z(config.K, config.M)
    fset, trace = optimize_orientations(
        batched_objective, gradient, start, config.theta_max, params
    )
    h = geom.channel(fset.f)
    w = beamformer_fn(h, budgets)
    _, _, per_user, wsr = rates_raw(h, w, noise, weights)
    return LinearBfResult(
        beamformers=BeamformerSet(w=w, budgets=budgets),
        orientations=fset,
        wsr=float(wsr),
        rates=per_user,
        trace=trace,
    )


def optimize_orientations_mrt(
    config: SceneConfig,
    topology: Topology,
    params: FwParams = FwParams(),
    initial: Optional[OrientationSet] = None,
) -> LinearBfResult:
    """Single-block orientation optimization under MRT beamforming.

    The objective recomputes full-power aligned beamformers from the
    current channels at every evaluation; gradients come from tangent-space
    central finite differences.
    """
    return _optimize_with_linear_bf(config, topology, linear_bf.mrt_raw, params, initial)


def optimize_orientations_zf(
    config: SceneConfig,
    topology: Topology,
    params: FwParams = FwParams(),
    initial: Optional[OrientationSet] = None,
) -> LinearBfResult:
    """Single-block orientation optimization under ZF beamforming (M >= K)."""
    if config.M < config.K:
        raise ValueError("ZF orientation optimization requires M >= K")
    return _optimize_with_linear_bf(config, topology, linear_bf.zf_raw, params, initial)
