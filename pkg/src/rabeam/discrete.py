"""Discrete orientation codebooks and joint search over them.

Two codebook constructions on the spherical cap: a uniform zenith/azimuth
grid (simple but pole-clustered) and spherical Fibonacci sampling, whose
samples split the cap into equal-area annuli (the z-coordinates are equally
spaced) with golden-ratio azimuth steps, giving near-uniform coverage.

Joint beamforming-plus-orientation selection over a codebook is done by a
cross-entropy search: one categorical distribution per orientation
variable, refit each iteration to the elite fraction of WMMSE-scored
samples through an exponential moving average. A brute-force enumerator
covers tiny instances and serves as the optimality oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import wmmse
from .channel import ChannelGeometry, OrientationSet, boresight_from_angles
from .metrics import BeamformerSet, rates_raw
from .scene import SceneConfig, Topology

__all__ = [
    "Codebook",
    "CemParams",
    "CemResult",
    "uniform_grid_codebook",
    "fibonacci_codebook",
    "nearest_projection",
    "cem_solve",
    "brute_force",
    "codebook_csv",
]

MIN_SEPARATION_RAD = 1e-9
BRUTE_FORCE_LIMIT = 10**6


@dataclass
class Codebook:
    """A finite set of feasible boresight directions.

    directions has shape (N, 3); every entry lies in the cap and pairwise
    angular separations exceed 1e-9 rad (checked at construction).
    """

    directions: np.ndarray
    kind: str
    theta_max: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.directions = np.asarray(self.directions, dtype=float)
        if self.directions.ndim != 2 or self.directions.shape[1] != 3:
            raise ValueError("codebook directions must have shape (N, 3)")
        if np.any(self.directions[:, 2] < np.cos(self.theta_max) - 1e-12):
            raise ValueError("codebook direction outside the spherical cap")
        n = len(self.directions)
        if n > 1:
            cosines = np.clip(self.directions @ self.directions.T, -1.0, 1.0)
            np.fill_diagonal(cosines, -1.0)
            if np.arccos(np.max(cosines)) <= MIN_SEPARATION_RAD:
                raise ValueError("duplicate codebook directions")

    def __len__(self) -> int:
        return len(self.directions)


def uniform_grid_codebook(n_theta: int, n_phi: int, theta_max: float) -> Codebook:
    """Uniform zenith/azimuth grid on the cap.

    Zenith levels are n_theta equispaced values in [0, theta_max] ({0} when
    n_theta = 1); azimuths are n_phi values starting at -pi with spacing
    2*pi/n_phi. All azimuths of a zero-zenith level collapse to the single
    pole direction, which is kept once.
    """
    if n_theta < 1 or n_phi < 1:
        raise ValueError("n_theta and n_phi must be >= 1")
    thetas = np.array([0.0]) if n_theta == 1 else np.linspace(0.0, theta_max, n_theta)
    phis = -np.pi + 2.0 * np.pi * np.arange(n_phi) / n_phi
    rows = []
    for theta in np.unique(thetas):
        if theta == 0.0:
            rows.append(np.array([[0.0, 0.0, 1.0]]))
        else:
            rows.append(boresight_from_angles(np.full(n_phi, theta), phis))
    return Codebook(
        directions=np.concatenate(rows, axis=0),
        kind="uniform-grid",
        theta_max=theta_max,
        params={"n_theta": n_theta, "n_phi": n_phi},
    )


def fibonacci_codebook(n_dir: int, theta_max: float) -> Codebook:
    """Spherical Fibonacci sampling of the cap.

    theta_i = arccos(1 - (i + 1/2)/N * (1 - cos(theta_max))) and
    phi_i = 2*pi*frac(i / golden^2) for i = 0..N-1, with golden the golden
    ratio (1 + sqrt 5)/2; azimuths are wrapped into [-pi, pi) before the
    angle-to-vector map. Consecutive z-levels are equally spaced, so each
    sample owns an equal-area cap annulus.
    """
    if n_dir < 1:
        raise ValueError("n_dir must be >= 1")
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    i = np.arange(n_dir)
    cos_theta = 1.0 - (i + 0.5) / n_dir * (1.0 - np.cos(theta_max))
    theta = np.arccos(np.clip(cos_theta, -1.0, 1.0))
    phi = 2.0 * np.pi * np.mod(i / golden**2, 1.0)
    phi = np.mod(phi + np.pi, 2.0 * np.pi) - np.pi
    return Codebook(
        directions=boresight_from_angles(theta, phi),
        kind="fibonacci",
        theta_max=theta_max,
        params={"n_dir": n_dir},
    )


def nearest_projection(orientations: OrientationSet, codebook: Codebook) -> OrientationSet:
    """Snap every boresight to its maximum-cosine codeword.

    Ties resolve to the lowest codebook index (argmax order).
    """
    cosines = np.einsum("kmd,nd->kmn", orientations.f, codebook.directions)
    indices = np.argmax(cosines, axis=-1)
    return OrientationSet(codebook.directions[indices])


def codebook_csv(codebook: Codebook) -> str:
    """CSV dump of a codebook: index, zenith, azimuth, x, y, z."""
    lines = ["index,theta,phi,x,y,z"]
    for i, direction in enumerate(codebook.directions):
        x, y, z = direction
        theta = float(np.arccos(np.clip(z, -1.0, 1.0)))
        phi = float(np.arctan2(y, x)) if theta > 0.0 else 0.0
        lines.append(
            f"{i},{theta:.9f},{phi:.9f},{x:.9f},{y:.9f},{z:.9f}"
        )
    return "\n".join(lines) + "\n"


@dataclass
class CemParams:
    """Cross-entropy search controls.

    samples per iteration, elite fraction, pmf smoothing factor, iteration
    budget, the reduced WMMSE budget used to score samples, the full budget
    used to polish the final best, and the search RNG seed.
    """

    samples: int = 64
    elite_frac: float = 0.2
    smoothing: float = 0.7
    max_iter: int = 30
    scoring: wmmse.WmmseParams = field(
        default_factory=lambda: wmmse.WmmseParams(tol=1e-5, max_sweeps=100)
    )
    polish: wmmse.WmmseParams = field(default_factory=wmmse.WmmseParams)
    seed: int = 0


@dataclass
class CemResult:
    """Search outcome: best orientations/beamformers, polished wsr, pmfs.

    best_trace[t] is the best objective seen up to iteration t (scored with
    the reduced WMMSE budget); it is nondecreasing. wsr is the final best
    re-scored with the full-budget solver, so it can only exceed the trace.
    """

    orientations: OrientationSet
    beamformers: BeamformerSet
    wsr: float
    rates: np.ndarray
    best_trace: List[float]
    pmfs: np.ndarray

    @property
    def iterations(self) -> int:
        return len(self.best_trace) - 1


def _full_wsr(geom, f, config, solver_params=None):
    """Full-budget WMMSE score of one orientation set (the polish scorer)."""
    h = geom.channel(f)
    state = wmmse.solve(
        h,
        config.noise_mw(),
        config.weights(),
        config.budgets_mw(),
        solver_params if solver_params is not None else wmmse.WmmseParams(),
    )
    return state, h


def cem_solve(
    config: SceneConfig,
    topology: Topology,
    codebook: Codebook,
    params: CemParams = CemParams(),
) -> CemResult:
    """Cross-entropy search over per-element codeword assignments.

    Maintains one categorical pmf per orientation variable (K*M of them),
    initialized uniform. Each iteration samples `samples` orientation sets,
    scores each with a reduced-budget WMMSE solve (batched; the solves are
    independent), selects the top ceil(elite_frac * samples) by score with
    a stable sample-index tie-break, and moves each pmf toward the elites'
    empirical frequencies by the smoothing factor. The best sample ever
    seen is tracked and finally re-polished with the full-budget solver.
    """
    if params.samples < 1:
        raise ValueError("samples must be >= 1")
    n_elite = int(np.ceil(params.elite_frac * params.samples))
    if n_elite < 1:
        raise ValueError("elite_frac * samples must be >= 1")

    geom = ChannelGeometry(config, topology)
    noise = config.noise_mw()
    weights = config.weights()
    budgets = config.budgets_mw()
    k, m = config.K, config.M
    n_vars = k * m
    n_words = len(codebook)
    rng = np.random.default_rng([params.seed, 0x5EED])

    pmfs = np.full((n_vars, n_words), 1.0 / n_words)

    def score(indices: np.ndarray):
        f = codebook.directions[indices].reshape(indices.shape[0], k, m, 3)
        h = geom.channel(f)
        w, wsr, _, _ = wmmse.solve_batch(h, noise, weights, budgets, params.scoring)
        return w, wsr

    def sample(count: int) -> np.ndarray:
        draws = np.empty((count, n_vars), dtype=int)
        for j in range(n_vars):
            draws[:, j] = rng.choice(n_words, size=count, p=pmfs[j])
        return draws

    best_idx = sample(1)[0]
    _, best_wsr_arr = score(best_idx[None, :])
    best_wsr = float(best_wsr_arr[0])
    best_trace = [best_wsr]

    for _ in range(params.max_iter):
        draws = sample(params.samples)
        _, scores = score(draws)
        order = np.argsort(-scores, kind="stable")
        elites = draws[order[:n_elite]]
        freqs = np.zeros_like(pmfs)
        for j in range(n_vars):
            counts = np.bincount(elites[:, j], minlength=n_words)
            freqs[j] = counts / n_elite
        pmfs = (1.0 - params.smoothing) * pmfs + params.smoothing * freqs
        pmfs /= pmfs.sum(axis=1, keepdims=True)

        top = int(np.argmax(scores))
        if float(scores[top]) > best_wsr:
            best_wsr = float(scores[top])
            best_idx = draws[top]
        best_trace.append(best_wsr)

    f_best = codebook.directions[best_idx].reshape(k, m, 3)
    state, h = _full_wsr(geom, f_best, config, params.polish)
    _, _, per_user, wsr = rates_raw(h, state.beamformers.w, noise, weights)
    return CemResult(
        orientations=OrientationSet(f_best),
        beamformers=state.beamformers,
        wsr=float(wsr),
        rates=per_user,
        best_trace=best_trace,
        pmfs=pmfs,
    )


def brute_force(
    config: SceneConfig,
    topology: Topology,
    codebook: Codebook,
):
    """Exhaustively score every codeword assignment with full-budget WMMSE.

    Enumeration is lexicographic over the K*M orientation slots (last slot
    fastest); ties keep the first maximizer. Guarded to 1e6 assignments.
    Returns (OrientationSet, wsr).
    """
    k, m = config.K, config.M
    n_vars = k * m
    n_words = len(codebook)
    if n_words**n_vars > BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"{n_words}^{n_vars} assignments exceed the brute-force guard of {BRUTE_FORCE_LIMIT}"
        )
    geom = ChannelGeometry(config, topology)
    best_wsr = -np.inf
    best_f: Optional[np.ndarray] = None
    for combo in itertools.product(range(n_words), repeat=n_vars):
        f = codebook.directions[list(combo)].reshape(k, m, 3)
        state, _ = _full_wsr(geom, f, config)
        if state.wsr > best_wsr:
            best_wsr = state.wsr
            best_f = f
    return OrientationSet(best_f), float(best_wsr)
