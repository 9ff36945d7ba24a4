"""Experiment harness: scheme registry, seeded sweeps, CSV/JSON emission.

An experiment runs one or more schemes over a swept variable, with `trials`
independent topologies per sweep point (trial t uses seed base_seed + t).
Output rows are fully deterministic: rerunning the same spec yields
byte-identical files. Wall-clock timing is therefore opt-in (`timing`);
when disabled the seconds column is emitted as zero.

Schemes
-------
    wmmse_ra         alternating WMMSE + Frank-Wolfe orientation updates
    mrt_ra, zf_ra    single-block orientation optimization, closed-form bf
    wmmse_fixed      +z boresights, WMMSE beamforming only
    mrt_fixed, zf_fixed
    isotropic_fixed  p = 0 elements at +z, WMMSE beamforming
    disc_cem         codebook orientations, cross-entropy joint search
    disc_proj        continuous AO, nearest-codeword projection, one WMMSE
                     re-solve on the projected orientations
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import discrete, linear_bf, orient_fw, wmmse
from .channel import ChannelGeometry, OrientationSet
from .metrics import BeamformerSet, rates_raw
from .scene import SceneConfig, Topology, generate_topology

__all__ = [
    "SCHEMES",
    "SWEEP_VARIABLES",
    "ExperimentSpec",
    "ResultRow",
    "SchemeOutcome",
    "run_scheme",
    "run_experiment",
    "summarize",
    "emit",
    "convergence_trace",
    "parse_spec_file",
    "spec_from_mapping",
]

SCHEMES = (
    "wmmse_ra",
    "mrt_ra",
    "zf_ra",
    "wmmse_fixed",
    "mrt_fixed",
    "zf_fixed",
    "isotropic_fixed",
    "disc_cem",
    "disc_proj",
)

SWEEP_VARIABLES = ("p_max_dbm", "My", "p", "theta_max", "N_dir")


@dataclass
class AlgorithmParams:
    """Every tunable knob of the underlying solvers plus the codebook spec."""

    wmmse: wmmse.WmmseParams = field(default_factory=wmmse.WmmseParams)
    fw: orient_fw.FwParams = field(default_factory=orient_fw.FwParams)
    ao: orient_fw.AoParams = field(default_factory=orient_fw.AoParams)
    cem: discrete.CemParams = field(default_factory=discrete.CemParams)
    codebook_kind: str = "fibonacci"
    n_dir: int = 25
    n_theta: int = 5
    n_phi: int = 5

    def make_codebook(self, theta_max: float) -> discrete.Codebook:
        if self.codebook_kind == "fibonacci":
            return discrete.fibonacci_codebook(self.n_dir, theta_max)
        if self.codebook_kind == "uniform-grid":
            return discrete.uniform_grid_codebook(self.n_theta, self.n_phi, theta_max)
        raise ValueError(f"unknown codebook kind: {self.codebook_kind}")


@dataclass
class ExperimentSpec:
    """One experiment: schemes x sweep values x trials on a base scene."""

    schemes: Sequence[str] = ("wmmse_ra",)
    sweep: Optional[str] = None
    values: Sequence[float] = (None,)
    trials: int = 20
    base: SceneConfig = field(default_factory=SceneConfig)
    params: AlgorithmParams = field(default_factory=AlgorithmParams)
    timing: bool = False

    def validate(self) -> None:
        for scheme in self.schemes:
            if scheme not in SCHEMES:
                raise ValueError(f"unknown scheme: {scheme}")
        if self.sweep is not None and self.sweep not in SWEEP_VARIABLES:
            raise ValueError(f"unknown sweep variable: {self.sweep}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.sweep is not None and len(self.values) == 0:
            raise ValueError("sweep requested but no values given")
        self.base.validate()
        for value in self.values:
            config, params = self.apply_sweep(value)
            config.validate()
            for scheme in self.schemes:
                if scheme in ("zf_ra", "zf_fixed") and config.M < config.K:
                    raise ValueError(
                        f"scheme {scheme} requires M >= K "
                        f"(got M={config.M}, K={config.K} at sweep value {value})"
                    )
                if scheme in ("disc_cem", "disc_proj"):
                    if params.codebook_kind == "fibonacci" and params.n_dir < 1:
                        raise ValueError("discrete schemes need a codebook: n_dir >= 1")

    def apply_sweep(self, value) -> Tuple[SceneConfig, AlgorithmParams]:
        config, params = self.base, self.params
        if self.sweep is None or value is None:
            return config, params
        if self.sweep == "N_dir":
            params = replace(params, n_dir=int(value))
        elif self.sweep in ("My",):
            config = config.with_overrides(My=int(value))
        elif self.sweep == "p":
            config = config.with_overrides(p=int(value))
        else:
            config = config.with_overrides(**{self.sweep: float(value)})
        return config, params


@dataclass
class ResultRow:
    scheme: str
    sweep_var: str
    sweep_value: float
    seed: int
    wsr: float
    rates: List[float]
    iters: int
    seconds: float

    def to_json_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "sweep_var": self.sweep_var,
            "sweep_value": self.sweep_value,
            "seed": self.seed,
            "wsr": self.wsr,
            "rates": self.rates,
            "iters": self.iters,
            "seconds": self.seconds,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ResultRow":
        return cls(**data)


@dataclass
class SchemeOutcome:
    wsr: float
    rates: np.ndarray
    iterations: int
    orientations: OrientationSet
    beamformers: BeamformerSet


def _fixed_orientation_outcome(config: SceneConfig, topology: Topology, params, kind: str):
    geom = ChannelGeometry(config, topology)
    noise, weights, budgets = config.noise_mw(), config.weights(), config.budgets_mw()
    fset = OrientationSet.plus_z(config.K, config.M)
    h = geom.channel(fset.f)
    if kind == "wmmse":
        state = wmmse.solve(h, noise, weights, budgets, params.wmmse)
        w = state.beamformers.w
        iters = len(state.objective_trace) - 1
    else:
        w = linear_bf.mrt_raw(h, budgets) if kind == "mrt" else linear_bf.zf_raw(h, budgets)
        iters = 0
    _, _, per_user, wsr = rates_raw(h, w, noise, weights)
    return SchemeOutcome(float(wsr), per_user, iters, fset, BeamformerSet(w, budgets))


def run_scheme(
    scheme: str, config: SceneConfig, topology: Topology, params: AlgorithmParams
) -> SchemeOutcome:
    """Run one scheme on one realized topology."""
    if scheme == "wmmse_fixed":
        return _fixed_orientation_outcome(config, topology, params, "wmmse")
    if scheme == "mrt_fixed":
        return _fixed_orientation_outcome(config, topology, params, "mrt")
    if scheme == "zf_fixed":
        if config.M < config.K:
            raise ValueError("zf_fixed requires M >= K")
        return _fixed_orientation_outcome(config, topology, params, "zf")
    if scheme == "isotropic_fixed":
        return _fixed_orientation_outcome(
            config.with_overrides(p=0), topology, params, "wmmse"
        )
    if scheme == "wmmse_ra":
        result = orient_fw.ao_solve(config, topology, params.ao)
        return SchemeOutcome(
            result.wsr, result.rates, result.iterations, result.orientations, result.beamformers
        )
    if scheme == "mrt_ra":
        result = orient_fw.optimize_orientations_mrt(config, topology, params.fw)
        return SchemeOutcome(
            result.wsr, result.rates, result.iterations, result.orientations, result.beamformers
        )
    if scheme == "zf_ra":
        result = orient_fw.optimize_orientations_zf(config, topology, params.fw)
        return SchemeOutcome(
            result.wsr, result.rates, result.iterations, result.orientations, result.beamformers
        )
    if scheme == "disc_cem":
        codebook = params.make_codebook(config.theta_max)
        cem_params = replace(params.cem, seed=config.seed)
        result = discrete.cem_solve(config, topology, codebook, cem_params)
        return SchemeOutcome(
            result.wsr, result.rates, result.iterations, result.orientations, result.beamformers
        )
    if scheme == "disc_proj":
        codebook = params.make_codebook(config.theta_max)
        ao_result = orient_fw.ao_solve(config, topology, params.ao)
        projected = discrete.nearest_projection(ao_result.orientations, codebook)
        geom = ChannelGeometry(config, topology)
        noise, weights, budgets = config.noise_mw(), config.weights(), config.budgets_mw()
        h = geom.channel(projected.f)
        state = wmmse.solve(h, noise, weights, budgets, params.wmmse)
        _, _, per_user, wsr = rates_raw(h, state.beamformers.w, noise, weights)
        return SchemeOutcome(
            float(wsr), per_user, ao_result.iterations, projected, state.beamformers
        )
    raise ValueError(f"unknown scheme: {scheme}")


def run_experiment(spec: ExperimentSpec):
    """Run the full schemes x sweep values x trials grid.

    Returns (rows, summary): one ResultRow per cell element and a
    {(scheme, sweep_value): (mean, std)} summary of the wsr. Rows are
    sorted by (scheme, sweep value, seed); identical specs produce
    identical rows.
    """
    spec.validate()
    sweep_var = spec.sweep if spec.sweep is not None else ""
    rows: List[ResultRow] = []
    for scheme in spec.schemes:
        for value in spec.values:
            config, params = spec.apply_sweep(value)
            for trial in range(spec.trials):
                seed = spec.base.seed + trial
                trial_config = config.with_overrides(seed=seed)
                topology = generate_topology(trial_config)
                start = time.perf_counter()
                outcome = run_scheme(scheme, trial_config, topology, params)
                elapsed = time.perf_counter() - start if spec.timing else 0.0
                rows.append(
                    ResultRow(
                        scheme=scheme,
                        sweep_var=sweep_var,
                        sweep_value=float(value) if value is not None else 0.0,
                        seed=seed,
                        wsr=outcome.wsr,
                        rates=[float(r) for r in outcome.rates],
                        iters=int(outcome.iterations),
                        seconds=elapsed,
                    )
                )
    rows.sort(key=lambda r: (r.scheme, r.sweep_value, r.seed))
    return rows, summarize(rows)


def summarize(rows: Sequence[ResultRow]) -> Dict[tuple, Tuple[float, float]]:
    """Mean and standard deviation of the wsr per (scheme, sweep value)."""
    cells: Dict[tuple, List[float]] = {}
    for row in rows:
        cells.setdefault((row.scheme, row.sweep_value), []).append(row.wsr)
    return {
        key: (float(np.mean(vals)), float(np.std(vals))) for key, vals in sorted(cells.items())
    }


def _format_value(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.9f}"


def emit(rows: Sequence[ResultRow], fmt: str, path: str) -> None:
    """Write rows as CSV or JSON with deterministic formatting.

    CSV columns: scheme, sweep_var, sweep_value, seed, wsr,
    rate_1..rate_K, iters, seconds; floats carry nine decimals. JSON keeps
    exact float values so rows round-trip identically.
    """
    if fmt == "csv":
        n_rates = len(rows[0].rates) if rows else 0
        header = ["scheme", "sweep_var", "sweep_value", "seed", "wsr"]
        header += [f"rate_{i + 1}" for i in range(n_rates)]
        header += ["iters", "seconds"]
        lines = [",".join(header)]
        for row in rows:
            cells = [row.scheme, row.sweep_var, _format_value(row.sweep_value), str(row.seed)]
            cells.append(_format_value(row.wsr))
            cells += [_format_value(r) for r in row.rates]
            cells += [str(row.iters), _format_value(row.seconds)]
            lines.append(",".join(cells))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        text = json.dumps([row.to_json_dict() for row in rows], indent=1) + "\n"
    else:
        raise ValueError(f"unknown format: {fmt}")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


def convergence_trace(
    scheme: str, config: SceneConfig, params: AlgorithmParams
) -> List[Tuple[int, float, float, float]]:
    """Per-iteration (iteration, wsr, gap, step) rows for one run.

    For wmmse_ra the rows are the outer alternation iterates with the last
    inner Frank-Wolfe gap and stepsize; for disc_cem the best-so-far score
    per iteration (gap and step are zero). Both traces are nondecreasing
    in wsr.
    """
    topology = generate_topology(config)
    if scheme == "wmmse_ra":
        result = orient_fw.ao_solve(config, topology, params.ao)
        rows = []
        for i, record in enumerate(result.outer_trace, start=1):
            last = record.fw_trace[-1]
            rows.append((i, record.wsr, last.gap, last.step))
        return rows
    if scheme == "disc_cem":
        codebook = params.make_codebook(config.theta_max)
        cem_params = replace(params.cem, seed=config.seed)
        result = discrete.cem_solve(config, topology, codebook, cem_params)
        return [
            (i, value, 0.0, 0.0)
            for i, value in enumerate(result.best_trace[1:], start=1)
        ]
    raise ValueError("convergence traces support wmmse_ra and disc_cem")


def parse_spec_file(path: str) -> Dict[str, str]:
    """Read a flat key = value spec file; '#' starts a comment."""
    mapping: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            mapping[key.strip()] = value.strip()
    return mapping


_SCENE_INT_KEYS = {"K", "Q", "Mx", "My", "p", "seed"}
_SCENE_FLOAT_KEYS = {"wavelength", "d", "theta_max", "eta_q"}
_SCENE_LIST_KEYS = {"noise_dbm", "p_max_dbm", "alpha"}


def _parse_scalar_or_list(text: str):
    parts = [p for p in text.split(",") if p.strip()]
    values = [float(p) for p in parts]
    return values[0] if len(values) == 1 else values


def spec_from_mapping(mapping: Dict[str, str]) -> ExperimentSpec:
    """Build an ExperimentSpec from flat string key-value pairs."""
    mapping = dict(mapping)
    scene_kwargs = {}
    for key in _SCENE_INT_KEYS:
        if key in mapping:
            scene_kwargs[key] = int(float(mapping.pop(key)))
    for key in _SCENE_FLOAT_KEYS:
        if key in mapping:
            scene_kwargs[key] = float(mapping.pop(key))
    for key in _SCENE_LIST_KEYS:
        if key in mapping:
            scene_kwargs[key] = _parse_scalar_or_list(mapping.pop(key))
    base = SceneConfig(**scene_kwargs)

    params = AlgorithmParams()
    if "wmmse_tol" in mapping or "wmmse_max_sweeps" in mapping:
        params.wmmse = wmmse.WmmseParams(
            tol=float(mapping.pop("wmmse_tol", params.wmmse.tol)),
            max_sweeps=int(mapping.pop("wmmse_max_sweeps", params.wmmse.max_sweeps)),
        )
        params.ao = replace(params.ao, wmmse=params.wmmse)
    fw_keys = {
        "armijo_c": float,
        "backtrack": float,
        "min_step": float,
        "fw_tol": float,
        "fw_max_iter": int,
        "fd_step": float,
    }
    fw_updates = {}
    for key, cast in fw_keys.items():
        if key in mapping:
            target = key.replace("fw_", "") if key.startswith("fw_") else key
            fw_updates[target] = cast(mapping.pop(key))
    if fw_updates:
        params.fw = replace(params.fw, **fw_updates)
        params.ao = replace(params.ao, fw=params.fw)
    if "ao_tol" in mapping:
        params.ao = replace(params.ao, tol=float(mapping.pop("ao_tol")))
    if "ao_max_outer" in mapping:
        params.ao = replace(params.ao, max_outer=int(mapping.pop("ao_max_outer")))
    cem_updates = {}
    for key, cast in {
        "cem_samples": int,
        "cem_elite_frac": float,
        "cem_smoothing": float,
        "cem_max_iter": int,
    }.items():
        if key in mapping:
            cem_updates[key.replace("cem_", "")] = cast(mapping.pop(key))
    if cem_updates:
        params.cem = replace(params.cem, **cem_updates)
    if "codebook" in mapping:
        params.codebook_kind = mapping.pop("codebook")
    for key in ("n_dir", "n_theta", "n_phi"):
        if key in mapping:
            setattr(params, key, int(float(mapping.pop(key))))

    schemes = tuple(
        s.strip() for s in mapping.pop("scheme", "wmmse_ra").split(",") if s.strip()
    )
    sweep = mapping.pop("sweep", None)
    if sweep is not None and sweep.strip() == "":
        sweep = None
    values: Sequence = (None,)
    if "values" in mapping:
        values = [float(v) for v in mapping.pop("values").split(",") if v.strip()]
    trials = int(mapping.pop("trials", 20))
    timing = mapping.pop("timing", "false").lower() in ("1", "true", "yes")
    if mapping:
        raise ValueError(f"unknown spec keys: {sorted(mapping)}")
    return ExperimentSpec(
        schemes=schemes,
        sweep=sweep,
        values=values,
        trials=trials,
        base=base,
        params=params,
        timing=timing,
    )
