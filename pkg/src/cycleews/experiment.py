"""End-to-end experiment orchestration and file outputs.

Configuration is a flat key = value text file whose defaults reproduce
the benchmark protocol; every derived random stream hangs off the one
master_seed, so a whole experiment is a pure function of the resolved
configuration.  Data goes to files (CSV/JSON, round-trip exact),
progress and warnings to stderr, nothing nondeterministic into reports.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .base import require
from .classify import (Dataset, FeatureScaler, StratificationError, SvmHyperParams,
                       _svm_from, cross_validate, drop_column_importance,
                       pca_2d, permutation_importance, stratified_kfold)
from .events import (DetectorConfig, detect_jumps, label_breakdown,
                     truncate_at_onset, write_events_csv)
from .features import (FEATURE_NAMES, FeatureConfig, FeatureVector, circular_mean,
                       circular_std, cycle_stats, extract_features, jump_phases)
from .geometry import (ConvergenceError, FOLD_FORCING_VALUE, diagnostics_record,
                       floquet_multiplier, jump_phase_decomposition)
from .rng import derive_seed
from .sim import (ConstantAmplitude, LinearRampAmplitude,
                  PiecewiseConstantAmplitude, SimConfig, Trajectory,
                  UniformSampler, iter_ensemble, run_seed_for, simulate,
                  write_trajectory_csv)

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    pass


def _float_list(text: str):
    return tuple(float(v) for v in str(text).split(","))


def _optional_float(text):
    if text is None or str(text).strip().lower() in ("", "auto", "none"):
        return None
    return float(text)


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment settings (defaults are the benchmark protocol)."""

    dt: float = 0.01
    t_total: float = 2500.0
    forcing_period: float = 225.0
    d_max: float = 1.2
    d_min_low: float = 0.25
    d_min_high: float = 0.9
    sigma: float = 0.3
    x0: float = 1.0
    master_seed: int = 2025
    n_runs: int = 1000
    x_up: float = 0.4
    x_low: float = -0.4
    n_min_steps: int = 80
    breakdown_factor: float = 0.75
    buffer_fraction: float = 0.05
    detrend_degree: int = 3
    phase_window: int = 16
    min_cycles: int = 5
    min_jumps: int = 5
    k_folds: int = 5
    svm_iterations: int = 10_000
    svm_step_size: float = 2.0
    svm_lambda: Optional[float] = None
    svm_tolerance: float = 1.0e-6
    svm_class_weight: Optional[str] = "balanced"
    permutation_repeats: int = 20
    batch_size: int = 128
    threads: int = 1
    out_dir: str = "out"
    figure_levels: tuple = (1.0, 0.9, 0.8, 0.72)
    figure_level_periods: int = 4
    figure_runs: int = 64
    figure_d_min: float = 0.25

    @property
    def omega(self) -> float:
        return TWO_PI / self.forcing_period

    def sim_config(self, schedule=None) -> SimConfig:
        if schedule is None:
            schedule = LinearRampAmplitude(self.d_max, self.d_min_low)
        return SimConfig(dt=self.dt, t_total=self.t_total, omega=self.omega,
                         amplitude_schedule=schedule, sigma=self.sigma, x0=self.x0,
                         master_seed=self.master_seed)

    def detector(self) -> DetectorConfig:
        return DetectorConfig(x_up=self.x_up, x_low=self.x_low, n_min=self.n_min_steps,
                              breakdown_factor=self.breakdown_factor)

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(p_buf=self.buffer_fraction, detrend_degree=self.detrend_degree,
                             window_w=self.phase_window, min_cycles=self.min_cycles,
                             min_jumps=self.min_jumps)

    def d_min_sampler(self) -> UniformSampler:
        return UniformSampler(self.d_min_low, self.d_min_high)

    def svm_hyperparams(self) -> SvmHyperParams:
        return SvmHyperParams(lambda_reg=self.svm_lambda, n_iter=self.svm_iterations,
                              eta0=self.svm_step_size, tol=self.svm_tolerance,
                              seed=derive_seed(self.master_seed, "svm"),
                              class_weight=self.svm_class_weight)

    # execution details with no effect on results; kept out of provenance
    EXECUTION_FIELDS = ("out_dir", "threads", "batch_size")

    def canonical_text(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            if f.name in self.EXECUTION_FIELDS:
                continue
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(f"{v:.17g}" for v in value)
            elif isinstance(value, float):
                value = f"{value:.17g}"
            elif value is None:
                value = "auto"
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()


_PARSERS = {
    "dt": float, "t_total": float, "forcing_period": float, "d_max": float,
    "d_min_low": float, "d_min_high": float, "sigma": float, "x0": float,
    "master_seed": int, "n_runs": int, "x_up": float, "x_low": float,
    "n_min_steps": int, "breakdown_factor": float, "buffer_fraction": float,
    "detrend_degree": int, "phase_window": int, "min_cycles": int, "min_jumps": int,
    "k_folds": int, "svm_iterations": int, "svm_step_size": float,
    "svm_lambda": _optional_float, "svm_tolerance": float,
    "svm_class_weight": lambda v: None if str(v).strip().lower() == "none" else str(v),
    "permutation_repeats": int,
    "batch_size": int, "threads": int, "out_dir": str,
    "figure_levels": _float_list, "figure_level_periods": int, "figure_runs": int,
    "figure_d_min": float,
}


def parse_config_text(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    try:
        return _validated(ExperimentConfig(**values))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _validated(config: ExperimentConfig) -> ExperimentConfig:
    config.sim_config()
    config.detector()
    config.feature_config()
    config.d_min_sampler()
    return config


def load_config(path=None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Config from file (or defaults), then keyword overrides, then validation."""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        config = parse_config_text(text)
    else:
        config = ExperimentConfig()
    if overrides:
        clean = {k: v for k, v in overrides.items() if v is not None}
        try:
            config = replace(config, **clean)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    try:
        return _validated(config)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _log(message: str) -> None:
    print(message, file=sys.stderr)


# --------------------------------------------------------------------------
# per-run pipeline
# --------------------------------------------------------------------------

@dataclass
class RunRecord:
    run_id: int
    seed: int
    d_min: Optional[float]
    features: Optional[FeatureVector]
    error: Optional[str] = None


def segment_run(traj: Trajectory, det: DetectorConfig, t_f: float):
    """Detect, label, and truncate one trajectory; returns (full, truncated)."""
    segset = label_breakdown(detect_jumps(traj, det), t_f, det)
    return segset, truncate_at_onset(segset)


def run_feature_pipeline(config: ExperimentConfig) -> List[RunRecord]:
    """Simulate the ensemble and reduce every run to its feature record."""
    det = config.detector()
    fcfg = config.feature_config()
    t_f = config.forcing_period
    omega = config.omega

    def per_run(traj: Trajectory) -> FeatureVector:
        _, truncated = segment_run(traj, det, t_f)
        return extract_features(traj, truncated, fcfg, omega)

    records = []
    for res in iter_ensemble(config.sim_config(), config.n_runs, config.d_min_sampler(),
                             batch_size=config.batch_size, threads=config.threads,
                             on_divergence="flag", per_run=per_run):
        if res.error is not None:
            records.append(RunRecord(res.run_index, res.seed, res.d_min, None,
                                     error=str(res.error)))
        else:
            records.append(RunRecord(res.run_index, res.seed, res.d_min, res.value))
    return records


def write_features_csv(records: Sequence[RunRecord], path) -> None:
    with open(path, "w") as fh:
        fh.write("run_id,d_min,slope_var,slope_ac1,slope_jump_phase,slope_phase_std,"
                 "label,valid\n")
        for rec in records:
            fv = rec.features
            d_min = "" if rec.d_min is None else f"{rec.d_min:.17g}"
            if fv is None:
                fh.write(f"{rec.run_id},{d_min},nan,nan,nan,nan,0,0\n")
                continue
            slopes = ",".join(
                f"{v:.17g}" for v in (fv.slope_var, fv.slope_ac1,
                                      fv.slope_jump_phase, fv.slope_phase_std))
            fh.write(f"{rec.run_id},{d_min},{slopes},{int(fv.label)},{int(fv.valid)}\n")


def read_features_csv(path):
    """Rows of (run_id, d_min, slopes..., label, valid) from a features CSV."""
    rows = []
    with open(path) as fh:
        header = fh.readline()
        require(header.startswith("run_id,"), f"{path} is not a features CSV")
        for line in fh:
            parts = line.strip().split(",")
            rows.append({
                "run_id": int(parts[0]),
                "d_min": float(parts[1]) if parts[1] else None,
                "slopes": [float(v) for v in parts[2:6]],
                "label": bool(int(parts[6])),
                "valid": bool(int(parts[7])),
            })
    return rows


def dataset_from_records(records: Sequence[RunRecord]) -> Dataset:
    rows = [r for r in records if r.features is not None and r.features.valid]
    X = np.array([[r.features.slope_var, r.features.slope_ac1,
                   r.features.slope_jump_phase, r.features.slope_phase_std]
                  for r in rows], dtype=float).reshape(len(rows), 4)
    y = np.array([r.features.label for r in rows], dtype=bool)
    ids = np.array([r.run_id for r in rows], dtype=np.int64)
    return Dataset(X=X, y=y, run_ids=ids)


def exclusion_table(records: Sequence[RunRecord]) -> Dict[str, List[int]]:
    """Invalid runs partitioned by the first failing requirement."""
    table = {"divergence": [], "too_few_cycles": [], "too_few_jumps": []}
    for rec in records:
        if rec.error is not None:
            table["divergence"].append(rec.run_id)
        elif rec.features is not None and not rec.features.valid:
            table[rec.features.exclusion_reason].append(rec.run_id)
    return table


# --------------------------------------------------------------------------
# classification stage and report
# --------------------------------------------------------------------------

def classify_dataset(data: Dataset, config: ExperimentConfig) -> dict:
    """CV, importances, and the PCA projection for one dataset."""
    hp = config.svm_hyperparams()
    fold_seed = derive_seed(config.master_seed, "folds")
    importance_seed = derive_seed(config.master_seed, "importance")
    folds = stratified_kfold(data.y, config.k_folds, fold_seed)
    cv = cross_validate(data, config.k_folds, fold_seed, hp, folds=folds)
    drop = drop_column_importance(data, config.k_folds, fold_seed, hp, folds=folds)
    perm = permutation_importance(data, config.k_folds, importance_seed, hp,
                                  repeats=config.permutation_repeats, folds=folds)
    return {"cv": {"scores": cv.scores.tolist(), "mean": cv.mean},
            "drop_column": drop, "permutation": perm}


def pca_block(data: Dataset, config: ExperimentConfig, out_dir: Path,
              with_decision_line: bool) -> dict:
    scaler = FeatureScaler().fit(data.X)
    X_std = scaler.transform(data.X)
    coords, explained, components = pca_2d(X_std)
    coords_path = out_dir / "pca_coords.csv"
    with open(coords_path, "w") as fh:
        fh.write("run_id,pc1,pc2,label\n")
        for rid, (p1, p2), lab in zip(data.run_ids, coords, data.y):
            fh.write(f"{int(rid)},{p1:.17g},{p2:.17g},{int(lab)}\n")
    block = {"coords_path": coords_path.name,
             "explained_variance": explained.tolist()}
    if with_decision_line:
        model = _svm_from(config.svm_hyperparams()).fit(X_std, data.y)
        coef_pc = components @ model.coef_
        intercept = float(model.intercept_ + model.coef_ @ X_std.mean(axis=0))
        block["decision_line"] = {"coef_pc": coef_pc.tolist(), "intercept": intercept}
    return block


def write_report(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")


def run_experiment(config: ExperimentConfig) -> dict:
    """Full pipeline: ensemble, features, classification, importances, PCA."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _log(f"simulating {config.n_runs} runs "
         f"({config.n_runs * config.sim_config().n_steps} steps total)")
    records = run_feature_pipeline(config)
    write_features_csv(records, out_dir / "features.csv")

    data = dataset_from_records(records)
    n_break = int(data.y.sum())
    warnings = []
    report = {
        "provenance": {
            "package": "cycleews",
            "version": __version__,
            "master_seed": config.master_seed,
            "config_hash": config.config_hash(),
            "config": json.loads(json.dumps(
                {f.name: getattr(config, f.name) for f in fields(config)
                 if f.name not in config.EXECUTION_FIELDS},
                default=list)),
        },
        "n_runs": config.n_runs,
        "n_valid": data.n_samples,
        "class_counts": {"breakdown": n_break,
                         "no_breakdown": data.n_samples - n_break},
        "exclusions": exclusion_table(records),
        "features_path": "features.csv",
        "cv": None, "drop_column": None, "permutation": None, "pca": None,
        "warnings": warnings,
    }
    for run_id in report["exclusions"]["divergence"]:
        warnings.append(f"run {run_id} diverged and was excluded")

    classified = False
    if data.n_samples >= 2:
        try:
            results = classify_dataset(data, config)
            report.update(results)
            classified = True
        except StratificationError as exc:
            warnings.append(f"classification skipped: {exc}")
            _log(f"warning: classification skipped: {exc}")
        report["pca"] = pca_block(data, config, out_dir, with_decision_line=classified)
    else:
        warnings.append("classification skipped: fewer than 2 valid runs")
        _log("warning: classification skipped: fewer than 2 valid runs")

    write_report(report, out_dir / "report.json")
    _log(f"wrote {out_dir / 'report.json'}")
    return report


# --------------------------------------------------------------------------
# auxiliary feature exports (cycle and phase series)
# --------------------------------------------------------------------------

def run_features_command(config: ExperimentConfig) -> List[RunRecord]:
    """features.csv plus auxiliary per-run cycle and phase series CSVs."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    det = config.detector()
    fcfg = config.feature_config()
    t_f = config.forcing_period
    omega = config.omega

    def per_run(traj: Trajectory):
        _, truncated = segment_run(traj, det, t_f)
        fv = extract_features(traj, truncated, fcfg, omega)
        cycles = cycle_stats(truncated, traj, fcfg)
        phases = jump_phases(truncated, omega)
        return fv, cycles, phases

    records = []
    with open(out_dir / "cycles.csv", "w") as cyc, \
            open(out_dir / "phases.csv", "w") as pha:
        cyc.write("run_id,cycle_index,var,ac1,sample_count\n")
        pha.write("run_id,jump_ordinal,jump_index,phi,delta\n")
        for res in iter_ensemble(config.sim_config(), config.n_runs,
                                 config.d_min_sampler(), batch_size=config.batch_size,
                                 threads=config.threads, on_divergence="flag",
                                 per_run=per_run):
            if res.error is not None:
                records.append(RunRecord(res.run_index, res.seed, res.d_min, None,
                                         error=str(res.error)))
                continue
            fv, cycles, phases = res.value
            records.append(RunRecord(res.run_index, res.seed, res.d_min, fv))
            for c in cycles:
                cyc.write(f"{res.run_index},{c.cycle_index},{c.var:.17g},"
                          f"{c.ac1:.17g},{c.sample_count}\n")
            for j in range(phases.n_jumps):
                pha.write(f"{res.run_index},{j},{int(phases.jump_index[j])},"
                          f"{phases.phi[j]:.17g},{phases.delta[j]:.17g}\n")
    write_features_csv(records, out_dir / "features.csv")
    return records


def classify_from_csv(config: ExperimentConfig, features_path) -> dict:
    """Classification stage driven by a previously written features CSV."""
    rows = [r for r in read_features_csv(features_path) if r["valid"]]
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    X = np.array([r["slopes"] for r in rows], dtype=float).reshape(len(rows), 4)
    data = Dataset(X=X, y=np.array([r["label"] for r in rows], dtype=bool),
                   run_ids=np.array([r["run_id"] for r in rows], dtype=np.int64))
    report = {"n_valid": data.n_samples, "warnings": [],
              "cv": None, "drop_column": None, "permutation": None, "pca": None}
    classified = False
    try:
        report.update(classify_dataset(data, config))
        classified = True
    except StratificationError as exc:
        report["warnings"].append(f"classification skipped: {exc}")
        _log(f"warning: classification skipped: {exc}")
    report["pca"] = pca_block(data, config, out_dir, with_decision_line=classified)
    write_report(report, out_dir / "report.json")
    return report


# --------------------------------------------------------------------------
# figure protocols
# --------------------------------------------------------------------------

def _level_index(times, level_duration: float, n_levels: int) -> np.ndarray:
    idx = np.floor(np.asarray(times, dtype=float) / level_duration).astype(int)
    return np.clip(idx, 0, n_levels - 1)


def run_figures(config: ExperimentConfig) -> None:
    """Emit figure data: breakdown series, per-level trends, class splits, PCA."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    det = config.detector()
    fcfg = config.feature_config()
    t_f = config.forcing_period
    omega = config.omega

    # (a) single-run breakdown time series under a deep ramp
    ramp = LinearRampAmplitude(config.d_max, config.figure_d_min)
    onset_cfg = config.sim_config(schedule=ramp)
    seed = derive_seed(config.master_seed, "figure-breakdown")
    traj = simulate(onset_cfg, seed)
    segset, _ = segment_run(traj, det, t_f)
    write_trajectory_csv(traj, out_dir / "fig_breakdown_timeseries.csv")
    write_events_csv(segset, out_dir / "fig_breakdown_events.csv")
    onset_time = None
    if segset.breakdown_onset is not None:
        onset_time = float(segset.boundaries[segset.breakdown_onset] * segset.dt)
    write_report({"seed": seed, "d_min": config.figure_d_min,
                  "breakdown": segset.breakdown, "onset_time": onset_time},
                 out_dir / "fig_breakdown_meta.json")

    # (b, c) piecewise-constant level protocol
    level_duration = config.figure_level_periods * t_f
    levels = tuple(config.figure_levels)
    schedule = PiecewiseConstantAmplitude(levels, level_duration)
    t_total = level_duration * len(levels)
    piece_cfg = replace(config.sim_config(schedule=schedule), t_total=t_total,
                        master_seed=derive_seed(config.master_seed, "figure-levels"))

    def per_run(traj: Trajectory):
        segs = detect_jumps(traj, det)
        cycles = cycle_stats(segs, traj, fcfg)
        cycle_mid = [0.5 * (traj.t[segs.boundaries[2 * c.cycle_index]]
                            + traj.t[segs.boundaries[2 * c.cycle_index + 2]])
                     for c in cycles]
        phases = jump_phases(segs, omega)
        return cycles, cycle_mid, phases.delta, segs.jump_times

    level_cycles = {lv: {"var": [], "ac1": []} for lv in range(len(levels))}
    level_deltas = {lv: [] for lv in range(len(levels))}
    with open(out_dir / "fig_level_cycle_stats.csv", "w") as cyc, \
            open(out_dir / "fig_level_jump_phases.csv", "w") as pha:
        cyc.write("run_id,level,d_a,cycle_index,var,ac1\n")
        pha.write("run_id,level,d_a,jump_ordinal,delta\n")
        for res in iter_ensemble(piece_cfg, config.figure_runs,
                                 batch_size=config.batch_size,
                                 threads=config.threads, per_run=per_run):
            cycles, mids, deltas, jump_times = res.value
            for c, mid in zip(cycles, mids):
                lv = int(_level_index(mid, level_duration, len(levels)))
                level_cycles[lv]["var"].append(c.var)
                level_cycles[lv]["ac1"].append(c.ac1)
                cyc.write(f"{res.run_index},{lv},{levels[lv]:.17g},"
                          f"{c.cycle_index},{c.var:.17g},{c.ac1:.17g}\n")
            jl = _level_index(jump_times, level_duration, len(levels))
            for j, (lv, delta) in enumerate(zip(jl, deltas)):
                level_deltas[int(lv)].append(float(delta))
                pha.write(f"{res.run_index},{int(lv)},{levels[int(lv)]:.17g},"
                          f"{j},{delta:.17g}\n")
    with open(out_dir / "fig_level_cycle_means.csv", "w") as fh:
        fh.write("level,d_a,mean_var,mean_ac1,n_cycles\n")
        for lv, stats in level_cycles.items():
            if not stats["var"]:
                continue
            fh.write(f"{lv},{levels[lv]:.17g},{np.mean(stats['var']):.17g},"
                     f"{np.mean(stats['ac1']):.17g},{len(stats['var'])}\n")
    with open(out_dir / "fig_level_phase_stats.csv", "w") as fh:
        fh.write("level,d_a,circ_mean,circ_std,n_jumps\n")
        for lv, deltas in level_deltas.items():
            if not deltas:
                continue
            fh.write(f"{lv},{levels[lv]:.17g},{circular_mean(deltas):.17g},"
                     f"{circular_std(deltas):.17g},{len(deltas)}\n")

    # (d, e) class-conditional feature distributions and PCA scatter
    records = run_feature_pipeline(config)
    write_features_csv(records, out_dir / "features.csv")
    data = dataset_from_records(records)
    with open(out_dir / "fig_class_distributions.csv", "w") as fh:
        fh.write("feature,label,run_id,value\n")
        for j, name in enumerate(FEATURE_NAMES):
            for rid, value, lab in zip(data.run_ids, data.X[:, j], data.y):
                fh.write(f"{name},{int(lab)},{int(rid)},{value:.17g}\n")
    if data.n_samples >= 2:
        with_line = bool(data.y.any() and (~data.y).any())
        block = pca_block(data, config, out_dir, with_decision_line=with_line)
        write_report(block, out_dir / "fig_pca_meta.json")
    _log(f"figure data written to {out_dir}")


# --------------------------------------------------------------------------
# geometry diagnostics
# --------------------------------------------------------------------------

def measured_delay_phase(d_a: float, omega: float, *, dt: float = 0.01,
                         x0: float = 1.0, det: Optional[DetectorConfig] = None,
                         transient_periods: int = 3, measure_periods: int = 2
                         ) -> Optional[float]:
    """Mean deterministic post-fold delay phase, measured from detected jumps.

    Simulates the noise-free system at constant amplitude, discards the
    transient periods, and averages the fold-to-jump phase over the
    remaining jumps.  None when no fold exists or no jump is observed.
    """
    if d_a <= FOLD_FORCING_VALUE:
        return None
    det = det or DetectorConfig()
    t_f = TWO_PI / omega
    n_periods = transient_periods + measure_periods
    steps_period = round(t_f / dt)
    config = SimConfig(dt=dt, t_total=n_periods * steps_period * dt, omega=omega,
                       amplitude_schedule=ConstantAmplitude(d_a), sigma=0.0, x0=x0)
    traj = simulate(config, run_seed=0)
    segset = detect_jumps(traj, det)
    t_min = transient_periods * t_f
    delays = [jump_phase_decomposition(t_j, d_a, omega).phi_delay
              for t_j in segset.jump_times if t_j >= t_min]
    if not delays:
        return None
    return float(np.mean(delays))


def run_diagnose(config: ExperimentConfig, d_a_values: Sequence[float],
                 periods: Sequence[float]) -> List[dict]:
    """Fold info, sweep rate, log Floquet multiplier, and measured delay per grid point."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for d_a in d_a_values:
        for period in periods:
            omega = TWO_PI / period
            log_mu = None
            if d_a > FOLD_FORCING_VALUE:
                sim_cfg = SimConfig(dt=config.dt, t_total=period, omega=omega,
                                    amplitude_schedule=ConstantAmplitude(d_a),
                                    sigma=0.0, x0=config.x0)
                try:
                    log_mu = floquet_multiplier(sim_cfg).log_multiplier
                except ConvergenceError:
                    log_mu = None
            row = diagnostics_record(d_a, omega, log_floquet=log_mu)
            row["forcing_period"] = period
            row["measured_delay_phase"] = measured_delay_phase(
                d_a, omega, dt=config.dt, x0=config.x0, det=config.detector())
            rows.append(row)
    write_report({"rows": rows}, out_dir / "diagnostics.json")
    _log(f"wrote {out_dir / 'diagnostics.json'}")
    return rows


def simulate_one(config: ExperimentConfig, run_index: int = 0,
                 run_seed: Optional[int] = None) -> Trajectory:
    """One ensemble member (ramp d_min drawn exactly as the ensemble would)."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = run_seed if run_seed is not None else run_seed_for(config.master_seed, run_index)
    from .sim import draw_d_min
    d_min = draw_d_min(seed, config.d_min_sampler())
    sched = LinearRampAmplitude(config.d_max, d_min)
    traj = simulate(config.sim_config(schedule=sched), seed)
    write_trajectory_csv(traj, out_dir / "trajectory.csv")
    segset, _ = segment_run(traj, config.detector(), config.forcing_period)
    write_events_csv(segset, out_dir / "events.csv")
    _log(f"wrote {out_dir / 'trajectory.csv'} (seed {seed}, d_min {d_min:.6g})")
    return traj
