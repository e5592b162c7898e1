"""Monte Carlo campaigns comparing Tyler's estimator with its error bounds.

A campaign sweeps either ``n`` (fixed ``p``) or ``p`` (fixed ``n``).  At
each grid point it runs ``trials`` independent trials, trial ``k`` drawing
from stream ``(master_seed, k)``, and records ``||T^-1 - theta0^-1||_F``
for Tyler's estimator and the raw-data SCM baseline.  Results are sorted
by ``(grid value, trial)`` before writing, so output bytes do not depend
on the number of workers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from .bounds import BoundQuery, optimize_bound
from .estimator import SolverConfig, scm_estimate, tyler_estimate
from .exceptions import NotEnoughSamples, NumericalError, ValidationError
from .sampling import SeededStream, sample
from .shape import ShapeMatrix, format_float, frobenius_distance_of_inverses, parse_shape_spec, sphericity

log = logging.getLogger(__name__)

DEFAULT_CONFIDENCES = (0.95, 0.5)


def parse_grid(text: str) -> list[int]:
    """``start:stop:step`` (stop inclusive) or a comma list of integers."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [int(v) for v in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            start, stop, step = parts
            if step <= 0 or stop < start:
                raise ValueError
            vals = list(range(start, stop + 1, step))
        else:
            vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"bad grid {text!r}; expected start:stop:step or a comma list") from None
    if not vals:
        raise ValidationError(f"grid {text!r} is empty")
    return vals


@dataclass(frozen=True)
class ExperimentConfig:
    """One campaign.  Exactly one of ``n_grid`` / ``p_grid`` is set; the
    other axis is the scalar ``p`` or ``n``."""

    model: str = "acg"
    shape: str = "identity"
    p: Optional[int] = None
    n: Optional[int] = None
    n_grid: tuple = ()
    p_grid: tuple = ()
    trials: int = 200
    master_seed: int = 0
    confidences: tuple = DEFAULT_CONFIDENCES
    tol: float = 1e-12
    max_iter: int = 1000
    trace_target: Optional[float] = None
    texture_dof: float = 1.0
    n_jobs: int = 1

    def __post_init__(self):
        if self.model not in ("acg", "compound-gaussian"):
            raise ValidationError(f"model must be acg or compound-gaussian, got {self.model!r}")
        if bool(self.n_grid) == bool(self.p_grid):
            raise ValidationError("give exactly one of n_grid or p_grid")
        if self.n_grid and self.p is None:
            raise ValidationError("an n grid needs p")
        if self.p_grid and self.n is None:
            raise ValidationError("a p grid needs n")
        if self.trials < 1:
            raise ValidationError("trials must be at least 1")
        for c in self.confidences:
            if not 0 < c < 1:
                raise ValidationError(f"confidence {c} outside (0, 1)")
        for n, p in self.points():
            if n <= p:
                raise NotEnoughSamples(f"grid point n={n}, p={p} violates n > p")
        SolverConfig(self.tol, self.max_iter, self.trace_target)

    @property
    def axis(self) -> str:
        return "n" if self.n_grid else "p"

    def points(self) -> list[tuple[int, int]]:
        if self.n_grid:
            return [(int(n), int(self.p)) for n in self.n_grid]
        return [(int(self.n), int(p)) for p in self.p_grid]

    def shape_for(self, p: int) -> ShapeMatrix:
        return parse_shape_spec(self.shape, p)


@dataclass(frozen=True)
class TrialRecord:
    grid_value: int
    n: int
    p: int
    trial: int
    error: float
    scm_error: float
    iterations: int
    converged: bool
    master_seed: int
    stream_index: int


TRIAL_COLUMNS = (
    "grid_value", "n", "p", "trial", "error", "scm_error", "iterations", "converged", "master_seed", "stream_index",
)


def run_trial(config: ExperimentConfig, n: int, p: int, trial: int, shape: Optional[ShapeMatrix] = None) -> TrialRecord:
    """One trial, reproducible from ``(config, n, p, trial)`` alone."""
    shape = config.shape_for(p) if shape is None else shape
    stream = SeededStream(config.master_seed, trial)
    data = sample(config.model, shape, n, stream, texture_dof=config.texture_dof)
    target = float(np.sum(1.0 / shape.eigvals)) if config.trace_target is None else config.trace_target
    grid_value = n if config.axis == "n" else p
    try:
        res = tyler_estimate(data, SolverConfig(config.tol, config.max_iter, target))
        err, iters, ok = frobenius_distance_of_inverses(res.T, shape), res.iterations, True
    except NumericalError as exc:
        residuals = getattr(exc, "residuals", [])
        err, iters, ok = math.nan, len(residuals), False
    try:
        scm_err = frobenius_distance_of_inverses(scm_estimate(data, target), shape)
    except NumericalError:
        scm_err = math.nan
    return TrialRecord(grid_value, n, p, trial, err, scm_err, iters, ok, config.master_seed, trial)


def nearest_rank(values, q: float) -> float:
    """Nearest-rank quantile: the ``ceil(q N)``-th smallest value."""
    xs = sorted(values)
    if not xs:
        return math.nan
    k = max(1, math.ceil(q * len(xs) - 1e-12))
    return xs[k - 1]


def median(values) -> float:
    return nearest_rank(values, 0.5)


@dataclass
class SummaryRow:
    grid_value: int
    n: int
    p: int
    trials: int
    converged: int
    median: float
    quantiles: dict
    scm_median: float
    bounds: dict


def summarize(config: ExperimentConfig, records: list[TrialRecord]) -> list[SummaryRow]:
    rows = []
    for n, p in config.points():
        gv = n if config.axis == "n" else p
        recs = [r for r in records if r.grid_value == gv]
        errs = [r.error for r in recs if r.converged]
        scm = [r.scm_error for r in recs if not math.isnan(r.scm_error)]
        stats = sphericity(config.shape_for(p))
        bounds = {}
        for c in config.confidences:
            b = optimize_bound(BoundQuery(n, p, stats.cos_phi0, stats.lambda_min, c))
            bounds[c] = b.radius if b.feasible else None
        rows.append(
            SummaryRow(
                grid_value=gv,
                n=n,
                p=p,
                trials=len(recs),
                converged=len(errs),
                median=median(errs),
                quantiles={c: nearest_rank(errs, c) for c in config.confidences},
                scm_median=median(scm),
                bounds=bounds,
            )
        )
    return rows


@dataclass
class CampaignResult:
    config: ExperimentConfig
    records: list
    summary: list
    header: list = field(default_factory=list)


def run_campaign(config: ExperimentConfig, header: Optional[list] = None) -> CampaignResult:
    """Run every trial of every grid point; per-trial failures are recorded, not raised."""
    jobs = []
    for n, p in config.points():
        shape = config.shape_for(p)
        jobs.extend((n, p, k, shape) for k in range(config.trials))
    log.info("running %d trials on %d worker(s)", len(jobs), config.n_jobs)
    if config.n_jobs == 1:
        records = [run_trial(config, n, p, k, s) for n, p, k, s in jobs]
    else:
        records = Parallel(n_jobs=config.n_jobs)(delayed(run_trial)(config, n, p, k, s) for n, p, k, s in jobs)
    records.sort(key=lambda r: (r.grid_value, r.trial))
    return CampaignResult(config, records, summarize(config, records), list(header or []))


# -- output -----------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def _conf_label(c: float) -> str:
    return format(c, "g")


def summary_columns(config: ExperimentConfig) -> list[str]:
    cols = ["x", "n", "p", "trials", "converged", "median"]
    cols += [f"q_{_conf_label(c)}" for c in config.confidences]
    cols += ["scm_median"]
    cols += [f"bound_{_conf_label(c)}" for c in config.confidences]
    return cols


def config_header(config: ExperimentConfig) -> list[str]:
    grid = config.n_grid or config.p_grid
    return [
        f"model={config.model}",
        f"shape={config.shape}",
        f"axis={config.axis}",
        f"grid={','.join(str(v) for v in grid)}",
        f"fixed_{'p' if config.axis == 'n' else 'n'}={config.p if config.axis == 'n' else config.n}",
        f"trials={config.trials}",
        f"seed={config.master_seed}",
        f"confidences={','.join(_conf_label(c) for c in config.confidences)}",
        f"tol={config.tol!r}",
        f"max_iter={config.max_iter}",
        "quantile_rule=nearest-rank over converged trials",
        "error=frobenius norm of inverse(T) - inverse(theta0)",
    ]


def write_trials_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(TRIAL_COLUMNS) + "\n")
        for r in records:
            fh.write(",".join(_fmt(getattr(r, c)) for c in TRIAL_COLUMNS) + "\n")


def write_summary_csv(path, result: CampaignResult) -> None:
    cfg = result.config
    with open(path, "w", newline="") as fh:
        for line in config_header(cfg) + result.header:
            fh.write(f"# {line}\n")
        fh.write(",".join(summary_columns(cfg)) + "\n")
        for s in result.summary:
            vals = [s.grid_value, s.n, s.p, s.trials, s.converged, s.median]
            vals += [s.quantiles[c] for c in cfg.confidences]
            vals += [s.scm_median]
            vals += [s.bounds[c] for c in cfg.confidences]
            fh.write(",".join(_fmt(v) for v in vals) + "\n")


def write_campaign(out_dir, result: CampaignResult, stem: str = "") -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = f"{stem}_" if stem else ""
    trials_path = out / f"{prefix}trials.csv"
    summary_path = out / f"{prefix}summary.csv"
    write_trials_csv(trials_path, result.records)
    write_summary_csv(summary_path, result)
    return trials_path, summary_path


def read_summary_csv(path) -> tuple[list[str], list[dict]]:
    """Parse a summary CSV back into header comments and row dicts (floats or None)."""
    header, rows, cols = [], [], None
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                header.append(line[1:].strip())
            elif cols is None:
                cols = line.split(",")
            elif line:
                rows.append({c: (float(v) if v else None) for c, v in zip(cols, line.split(","))})
    return header, rows


# -- figure presets -----------------------------------------------------------------

FIG1_P = 50
FIG1_N_STOP = 30000
FIG1_POINTS = 7
FIG2_N = 2500
FIG2_P_GRID = tuple(range(5, 51, 5))


def first_feasible_n(p: int, confidence: float = 0.95, start: int = 500, step: int = 500, stop: int = 10**6,
                     cos_phi0: float = 1.0, lambda_min: float = 1.0) -> tuple[int, list[int]]:
    """Scan ``n`` upward in ``step`` increments until the bound is feasible.

    Returns the first feasible ``n`` and the list of values scanned.
    """
    scanned = []
    n = max(start, p + 1)
    while n <= stop:
        scanned.append(n)
        if optimize_bound(BoundQuery(n, p, cos_phi0, lambda_min, confidence)).feasible:
            return n, scanned
        n += step
    raise ValidationError(f"no feasible n up to {stop}")


def fig1_config(trials: int = 200, master_seed: int = 0, n_jobs: int = 1, **overrides) -> tuple[ExperimentConfig, list]:
    """``p = 50``, identity shape, ``n`` from the first feasible 0.95 bound up to 30000."""
    n0, scanned = first_feasible_n(FIG1_P, 0.95)
    step = max(500, int(math.ceil((FIG1_N_STOP - n0) / (FIG1_POINTS - 1) / 500.0)) * 500)
    grid = tuple(range(n0, FIG1_N_STOP + 1, step))
    if grid[-1] != FIG1_N_STOP:
        grid = grid + (FIG1_N_STOP,)
    cfg = ExperimentConfig(model="acg", shape="identity", p=FIG1_P, n_grid=grid, trials=trials,
                           master_seed=master_seed, n_jobs=n_jobs)
    cfg = replace(cfg, **overrides) if overrides else cfg
    header = [
        "preset=fig1",
        f"feasibility_scan=n from {scanned[0]} step 500; first feasible 0.95 bound at n={n0}",
        f"scanned={','.join(str(v) for v in scanned)}",
    ]
    return cfg, header


def fig2_config(trials: int = 200, master_seed: int = 0, n_jobs: int = 1, **overrides) -> tuple[ExperimentConfig, list]:
    """``n = 2500``, identity shape, ``p`` in 5, 10, ..., 50."""
    cfg = ExperimentConfig(model="acg", shape="identity", n=FIG2_N, p_grid=FIG2_P_GRID, trials=trials,
                           master_seed=master_seed, n_jobs=n_jobs)
    cfg = replace(cfg, **overrides) if overrides else cfg
    return cfg, ["preset=fig2"]
