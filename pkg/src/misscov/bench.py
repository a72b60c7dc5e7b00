"""Monte Carlo sweeps, CSV output and convergence-rate fits."""
import csv
import io
import logging
import math
import time
from dataclasses import astuple, dataclass, fields
from multiprocessing import get_context
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import datagen
from .config import ExperimentConfig
from .linalg import operator_norm
from .params import estimate_p
from .pipeline import (
    EstimatorConfig,
    baseline_inverse_weighted,
    baseline_sample_second_moment,
    estimate_covariance,
)
from .rng import trial_seed

__all__ = [
    "TrialRecord",
    "RateFit",
    "run_sweep",
    "run_trial",
    "fit_rate",
    "records_to_csv",
    "read_records",
    "summarize",
    "summary_to_csv",
    "FAILED",
]

log = logging.getLogger(__name__)

FAILED = "FAILED"
NAN = float("nan")


@dataclass(frozen=True)
class TrialRecord:
    estimator_tag: str
    d: int
    p: float
    N: int
    trial_index: int
    seed: int
    error_opnorm: float
    p_hat: float = NAN
    trace_hat: float = NAN
    opnorm_hat: float = NAN
    lambda1: float = NAN
    lambda2: float = NAN
    gate_satisfied: object = None
    wall_time: float = NAN

    @property
    def failed(self):
        return math.isnan(self.error_opnorm)


CSV_COLUMNS = tuple(f.name for f in fields(TrialRecord))


def _run_estimator(tag, sample, spec, cfg, seed):
    s = spec.summary
    if tag == "full" or tag == "oracle":
        extra = {}
        if tag == "oracle":
            extra = dict(mode="oracle", oracle_p=sample.true_p, oracle_trace=s.trace,
                         oracle_opnorm=s.operator_norm)
        est_cfg = EstimatorConfig(
            delta=cfg.delta,
            kappa=cfg.effective_kappa,
            net_extra_random=cfg.net_extra_random,
            opnorm_constants=cfg.opnorm_constants,
            psd_project=cfg.psd_project,
            gate_constant=cfg.gate_constant,
            seed=seed,
            **extra,
        )
        rep = estimate_covariance(sample, est_cfg, truth=spec)
        return dict(error_opnorm=rep.error_opnorm, p_hat=rep.p_hat, trace_hat=rep.trace_hat,
                    opnorm_hat=rep.opnorm_hat, lambda1=rep.lambda1, lambda2=rep.lambda2,
                    gate_satisfied=rep.gate_satisfied)
    if tag == "sample":
        est = baseline_sample_second_moment(sample)
        return dict(error_opnorm=operator_norm(est - spec.sigma))
    if tag == "inverse_weighted":
        p_hat = estimate_p(sample, cfg.delta)
        est = baseline_inverse_weighted(sample, p_hat)
        return dict(error_opnorm=operator_norm(est - spec.sigma), p_hat=p_hat)
    raise ValueError(f"unknown estimator {tag!r}")


def run_trial(cfg, spec, p, n, trial):
    """All requested estimators on one dataset; never raises for estimator failures."""
    seed = trial_seed(cfg.master_seed, p, n, trial)
    x = datagen.sample(spec, n, seed, cfg.dist, cfg.dof)
    sample = datagen.sparsify(x, p, seed, datagen.dist_tag(cfg.dist, cfg.dof))
    out = []
    for tag in cfg.estimators:
        start = time.perf_counter()
        try:
            vals = _run_estimator(tag, sample, spec, cfg, seed)
        except Exception as exc:  # recorded, never aborts the sweep
            log.warning("trial failed: %s p=%r N=%d trial=%d: %s", tag, p, n, trial, exc)
            vals = dict(error_opnorm=NAN)
        out.append(TrialRecord(tag, cfg.d, p, n, trial, seed,
                               wall_time=time.perf_counter() - start, **vals))
    return out


_WORKER_STATE = {}


def _init_worker(cfg):
    _WORKER_STATE["cfg"] = cfg
    _WORKER_STATE["spec"] = datagen.build_covariance(cfg.d, cfg.spectrum, cfg.rotation_seed)


def _worker_job(job):
    p, n, trial = job
    return run_trial(_WORKER_STATE["cfg"], _WORKER_STATE["spec"], p, n, trial)


def run_sweep(cfg: ExperimentConfig, workers=None):
    """Every estimator on every ``(p, N, trial)`` cell.

    Output order is ``(estimator, p, N, trial)`` following the config lists,
    independent of the worker count.
    """
    workers = cfg.workers if workers is None else workers
    jobs = [(p, n, t) for p in cfg.p_values for n in cfg.N_values for t in range(cfg.trials)]
    if workers <= 1:
        _init_worker(cfg)
        results = [_worker_job(job) for job in jobs]
    else:
        with get_context("fork").Pool(workers, initializer=_init_worker, initargs=(cfg,)) as pool:
            results = pool.map(_worker_job, jobs, chunksize=1)
    records = [rec for batch in results for rec in batch]
    est_idx = {tag: i for i, tag in enumerate(cfg.estimators)}
    p_idx = {p: i for i, p in enumerate(cfg.p_values)}
    n_idx = {n: i for i, n in enumerate(cfg.N_values)}
    records.sort(key=lambda r: (est_idx[r.estimator_tag], p_idx[r.p], n_idx[r.N], r.trial_index))
    return records


def _fmt(value, timing=True):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records, path=None, record_timing=False):
    """CSV with one column per :class:`TrialRecord` field, in field order.

    Failed trials carry ``FAILED`` in ``error_opnorm``. ``wall_time`` is left
    empty unless ``record_timing`` (timings would break byte-identical reruns).
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        row = []
        for name, value in zip(CSV_COLUMNS, astuple(rec)):
            if name == "error_opnorm" and math.isnan(value):
                row.append(FAILED)
            elif name == "wall_time" and not record_timing:
                row.append("")
            else:
                row.append(_fmt(value))
        writer.writerow(row)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _parse_float(s):
    return NAN if s in ("", FAILED) else float(s)


def read_records(path_or_text):
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    out = []
    for row in reader:
        gate = row["gate_satisfied"]
        out.append(TrialRecord(
            estimator_tag=row["estimator_tag"],
            d=int(row["d"]),
            p=float(row["p"]),
            N=int(row["N"]),
            trial_index=int(row["trial_index"]),
            seed=int(row["seed"]),
            error_opnorm=_parse_float(row["error_opnorm"]),
            p_hat=_parse_float(row["p_hat"]),
            trace_hat=_parse_float(row["trace_hat"]),
            opnorm_hat=_parse_float(row["opnorm_hat"]),
            lambda1=_parse_float(row["lambda1"]),
            lambda2=_parse_float(row["lambda2"]),
            gate_satisfied=None if gate == "" else gate == "true",
            wall_time=_parse_float(row["wall_time"]),
        ))
    return out


SUMMARY_COLUMNS = ("estimator_tag", "p", "N", "trials", "failures", "q50", "q90", "q95")


def summarize(records):
    """Per ``(estimator, p, N)`` cell: trial and failure counts and error quantiles."""
    cells = {}
    for rec in records:
        cells.setdefault((rec.estimator_tag, rec.p, rec.N), []).append(rec)
    rows = []
    for (tag, p, n), recs in cells.items():
        errs = np.array([r.error_opnorm for r in recs if not r.failed])
        q = np.quantile(errs, [0.5, 0.9, 0.95]) if errs.size else [NAN] * 3
        rows.append((tag, p, n, len(recs), len(recs) - errs.size, *map(float, q)))
    return rows


def summary_to_csv(records, path=None):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for row in summarize(records):
        writer.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


class RateFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float
    points: int
    failures: int


def fit_rate(records, x_axis, estimator_tag):
    """Least-squares fit of ``ln(median error)`` against ``ln(x)``.

    ``x_axis`` is ``"N"`` or ``"p"``; the other axis must be constant across
    the selected records. Failed trials are excluded from the medians and
    counted in ``failures``.
    """
    if x_axis not in ("N", "p"):
        raise ValueError("x_axis must be 'N' or 'p'")
    other = "p" if x_axis == "N" else "N"
    recs = [r for r in records if r.estimator_tag == estimator_tag]
    if not recs:
        raise ValueError(f"no records for estimator {estimator_tag!r}")
    if len({getattr(r, other) for r in recs}) > 1:
        raise ValueError(f"records vary in {other}; filter to a single {other} first")
    groups = {}
    failures = 0
    for r in recs:
        if r.failed:
            failures += 1
            continue
        groups.setdefault(getattr(r, x_axis), []).append(r.error_opnorm)
    if len(groups) < 3:
        raise ValueError(f"degenerate x range: need >= 3 distinct {x_axis} values, got {len(groups)}")
    xs = np.log(np.array(sorted(groups), dtype=float))
    meds = np.array([np.median(groups[k]) for k in sorted(groups)])
    if np.any(meds <= 0):
        raise ValueError("median errors must be positive for a log fit")
    ys = np.log(meds)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return RateFit(float(slope), float(intercept), r2, len(groups), failures)
