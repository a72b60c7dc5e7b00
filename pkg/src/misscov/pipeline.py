"""End-to-end estimator: split the sample in four, estimate p, the trace and
the operator norm on the first three quarters, then run the oracle estimator
on the last quarter with the plug-in values. Also the two classical baselines.
"""
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._backend import BACKEND
from .datagen import CovarianceSpec, gaussian_kappa
from .linalg import SymmetricMatrix, format_matrix, operator_norm, parse_matrix, psd_project
from .net import build_net
from .params import OpNormConstants, estimate_opnorm, estimate_p, estimate_trace, pick_lambdas
from .quadform import (
    DIAGONAL,
    OFFDIAGONAL,
    as_rows,
    fit_diagonal,
    fit_offdiagonal,
    truncated_form,
)

__all__ = [
    "EstimatorConfig",
    "EstimatorReport",
    "EstimationError",
    "estimate_covariance",
    "baseline_sample_second_moment",
    "baseline_inverse_weighted",
    "format_report",
    "parse_report",
]

MIN_SAMPLES = 8


class EstimationError(RuntimeError):
    """A pipeline stage failed. ``stage`` is one of p, trace, opnorm, oracle."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class EstimatorConfig:
    """Settings for :func:`estimate_covariance`.

    ``mode="oracle"`` skips the split and uses ``oracle_p``, ``oracle_trace``
    and ``oracle_opnorm`` on the full sample. ``seed`` keys the direction net
    and the random direction of the operator-norm search.
    """

    delta: float = 0.1
    kappa: float = field(default_factory=gaussian_kappa)
    net_extra_random: Optional[int] = None
    opnorm_constants: OpNormConstants = field(default_factory=OpNormConstants)
    psd_project: bool = False
    mode: str = "full"
    oracle_p: Optional[float] = None
    oracle_trace: Optional[float] = None
    oracle_opnorm: Optional[float] = None
    gate_constant: float = 1.0
    seed: int = 0
    fit_method: str = "lp"

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.kappa >= 1.0:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")
        if not self.gate_constant > 0:
            raise ValueError("gate_constant must be positive")
        if self.mode not in ("full", "oracle"):
            raise ValueError(f"mode must be 'full' or 'oracle', got {self.mode!r}")
        if self.mode == "oracle":
            if None in (self.oracle_p, self.oracle_trace, self.oracle_opnorm):
                raise ValueError("oracle mode needs oracle_p, oracle_trace and oracle_opnorm")
            if not 0.0 < self.oracle_p <= 1.0:
                raise ValueError("oracle_p must lie in (0, 1]")


@dataclass
class EstimatorReport:
    sigma_hat: SymmetricMatrix
    p_hat: float
    trace_hat: float
    opnorm_hat: float
    lambda1: float
    lambda2: float
    split_sizes: tuple
    gate_satisfied: bool
    mode: str = "full"
    error_opnorm: Optional[float] = None
    wall_time: float = 0.0
    fit_objectives: tuple = (float("nan"), float("nan"))


def _truth_matrix(truth):
    if truth is None:
        return None
    if isinstance(truth, CovarianceSpec):
        return truth.sigma
    if isinstance(truth, SymmetricMatrix):
        return truth
    return SymmetricMatrix.from_dense(truth)


def estimate_covariance(y, config=None, truth=None, net=None):
    """Run the estimator on ``y`` (a ``MaskedSample`` or an ``(N, d)`` array).

    Quarters are contiguous in row order, so row order is part of the input.
    ``truth`` (a ``CovarianceSpec`` or matrix) fills ``error_opnorm``. The
    sample-size gate ``|Q4| >= C (r_hat + ln 1/delta) / p_hat^2`` is reported,
    not enforced.
    """
    config = config or EstimatorConfig()
    start = time.perf_counter()
    rows = as_rows(y)
    n, d = rows.shape
    if net is None:
        net = build_net(d, config.net_extra_random, seed=config.seed)

    if config.mode == "oracle":
        p_hat, trace_hat, opnorm_hat = config.oracle_p, config.oracle_trace, config.oracle_opnorm
        final = rows
        split = (0, 0, 0, n)
    else:
        if n < MIN_SAMPLES:
            raise EstimationError("split", f"need at least {MIN_SAMPLES} samples, got {n}")
        q1, q2, q3, final = np.array_split(rows, 4)
        split = (q1.shape[0], q2.shape[0], q3.shape[0], final.shape[0])
        try:
            p_hat = estimate_p(q1, config.delta)
        except Exception as exc:
            raise EstimationError("p", str(exc)) from exc
        try:
            trace_hat = estimate_trace(q2, p_hat, config.delta)
        except Exception as exc:
            raise EstimationError("trace", str(exc)) from exc
        try:
            opnorm_hat = estimate_opnorm(
                q3, p_hat, config.opnorm_constants, net=net, seed=config.seed
            )
        except Exception as exc:
            raise EstimationError("opnorm", str(exc)) from exc

    try:
        lam1, lam2 = pick_lambdas(
            trace_hat, opnorm_hat, p_hat, final.shape[0], config.delta, config.kappa
        )
        diag = fit_diagonal(truncated_form(final, DIAGONAL, lam1, net), config.fit_method)
        off = fit_offdiagonal(truncated_form(final, OFFDIAGONAL, lam2, net), config.fit_method)
    except Exception as exc:
        raise EstimationError("oracle", str(exc)) from exc
    sigma_hat = diag.matrix * (1.0 / p_hat) + off.matrix * (1.0 / (p_hat * p_hat))
    if config.psd_project:
        sigma_hat = psd_project(sigma_hat)

    r_hat = trace_hat / opnorm_hat
    gate = final.shape[0] >= config.gate_constant * (r_hat + math.log(1.0 / config.delta)) / p_hat ** 2

    truth_m = _truth_matrix(truth)
    err = operator_norm(sigma_hat - truth_m) if truth_m is not None else None
    return EstimatorReport(
        sigma_hat=sigma_hat,
        p_hat=float(p_hat),
        trace_hat=float(trace_hat),
        opnorm_hat=float(opnorm_hat),
        lambda1=float(lam1),
        lambda2=float(lam2),
        split_sizes=split,
        gate_satisfied=bool(gate),
        mode=config.mode,
        error_opnorm=err,
        wall_time=time.perf_counter() - start,
        fit_objectives=(diag.objective, off.objective),
    )


def baseline_sample_second_moment(y):
    """``(1/N) sum_i Y_i Y_i^T``."""
    rows = as_rows(y)
    if rows.shape[0] < 1:
        raise ValueError("need at least one sample")
    s = rows.T @ rows / rows.shape[0]
    return SymmetricMatrix.from_dense(0.5 * (s + s.T))


def baseline_inverse_weighted(y, p_hat):
    """``Diag(S) / p_hat + Off(S) / p_hat^2`` for the second moment ``S``."""
    if not 0.0 < p_hat <= 1.0:
        raise ValueError(f"p_hat must lie in (0, 1], got {p_hat}")
    s = baseline_sample_second_moment(y).to_dense()
    out = s / (p_hat * p_hat)
    np.fill_diagonal(out, np.diag(s) / p_hat)
    return SymmetricMatrix.from_dense(out)


_REPORT_KEYS = (
    "mode",
    "backend",
    "p_hat",
    "trace_hat",
    "opnorm_hat",
    "lambda1",
    "lambda2",
    "split_sizes",
    "gate_satisfied",
    "error_opnorm",
    "fit_objective_diagonal",
    "fit_objective_offdiagonal",
    "wall_time",
)


def format_report(report):
    """``key=value`` lines followed by ``sigma_hat`` in matrix fixture format."""
    values = {
        "mode": report.mode,
        "backend": BACKEND,
        "p_hat": repr(report.p_hat),
        "trace_hat": repr(report.trace_hat),
        "opnorm_hat": repr(report.opnorm_hat),
        "lambda1": repr(report.lambda1),
        "lambda2": repr(report.lambda2),
        "split_sizes": ",".join(str(s) for s in report.split_sizes),
        "gate_satisfied": "true" if report.gate_satisfied else "false",
        "error_opnorm": "none" if report.error_opnorm is None else repr(report.error_opnorm),
        "fit_objective_diagonal": repr(report.fit_objectives[0]),
        "fit_objective_offdiagonal": repr(report.fit_objectives[1]),
        "wall_time": repr(report.wall_time),
    }
    lines = [f"{k}={values[k]}" for k in _REPORT_KEYS]
    return "\n".join(lines) + "\n" + format_matrix(report.sigma_hat)


def parse_report(text):
    """Inverse of :func:`format_report`. Returns ``(fields, sigma_hat)``."""
    lines = text.splitlines()
    fields = {}
    k = 0
    while k < len(lines) and "=" in lines[k]:
        key, _, val = lines[k].partition("=")
        fields[key.strip()] = val.strip()
        k += 1
    missing = [key for key in _REPORT_KEYS if key not in fields]
    if missing:
        raise ValueError(f"report is missing keys: {', '.join(missing)}")
    return fields, parse_matrix("\n".join(lines[k:]))
