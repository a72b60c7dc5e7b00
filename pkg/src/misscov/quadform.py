"""Truncated empirical quadratic forms and the minimax fits built on them.

For a direction ``v`` and sample rows ``Y_i`` the truncated form is

    value(v) = 1/(N lam) * sum_i psi(lam * q_i(v)),

with ``q_i(v) = v^T Diag(Y_i Y_i^T) v`` or ``v^T Off(Y_i Y_i^T) v``. A
diagonal (resp. zero-diagonal symmetric) matrix is then fitted to these
values in the sup norm over the direction net.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog, lsq_linear

from ._backend import kernels
from .linalg import SymmetricMatrix

__all__ = [
    "TruncatedFormTable",
    "FitResult",
    "FitError",
    "quad_forms",
    "truncated_form",
    "design_matrix",
    "fit_diagonal",
    "fit_offdiagonal",
    "truncation_levels",
    "oracle_estimate",
    "as_rows",
]

DIAGONAL = "diagonal"
OFFDIAGONAL = "offdiagonal"
SUBGRADIENT_ITERS = 5000
# relative slack (in units of max|value|) defining the optimal face
OPTIMAL_SLACK = 1e-11


def as_rows(y):
    """Data rows from a ``MaskedSample`` or an array."""
    y = getattr(y, "y", y)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2:
        raise ValueError(f"expected an (N, d) array, got shape {y.shape}")
    return y


def quad_forms(y, vectors, part):
    """``q[i, k] = v_k^T part(Y_i Y_i^T) v_k`` without forming ``d x d``
    matrices per sample."""
    y = as_rows(y)
    vectors = np.asarray(vectors, dtype=np.float64)
    if part not in (DIAGONAL, OFFDIAGONAL):
        raise ValueError(f"unknown part {part!r}")
    # Rows are scaled by a power of two so huge entries cannot overflow into
    # inf - inf; the scaling is exact, so ordinary inputs are unaffected.
    _, e = np.frexp(np.max(np.abs(y), axis=1, initial=0.0))
    s = np.ldexp(1.0, e - 1)
    ys = y / s[:, None]
    q = (ys * ys) @ (vectors * vectors).T
    if part == OFFDIAGONAL:
        q = (ys @ vectors.T) ** 2 - q
    with np.errstate(over="ignore", invalid="ignore"):
        q = np.where(q == 0.0, 0.0, q * (s * s)[:, None])
    return q


@dataclass(frozen=True, eq=False)
class TruncatedFormTable:
    net: object
    lam: float
    part: str
    values: np.ndarray


def truncated_form(y, part, lam, net):
    if not lam > 0:
        raise ValueError(f"truncation level must be positive, got {lam}")
    y = as_rows(y)
    if y.shape[0] < 1:
        raise ValueError("need at least one sample")
    q = np.ascontiguousarray(quad_forms(y, net.vectors, part))
    # psi saturates, so clipping lam*q (inf included) matches clamping to +-1e15 first
    sums = kernels.psi_colsum(q, float(lam))
    return TruncatedFormTable(net, float(lam), part, np.asarray(sums) / (y.shape[0] * lam))


def design_matrix(vectors, part):
    """Rows ``a_v`` with ``v^T M v = a_v . theta``.

    ``theta`` is the diagonal of ``M`` (diagonal part) or its strict upper
    triangle in ``np.triu_indices(d, 1)`` order (off-diagonal part).
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if part == DIAGONAL:
        return vectors * vectors
    d = vectors.shape[1]
    i, j = np.triu_indices(d, k=1)
    return 2.0 * vectors[:, i] * vectors[:, j]


class FitResult(NamedTuple):
    matrix: SymmetricMatrix
    objective: float


class FitError(RuntimeError):
    """The minimax solver failed; carries the best iterate found."""

    def __init__(self, message, best=None, objective=float("nan")):
        super().__init__(message)
        self.best = best
        self.objective = objective


def _minimax_lp(a, b, nonneg):
    """Solve ``min_theta max_v |a_v . theta - b_v|`` as a linear program."""
    m, k = a.shape
    scale = float(np.max(np.abs(b))) if b.size else 0.0
    if scale == 0.0:
        return np.zeros(k)
    bs = b / scale
    ones = np.ones((m, 1))
    a_ub = np.vstack([np.hstack([a, -ones]), np.hstack([-a, -ones])])
    b_ub = np.concatenate([bs, -bs])
    c = np.zeros(k + 1)
    c[-1] = 1.0
    bounds = [(0.0, None) if nonneg else (None, None)] * k + [(0.0, None)]
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=bounds,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0 or res.x is None:
        best = np.zeros(k)
        raise FitError(f"minimax LP failed: {res.message}", best, float(np.max(np.abs(b))))
    theta = _min_norm_optimal(a, bs, float(res.x[-1]) + OPTIMAL_SLACK, nonneg, res.x[:k])
    theta = theta * scale
    if nonneg:
        theta = np.maximum(theta, 0.0)
    return theta


def _min_norm_optimal(a, b, t, nonneg, fallback):
    """Minimum-norm ``theta`` with ``|a theta - b| <= t`` (and ``theta >= 0``).

    The minimax optimum is often a face rather than a point, and the vertex
    an LP solver lands on then depends on column order. The least-norm point
    of the optimal set is unique, which makes the fit a function of the table
    alone. Solved as a least-distance program (Lawson and Hanson, ch. 23):
    ``min |x|`` s.t. ``G x >= h``, whose dual is a nonnegative least-squares
    problem. BVLS is used for it; scipy's ``nnls`` stalls short of
    feasibility on these thin, degenerate sets.
    """
    g = [a, -a]
    h = [b - t, -b - t]
    if nonneg:
        g.append(np.eye(a.shape[1]))
        h.append(np.zeros(a.shape[1]))
    g = np.vstack(g)
    h = np.concatenate(h)
    e = np.vstack([g.T, h[None, :]])
    f = np.zeros(e.shape[0])
    f[-1] = 1.0
    res = lsq_linear(e, f, bounds=(0.0, np.inf), method="bvls", tol=1e-14, max_iter=10 * e.shape[1])
    r = e @ res.x - f
    if not abs(r[-1]) > 1e-12:
        return fallback  # numerically infeasible; keep the LP vertex
    x = -r[:-1] / r[-1]
    if np.max(h - g @ x) > 1e-9:
        return fallback
    return x


def _fit(table, part, method):
    if table.part != part:
        raise ValueError(f"expected a {part} table, got {table.part}")
    d = table.net.dim
    a = np.ascontiguousarray(design_matrix(table.net.vectors, part))
    b = np.ascontiguousarray(table.values, dtype=np.float64)
    nonneg = part == DIAGONAL
    if method == "lp":
        theta = _minimax_lp(a, b, nonneg)
    elif method == "subgradient":
        radius = 2.0 * float(np.max(np.abs(b), initial=0.0)) * d
        theta, _ = kernels.subgradient_minimax(a, b, nonneg, SUBGRADIENT_ITERS, radius)
        theta = np.asarray(theta)
    else:
        raise ValueError(f"unknown fit method {method!r}")
    objective = float(np.max(np.abs(a @ theta - b), initial=0.0))
    if part == DIAGONAL:
        matrix = SymmetricMatrix.from_diagonal(theta)
    else:
        m = np.zeros((d, d))
        i, j = np.triu_indices(d, k=1)
        m[i, j] = theta
        m[j, i] = theta
        matrix = SymmetricMatrix.from_dense(m)
    return FitResult(matrix, objective)


def fit_diagonal(table, method="lp"):
    """Nonnegative diagonal ``D`` minimizing ``max_v |v^T D v - value(v)|``."""
    return _fit(table, DIAGONAL, method)


def fit_offdiagonal(table, method="lp"):
    """Zero-diagonal symmetric ``O`` minimizing ``max_v |v^T O v - value(v)|``.

    No PSD constraint: the only PSD matrix with zero diagonal is zero.
    """
    return _fit(table, OFFDIAGONAL, method)


def truncation_levels(trace, opnorm, p, n, delta, kappa):
    """Truncation levels for the diagonal and off-diagonal forms:

    lam1 = (n p)^(-1/2) / (opnorm kappa^2) * sqrt(r + ln(1/delta))
    lam2 = n^(-1/2) / (p opnorm kappa^2) * sqrt(r + ln(1/delta))

    with ``r = trace / opnorm``.
    """
    for name, val in (("trace", trace), ("opnorm", opnorm), ("p", p), ("n", n), ("kappa", kappa)):
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val}")
    if p > 1:
        raise ValueError(f"p must be at most 1, got {p}")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    root = math.sqrt(trace / opnorm + math.log(1.0 / delta))
    k2 = kappa * kappa
    lam1 = root / (math.sqrt(n * p) * opnorm * k2)
    lam2 = root / (math.sqrt(n) * p * opnorm * k2)
    return lam1, lam2


def oracle_estimate(y, delta, p, trace, opnorm, kappa, net, method="lp"):
    """Estimate assuming ``p``, ``trace`` and ``opnorm`` are known.

    Returns ``(sigma_hat, (lam1, lam2))`` where
    ``sigma_hat = fit_diagonal / p + fit_offdiagonal / p**2``.
    """
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    rows = as_rows(y)
    lam1, lam2 = truncation_levels(trace, opnorm, p, rows.shape[0], delta, kappa)
    diag = fit_diagonal(truncated_form(rows, DIAGONAL, lam1, net), method)
    off = fit_offdiagonal(truncated_form(rows, OFFDIAGONAL, lam2, net), method)
    sigma_hat = diag.matrix * (1.0 / p) + off.matrix * (1.0 / (p * p))
    return sigma_hat, (lam1, lam2)
