"""Data-driven estimates of the nuisance parameters the oracle estimator
needs: the observation probability, the trace and the operator norm."""
import math
from dataclasses import dataclass

import numpy as np

from . import rng
from ._backend import kernels
from .net import build_net
from .quadform import DIAGONAL, OFFDIAGONAL, as_rows, quad_forms, truncation_levels
from .robust import robust_mean

__all__ = [
    "OpNormConstants",
    "OpNormError",
    "GFunction",
    "estimate_p",
    "estimate_trace",
    "g_alpha",
    "estimate_opnorm",
    "pick_lambdas",
]

W_DRAW_ATTEMPTS = 100
SCAN_START = 1e-8
BISECTION_STEPS = 60
MAX_DOWNWARD_HALVINGS = 200


class OpNormError(RuntimeError):
    pass


@dataclass(frozen=True)
class OpNormConstants:
    """Constants of the operator-norm search.

    Only ``L2`` enters the algorithm (through ``target_level = 1.1 * L2``).
    ``C1``, ``L1`` and ``c_beta`` are kept so that :meth:`conditions` can
    report the two quadratic-discriminant conditions they are meant to satisfy.
    """

    C1: float = 0.1
    L1: float = 0.5
    L2: float = 0.5
    c_beta: float = 1.0

    def __post_init__(self):
        for name in ("C1", "L1", "L2", "c_beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 1.1 * self.L2 < 1.0:
            raise ValueError(f"need 1.1 * L2 < 1, got L2={self.L2}")

    @property
    def target_level(self):
        return 1.1 * self.L2

    def conditions(self, kappa):
        """``(1+L1)^2 - 8.4 k^4 C1 L2`` and ``(1-L1)^2 - 8.4 C1 k^4 L2``.

        The two are stated with opposite signs on ``L1``; both are reported
        and neither is enforced.
        """
        k4 = kappa ** 4
        return (
            (1.0 + self.L1) ** 2 - 8.4 * k4 * self.C1 * self.L2,
            (1.0 - self.L1) ** 2 - 8.4 * self.C1 * k4 * self.L2,
        )


def estimate_p(y, delta):
    """Median-of-means estimate of the fraction of nonzero entries per row,
    clamped to at most 1."""
    rows = as_rows(y)
    nz = rows != 0.0
    if not nz.any():
        raise ValueError("cannot identify p: all observations are zero")
    ratios = nz.sum(axis=1) / rows.shape[1]
    p_hat = robust_mean(ratios, delta)
    if p_hat <= 0.0:
        raise ValueError("cannot identify p: robust mean of observed fractions is zero")
    return min(p_hat, 1.0)


def estimate_trace(y, p_hat, delta):
    """``robust_mean(||Y_i||^2) / p_hat``."""
    if not 0.0 < p_hat <= 1.0:
        raise ValueError(f"p_hat must lie in (0, 1], got {p_hat}")
    rows = as_rows(y)
    tr = robust_mean(np.einsum("ij,ij->i", rows, rows), delta) / p_hat
    if not tr > 0.0:
        raise ValueError(f"nonpositive trace estimate {tr}: degenerate data")
    return tr


class GFunction:
    """``g(alpha)`` on a fixed sample, with the quadratic forms precomputed.

        g(alpha) = sup_v sum_i psi(alpha^2 q^diag_i(v)) / (N p)
                 + sup_{v or 0} sum_i psi(alpha^2 q^off_i(v)) / (N p^2)
    """

    def __init__(self, y, p_hat, net_diag, net_off):
        if not 0.0 < p_hat <= 1.0:
            raise ValueError(f"p_hat must lie in (0, 1], got {p_hat}")
        rows = as_rows(y)
        self.n = rows.shape[0]
        self.p_hat = float(p_hat)
        self.diag_q = np.ascontiguousarray(quad_forms(rows, net_diag.vectors, DIAGONAL))
        self.off_q = np.ascontiguousarray(quad_forms(rows, net_off.vectors, OFFDIAGONAL))
        self.off_has_zero = bool(net_off.includes_zero)
        self.evaluations = 0

    def parts(self, alpha):
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        a2 = float(alpha) * float(alpha)
        self.evaluations += 1
        diag = float(np.max(kernels.psi_colsum(self.diag_q, a2), initial=0.0))
        if self.off_q.shape[1]:
            off = float(np.max(kernels.psi_colsum(self.off_q, a2)))
            if self.off_has_zero:
                off = max(off, 0.0)
        else:
            off = 0.0  # only v = 0 available (or nothing at all)
        return diag / (self.n * self.p_hat), off / (self.n * self.p_hat ** 2)

    def __call__(self, alpha):
        diag, off = self.parts(alpha)
        return diag + off


def g_alpha(alpha, y, p_hat, net_diag, net_off):
    return GFunction(y, p_hat, net_diag, net_off)(alpha)


def _draw_w(rows, seed):
    gen = rng.stream(seed, rng.STREAM_OPNORM_W)
    nonzero_rows = np.any(rows != 0.0, axis=1)
    for _ in range(W_DRAW_ATTEMPTS):
        w = gen.standard_normal(rows.shape[1])
        norm = np.linalg.norm(w)
        if norm == 0.0:
            continue
        w = w / norm
        if np.all((rows @ w)[nonzero_rows] != 0.0):
            return w
    raise OpNormError(f"no direction w with nonvanishing projections after {W_DRAW_ATTEMPTS} draws")


def estimate_opnorm(y, p_hat, constants=None, net=None, seed=0, net_off=None):
    """Operator-norm estimate ``1 / alpha_hat^2`` where ``alpha_hat`` is the
    first crossing of ``g`` through ``1.1 * L2``.

    The upper end ``alpha_hi`` comes from a random unit vector ``w`` at which
    every truncated term saturates; ``w`` is added to the nets so the finite
    supremum sees it. The crossing is bracketed by a doubling scan from
    ``alpha_hi * 1e-8`` and refined by 60 bisection steps.
    """
    constants = constants or OpNormConstants()
    rows = as_rows(y)
    if not np.any(rows != 0.0):
        raise OpNormError("opnorm root-finding failed: all observations are zero")
    if net is None:
        net = build_net(rows.shape[1], seed=seed)
    if net_off is None:
        net_off = net
    net_off = net_off.with_zero(True)

    w = _draw_w(rows, seed)
    proj = rows @ w
    dw = (rows * rows) @ (w * w)
    vals = np.abs(np.concatenate([dw, proj * proj - dw]))
    vals = vals[vals > 0.0]
    alpha_hi = 1.0 / math.sqrt(float(np.min(vals)))

    g = GFunction(rows, p_hat, net.with_extra(w), net_off.with_extra(w))
    level = constants.target_level

    lo = alpha_hi * SCAN_START
    halvings = 0
    while g(lo) >= level:
        # crossing lies below the scan start; g(0) = 0 guarantees one exists
        if halvings >= MAX_DOWNWARD_HALVINGS:
            raise OpNormError("opnorm root-finding failed: g exceeds the level near zero")
        lo *= 0.5
        halvings += 1

    a = lo
    while True:
        if a >= alpha_hi:
            raise OpNormError(
                f"opnorm root-finding failed: g stays below {level} on [alpha_lo, alpha_hi]"
            )
        b = min(2.0 * a, alpha_hi)
        if g(b) >= level:
            break
        a = b
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (a + b)
        if g(mid) >= level:
            b = mid
        else:
            a = mid
    return 1.0 / (b * b)


def pick_lambdas(trace_hat, opnorm_hat, p_hat, n, delta, kappa):
    """Plug-in truncation levels; see :func:`misscov.quadform.truncation_levels`."""
    return truncation_levels(trace_hat, opnorm_hat, p_hat, n, delta, kappa)
