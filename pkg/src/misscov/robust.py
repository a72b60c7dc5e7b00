"""Scalar robust primitives: the truncation function, checkers for the
log-convexification inequalities it satisfies, and a median-of-means
estimator."""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "psi",
    "FiniteSupportRV",
    "InequalityCheck",
    "check_lemma3_part1",
    "check_lemma3_part2",
    "random_finite_support",
    "robust_mean",
    "mom_block_count",
]

SLACK = 1e-12


def psi(x):
    """Identity on ``[-1, 1]``, ``sign(x)`` outside."""
    if np.isscalar(x):
        return float(min(1.0, max(-1.0, x)))
    return np.clip(x, -1.0, 1.0)


@dataclass(frozen=True)
class FiniteSupportRV:
    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        p = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        if v.shape != p.shape or v.size == 0:
            raise ValueError("values and probs must be non-empty and the same length")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be nonnegative and sum to 1")
        if not np.all(np.isfinite(v)):
            raise ValueError("atoms must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", p)

    @classmethod
    def point(cls, value):
        return cls(np.array([value]), np.array([1.0]))

    def expect(self, f):
        return float(self.probs @ f(self.values))


class InequalityCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def _elog(z):
    # 1 + z + z^2 >= 3/4, so the log is always defined
    return z.expect(lambda x: np.log1p(x + x * x))


def check_lemma3_part1(z, form="statement", psi_fn=psi):
    """``psi(E Z) <= E log(1 + Z + Z^2) + min{1, E Z^2 / 6}``.

    ``form="jensen"`` drops the ``min`` (the bound the convexity argument
    actually yields); the ``statement`` form admits counterexamples with a
    large rare atom, see the test suite.
    """
    lhs = psi_fn(z.expect(lambda x: x))
    ez2 = z.expect(lambda x: x * x)
    if form == "statement":
        extra = min(1.0, ez2 / 6.0)
    elif form == "jensen":
        extra = ez2 / 6.0
    else:
        raise ValueError(f"unknown form {form!r}")
    rhs = _elog(z) + extra
    return InequalityCheck(float(lhs), float(rhs), bool(lhs <= rhs + SLACK))


def check_lemma3_part2(z, a, form="proof"):
    """``E log(1+Z+Z^2) + a * M <= E log(1 + Z + c(a) Z^2)`` with
    ``c(a) = 1 + (7 + sqrt 6)(e^a - 1)/6``.

    ``form="proof"`` uses ``M = E min{1, Z^2/6}``; ``form="statement"`` uses
    ``M = min{1, E Z^2/6}``, which is larger and fails for heavy atoms.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    if form == "proof":
        m = z.expect(lambda x: np.minimum(1.0, x * x / 6.0))
    elif form == "statement":
        m = min(1.0, z.expect(lambda x: x * x) / 6.0)
    else:
        raise ValueError(f"unknown form {form!r}")
    c = 1.0 + (7.0 + math.sqrt(6.0)) * math.expm1(a) / 6.0
    lhs = _elog(z) + a * m
    rhs = z.expect(lambda x: np.log1p(x + c * x * x))
    return InequalityCheck(float(lhs), float(rhs), bool(lhs <= rhs + SLACK))


def random_finite_support(gen):
    """Draw a random finite-support variable: 2-5 atoms at ``s * N(0, 1)``
    with ``s = 10**U(-2, 2)`` and Dirichlet(1, ..., 1) weights."""
    k = int(gen.integers(2, 6))
    scale = 10.0 ** gen.uniform(-2.0, 2.0)
    values = scale * gen.standard_normal(k)
    probs = gen.dirichlet(np.ones(k))
    probs = probs / probs.sum()
    return FiniteSupportRV(values, probs)


def mom_block_count(delta):
    return math.ceil(8.0 * math.log(1.0 / delta))


def robust_mean(xs, delta, n_blocks=None):
    """Median of block means.

    ``xs`` is split in the given order into ``k = min(ceil(8 ln(1/delta)),
    floor(n/2))`` equal blocks (the remainder is dropped). Pass ``n_blocks``
    to force ``k``.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    xs = np.asarray(xs, dtype=np.float64).reshape(-1)
    need = mom_block_count(delta)
    if n_blocks is None:
        if xs.size < 2 * need:
            raise ValueError(
                f"insufficient sample for confidence level: need {2 * need} values, got {xs.size}"
            )
        k = min(need, xs.size // 2)
    else:
        k = int(n_blocks)
        if not 1 <= k <= xs.size:
            raise ValueError(f"n_blocks must lie in [1, {xs.size}]")
    b = xs.size // k
    means = xs[: k * b].reshape(k, b).mean(axis=1)
    return float(np.median(means))
