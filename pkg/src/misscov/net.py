"""Finite direction sets standing in for the unit sphere."""
from dataclasses import dataclass

import numpy as np

from . import rng

__all__ = ["DirectionNet", "build_net", "default_extra_random", "sup_abs_over_net"]


@dataclass(frozen=True, eq=False)
class DirectionNet:
    """Unit vectors (rows of ``vectors``) plus an optional zero direction.

    The zero vector is never stored; ``includes_zero`` marks suprema that
    should also consider ``v = 0``.
    """

    dim: int
    vectors: np.ndarray
    includes_zero: bool = False
    seed: int = 0

    def __len__(self):
        return self.vectors.shape[0]

    def with_zero(self, flag=True):
        return DirectionNet(self.dim, self.vectors, flag, self.seed)

    def with_extra(self, extra):
        """A new net with the rows of ``extra`` appended."""
        extra = np.atleast_2d(np.asarray(extra, dtype=np.float64))
        return DirectionNet(self.dim, np.vstack([self.vectors, extra]), self.includes_zero, self.seed)

    def permuted(self, perm):
        """Apply a coordinate permutation to every vector (order preserved)."""
        out = np.empty_like(self.vectors)
        out[:, perm] = self.vectors
        return DirectionNet(self.dim, out, self.includes_zero, self.seed)


def default_extra_random(d):
    return min(50 * d, 5000)


def _structured(d):
    rows = [np.eye(d)]
    if d > 1:
        h = 1.0 / np.sqrt(2.0)
        i, j = np.triu_indices(d, k=1)
        pairs = np.zeros((2 * i.size, d))
        k = np.arange(i.size)
        pairs[2 * k, i] = h
        pairs[2 * k, j] = h
        pairs[2 * k + 1, i] = h
        pairs[2 * k + 1, j] = -h
        rows.append(pairs)
    return np.vstack(rows)


def build_net(d, extra_random=None, seed=0, includes_zero=False):
    """Basis vectors, all ``(e_i +- e_j)/sqrt(2)`` for ``i < j``, then
    ``extra_random`` uniform points on the sphere drawn from ``seed``.

    ``extra_random=None`` uses ``min(50 d, 5000)``.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if extra_random is None:
        extra_random = default_extra_random(d)
    if extra_random < 0:
        raise ValueError("extra_random must be >= 0")
    vecs = _structured(d)
    if extra_random:
        g = rng.stream(seed, rng.STREAM_NET).standard_normal((extra_random, d))
        norms = np.linalg.norm(g, axis=1)
        zero = norms == 0.0  # probability zero, but keep the invariant
        g[zero, 0] = 1.0
        norms[zero] = 1.0
        vecs = np.vstack([vecs, g / norms[:, None]])
    vecs.setflags(write=False)
    return DirectionNet(d, vecs, includes_zero, int(seed))


def sup_abs_over_net(net, f):
    """``max |f(v)|`` over the net and the first maximizing vector.

    With ``includes_zero`` the zero vector is tried first.
    """
    best, arg = -1.0, None
    candidates = list(net.vectors)
    if net.includes_zero:
        candidates.insert(0, np.zeros(net.dim))
    if not candidates:
        raise ValueError("empty net")
    for v in candidates:
        val = float(f(v))
        if not np.isfinite(val):
            raise ValueError(f"non-finite value {val} at direction {v.tolist()}")
        if abs(val) > best:
            best, arg = abs(val), v
    return best, arg
