"""Synthetic data with exactly known covariance, Bernoulli sparsification and
an empirical audit of the L4-L2 moment-equivalence constant."""
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .linalg import SpectralSummary, SymmetricMatrix

__all__ = [
    "Spectrum",
    "CovarianceSpec",
    "MaskedSample",
    "build_covariance",
    "sample_gaussian",
    "sample_student_t",
    "sample",
    "sparsify",
    "audit_kappa",
    "gaussian_kappa",
    "student_t_kappa",
    "dump_dataset",
    "load_dataset",
]


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalue profile: ``identity``, ``geometric`` (``1, g, g^2, ...``) or
    ``spiked`` (one eigenvalue ``spike``, the rest ``bulk``)."""

    kind: str
    gamma: float = None
    spike: float = None
    bulk: float = None

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def geometric(cls, gamma):
        return cls("geometric", gamma=float(gamma))

    @classmethod
    def spiked(cls, spike, bulk):
        return cls("spiked", spike=float(spike), bulk=float(bulk))

    def validate(self):
        if self.kind == "identity":
            return
        if self.kind == "geometric":
            if self.gamma is None or not 0.0 < self.gamma < 1.0:
                raise ValueError(f"geometric spectrum needs gamma in (0, 1), got {self.gamma}")
            return
        if self.kind == "spiked":
            if self.bulk is None or self.spike is None or not self.bulk > 0.0:
                raise ValueError("spiked spectrum needs bulk > 0")
            if self.spike < self.bulk:
                raise ValueError(f"spiked spectrum needs spike >= bulk, got {self.spike} < {self.bulk}")
            return
        raise ValueError(f"unknown spectrum kind {self.kind!r}")

    def values(self, d):
        self.validate()
        if self.kind == "identity":
            return np.ones(d)
        if self.kind == "geometric":
            return self.gamma ** np.arange(d, dtype=np.float64)
        vals = np.full(d, self.bulk)
        vals[0] = self.spike
        return vals

    def tag(self):
        if self.kind == "identity":
            return "identity"
        if self.kind == "geometric":
            return f"geometric({self.gamma!r})"
        return f"spiked({self.spike!r},{self.bulk!r})"


@dataclass(frozen=True)
class CovarianceSpec:
    sigma: SymmetricMatrix
    summary: SpectralSummary
    sqrt_sigma: SymmetricMatrix
    spectrum: Spectrum
    rotation_seed: int = None

    @property
    def dim(self):
        return self.sigma.dim


@dataclass
class MaskedSample:
    """Observed data ``y`` (exact zeros at missed entries) and its mask.

    Estimators only ever look at ``y``; the mask is kept for auditing.
    """

    y: np.ndarray
    mask: np.ndarray
    true_p: float
    dist_tag: str
    seed: int

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def d(self):
        return self.y.shape[1]


def _haar_orthogonal(d, seed):
    g = rng.stream(seed, rng.STREAM_ROTATION).standard_normal((d, d))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))


def build_covariance(d, spectrum, rotation_seed=None):
    """``Sigma = Q diag(spectrum) Q^T`` with ``Q`` Haar-random from
    ``rotation_seed`` (identity when ``None``)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    lam = spectrum.values(d)
    if rotation_seed is None:
        q = np.eye(d)
    else:
        q = _haar_orthogonal(d, rotation_seed)
    sigma = (q * lam) @ q.T
    sigma = 0.5 * (sigma + sigma.T)
    root = (q * np.sqrt(np.maximum(lam, 0.0))) @ q.T
    root = 0.5 * (root + root.T)
    desc = np.sort(lam)[::-1]
    summary = SpectralSummary(
        operator_norm=float(desc[0]),
        trace=float(np.sum(lam)),
        effective_rank=float(np.sum(lam) / desc[0]),
        eigenvalues=tuple(float(x) for x in desc),
    )
    return CovarianceSpec(
        sigma=SymmetricMatrix.from_dense(sigma),
        summary=summary,
        sqrt_sigma=SymmetricMatrix.from_dense(root),
        spectrum=spectrum,
        rotation_seed=rotation_seed,
    )


def sample_gaussian(spec, n, seed):
    """``n`` rows ``sqrt_sigma @ z`` with ``z`` standard normal."""
    if n < 1:
        raise ValueError("n must be >= 1")
    z = rng.stream(seed, rng.STREAM_GAUSSIAN).standard_normal((n, spec.dim))
    return z @ spec.sqrt_sigma.to_dense()


def sample_student_t(spec, dof, n, seed):
    """Multivariate t rows scaled so that their covariance is exactly ``Sigma``.

    ``X = sqrt((dof - 2) / W) * sqrt_sigma @ z`` with ``W ~ chi2(dof)``.
    """
    if not dof > 4:
        raise ValueError(f"fourth moment does not exist for dof={dof} (need dof > 4)")
    if n < 1:
        raise ValueError("n must be >= 1")
    g = sample_gaussian(spec, n, seed)
    w = rng.stream(seed, rng.STREAM_CHISQ).chisquare(dof, size=n)
    return np.sqrt((dof - 2.0) / w)[:, None] * g


def sample(spec, n, seed, dist="gaussian", dof=None):
    if dist == "gaussian":
        return sample_gaussian(spec, n, seed)
    if dist == "student_t":
        return sample_student_t(spec, dof, n, seed)
    raise ValueError(f"unknown distribution {dist!r}")


def gaussian_kappa():
    return 3.0 ** 0.25


def student_t_kappa(dof):
    if not dof > 4:
        raise ValueError(f"fourth moment does not exist for dof={dof} (need dof > 4)")
    return (3.0 * (dof - 2.0) / (dof - 4.0)) ** 0.25


def dist_tag(dist, dof=None):
    return "gaussian" if dist == "gaussian" else f"student_t({dof!r})"


def sparsify(x, p, seed, dist_tag="unknown"):
    """Keep each entry independently with probability ``p``; zero the rest."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    x = np.asarray(x, dtype=np.float64)
    mask = rng.stream(seed, rng.STREAM_MASK).random(x.shape) < p
    y = np.where(mask, x, 0.0)
    return MaskedSample(y=y, mask=mask, true_p=float(p), dist_tag=dist_tag, seed=int(seed))


def audit_kappa(x, net):
    """Empirical moment-equivalence constant: the largest ratio
    ``m4(v)**(1/4) / m2(v)**(1/2)`` over the net directions."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 100:
        raise ValueError("audit_kappa needs at least 100 samples")
    m2 = np.empty(len(net))
    m4 = np.empty(len(net))
    for lo in range(0, len(net), 64):  # chunked to bound memory at large N
        proj2 = (x @ net.vectors[lo:lo + 64].T) ** 2
        m2[lo:lo + 64] = proj2.mean(axis=0)
        m4[lo:lo + 64] = (proj2 * proj2).mean(axis=0)
    bad = np.flatnonzero(m2 == 0.0)
    if bad.size:
        raise ValueError(f"degenerate marginal along direction {net.vectors[bad[0]].tolist()}")
    return float(np.max(m4 ** 0.25 / np.sqrt(m2)))


def dump_dataset(sample, path):
    """Header ``N d p seed dist`` followed by ``N`` rows of ``d`` decimals."""
    lines = [f"{sample.n} {sample.d} {sample.true_p!r} {sample.seed} {sample.dist_tag}"]
    lines.extend(" ".join(repr(float(v)) for v in row) for row in sample.y)
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path):
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty dataset file")
    head = lines[0].split()
    if len(head) != 5:
        raise ValueError(f"{path}:1: header must be 'N d p seed dist', got {lines[0]!r}")
    try:
        n, d, p, seed = int(head[0]), int(head[1]), float(head[2]), int(head[3])
    except ValueError as exc:
        raise ValueError(f"{path}:1: bad header field ({exc})") from None
    if len(lines) - 1 != n:
        raise ValueError(f"{path}: header says N={n} rows, found {len(lines) - 1}")
    y = np.empty((n, d))
    for i, ln in enumerate(lines[1:]):
        parts = ln.split()
        if len(parts) != d:
            raise ValueError(f"{path}:{i + 2}: expected {d} values, got {len(parts)}")
        y[i] = [float(v) for v in parts]
    return MaskedSample(y=y, mask=y != 0.0, true_p=p, dist_tag=head[4], seed=seed)
