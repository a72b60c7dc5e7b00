"""Dense symmetric matrices in packed storage and the spectral functionals
used to measure estimation error.

Only the lower triangle is stored, so symmetry cannot be broken by
construction. Numerical work happens on dense copies.
"""
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._backend import kernels

__all__ = [
    "SymmetricMatrix",
    "SpectralSummary",
    "EigenError",
    "diag_part",
    "off_part",
    "eigh",
    "operator_norm",
    "spectral_summary",
    "psd_project",
    "load_matrix",
    "save_matrix",
    "format_matrix",
    "parse_matrix",
]

# Fixed on purpose so test oracles stay stable.
SYMMETRY_TOL = 1e-12
JACOBI_TOL = 1e-12


class EigenError(RuntimeError):
    """Jacobi iteration hit its rotation cap before converging."""


class SymmetricMatrix:
    """Real symmetric ``dim x dim`` matrix stored as its packed lower triangle.

    ``packed`` lists the lower triangle row by row: ``M[0,0], M[1,0], M[1,1],
    M[2,0], ...``.
    """

    __slots__ = ("dim", "packed")

    def __init__(self, dim, packed):
        dim = int(dim)
        if dim < 1:
            raise ValueError("dim must be positive")
        packed = np.array(packed, dtype=np.float64).reshape(-1)
        if packed.size != dim * (dim + 1) // 2:
            raise ValueError(
                f"packed storage for dim={dim} needs {dim * (dim + 1) // 2} values, got {packed.size}"
            )
        if not np.all(np.isfinite(packed)):
            raise ValueError("matrix entries must be finite")
        packed.setflags(write=False)
        self.dim = dim
        self.packed = packed

    @classmethod
    def from_dense(cls, m, tol=SYMMETRY_TOL):
        """Pack a dense array, checking ``|M - M^T| <= tol * max(1, max|M|)``."""
        m = np.asarray(m, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
        if np.any(np.abs(m - m.T) > tol * scale):
            raise ValueError("matrix is not symmetric")
        return cls(m.shape[0], m[np.tril_indices(m.shape[0])])

    @classmethod
    def from_diagonal(cls, values):
        values = np.asarray(values, dtype=np.float64)
        return cls.from_dense(np.diag(values))

    @classmethod
    def identity(cls, dim):
        return cls.from_dense(np.eye(dim))

    @classmethod
    def zeros(cls, dim):
        return cls(dim, np.zeros(dim * (dim + 1) // 2))

    def to_dense(self):
        """Return a fresh dense array; the result is exactly symmetric."""
        m = np.zeros((self.dim, self.dim))
        rows, cols = np.tril_indices(self.dim)
        m[rows, cols] = self.packed
        m[cols, rows] = self.packed
        return m

    @property
    def shape(self):
        return (self.dim, self.dim)

    def diagonal(self):
        idx = np.arange(self.dim)
        return self.packed[idx * (idx + 1) // 2 + idx].copy()

    def trace(self):
        return float(np.sum(self.diagonal()))

    def frobenius(self):
        return float(np.linalg.norm(self.to_dense()))

    def _check_dim(self, other):
        if not isinstance(other, SymmetricMatrix):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return other

    def __add__(self, other):
        if self._check_dim(other) is NotImplemented:
            return NotImplemented
        return SymmetricMatrix(self.dim, self.packed + other.packed)

    def __sub__(self, other):
        if self._check_dim(other) is NotImplemented:
            return NotImplemented
        return SymmetricMatrix(self.dim, self.packed - other.packed)

    def __mul__(self, c):
        if isinstance(c, (int, float, np.floating, np.integer)):
            return SymmetricMatrix(self.dim, self.packed * float(c))
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return SymmetricMatrix(self.dim, -self.packed)

    def __eq__(self, other):
        if not isinstance(other, SymmetricMatrix):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.packed, other.packed)

    def __hash__(self):
        return hash((self.dim, self.packed.tobytes()))

    def __repr__(self):
        return f"SymmetricMatrix(dim={self.dim}, packed={self.packed.tolist()!r})"


def _as_sym(m):
    if isinstance(m, SymmetricMatrix):
        return m
    return SymmetricMatrix.from_dense(m)


def diag_part(m):
    """Keep the diagonal of ``m`` and zero everything else."""
    m = _as_sym(m)
    return SymmetricMatrix.from_diagonal(m.diagonal())


def off_part(m):
    """``m - diag_part(m)``; the diagonal of the result is exactly zero."""
    m = _as_sym(m)
    packed = m.packed.copy()
    idx = np.arange(m.dim)
    packed[idx * (idx + 1) // 2 + idx] = 0.0
    return SymmetricMatrix(m.dim, packed)


def eigh(m):
    """Eigendecomposition by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted in
    descending order and eigenvectors as columns. Raises :class:`EigenError`
    if the rotation cap ``100 * d**2`` is reached first.
    """
    m = _as_sym(m)
    w, v, rotations, converged = kernels.jacobi_eigh(m.to_dense(), JACOBI_TOL)
    if not converged:
        raise EigenError(f"Jacobi did not converge after {rotations} rotations (d={m.dim})")
    return w, v


def operator_norm(m):
    """Largest absolute eigenvalue."""
    w, _ = eigh(m)
    return float(np.max(np.abs(w)))


@dataclass(frozen=True)
class SpectralSummary:
    operator_norm: float
    trace: float
    effective_rank: float
    eigenvalues: tuple


def spectral_summary(m):
    """Operator norm, trace, effective rank ``trace / operator_norm`` and the
    descending spectrum of ``m``."""
    m = _as_sym(m)
    w, _ = eigh(m)
    opnorm = float(np.max(np.abs(w)))
    if opnorm == 0.0:
        raise ValueError("degenerate covariance: operator norm is zero")
    trace = m.trace()
    return SpectralSummary(opnorm, trace, trace / opnorm, tuple(float(x) for x in w))


def psd_project(m):
    """Clip negative eigenvalues at zero."""
    m = _as_sym(m)
    w, v = eigh(m)
    return SymmetricMatrix.from_dense((v * np.maximum(w, 0.0)) @ v.T, tol=1e-8)


def format_matrix(m):
    """Fixture text: a line with ``d`` then ``d`` rows of ``d`` decimals."""
    dense = _as_sym(m).to_dense()
    lines = [str(dense.shape[0])]
    lines.extend(" ".join(repr(float(x)) for x in row) for row in dense)
    return "\n".join(lines) + "\n"


def parse_matrix(text):
    """Inverse of :func:`format_matrix`; validates shape and symmetry."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix text")
    try:
        d = int(lines[0].strip())
    except ValueError:
        raise ValueError(f"line 1: expected dimension, got {lines[0]!r}") from None
    if d < 1:
        raise ValueError("line 1: dimension must be positive")
    if len(lines) != d + 1:
        raise ValueError(f"expected {d} matrix rows, got {len(lines) - 1}")
    rows = []
    for k, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != d:
            raise ValueError(f"line {k}: expected {d} values, got {len(parts)}")
        rows.append([float(x) for x in parts])
    dense = np.array(rows)
    if np.any(np.abs(dense - dense.T) > SYMMETRY_TOL):
        raise ValueError("matrix is not symmetric within 1e-12")
    return SymmetricMatrix(d, dense[np.tril_indices(d)])


def save_matrix(m, path):
    Path(path).write_text(format_matrix(m))


def load_matrix(path):
    return parse_matrix(Path(path).read_text())
