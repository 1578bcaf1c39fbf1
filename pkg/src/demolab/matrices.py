"""Measurement matrices, index sets and the projector algebra of ``A = [I | Phi]``.

All index sets are 1-based at the public surface, matching the usual
notation ``Gamma ⊂ {1, ..., M}``. ``IndexSet.zero_based`` gives the numpy
view used internally.

Note that selecting the rows ``Gamma`` of an ``M x N`` matrix yields a
``|Gamma| x N`` matrix (it is sometimes misprinted as ``|Gamma| x M``).
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ContractViolationError,
    DimensionMismatchError,
    EmptySelectionError,
    IndexRangeError,
    InvalidDimensionError,
    SingularSelectionError,
)

DISTRIBUTIONS = ("gaussian", "rademacher", "uniform")

BINARY_MAGIC = b"DEMOLAB1"
_HEADER = struct.Struct("<8sII")

# smallest/largest singular value ratio below which a column selection is singular
RANK_TOL = 1e-10


@dataclass(frozen=True)
class IndexSet:
    """Sorted, duplicate-free set of 1-based indices into ``{1..universe}``."""

    indices: tuple
    universe: int

    def __post_init__(self):
        if self.universe < 0:
            raise InvalidDimensionError("universe must be non-negative")
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate indices in {idx}")
        if idx and (idx[0] < 1 or idx[-1] > self.universe):
            raise IndexRangeError(f"indices {idx} outside [1, {self.universe}]")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def full(cls, universe):
        return cls(tuple(range(1, universe + 1)), universe)

    @classmethod
    def from_zero_based(cls, indices, universe):
        return cls(tuple(int(i) + 1 for i in indices), universe)

    @property
    def zero_based(self):
        return np.asarray(self.indices, dtype=np.intp) - 1

    def complement(self):
        keep = set(self.indices)
        return IndexSet(tuple(i for i in range(1, self.universe + 1) if i not in keep), self.universe)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return i in self.indices

    def to_list(self):
        return list(self.indices)


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """Dense ``rows x cols`` real matrix plus the metadata it was drawn with.

    ``dist`` is one of :data:`DISTRIBUTIONS`, or ``"custom"`` for matrices
    wrapped from arbitrary arrays (loaded files, test fixtures).
    """

    entries: np.ndarray
    dist: str = "custom"
    seed: int = None
    rows: int = field(init=False)
    cols: int = field(init=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64)
        if a.ndim != 2:
            raise InvalidDimensionError(f"expected a 2-D matrix, got shape {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise InvalidDimensionError(f"matrix must be non-empty, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "rows", a.shape[0])
        object.__setattr__(self, "cols", a.shape[1])

    @property
    def shape(self):
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, MeasurementMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class AugmentedMatrix:
    """``full = [I | base]``, an ``M x (M + N)`` matrix."""

    base: MeasurementMatrix
    full: np.ndarray

    @property
    def rows(self):
        return self.full.shape[0]

    @property
    def cols(self):
        return self.full.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.full if dtype is None else self.full.astype(dtype)


def as_array(a):
    """Return the dense float array behind ``a``."""
    if isinstance(a, MeasurementMatrix):
        return a.entries
    if isinstance(a, AugmentedMatrix):
        return a.full
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidDimensionError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def draw_entries(rng, rows, cols, dist, batch=None):
    """Draw ``rows x cols`` entries of variance ``1/rows``.

    With ``batch`` set, returns a ``(batch, rows, cols)`` stack of
    independent matrices.
    """
    shape = (rows, cols) if batch is None else (batch, rows, cols)
    scale = 1.0 / np.sqrt(rows)
    if dist == "gaussian":
        return rng.standard_normal(shape) * scale
    if dist == "rademacher":
        return (2.0 * rng.integers(0, 2, size=shape) - 1.0) * scale
    if dist == "uniform":
        # uniform on [-sqrt(3), sqrt(3)] has unit variance
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=shape) * scale
    raise ValueError(f"unknown distribution {dist!r}; expected one of {DISTRIBUTIONS}")


def generate(rows, cols, dist="gaussian", seed=0):
    """Draw a random measurement matrix with entry variance ``1/rows``.

    Parameters
    ----------
    rows, cols : int
        Matrix dimensions ``M`` and ``N``.
    dist : {"gaussian", "rademacher", "uniform"}
        Entry distribution, each scaled to variance ``1/rows``.
    seed : int
        Seed for ``numpy.random.default_rng``. The same
        ``(rows, cols, dist, seed)`` always reproduces the same entries.
    """
    if rows < 1 or cols < 1:
        raise InvalidDimensionError(f"rows and cols must be >= 1, got ({rows}, {cols})")
    rng = np.random.default_rng(seed)
    return MeasurementMatrix(draw_entries(rng, rows, cols, dist), dist=dist, seed=seed)


def _check_selection(s, n, what):
    if s.universe != n:
        raise DimensionMismatchError(f"index set universe {s.universe} != number of {what} {n}")
    if len(s) == 0:
        raise EmptySelectionError(f"empty {what} selection")


def row_submatrix(m, gamma):
    """Rows of ``m`` indexed by ``gamma``, as a ``|gamma| x N`` matrix."""
    a = as_array(m)
    _check_selection(gamma, a.shape[0], "rows")
    return MeasurementMatrix(a[gamma.zero_based], dist=getattr(m, "dist", "custom"))


def col_submatrix(m, lam):
    """Columns of ``m`` indexed by ``lam``, as an ``M x |lam|`` matrix."""
    a = as_array(m)
    _check_selection(lam, a.shape[1], "columns")
    return MeasurementMatrix(a[:, lam.zero_based], dist=getattr(m, "dist", "custom"))


def augment_identity(m):
    if not isinstance(m, MeasurementMatrix):
        m = MeasurementMatrix(m)
    full = np.hstack([np.eye(m.rows), m.entries])
    full.setflags(write=False)
    return AugmentedMatrix(m, full)


def diagonal_mask(s):
    """The ``n x n`` diagonal 0/1 matrix with ones at the indices of ``s``."""
    d = np.zeros(s.universe)
    d[s.zero_based] = 1.0
    return np.diag(d)


def range_projector(a, lam):
    """Orthogonal projector onto the span of the columns ``lam`` of ``a``.

    Computed from a thin SVD of ``a[:, lam]``. An empty ``lam`` gives the
    zero projector.

    Raises
    ------
    SingularSelectionError
        If the smallest singular value of the selection is below
        ``1e-10`` times the largest.
    """
    arr = as_array(a)
    if lam.universe != arr.shape[1]:
        raise DimensionMismatchError(f"index set universe {lam.universe} != columns {arr.shape[1]}")
    m = arr.shape[0]
    if len(lam) == 0:
        return np.zeros((m, m))
    sub = arr[:, lam.zero_based]
    u, s, _ = np.linalg.svd(sub, full_matrices=False)
    if len(lam) > m or s[-1] < RANK_TOL * s[0]:
        smin = 0.0 if len(lam) > m else float(s[-1])
        raise SingularSelectionError(
            f"selected columns are rank deficient (smallest singular value {smin:.3e})", smin)
    return u @ u.T


def is_projector(p, tol=1e-8):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        return False
    scale = max(1.0, np.linalg.norm(p))
    return (np.linalg.norm(p @ p - p) <= tol * scale
            and np.linalg.norm(p - p.T) <= tol * scale)


def complement_projector(p):
    """``I - p`` for an orthogonal projector ``p``."""
    p = np.asarray(p, dtype=np.float64)
    if not is_projector(p):
        raise ContractViolationError("input is not a symmetric idempotent matrix")
    return np.eye(p.shape[0]) - p


def masked_product(a, gamma):
    """Copy of ``a`` with every row outside ``gamma`` set to zero.

    This is ``I(gamma) @ a`` without forming the mask, so
    ``||masked_product(a, gamma) @ x|| == ||a[gamma] @ x||``.
    """
    arr = as_array(a)
    if gamma.universe != arr.shape[0]:
        raise DimensionMismatchError(f"index set universe {gamma.universe} != rows {arr.shape[0]}")
    out = np.zeros_like(arr)
    idx = gamma.zero_based
    out[idx] = arr[idx]
    return out


# serialization -------------------------------------------------------------

def save_csv(m, path):
    """Write one row per line, 17 significant digits."""
    np.savetxt(path, as_array(m), delimiter=",", fmt="%.16e")


def load_csv(path):
    a = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return MeasurementMatrix(a)


def to_bytes(m):
    a = np.ascontiguousarray(as_array(m), dtype="<f8")
    return _HEADER.pack(BINARY_MAGIC, a.shape[0], a.shape[1]) + a.tobytes(order="C")


def from_bytes(buf):
    if len(buf) < _HEADER.size:
        raise ValueError("truncated matrix file")
    magic, rows, cols = _HEADER.unpack_from(buf)
    if magic != BINARY_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    body = buf[_HEADER.size:]
    if len(body) != 8 * rows * cols:
        raise ValueError(f"expected {rows}x{cols} float64 payload, got {len(body)} bytes")
    a = np.frombuffer(body, dtype="<f8").reshape(rows, cols)
    return MeasurementMatrix(a)


def save_binary(m, path):
    with open(path, "wb") as fh:
        fh.write(to_bytes(m))


def load_binary(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


def load_matrix(path):
    """Load a matrix from ``.csv`` or the binary format, chosen by the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head == BINARY_MAGIC:
        return load_binary(path)
    return load_csv(path)
