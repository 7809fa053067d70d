"""Dense real matrices, triangular masks and triangular solves.

Matrices are plain 2-D ``numpy.ndarray`` values of dtype float64. Every
function here returns a fresh array and never modifies its arguments.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, TextIO

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionError, SingularTriangularError

# diagonal magnitude below which a triangular solve is considered broken
SINGULAR_THRESHOLD = 1e-300


def as_matrix(A, *, allow_empty: bool = False) -> np.ndarray:
    """Validate and copy ``A`` into a finite floating-point 2-D array.

    Integer and lower-precision input is promoted to float64; ``longdouble``
    input keeps its precision (the finite-difference oracle relies on this).
    """
    M = np.array(A)
    M = M.astype(np.result_type(M.dtype, np.float64), copy=False)
    if M.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={M.ndim}")
    if not allow_empty and (M.shape[0] < 1 or M.shape[1] < 1):
        raise DimensionError(f"matrix must be at least 1x1, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    return M


@dataclass(frozen=True)
class Shape:
    """Partition sizes ``m >= n >= 1`` with ``p = m - n``."""

    m: int
    n: int

    def __post_init__(self):
        if self.n < 1 or self.m < self.n:
            raise DimensionError(f"need m >= n >= 1, got m={self.m}, n={self.n}")

    @property
    def p(self) -> int:
        return self.m - self.n

    @classmethod
    def of(cls, A: np.ndarray) -> "Shape":
        return cls(*A.shape)


class Blocks(NamedTuple):
    nn: np.ndarray
    np: np.ndarray | None
    pn: np.ndarray | None
    pp: np.ndarray | None


def partition(A: np.ndarray, shape: Shape) -> Blocks:
    """Split ``A`` into its nn/np/pn/pp blocks.

    An m x m input gives all four blocks, an m x n input gives ``nn`` and
    ``pn``, an n x m input gives ``nn`` and ``np``; the absent blocks are
    ``None``. For p = 0 the blocks beyond ``nn`` are empty arrays.
    """
    m, n = shape.m, shape.n
    r, c = A.shape
    if (r, c) == (m, m):
        return Blocks(A[:n, :n].copy(), A[:n, n:].copy(), A[n:, :n].copy(), A[n:, n:].copy())
    if (r, c) == (m, n):
        return Blocks(A[:n].copy(), None, A[n:].copy(), None)
    if (r, c) == (n, m):
        return Blocks(A[:, :n].copy(), A[:, n:].copy(), None, None)
    raise DimensionError(f"cannot partition a {r}x{c} matrix with m={m}, n={n}")


def reassemble(blocks: Blocks) -> np.ndarray:
    """Inverse of :func:`partition`."""
    nn, np_, pn, pp = blocks
    top = nn if np_ is None else np.hstack([nn, np_])
    if pn is None:
        return top.copy()
    bottom = pn if pp is None else np.hstack([pn, pp])
    return np.vstack([top, bottom])


def mask_upper(A: np.ndarray) -> np.ndarray:
    """``U o A``: keep entries on and above the diagonal."""
    return np.triu(A)


def mask_strict_lower(A: np.ndarray) -> np.ndarray:
    """``L^ o A``: keep entries strictly below the diagonal."""
    return np.tril(A, -1)


def _check_solve_dims(T: np.ndarray, B: np.ndarray, side: str) -> None:
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise DimensionError(f"triangular factor must be square, got {T.shape}")
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    k = B.shape[0] if side == "left" else B.shape[1]
    if k != T.shape[0]:
        raise DimensionError(f"{side} solve with {T.shape} factor and {B.shape} right-hand side")


def solve_unit_lower(L: np.ndarray, B: np.ndarray, side: str = "left") -> np.ndarray:
    """Solve ``L X = B`` (left) or ``X L = B`` (right), L unit lower triangular.

    The diagonal of ``L`` is never read; it is taken to be one.
    """
    B = np.asarray(B, dtype=float)
    _check_solve_dims(L, B, side)
    if B.size == 0:
        return np.zeros(B.shape)
    if side == "left":
        return solve_triangular(L, B, lower=True, unit_diagonal=True)
    return solve_triangular(L, B.T, trans="T", lower=True, unit_diagonal=True).T


def solve_upper(Uu: np.ndarray, B: np.ndarray, side: str = "left") -> np.ndarray:
    """Solve ``Uu X = B`` (left) or ``X Uu = B`` (right), Uu upper triangular."""
    B = np.asarray(B, dtype=float)
    _check_solve_dims(Uu, B, side)
    d = np.abs(np.diag(Uu))
    if np.any(d < SINGULAR_THRESHOLD):
        i = int(np.argmin(d))
        raise SingularTriangularError(f"diagonal entry {i + 1} is {Uu[i, i]!r}")
    if B.size == 0:
        return np.zeros(B.shape)
    if side == "left":
        return solve_triangular(Uu, B, lower=False)
    return solve_triangular(Uu, B.T, trans="T", lower=False).T


# ---------------------------------------------------------------------------
# text format: "rows cols" header, then one whitespace-separated row per line

def format_matrix(A: np.ndarray) -> str:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lines = [f"{A.shape[0]} {A.shape[1]}"]
    lines += [" ".join(f"{x:.17g}" for x in row) for row in A]
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix file")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError(f"bad header line {lines[0]!r}, expected 'rows cols'")
    rows, cols = (int(tok) for tok in header)
    if len(lines) - 1 != rows:
        raise ValueError(f"header declares {rows} rows, found {len(lines) - 1}")
    data = []
    for k, ln in enumerate(lines[1:], start=1):
        vals = [float(tok) for tok in ln.split()]
        if len(vals) != cols:
            raise ValueError(f"row {k} has {len(vals)} entries, expected {cols}")
        data.append(vals)
    return as_matrix(data)


def read_matrix(f: str | TextIO) -> np.ndarray:
    if isinstance(f, str):
        with open(f) as fh:
            return parse_matrix(fh.read())
    return parse_matrix(f.read())


def write_matrix(A: np.ndarray, f: str | TextIO) -> None:
    if isinstance(f, str):
        with open(f, "w") as fh:
            fh.write(format_matrix(A))
    else:
        f.write(format_matrix(A))
