"""GF(2) linear algebra on bit-packed matrices.

Rows are stored as Python integers with bit ``j`` holding column ``j + 1``
(columns are 1-based in the public API, bits are 0-based).  Arbitrary-precision
ints give word-parallel row XOR for free, so Gaussian elimination runs at
machine-word speed without any array bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

#: Hard ceiling on rows*cols of any matrix we will materialise.
DIMENSION_CAP = 1 << 20


class DimensionCapExceeded(ValueError):
    """Raised when an operation would build a matrix beyond DIMENSION_CAP."""


@dataclass(frozen=True)
class BitMatrix:
    """Dense GF(2) matrix with int-packed rows.

    Attributes
    ----------
    rows, cols : int
        Dimensions.
    data : tuple[int, ...]
        One Python int per row; bit ``j`` is column ``j + 1``.
    """

    rows: int
    cols: int
    data: tuple[int, ...]

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise ValueError("negative dimensions")
        if self.rows * self.cols > DIMENSION_CAP:
            raise DimensionCapExceeded(
                f"{self.rows}x{self.cols} exceeds cap {DIMENSION_CAP}"
            )
        if len(self.data) != self.rows:
            raise ValueError("row count does not match data")
        limit = 1 << self.cols
        for r in self.data:
            if not 0 <= r < limit:
                raise ValueError("row has bits outside the column range")

    @classmethod
    def from_dense(cls, entries: Sequence[Sequence[int]]) -> "BitMatrix":
        """Build from a list of 0/1 row lists."""
        rows = len(entries)
        cols = len(entries[0]) if rows else 0
        data = []
        for row in entries:
            if len(row) != cols:
                raise ValueError("ragged rows")
            data.append(sum(1 << j for j, v in enumerate(row) if v & 1))
        return cls(rows, cols, tuple(data))

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls(n, n, tuple(1 << j for j in range(n)))

    def to_dense(self) -> list[list[int]]:
        return [[(r >> j) & 1 for j in range(self.cols)] for r in self.data]

    def row(self, i: int) -> int:
        """Packed row ``i`` (1-based)."""
        return self.data[i - 1]


def kronecker_power(base: BitMatrix, n: int) -> BitMatrix:
    """n-fold Kronecker power ``base ⊗ ... ⊗ base``.

    ``n = 0`` yields the 1x1 identity.  Raises DimensionCapExceeded before
    any allocation if the result would overrun DIMENSION_CAP.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if (base.rows**n) * (base.cols**n) > DIMENSION_CAP:
        raise DimensionCapExceeded(
            f"{base.rows ** n}x{base.cols ** n} exceeds cap {DIMENSION_CAP}"
        )
    out = BitMatrix(1, 1, (1,))
    for _ in range(n):
        out = _kron(out, base)
    return out


def _kron(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    data = []
    for ra in a.data:
        for rb in b.data:
            packed = 0
            bits = ra
            while bits:
                low = bits & -bits
                packed |= rb << (low.bit_length() - 1) * b.cols
                bits ^= low
            data.append(packed)
    return BitMatrix(a.rows * b.rows, a.cols * b.cols, tuple(data))


def rank(m: BitMatrix) -> int:
    """GF(2) rank by row-insertion elimination.

    Pivots are chosen left-to-right (lowest set bit first), which keeps the
    reduction deterministic.
    """
    return rank_of_rows(m.data)


def rank_of_rows(packed_rows: Iterable[int]) -> int:
    """Rank of a collection of int-packed GF(2) rows."""
    pivots: dict[int, int] = {}
    r = 0
    for row in packed_rows:
        while row:
            low = row & -row
            piv = pivots.get(low)
            if piv is None:
                pivots[low] = row
                r += 1
                break
            row ^= piv
    return r


def nullspace_dim_after_erasure(g: BitMatrix, y) -> int:
    """Dimension of ``{u : u G_y = 0}`` where G_y drops the erased columns.

    ``y`` may be an int bitmask (bit ``j`` = column ``j + 1`` erased) or any
    object with a ``mask`` attribute holding one.  Zeroing erased columns
    leaves the rank of the kept columns unchanged, so no repacking is needed.
    """
    mask = getattr(y, "mask", y)
    keep = ~mask & ((1 << g.cols) - 1)
    return g.rows - rank_of_rows(row & keep for row in g.data)
