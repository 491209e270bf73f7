"""Boolean matrices over the (or, and) semiring.

Rows are stored as integer bitmasks (bit ``c`` of row ``r`` is entry
``[r, c]``), which keeps the small port-by-port matrices used throughout
the package cheap to multiply and hashable.
"""

from __future__ import annotations

from typing import Iterable, Sequence


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class BoolMatrix:
    """Immutable ``nrows x ncols`` boolean matrix with 0-based indexing."""

    __slots__ = ("nrows", "ncols", "rows", "_hash")

    def __init__(self, nrows: int, ncols: int, rows: Sequence[int]):
        if len(rows) != nrows:
            raise ValueError(f"expected {nrows} rows, got {len(rows)}")
        full = (1 << ncols) - 1
        for r in rows:
            if r & ~full:
                raise ValueError("row has bits beyond the column count")
        self.nrows = nrows
        self.ncols = ncols
        self.rows = tuple(rows)
        self._hash = None

    # construction ---------------------------------------------------------

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> BoolMatrix:
        return cls(nrows, ncols, (0,) * nrows)

    @classmethod
    def ones(cls, nrows: int, ncols: int) -> BoolMatrix:
        return cls(nrows, ncols, ((1 << ncols) - 1,) * nrows)

    @classmethod
    def identity(cls, n: int) -> BoolMatrix:
        return cls(n, n, tuple(1 << i for i in range(n)))

    @classmethod
    def from_lists(cls, data: Sequence[Sequence[int]], ncols: int | None = None) -> BoolMatrix:
        if ncols is None:
            ncols = len(data[0]) if data else 0
        rows = []
        for row in data:
            if len(row) != ncols:
                raise ValueError("ragged matrix")
            mask = 0
            for c, v in enumerate(row):
                if v:
                    mask |= 1 << c
            rows.append(mask)
        return cls(len(rows), ncols, rows)

    @classmethod
    def from_pairs(cls, nrows: int, ncols: int, pairs: Iterable[Sequence[int]]) -> BoolMatrix:
        """Build from 1-based ``(row, col)`` pairs, the file-format encoding."""
        rows = [0] * nrows
        for r, c in pairs:
            if not (1 <= r <= nrows and 1 <= c <= ncols):
                raise ValueError(f"pair ({r}, {c}) outside {nrows}x{ncols}")
            rows[r - 1] |= 1 << (c - 1)
        return cls(nrows, ncols, rows)

    # access ---------------------------------------------------------------

    def get(self, r: int, c: int) -> bool:
        return bool(self.rows[r] >> c & 1)

    def to_lists(self) -> list[list[int]]:
        return [[(row >> c) & 1 for c in range(self.ncols)] for row in self.rows]

    def pairs(self) -> list[list[int]]:
        """1-based ``[row, col]`` pairs of true entries, row-major."""
        return [[r + 1, c + 1] for r, row in enumerate(self.rows) for c in _bits(row)]

    def count(self) -> int:
        return sum(bin(row).count("1") for row in self.rows)

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    def is_square(self) -> bool:
        return self.nrows == self.ncols

    def covers_rows_and_cols(self) -> bool:
        """Every row and every column holds at least one true entry."""
        if any(row == 0 for row in self.rows):
            return False
        union = 0
        for row in self.rows:
            union |= row
        return union == (1 << self.ncols) - 1

    # algebra --------------------------------------------------------------

    def __matmul__(self, other: BoolMatrix) -> BoolMatrix:
        if self.ncols != other.nrows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        orows = other.rows
        out = []
        for row in self.rows:
            acc = 0
            while row:
                low = row & -row
                acc |= orows[low.bit_length() - 1]
                row ^= low
            out.append(acc)
        return BoolMatrix(self.nrows, other.ncols, out)

    def __or__(self, other: BoolMatrix) -> BoolMatrix:
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return BoolMatrix(self.nrows, self.ncols, [a | b for a, b in zip(self.rows, other.rows)])

    def transpose(self) -> BoolMatrix:
        cols = [0] * self.ncols
        for r, row in enumerate(self.rows):
            for c in _bits(row):
                cols[c] |= 1 << r
        return BoolMatrix(self.ncols, self.nrows, cols)

    @property
    def T(self) -> BoolMatrix:
        return self.transpose()

    def row_vector_times(self, vec: int) -> int:
        """``vec x self`` for a row vector given as a bitmask over rows."""
        acc = 0
        rows = self.rows
        while vec:
            low = vec & -vec
            acc |= rows[low.bit_length() - 1]
            vec ^= low
        return acc

    def times_col_vector(self, vec: int) -> int:
        """``self x vec`` for a column vector given as a bitmask over columns."""
        out = 0
        for r, row in enumerate(self.rows):
            if row & vec:
                out |= 1 << r
        return out

    # dunder ---------------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BoolMatrix):
            return NotImplemented
        return self.ncols == other.ncols and self.rows == other.rows

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.ncols, self.rows))
        return self._hash

    def __repr__(self) -> str:
        return f"BoolMatrix({self.to_lists()})"


def product(factors: Iterable[BoolMatrix], n: int | None = None) -> BoolMatrix:
    """Left-to-right product; an empty product needs ``n`` for the identity."""
    result = None
    for f in factors:
        result = f if result is None else result @ f
    if result is None:
        if n is None:
            raise ValueError("empty product needs an explicit dimension")
        return BoolMatrix.identity(n)
    return result


def matrix_period(x: BoolMatrix) -> tuple[int, int]:
    """Smallest ``a`` and then smallest ``b > a`` with ``x**a == x**b``.

    The power sequence of a square boolean matrix is eventually periodic
    and the first repeated value marks both the pre-period and the period.
    """
    return PowerTable(x).period


class PowerTable:
    """Powers ``x^1 .. x^b`` of a square matrix plus its period ``(a, b)``.

    ``multiplications`` records the products spent while searching.
    """

    __slots__ = ("base", "powers", "period", "multiplications")

    def __init__(self, x: BoolMatrix):
        if not x.is_square():
            raise ValueError("period is defined for square matrices only")
        self.base = x
        seen = {x: 1}
        powers = [x]
        cur = x
        mults = 0
        while True:
            cur = cur @ x
            mults += 1
            e = len(powers) + 1
            if cur in seen:
                self.period = (seen[cur], e)
                break
            seen[cur] = e
            powers.append(cur)
        # powers holds x^1 .. x^(b-1); x^b == x^a is appended for completeness
        powers.append(cur)
        self.powers = tuple(powers)
        self.multiplications = mults

    @classmethod
    def from_stored(cls, powers: Sequence[BoolMatrix], period: tuple[int, int]) -> PowerTable:
        a, b = period
        if len(powers) != b or not 1 <= a < b or powers[a - 1] != powers[b - 1]:
            raise ValueError("stored powers do not match the period")
        pt = cls.__new__(cls)
        pt.base = powers[0]
        pt.powers = tuple(powers)
        pt.period = (a, b)
        pt.multiplications = 0
        return pt

    def reduce(self, e: int) -> int:
        """Exponent in ``[1, b]`` with the same power as ``e >= 1``."""
        a, b = self.period
        if e < b:
            return e
        return a + (e - a) % (b - a)

    def power(self, e: int) -> BoolMatrix:
        if e == 0:
            return BoolMatrix.identity(self.base.nrows)
        return self.powers[self.reduce(e) - 1]


def naive_power(x: BoolMatrix, e: int) -> BoolMatrix:
    result = BoolMatrix.identity(x.nrows)
    for _ in range(e):
        result = result @ x
    return result
