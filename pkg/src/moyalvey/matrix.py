"""Small dense matrices of :class:`Expr` entries with optional row/column labels."""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Sequence

from .expr import ONE, ZERO, Expr


class SymbolicMatrix:
    __slots__ = ("rows", "row_labels", "col_labels")

    def __init__(self, rows: Sequence[Sequence], row_labels=None, col_labels=None):
        self.rows = tuple(tuple(Expr.coerce(x) for x in r) for r in rows)
        n = len(self.rows)
        m = len(self.rows[0]) if n else 0
        if any(len(r) != m for r in self.rows):
            raise ValueError("ragged matrix")
        self.row_labels = tuple(row_labels) if row_labels is not None else None
        self.col_labels = tuple(col_labels) if col_labels is not None else None

    @classmethod
    def identity(cls, n: int, labels=None) -> "SymbolicMatrix":
        return cls([[ONE if i == j else ZERO for j in range(n)] for i in range(n)], labels, labels)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), (len(self.rows[0]) if self.rows else 0)

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def entry(self, row_label, col_label) -> Expr:
        return self.rows[self.row_labels.index(row_label)][self.col_labels.index(col_label)]

    def map(self, f: Callable[[Expr], Expr]) -> "SymbolicMatrix":
        return SymbolicMatrix([[f(x) for x in r] for r in self.rows], self.row_labels, self.col_labels)

    def transpose(self) -> "SymbolicMatrix":
        n, m = self.shape
        return SymbolicMatrix([[self.rows[i][j] for i in range(n)] for j in range(m)],
                              self.col_labels, self.row_labels)

    def __matmul__(self, other: "SymbolicMatrix") -> "SymbolicMatrix":
        n, k = self.shape
        k2, m = other.shape
        if k != k2:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        out = []
        for i in range(n):
            row = []
            for j in range(m):
                acc = ZERO
                for t in range(k):
                    a = self.rows[i][t]
                    if a.is_zero():
                        continue
                    b = other.rows[t][j]
                    if not b.is_zero():
                        acc = acc + a * b
                row.append(acc)
            out.append(row)
        return SymbolicMatrix(out, self.row_labels, other.col_labels)

    def __eq__(self, other):
        if not isinstance(other, SymbolicMatrix):
            return NotImplemented
        return self.rows == other.rows

    __hash__ = None

    def is_zero(self) -> bool:
        return all(x.is_zero() for r in self.rows for x in r)

    def is_antisymmetric(self) -> bool:
        n, m = self.shape
        return n == m and all(self.rows[i][j] == -self.rows[j][i] for i in range(n) for j in range(n))

    def det(self) -> Expr:
        n, m = self.shape
        if n != m:
            raise ValueError("determinant of non-square matrix")
        rows = self.rows

        @lru_cache(maxsize=None)
        def minor(r: int, cols: tuple) -> Expr:
            # Laplace expansion along row r over the remaining columns.
            if r == n:
                return ONE
            acc = ZERO
            for pos, c in enumerate(cols):
                a = rows[r][c]
                if a.is_zero():
                    continue
                sub = minor(r + 1, cols[:pos] + cols[pos + 1:])
                if sub.is_zero():
                    continue
                term = a * sub
                acc = acc - term if pos % 2 else acc + term
            return acc

        return minor(0, tuple(range(n)))

    def _without(self, i: int, j: int) -> "SymbolicMatrix":
        return SymbolicMatrix([[x for c, x in enumerate(r) if c != j]
                               for k, r in enumerate(self.rows) if k != i])

    def inverse(self) -> "SymbolicMatrix":
        """Adjugate over determinant; exact when the determinant is a monomial."""
        n, _ = self.shape
        d = self.det()
        if d.is_zero():
            raise ZeroDivisionError("singular matrix")
        dinv = d ** -1
        if n == 1:
            return SymbolicMatrix([[dinv]], self.col_labels, self.row_labels)
        out = [[ZERO] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                cof = self._without(i, j).det()
                if (i + j) % 2:
                    cof = -cof
                out[j][i] = cof * dinv
        return SymbolicMatrix(out, self.col_labels, self.row_labels)

    def to_strings(self, order=None) -> list[list[str]]:
        return [[x.render(order) for x in r] for r in self.rows]

    def __repr__(self):
        return f"SymbolicMatrix({self.to_strings()})"
