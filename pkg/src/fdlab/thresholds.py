"""Exact rational critical-exponent calculators and tables.

All arithmetic is done in reduced fractions; nothing here touches
floating point. Infinite exponents are passed with the dedicated
`INFINITY` sentinel, never float('inf').
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Union

from .errors import OutOfRangeError


class ExponentValue(Fraction):
    """Exact reduced rational exponent with num/den field names."""

    @property
    def num(self) -> int:
        return self.numerator

    @property
    def den(self) -> int:
        return self.denominator

    def __repr__(self):
        return f"ExponentValue({self.num}/{self.den})"

    def __str__(self):
        return str(self.num) if self.den == 1 else f"{self.num}/{self.den}"


class _Infinity:
    """Sentinel for an infinite exponent input (p -> inf limits)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"


INFINITY = _Infinity()

RationalLike = Union[int, Fraction, ExponentValue]


def _frac(x, name: str) -> Fraction:
    if isinstance(x, _Infinity):
        raise OutOfRangeError(f"{name} must be finite here")
    if isinstance(x, Rational):
        return Fraction(x)
    raise OutOfRangeError(f"{name} = {x!r} is not an exact rational")


def critical_p(n: int, k: int) -> ExponentValue:
    """Distortion integrability threshold for degree-k homology of
    ball preimages in dimension n.

    Piecewise in k relative to n/2:
    (n-k-1)/(k+1) below, 1 at the middle, (k-1)/(n-k+1) above.
    The k = n-1 value comes from the same third branch and is flagged
    parenthetical in tables.
    """
    if n < 3:
        raise OutOfRangeError(f"n = {n} < 3")
    if not 1 <= k <= n - 1:
        raise OutOfRangeError(f"k = {k} outside 1..{n - 1}")
    if 2 * k < n:
        return ExponentValue(n - (k + 1), k + 1)
    if 2 * k == n:
        return ExponentValue(1)
    return ExponentValue(k - 1, n - (k - 1))


def hausdorff_exponent(n: int, p: RationalLike) -> ExponentValue:
    """Exponent n/(p+1): fibers have zero Hausdorff measure in this
    dimension when the distortion is p-integrable."""
    if n < 2:
        raise OutOfRangeError(f"n = {n} < 2")
    p = _frac(p, "p")
    if p < Fraction(1, n - 1):
        raise OutOfRangeError(f"p = {p} < 1/(n-1) = 1/{n - 1}")
    f = Fraction(n) / (p + 1)
    return ExponentValue(f)


def cellularity_p(n: int) -> ExponentValue:
    """Threshold (n-2)/2 above which ball preimages are rational
    homology balls (cellularity regime)."""
    if n < 3:
        raise OutOfRangeError(f"n = {n} < 3")
    return ExponentValue(n - 2, 2)


def neo_r(n: int, p, q) -> ExponentValue:
    """Sobolev exponent r of the inverse: 1/r = n/p + 1/q.

    Accepts p = INFINITY for the limiting case r = q.
    """
    if n < 2:
        raise OutOfRangeError(f"n = {n} < 2")
    q = _frac(q, "q")
    if q <= 0:
        raise OutOfRangeError(f"q = {q} <= 0")
    if p is INFINITY:
        return ExponentValue(q)
    p = _frac(p, "p")
    if p < n:
        raise OutOfRangeError(f"p = {p} < n = {n}")
    return ExponentValue(1 / (Fraction(n) / p + 1 / q))


def top_degree_alternatives(n: int) -> dict:
    """Both candidate values at k = n-1: the third-branch parenthetical
    table entry and the cellularity threshold (n-2)/2. They agree for
    every n — (k-1)/(n-k+1) at k = n-1 is literally (n-2)/2 — so the
    discrepancy flag is always False; both are reported anyway."""
    branch = critical_p(n, n - 1)
    cell = cellularity_p(n)
    return {
        "third_branch": branch,
        "cellularity": cell,
        "discrepant": branch != cell,
    }


@dataclass(frozen=True)
class ThresholdTable:
    """Rows n = 3..n_max of critical exponents, k = 1..n-1.

    Entries are (value, parenthetical) pairs; the k = n-1 column is
    flagged parenthetical.
    """

    n_max: int
    rows: dict  # n -> list of (ExponentValue, bool)

    def row(self, n: int):
        return self.rows[n]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        kmax = self.n_max - 1
        w.writerow(["n"] + [f"k={k}" for k in range(1, kmax + 1)])
        for n in sorted(self.rows):
            cells = [
                f"({v})" if paren else str(v) for v, paren in self.rows[n]
            ]
            w.writerow([n] + cells + [""] * (kmax - len(cells)))
        return buf.getvalue()


def fig1_table(n_max: int) -> ThresholdTable:
    """Exact threshold table for n = 3..n_max; symmetric rows, with the
    k = n-1 entry parenthetical."""
    if n_max < 3:
        raise OutOfRangeError(f"n_max = {n_max} < 3")
    rows = {}
    for n in range(3, n_max + 1):
        rows[n] = [(critical_p(n, k), k == n - 1) for k in range(1, n)]
    return ThresholdTable(n_max, rows)
