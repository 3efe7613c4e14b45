from fractions import Fraction

import pytest

from fdlab import thresholds
from fdlab.errors import OutOfRangeError
from fdlab.thresholds import (
    INFINITY,
    ExponentValue,
    cellularity_p,
    critical_p,
    fig1_table,
    hausdorff_exponent,
    neo_r,
    top_degree_alternatives,
)


def test_critical_p_examples():
    assert critical_p(3, 1) == Fraction(1, 2)
    assert critical_p(3, 2) == Fraction(1, 2)
    assert critical_p(4, 2) == 1
    assert critical_p(6, 1) == 2
    assert critical_p(7, 4) == Fraction(3, 4)
    assert critical_p(8, 7) == 3


def test_critical_p_range():
    with pytest.raises(OutOfRangeError):
        critical_p(2, 1)
    with pytest.raises(OutOfRangeError):
        critical_p(4, 0)
    with pytest.raises(OutOfRangeError):
        critical_p(4, 4)


def test_critical_p_row_symmetry():
    # (n-k-1)/(k+1) at k and (k-1)/(n-k+1) at n-k agree
    for n in range(3, 12):
        for k in range(1, n - 1):  # exclude the parenthetical column
            assert critical_p(n, k) == critical_p(n, n - k)


def test_critical_p_middle_is_one():
    for n in (4, 6, 8, 10):
        assert critical_p(n, n // 2) == 1


def test_critical_p_monotone_toward_middle():
    for n in range(4, 12):
        vals = [critical_p(n, k) for k in range(1, n // 2 + 1)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_exponent_value_exact():
    v = critical_p(7, 2)
    assert isinstance(v, ExponentValue)
    assert (v.num, v.den) == (4, 3)
    assert str(v) == "4/3"
    assert str(critical_p(4, 2)) == "1"


def test_hausdorff_exponent():
    assert hausdorff_exponent(3, 2) == 1
    assert hausdorff_exponent(3, Fraction(1, 2)) == 2
    # at the degree-1 critical exponent the fibers just fail dimension 2
    assert hausdorff_exponent(3, critical_p(3, 1)) == 2
    with pytest.raises(OutOfRangeError):
        hausdorff_exponent(3, Fraction(1, 3))
    with pytest.raises(OutOfRangeError):
        hausdorff_exponent(3, 0.5)  # floats are not exact rationals


def test_cellularity_and_top_degree():
    assert cellularity_p(3) == Fraction(1, 2)
    assert cellularity_p(6) == 2
    with pytest.raises(OutOfRangeError):
        cellularity_p(2)
    for n in range(3, 20):
        alt = top_degree_alternatives(n)
        assert alt["third_branch"] == alt["cellularity"]
        assert alt["discrepant"] is False


def test_neo_r():
    assert neo_r(3, 6, 1) == Fraction(2, 3)
    assert neo_r(3, INFINITY, 2) == 2
    with pytest.raises(OutOfRangeError):
        neo_r(3, 2, 1)  # p < n
    with pytest.raises(OutOfRangeError):
        neo_r(3, 6, 0)
    with pytest.raises(OutOfRangeError):
        neo_r(3, 6, INFINITY)


def test_fig1_table_rows():
    table = fig1_table(8)
    assert [str(v) for v, _ in table.row(3)] == ["1/2", "1/2"]
    assert [str(v) for v, _ in table.row(7)] == ["5/2", "4/3", "3/4", "3/4", "4/3", "5/2"]
    for n in range(3, 9):
        parens = [p for _, p in table.row(n)]
        assert parens == [False] * (n - 2) + [True]
    with pytest.raises(OutOfRangeError):
        fig1_table(2)


def test_fig1_table_csv():
    csv_text = fig1_table(4).to_csv()
    lines = csv_text.splitlines()
    assert lines[0] == "n,k=1,k=2,k=3"
    assert lines[1] == "3,1/2,(1/2),"
    assert lines[2] == "4,1,1,(1)"
