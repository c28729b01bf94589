import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from projlab.directions import D0, Ds, covering_exponents, mask_intervals, parse_seq, sample_directions
from projlab.fractals import (
    FOUR_CORNER, DigitSet, DyadicPointSet, Similitude, box_counts, box_report, collision_bounds_exact_check,
    dim_regress, gen_digit_set, gen_ifs, lower_box_estimate, periodic_positions, project, read_points,
    write_points,
)

F = Fraction


def test_ifs_examples():
    assert gen_ifs(FOUR_CORNER, 1).as_set() == {(0, 0), (0, 3), (3, 0), (3, 3)}
    s = gen_ifs(FOUR_CORNER, 3)
    assert len(s) == 64 and s.R == 6
    one = gen_ifs([Similitude(F(1, 2), (0, 0))], 5)
    assert len(one) == 1 and one.R == 5
    with pytest.raises(ValueError):
        gen_ifs([Similitude(F(1, 3), (0, 0))], 2)
    with pytest.raises(ValueError):
        gen_ifs([Similitude(F(1, 4), (F(7, 8), 0))], 2)


def test_digit_set_examples():
    assert len(gen_digit_set({1, 2}, {1, 2}, 2)) == 16
    assert gen_digit_set({1}, {1}, 2).as_set() == {(0, 0), (0, 2), (2, 0), (2, 2)}
    assert gen_digit_set(set(), set(), 5).as_set() == {(0, 0)}


def test_four_corner_oracles():
    for m in range(1, 11):
        s = gen_ifs(FOUR_CORNER, m)
        assert box_counts(s, [2 * m])[2 * m] == 4**m
        for e in [(1.0, 0.0), (0.0, 1.0)]:
            px = project(s, e, 2 * m)
            assert box_counts(px, [2 * j for j in range(m + 1)]) == {2 * j: 2**j for j in range(m + 1)}


def test_box_count_examples():
    s = gen_ifs(FOUR_CORNER, 3)
    assert box_counts(s, [6]) == {6: 64}
    assert box_counts(project(s, (1.0, 0.0), 6), [2, 4, 6]) == {2: 2, 4: 4, 6: 8}
    full = gen_digit_set(range(1, 5), range(1, 5), 4)
    assert box_counts(full, [1, 2, 3, 4]) == {k: 4**k for k in range(1, 5)}
    with pytest.raises(ValueError):
        box_counts(s, [7])


def test_regression_examples():
    assert dim_regress([(2, 4), (4, 16), (6, 64)]) == pytest.approx((1.0, 0.0))
    assert dim_regress([(2, 16), (4, 256)])[0] == pytest.approx(2.0)
    assert dim_regress([(2, 2), (4, 4), (6, 8)])[0] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        dim_regress([(2, 4)])


def test_lower_box_examples():
    spec = mask_intervals(D0, parse_seq("list:2,8,32"), 96)
    counts = {r.k: 2**r.bound_log2 for r in covering_exponents(spec)}
    assert lower_box_estimate(counts, [16, 96]) == F(1, 3)
    assert lower_box_estimate({4: 1, 8: 1}, [4, 8]) == 0
    full = gen_digit_set(range(1, 6), range(1, 6), 5)
    assert lower_box_estimate(box_counts(full, [1, 3, 5]), [1, 3, 5]) == 2
    with pytest.raises(ValueError):
        lower_box_estimate({4: 1}, [])


def test_single_cell_projects_to_few_cells():
    # the shadow of a cell has length |cos| + |sin| <= sqrt 2, so at most 3 cells
    one = DyadicPointSet(8, 2, np.array([[100, 37]]))
    for th in np.linspace(0.1, 3.0, 13):
        assert 1 <= len(project(one, (math.cos(th), math.sin(th)), 8)) <= 3


def test_unit_vector_check():
    with pytest.raises(ValueError):
        project(gen_ifs(FOUR_CORNER, 2), (1.0, 0.1), 4)


def test_digit_slope_periodic():
    free = periodic_positions(20, 5, {0, 2})
    s = gen_digit_set(free, free, 20)
    c = box_counts(s, [5, 10, 15, 20])
    assert dim_regress(c.items())[0] == pytest.approx(0.8)


def test_box_report_and_io(tmp_path):
    s = gen_ifs(FOUR_CORNER, 3)
    rep = box_report(s, [2, 4, 6], [2, 6])
    assert rep.counts == (4, 16, 64) and rep.lower_estimate == 1
    for name in ["pts.txt", "pts.dps"]:
        write_points(s, tmp_path / name)
        assert read_points(tmp_path / name) == s
    px = project(s, (0.6, 0.8), 6)
    write_points(px, tmp_path / "p.txt")
    assert read_points(tmp_path / "p.txt") == px


def test_collision_bound_below_exact_count():
    free = periodic_positions(12, 5, {0, 2})
    ds = DigitSet(free, free, 12)
    spec = mask_intervals(Ds(F(1, 2)), parse_seq("list:2,8"), 12)
    for d in sample_directions(spec, 6, 3):
        lb = ds.collision_lower_bounds(d.unit_vector, range(1, 13))
        ex = collision_bounds_exact_check(ds, d.unit_vector, range(1, 13))
        assert all(lb[k] <= ex[k] * (1 + 1e-9) for k in lb)


def test_collision_bound_axis_direction_is_exact():
    free = [1, 3, 6, 8]
    ds = DigitSet(free, free, 8)
    lb = ds.collision_lower_bounds((1.0, 0.0), range(1, 9))
    # the closed window at k = 8 holds 3 lattice values, each no likelier than 0
    assert 16 / 3 - 1e-9 <= lb[8] <= 16


cells = st.lists(st.tuples(st.integers(0, 63), st.integers(0, 63)), min_size=1, max_size=40)


@given(cells, cells, st.floats(0.01, 3.13))
def test_project_monotone(a, b, th):
    A = DyadicPointSet(6, 2, np.array(a))
    AB = DyadicPointSet(6, 2, np.array(a + b))
    e = (math.cos(th), math.sin(th))
    assert project(A, e, 6).as_set() <= project(AB, e, 6).as_set()


@given(cells, st.floats(0.01, 3.13), st.integers(0, 8))
def test_project_marks_every_center(a, th, R_out):
    A = DyadicPointSet(6, 2, np.array(a))
    e = (math.cos(th), math.sin(th))
    px = project(A, e, R_out)
    got = {int(v) - px.offset for (v,) in px.as_set()}
    for x, y in a:
        z = (e[0] * (x + 0.5) + e[1] * (y + 0.5)) / 64 * 2**R_out
        assert math.floor(z) in got


@given(cells, st.integers(0, 6))
def test_box_counts_match_brute_force(a, k):
    A = DyadicPointSet(6, 2, np.array(a))
    assert box_counts(A, [k])[k] == len({(x >> (6 - k), y >> (6 - k)) for x, y in a})
