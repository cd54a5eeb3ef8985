import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from survreduce.data import SurvivalTask
from survreduce.partition import (CutGrid, CutStrategy, GridWarning, expand,
                                  expand_competing_risks, expand_multistate,
                                  expand_single_event, make_cuts)

TABLE2_GRID = CutGrid([0.5, 1.0, 1.5, 2.0, 2.5])


def test_width_grid_matches_table2(tumor3):
    np.testing.assert_allclose(make_cuts(tumor3, "width:0.5").cuts, TABLE2_GRID.cuts)


def test_single_event_time_gives_singleton_grid():
    task = SurvivalTask.from_arrays([1.0], [1])
    grid = make_cuts(task, "events")
    assert grid.J == 1 and grid.cuts[0] == 1.0


def test_type1_quantile_grid():
    task = SurvivalTask.from_arrays([1, 2, 3, 4], [1, 1, 1, 1])
    np.testing.assert_array_equal(make_cuts(task, "quantiles:2").cuts, [2.0, 4.0])


def test_quantile_grid_truncates_with_warning():
    task = SurvivalTask.from_arrays([1, 1, 2, 2], [1, 1, 1, 1])
    with pytest.warns(GridWarning):
        grid = make_cuts(task, "quantiles:4")
    assert grid.truncated and grid.J == 2


def test_default_grid_caps_at_twenty():
    rng = np.random.default_rng(0)
    t = rng.exponential(size=100)
    task = SurvivalTask.from_arrays(t, np.ones(100, int))
    assert make_cuts(task).J == 20
    small = SurvivalTask.from_arrays([1, 2, 3, 4], [1, 1, 1, 0])
    np.testing.assert_array_equal(make_cuts(small).cuts, [1, 2, 3, 4])  # censored max appended


def test_grid_covers_censored_tail():
    task = SurvivalTask.from_arrays([1.0, 2.0, 5.0], [1, 1, 0])
    for s in ("events", "quantiles:2", "equidistant:3"):
        assert make_cuts(task, s).cuts[-1] >= 5.0


def test_strategy_parse_round_trip():
    for text in ("quantiles:20", "equidistant:5", "width:0.5", "events", "explicit:0.5,1.0"):
        assert str(CutStrategy.parse(text)) == text
    with pytest.raises(ValueError):
        CutStrategy.parse("bogus")


def test_table2_rows(tumor3):
    long = expand_single_event(tumor3, TABLE2_GRID)
    assert list(long.ids) == ["1"] * 3 + ["2"] + ["3"] * 5
    np.testing.assert_array_equal(long.j, [1, 2, 3, 1, 1, 2, 3, 4, 5])
    np.testing.assert_array_equal(long.d, [0, 0, 1, 0, 0, 0, 0, 0, 1])
    np.testing.assert_allclose(long.t, [.5, .5, .3, .5, .5, .5, .5, .5, .1], atol=1e-15)
    np.testing.assert_array_equal(long.offset, np.log(long.t))
    np.testing.assert_array_equal(long.tend, [.5, 1, 1.5, .5, .5, 1, 1.5, 2, 2.5])
    np.testing.assert_array_equal(long.X[:, 0], [31] * 3 + [67] + [42] * 5)
    assert math.isclose(long.offset[2], math.log(0.3)) and long.offset[2] < -1.2


def test_table2_left_truncated():
    task = SurvivalTask.from_arrays([1.3, 0.5, 2.1], [1, 0, 1], entry=[0.5, 0.0, 1.5])
    long = expand_single_event(task, TABLE2_GRID)
    assert list(long.ids) == ["1", "1", "2", "3", "3"]
    np.testing.assert_array_equal(long.j, [2, 3, 1, 4, 5])
    np.testing.assert_array_equal(long.d, [0, 1, 0, 0, 1])


def test_entry_inside_interval_shortens_exposure():
    task = SurvivalTask.from_arrays([1.3], [1], entry=[0.7])
    long = expand_single_event(task, TABLE2_GRID)
    np.testing.assert_array_equal(long.j, [2, 3])
    np.testing.assert_allclose(long.t, [0.3, 0.3])


def test_time_on_cut_belongs_to_closing_interval():
    task = SurvivalTask.from_arrays([1.0], [1])
    long = expand_single_event(task, TABLE2_GRID)
    np.testing.assert_array_equal(long.j, [1, 2])
    np.testing.assert_array_equal(long.d, [0, 1])


def test_grid_must_cover_data(tumor3):
    with pytest.raises(ValueError, match="exceeds the last cut"):
        expand_single_event(tumor3, CutGrid([0.5, 1.0]))


def test_competing_risks_stacking():
    # subject 41 (discharge at 4) and 17058 (death at 22), 2-day intervals
    task = SurvivalTask.from_arrays([4.0, 22.0], [1, 1], ids=["41", "17058"],
                                    cause=["discharge", "death"])
    grid = make_cuts(task, "width:2")
    long = expand_competing_risks(task, grid)
    single = expand_single_event(task, grid)
    assert len(long) == 2 * len(single)
    first = long.take(long.ids == "41")
    np.testing.assert_array_equal(first.cause, [1, 1, 2, 2])
    np.testing.assert_array_equal(first.d, [0, 1, 0, 0])
    second = long.take(long.ids == "17058")
    assert second.d.sum() == 1
    hit = np.flatnonzero(second.d)[0]
    assert second.cause[hit] == 2 and second.j[hit] == 11


def test_single_cause_degenerates_to_single_event(tumor3):
    task = SurvivalTask.from_arrays(tumor3.time, tumor3.status, tumor3.X,
                                    cause=["a", "", "a"], kind="competing-risks")
    long = expand_competing_risks(task, TABLE2_GRID)
    single = expand_single_event(tumor3, TABLE2_GRID)
    np.testing.assert_array_equal(long.d, single.d)
    np.testing.assert_array_equal(long.t, single.t)
    assert set(long.cause) == {1}


def table3():
    return SurvivalTask.from_start_stop(["3", "3", "3"], ["1", "2", "2"], ["2", "3", "1"],
                                        [0.0, 1.0, 1.0], [1.0, 2.5, 2.5], [1, 1, 0],
                                        state_graph=[("1", "2"), ("2", "1"), ("2", "3")])


def test_multistate_counterfactual_rows():
    long = expand_multistate(table3(), TABLE2_GRID)
    first = long.take(long.from_state == "1")
    assert set(first.to_state) == {"2"}
    np.testing.assert_array_equal(first.j, [1, 2])
    np.testing.assert_array_equal(first.d, [0, 1])
    to3 = long.take((long.from_state == "2") & (long.to_state == "3"))
    to1 = long.take((long.from_state == "2") & (long.to_state == "1"))
    np.testing.assert_array_equal(to3.j, [3, 4, 5])
    np.testing.assert_array_equal(to3.d, [0, 0, 1])
    np.testing.assert_array_equal(to1.j, to3.j)
    np.testing.assert_array_equal(to1.t, to3.t)
    assert to1.d.sum() == 0


def test_one_edge_graph_equals_left_truncated_single_event():
    ms = SurvivalTask.from_start_stop(["1", "2"], ["a", "a"], ["b", "b"], [0.5, 0.0],
                                      [1.3, 2.1], [1, 0])
    se = SurvivalTask.from_arrays([1.3, 2.1], [1, 0], entry=[0.5, 0.0])
    a, b = expand_multistate(ms, TABLE2_GRID), expand_single_event(se, TABLE2_GRID)
    for name in ("j", "d", "t", "offset"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_long_csv_columns(tmp_path, tumor3):
    path = tmp_path / "long.csv"
    expand(tumor3, TABLE2_GRID).to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "id,j,tstart,tend,d,t,offset,age"
    assert len(lines) == 10


times = st.lists(st.floats(0.05, 10, allow_nan=False), min_size=1, max_size=25)


@settings(max_examples=60, deadline=None)
@given(times, st.data())
def test_expansion_properties(ts, data):
    n = len(ts)
    status = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    status[0] = 1
    task = SurvivalTask.from_arrays(ts, status)
    grid = make_cuts(task, data.draw(st.sampled_from(["events", "quantiles:5", "equidistant:4"])))
    long = expand_single_event(task, grid)
    per_t = np.bincount(long.source, long.t, n)
    np.testing.assert_allclose(per_t, task.time, rtol=1e-12)
    np.testing.assert_array_equal(np.bincount(long.source, long.d, n), task.status)
    assert np.all(long.t > 0)
    np.testing.assert_allclose(np.exp(long.offset), long.t, rtol=4e-16)
    # refining the grid keeps exposure
    finer = CutGrid(np.union1d(grid.cuts, grid.cuts[-1] * np.array([0.13, 0.5, 0.77])))
    np.testing.assert_allclose(np.bincount(expand_single_event(task, finer).source,
                                           expand_single_event(task, finer).t, n),
                               task.time, rtol=1e-12)
    # permuting subjects permutes rows
    perm = data.draw(st.permutations(range(n)))
    ptask = task.take(np.array(perm))
    plong = expand_single_event(ptask, grid)
    for new, old in enumerate(perm):
        np.testing.assert_array_equal(plong.t[plong.source == new], long.t[long.source == old])
