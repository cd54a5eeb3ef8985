import numpy as np
import pytest

from survreduce.data import (CATEGORICAL, COMPETING, MULTISTATE, SINGLE, DataError, FormatSpec,
                             SurvivalTask, export_csv, load_csv, validate, windows)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_standard(tmp_path):
    p = write(tmp_path, "id,time,status,age\n1,1.3,1,31\n2,0.5,0,67\n3,2.1,1,42\n")
    task = load_csv(p)
    assert task.kind == SINGLE
    assert len(task) == 3
    assert task.feature_names == ["age"]
    np.testing.assert_array_equal(task.time, [1.3, 0.5, 2.1])
    np.testing.assert_array_equal(task.status, [1, 0, 1])
    np.testing.assert_array_equal(task.X[:, 0], [31, 67, 42])
    assert list(task.ids) == ["1", "2", "3"]


def test_minimal_task_without_features(tmp_path):
    task = load_csv(write(tmp_path, "id,time,status\n1,1,1\n"))
    assert len(task) == 1 and task.n_features == 0


def test_start_stop_record(tmp_path):
    text = ("id,from,to,episode,tstart,tstop,status\n"
            "3,1,2,1,0,1,1\n3,2,3,1,1,2.5,1\n3,2,1,1,1,2.5,0\n")
    task = load_csv(write(tmp_path, text))
    assert task.kind == MULTISTATE
    rec = task.records[1]
    assert (rec.id, rec.from_state, rec.to_state, rec.episode) == ("3", "2", "3", 1)
    assert (rec.entry, rec.exit, rec.status) == (1.0, 2.5, 1)


@pytest.mark.parametrize("text, needle", [
    ("id,time\n1,1\n", "status"),
    ("id,time,status\n1,abc,1\n", "line 2"),
    ("id,time,status\n1,1,1\n2,1,2\n", "line 3"),
    ("id,time,status,entry\n1,1,1,1\n", "time must exceed entry"),
    ("id,time,status,x\n1,1,1,\n", "line 2"),
])
def test_load_errors(tmp_path, text, needle):
    with pytest.raises(DataError, match=needle):
        load_csv(write(tmp_path, text))


def test_unknown_cause_label(tmp_path):
    p = write(tmp_path, "id,time,status,cause\n1,1,1,a\n2,2,1,b\n3,3,1,c\n")
    with pytest.raises(DataError, match="cause"):
        load_csv(p, FormatSpec(causes=("a", "b")))


def test_validate_table2_is_clean(tumor3):
    assert validate(tumor3) == []


def test_validate_time_equal_entry():
    task = SurvivalTask.from_arrays([1.0, 2.0], [1, 1], entry=[1.0, 0.0])
    msgs = [str(v) for v in validate(task)]
    assert len(msgs) == 1 and "time must exceed entry" in msgs[0]


def test_validate_single_cause_competing_risks():
    task = SurvivalTask.from_arrays([1.0, 2.0], [1, 1], cause=["a", "a"])
    assert any("q ≥ 2 causes" in str(v) for v in validate(task))


def test_validate_needs_an_event():
    task = SurvivalTask.from_arrays([1.0, 2.0], [0, 0])
    assert any("status = 1" in str(v) for v in validate(task))


def test_validate_unknown_edge():
    task = SurvivalTask.from_start_stop(["1"], ["0"], ["2"], [0.0], [1.0], [1],
                                        state_graph=[("0", "1")])
    assert any("not an edge" in str(v) for v in validate(task))


def test_round_trip(tmp_path):
    text = ("id,time,status,cause,entry,age,sex\n"
            "a,1.25,1,death,0,31.5,m\n"
            "b,0.5,0,,0.1,67,f\n"
            "c,2.1,1,discharge,0,42,m\n")
    spec = FormatSpec(categorical=("sex",))
    task = load_csv(write(tmp_path, text), spec)
    assert task.kind == COMPETING
    assert task.cause_labels == ("death", "discharge")
    assert task.features[1].kind == CATEGORICAL and task.features[1].levels == ("m", "f")
    out = tmp_path / "out.csv"
    export_csv(task, out)
    again = load_csv(out, spec)
    for name in ("time", "status", "entry", "cause", "X"):
        np.testing.assert_array_equal(getattr(again, name), getattr(task, name))
    assert again.cause_labels == task.cause_labels
    assert list(again.ids) == list(task.ids)


def test_round_trip_start_stop(tmp_path):
    text = ("id,from,to,episode,tstart,tstop,status,x\n"
            "1,0,1,1,0,1.5,1,0.25\n1,1,2,1,1.5,3,0,0.25\n2,0,2,1,0,2,1,-1\n")
    task = load_csv(write(tmp_path, text))
    out = tmp_path / "out.csv"
    export_csv(task, out)
    assert out.read_text() == text


def test_task_is_immutable(tumor3):
    with pytest.raises(ValueError):
        tumor3.time[0] = 5.0


def test_select_subjects_keeps_all_rows():
    task = SurvivalTask.from_start_stop(["1", "1", "2"], ["0", "1", "0"], ["1", "2", "1"],
                                        [0, 1, 0], [1, 2, 3], [1, 1, 0])
    sub = task.select_subjects(["1"])
    assert len(sub) == 2 and set(sub.ids) == {"1"}


def test_windows_merge_counterfactual_rows():
    task = SurvivalTask.from_start_stop(["1", "1"], ["0", "0"], ["1", "2"], [0, 0], [1, 1],
                                        [0, 1])
    assert windows(task) == [(1, 1)]
