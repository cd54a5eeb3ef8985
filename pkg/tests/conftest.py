import numpy as np
import pytest

from survreduce.data import SurvivalTask


@pytest.fixture
def tumor3():
    """Three subjects with ages; times 1.3 (event), 0.5 (censored), 2.1 (event)."""
    return SurvivalTask.from_arrays([1.3, 0.5, 2.1], [1, 0, 1], np.array([[31.0], [67.0], [42.0]]),
                                    feature_names=["age"])


def random_single(rng, n=None, censor=0.4, digits=2):
    """Small right-censored data set with ties (rounded exponential times)."""
    n = int(rng.integers(5, 51)) if n is None else n
    t = np.round(rng.exponential(size=n), digits) + 10.0 ** -digits
    d = (rng.random(n) > censor).astype(int)
    d[0] = 1
    return t, d


def random_competing(rng, n=None, q=2):
    while True:
        t, d = random_single(rng, n)
        c = rng.integers(1, q + 1, len(t)).astype(str)
        c[d == 0] = ""
        task = SurvivalTask.from_arrays(t, d, cause=c)
        if len(task.cause_labels) == q:
            return task


def illness_death(rng, n=40):
    """Start-stop data for 0 -> 1 -> 2 and 0 -> 2 with constant hazards."""
    ids, frm, to, entry, exit_, status = [], [], [], [], [], []
    for i in range(n):
        c = rng.exponential(3.0)
        t01, t02 = rng.exponential(1.0), rng.exponential(2.0)
        first = min(t01, t02, c)
        if first == c:
            ids.append(i); frm.append("0"); to.append("1"); entry.append(0.0)
            exit_.append(c); status.append(0)
            continue
        target = "1" if t01 < t02 else "2"
        ids.append(i); frm.append("0"); to.append(target); entry.append(0.0)
        exit_.append(first); status.append(1)
        if target == "1":
            t12 = first + rng.exponential(1.5)
            ids.append(i); frm.append("1"); to.append("2"); entry.append(first)
            exit_.append(min(t12, c)); status.append(int(t12 <= c))
    return SurvivalTask.from_start_stop(ids, frm, to, entry, exit_, status,
                                        state_graph=[("0", "1"), ("0", "2"), ("1", "2")])


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion (parametrized cases merged)."""
    results = {}
    for status in ("passed", "failed", "skipped"):
        for rep in terminalreporter.stats.get(status, []):
            if rep.when != "call" or "test_acceptance.py" not in rep.nodeid:
                continue
            props = dict(rep.user_properties)
            if "criterion" not in props:
                continue
            number, title = props["criterion"].split(" ", 1)
            title = title.split(" (")[0]
            ok, _ = results.get(number, (True, title))
            results[number] = (ok and status == "passed", title)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, title = results[number]
        terminalreporter.write_line(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}")
