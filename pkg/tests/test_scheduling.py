import pytest
from hypothesis import given
from hypothesis import strategies as st

from crowdsim.domain import DomainError
from crowdsim.scheduling import (
    Relation,
    ScheduleEntry,
    classify,
    effort_record,
    effort_record_from_days,
    entries_from_tasks,
    etpt,
    etst,
    mett,
    nominal_durations,
    project_duration,
    project_effort_days,
    schedule_acceleration,
    task_effort,
)


def E(tid, esd, led):
    return ScheduleEntry(tid, float(esd), float(led))


@pytest.mark.parametrize("b, relation", [((12, 20), Relation.SEQUENTIAL), ((5, 20), Relation.PARALLEL), ((10, 20), Relation.SEQUENTIAL)])
def test_classify_pairs(b, relation):
    out = {e.task_id: e for e in classify([E("A", 0, 10), E("B", *b)]).entries}
    assert out["B"].classification is relation


def test_classify_unsorted_and_chained_overlap():
    # C overlaps B only, still joins the running group
    out = classify([E("C", 15, 22), E("A", 0, 10), E("B", 5, 20), E("D", 30, 31)])
    groups = {gid: sorted(e.task_id for e in es) for gid, es in out.groups().items()}
    assert groups == {"P1": ["A", "B", "C"], "S": ["D"]}


def test_negative_duration():
    with pytest.raises(DomainError):
        classify([E("A", 5, 1)])
    with pytest.raises(DomainError):
        mett(E("A", 5, 1))


@pytest.mark.parametrize("esd, led, expected", [(4, 20, 16), (3, 3, 0), (0, 30, 30)])
def test_mett(esd, led, expected):
    assert mett(E("x", esd, led)) == expected


def test_etst_and_etpt():
    assert etst([E("a", 0, 16), E("b", 16, 21)]) == 21
    assert etst([]) == 0
    assert etst([E("a", 0, 7)]) == 7
    assert etpt([E("a", 2, 10), E("b", 3, 12)]) == 10
    assert etpt([E("a", 0, 10)]) == 10
    assert etpt([]) == 0
    assert etpt([E("a", 2, 10), E("b", 3, 12)], literal=True) == 14


def test_project_duration():
    chain_and_group = [E("a", 0, 16), E("b", 16, 21), E("c", 30, 35), E("d", 32, 40)]
    assert project_duration(chain_and_group) == 21 + 10
    assert project_duration([E("a", 0, 16)]) == 16


def test_example_project_span():
    # 19 back-to-back tasks spanning 110 days
    bounds = [round(i * 110 / 19, 6) for i in range(20)]
    entries = [E(f"T{i}", bounds[i], bounds[i + 1]) for i in range(19)]
    assert project_duration(entries) == pytest.approx(110)


@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 30)), min_size=1, max_size=15))
def test_duration_never_exceeds_sum_of_metts(spans):
    entries = [E(f"t{i}", s, s + d) for i, (s, d) in enumerate(spans)]
    total = sum(mett(e) for e in entries)
    lo = min(e.esd for e in entries)
    hi = max(e.led for e in entries)
    assert project_duration(entries) <= total + 1e-9
    assert project_duration(entries) <= hi - lo + 1e-9


@pytest.mark.parametrize("efforts, expected", [([10, 5], 9.0), ([7], 7.0), ([4, 4], 4.0), ([], None)])
def test_task_effort(efforts, expected):
    assert task_effort(efforts) == expected


@pytest.mark.parametrize(
    "effort, expected",
    [(273, (17.7, 16.5, 19.1)), (501.7, (20.9, 22.4, 23.3)), (388.8, (19.5, 19.7, 21.5)), (629.1, (22.3, 25.1, 25.2))],
)
def test_nominal_durations(effort, expected):
    for got, want in zip(nominal_durations(effort), expected):
        assert got == pytest.approx(want, abs=0.1)


def test_nominal_guards():
    assert nominal_durations(1)[1] == 1.0
    with pytest.raises(DomainError):
        nominal_durations(0)
    with pytest.raises(DomainError):
        schedule_acceleration(10, 0)


def test_schedule_acceleration():
    assert round(schedule_acceleration(17.7, 9), 2) == 1.97
    assert schedule_acceleration(9, 9) == 1.0


def test_four_project_average():
    rows = [effort_record(str(i), e, a) for i, (e, a) in enumerate(((273, 9), (501.7, 13), (388.8, 11), (629.1, 14)))]
    assert sum(r.avg_sar for r in rows) / 4 == pytest.approx(1.82, abs=0.05)


def test_effort_record_from_days():
    rec = effort_record_from_days("P", 6005.7, 9 * 365.25 / 12)
    assert rec.effort_worker_months == pytest.approx(273, abs=0.02)
    assert rec.actual_duration_months == pytest.approx(9)
    assert rec.effort_worker_days == 6005.7


def test_history_helpers(history_dir):
    from crowdsim.history import load_history

    tables = load_history(history_dir)
    p1 = [t for t in tables.tasks.values() if t.project_id == "P1"]
    entries = entries_from_tasks(p1)
    assert [(e.esd, e.led) for e in entries] == [(0.0, 10.0), (2.0, 18.0)]
    assert project_duration(entries) == 18.0
    # T1: single submitter 8 days; T2: single submitter 4 days
    assert project_effort_days(p1, tables.worker_tasks) == 12.0
