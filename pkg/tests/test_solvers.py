import itertools
import pytest

from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st

from pinwheelkit.errors import IndeterminateError
from pinwheelkit.errors import ScheduleFormatError
from pinwheelkit.instances import TaskPeriods
from pinwheelkit.instances import two_three_family
from pinwheelkit.instances import reference_covering_family
from pinwheelkit.solvers import IDLE
from pinwheelkit.solvers import CyclicSchedule
from pinwheelkit.solvers import decide
from pinwheelkit.solvers import decide_covering
from pinwheelkit.solvers import decide_packing
from pinwheelkit.solvers import kraft_covering_heuristic
from pinwheelkit.solvers import powtwo_packing_heuristic
from pinwheelkit.solvers import verify_covering
from pinwheelkit.solvers import verify_packing
from tests.oracles import covering_schedulable
from tests.oracles import packing_schedulable

small_periods = st.lists(st.integers(min_value=1, max_value=9), min_size=1, max_size=4)


def test_cyclic_schedule_validation():
    with pytest.raises(ScheduleFormatError):
        CyclicSchedule(())
    with pytest.raises(ScheduleFormatError):
        CyclicSchedule((1, -1))


def test_cyclic_schedule_unroll_and_json(tmp_path):
    schedule = CyclicSchedule((1, 2), (3,))
    assert schedule.unroll(6) == [3, 1, 2, 1, 2, 1]
    assert schedule.jobs() == {1, 2, 3}

    filename = tmp_path / 'schedule.json'
    schedule.dump(filename)
    assert CyclicSchedule.load(filename) == schedule
    assert schedule.to_dict() == {'prefix': [3], 'cycle': [1, 2]}


def test_schedule_without_cycle_is_rejected():
    with pytest.raises(ScheduleFormatError):
        CyclicSchedule.from_dict({'prefix': [1]})


@pytest.mark.parametrize('periods, cycle, expected', [
    ((2, 4, 4), (1, 2, 1, 3), True),
    ((2, 2), (1, 2), True),
    ((3,), (IDLE, IDLE, IDLE, 1), False),
    ((5,), (1,), True),
    ((2, 3), (1, 1), False)
])
def test_verify_packing(periods, cycle, expected):
    assert verify_packing(TaskPeriods.packing(periods), CyclicSchedule(cycle)) is expected


def test_verify_packing_checks_the_prefix():
    A = TaskPeriods.packing((2,))
    assert not verify_packing(A, CyclicSchedule((1,), (IDLE, IDLE)))
    assert verify_packing(A, CyclicSchedule((1,), (IDLE,)))


def test_verify_packing_rejects_out_of_range_jobs():
    with pytest.raises(ScheduleFormatError):
        verify_packing(TaskPeriods.packing((2,)), CyclicSchedule((1, 2)))


@pytest.mark.parametrize('periods, cycle, expected', [
    ((2, 2), (1, 2), True),
    ((2, 3), (1, 2), False),
    ((1,), (1,), True),
    ((2, 4, 4), (1, 2, 1, 3), True)
])
def test_verify_covering(periods, cycle, expected):
    assert verify_covering(TaskPeriods.covering(periods), CyclicSchedule(cycle)) is expected


def test_verify_covering_rejects_idle():
    with pytest.raises(ScheduleFormatError):
        verify_covering(TaskPeriods.covering((2, 2)), CyclicSchedule((1, IDLE)))


def test_verify_covering_fractional_periods():
    # two runs in every seven days fit a period of 7/2
    A = TaskPeriods.covering((1, '7/2'))
    assert verify_covering(A, CyclicSchedule((2, 1, 1, 1, 2, 1, 1)))
    assert not verify_covering(A, CyclicSchedule((2, 2, 1, 1, 1, 1, 1)))
    assert not verify_covering(A, CyclicSchedule((2, 1, 2, 1, 2, 1, 1)))


def test_decide_packing_examples():
    assert not decide_packing(TaskPeriods.packing((2, 3, 6))).schedulable

    verdict = decide_packing(TaskPeriods.packing((2, 4, 4)))
    assert verdict.schedulable
    assert verify_packing(TaskPeriods.packing((2, 4, 4)), verdict.schedule)
    assert verdict.schedule.prefix == ()


def test_decide_covering_examples():
    verdict = decide_covering(TaskPeriods.covering((2, 2)))
    assert verdict.schedulable
    assert sorted(verdict.schedule.cycle) == [1, 2]

    assert not decide_covering(TaskPeriods.covering((2, 3))).schedulable


def test_decide_edge_cases():
    empty = decide_packing(TaskPeriods.packing(()))
    assert empty.schedulable and empty.schedule.cycle == (IDLE,)

    assert not decide_covering(TaskPeriods.covering(())).schedulable
    assert not decide_packing(TaskPeriods.packing((1, 7))).schedulable
    assert decide_packing(TaskPeriods.packing((1,))).schedulable


def test_decide_rejects_fractional_and_mismatched_instances():
    with pytest.raises(ValueError):
        decide_packing(TaskPeriods.packing(('5/2',)))
    with pytest.raises(ValueError):
        decide_covering(TaskPeriods.packing((2, 2)))


def test_decide_dispatches_on_kind():
    assert decide(TaskPeriods.covering((2, 2))).schedulable
    assert not decide(TaskPeriods.packing((2, 3, 6))).schedulable


def test_state_budget_is_enforced():
    with pytest.raises(IndeterminateError) as error:
        decide_packing(TaskPeriods.packing((2, 4, 8, 16, 16)), state_budget=5)
    assert error.value.states > 5


@pytest.mark.parametrize('A', list(two_three_family(50)), ids=str)
def test_two_three_family_is_unschedulable(A):
    assert not decide_packing(A).schedulable


@pytest.mark.parametrize('k', [2, 3, 4])
def test_reference_covering_family_is_unschedulable(k):
    assert not decide_covering(reference_covering_family(k)).schedulable


@given(small_periods)
@settings(derandomize=True, max_examples=300, deadline=None)
def test_decide_packing_agrees_with_oracle(periods):
    A = TaskPeriods.packing(periods)
    verdict = decide_packing(A, debug=True)
    assert verdict.schedulable == packing_schedulable(A.integers())
    if verdict.schedulable:
        assert verify_packing(A, verdict.schedule)


@given(small_periods)
@settings(derandomize=True, max_examples=300, deadline=None)
def test_decide_covering_agrees_with_oracle(periods):
    A = TaskPeriods.covering(periods)
    verdict = decide_covering(A, debug=True)
    assert verdict.schedulable == covering_schedulable(A.integers())
    if verdict.schedulable:
        assert verify_covering(A, verdict.schedule)


@pytest.mark.parametrize('base', [(2, 4), (3, 3), (2, 5), (3, 4)])
def test_packing_is_monotone_in_added_period(base):
    previous = False
    for a in range(2, 12):
        schedulable = decide_packing(TaskPeriods.packing(base + (a,))).schedulable
        assert schedulable or not previous
        previous = schedulable


@pytest.mark.parametrize('base', [(2, 3), (2, 4), (3, 3), (2, 2, 5)])
def test_covering_is_monotone_in_added_period(base):
    # a shorter period only loosens the covering constraint
    previous = True
    for a in range(1, 12):
        schedulable = decide_covering(TaskPeriods.covering(base + (a,))).schedulable
        assert previous or not schedulable
        previous = schedulable


@given(small_periods, st.integers(min_value=1, max_value=9))
@settings(derandomize=True, max_examples=200, deadline=None)
def test_extra_jobs_keep_covering_schedulable_and_packing_unschedulable(periods, extra):
    covering = TaskPeriods.covering(periods)
    if decide_covering(covering).schedulable:
        assert decide_covering(covering.with_periods(covering.periods + (extra,))).schedulable

    packing = TaskPeriods.packing(periods)
    if not decide_packing(packing).schedulable:
        assert not decide_packing(packing.with_periods(packing.periods + (extra,))).schedulable


def test_kraft_covering_heuristic():
    A = TaskPeriods.covering((2, 3, 4))
    schedule = kraft_covering_heuristic(A)
    assert schedule is not None and verify_covering(A, schedule)

    assert kraft_covering_heuristic(TaskPeriods.covering((3, 3))) is None
    assert kraft_covering_heuristic(TaskPeriods.covering(())) is None


def test_powtwo_packing_heuristic():
    A = TaskPeriods.packing((2, 4, 8, 8))
    schedule = powtwo_packing_heuristic(A)
    assert schedule is not None and verify_packing(A, schedule)

    assert powtwo_packing_heuristic(TaskPeriods.packing((2, 3, 6))) is None
    assert powtwo_packing_heuristic(TaskPeriods.packing((8,))) is not None
    assert powtwo_packing_heuristic(TaskPeriods.packing(())).cycle == (IDLE,)


@given(st.lists(st.integers(min_value=1, max_value=40), min_size=1, max_size=8))
@settings(derandomize=True, max_examples=200)
def test_heuristics_only_return_valid_schedules(periods):
    packing = TaskPeriods.packing(periods)
    schedule = powtwo_packing_heuristic(packing)
    if schedule is not None:
        assert verify_packing(packing, schedule)

    covering = TaskPeriods.covering(periods)
    schedule = kraft_covering_heuristic(covering)
    if schedule is not None:
        assert verify_covering(covering, schedule)


def test_every_cycle_of_a_small_instance_is_judged_consistently():
    # a brute force over all cycles of length 4 finds a schedule iff the decider does
    A = TaskPeriods.packing((2, 4, 4))
    found = any(verify_packing(A, CyclicSchedule(c)) for c in itertools.product(range(4), repeat=4))
    assert found == decide_packing(A).schedulable
