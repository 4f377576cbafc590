import itertools
import pytest

from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from fractions import Fraction

from pinwheelkit import enumeration
from pinwheelkit.enumeration import INDETERMINATE
from pinwheelkit.enumeration import REMOVE_MAX
from pinwheelkit.enumeration import REMOVE_MAX_BELOW_17
from pinwheelkit.enumeration import SCHEDULABLE
from pinwheelkit.enumeration import UNSCHEDULABLE
from pinwheelkit.enumeration import FamilySpec
from pinwheelkit.enumeration import builtin_specs
from pinwheelkit.enumeration import generate_family
from pinwheelkit.enumeration import get_spec
from pinwheelkit.enumeration import run_campaign
from pinwheelkit.enumeration import solve_member
from pinwheelkit.errors import CampaignError
from pinwheelkit.errors import FamilySpecError
from pinwheelkit.instances import COVERING
from pinwheelkit.instances import PACKING
from pinwheelkit.instances import TaskPeriods
from pinwheelkit.instances import density_prime
from pinwheelkit.instances import w_prefix_density
from pinwheelkit.progress import ProgressTimer
from pinwheelkit.store import Certificate
from pinwheelkit.store import read_store
from tests.oracles import minimal_members


@pytest.fixture
def toy_spec():
    return FamilySpec('TOY', COVERING, 3, 'D', Fraction(3, 2))


def _vectors(spec):
    return [A.integers() for A in generate_family(spec)]


def test_builtin_spec_names():
    names = [spec.name for spec in builtin_specs()]
    assert len(names) == len(set(names))
    assert {'CLAIM5', 'CASE3-SUB1', 'CASE3-SUB2', 'CASE3-SUB3', 'CASE4-SUB1', 'CASE4-SUB2', 'CASE4-SUB3',
            'CASE5', 'CASE6', 'CASE7-SUB1'} <= set(names)


def test_builtin_thresholds():
    assert get_spec('CLAIM5').lower_bound == Fraction(47, 40)
    assert get_spec('claim5').density_fn == 'Dprime'

    case5 = get_spec('CASE5')
    assert case5.lower_bound == w_prefix_density(16) == Fraction(103, 90)
    assert case5.strict and case5.minimality == REMOVE_MAX

    case3 = get_spec('CASE3-SUB3')
    assert case3.top_triple == (17, 22)
    assert case3.minimality == REMOVE_MAX_BELOW_17

    assert get_spec('CASE6').lower_bound == Fraction(1841, 1530) - Fraction(3, 64)


def test_unknown_spec():
    with pytest.raises(FamilySpecError):
        get_spec('CASE99')


@pytest.mark.parametrize('changes', [
    {'kind': 'patrolling'},
    {'density_fn': 'Dmax'},
    {'density_fn': 'Dc'},
    {'minimality': 'RemoveMin'},
    {'top_triple': (17, 22)},
    {'minimality': REMOVE_MAX_BELOW_17},
    {'min_element': 4}
])
def test_family_spec_validation(toy_spec, changes):
    with pytest.raises(FamilySpecError):
        replace(toy_spec, **changes)


def test_family_spec_fingerprint_tracks_definition(toy_spec):
    assert toy_spec.fingerprint() == FamilySpec('TOY', COVERING, 3, 'D', '3/2').fingerprint()
    assert toy_spec.fingerprint() != replace(toy_spec, strict=True).fingerprint()


def test_toy_family_matches_brute_force(toy_spec):
    members = _vectors(toy_spec)
    expected = minimal_members(range(1, 4), lambda a: Fraction(1, a), toy_spec.meets, 6)

    assert len(members) == len(set(members))
    assert set(members) == expected
    assert members == sorted(members)


def test_claim5_at_reduced_scale_matches_brute_force():
    spec = replace(get_spec('CLAIM5'), max_element=4)
    expected = minimal_members(range(1, 5), spec.weight, spec.meets, 6)
    assert set(_vectors(spec)) == expected
    assert spec.weight(4) == density_prime(TaskPeriods.covering((4,)))


def test_requires_and_excludes(toy_spec):
    spec = replace(toy_spec, requires=(2,), excludes=(1,))
    expected = minimal_members(range(1, 4), lambda a: Fraction(1, a), spec.meets, 6, requires=(2,), excludes=(1,))
    assert set(_vectors(spec)) == expected
    assert all(2 in members and 1 not in members for members in expected)


def test_range_density_constraint(toy_spec):
    spec = replace(toy_spec, range_density_constraints=((2, Fraction(1)),))
    members = _vectors(spec)
    assert members
    assert all(sum(Fraction(1, a) for a in m if a <= 2) > 1 for m in members)


def test_contradictory_family_is_empty():
    spec = FamilySpec('EMPTY', COVERING, 2, 'D', 2, strict=True, minimality=None, max_jobs=2)
    assert _vectors(spec) == []


def test_unbounded_family_is_rejected(toy_spec):
    with pytest.raises(FamilySpecError):
        list(generate_family(replace(toy_spec, minimality=None)))


def test_capped_family_without_minimality(toy_spec):
    spec = replace(toy_spec, minimality=None, max_jobs=3)
    members = _vectors(spec)
    assert (1, 1) in members and (1, 1, 1) in members
    assert all(len(m) <= 3 for m in members)


def test_triple_family_order_and_shape():
    spec = get_spec('CASE3-SUB3')
    members = list(itertools.islice(generate_family(spec), 200))
    assert members

    tops = [A.integers()[-1] for A in members]
    assert tops == sorted(tops)
    for A in members:
        periods = A.integers()
        assert periods[-3:] == (periods[-1],) * 3
        assert 17 <= periods[-1] <= 22
        assert all(p <= 16 for p in periods[:-3])


def _meets_cutoffs(spec, members):
    return all(sum((Fraction(1, a) for a in members if a <= cutoff), Fraction(0)) > bound
               for cutoff, bound in spec.range_density_constraints)


def _expected_members(spec):
    elements = range(spec.min_element, spec.max_element + 1)
    if spec.top_triple is None:
        found = minimal_members(elements, spec.weight, spec.meets, 9, spec.requires, spec.excludes)
    else:
        found = set()
        lo, hi = spec.top_triple
        for m1 in range(lo, hi + 1):
            base = 3 * spec.weight(m1)
            if spec.meets(base):
                continue
            rest = minimal_members(elements, spec.weight, lambda value: spec.meets(value + base), 9,
                                   spec.requires, spec.excludes)
            found |= {members + (m1,) * 3 for members in rest}
    return {members for members in found if _meets_cutoffs(spec, members)}


@pytest.mark.parametrize('name', [spec.name for spec in builtin_specs()])
def test_builtin_families_at_reduced_scale_match_brute_force(name):
    spec = replace(get_spec(name), max_element=6)
    members = _vectors(spec)
    assert len(members) == len(set(members))
    assert set(members) == _expected_members(spec)


@pytest.mark.parametrize('name', ['CLAIM5', 'CASE5'])
def test_leading_members_are_minimal_and_ordered(name):
    spec = get_spec(name)
    members = [A.integers() for A in itertools.islice(generate_family(spec), 1000)]
    assert len(members) == 1000
    assert len(set(members)) == len(members)
    assert members == sorted(members)
    for periods in members:
        total = sum((spec.weight(a) for a in periods), Fraction(0))
        assert spec.meets(total)
        assert not spec.meets(total - spec.weight(periods[-1]))


def test_solve_member():
    certificate = solve_member('TOY', COVERING, ('2', '2'))
    assert certificate.verdict == SCHEDULABLE
    assert certificate.schedule is not None

    certificate = solve_member('TOY', PACKING, ('2', '3', '6'))
    assert certificate.verdict == UNSCHEDULABLE
    assert certificate.solver == 'exact'

    certificate = solve_member('TOY', PACKING, ('3', '4', '5', '7'), state_budget=5)
    assert certificate.verdict == INDETERMINATE


def test_campaign_over_toy_family(tmp_path, toy_spec):
    store = tmp_path / 'toy.jsonl'
    report = run_campaign(toy_spec, str(store), progress_seconds=0)

    assert report.passed
    assert report.unschedulable == []
    assert report.members == len(_vectors(toy_spec))
    assert report.solved == report.members

    header, certificates = read_store(str(store))
    assert header['spec'] == 'TOY'
    assert header['fingerprint'] == toy_spec.fingerprint()
    assert len(certificates) == report.members
    assert all(c.verdict == SCHEDULABLE for c in certificates)


def test_campaign_resumes(tmp_path, toy_spec):
    store = str(tmp_path / 'toy.jsonl')
    first = run_campaign(toy_spec, store, limit=3, progress_seconds=0)
    assert first.members == 3

    second = run_campaign(toy_spec, store, progress_seconds=0)
    assert second.skipped == 3
    assert second.solved == second.members - 3

    _, certificates = read_store(store)
    assert len(certificates) == second.members


def test_campaign_refuses_foreign_store(tmp_path, toy_spec):
    store = str(tmp_path / 'toy.jsonl')
    run_campaign(toy_spec, store, limit=1, progress_seconds=0)

    with pytest.raises(CampaignError):
        run_campaign(replace(toy_spec, strict=True), store, progress_seconds=0)


def test_campaign_over_empty_family(tmp_path):
    spec = FamilySpec('EMPTY', COVERING, 2, 'D', 2, strict=True, minimality=None, max_jobs=2)
    report = run_campaign(spec, str(tmp_path / 'empty.jsonl'), progress_seconds=0)
    assert report.members == 0
    assert report.passed
    assert report.to_dict()['passed'] is True


def test_campaign_with_worker_pool(tmp_path, toy_spec):
    report = run_campaign(toy_spec, str(tmp_path / 'toy.jsonl'), workers=2, progress_seconds=0, chunksize=2)
    assert report.passed
    assert report.members == len(_vectors(toy_spec))


def test_case5_smoke_slice(tmp_path):
    report = run_campaign(get_spec('CASE5'), str(tmp_path / 'case5.jsonl'), limit=50, progress_seconds=0)
    assert report.members == 50
    assert report.passed


def test_progress_timer_disabled_without_interval():
    calls = []
    timer = ProgressTimer(0, calls.append, 1)
    timer.start()
    timer.stop()
    assert not timer.is_running
    assert calls == []


def test_campaign_resumes_after_torn_write(tmp_path, toy_spec):
    store = str(tmp_path / 'toy.jsonl')
    run_campaign(toy_spec, store, limit=3, progress_seconds=0)
    with open(store, 'a') as f:
        f.write('{"spec": "TOY", "kind": "cov')

    report = run_campaign(toy_spec, store, progress_seconds=0)
    assert report.skipped == 3
    assert report.passed

    _, certificates = read_store(store)
    assert len(certificates) == report.members


def test_worker_pool_draws_members_in_bounded_batches(tmp_path, toy_spec, monkeypatch):
    drawn = []
    lag = []

    def endless_family(spec):
        for a in itertools.count(1):
            drawn.append(a)
            yield TaskPeriods.covering((a,))

    def solve(spec_name, kind, periods, state_budget=None):
        lag.append(len(drawn) - int(periods[0]))
        return Certificate(spec_name, kind, tuple(periods), SCHEDULABLE)

    monkeypatch.setattr(enumeration, 'generate_family', endless_family)
    monkeypatch.setattr(enumeration, 'solve_member', solve)
    monkeypatch.setattr(enumeration, 'ProcessPoolExecutor', ThreadPoolExecutor)

    report = run_campaign(toy_spec, str(tmp_path / 'toy.jsonl'), workers=2, limit=500, progress_seconds=0, chunksize=4)
    assert report.members == 500
    assert len(lag) == 500
    assert max(lag) < 2 * 4 * enumeration.BATCH_FACTOR
