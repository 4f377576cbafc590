import hashlib
import itertools
import json
import logging
import time

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from fractions import Fraction

from pinwheelkit.errors import FamilySpecError
from pinwheelkit.errors import IndeterminateError
from pinwheelkit.instances import COVERING
from pinwheelkit.instances import KINDS
from pinwheelkit.instances import TaskPeriods
from pinwheelkit.instances import format_ratio
from pinwheelkit.instances import mod_weight
from pinwheelkit.instances import parse_ratio
from pinwheelkit.instances import reference_series
from pinwheelkit.instances import shifted_weight
from pinwheelkit.progress import ProgressTimer
from pinwheelkit.solvers import decide
from pinwheelkit.solvers import kraft_covering_heuristic
from pinwheelkit.solvers import powtwo_packing_heuristic
from pinwheelkit.store import Certificate
from pinwheelkit.store import CertificateStore

REMOVE_MAX = 'RemoveMaxUntilBelow'
REMOVE_MAX_BELOW_17 = 'RemoveMaxBelow17UntilBelow'

DENSITY_FUNCTIONS = ('D', 'Dprime', 'Dmod', 'Dc')

SCHEDULABLE = 'schedulable'
UNSCHEDULABLE = 'unschedulable'
INDETERMINATE = 'indeterminate'

BATCH_FACTOR = 4

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FamilySpec:
    name: str
    kind: str
    max_element: int
    density_fn: str
    lower_bound: Fraction
    strict: bool = False
    minimality: str | None = REMOVE_MAX
    shift: int | None = None
    top_triple: tuple | None = None
    range_density_constraints: tuple = ()
    min_element: int = 1
    max_jobs: int | None = None
    requires: tuple = ()
    excludes: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FamilySpecError(f"unknown kind {self.kind!r} in family {self.name}")
        if self.density_fn not in DENSITY_FUNCTIONS:
            raise FamilySpecError(f"unknown density function {self.density_fn!r} in family {self.name}")
        if self.density_fn == 'Dc' and (self.shift is None or self.shift < 1):
            raise FamilySpecError(f"family {self.name} uses Dc without a shift of at least 1")
        if self.minimality not in (REMOVE_MAX, REMOVE_MAX_BELOW_17, None):
            raise FamilySpecError(f"unknown minimality rule {self.minimality!r}")
        if (self.minimality == REMOVE_MAX_BELOW_17) != (self.top_triple is not None):
            raise FamilySpecError(f"family {self.name} pairs m4 removal with a top-three constraint")
        if not 1 <= self.min_element <= self.max_element:
            raise FamilySpecError(f"family {self.name} has an empty element range")

        object.__setattr__(self, 'lower_bound', parse_ratio(self.lower_bound))

    def weight(self, a):
        if self.density_fn == 'D':
            return Fraction(1, a)
        if self.density_fn == 'Dprime':
            return shifted_weight(Fraction(a), 8)
        if self.density_fn == 'Dc':
            return shifted_weight(Fraction(a), self.shift)
        return mod_weight(a)

    def meets(self, value):
        return value > self.lower_bound if self.strict else value >= self.lower_bound

    def to_dict(self):
        data = asdict(self)
        data['lower_bound'] = format_ratio(self.lower_bound)
        data['range_density_constraints'] = [[c, format_ratio(Fraction(b))] for c, b in self.range_density_constraints]
        data['top_triple'] = None if self.top_triple is None else list(self.top_triple)
        data['requires'] = list(self.requires)
        data['excludes'] = list(self.excludes)
        return data

    def fingerprint(self):
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _plain(name, density_fn, bound, strict, cutoffs=(), **kwargs):
    return FamilySpec(name, COVERING, 16, density_fn, bound, strict,
                      range_density_constraints=tuple(cutoffs), **kwargs)


def _triple(name, density_fn, bound, strict, triple, cutoffs=(), **kwargs):
    return FamilySpec(name, COVERING, 16, density_fn, bound, strict,
                      minimality=REMOVE_MAX_BELOW_17, top_triple=triple,
                      range_density_constraints=tuple(cutoffs), **kwargs)


def builtin_specs():
    reference_9 = reference_series(9)
    no_thirding = reference_9 - Fraction(2, 16)
    thirding = reference_9 - Fraction(7, 4) * Fraction(1, 16)

    prefix_16 = Fraction(103, 90)
    prefix_32 = Fraction(1841, 1530)
    case7_even = Fraction(1269799, 1077120)
    case7_odd = Fraction(1252969, 1077120)

    specs = [
        _plain('CLAIM5', 'Dprime', Fraction(13, 10) - Fraction(2, 16), False)
    ]

    for case, cutoff in (('CASE3', (4, Fraction(5, 6))), ('CASE4', (8, Fraction(31, 30)))):
        specs += [
            _plain(f"{case}-SUB1", 'D', no_thirding, False, (cutoff,)),
            _plain(f"{case}-SUB2", 'Dprime', thirding, False, (cutoff,)),
            _triple(f"{case}-SUB3", 'Dprime', thirding, False, (17, 22), (cutoff,))
        ]

    specs += [
        _plain('CASE5', 'D', prefix_16, True),
        _plain('CASE6', 'Dmod', prefix_32 - Fraction(3, 4) * Fraction(1, 16), True),
        _plain('CASE7-SUB1', 'Dprime', case7_even, True),
        _plain('CASE7-SUB2-9', 'Dc', case7_odd - Fraction(1, 72), True, shift=10, requires=(9,)),
        _plain('CASE7-SUB2-10', 'Dc', case7_odd - Fraction(1, 90), True, shift=10, requires=(10,), excludes=(9,)),
        _plain('CASE7-SUB2-NONE', 'Dc', case7_odd, True, shift=10, excludes=(9, 10)),
        _triple('CASE7-SUB3-17', 'Dc', case7_odd, True, (17, 18), shift=8),
        _triple('CASE7-SUB3-19', 'Dc', case7_odd, True, (19, 20), shift=9),
        _triple('CASE7-SUB3-21', 'Dc', case7_odd, True, (21, 22), shift=10)
    ]

    return specs


def get_spec(name):
    for spec in builtin_specs():
        if spec.name == name.upper():
            return spec

    known = ', '.join(spec.name for spec in builtin_specs())
    raise FamilySpecError(f"unknown family {name!r}; known families: {known}")


def _satisfies_extras(spec, members):
    for value in spec.requires:
        if value not in members:
            return False

    for cutoff, bound in spec.range_density_constraints:
        if not sum((Fraction(1, a) for a in members if a <= cutoff), Fraction(0)) > bound:
            return False

    return True


def _candidates(spec, base):
    """Nondecreasing vectors in lexicographic order that meet the bound while their prefix does not."""
    weights = {a: spec.weight(a) for a in range(spec.min_element, spec.max_element + 1)}
    excluded = set(spec.excludes)
    minimal = spec.minimality is not None

    if minimal and spec.meets(base):
        return

    def extend(prefix, total, start):
        if spec.max_jobs is not None and len(prefix) >= spec.max_jobs:
            return

        for x in range(start, spec.max_element + 1):
            if x in excluded:
                continue

            value = total + weights[x]
            candidate = prefix + (x,)
            if spec.meets(value):
                yield candidate
                if not minimal:
                    yield from extend(candidate, value, x)
            else:
                yield from extend(candidate, value, x)

    yield from extend((), base, spec.min_element)


def generate_family(spec):
    """Streams every member of a family once, in canonical order.

    Plain families are ordered lexicographically on the nondecreasing period
    vector; families with a top-three constraint by (m1, remaining vector).
    """
    if spec.minimality is None and spec.max_jobs is None:
        raise FamilySpecError(f"family {spec.name} has neither a minimality rule nor a job cap, so it is unbounded")

    if spec.top_triple is None:
        for members in _candidates(spec, Fraction(0)):
            if _satisfies_extras(spec, members):
                yield TaskPeriods(spec.kind, members)
        return

    lo, hi = spec.top_triple
    for m1 in range(lo, hi + 1):
        for rest in _candidates(spec, 3 * spec.weight(m1)):
            members = rest + (m1, m1, m1)
            if _satisfies_extras(spec, members):
                yield TaskPeriods(spec.kind, members)


@dataclass
class CampaignReport:
    spec: str
    members: int = 0
    schedulable: int = 0
    unschedulable: list = field(default_factory=list)
    indeterminate: list = field(default_factory=list)
    solved: int = 0
    skipped: int = 0
    wall_time: float = 0.0

    @property
    def passed(self):
        return not self.unschedulable and not self.indeterminate

    def record(self, certificate, solved):
        self.members += 1
        if solved:
            self.solved += 1
        else:
            self.skipped += 1

        if certificate.verdict == SCHEDULABLE:
            self.schedulable += 1
        elif certificate.verdict == UNSCHEDULABLE:
            self.unschedulable.append(certificate.key)
        else:
            self.indeterminate.append(certificate.key)

    def to_dict(self):
        return {
            'schema': 'pinwheelkit.campaign/1',
            'spec': self.spec,
            'members': self.members,
            'schedulable': self.schedulable,
            'unschedulable': [list(k) for k in sorted(self.unschedulable, key=_vector_key)],
            'indeterminate': [list(k) for k in sorted(self.indeterminate, key=_vector_key)],
            'solved': self.solved,
            'skipped': self.skipped,
            'passed': self.passed
        }


def _vector_key(key):
    return tuple(parse_ratio(p) for p in key)


def solve_member(spec_name, kind, periods, state_budget=None):
    """Solves one family member; heuristic first, exact search second."""
    started = time.perf_counter()
    instance = TaskPeriods(kind, tuple(parse_ratio(p) for p in periods))

    heuristic = kraft_covering_heuristic if kind == COVERING else powtwo_packing_heuristic
    solver = 'kraft' if kind == COVERING else 'powtwo'
    schedule = heuristic(instance)
    if schedule is not None:
        return Certificate(spec_name, kind, tuple(periods), SCHEDULABLE, schedule.to_dict(), solver,
                           time.perf_counter() - started)

    try:
        verdict = decide(instance, state_budget, debug=True)
    except IndeterminateError as error:
        logger.error(f"{instance}: {error}")
        return Certificate(spec_name, kind, tuple(periods), INDETERMINATE, None, 'exact',
                           time.perf_counter() - started, error.states)

    return Certificate(
        spec_name,
        kind,
        tuple(periods),
        SCHEDULABLE if verdict.schedulable else UNSCHEDULABLE,
        verdict.schedule.to_dict() if verdict.schedulable else None,
        'exact',
        time.perf_counter() - started,
        verdict.states
    )


def _log_progress(report, store, started):
    store.flush()
    rate = report.members / max(time.time() - started, 1e-9)
    logger.info(f"{report.spec}: {report.members} members ({report.solved} solved, {report.skipped} stored), "
                f"{report.schedulable} schedulable, {len(report.unschedulable)} unschedulable, "
                f"{len(report.indeterminate)} indeterminate, {rate:.1f}/s")


def run_campaign(spec, store_path, workers=1, limit=None,
                 state_budget=None, progress_seconds=30, chunksize=16):
    started = time.time()
    store = CertificateStore(store_path, spec.name, spec.fingerprint())
    report = CampaignReport(spec.name)

    members = generate_family(spec)
    if limit is not None:
        members = itertools.islice(members, limit)

    def pending():
        for instance in members:
            key = tuple(instance.to_strings())
            if key in store:
                report.record(store[key], solved=False)
            else:
                yield key

    timer = ProgressTimer(progress_seconds, _log_progress, report, store, started)
    timer.start()

    logger.info(f"running campaign {spec.name} with {workers} worker(s) into {store_path}")
    try:
        jobs = pending()
        if workers > 1:
            # at most one batch of members is drawn ahead of the results
            batch_size = chunksize * workers * BATCH_FACTOR
            with ProcessPoolExecutor(max_workers=workers) as executor:
                while batch := list(itertools.islice(jobs, batch_size)):
                    results = executor.map(solve_member, itertools.repeat(spec.name), itertools.repeat(spec.kind),
                                           batch, itertools.repeat(state_budget), chunksize=chunksize)
                    for certificate in results:
                        _accept(certificate, store, report)
        else:
            for key in jobs:
                _accept(solve_member(spec.name, spec.kind, key, state_budget), store, report)
    finally:
        timer.stop()
        store.flush()

    report.wall_time = time.time() - started
    _log_progress(report, store, started)

    if report.indeterminate:
        logger.error(f"campaign {spec.name} left {len(report.indeterminate)} member(s) indeterminate")
    if report.unschedulable:
        logger.error(f"campaign {spec.name} found {len(report.unschedulable)} unschedulable member(s)")

    return report


def _accept(certificate, store, report):
    report.record(certificate, solved=True)
    if certificate.verdict != INDETERMINATE:
        store.put(certificate)
