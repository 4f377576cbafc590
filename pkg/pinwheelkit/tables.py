import hashlib
import itertools
import json
import logging
import math
import os

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from fractions import Fraction

from pinwheelkit.certify import density_barrier
from pinwheelkit.errors import IndeterminateError
from pinwheelkit.errors import MissingTableEntryError
from pinwheelkit.errors import TableBuildError
from pinwheelkit.folds import pfold
from pinwheelkit.instances import TaskPeriods
from pinwheelkit.solvers import CyclicSchedule
from pinwheelkit.solvers import decide_packing
from pinwheelkit.solvers import powtwo_packing_heuristic
from pinwheelkit.solvers import verify_packing

TABLE_FORMAT = 'pinwheelkit.table/1'

T1 = 'T1'
T2 = 'T2'
T3 = 'T3'

THETAS = {T1: 18, T2: 28, T3: 14}

DEFAULTS = {
    'max_jobs': None,
    'workers': 1,
    'state_budget': None
}

logger = logging.getLogger(__name__)


def relax_value(value):
    return math.floor(Fraction(9, 7) * Fraction(value))


def relax(A):
    """Maps every period a to floor(9a/7)."""
    return A.with_periods(relax_value(p) for p in A.periods)


def table_key(A, table_id):
    return relax(pfold(A, THETAS[table_id]).output).integers()


@dataclass
class ScheduleTable:
    id: str
    entries: dict = field(default_factory=dict)
    unschedulable: set = field(default_factory=set)

    @property
    def theta(self):
        return THETAS[self.id]

    def to_dict(self, fingerprint):
        return {
            'format': TABLE_FORMAT,
            'table': self.id,
            'theta': self.theta,
            'fingerprint': fingerprint,
            'entries': [{'key': list(key), 'cycle': list(self.entries[key].cycle)} for key in sorted(self.entries)],
            'unschedulable': [list(key) for key in sorted(self.unschedulable)]
        }

    @classmethod
    def from_dict(cls, data):
        if data.get('format') != TABLE_FORMAT:
            raise TableBuildError(f"unsupported table format {data.get('format')!r}")

        table = cls(data['table'])
        for entry in data['entries']:
            key = tuple(entry['key'])
            schedule = CyclicSchedule(tuple(entry['cycle']))
            if not verify_packing(TaskPeriods.packing(key), schedule):
                raise TableBuildError(f"stored schedule for {key} in {table.id} does not verify")
            table.entries[key] = schedule

        table.unschedulable = {tuple(key) for key in data.get('unschedulable', [])}
        return table


def config_fingerprint(config):
    relevant = {'format': TABLE_FORMAT, 'max_jobs': config.get('max_jobs', DEFAULTS['max_jobs'])}
    canonical = json.dumps(relevant, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]


def _solve_key(key, state_budget):
    A = TaskPeriods.packing(key)
    schedule = powtwo_packing_heuristic(A)
    if schedule is None:
        verdict = decide_packing(A, state_budget, debug=True)
        schedule = verdict.schedule if verdict.schedulable else None
    return key, None if schedule is None else schedule.cycle


class ScheduleTables:
    """The three lookup tables used by M_helper.

    Keys outside the built closure raise MissingTableEntryError unless
    solve_on_miss asks for them to be solved and cached on the spot.
    """

    def __init__(self, tables=None, solve_on_miss=False, state_budget=None, fingerprint=None):
        self.tables = tables or {table_id: ScheduleTable(table_id) for table_id in THETAS}
        self.solve_on_miss = solve_on_miss
        self.state_budget = state_budget
        self.fingerprint = fingerprint
        self.solved = 0

    def __getitem__(self, table_id):
        return self.tables[table_id]

    def _solve(self, table, key):
        try:
            _, cycle = _solve_key(key, self.state_budget)
        except IndeterminateError as error:
            raise TableBuildError(f"could not decide {key} for table {table.id}: {error}")

        self.solved += 1
        if cycle is None:
            table.unschedulable.add(key)
            return None

        table.entries[key] = CyclicSchedule(cycle)
        return table.entries[key]

    def lookup(self, table_id, key):
        """Returns the schedule for key, or None when key is known to be unschedulable."""
        table = self.tables[table_id]
        key = tuple(key)

        if key in table.entries:
            return table.entries[key]
        if key in table.unschedulable:
            return None
        if not self.solve_on_miss:
            raise MissingTableEntryError(table_id, key)

        return self._solve(table, key)

    def require(self, table_id, key):
        schedule = self.lookup(table_id, key)
        if schedule is None:
            raise TableBuildError(f"reachable key {key} of table {table_id} is unschedulable")
        return schedule

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        for table_id, table in sorted(self.tables.items()):
            filename = os.path.join(directory, f"{table_id}.json")
            with open(filename, 'w') as table_file:
                json.dump(table.to_dict(self.fingerprint), table_file, sort_keys=True, indent=1)
                table_file.write('\n')
            logger.info(f"wrote {len(table.entries)} entries of {table_id} to {filename}")

    @classmethod
    def load(cls, directory, solve_on_miss=False, state_budget=None):
        tables = {}
        fingerprints = set()
        for table_id in THETAS:
            filename = os.path.join(directory, f"{table_id}.json")
            with open(filename, 'r') as table_file:
                data = json.load(table_file)
            tables[table_id] = ScheduleTable.from_dict(data)
            fingerprints.add(data.get('fingerprint'))

        if len(fingerprints) != 1:
            raise TableBuildError(f"tables in {directory} come from different builds")

        return cls(tables, solve_on_miss, state_budget, fingerprints.pop())


def _slots(table_id):
    """(key, weight, value) for every relaxed element a post-fold instance of the table can hold.

    Elements at most theta/2 are periods kept from the input and carry their
    own density. Halved and clamped elements lie in (theta/2, theta]; each key
    they relax to is given the largest such value, so its weight never
    exceeds the density of the element it stands for.
    """
    theta = THETAS[table_id]
    created = math.floor(Fraction(9 * theta, 14))

    slots = []
    for value in range(3 if table_id in (T1, T2) else 4, theta + 1):
        key = relax_value(value)
        if key >= created:
            break
        slots.append((key, Fraction(1, value), Fraction(value)))

    for key in range(created, relax_value(theta) + 1):
        value = min(Fraction(theta), Fraction(7 * (key + 1), 9))
        slots.append((key, 1 / value, value))

    return slots


def closure_keys(table_id, max_jobs=None):
    """Relaxed post-fold instances M_helper can look up in the given table.

    A source A with density at most its barrier folds to an instance whose
    density grows by at most 1/theta, so that bound, not a job count, limits
    the multiplicities. T1 and T2 sources start with a single 3 and never
    with (3,6,6,6); T3 sources start at 4 or above.
    """
    slots = _slots(table_id)
    slack = Fraction(1, THETAS[table_id])

    def extend(start, chosen, total):
        if chosen:
            values = tuple(slots[i][2] for i in chosen)
            barrier = density_barrier(TaskPeriods.packing(values)).value
            if total <= barrier + slack and values[:4] != (3, 6, 6, 6):
                yield tuple(slots[i][0] for i in chosen)

        if max_jobs is not None and len(chosen) >= max_jobs:
            return

        for index in range(start, len(slots)):
            weight = total + slots[index][1]
            if weight <= 1 + slack:
                yield from extend(index, chosen + (index,), weight)

    if table_id == T3:
        yield from extend(0, (), Fraction(0))
    else:
        # slot 0 is the leading 3, which only occurs once
        yield from extend(1, (0,), slots[0][1])


def _solve_all(keys, workers, state_budget):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_solve_key, keys, itertools.repeat(state_budget), chunksize=64))
    else:
        results = [_solve_key(key, state_budget) for key in keys]
    return dict(results)


def build_tables(config=None):
    config = dict(DEFAULTS, **(config or {}))
    max_jobs = config['max_jobs']
    state_budget = config['state_budget']

    tables = ScheduleTables(state_budget=state_budget, fingerprint=config_fingerprint(config))
    for table_id in THETAS:
        keys = list(closure_keys(table_id, max_jobs))
        logger.info(f"solving {len(keys)} {table_id} keys")

        table = tables[table_id]
        for key, cycle in sorted(_solve_all(keys, config['workers'], state_budget).items()):
            if cycle is None:
                table.unschedulable.add(key)
            else:
                table.entries[key] = CyclicSchedule(cycle)

        logger.info(f"{table_id}: {len(table.entries)} entries, {len(table.unschedulable)} unschedulable keys")

    if tables[T3].unschedulable:
        raise TableBuildError(f"reachable key {min(tables[T3].unschedulable)} of table T3 is unschedulable")
    if tables[T2].unschedulable:
        # T2 covers every 3-led closure member, not only the T1 misses
        logger.warning(f"{len(tables[T2].unschedulable)} T2 keys are unschedulable; "
                       f"M_helper fails if a T1 miss folds onto one of them")

    return tables
