import json
import logging
import math
import time

from dataclasses import dataclass
from fractions import Fraction

from pinwheelkit.errors import IndeterminateError
from pinwheelkit.errors import InvalidWitnessError
from pinwheelkit.errors import ScheduleFormatError
from pinwheelkit.instances import COVERING
from pinwheelkit.instances import PACKING
from pinwheelkit.instances import TaskPeriods
from pinwheelkit.instances import density

IDLE = 0

DEFAULT_STATE_BUDGET = 500_000_000

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CyclicSchedule:
    """Eventually periodic day -> job assignment; jobs are 1-based, 0 is IDLE."""

    cycle: tuple
    prefix: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'cycle', tuple(int(s) for s in self.cycle))
        object.__setattr__(self, 'prefix', tuple(int(s) for s in self.prefix))

        if len(self.cycle) == 0:
            raise ScheduleFormatError('a schedule needs a nonempty cycle')

        for slot in self.prefix + self.cycle:
            if slot < 0:
                raise ScheduleFormatError(f"negative slot {slot} in schedule")

    def unroll(self, days: int) -> list:
        sequence = list(self.prefix[:days])
        while len(sequence) < days:
            sequence.extend(self.cycle[:days - len(sequence)])
        return sequence

    def jobs(self) -> set:
        return {s for s in self.prefix + self.cycle if s != IDLE}

    def to_dict(self) -> dict:
        return {'prefix': list(self.prefix), 'cycle': list(self.cycle)}

    @classmethod
    def from_dict(cls, data: dict) -> 'CyclicSchedule':
        if 'cycle' not in data:
            raise ScheduleFormatError('schedule object has no cycle')
        return cls(tuple(data['cycle']), tuple(data.get('prefix', ())))

    @classmethod
    def load(cls, filename: str) -> 'CyclicSchedule':
        with open(filename, 'r') as schedule_file:
            return cls.from_dict(json.load(schedule_file))

    def dump(self, filename: str):
        with open(filename, 'w') as schedule_file:
            json.dump(self.to_dict(), schedule_file)


@dataclass(frozen=True)
class Verdict:
    schedulable: bool
    schedule: CyclicSchedule | None = None
    states: int = 0
    elapsed: float = 0.0

    def __post_init__(self):
        if self.schedulable and self.schedule is None:
            raise ValueError('a schedulable verdict needs a schedule')


def _check_indices(A, s):
    n = len(A)
    for slot in s.prefix + s.cycle:
        if slot > n:
            raise ScheduleFormatError(f"slot {slot} refers to a job outside 1..{n}")


def _occurrences(sequence, n):
    positions = [[] for _ in range(n + 1)]
    for day, slot in enumerate(sequence, start=1):
        positions[slot].append(day)
    return positions


def verify_packing(A: TaskPeriods, s: CyclicSchedule) -> bool:
    _check_indices(A, s)

    in_cycle = set(s.cycle)
    sequence = list(s.prefix) + list(s.cycle) * 2
    positions = _occurrences(sequence, len(A))

    for job, period in enumerate(A.periods, start=1):
        if job not in in_cycle:
            return False

        days = positions[job]
        if days[0] > period:
            return False
        for previous, current in zip(days, days[1:]):
            if current - previous > period:
                return False

    return True


def _window_counts_ok(days, period, spans_from):
    # at most ceil(d / period) occurrences in any d consecutive days
    for j in range(spans_from):
        for k in range(j + 1, len(days)):
            count = k - j + 1
            width = days[k] - days[j] + 1
            if count > math.ceil(Fraction(width) / period):
                return False
    return True


def verify_covering(A: TaskPeriods, s: CyclicSchedule) -> bool:
    _check_indices(A, s)

    if IDLE in s.prefix or IDLE in s.cycle:
        raise ScheduleFormatError('covering schedules assign every day to a job')

    length = len(s.cycle)
    sequence = list(s.prefix) + list(s.cycle) * 3
    positions = _occurrences(sequence, len(A))

    for job, period in enumerate(A.periods, start=1):
        days = positions[job]
        if not days:
            continue

        if period.denominator == 1:
            for previous, current in zip(days, days[1:]):
                if current - previous < period:
                    return False
            continue

        per_cycle = s.cycle.count(job)
        if per_cycle * period > length:
            return False

        in_prefix = sum(1 for day in days if day <= len(s.prefix))
        if not _window_counts_ok(days, period, min(len(days), in_prefix + per_cycle)):
            return False

    return True


def _integer_periods(A, kind):
    if A.kind != kind:
        raise ValueError(f"expected a {kind} instance, got {A.kind}")
    return A.integers()


class _LassoSearch:
    """Depth-first search for a reachable cycle in a finite state graph.

    Fully explored states are memoized as dead under a canonical form that
    identifies jobs of equal period; the live path is tracked exactly.
    """

    def __init__(self, periods, state_budget):
        self.periods = periods
        self.state_budget = state_budget
        self.states = 0
        self.dead = set()

        groups = []
        start = 0
        for index in range(1, len(periods) + 1):
            if index == len(periods) or periods[index] != periods[start]:
                groups.append((start, index))
                start = index
        self._groups = groups if len(groups) < len(periods) else None

    def canonical(self, state: tuple) -> tuple:
        if self._groups is None:
            return state
        return tuple(v for lo, hi in self._groups for v in sorted(state[lo:hi]))

    def moves(self, state: tuple):
        raise NotImplementedError

    def run(self, start: tuple) -> list | None:
        self.states = 1
        path = [start]
        on_path = {start: 0}
        taken = []
        frames = [iter(self.moves(start))]

        while frames:
            step = next(frames[-1], None)
            if step is None:
                frames.pop()
                state = path.pop()
                del on_path[state]
                self.dead.add(self.canonical(state))
                if taken:
                    taken.pop()
                continue

            move, successor = step
            if successor in on_path:
                return taken[on_path[successor]:] + [move]

            if self.canonical(successor) in self.dead:
                continue

            self.states += 1
            if self.states > self.state_budget:
                raise IndeterminateError(f"state budget of {self.state_budget} exceeded", self.states)

            on_path[successor] = len(path)
            path.append(successor)
            taken.append(move)
            frames.append(iter(self.moves(successor)))

        return None


class _PackingSearch(_LassoSearch):
    # state: days left until each job must run again, today included

    def moves(self, state):
        periods = self.periods
        n = len(periods)

        urgent = [i for i in range(n) if state[i] == 1]
        if len(urgent) > 1:
            return

        candidates = urgent if urgent else sorted(range(n), key=lambda i: (state[i], i))
        tried = set()
        for job in candidates:
            signature = (periods[job], state[job])
            if signature in tried:
                continue
            tried.add(signature)

            successor = tuple(periods[i] if i == job else state[i] - 1 for i in range(n))
            if self._feasible(successor):
                yield job, successor

    @staticmethod
    def _feasible(state):
        # jobs due within k days need k distinct days
        for k, deadline in enumerate(sorted(state), start=1):
            if deadline < k:
                return False
        return True


class _CoveringSearch(_LassoSearch):
    # state: days since each job last ran, saturated at its period

    def __init__(self, periods, state_budget):
        super().__init__(periods, state_budget)
        self._horizon = max(periods)
        self._order = sorted(range(len(periods)), key=lambda i: (-periods[i], i))

    def moves(self, state):
        periods = self.periods
        n = len(periods)

        tried = set()
        for job in self._order:
            if state[job] < periods[job] or periods[job] in tried:
                continue
            tried.add(periods[job])

            successor = tuple(1 if i == job else min(periods[i], state[i] + 1) for i in range(n))
            if self._supply_ok(successor):
                yield job, successor

    def _supply_ok(self, state):
        # every one of the next k days needs some job available
        periods = self.periods
        firsts = [1 if e >= a else a - e + 1 for e, a in zip(state, periods)]
        for k in range(1, self._horizon + 1):
            total = 0
            for first, period in zip(firsts, periods):
                if first <= k:
                    total += 1 + (k - first) // period
                    if total >= k:
                        break
            if total < k:
                return False
        return True


def _finish(A, cycle_moves, search, started, verifier, debug):
    elapsed = time.perf_counter() - started

    if cycle_moves is None:
        logger.debug(f"{A} unschedulable after {search.states} states in {elapsed:.3f}s")
        return Verdict(False, None, search.states, elapsed)

    schedule = CyclicSchedule(tuple(move + 1 for move in cycle_moves))
    if debug and not verifier(A, schedule):
        raise InvalidWitnessError(f"search produced an invalid schedule for {A}: {schedule.cycle}")

    logger.debug(f"{A} schedulable with cycle length {len(schedule.cycle)} after {search.states} states")
    return Verdict(True, schedule, search.states, elapsed)


def decide_packing(A: TaskPeriods, state_budget: int | None = None, debug: bool = False) -> Verdict:
    started = time.perf_counter()
    periods = _integer_periods(A, PACKING)

    if not periods:
        return Verdict(True, CyclicSchedule((IDLE,)), 0, time.perf_counter() - started)

    if density(A) > 1 or (periods[0] == 1 and len(periods) > 1):
        return Verdict(False, None, 0, time.perf_counter() - started)

    search = _PackingSearch(periods, state_budget or DEFAULT_STATE_BUDGET)
    cycle_moves = search.run(periods)

    return _finish(A, cycle_moves, search, started, verify_packing, debug)


def decide_covering(A: TaskPeriods, state_budget: int | None = None, debug: bool = False) -> Verdict:
    started = time.perf_counter()
    periods = _integer_periods(A, COVERING)

    if not periods or density(A) < 1:
        return Verdict(False, None, 0, time.perf_counter() - started)

    search = _CoveringSearch(periods, state_budget or DEFAULT_STATE_BUDGET)
    cycle_moves = search.run(periods)

    return _finish(A, cycle_moves, search, started, verify_covering, debug)


def decide(A: TaskPeriods, state_budget: int | None = None, debug: bool = False) -> Verdict:
    if A.kind == PACKING:
        return decide_packing(A, state_budget, debug)
    return decide_covering(A, state_budget, debug)


def _binary_carousel(rounded):
    """Assigns residue classes mod 2^k to jobs in order; returns (classes, leftover)."""
    free = [(0, 1)]
    classes = {}

    for job, modulus in enumerate(rounded):
        fitting = [c for c in free if c[1] <= modulus]
        if not fitting:
            continue

        residue, size = max(fitting, key=lambda c: (c[1], -c[0]))
        free.remove((residue, size))
        while size < modulus:
            free.append((residue + size, 2 * size))
            size *= 2

        classes[job] = (residue, modulus)

    return classes, free


def _carousel_cycle(classes):
    length = max(modulus for _, modulus in classes.values())
    cycle = [IDLE] * length
    for job, (residue, modulus) in classes.items():
        for day in range(residue, length, modulus):
            cycle[day] = job + 1
    return tuple(cycle)


def kraft_covering_heuristic(A: TaskPeriods) -> CyclicSchedule | None:
    periods = _integer_periods(A, COVERING)
    if not periods:
        return None

    rounded = [1 << (a - 1).bit_length() for a in periods]
    if sum(Fraction(1, r) for r in rounded) < 1:
        return None

    classes, leftover = _binary_carousel(rounded)
    if leftover:
        return None

    schedule = CyclicSchedule(_carousel_cycle(classes))
    return schedule if verify_covering(A, schedule) else None


def powtwo_packing_heuristic(A: TaskPeriods) -> CyclicSchedule | None:
    periods = _integer_periods(A, PACKING)
    if not periods:
        return CyclicSchedule((IDLE,))

    rounded = [1 << (a.bit_length() - 1) for a in periods]
    if sum(Fraction(1, r) for r in rounded) > 1:
        return None

    classes, _ = _binary_carousel(rounded)
    if len(classes) < len(periods):
        return None

    schedule = CyclicSchedule(_carousel_cycle(classes))
    return schedule if verify_packing(A, schedule) else None
