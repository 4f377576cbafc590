"""Bamboo Garden Trimming via pinwheel packing with 9/7-relaxed periods.

M (m_scheduler) either proves a packing instance unschedulable or returns a
schedule for its relaxed instance (floor(9a/7) per period). Running M on the
periods floor(H/h_i) for the smallest workable height H keeps every plant
below 9H/7.
"""

import logging
import math

from dataclasses import dataclass

from pinwheelkit.certify import density_barrier
from pinwheelkit.errors import InvalidWitnessError
from pinwheelkit.errors import ScheduleFormatError
from pinwheelkit.folds import lift_schedule
from pinwheelkit.folds import pfold
from pinwheelkit.folds import pfold_to_single
from pinwheelkit.instances import PACKING
from pinwheelkit.instances import TaskPeriods
from pinwheelkit.instances import density
from pinwheelkit.solvers import IDLE
from pinwheelkit.solvers import CyclicSchedule
from pinwheelkit.solvers import verify_packing
from pinwheelkit.tables import T1
from pinwheelkit.tables import T2
from pinwheelkit.tables import T3
from pinwheelkit.tables import THETAS
from pinwheelkit.tables import relax
from pinwheelkit.tables import relax_value

MAX_BRACKET_STEPS = 64

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BgtInstance:
    rates: tuple

    def __post_init__(self):
        rates = tuple(int(r) for r in self.rates)
        if not rates:
            raise ValueError('a grove needs at least one plant')
        if min(rates) < 1:
            raise ValueError(f"growth rates must be at least 1, got {rates}")
        object.__setattr__(self, 'rates', rates)

    @classmethod
    def parse(cls, text):
        return cls(tuple(int(r) for r in text.split(',') if r.strip()))


@dataclass(frozen=True)
class RelaxedResult:
    schedule: CyclicSchedule | None = None

    @property
    def relaxed(self):
        return self.schedule is not None

    @property
    def outcome(self):
        return 'Relaxed' if self.relaxed else 'Unschedulable'


UNSCHEDULABLE = RelaxedResult()


def transfer_relaxed(trace, schedule):
    """Turns a schedule of relax(fold output) into a schedule of relax(fold input).

    Every folded element is served by the input jobs that were folded into
    it. Their relaxed periods fold down to a single period that is at least
    the relaxed folded element, so the element's slots lift through that
    fold and the pieces are merged on a common cycle.
    """
    key = relax(trace.output)
    if schedule.prefix:
        raise ScheduleFormatError('relaxed transfer works on pure cycles')
    if not verify_packing(key, schedule):
        raise InvalidWitnessError(f"table schedule does not verify against {key}")

    pieces = []
    for index, group in enumerate(trace.provenance()):
        target = key.periods[index]
        relaxed_group = TaskPeriods.packing(relax_value(trace.input.periods[j]) for j in group)

        value, group_trace = pfold_to_single(relaxed_group)
        if value < target:
            raise InvalidWitnessError(f"folded group {relaxed_group} gives {value}, below {target}")

        slots = CyclicSchedule(tuple(1 if s == index + 1 else IDLE for s in schedule.cycle))
        pieces.append((group, lift_schedule(group_trace, slots)))

    length = math.lcm(*(len(lifted.cycle) for _, lifted in pieces)) if pieces else 1
    cycle = [IDLE] * length
    for group, lifted in pieces:
        period = len(lifted.cycle)
        for day in range(length):
            slot = lifted.cycle[day % period]
            if slot != IDLE:
                cycle[day] = group[slot - 1] + 1

    merged = CyclicSchedule(tuple(cycle))
    if not verify_packing(relax(trace.input), merged):
        raise InvalidWitnessError(f"merged schedule does not verify against {relax(trace.input)}")

    return merged


def _check_helper_input(A):
    if A.kind != PACKING:
        raise ValueError(f"M_helper takes packing instances, got {A.kind}")

    periods = A.integers()
    if not periods:
        raise ValueError('M_helper needs a nonempty instance')
    if periods[0] == 2:
        raise ValueError(f"M_helper does not accept instances starting with 2: {A}")
    if periods[:2] == (3, 3) or periods[:4] == (3, 6, 6, 6):
        raise ValueError(f"M_helper does not accept the prefix of {A}")

    return periods


def m_helper(A, tables):
    periods = _check_helper_input(A)

    barrier = density_barrier(A)
    if density(A) > barrier.value:
        logger.debug(f"{A} exceeds its density barrier {barrier.describe()}")
        return UNSCHEDULABLE

    if periods[0] == 3:
        trace = pfold(A, THETAS[T1])
        schedule = tables.lookup(T1, relax(trace.output).integers())
        if schedule is None:
            trace = pfold(A, THETAS[T2])
            schedule = tables.require(T2, relax(trace.output).integers())
    else:
        trace = pfold(A, THETAS[T3])
        schedule = tables.require(T3, relax(trace.output).integers())

    return RelaxedResult(transfer_relaxed(trace, schedule))


def _interleave(inner, pattern, offset):
    # None in the pattern marks the day handed to the inner schedule
    def expand(sequence):
        days = []
        for slot in sequence:
            for fixed in pattern:
                if fixed is None:
                    days.append(IDLE if slot == IDLE else slot + offset)
                else:
                    days.append(fixed)
        return tuple(days)

    return CyclicSchedule(expand(inner.cycle), expand(inner.prefix))


BRANCHES = (
    ((2,), 2, (1, None)),
    ((3, 3), 3, (1, 2, None)),
    ((3, 6, 6, 6), 6, (1, 2, 3, 1, 4, None))
)


def m_scheduler(A, tables):
    if A.kind != PACKING:
        raise ValueError(f"M takes packing instances, got {A.kind}")

    periods = A.integers()
    if not periods:
        return RelaxedResult(CyclicSchedule((IDLE,)))
    if len(periods) == 1:
        return RelaxedResult(CyclicSchedule((1,)))
    if periods[0] == 1:
        return UNSCHEDULABLE

    for prefix, divisor, pattern in BRANCHES:
        if periods[:len(prefix)] == prefix:
            inner = m_scheduler(TaskPeriods.packing(p // divisor for p in periods[len(prefix):]), tables)
            if not inner.relaxed:
                return UNSCHEDULABLE
            return RelaxedResult(_interleave(inner.schedule, pattern, len(prefix)))

    return m_helper(A, tables)


def _schedule_at(g, height, tables):
    periods = [height // rate for rate in g.rates]
    if min(periods) < 1:
        return None

    order = sorted(range(len(periods)), key=lambda i: (periods[i], i))
    result = m_scheduler(TaskPeriods.packing(periods[i] for i in order), tables)
    if not result.relaxed:
        return None

    def plant(slot):
        return IDLE if slot == IDLE else order[slot - 1] + 1

    schedule = result.schedule
    return CyclicSchedule(tuple(plant(s) for s in schedule.cycle), tuple(plant(s) for s in schedule.prefix))


def bgt_approximate(g, tables):
    """Finds H with M failing at H - 1 and succeeding at H; returns (H, schedule)."""

    low = max(g.rates)
    schedule = _schedule_at(g, low, tables)
    if schedule is not None:
        return low, schedule

    high = low
    for _ in range(MAX_BRACKET_STEPS):
        low, high = high, high * 2
        schedule = _schedule_at(g, high, tables)
        if schedule is not None:
            break
    else:
        raise RuntimeError(f"no workable height found for rates {g.rates}")

    while high - low > 1:
        middle = (low + high) // 2
        attempt = _schedule_at(g, middle, tables)
        if attempt is None:
            low = middle
        else:
            high, schedule = middle, attempt

    logger.debug(f"rates {g.rates}: boundary height {high}")
    return high, schedule


def simulate_bgt(g, s, horizon=None):
    n = len(g.rates)
    for slot in s.prefix + s.cycle:
        if slot > n:
            raise ScheduleFormatError(f"slot {slot} refers to a plant outside 1..{n}")

    minimum = len(s.prefix) + 2 * len(s.cycle)
    horizon = minimum if horizon is None else horizon
    if horizon < minimum:
        raise ValueError(f"horizon {horizon} is shorter than prefix plus two cycles ({minimum})")

    heights = [0] * n
    tallest = 0
    for slot in s.unroll(horizon):
        heights = [h + rate for h, rate in zip(heights, g.rates)]
        tallest = max(tallest, max(heights))
        if slot != IDLE:
            heights[slot - 1] = 0

    return tallest
