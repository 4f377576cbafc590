"""Fold operations that cap every period at a threshold theta.

Each run records a FoldTrace. Replaying the trace backwards turns a schedule
of the folded instance into a schedule of the original one (lift_schedule).
"""

import bisect
import logging

from dataclasses import dataclass
from fractions import Fraction

from pinwheelkit.errors import InvalidWitnessError
from pinwheelkit.errors import NoThresholdError
from pinwheelkit.instances import COVERING
from pinwheelkit.instances import PACKING
from pinwheelkit.instances import TaskPeriods
from pinwheelkit.instances import ceil_log2
from pinwheelkit.instances import compute_e
from pinwheelkit.instances import count_in_range
from pinwheelkit.instances import density
from pinwheelkit.instances import format_ratio
from pinwheelkit.instances import power_of_two
from pinwheelkit.instances import reference_series
from pinwheelkit.solvers import IDLE
from pinwheelkit.solvers import CyclicSchedule
from pinwheelkit.solvers import verify_covering
from pinwheelkit.solvers import verify_packing

PACK_HALVE = 'PackHalve'
PACK_CLAMP = 'PackClamp'
COV_HALVE = 'CovHalve'
COV_DROP = 'CovDrop'
COV_SHRINK = 'CovShrink'
THIRD = 'Third'

OPS = (PACK_HALVE, PACK_CLAMP, COV_HALVE, COV_DROP, COV_SHRINK, THIRD)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FoldStep:
    op: str
    removed: tuple
    added: tuple
    level: Fraction | None = None

    def to_dict(self):
        return {
            'op': self.op,
            'removed': [format_ratio(v) for v in self.removed],
            'added': [format_ratio(v) for v in self.added],
            'level': None if self.level is None else format_ratio(self.level)
        }


@dataclass(frozen=True)
class FoldTrace:
    input: TaskPeriods
    steps: tuple
    output: TaskPeriods

    def replay(self):
        values = list(self.input.periods)
        for step in self.steps:
            for value in step.removed:
                values.remove(value)
            values.extend(step.added)
        return self.input.with_periods(values)

    def provenance(self):
        """For each output job (sorted order), the input job indices folded into it."""
        _, final, members = _replay_uids(self)
        return [tuple(sorted(members[uid])) for _, uid in final]

    def to_dict(self):
        return {
            'input': self.input.to_strings(),
            'output': self.output.to_strings(),
            'steps': [step.to_dict() for step in self.steps]
        }


def _replay_uids(trace):
    """Replays a trace on uniquely numbered elements.

    Input job i gets uid i; every added value gets a fresh uid. Returns the
    per-step (removed uids, added uids), the final (value, uid) list in
    canonical order, and the input indices behind every uid.
    """
    alive = [(value, uid) for uid, value in enumerate(trace.input.periods)]
    members = {uid: {uid} for uid in range(len(alive))}
    next_uid = len(alive)
    history = []

    for step in trace.steps:
        removed = []
        for value in step.removed:
            for index in range(len(alive) - 1, -1, -1):
                if alive[index][0] == value:
                    removed.append(alive.pop(index)[1])
                    break
            else:
                raise ValueError(f"trace step {step.op} removes {value}, which is not present")

        added = []
        for value in step.added:
            bisect.insort(alive, (value, next_uid))
            members[next_uid] = set().union(*(members[uid] for uid in removed))
            added.append(next_uid)
            next_uid += 1

        history.append((removed, added))

    return history, alive, members


def pfold(A, theta):
    theta = Fraction(theta)
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta}")

    values = list(A.periods)
    steps = []
    while values and values[-1] > theta:
        a = values.pop()
        if values and values[-1] > theta:
            b = values.pop()
            bisect.insort(values, b / 2)
            steps.append(FoldStep(PACK_HALVE, (a, b), (b / 2,)))
        else:
            bisect.insort(values, theta)
            steps.append(FoldStep(PACK_CLAMP, (a,), (theta,)))

    return FoldTrace(A, tuple(steps), A.with_periods(values))


def pfold_to_single(A):
    if not A.periods:
        raise ValueError('pfold_to_single needs a nonempty instance')

    values = list(A.periods)
    steps = []
    while len(values) > 1:
        a = values.pop()
        b = values.pop()
        bisect.insort(values, b / 2)
        steps.append(FoldStep(PACK_HALVE, (a, b), (b / 2,)))

    return values[0], FoldTrace(A, tuple(steps), A.with_periods(values))


def _cfold_into(values, theta, steps, level=None):
    while values and values[-1] > theta:
        a = values.pop()
        if not values:
            bisect.insort(values, a / 2)
            steps.append(FoldStep(COV_SHRINK, (a,), (a / 2,), level))
            continue

        b = values.pop()
        if a < 2 * b:
            bisect.insort(values, a / 2)
            steps.append(FoldStep(COV_HALVE, (a, b), (a / 2,), level))
        else:
            bisect.insort(values, b)
            steps.append(FoldStep(COV_DROP, (a, b), (b,), level))


def cfold(A, theta):
    # a lone period above theta only stays uncoverable while halving keeps it above 1
    theta = Fraction(theta)
    if theta < 2:
        raise ValueError(f"theta must be at least 2, got {format_ratio(theta)}")

    values = list(A.periods)
    steps = []
    _cfold_into(values, theta, steps)

    return FoldTrace(A, tuple(steps), A.with_periods(values))


def _check_power_of_two(theta):
    theta = Fraction(theta)
    if theta.denominator != 1 or theta < 4 or theta.numerator & (theta.numerator - 1):
        raise ValueError(f"theta must be a power of two of at least 4, got {format_ratio(theta)}")
    return theta


def cfold_improved(A, theta):
    theta = _check_power_of_two(theta)

    values = list(A.periods)
    steps = []
    if not values:
        return FoldTrace(A, (), A)

    level = power_of_two(ceil_log2(values[-1]) - 1)
    while level >= theta:
        in_range = [v for v in values if level < v <= 2 * level]
        n = len(in_range)
        if n % 2 == 1 and n >= 3:
            m1, m2, m3 = in_range[:3]
            if m3 <= Fraction(4, 3) * level:
                for value in (m1, m2, m3):
                    values.remove(value)
                bisect.insort(values, m3 / 3)
                steps.append(FoldStep(THIRD, (m1, m2, m3), (m3 / 3,), level))

        _cfold_into(values, level, steps, level)
        level /= 2

    return FoldTrace(A, tuple(steps), A.with_periods(values))


def improved_loss_bound(theta_1, theta):
    """Sum of 3/(4 theta_m) over the levels theta_1, theta_1/2, ..., theta."""
    level = Fraction(theta_1)
    total = Fraction(0)
    while level >= theta:
        total += 3 / (4 * level)
        level /= 2
    return total


def iterated_loss_applies(A, theta):
    theta = _check_power_of_two(theta)
    if theta < 16 or not A.periods:
        return False

    theta_1 = power_of_two(ceil_log2(A.max) - 1)
    if theta_1 < theta or count_in_range(A, theta_1) < 2:
        return False

    try:
        if compute_e(A) != 2 * theta_1:
            return False
    except NoThresholdError:
        return False

    # the infinite reference sum is below its 40-term prefix plus 2^-40
    return density(A) >= reference_series(40) + Fraction(1, 2 ** 40)


def _split(prefix, cycle, uid, labels):
    k = len(labels)
    per_cycle = cycle.count(uid)
    repeat = 1
    while (per_cycle * repeat) % k:
        repeat += 1
    cycle = cycle * repeat

    counter = 0
    out = []
    for sequence in (prefix, cycle):
        rewritten = []
        for slot in sequence:
            if slot == uid:
                rewritten.append(labels[counter % k])
                counter += 1
            else:
                rewritten.append(slot)
        out.append(rewritten)

    return out[0], out[1]


def _relabel(sequence, uid, label):
    return [label if slot == uid else slot for slot in sequence]


def lift_schedule(trace, folded_schedule):
    verifier = verify_packing if trace.input.kind == PACKING else verify_covering

    if not verifier(trace.output, folded_schedule):
        raise InvalidWitnessError(f"schedule does not verify against the folded instance {trace.output}")

    history, final, _ = _replay_uids(trace)

    to_uid = [None] + [uid for _, uid in final]
    prefix = [to_uid[s] for s in folded_schedule.prefix]
    cycle = [to_uid[s] for s in folded_schedule.cycle]

    for step, (removed, added) in zip(reversed(trace.steps), reversed(history)):
        uid = added[0]
        if step.op in (PACK_HALVE, COV_HALVE, THIRD):
            prefix, cycle = _split(prefix, cycle, uid, removed)
        elif step.op == COV_DROP:
            # the a-job keeps no slots; the b-job takes over the folded b
            prefix = _relabel(prefix, uid, removed[1])
            cycle = _relabel(cycle, uid, removed[1])
        elif step.op in (PACK_CLAMP, COV_SHRINK):
            prefix = _relabel(prefix, uid, removed[0])
            cycle = _relabel(cycle, uid, removed[0])
        else:
            raise ValueError(f"unknown fold step {step.op}")

    def to_job(slot):
        return IDLE if slot is None else slot + 1

    lifted = CyclicSchedule(tuple(to_job(s) for s in cycle), tuple(to_job(s) for s in prefix))
    if not verifier(trace.input, lifted):
        raise InvalidWitnessError(f"lifted schedule does not verify against {trace.input}")

    logger.debug(f"lifted schedule through {len(trace.steps)} steps, cycle length {len(lifted.cycle)}")
    return lifted


FOLDS = {
    'pfold': pfold,
    'cfold': cfold,
    'cfoldimp': cfold_improved
}

FOLD_KINDS = {
    'pfold': PACKING,
    'pfold1': PACKING,
    'cfold': COVERING,
    'cfoldimp': COVERING
}
