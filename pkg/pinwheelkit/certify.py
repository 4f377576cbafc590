import itertools
import logging
import math

from dataclasses import dataclass
from dataclasses import field
from fractions import Fraction

from pinwheelkit.errors import IndeterminateError
from pinwheelkit.instances import PACKING
from pinwheelkit.instances import TaskPeriods
from pinwheelkit.instances import density

GENERAL = 'General1'
COPRIME = 'Coprime'
WINDOW_3668 = 'Window3668'

CERTIFIED = 'Certified'
UNKNOWN = 'Unknown'

DEFAULT_WINDOW_STATES = 1_000_000

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Barrier:
    value: Fraction
    origin: str
    params: tuple = field(default=())

    def describe(self):
        if self.params:
            return f"{self.origin}{self.params}"
        return self.origin


@dataclass(frozen=True)
class WindowReport:
    jobs: TaskPeriods
    window: int
    min_leftpushes: int
    states: int = 0


@dataclass(frozen=True)
class Certification:
    outcome: str
    barrier: Barrier
    density: Fraction

    @property
    def certified(self):
        return self.outcome == CERTIFIED


def coprime_pair_bound(a, b):
    if not 1 < a < b:
        raise ValueError(f"coprime bound needs 1 < a < b, got ({a}, {b})")
    if math.gcd(a, b) != 1:
        raise ValueError(f"coprime bound needs gcd(a, b) = 1, got ({a}, {b})")
    return 1 - Fraction(1, a * b * b)


def density_barrier(A):
    periods = A.periods

    if len(periods) >= 2 and periods[0] == 3 and periods[1] in (4, 5, 7):
        b = int(periods[1])
        return Barrier(coprime_pair_bound(3, b), COPRIME, (3, b))

    if tuple(periods[:4]) == (3, 6, 6, 8):
        return Barrier(Fraction(95, 96), WINDOW_3668)

    return Barrier(Fraction(1), GENERAL)


def certify_unschedulable(A):
    barrier = density_barrier(A)
    value = density(A)
    outcome = CERTIFIED if value > barrier.value else UNKNOWN
    return Certification(outcome, barrier, value)


def _core_states(edges):
    """States lying on some bi-infinite path: drop sources and sinks until stable."""
    alive = set(edges)
    changed = True
    while changed:
        changed = False
        indegree = dict.fromkeys(alive, 0)
        for state in alive:
            for successor, _ in edges[state]:
                if successor in alive:
                    indegree[successor] += 1

        for state in list(alive):
            has_out = any(successor in alive for successor, _ in edges[state])
            if not has_out or indegree[state] == 0:
                alive.discard(state)
                changed = True

    return alive


def min_leftpush_per_window(fixed, window, max_states=None):
    """Fewest left-pushes in any `window` consecutive days of a valid schedule of `fixed`.

    Only the fixed jobs are placed; every other day is free. A job that
    runs with gap g < a counts a - g left-pushes on the day it runs.
    """
    if window < 1:
        raise ValueError(f"window must be at least 1 day, got {window}")
    if fixed.kind != PACKING:
        raise ValueError('left-push analysis applies to packing jobs')

    periods = fixed.integers()
    budget = max_states or DEFAULT_WINDOW_STATES
    size = math.prod(periods)
    if size > budget:
        raise IndeterminateError(f"{size} automaton states exceed the budget of {budget}", size)

    n = len(periods)

    # state: days since each job last ran, as of today
    edges = {}
    for state in itertools.product(*(range(1, a + 1) for a in periods)):
        due = [i for i in range(n) if state[i] == periods[i]]
        choices = due if due else [None] + list(range(n))
        moves = []
        if len(due) <= 1:
            for job in choices:
                pushes = 0 if job is None else periods[job] - state[job]
                successor = tuple(1 if i == job else state[i] + 1 for i in range(n))
                moves.append((successor, pushes))
        edges[state] = moves

    core = _core_states(edges)
    if not core:
        raise ValueError(f"no valid infinite schedule exists for {fixed}")

    best = dict.fromkeys(core, 0)
    for _ in range(window):
        following = {}
        for state, cost in best.items():
            for successor, pushes in edges[state]:
                if successor in core:
                    total = cost + pushes
                    if total < following.get(successor, total + 1):
                        following[successor] = total
        best = following

    minimum = min(best.values())
    logger.debug(f"window analysis of {fixed} over {window} days: {len(core)} core states, minimum {minimum}")
    return WindowReport(fixed, window, minimum, len(edges))
