"""Embedded checks of constants and worked examples, run by `pinwheelkit selftest`."""

import logging

from fractions import Fraction

from pinwheelkit.bgt import BgtInstance
from pinwheelkit.bgt import bgt_approximate
from pinwheelkit.bgt import m_scheduler
from pinwheelkit.bgt import simulate_bgt
from pinwheelkit.certify import certify_unschedulable
from pinwheelkit.certify import density_barrier
from pinwheelkit.certify import min_leftpush_per_window
from pinwheelkit.enumeration import get_spec
from pinwheelkit.errors import PinwheelError
from pinwheelkit.folds import cfold
from pinwheelkit.folds import cfold_improved
from pinwheelkit.folds import lift_schedule
from pinwheelkit.folds import pfold
from pinwheelkit.folds import pfold_to_single
from pinwheelkit.instances import TaskPeriods
from pinwheelkit.instances import compute_e
from pinwheelkit.instances import density_prime
from pinwheelkit.instances import density_shifted
from pinwheelkit.instances import w_prefix_density
from pinwheelkit.solvers import CyclicSchedule
from pinwheelkit.solvers import decide_covering
from pinwheelkit.solvers import decide_packing
from pinwheelkit.solvers import verify_covering
from pinwheelkit.solvers import verify_packing
from pinwheelkit.tables import ScheduleTables
from pinwheelkit.tables import relax

logger = logging.getLogger(__name__)


def _packing(*periods):
    return TaskPeriods.packing(periods)


def _covering(*periods):
    return TaskPeriods.covering(periods)


def _check(condition, message):
    if not condition:
        raise PinwheelError(message)


def _check_two_three():
    for a in range(3, 21):
        _check(not decide_packing(_packing(2, 3, a)).schedulable, f"(2,3,{a}) decided schedulable")
    return '(2,3,a) unschedulable for a in 3..20'


def _check_reference_covering():
    for instance in ((2, 3, 5), (2, 3, 5, 9)):
        _check(not decide_covering(_covering(*instance)).schedulable, f"{instance} decided schedulable")
    return '(2,3,5) and (2,3,5,9) have no covering schedule'


def _check_deciders():
    verdict = decide_covering(_covering(2, 2))
    _check(verdict.schedulable and verify_covering(_covering(2, 2), verdict.schedule), 'covering (2,2) not solved')

    verdict = decide_packing(_packing(2, 4, 4))
    _check(verdict.schedulable and verify_packing(_packing(2, 4, 4), verdict.schedule), 'packing (2,4,4) not solved')
    _check(not decide_packing(_packing(2, 3, 6)).schedulable, '(2,3,6) decided schedulable')
    return 'covering (2,2) and packing (2,4,4) solved, (2,3,6) rejected'


def _check_verifiers():
    _check(verify_packing(_packing(2, 4, 4), CyclicSchedule((1, 2, 1, 3))), 'cycle 1,2,1,3 rejected for (2,4,4)')
    _check(not verify_packing(_packing(3), CyclicSchedule((0, 0, 0, 1))), 'cycle 0,0,0,1 accepted for (3)')
    _check(not verify_covering(_covering(2, 3), CyclicSchedule((1, 2))), 'cycle 1,2 accepted as covering (2,3)')
    return 'hand-checked cycles'


def _check_densities():
    A = _covering(2, 3, 5, 9, 17)
    _check(density_shifted(A, 8) == density_prime(A), 'shifted density differs from D prime')
    _check(w_prefix_density(4) == Fraction(1, 2) + Fraction(1, 3), 'prefix density of 4 is not 5/6')
    _check(compute_e(_covering(2, 2)) == 2, 'threshold of (2,2) is not 2')
    return 'density variants and threshold scan'


def _check_folds():
    examples = (
        (pfold(_packing(2, 5, 7), 4).output, _packing(2, Fraction(5, 2))),
        (pfold(_packing(2, 6), 4).output, _packing(2, 4)),
        (cfold(_covering(2, 5, 7), 4).output, _covering(2, Fraction(7, 2))),
        (cfold(_covering(3, 5, 12), 4).output, _covering(Fraction(5, 2))),
        (cfold_improved(_covering(2, 20, 24), 16).output, _covering(2, 12)),
        (cfold_improved(_covering(17, 18, 20), 16).output, _covering(Fraction(20, 3)))
    )
    for folded, expected in examples:
        _check(folded == expected, f"folded to {folded}, expected {expected}")
    _check(pfold_to_single(_packing(4, 8, 8))[0] == 2, '(4,8,8) does not fold to 2')
    return 'worked fold examples'


def _check_lift():
    trace = cfold(_covering(2, 2, 5, 7), 4)
    folded = decide_covering(_covering(2, 2, 4)).schedule
    lifted = lift_schedule(trace, folded)
    _check(verify_covering(trace.input, lifted), 'lifted schedule does not cover (2,2,5,7)')
    return f"(2,2,5,7) lifted to cycle length {len(lifted.cycle)}"


def _check_barriers():
    for periods, expected in (((3, 4, 8), Fraction(47, 48)), ((3, 6, 6, 8), Fraction(95, 96)), ((4, 5), 1)):
        barrier = density_barrier(_packing(*periods)).value
        _check(barrier == expected, f"barrier of {periods} is {barrier}")
    _check(certify_unschedulable(_packing(3, 4, 5, 5)).certified, '(3,4,5,5) not certified')
    _check(not certify_unschedulable(_packing(2, 3, 7)).certified, '(2,3,7) certified')
    return 'barriers 47/48, 95/96 and 1'


def _check_window():
    report = min_leftpush_per_window(_packing(3, 6, 6, 8), 24)
    _check(report.min_leftpushes >= 2, f"only {report.min_leftpushes} left-pushes")
    return f"(3,6,6,8) needs {report.min_leftpushes} left-pushes per 24 days"


def _check_families():
    for name, expected in (('CLAIM5', Fraction(47, 40)), ('CASE5', Fraction(103, 90))):
        _check(get_spec(name).lower_bound == expected, f"{name} threshold is {get_spec(name).lower_bound}")
    _check(get_spec('CASE3-SUB3').top_triple == (17, 22), 'CASE3-SUB3 top triple range changed')
    return 'campaign thresholds'


def _check_bgt():
    tables = ScheduleTables(solve_on_miss=True)
    _check(relax(_packing(3, 6, 6, 8)) == _packing(3, 7, 7, 10), '(3,6,6,8) does not relax to (3,7,7,10)')

    result = m_scheduler(_packing(4, 4, 4, 4), tables)
    _check(result.relaxed and verify_packing(_packing(5, 5, 5, 5), result.schedule), '(4,4,4,4) not scheduled')

    grove = BgtInstance((2, 1, 1))
    height, schedule = bgt_approximate(grove, tables)
    _check(7 * simulate_bgt(grove, schedule) <= 9 * height, f"rates (2,1,1) exceed 9/7 of H = {height}")
    return f"rates (2,1,1): H = {height}"


CHECKS = (
    ('two-three', _check_two_three),
    ('reference-covering', _check_reference_covering),
    ('deciders', _check_deciders),
    ('verifiers', _check_verifiers),
    ('densities', _check_densities),
    ('folds', _check_folds),
    ('lift', _check_lift),
    ('barriers', _check_barriers),
    ('window', _check_window),
    ('families', _check_families),
    ('bgt', _check_bgt)
)


def run_selftest():
    """Runs every check; returns (name, passed, detail) tuples."""
    results = []
    for name, check in CHECKS:
        try:
            results.append((name, True, check()))
        except Exception as error:
            logger.debug(f"check {name} failed", exc_info=True)
            results.append((name, False, str(error) or type(error).__name__))
    return results
