import math

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from pinwheelkit.errors import NoThresholdError

PACKING = 'packing'
COVERING = 'covering'

KINDS = (PACKING, COVERING)


def parse_ratio(value) -> Fraction:
    """Parses '7', '7/2' or an int/Fraction into an exact rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if not text:
            raise ValueError('empty period')
        return Fraction(text)

    raise ValueError(f"cannot interpret {value!r} as a rational period")


def format_ratio(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def ceil_log2(value) -> int:
    """Smallest integer k with 2^k >= value, for any positive rational."""
    value = Fraction(value)
    if value <= 0:
        raise ValueError(f"ceil_log2 needs a positive value, got {value}")

    if value > 1:
        return (math.ceil(value) - 1).bit_length()

    k = 0
    while Fraction(1, 2 ** (1 - k)) >= value:
        k -= 1
    return k


def power_of_two(k: int) -> Fraction:
    return Fraction(2) ** k


@dataclass(frozen=True)
class TaskPeriods:
    kind: str
    periods: tuple

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown instance kind {self.kind!r}")

        periods = tuple(sorted(parse_ratio(p) for p in self.periods))
        for period in periods:
            if period <= 0:
                raise ValueError(f"periods must be positive, got {format_ratio(period)}")

        object.__setattr__(self, 'periods', periods)

    @classmethod
    def packing(cls, periods: Iterable) -> 'TaskPeriods':
        return cls(PACKING, tuple(periods))

    @classmethod
    def covering(cls, periods: Iterable) -> 'TaskPeriods':
        return cls(COVERING, tuple(periods))

    @classmethod
    def parse(cls, text: str, kind: str) -> 'TaskPeriods':
        text = text.strip()
        if not text:
            return cls(kind, ())
        return cls(kind, tuple(parse_ratio(p) for p in text.split(',')))

    def __len__(self):
        return len(self.periods)

    def __iter__(self):
        return iter(self.periods)

    def __getitem__(self, index):
        return self.periods[index]

    @property
    def max(self) -> Fraction:
        if not self.periods:
            raise ValueError('empty instance has no maximum')
        return self.periods[-1]

    def is_integral(self) -> bool:
        return all(p.denominator == 1 for p in self.periods)

    def integers(self) -> tuple:
        if not self.is_integral():
            raise ValueError(f"instance {self} has non-integer periods")
        return tuple(p.numerator for p in self.periods)

    def with_periods(self, periods: Iterable) -> 'TaskPeriods':
        return TaskPeriods(self.kind, tuple(periods))

    def without_one(self, value) -> 'TaskPeriods':
        periods = list(self.periods)
        periods.remove(Fraction(value))
        return self.with_periods(periods)

    def to_strings(self) -> list:
        return [format_ratio(p) for p in self.periods]

    def __str__(self):
        return '(' + ','.join(self.to_strings()) + ')'


@dataclass(frozen=True)
class ReferencePrefix:
    limit: Fraction
    terms: tuple


def reference_prefix(limit) -> ReferencePrefix:
    limit = Fraction(limit)

    terms = []
    i = 0
    while 2 ** i + 1 <= limit:
        terms.append(2 ** i + 1)
        i += 1

    return ReferencePrefix(limit, tuple(terms))


def reference_series(k: int) -> Fraction:
    """Finite sum of 1/(2^i + 1) for i = 0..k."""
    return sum((Fraction(1, 2 ** i + 1) for i in range(k + 1)), Fraction(0))


def reference_instance(theta, kind=COVERING) -> TaskPeriods:
    # (2, 3, 5, ..., 2^(ceil(log2 theta) - 1) + 1)
    top = ceil_log2(theta)
    return TaskPeriods(kind, tuple(2 ** i + 1 for i in range(max(top, 0))))


def two_three_family(limit: int):
    """Packing instances (2, 3, a) for a = 3..limit; none of them is schedulable."""
    for a in range(3, limit + 1):
        yield TaskPeriods.packing((2, 3, a))


def reference_covering_family(k: int) -> TaskPeriods:
    return TaskPeriods.covering([2] + [2 ** i + 1 for i in range(1, k + 1)])


def density(A: TaskPeriods) -> Fraction:
    return sum((1 / p for p in A.periods), Fraction(0))


def shifted_weight(period: Fraction, c) -> Fraction:
    if period <= c:
        return 1 / period
    return 1 / (period - 1)


def density_shifted(A: TaskPeriods, c: int) -> Fraction:
    if c < 1:
        raise ValueError(f"shift cutoff must be at least 1, got {c}")
    return sum((shifted_weight(p, c) for p in A.periods), Fraction(0))


def density_prime(A: TaskPeriods) -> Fraction:
    return density_shifted(A, 8)


def mod_weight(period: int) -> Fraction:
    if period <= 5:
        return Fraction(1, period)
    if period == 6:
        return Fraction(3, 17)
    if period == 7:
        return Fraction(3, 19)
    if period == 8:
        return Fraction(1, 8)
    return Fraction(2, 2 * period - 1)


def density_mod(A: TaskPeriods) -> Fraction:
    if not A.is_integral():
        raise ValueError(f"density_mod needs integer periods, got {A}")
    return sum((mod_weight(p) for p in A.integers()), Fraction(0))


def w_prefix_density(p) -> Fraction:
    p = Fraction(p)
    if p < 0:
        raise ValueError(f"prefix cutoff must be non-negative, got {p}")
    return sum((Fraction(1, t) for t in reference_prefix(p).terms), Fraction(0))


def restrict(A: TaskPeriods, r) -> TaskPeriods:
    r = Fraction(r)
    return A.with_periods(p for p in A.periods if p <= r)


def count_in_range(A: TaskPeriods, i) -> int:
    i = Fraction(i)
    if i <= 0:
        raise ValueError(f"range base must be positive, got {i}")
    return sum(1 for p in A.periods if i < p <= 2 * i)


def compute_e(A: TaskPeriods) -> Fraction:
    if not A.periods:
        raise NoThresholdError('empty instance has no threshold')

    top = max(ceil_log2(A.max), 0)
    for k in range(top + 1):
        p = power_of_two(k)
        if density(restrict(A, p)) > w_prefix_density(p):
            return p

    raise NoThresholdError(f"no power of two up to {2 ** top} exceeds the reference prefix density for {A}")
