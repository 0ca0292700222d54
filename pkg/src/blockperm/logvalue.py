import math
from dataclasses import dataclass, field

from .errors import DomainError


@dataclass(frozen=True, order=True)
class LogValue:
    """Nonnegative number stored as its natural logarithm.

    ``log == -inf`` is the zero element. ``flagged`` marks values that were
    repaired numerically (e.g. a tiny negative clamped to zero) and does not
    take part in comparisons.
    """

    log: float
    flagged: bool = field(default=False, compare=False)

    @classmethod
    def zero(cls, flagged=False):
        return cls(-math.inf, flagged)

    @classmethod
    def one(cls):
        return cls(0.0)

    @classmethod
    def from_float(cls, x, flagged=False):
        x = float(x)
        if math.isnan(x) or x < 0:
            raise DomainError(f"cannot store {x!r} as a LogValue")
        if x == 0:
            return cls.zero(flagged)
        return cls(math.log(x), flagged)

    @property
    def is_zero(self):
        return self.log == -math.inf

    @property
    def value(self):
        return math.exp(self.log)

    def __float__(self):
        return self.value

    def __mul__(self, other):
        other = _coerce(other)
        return LogValue(self.log + other.log, self.flagged or other.flagged)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other.is_zero:
            raise ZeroDivisionError("division by a zero LogValue")
        return LogValue(self.log - other.log, self.flagged or other.flagged)

    def __pow__(self, p):
        if self.is_zero:
            if p > 0:
                return self
            if p == 0:
                return LogValue.one()
            raise ZeroDivisionError("negative power of zero")
        return LogValue(self.log * p, self.flagged)

    def root(self, k):
        return self ** (1.0 / k)

    def sqrt(self):
        return self.root(2)

    def __repr__(self):
        tag = ", flagged" if self.flagged else ""
        return f"LogValue(log={self.log!r}{tag})"


def _coerce(x):
    if isinstance(x, LogValue):
        return x
    return LogValue.from_float(x)


def log_ratio(a, b):
    """log(a/b) for two LogValues."""
    return a.log - b.log
