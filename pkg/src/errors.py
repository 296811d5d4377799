"""Exception hierarchy for the stress-release simulation library."""
from dataclasses import dataclass
from typing import Iterable, Tuple


class StressReleaseError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(StressReleaseError, ValueError):
    """An input value violates a model, configuration or domain constraint."""


@dataclass(frozen=True)
class MomentViolation:
    """One failed check for a single moment order."""
    order: int
    side: str
    reason: str

    def __str__(self) -> str:
        return f"order {self.order} ({self.side}): {self.reason}"


class MomentError(StressReleaseError, ValueError):
    """Reciprocal moments cannot be evaluated for the requested orders."""

    def __init__(self, message: str, violations: Iterable[MomentViolation] = ()):
        self.violations: Tuple[MomentViolation, ...] = tuple(violations)
        if self.violations:
            message = f"{message}: " + "; ".join(str(v) for v in self.violations)
        super().__init__(message)

    @property
    def orders(self) -> Tuple[int, ...]:
        return tuple(sorted({v.order for v in self.violations}))


class DivergentMomentError(MomentError):
    """An exponential jump moment m_k = E[exp(kX)] - 1 is infinite."""


class StabilityError(MomentError):
    """A relaxation rate psi_k = k*beta - rho*m_k^E is not positive."""
