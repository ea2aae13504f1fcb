'''
Kitten Simulator Exceptions
Shared error types raised by the state, detector, witness and sweep modules
'''

from typing import Optional, Sequence


class KittenError(Exception):
    """Base class for every error raised by the simulator"""


class InvalidParameter(KittenError, ValueError):
    """A physical parameter is outside its allowed range"""

    def __init__(self, name: str, value, allowed: str):
        self.name = name
        self.value = value
        self.allowed = allowed
        super().__init__(f"Invalid value for {name}: {value!r} (expected {allowed})")


class InsufficientCutoff(KittenError):
    """The Fock cutoff leaves more probability in the tail than tolerated"""

    def __init__(self, nmax: int, deficit: float, threshold: float):
        self.nmax = nmax
        self.deficit = deficit
        self.threshold = threshold
        super().__init__(
            f"Fock cutoff nmax={nmax} is too small: tail mass {deficit:.3e} "
            f"exceeds {threshold:.1e}; raise nmax"
        )


class TruncationOverflow(KittenError):
    """Squeezing conjugation pushed too much weight beyond the cutoff"""

    def __init__(self, s: float, trace_loss: float, threshold: float):
        self.s = s
        self.trace_loss = trace_loss
        self.threshold = threshold
        super().__init__(
            f"Squeezing by s={s:.6g} lost trace {trace_loss:.3e} "
            f"beyond the cutoff (limit {threshold:.1e})"
        )


class ImpossibleHerald(KittenError):
    """The conditioning event has zero probability"""

    def __init__(self, m: int, detector: str = "", probability: float = 0.0):
        self.m = m
        self.detector = detector
        self.probability = probability
        where = f" on {detector}" if detector else ""
        super().__init__(
            f"Herald of m={m} click(s){where} has probability {probability:.3e}; "
            "no conditional state exists"
        )


class BoundaryBracketError(KittenError):
    """The Gaussian boundary maximiser could not be bracketed or disagreed with itself"""


class WitnessOverflow(KittenError):
    """Every anti-squeezing value on the witness grid overflowed the cutoff"""

    def __init__(self, failing_s: Sequence[float]):
        self.failing_s = list(failing_s)
        shown = ", ".join(f"{s:.4g}" for s in self.failing_s[:10])
        more = "" if len(self.failing_s) <= 10 else f" ... ({len(self.failing_s)} total)"
        super().__init__(f"All anti-squeezing values overflowed the cutoff: {shown}{more}")


class InvalidMeasurement(KittenError, ValueError):
    """Calibration inputs are not a consistent squeezing measurement"""


class IllConditionedMeasurement(InvalidMeasurement):
    """Calibration formula denominator is numerically zero"""


class InconsistentCalibration(InvalidMeasurement):
    """Calibration results imply a negative impurity"""


class ConfigError(KittenError):
    """Configuration value, key or file problem"""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        prefix = f"{field}: " if field else ""
        super().__init__(f"{prefix}{message}")


NUMERICAL_ERRORS = (
    ImpossibleHerald,
    TruncationOverflow,
    InsufficientCutoff,
    BoundaryBracketError,
    WitnessOverflow,
)
