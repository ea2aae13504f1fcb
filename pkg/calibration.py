'''
Calibration
Convert measured squeezing / anti-squeezing variances and homodyne efficiency
components into the simulator's pure squeezing V0 and impurity parameters.
Variances are linear and normalised to vacuum = 1.
'''

import math
from dataclasses import dataclass
from typing import Any, Dict, Tuple

from kitten_errors import (
    IllConditionedMeasurement,
    InconsistentCalibration,
    InvalidMeasurement,
    InvalidParameter,
)

DENOMINATOR_TOL = 1e-9

TO_DB = "to_db"
FROM_DB = "from_db"


def _check_efficiency(name: str, value: float):
    if not 0.0 < value <= 1.0:
        raise InvalidParameter(name, value, "efficiency in (0, 1]")


@dataclass(frozen=True)
class CalibrationInput:
    v_sqz: float
    v_asqz: float
    eta_qe: float = 1.0
    eta_t: float = 1.0
    zeta: float = 1.0
    r2: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.v_sqz < 1.0 < self.v_asqz:
            raise InvalidMeasurement(
                f"Need 0 < v_sqz < 1 < v_asqz, got v_sqz={self.v_sqz}, v_asqz={self.v_asqz}")
        for name in ("eta_qe", "eta_t", "zeta"):
            _check_efficiency(name, getattr(self, name))
        if not 0.0 <= self.r2 < 1.0:
            raise InvalidParameter("r2", self.r2, "reflectivity in [0, 1)")

    @property
    def eta_hd(self) -> float:
        return homodyne_efficiency(self.eta_qe, self.eta_t, self.zeta)


@dataclass(frozen=True)
class CalibrationResult:
    v0: float
    v0_db: float
    r_total: float
    r1: float
    eta_hd: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "v0": self.v0,
            "v0_db": self.v0_db,
            "r_total": self.r_total,
            "r1": self.r1,
            "eta_hd": self.eta_hd,
        }


def homodyne_efficiency(eta_qe: float, eta_t: float, zeta: float) -> float:
    """Photodiode efficiency times path transmission times visibility squared"""
    _check_efficiency("eta_qe", eta_qe)
    _check_efficiency("eta_t", eta_t)
    _check_efficiency("zeta", zeta)
    return eta_qe * eta_t * zeta ** 2


def estimate_pure_squeezing(v_sqz: float, v_asqz: float) -> float:
    """V0 = (1 - v_sqz) / (v_asqz - 1)"""
    if not v_asqz > 1.0:
        raise InvalidMeasurement(f"Anti-squeezing variance must exceed 1, got {v_asqz}")
    if not 0.0 < v_sqz < 1.0:
        raise InvalidMeasurement(f"Squeezing variance must lie in (0, 1), got {v_sqz}")
    return (1.0 - v_sqz) / (v_asqz - 1.0)


def estimate_total_impurity(v_sqz: float, v_asqz: float, eta_hd: float) -> float:
    """Impurity of the squeezed vacuum as seen through the whole detection chain"""
    _check_efficiency("eta_hd", eta_hd)
    spread = 2.0 - v_sqz - v_asqz
    if abs(spread) < DENOMINATOR_TOL:
        raise IllConditionedMeasurement(
            f"2 - v_sqz - v_asqz = {spread:.3e} is too close to zero to estimate impurity")
    r_total = (eta_hd * spread - (1.0 - v_sqz) * (1.0 - v_asqz)) / (spread * eta_hd)
    if r_total < -DENOMINATOR_TOL:
        raise InconsistentCalibration(
            f"Measured variances imply a negative total impurity ({r_total:.4g})")
    return max(r_total, 0.0)


def compose_impurity(r1: float, r2: float) -> float:
    """Total impurity of two sequential losses: 1 - (1 - r1)(1 - r2)"""
    return 1.0 - (1.0 - r1) * (1.0 - r2)


def split_impurity(r_total: float, r2: float) -> float:
    """Remove the tap reflectivity from the total impurity"""
    if not 0.0 <= r_total < 1.0:
        raise InvalidParameter("r_total", r_total, "impurity in [0, 1)")
    if not 0.0 <= r2 < 1.0:
        raise InvalidParameter("r2", r2, "reflectivity in [0, 1)")
    r1 = 1.0 - (1.0 - r_total) / (1.0 - r2)
    if r1 < -DENOMINATOR_TOL:
        raise InconsistentCalibration(
            f"Tap reflectivity r2={r2} exceeds the total impurity {r_total}; r1 would be {r1:.4g}")
    return max(r1, 0.0)


def to_db(value: float) -> float:
    if not value > 0:
        raise InvalidParameter("variance", value, "linear value > 0")
    return 10.0 * math.log10(value)


def from_db(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def db_conversions(value: float, direction: str = TO_DB) -> float:
    if direction == TO_DB:
        return to_db(value)
    if direction == FROM_DB:
        return from_db(value)
    raise InvalidParameter("direction", direction, f"'{TO_DB}' or '{FROM_DB}'")


def forward_variances(v0: float, r_total: float, eta_hd: float) -> Tuple[float, float]:
    """Variances a homodyne detector would record for pure squeezing v0 behind the given losses"""
    if not 0.0 < v0 < 1.0:
        raise InvalidParameter("v0", v0, "pure squeezing variance in (0, 1)")
    if not 0.0 <= r_total < 1.0:
        raise InvalidParameter("r_total", r_total, "impurity in [0, 1)")
    _check_efficiency("eta_hd", eta_hd)
    transmission = eta_hd * (1.0 - r_total)
    return (transmission * v0 + 1.0 - transmission,
            transmission / v0 + 1.0 - transmission)


def calibrate(measurement: CalibrationInput, eta_hd: float = None) -> CalibrationResult:
    """Full chain: efficiency, pure squeezing, total impurity and the split into r1"""
    eta = measurement.eta_hd if eta_hd is None else eta_hd
    v0 = estimate_pure_squeezing(measurement.v_sqz, measurement.v_asqz)
    r_total = estimate_total_impurity(measurement.v_sqz, measurement.v_asqz, eta)
    r1 = split_impurity(r_total, measurement.r2)
    return CalibrationResult(v0, to_db(v0), r_total, r1, eta)
