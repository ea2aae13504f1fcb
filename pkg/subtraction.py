'''
Photon Subtraction
Conditional measurement on a tapped squeezed vacuum: ideal and imperfect
photon-number detectors, on-off (non-resolving) collapse, mode-purity mixing
and the end-to-end kitten preparation.

Reflectivities and transmissions are intensity fractions (r + t = 1).
'''

import dataclasses
import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

from fock_core import (
    CUTOFF_TAIL_THRESHOLD,
    DEFAULT_NMAX,
    DensityMatrix,
    SqueezedVacuumSpec,
    impure_squeezed_vacuum,
    loss_channel,
    loss_kraus,
)
from kitten_errors import ImpossibleHerald, InsufficientCutoff, InvalidParameter

MODEL_NAMES = ("pnrd", "npnrd", "impnrd", "imnpnrd")

# Weight used for each click count in the on-off mixture
CLICK_PROBABILITY = "click_probability"
SUBTRACTION_PROBABILITY = "subtraction_probability"
NPNRD_WEIGHTINGS = (CLICK_PROBABILITY, SUBTRACTION_PROBABILITY)
DEFAULT_NPNRD_WEIGHTING = CLICK_PROBABILITY

# Typical experiment values
DEFAULT_V0_DB = -4.67
DEFAULT_R1 = 0.1771
DEFAULT_R2 = 0.08
DEFAULT_MODE_PURITY = 0.8
DEFAULT_ETA_HD = 0.85


@dataclass(frozen=True)
class DetectorModel:
    """Photon-number detector on the tap arm"""

    pdc: float = 0.0
    eta: float = 1.0
    resolving: bool = True
    ideal: bool = False
    m: int = 1
    name: str = ""

    def __post_init__(self):
        if self.ideal:
            object.__setattr__(self, "pdc", 0.0)
            object.__setattr__(self, "eta", 1.0)
        if not 0.0 <= self.pdc < 1.0:
            raise InvalidParameter("pdc", self.pdc, "dark-count probability in [0, 1)")
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidParameter("eta", self.eta, "efficiency in [0, 1]")
        if int(self.m) != self.m or self.m < 1:
            raise InvalidParameter("m", self.m, "integer click count >= 1")

    @property
    def model(self) -> str:
        prefix = "" if self.ideal else "im"
        return f"{prefix}{'' if self.resolving else 'n'}pnrd"

    @property
    def label(self) -> str:
        return self.model.upper()

    @classmethod
    def for_model(cls, model: str, pdc: float = 0.0, eta: float = 1.0,
                  m: int = 1, name: str = "") -> "DetectorModel":
        """Build one of PNRD / NPNRD / IMPNRD / IMNPNRD by name"""
        key = model.lower()
        if key not in MODEL_NAMES:
            raise InvalidParameter("model", model, "one of " + ", ".join(MODEL_NAMES))
        ideal = not key.startswith("im")
        resolving = key in ("pnrd", "impnrd")
        return cls(pdc=pdc, eta=eta, resolving=resolving, ideal=ideal, m=m, name=name)


@dataclass(frozen=True)
class ExperimentParams:
    """Input state, tap and characterisation parameters"""

    spec: SqueezedVacuumSpec
    r1: float = DEFAULT_R1
    r2: float = DEFAULT_R2
    mode_purity: float = DEFAULT_MODE_PURITY
    eta_hd: float = DEFAULT_ETA_HD

    def __post_init__(self):
        if not 0.0 <= self.r1 < 1.0:
            raise InvalidParameter("r1", self.r1, "impurity in [0, 1)")
        _check_reflectivity(self.r2)
        if not 0.0 <= self.mode_purity <= 1.0:
            raise InvalidParameter("mode_purity", self.mode_purity, "value in [0, 1]")
        if not 0.0 < self.eta_hd <= 1.0:
            raise InvalidParameter("eta_hd", self.eta_hd, "efficiency in (0, 1]")

    @property
    def t2(self) -> float:
        return 1.0 - self.r2

    @property
    def v0_db(self) -> float:
        return self.spec.v0_db

    @classmethod
    def typical(cls, nmax: int = DEFAULT_NMAX) -> "ExperimentParams":
        return cls(SqueezedVacuumSpec.from_db(DEFAULT_V0_DB, nmax))

    def replace(self, **changes) -> "ExperimentParams":
        """Copy with some fields changed; v0_db and nmax are accepted as shortcuts"""
        v0_db = changes.pop("v0_db", None)
        nmax = changes.pop("nmax", None)
        if v0_db is not None or nmax is not None:
            level = self.spec.v0_db if v0_db is None else v0_db
            changes["spec"] = SqueezedVacuumSpec.from_db(
                level, self.spec.nmax if nmax is None else nmax)
        return dataclasses.replace(self, **changes)


class KittenPreparation(NamedTuple):
    state: DensityMatrix
    input_state: DensityMatrix
    herald_probability: float


def _check_reflectivity(r2: float):
    if not 0.0 < r2 < 1.0:
        raise InvalidParameter("r2", r2, "tap reflectivity in (0, 1)")


def _branches(rho_in: DensityMatrix, r2: float) -> Tuple[np.ndarray, np.ndarray]:
    """Unnormalised states M_k rho M_k^T for every k and their traces S(k)"""
    _check_reflectivity(r2)
    # M_k = sqrt(r2^k / k!) t2^(n/2) a^k has the same elements as the loss Kraus operator at eta = t2
    kraus = loss_kraus(rho_in.dim, 1.0 - float(r2))
    branches = np.einsum("kij,jl,kml->kim", kraus, rho_in.elements, kraus, optimize=True)
    weights = np.einsum("kii->k", branches)
    return branches, np.clip(weights, 0.0, None)


def conditional_unnormalized(rho_in: DensityMatrix, r2: float,
                             k: int) -> Tuple[DensityMatrix, float]:
    """Signal state after k photons are reflected into the tap, with its probability S(k)"""
    if k < 0:
        raise InvalidParameter("k", k, ">= 0")
    _check_reflectivity(r2)
    if k > rho_in.nmax:
        return DensityMatrix(np.zeros_like(rho_in.elements), rho_in.trace_deficit), 0.0
    kraus = loss_kraus(rho_in.dim, 1.0 - float(r2))[k]
    out = DensityMatrix(kraus @ rho_in.elements @ kraus.T, rho_in.trace_deficit,
                        rho_in.cutoff_ok)
    return out, max(out.trace(), 0.0)


def subtraction_probabilities(rho_in: DensityMatrix, r2: float) -> np.ndarray:
    """S(k) for k = 0..nmax"""
    _check_reflectivity(r2)
    kraus = loss_kraus(rho_in.dim, 1.0 - float(r2))
    # Tr(M_k rho M_k^T) only needs the populations
    transfer = np.einsum("kij,kij->kj", kraus, kraus)
    return np.clip(transfer @ np.diag(rho_in.elements), 0.0, None)


def subtraction_probability(rho_in: DensityMatrix, r2: float, k: int) -> float:
    if k < 0:
        raise InvalidParameter("k", k, ">= 0")
    if k > rho_in.nmax:
        return 0.0
    return float(subtraction_probabilities(rho_in, r2)[k])


def tap_vacuum_state(rho_in: DensityMatrix, r2: float) -> DensityMatrix:
    """Signal state when no photon reaches the tap"""
    state, weight = conditional_unnormalized(rho_in, r2, 0)
    if weight <= 0:
        raise ImpossibleHerald(0, "tap vacuum", weight)
    return state.normalized()


def pnrd_state(rho_in: DensityMatrix, r2: float, m: int) -> DensityMatrix:
    """Ideal photon-number-resolving herald of exactly m photons"""
    state, weight = conditional_unnormalized(rho_in, r2, m)
    if not weight > 0:
        raise ImpossibleHerald(m, "PNRD", weight)
    return state.normalized()


def detector_response(k: int, m: int, det: DetectorModel) -> float:
    """P(m|k): m clicks given k photons, with Poissonian dark counts and binomial efficiency"""
    if k < 0 or m < 0:
        raise InvalidParameter("k, m", (k, m), "non-negative counts")
    total = 0.0
    for d in range(m + 1):
        detected = m - d
        if detected > k:
            continue
        dark = math.exp(-det.pdc) * det.pdc ** d / math.factorial(d)
        total += (dark * math.comb(k, detected) * det.eta ** detected
                  * (1.0 - det.eta) ** (k - detected))
    return total


def response_row(m: int, det: DetectorModel, kmax: int) -> np.ndarray:
    """P(m|k) for k = 0..kmax"""
    return np.array([detector_response(k, m, det) for k in range(kmax + 1)])


def click_weights(det: DetectorModel, kmax: int, m: int = None) -> np.ndarray:
    """Probability that an on-off detector reports at least m clicks, for k = 0..kmax photons"""
    m = det.m if m is None else m
    below = np.zeros(kmax + 1)
    for j in range(m):
        below += response_row(j, det, kmax)
    return np.clip(1.0 - below, 0.0, 1.0)


def bayes_weights(rho_in: DensityMatrix, r2: float, det: DetectorModel,
                  m: int = None) -> np.ndarray:
    """Q(k|m) = P(m|k) S(k) / P(m) over k = 0..nmax"""
    m = det.m if m is None else m
    joint = response_row(m, det, rho_in.nmax) * subtraction_probabilities(rho_in, r2)
    herald = float(np.sum(joint))
    if not herald > 0:
        raise ImpossibleHerald(m, det.label, herald)
    return joint / herald


def _resolving_unnormalized(branches: np.ndarray, weights: np.ndarray,
                            det: DetectorModel, m: int) -> Tuple[np.ndarray, float]:
    response = response_row(m, det, len(weights) - 1)
    herald = float(np.dot(response, weights))
    return np.einsum("k,kim->im", response, branches), herald


def impnrd_state(rho_in: DensityMatrix, r2: float, det: DetectorModel,
                 m: int = None) -> DensityMatrix:
    """Resolving detector with dark counts and inefficiency: mixture of k-photon states weighted by Q(k|m)"""
    m = det.m if m is None else m
    branches, weights = _branches(rho_in, r2)
    mixture, herald = _resolving_unnormalized(branches, weights, det, m)
    if not herald > 0:
        raise ImpossibleHerald(m, det.label, herald)
    return DensityMatrix(mixture / herald, rho_in.trace_deficit, rho_in.cutoff_ok)


def imnpnrd_state(rho_in: DensityMatrix, r2: float, det: DetectorModel,
                  m: int = None, weighting: str = DEFAULT_NPNRD_WEIGHTING) -> DensityMatrix:
    """
    On-off detector that accepts any click count >= m.

    With the click-probability weighting the mixture over click counts j >= m
    weighted by P(j) collapses to sum_k [sum_{j>=m} P(j|k)] M_k rho M_k^T,
    normalised. The subtraction-probability weighting mixes the resolving
    states for j >= m with weights S(j) instead.
    """
    m = det.m if m is None else m
    if weighting not in NPNRD_WEIGHTINGS:
        raise InvalidParameter("npnrd_weighting", weighting, " or ".join(NPNRD_WEIGHTINGS))
    branches, weights = _branches(rho_in, r2)
    kmax = rho_in.nmax

    if weighting == CLICK_PROBABILITY:
        accept = click_weights(det, kmax, m)
        mass = float(np.dot(accept, weights))
        if not mass > 0:
            raise ImpossibleHerald(m, det.label, mass)
        mixture = np.einsum("k,kim->im", accept, branches) / mass
        return DensityMatrix(mixture, rho_in.trace_deficit, rho_in.cutoff_ok)

    mixture = np.zeros_like(rho_in.elements)
    mass = 0.0
    for j in range(m, kmax + 1):
        if weights[j] <= 0:
            continue
        partial, herald = _resolving_unnormalized(branches, weights, det, j)
        if not herald > 0:
            continue
        mixture += weights[j] * partial / herald
        mass += weights[j]
    if not mass > 0:
        raise ImpossibleHerald(m, det.label, mass)
    return DensityMatrix(mixture / mass, rho_in.trace_deficit, rho_in.cutoff_ok)


def click_probability(rho_in: DensityMatrix, r2: float, det: DetectorModel,
                      m: int = None) -> float:
    """Probability that the on-off detector reports at least m clicks"""
    m = det.m if m is None else m
    return float(np.dot(click_weights(det, rho_in.nmax, m),
                        subtraction_probabilities(rho_in, r2)))


def herald_probability(rho_in: DensityMatrix, r2: float, det: DetectorModel) -> float:
    """P(m) for a resolving detector, the on-off acceptance mass otherwise"""
    if det.resolving:
        return float(np.dot(response_row(det.m, det, rho_in.nmax),
                            subtraction_probabilities(rho_in, r2)))
    return click_probability(rho_in, r2, det)


def conditional_state(rho_in: DensityMatrix, r2: float, det: DetectorModel,
                      weighting: str = DEFAULT_NPNRD_WEIGHTING) -> DensityMatrix:
    """Projected signal state for any of the four detector configurations"""
    if det.resolving:
        if det.ideal:
            return pnrd_state(rho_in, r2, det.m)
        return impnrd_state(rho_in, r2, det)
    return imnpnrd_state(rho_in, r2, det, weighting=weighting)


def mode_mix(rho_projected: DensityMatrix, rho_unprojected: DensityMatrix,
             s_prime: float) -> DensityMatrix:
    """Mix the projected state with the unprojected one according to mode purity"""
    if not 0.0 <= s_prime <= 1.0:
        raise InvalidParameter("mode_purity", s_prime, "value in [0, 1]")
    if rho_projected.dim != rho_unprojected.dim:
        raise InvalidParameter("dim", (rho_projected.dim, rho_unprojected.dim), "equal cutoffs")
    if s_prime == 1.0:
        return rho_projected
    if s_prime == 0.0:
        return rho_unprojected
    mixed = s_prime * rho_projected.elements + (1.0 - s_prime) * rho_unprojected.elements
    deficit = max(rho_projected.trace_deficit, rho_unprojected.trace_deficit)
    return DensityMatrix(mixed, deficit,
                         rho_projected.cutoff_ok and rho_unprojected.cutoff_ok)


def prepare_kitten_detailed(params: ExperimentParams, det: DetectorModel,
                            weighting: str = DEFAULT_NPNRD_WEIGHTING) -> KittenPreparation:
    """Run the full preparation chain and keep the intermediate input state and herald rate"""
    rho_in = impure_squeezed_vacuum(params.spec, params.r1)
    if not rho_in.cutoff_ok:
        raise InsufficientCutoff(params.spec.nmax, rho_in.trace_deficit, CUTOFF_TAIL_THRESHOLD)

    projected = conditional_state(rho_in, params.r2, det, weighting)
    # spurious heralds leave the input after an unconditioned pass through the tap
    unprojected = loss_channel(rho_in, params.t2)
    detected = mode_mix(projected, unprojected, params.mode_purity)
    final = loss_channel(detected, params.eta_hd)
    return KittenPreparation(final, rho_in, herald_probability(rho_in, params.r2, det))


def prepare_kitten(params: ExperimentParams, det: DetectorModel,
                   weighting: str = DEFAULT_NPNRD_WEIGHTING) -> DensityMatrix:
    return prepare_kitten_detailed(params, det, weighting).state
