'''
Non-Gaussian Witness
Classical and Gaussian boundaries in the (p0, p1) plane and the optimised
witness a*p0(s) + p1(s) - W_G(a) over the mixing weight a and the
anti-squeezing parameter s.
'''

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, List, NamedTuple, Sequence, Tuple

import numpy as np

from fock_core import ANTI_SQUEEZE, DensityMatrix, squeeze_conjugate
from kitten_errors import (
    BoundaryBracketError,
    InvalidParameter,
    TruncationOverflow,
    WitnessOverflow,
)

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2

DEFAULT_A_POINTS = 101
DEFAULT_S_POINTS = 61
DEFAULT_R_MAX = 3.0
DEFAULT_REFINE_TOL = 1e-6

BOUNDARY_TOL = 1e-10      # golden-section interval width for the inner r search
BOUNDARY_AGREEMENT = 1e-8  # allowed spread between multi-start boundary values
BOUNDARY_SCAN_POINTS = 61
BOUNDARY_TIE = 1e-12     # r = 0 wins when no candidate beats it by more than this


def golden_section_max(f: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-6) -> Tuple[float, float]:
    """
    Golden-section search for the maximum of a unimodal f on [lo, hi].

    Returns (x, f(x)) for the better end of the final bracket, whose width
    is at most `tol`. The endpoints themselves are candidates, so a maximum
    sitting on the boundary is found.
    """
    lo, hi = min(lo, hi), max(lo, hi)
    h = hi - lo
    if h <= tol:
        x = 0.5 * (lo + hi)
        return x, f(x)

    steps = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    c = lo + INV_PHI_SQUARE * h
    d = lo + INV_PHI * h
    yc = f(c)
    yd = f(d)
    for _ in range(steps - 1):
        if yc > yd:
            hi = d
            d = c
            yd = yc
            h = INV_PHI * h
            c = lo + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            lo = c
            c = d
            yc = yd
            h = INV_PHI * h
            d = lo + INV_PHI * h
            yd = f(d)

    candidates = [(c, yc), (d, yd), (lo, f(lo)), (hi, f(hi))]
    return max(candidates, key=lambda item: item[1])


def gaussian_p0p1(r: float) -> Tuple[float, float]:
    """Vacuum and single-photon probabilities of the extremal Gaussian family at squeezing r"""
    if not r >= 0:
        raise InvalidParameter("r", r, ">= 0")
    exponent = -math.exp(r) * math.sinh(r)
    cosh_r = math.cosh(r)
    p0 = math.exp(exponent) / cosh_r
    p1 = 0.25 * math.expm1(4.0 * r) * math.exp(exponent) / cosh_r ** 3
    return p0, p1


def _check_weight(a: float):
    if not 0.0 <= a <= 1.0:
        raise InvalidParameter("a", a, "mixing weight in [0, 1]")


def classical_boundary(a: float) -> float:
    """Largest a*p0 + p1 reachable by mixtures of coherent states: exp(a - 1)"""
    _check_weight(a)
    return math.exp(a - 1.0)


def _boundary_search(a: float, r_max: float) -> Tuple[float, float]:
    def objective(r):
        p0, p1 = gaussian_p0p1(r)
        return a * p0 + p1

    scan = np.linspace(0.0, r_max, BOUNDARY_SCAN_POINTS)
    values = [objective(r) for r in scan]
    best = int(np.argmax(values))
    left = scan[max(best - 1, 0)]
    right = scan[min(best + 1, len(scan) - 1)]

    seeds = [
        (left, right),
        (0.0, r_max),
        (0.5 * left, 0.5 * (right + r_max)),
    ]
    results = [golden_section_max(objective, lo, hi, BOUNDARY_TOL) for lo, hi in seeds]
    # r = 0 (vacuum) keeps W_G(a) >= a
    results.append((0.0, objective(0.0)))
    found = [value for _, value in results[:3]]
    if max(found) - min(found) > BOUNDARY_AGREEMENT:
        raise BoundaryBracketError(
            f"Gaussian boundary at a={a:.6g}: multi-start values disagree by "
            f"{max(found) - min(found):.3e}"
        )
    r_opt, value = max(results, key=lambda item: item[1])
    if results[-1][1] >= value - BOUNDARY_TIE:
        return results[-1]
    return r_opt, value


@lru_cache(maxsize=4096)
def gaussian_boundary_point(a: float, r_max: float = DEFAULT_R_MAX) -> Tuple[float, float]:
    """(W_G(a), r_opt) with the bracket widened once if the optimum sits on its edge"""
    _check_weight(a)
    if not r_max > 0:
        raise InvalidParameter("r_max", r_max, "> 0")
    bracket = float(r_max)
    for _ in range(2):
        r_opt, value = _boundary_search(float(a), bracket)
        if r_opt < bracket - 1e-6:
            return value, r_opt
        bracket *= 2.0
    raise BoundaryBracketError(
        f"Gaussian boundary at a={a:.6g}: maximiser still on the edge of [0, {bracket / 2:.3g}]"
    )


def gaussian_boundary(a: float, r_max: float = DEFAULT_R_MAX) -> float:
    """W_G(a): maximum of a*p0(r) + p1(r) over the Gaussian family"""
    return gaussian_boundary_point(float(a), float(r_max))[0]


def state_p0p1(rho: DensityMatrix, s: float) -> Tuple[float, float]:
    """Vacuum and single-photon probabilities after anti-squeezing by s"""
    conjugated = squeeze_conjugate(rho, s, ANTI_SQUEEZE)
    p0 = max(float(conjugated.elements[0, 0]), 0.0)
    p1 = max(float(conjugated.elements[1, 1]), 0.0) if conjugated.dim > 1 else 0.0
    return p0, p1


def _grid(values: Sequence[float], name: str, lo: float, hi: float) -> Tuple[float, ...]:
    grid = tuple(float(v) for v in values)
    if not grid:
        raise InvalidParameter(name, grid, "non-empty grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidParameter(name, grid, "strictly increasing grid")
    if grid[0] < lo or grid[-1] > hi:
        raise InvalidParameter(name, (grid[0], grid[-1]), f"values within [{lo}, {hi}]")
    return grid


@dataclass(frozen=True)
class WitnessConfig:
    a_grid: Tuple[float, ...] = field(
        default_factory=lambda: tuple(np.linspace(0.0, 1.0, DEFAULT_A_POINTS)))
    s_grid: Tuple[float, ...] = field(
        default_factory=lambda: tuple(np.linspace(0.0, 1.0, DEFAULT_S_POINTS)))
    r_max: float = DEFAULT_R_MAX
    refine_tol: float = DEFAULT_REFINE_TOL

    def __post_init__(self):
        object.__setattr__(self, "a_grid", _grid(self.a_grid, "a_grid", 0.0, 1.0))
        object.__setattr__(self, "s_grid", _grid(self.s_grid, "s_grid", 0.0, math.inf))
        if not self.r_max > 0:
            raise InvalidParameter("r_max", self.r_max, "> 0")
        if not self.refine_tol > 0:
            raise InvalidParameter("refine_tol", self.refine_tol, "> 0")

    @classmethod
    def from_points(cls, a_points: int = DEFAULT_A_POINTS, s_points: int = DEFAULT_S_POINTS,
                    s_min: float = 0.0, s_max: float = 1.0, r_max: float = DEFAULT_R_MAX,
                    refine_tol: float = DEFAULT_REFINE_TOL) -> "WitnessConfig":
        if a_points < 1 or s_points < 1:
            raise InvalidParameter("points", (a_points, s_points), "at least one grid point")
        if s_points > 1 and not s_max > s_min:
            raise InvalidParameter("s_max", s_max, f"> s_min ({s_min})")
        a_grid = np.linspace(0.0, 1.0, a_points) if a_points > 1 else [1.0]
        s_grid = np.linspace(s_min, s_max, s_points) if s_points > 1 else [s_min]
        return cls(tuple(a_grid), tuple(s_grid), r_max, refine_tol)

    def describe(self) -> Dict[str, Any]:
        return {
            "a_points": len(self.a_grid),
            "s_points": len(self.s_grid),
            "s_min": self.s_grid[0],
            "s_max": self.s_grid[-1],
            "r_max": self.r_max,
            "refine_tol": self.refine_tol,
        }


@dataclass(frozen=True)
class WitnessResult:
    witness_value: float
    a_opt: float
    s_opt: float
    p0: float
    p1: float
    classical_margin: float
    trajectory: List[Tuple[float, float, float]]
    overflowed_s: List[float] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        """True when the state is certified quantum non-Gaussian"""
        return self.witness_value > 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "witness_value": self.witness_value,
            "a_opt": self.a_opt,
            "s_opt": self.s_opt,
            "p0": self.p0,
            "p1": self.p1,
            "classical_margin": self.classical_margin,
            "trajectory": [list(point) for point in self.trajectory],
            "overflowed_s": list(self.overflowed_s),
        }


class WitnessCurvePoint(NamedTuple):
    s: float
    witness_value: float
    a_opt: float


class BoundaryCurves(NamedTuple):
    a: List[float]
    classical_p0: List[float]
    classical_p1: List[float]
    gaussian_p0: List[float]
    gaussian_p1: List[float]
    gaussian_r: List[float]


def _trajectory(rho: DensityMatrix, s_grid: Sequence[float]):
    points, failed = [], []
    for s in s_grid:
        try:
            p0, p1 = state_p0p1(rho, s)
        except TruncationOverflow:
            failed.append(s)
            continue
        points.append((s, p0, p1))
    if not points:
        raise WitnessOverflow(failed)
    return points, failed


def _best_weight(p0: float, p1: float, cfg: WitnessConfig,
                 boundary: np.ndarray) -> Tuple[float, float]:
    """max over a of a*p0 + p1 - W_G(a): grid scan, then golden refinement in a"""
    a_grid = cfg.a_grid
    margins = np.asarray(a_grid) * p0 + p1 - boundary
    i = int(np.argmax(margins))
    a_best, v_best = a_grid[i], float(margins[i])
    if len(a_grid) > 1:
        lo, hi = a_grid[max(i - 1, 0)], a_grid[min(i + 1, len(a_grid) - 1)]
        a_ref, v_ref = golden_section_max(
            lambda a: a * p0 + p1 - gaussian_boundary(a, cfg.r_max), lo, hi, cfg.refine_tol)
        if v_ref > v_best:
            a_best, v_best = a_ref, v_ref
    return a_best, v_best


def _boundary_on_grid(cfg: WitnessConfig) -> np.ndarray:
    return np.array([gaussian_boundary(a, cfg.r_max) for a in cfg.a_grid])


def evaluate_witness(rho: DensityMatrix, cfg: WitnessConfig = None) -> WitnessResult:
    """
    Maximise a*p0(s) + p1(s) - W_G(a) over the (a, s) grid, then refine s
    at the best a and a at the refined s by golden-section search.

    Grid ties resolve toward the smaller a, then the smaller s. Values of s
    whose conjugation overflows the cutoff are skipped and listed on the
    result; WitnessOverflow is raised only when every s overflows.
    """
    cfg = cfg or WitnessConfig()
    trajectory, failed = _trajectory(rho, cfg.s_grid)
    boundary = _boundary_on_grid(cfg)

    s_vals = np.array([s for s, _, _ in trajectory])
    p0s = np.array([p0 for _, p0, _ in trajectory])
    p1s = np.array([p1 for _, _, p1 in trajectory])
    a_vals = np.asarray(cfg.a_grid)
    # rows follow a, columns follow s; argmax returns the first maximum in that order
    table = a_vals[:, None] * p0s[None, :] + p1s[None, :] - boundary[:, None]
    ia, js = np.unravel_index(int(np.argmax(table)), table.shape)
    a_opt, s_opt = float(a_vals[ia]), float(s_vals[js])
    p0, p1 = float(p0s[js]), float(p1s[js])
    value = float(table[ia, js])

    if len(s_vals) > 1:
        lo, hi = s_vals[max(js - 1, 0)], s_vals[min(js + 1, len(s_vals) - 1)]

        def along_s(s):
            try:
                q0, q1 = state_p0p1(rho, s)
            except TruncationOverflow:
                return -math.inf
            return a_opt * q0 + q1

        s_ref, _ = golden_section_max(along_s, lo, hi, cfg.refine_tol)
        try:
            q0, q1 = state_p0p1(rho, s_ref)
        except TruncationOverflow:
            q0 = q1 = None
        if q0 is not None:
            a_ref, v_ref = _best_weight(q0, q1, cfg, boundary)
            if v_ref > value:
                a_opt, s_opt, p0, p1, value = a_ref, float(s_ref), q0, q1, v_ref

    a_check, v_check = _best_weight(p0, p1, cfg, boundary)
    if v_check > value:
        a_opt, value = a_check, v_check

    margin = a_opt * p0 + p1 - classical_boundary(a_opt)
    return WitnessResult(value, a_opt, s_opt, p0, p1, margin, trajectory, failed)


def witness_curve(rho: DensityMatrix, cfg: WitnessConfig = None) -> List[WitnessCurvePoint]:
    """Best witness value over a for every anti-squeezing value on the grid"""
    cfg = cfg or WitnessConfig()
    trajectory, _ = _trajectory(rho, cfg.s_grid)
    boundary = _boundary_on_grid(cfg)
    curve = []
    for s, p0, p1 in trajectory:
        a_opt, value = _best_weight(p0, p1, cfg, boundary)
        curve.append(WitnessCurvePoint(s, value, a_opt))
    return curve


def boundary_curves(a_grid: Sequence[float], r_max: float = DEFAULT_R_MAX) -> BoundaryCurves:
    """Points of the classical and Gaussian boundaries in the (p0, p1) plane"""
    curves = BoundaryCurves([], [], [], [], [], [])
    for a in a_grid:
        _check_weight(a)
        n_bar = 1.0 - a
        _, r_opt = gaussian_boundary_point(float(a), float(r_max))
        g0, g1 = gaussian_p0p1(r_opt)
        curves.a.append(float(a))
        curves.classical_p0.append(math.exp(-n_bar))
        curves.classical_p1.append(n_bar * math.exp(-n_bar))
        curves.gaussian_p0.append(g0)
        curves.gaussian_p1.append(g1)
        curves.gaussian_r.append(r_opt)
    return curves
