'''
Parameter Sweeps
Runs the kitten preparation and witness evaluation over a grid of one
experiment or detector parameter for several detector configurations, and
writes the results as CSV or JSON.
'''

import csv
import dataclasses
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
try:
    import pandas as pd
except ImportError:
    # rows_to_frame is unavailable without pandas
    pd = None

from detector_presets import PRESET_TABLE_VERSION, get_preset
from fock_core import wigner_origin
from kitten_errors import NUMERICAL_ERRORS, ConfigError, KittenError
from subtraction import (
    DEFAULT_NPNRD_WEIGHTING,
    MODEL_NAMES,
    DetectorModel,
    ExperimentParams,
    prepare_kitten_detailed,
)
from witness import WitnessConfig, evaluate_witness

CSV_COLUMNS = ["variable", "value", "detector", "model", "w00", "witness",
               "a_opt", "s_opt", "p0", "p1", "herald_prob"]
NUMERIC_COLUMNS = CSV_COLUMNS[4:]

DEFAULT_GRID_POINTS = 41

# (start, stop, log spacing) for each sweepable variable
DEFAULT_RANGES = {
    "v0_db": (-8.0, -0.1, False),
    "r1": (0.0, 0.6, False),
    "r2": (0.01, 0.3, False),
    "eta_apd": (0.01, 1.0, False),
    "eta_hd": (0.5, 1.0, False),
    "pdc": (1e-6, 1e-2, True),
    "mode_purity": (0.5, 1.0, False),
}
DETECTOR_VARIABLES = ("pdc", "eta_apd")


def _format(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.9g}"


def _round(value: Optional[float]) -> Optional[float]:
    return None if value is None else float(f"{value:.9g}")


@dataclass(frozen=True)
class SweepRow:
    variable: str
    value: float
    detector: str
    model: str
    w00: Optional[float] = None
    witness: Optional[float] = None
    a_opt: Optional[float] = None
    s_opt: Optional[float] = None
    p0: Optional[float] = None
    p1: Optional[float] = None
    herald_prob: Optional[float] = None
    reason: str = ""

    @property
    def failed(self) -> bool:
        return self.w00 is None

    def csv_fields(self) -> Dict[str, str]:
        out = {"variable": self.variable, "value": _format(self.value),
               "detector": self.detector, "model": self.model}
        for name in NUMERIC_COLUMNS:
            out[name] = _format(getattr(self, name))
        return out

    def to_dict(self) -> Dict[str, Any]:
        out = {"variable": self.variable, "value": _round(self.value),
               "detector": self.detector, "model": self.model}
        for name in NUMERIC_COLUMNS:
            out[name] = _round(getattr(self, name))
        out["reason"] = self.reason
        return out


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    grid: Tuple[float, ...]
    detectors: Tuple[DetectorModel, ...]
    base: ExperimentParams = field(default_factory=ExperimentParams.typical)
    witness_cfg: WitnessConfig = field(default_factory=WitnessConfig)
    npnrd_weighting: str = DEFAULT_NPNRD_WEIGHTING

    def __post_init__(self):
        if self.variable not in DEFAULT_RANGES:
            raise ConfigError(
                f"unknown variable {self.variable!r} (known: {', '.join(DEFAULT_RANGES)})",
                "sweep.variable")
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        object.__setattr__(self, "detectors", tuple(self.detectors))
        if not self.grid:
            raise ConfigError("grid is empty", "sweep.points")
        if not self.detectors:
            raise ConfigError("no detectors selected", "sweep.models")
        # every grid value must produce valid parameters before anything runs
        for value in self.grid:
            for det in self.detectors:
                try:
                    self.point(value, det)
                except KittenError as e:
                    raise ConfigError(f"grid value {value!r} is invalid: {e}",
                                      f"sweep.{self.variable}") from e

    @property
    def nmax(self) -> int:
        return self.base.spec.nmax

    def point(self, value: float, det: DetectorModel) -> Tuple[ExperimentParams, DetectorModel]:
        """Experiment parameters and detector with the swept variable substituted"""
        if self.variable == "pdc":
            return self.base, dataclasses.replace(det, pdc=value)
        if self.variable == "eta_apd":
            return self.base, dataclasses.replace(det, eta=value)
        return self.base.replace(**{self.variable: value}), det


def default_grid(variable: str, points: int = DEFAULT_GRID_POINTS) -> List[float]:
    """Log-spaced grid for dark counts, linear for everything else"""
    if variable not in DEFAULT_RANGES:
        raise ConfigError(f"unknown variable {variable!r}", "sweep.variable")
    start, stop, log = DEFAULT_RANGES[variable]
    return make_grid(start, stop, points, log)


def make_grid(start: float, stop: float, points: int, log: bool = False) -> List[float]:
    if points < 1:
        raise ConfigError("need at least one point", "sweep.points")
    if points == 1:
        return [float(start)]
    if log:
        if start <= 0 or stop <= 0:
            raise ConfigError("log grids need positive bounds", "sweep.log")
        return [float(v) for v in np.logspace(math.log10(start), math.log10(stop), points)]
    return [float(v) for v in np.linspace(start, stop, points)]


def detector_product(presets: Sequence[str], models: Sequence[str],
                     m: int = 1) -> List[DetectorModel]:
    """Every preset combined with every detector model, preset-major"""
    detectors = []
    for name in presets:
        preset = get_preset(name)
        for model in models:
            if model.lower() not in MODEL_NAMES:
                raise ConfigError(f"unknown model {model!r}", "sweep.models")
            detectors.append(preset.detector(model, m))
    return detectors


def evaluate_point(spec: SweepSpec, value: float, det: DetectorModel) -> SweepRow:
    """One grid point for one detector; numerical failures become a null row with the reason"""
    params, detector = spec.point(value, det)
    label = detector.name or "custom"
    try:
        prepared = prepare_kitten_detailed(params, detector, spec.npnrd_weighting)
        w00 = wigner_origin(prepared.state)
        result = evaluate_witness(prepared.state, spec.witness_cfg)
    except NUMERICAL_ERRORS as e:
        return SweepRow(spec.variable, value, label, detector.label,
                        reason=f"{type(e).__name__}: {e}")
    return SweepRow(spec.variable, value, label, detector.label, w00,
                    result.witness_value, result.a_opt, result.s_opt,
                    result.p0, result.p1, prepared.herald_probability)


def run_sweep(spec: SweepSpec, workers: Optional[int] = None,
              progress: Optional[Callable[[int, int, SweepRow], None]] = None) -> List[SweepRow]:
    """
    Evaluate every (grid value, detector) pair.

    Rows come back grid-major in grid order, detectors in the order given,
    whatever the number of workers. `workers=1` runs serially.
    """
    items = [(value, det) for value in spec.grid for det in spec.detectors]
    total = len(items)
    rows: List[Optional[SweepRow]] = [None] * total

    def run(index: int) -> None:
        value, det = items[index]
        rows[index] = evaluate_point(spec, value, det)
        if progress:
            progress(index + 1, total, rows[index])

    if workers == 1 or total == 1:
        for i in range(total):
            run(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # list() re-raises the first unexpected exception
            list(pool.map(run, range(total)))
    return rows


def find_crossing(rows: Sequence[SweepRow], column: str, threshold: float = 0.0,
                  detector: Optional[str] = None, model: Optional[str] = None) -> Optional[float]:
    """
    First grid position where `column` crosses `threshold`, by linear
    interpolation between neighbouring rows. Rows are taken in their given
    order; failed rows are skipped. Returns None when nothing brackets it.
    """
    if column not in NUMERIC_COLUMNS:
        raise ConfigError(f"unknown column {column!r}", "column")
    points = [(row.value, getattr(row, column)) for row in rows
              if (detector is None or row.detector == detector)
              and (model is None or row.model == model)
              and getattr(row, column) is not None]
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        d0, d1 = y0 - threshold, y1 - threshold
        if d0 == 0.0:
            return x0
        if d0 * d1 < 0.0:
            return x0 + (x1 - x0) * d0 / (d0 - d1)
    if points and points[-1][1] == threshold:
        return points[-1][0]
    return None


def crossings(rows: Sequence[SweepRow], column: str,
              threshold: float = 0.0) -> Dict[Tuple[str, str], Optional[float]]:
    """find_crossing for every (detector, model) pair, in first-seen order"""
    keys = list(dict.fromkeys((row.detector, row.model) for row in rows))
    return {key: find_crossing(rows, column, threshold, *key) for key in keys}


def sweep_meta(spec: SweepSpec, created: Optional[str] = None) -> Dict[str, Any]:
    meta = {
        "variable": spec.variable,
        "nmax": spec.nmax,
        "points": len(spec.grid),
        "base": {
            "v0_db": _round(spec.base.v0_db),
            "r1": spec.base.r1,
            "r2": spec.base.r2,
            "mode_purity": spec.base.mode_purity,
            "eta_hd": spec.base.eta_hd,
        },
        "detectors": [{"name": d.name, "model": d.label, "pdc": d.pdc, "eta": d.eta, "m": d.m}
                      for d in spec.detectors],
        "witness": spec.witness_cfg.describe(),
        "npnrd_weighting": spec.npnrd_weighting,
        "preset_table_version": PRESET_TABLE_VERSION,
    }
    if created:
        meta["created"] = created
    return meta


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.csv_fields())
    return buffer.getvalue()


def rows_to_json(rows: Sequence[SweepRow], meta: Optional[Dict[str, Any]] = None) -> str:
    return json.dumps({"meta": meta or {}, "rows": [row.to_dict() for row in rows]},
                      indent=2) + "\n"


def emit(rows: Sequence[SweepRow], fmt: str = "csv", destination: str = "-",
         meta: Optional[Dict[str, Any]] = None):
    """Write rows as CSV or JSON to a file path, or to stdout for '-'"""
    if not rows:
        raise ConfigError("nothing to write", "output")
    if fmt == "csv":
        text = rows_to_csv(rows)
    elif fmt == "json":
        text = rows_to_json(rows, meta)
    else:
        raise ConfigError(f"unknown format {fmt!r}", "output.format")

    if destination == "-":
        sys.stdout.write(text)
        return
    try:
        with open(destination, "w", newline="", encoding="utf-8") as f:
            f.write(text)
    except OSError as e:
        raise ConfigError(f"cannot write {destination}: {e}", "output.destination") from e


def load_rows_csv(path: str) -> List[SweepRow]:
    """Read rows back from a CSV written by emit"""
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        rows = []
        for record in reader:
            numbers = {name: float(record[name]) if record[name] != "" else None
                       for name in NUMERIC_COLUMNS}
            rows.append(SweepRow(record["variable"], float(record["value"]),
                                 record["detector"], record["model"], **numbers))
    return rows


def rows_to_frame(rows: Sequence[SweepRow]):
    """pandas DataFrame view of the rows"""
    if pd is None:
        raise ImportError("pandas is required for rows_to_frame")
    return pd.DataFrame([row.to_dict() for row in rows])
