import copy
import json
import os
from typing import Any, Dict, Optional

from detector_presets import DEFAULT_SWEEP_PRESETS, EXPERIMENT_DEFAULTS, get_preset
from fock_core import DEFAULT_NMAX
from kitten_errors import ConfigError, KittenError
from subtraction import (
    DEFAULT_NPNRD_WEIGHTING,
    MODEL_NAMES,
    NPNRD_WEIGHTINGS,
    DetectorModel,
    ExperimentParams,
)
from witness import (
    DEFAULT_A_POINTS,
    DEFAULT_R_MAX,
    DEFAULT_REFINE_TOL,
    DEFAULT_S_POINTS,
    WitnessConfig,
)

WORKERS_ENV = "KITTEN_WORKERS"

SWEEP_VARIABLES = ("v0_db", "r1", "r2", "eta_apd", "eta_hd", "pdc", "mode_purity")
OUTPUT_FORMATS = ("csv", "json")


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _optional(check):
    return lambda x: x is None or check(x)


def _name_list(allowed):
    return lambda x: isinstance(x, list) and all(isinstance(v, str) and v.lower() in allowed
                                                 for v in x)


class KittenConfig:
    """Manages simulation settings: experiment, detector, witness, sweep and output"""

    def __init__(self, config_file: Optional[str] = None):
        self.config_file = config_file
        self.config = self.load_default_config()
        if config_file:
            self.load_config(config_file)

    def load_default_config(self) -> Dict[str, Dict[str, Any]]:
        """Load default configuration values"""
        return {
            "experiment": {
                **EXPERIMENT_DEFAULTS,
                "nmax": DEFAULT_NMAX,
            },
            "detector": {
                "preset": "si-aqr-12",
                "model": "imnpnrd",
                "pdc": None,   # overrides the preset when set
                "eta": None,
                "m": 1,
                "npnrd_weighting": DEFAULT_NPNRD_WEIGHTING,
            },
            "witness": {
                "a_points": DEFAULT_A_POINTS,
                "s_points": DEFAULT_S_POINTS,
                "s_min": 0.0,
                "s_max": 1.0,
                "r_max": DEFAULT_R_MAX,
                "refine_tol": DEFAULT_REFINE_TOL,
            },
            "sweep": {
                "variable": "pdc",
                "start": None,   # None selects the variable's default grid
                "stop": None,
                "points": 41,
                "log": None,
                "presets": list(DEFAULT_SWEEP_PRESETS),
                "models": list(MODEL_NAMES),
            },
            "output": {
                "format": "csv",
                "destination": "-",
                "dump_density_matrix": None,
            },
        }

    def load_config(self, path: str):
        """Merge a JSON settings file over the current values"""
        if not os.path.exists(path):
            raise ConfigError(f"configuration file not found: {path}")
        try:
            with open(path, "r") as f:
                saved_config = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read configuration {path}: {e}") from e
        if not isinstance(saved_config, dict):
            raise ConfigError(f"configuration {path} must hold a JSON object")
        self.update_config(saved_config)
        self.config_file = path

    def save_config(self, path: Optional[str] = None):
        """Save configuration to file"""
        target = path or self.config_file
        if not target:
            raise ConfigError("no configuration file to save to")
        os.makedirs(os.path.dirname(target) or ".", exist_ok=True)
        try:
            with open(target, "w") as f:
                json.dump(self.config, f, indent=4)
        except OSError as e:
            raise ConfigError(f"cannot write configuration {target}: {e}") from e

    def get(self, section: str, key: str) -> Any:
        self._check_key(section, key)
        return self.config[section][key]

    def set(self, section: str, key: str, value: Any):
        self._check_key(section, key)
        self.config[section][key] = value

    def update_config(self, new_config: Dict[str, Any]):
        """Update several sections at once; unknown sections or keys are rejected"""
        for section, values in new_config.items():
            if section not in self.config:
                raise ConfigError(f"unknown section (known: {', '.join(self.config)})", section)
            if not isinstance(values, dict):
                raise ConfigError("section must be a JSON object", section)
            for key, value in values.items():
                self.set(section, key, value)

    def reset_to_defaults(self):
        self.config = self.load_default_config()

    def as_dict(self) -> Dict[str, Dict[str, Any]]:
        return copy.deepcopy(self.config)

    def _check_key(self, section: str, key: str):
        if section not in self.config:
            raise ConfigError(f"unknown section (known: {', '.join(self.config)})", section)
        if key not in self.config[section]:
            raise ConfigError(
                f"unknown key (known: {', '.join(self.config[section])})", f"{section}.{key}")

    def validate_config(self):
        """Check every value against its allowed range; raises ConfigError on the first failure"""
        validators = {
            "experiment": {
                "v0_db": lambda x: _is_number(x) and -20.0 <= x <= 0.0,
                "r1": lambda x: _is_number(x) and 0.0 <= x < 1.0,
                "r2": lambda x: _is_number(x) and 0.0 < x < 1.0,
                "mode_purity": lambda x: _is_number(x) and 0.0 <= x <= 1.0,
                "eta_hd": lambda x: _is_number(x) and 0.0 < x <= 1.0,
                "nmax": lambda x: _is_int(x) and 2 <= x <= 200,
            },
            "detector": {
                "preset": _optional(lambda x: isinstance(x, str)),
                "model": lambda x: isinstance(x, str) and x.lower() in MODEL_NAMES,
                "pdc": _optional(lambda x: _is_number(x) and 0.0 <= x < 1.0),
                "eta": _optional(lambda x: _is_number(x) and 0.0 <= x <= 1.0),
                "m": lambda x: _is_int(x) and x >= 1,
                "npnrd_weighting": lambda x: x in NPNRD_WEIGHTINGS,
            },
            "witness": {
                "a_points": lambda x: _is_int(x) and x >= 1,
                "s_points": lambda x: _is_int(x) and x >= 1,
                "s_min": lambda x: _is_number(x) and x >= 0.0,
                "s_max": lambda x: _is_number(x) and x >= 0.0,
                "r_max": lambda x: _is_number(x) and x > 0.0,
                "refine_tol": lambda x: _is_number(x) and x > 0.0,
            },
            "sweep": {
                "variable": lambda x: x in SWEEP_VARIABLES,
                "start": _optional(_is_number),
                "stop": _optional(_is_number),
                "points": lambda x: _is_int(x) and x >= 1,
                "log": _optional(lambda x: isinstance(x, bool)),
                "presets": lambda x: isinstance(x, list) and all(isinstance(v, str) for v in x),
                "models": _name_list(MODEL_NAMES),
            },
            "output": {
                "format": lambda x: x in OUTPUT_FORMATS,
                "destination": lambda x: isinstance(x, str) and x != "",
                "dump_density_matrix": _optional(lambda x: isinstance(x, str)),
            },
        }

        for section, checks in validators.items():
            for key, validator in checks.items():
                value = self.config[section][key]
                if not validator(value):
                    raise ConfigError(
                        f"invalid value {value!r} ({self.get_config_description(section, key)})",
                        f"{section}.{key}",
                    )

        witness = self.config["witness"]
        if witness["s_points"] > 1 and witness["s_max"] <= witness["s_min"]:
            raise ConfigError("must exceed witness.s_min", "witness.s_max")
        sweep = self.config["sweep"]
        if sweep["log"] and any(v is not None and v <= 0 for v in (sweep["start"], sweep["stop"])):
            raise ConfigError("log grids need positive bounds", "sweep.log")
        if (sweep["start"] is None) != (sweep["stop"] is None):
            raise ConfigError("set both sweep.start and sweep.stop or neither", "sweep.start")
        for name in sweep["presets"]:
            get_preset(name)
        preset = self.config["detector"]["preset"]
        if preset is not None:
            get_preset(preset)

    def get_config_description(self, section: str, key: str) -> str:
        """Get human-readable description for configuration keys"""
        descriptions = {
            "experiment": {
                "v0_db": "Pure squeezing level in dB (-20 to 0)",
                "r1": "Squeezer impurity reflectivity (0-1)",
                "r2": "Tap beam splitter reflectivity (0-1, exclusive)",
                "mode_purity": "Mode purity s' of the heralded mode (0-1)",
                "eta_hd": "Homodyne detection efficiency (0-1]",
                "nmax": "Fock cutoff (2-200)",
            },
            "detector": {
                "preset": "Detector preset name, or null for explicit pdc/eta",
                "model": "Detector model (pnrd, npnrd, impnrd, imnpnrd)",
                "pdc": "Dark-count probability per gate, overrides the preset",
                "eta": "Detector efficiency, overrides the preset",
                "m": "Heralding click count (>= 1)",
                "npnrd_weighting": "On-off mixture weights (click_probability, subtraction_probability)",
            },
            "witness": {
                "a_points": "Grid points for the weight a over [0, 1]",
                "s_points": "Grid points for the anti-squeezing s",
                "s_min": "Smallest anti-squeezing value",
                "s_max": "Largest anti-squeezing value",
                "r_max": "Upper end of the Gaussian boundary search in r",
                "refine_tol": "Golden-section refinement tolerance",
            },
            "sweep": {
                "variable": "Swept parameter (" + ", ".join(SWEEP_VARIABLES) + ")",
                "start": "First grid value, or null for the default grid",
                "stop": "Last grid value, or null for the default grid",
                "points": "Number of grid points",
                "log": "Logarithmic spacing (null picks the default for the variable)",
                "presets": "Detector presets to include",
                "models": "Detector models to include",
            },
            "output": {
                "format": "Output format (csv, json)",
                "destination": "Output file path, or - for stdout",
                "dump_density_matrix": "Path to write the prepared density matrix as JSON",
            },
        }
        return descriptions.get(section, {}).get(key, "Configuration parameter")

    def experiment_params(self) -> ExperimentParams:
        exp = self.config["experiment"]
        try:
            return ExperimentParams.typical(exp["nmax"]).replace(
                v0_db=exp["v0_db"], r1=exp["r1"], r2=exp["r2"],
                mode_purity=exp["mode_purity"], eta_hd=exp["eta_hd"])
        except KittenError as e:
            raise ConfigError(str(e), "experiment") from e

    def detector_model(self) -> DetectorModel:
        det = self.config["detector"]
        pdc, eta, name = 0.0, 1.0, ""
        if det["preset"] is not None:
            preset = get_preset(det["preset"])
            pdc, eta, name = preset.pdc, preset.eta, preset.name
        if det["pdc"] is not None:
            pdc = det["pdc"]
        if det["eta"] is not None:
            eta = det["eta"]
        try:
            return DetectorModel.for_model(det["model"], pdc, eta, det["m"], name)
        except KittenError as e:
            raise ConfigError(str(e), "detector") from e

    def witness_config(self) -> WitnessConfig:
        w = self.config["witness"]
        try:
            return WitnessConfig.from_points(w["a_points"], w["s_points"], w["s_min"],
                                             w["s_max"], w["r_max"], w["refine_tol"])
        except KittenError as e:
            raise ConfigError(str(e), "witness") from e


def workers_from_env(environ=None) -> Optional[int]:
    """Worker count from KITTEN_WORKERS; None means one per CPU"""
    environ = os.environ if environ is None else environ
    raw = environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return None
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(f"must be an integer, got {raw!r}", WORKERS_ENV) from None
    if count < 0:
        raise ConfigError(f"must be >= 0, got {count}", WORKERS_ENV)
    return count or None
