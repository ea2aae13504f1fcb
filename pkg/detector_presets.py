'''
Detector Presets
Avalanche photodiode settings used for the tap detector, plus the typical
experiment parameters that sweeps and the CLI start from.
'''

from dataclasses import dataclass
from typing import Dict, List

from subtraction import (
    DEFAULT_ETA_HD,
    DEFAULT_MODE_PURITY,
    DEFAULT_R1,
    DEFAULT_R2,
    DEFAULT_V0_DB,
    DetectorModel,
)
from kitten_errors import ConfigError

PRESET_TABLE_VERSION = "1"

SI_APD = "Si-APD"
INGAAS_APD = "InGaAs-APD"


@dataclass(frozen=True)
class DetectorPreset:
    name: str
    family: str
    pdc: float
    eta: float
    note: str = ""

    def detector(self, model: str, m: int = 1) -> DetectorModel:
        """Any of the four detector configurations built on this preset's dark counts and efficiency"""
        return DetectorModel.for_model(model, self.pdc, self.eta, m, self.name)


PRESETS: Dict[str, DetectorPreset] = {
    p.name: p for p in [
        DetectorPreset("si-aqr-12", SI_APD, 5e-6, 0.45, "SPCM-AQR-12"),
        DetectorPreset("si-aqr-13", SI_APD, 2.5e-6, 0.45, "SPCM-AQR-13"),
        DetectorPreset("si-aqr-14", SI_APD, 1e-6, 0.45, "SPCM-AQR-14"),
        DetectorPreset("si-aqr-15", SI_APD, 5e-7, 0.45, "SPCM-AQR-15"),
        DetectorPreset("si-aqr-16", SI_APD, 2.5e-7, 0.45, "SPCM-AQR-16"),
        DetectorPreset("id200", INGAAS_APD, 1e-4, 0.10, "id200"),
        DetectorPreset("id220-10", INGAAS_APD, 1e-5, 0.10, "id220 at 10% efficiency"),
        DetectorPreset("id220-15", INGAAS_APD, 2.5e-5, 0.15, "id220 at 15% efficiency"),
        DetectorPreset("id220-20", INGAAS_APD, 5e-5, 0.20, "id220 at 20% efficiency"),
    ]
}

# Representative detectors for each family in sweeps
DEFAULT_SWEEP_PRESETS = ("si-aqr-12", "id200")

EXPERIMENT_DEFAULTS = {
    "v0_db": DEFAULT_V0_DB,
    "r1": DEFAULT_R1,
    "r2": DEFAULT_R2,
    "mode_purity": DEFAULT_MODE_PURITY,
    "eta_hd": DEFAULT_ETA_HD,
}


def get_preset(name: str) -> DetectorPreset:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise ConfigError(
            f"unknown detector preset {name!r} (known: {', '.join(PRESETS)})",
            "detector.preset",
        ) from None


def list_presets() -> List[DetectorPreset]:
    return list(PRESETS.values())


def presets_table() -> List[Dict[str, object]]:
    return [
        {"name": p.name, "family": p.family, "pdc": p.pdc, "eta": p.eta, "note": p.note}
        for p in PRESETS.values()
    ]
