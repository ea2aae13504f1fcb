'''
Kitten Simulator Command Line Interface
Prepare heralded kitten states, evaluate the non-Gaussian witness, run
parameter sweeps, calibrate from measured variances and list detector presets
'''

import argparse
import json
import sys
from datetime import datetime, timezone
from typing import List, Optional

from calibration import CalibrationInput, calibrate
from detector_presets import (
    EXPERIMENT_DEFAULTS,
    PRESET_TABLE_VERSION,
    list_presets,
    presets_table,
)
from fock_core import (
    DensityMatrix,
    mean_photon_number,
    photon_distribution,
    purity,
    quadrature_variances,
    wigner_origin,
)
from kitten_config import KittenConfig, workers_from_env
from kitten_errors import NUMERICAL_ERRORS, ConfigError, KittenError
from subtraction import prepare_kitten_detailed
from sweep_runner import (
    SweepSpec,
    crossings,
    default_grid,
    detector_product,
    emit,
    make_grid,
    run_sweep,
    sweep_meta,
)
from witness import boundary_curves, evaluate_witness, witness_curve

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

SHOWN_LEVELS = 10

# flag dest -> (section, key)
OVERRIDES = {
    "v0_db": ("experiment", "v0_db"),
    "r1": ("experiment", "r1"),
    "r2": ("experiment", "r2"),
    "mode_purity": ("experiment", "mode_purity"),
    "eta_hd": ("experiment", "eta_hd"),
    "nmax": ("experiment", "nmax"),
    "preset": ("detector", "preset"),
    "model": ("detector", "model"),
    "pdc": ("detector", "pdc"),
    "eta": ("detector", "eta"),
    "m": ("detector", "m"),
    "npnrd_weighting": ("detector", "npnrd_weighting"),
    "a_points": ("witness", "a_points"),
    "s_points": ("witness", "s_points"),
    "s_max": ("witness", "s_max"),
    "var": ("sweep", "variable"),
    "start": ("sweep", "start"),
    "stop": ("sweep", "stop"),
    "points": ("sweep", "points"),
    "log": ("sweep", "log"),
    "format": ("output", "format"),
    "output": ("output", "destination"),
    "dump_rho": ("output", "dump_density_matrix"),
}


class KittenArgumentParser(argparse.ArgumentParser):
    """argparse parser that reports usage problems as ConfigError instead of exiting"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message, "usage")


def _name_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def add_state_arguments(parser):
    parser.add_argument('--config', type=str, help='JSON settings file')
    parser.add_argument('--v0-db', type=float, help='Pure squeezing level in dB')
    parser.add_argument('--r1', type=float, help='Squeezer impurity')
    parser.add_argument('--r2', type=float, help='Tap reflectivity')
    parser.add_argument('--mode-purity', type=float, help="Mode purity s'")
    parser.add_argument('--eta-hd', type=float, help='Homodyne efficiency')
    parser.add_argument('--nmax', type=int, help='Fock cutoff')
    parser.add_argument('--preset', type=str, help='Detector preset name')
    parser.add_argument('--model', type=str, help='pnrd, npnrd, impnrd or imnpnrd')
    parser.add_argument('--pdc', type=float, help='Dark-count probability')
    parser.add_argument('--eta', type=float, help='Detector efficiency')
    parser.add_argument('--m', type=int, help='Heralding click count')
    parser.add_argument('--npnrd-weighting', type=str,
                        help='click_probability or subtraction_probability')
    parser.add_argument('--a-points', type=int, help='Witness grid points in a')
    parser.add_argument('--s-points', type=int, help='Witness grid points in s')
    parser.add_argument('--s-max', type=float, help='Largest anti-squeezing value')
    parser.add_argument('--verbose', '-v', action='store_true', help='Print progress')


def build_parser() -> argparse.ArgumentParser:
    parser = KittenArgumentParser(
        prog='kitten', description='Schrodinger kitten state simulator')
    sub = parser.add_subparsers(dest='command', metavar='command')

    prepare = sub.add_parser('prepare', help='Prepare a kitten state and report W(0,0)')
    add_state_arguments(prepare)
    prepare.add_argument('--dump-rho', type=str, help='Write the density matrix as JSON')

    witness = sub.add_parser('witness', help='Evaluate the non-Gaussian witness')
    add_state_arguments(witness)
    witness.add_argument('--state', type=str, help='Density matrix JSON written by prepare')
    witness.add_argument('--json', action='store_true',
                         help='Print the result and boundary curves as JSON')
    witness.add_argument('--curve', action='store_true',
                         help='Also report the best witness value at every anti-squeezing value')

    sweep = sub.add_parser('sweep', help='Sweep one parameter across detector models')
    add_state_arguments(sweep)
    sweep.add_argument('--var', type=str, help='Swept variable')
    sweep.add_argument('--from', dest='start', type=float, help='First grid value')
    sweep.add_argument('--to', dest='stop', type=float, help='Last grid value')
    sweep.add_argument('--points', type=int, help='Number of grid points')
    sweep.add_argument('--log', dest='log', action='store_true', default=None,
                       help='Logarithmic grid')
    sweep.add_argument('--linear', dest='log', action='store_false', default=None,
                       help='Linear grid')
    sweep.add_argument('--presets', type=_name_list, help='Comma-separated presets')
    sweep.add_argument('--models', type=_name_list, help='Comma-separated models')
    sweep.add_argument('--workers', type=int, help='Worker threads (overrides KITTEN_WORKERS)')
    sweep.add_argument('--format', type=str, help='csv or json')
    sweep.add_argument('--output', '-o', type=str, help='Output path, - for stdout')
    sweep.add_argument('--stamp', action='store_true', help='Record the run time in JSON meta')

    calib = sub.add_parser('calibrate', help='Model parameters from measured variances')
    calib.add_argument('--vsqz', type=float, required=True, help='Measured squeezing variance')
    calib.add_argument('--vasqz', type=float, required=True,
                       help='Measured anti-squeezing variance')
    calib.add_argument('--eta-hd', type=float, help='Homodyne efficiency')
    calib.add_argument('--eta-qe', type=float, default=1.0, help='Photodiode quantum efficiency')
    calib.add_argument('--eta-t', type=float, default=1.0, help='Path transmission')
    calib.add_argument('--zeta', type=float, default=1.0, help='Fringe visibility')
    calib.add_argument('--r2', type=float, default=0.0, help='Tap reflectivity')
    calib.add_argument('--json', action='store_true', help='Print the estimates as JSON')

    presets = sub.add_parser('presets', help='List detector presets and experiment defaults')
    presets.add_argument('--json', action='store_true', help='Print the preset table as JSON')
    return parser


def load_settings(args) -> KittenConfig:
    """Defaults, then the config file, then command-line flags"""
    config = KittenConfig(getattr(args, 'config', None))
    for dest, (section, key) in OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            config.set(section, key, value)
    if getattr(args, 'presets', None) is not None:
        config.set('sweep', 'presets', args.presets)
    if getattr(args, 'models', None) is not None:
        config.set('sweep', 'models', [m.lower() for m in args.models])
    config.validate_config()
    return config


def run_prepare(args, out) -> int:
    config = load_settings(args)
    params = config.experiment_params()
    det = config.detector_model()
    prepared = prepare_kitten_detailed(params, det, config.get('detector', 'npnrd_weighting'))
    rho = prepared.state

    vx, vp = quadrature_variances(rho)
    print(f"✅ {det.label} ({det.name or 'custom'}) at V0={params.v0_db:.2f} dB, "
          f"r1={params.r1}, r2={params.r2}, s'={params.mode_purity}, eta_HD={params.eta_hd}",
          file=out)
    print(f"W(0,0) = {wigner_origin(rho):.6f}", file=out)
    print(f"Herald probability = {prepared.herald_probability:.6e}", file=out)
    print(f"Mean photon number = {mean_photon_number(rho):.6f}", file=out)
    print(f"Purity = {purity(rho):.6f}", file=out)
    print(f"Quadrature variances = ({vx:.6f}, {vp:.6f})", file=out)
    print("Photon distribution:", file=out)
    for n, p in enumerate(photon_distribution(rho)[:SHOWN_LEVELS]):
        print(f"  P({n}) = {p:.6f}", file=out)
    if not prepared.input_state.cutoff_ok:
        print(f"ℹ️  Input tail mass {prepared.input_state.trace_deficit:.2e} beyond nmax",
              file=out)

    dump = config.get('output', 'dump_density_matrix')
    if dump:
        write_json(dump, rho.to_dict())
        print(f"✅ Density matrix written to {dump}", file=out)
    return EXIT_OK


def write_json(path: str, data):
    try:
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f)
    except OSError as e:
        raise ConfigError(f"cannot write {path}: {e}", "output") from e


def read_state(path: str) -> DensityMatrix:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read state {path}: {e}", "state") from e
    return DensityMatrix.from_dict(data).normalized()


def run_witness(args, out) -> int:
    config = load_settings(args)
    if args.state:
        rho = read_state(args.state)
        source = args.state
    else:
        params = config.experiment_params()
        det = config.detector_model()
        rho = prepare_kitten_detailed(params, det,
                                      config.get('detector', 'npnrd_weighting')).state
        source = f"{det.label} ({det.name or 'custom'})"

    cfg = config.witness_config()
    result = evaluate_witness(rho, cfg)
    curve = witness_curve(rho, cfg) if args.curve else None
    if args.json:
        curves = boundary_curves(cfg.a_grid, cfg.r_max)
        payload = {"result": result.to_dict(), "boundaries": curves._asdict(),
                   "witness": cfg.describe()}
        if curve is not None:
            payload["curve"] = [point._asdict() for point in curve]
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")

    verdict = "quantum non-Gaussian" if result.certified else "not certified"
    print(f"✅ Witness for {source}: {result.witness_value:.6e} ({verdict})", file=out)
    print(f"a_opt = {result.a_opt:.6f}, s_opt = {result.s_opt:.6f}, "
          f"p0 = {result.p0:.6f}, p1 = {result.p1:.6f}", file=out)
    print(f"Classical margin = {result.classical_margin:.6e}", file=out)
    if result.overflowed_s:
        print(f"ℹ️  {len(result.overflowed_s)} anti-squeezing value(s) overflowed the cutoff",
              file=out)
    if curve is not None:
        print("Witness along s:", file=out)
        for point in curve:
            print(f"  s = {point.s:.4f}: {point.witness_value:.6e} (a = {point.a_opt:.4f})",
                  file=out)
    return EXIT_OK


def build_sweep_spec(config: KittenConfig) -> SweepSpec:
    sweep = config.as_dict()['sweep']
    variable = sweep['variable']
    if sweep['start'] is None:
        grid = default_grid(variable, sweep['points'])
    else:
        log = variable == 'pdc' if sweep['log'] is None else sweep['log']
        grid = make_grid(sweep['start'], sweep['stop'], sweep['points'], log)
    detectors = detector_product(sweep['presets'], sweep['models'], config.get('detector', 'm'))
    return SweepSpec(variable, grid, detectors, config.experiment_params(),
                     config.witness_config(), config.get('detector', 'npnrd_weighting'))


def run_sweep_command(args, out) -> int:
    config = load_settings(args)
    spec = build_sweep_spec(config)
    workers = args.workers if args.workers is not None else workers_from_env()
    if workers is not None and workers < 0:
        raise ConfigError("must be >= 0", "workers")

    progress = None
    if args.verbose:
        def progress(i, total, row):
            print(f"🔄 [{i}/{total}] {row.variable}={row.value:.6g} "
                  f"detector={row.detector}/{row.model}", file=out)

    print(f"🔄 Sweeping {spec.variable} over {len(spec.grid)} point(s) "
          f"for {len(spec.detectors)} detector(s)", file=out)
    rows = run_sweep(spec, workers or None, progress)

    created = datetime.now(timezone.utc).isoformat() if args.stamp else None
    emit(rows, config.get('output', 'format'), config.get('output', 'destination'),
         sweep_meta(spec, created))

    failed = sum(1 for row in rows if row.failed)
    if failed:
        print(f"ℹ️  {failed} row(s) failed numerically and were written with empty values",
              file=out)
    for column, name in (("w00", "W(0,0)=0"), ("witness", "witness=0")):
        for (detector, model), value in crossings(rows, column).items():
            where = "none" if value is None else f"{value:.6g}"
            print(f"{detector}/{model}: {name} at {spec.variable}={where}", file=out)
    print(f"✅ {len(rows)} row(s) written to {config.get('output', 'destination')}", file=out)
    return EXIT_OK


def run_calibrate(args, out) -> int:
    measurement = CalibrationInput(args.vsqz, args.vasqz, args.eta_qe, args.eta_t,
                                   args.zeta, args.r2)
    result = calibrate(measurement, args.eta_hd)
    if args.json:
        sys.stdout.write(json.dumps(result.to_dict(), indent=2) + "\n")
    print("=== Calibration ===", file=out)
    print(f"V0 = {result.v0:.4f} ({result.v0_db:.2f} dB)", file=out)
    print(f"eta_HD = {result.eta_hd:.4f}", file=out)
    print(f"r_total = {result.r_total:.4f}", file=out)
    print(f"r1 = {result.r1:.4f}", file=out)
    return EXIT_OK


def run_presets(args, out) -> int:
    if args.json:
        payload = {"version": PRESET_TABLE_VERSION, "presets": presets_table(),
                   "experiment": EXPERIMENT_DEFAULTS}
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
        return EXIT_OK
    print("=== Detector presets ===", file=out)
    for preset in list_presets():
        print(f"{preset.name:10s} | {preset.family:10s} | pdc={preset.pdc:.2e} | "
              f"eta={preset.eta:.0%} | {preset.note}", file=out)
    print("\n=== Experiment defaults ===", file=out)
    for key, value in EXPERIMENT_DEFAULTS.items():
        print(f"{key}: {value}", file=out)
    return EXIT_OK


COMMANDS = {
    'prepare': run_prepare,
    'witness': run_witness,
    'sweep': run_sweep_command,
    'calibrate': run_calibrate,
    'presets': run_presets,
}


def _status_stream(args):
    """stderr when stdout carries machine-readable data"""
    if getattr(args, 'json', False):
        return sys.stderr
    if args.command == 'sweep':
        destination = getattr(args, 'output', None)
        if destination is None:
            try:
                destination = KittenConfig(args.config).get('output', 'destination')
            except KittenError:
                destination = '-'
        if destination == '-':
            return sys.stderr
    return sys.stdout


def cli_main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand and return the process exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as e:
        # --help
        return EXIT_OK if not e.code else EXIT_CONFIG

    if not args.command:
        parser.print_help()
        return EXIT_CONFIG

    out = _status_stream(args)
    try:
        return COMMANDS[args.command](args, out)
    except NUMERICAL_ERRORS as e:
        print(f"❌ Numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except KittenError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print("\nExiting...", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
