import argparse
import logging
import os
import sys
from datetime import datetime
from typing import Dict, List, Optional

import numpy as np

from setup_env import configure_logging, setup_env
from tools.cli_io.config import SimConfig, config_hash, describe, load_config
from tools.cli_io.presets import PRESETS, RunOptions, list_presets, output_root, run_config, run_preset
from tools.cli_io.writer import write_manifest
from tools.errors import ConfigError, NumericalError, SimulatorError, ValidityBoundError
from tools.phonon_bath.phonon_bath import PhononBath, polaron_validity_report
from tools.polaron_rates.rate_table import save_rate_table
from tools.propagation.propagation import (
    MediumParams,
    ensemble_from_config,
    rate_table_for,
    sech_envelope,
    slice_count,
    time_axis,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VALIDITY = 4


def _peak_field(config: SimConfig) -> float:
    d_tau = config.pulse.tau0 / config.grids.steps_per_tau0
    row = sech_envelope(config.pulse.theta0, config.pulse.tau0, config.pulse.tau_c,
                        time_axis(config.grids.window, d_tau))
    return float(np.max(np.abs(row)))


def run_validate(config: SimConfig) -> Dict[str, object]:
    """
    Print the resolved config and the derived medium and grid quantities
    """
    medium = MediumParams.from_config(config)
    ensemble = ensemble_from_config(config)
    peak = _peak_field(config)
    summary: Dict[str, object] = {
        "config_hash": config_hash(config),
        "eta": medium.eta,
        "alpha": medium.alpha,
        "ensemble_nodes": ensemble.size,
        "slices": slice_count(medium, config.grids.alpha_dz, config.grids.d_zeta),
        "peak_field": peak,
    }
    if config.toggles.phonons:
        bath = PhononBath(config.bath)
        summary["mean_B"] = bath.mean_B
        summary["validity"] = polaron_validity_report(peak, config.bath, bath.mean_B)

    print("Configuration:")
    for key, (value, unit) in describe(config).items():
        print(f"  {key} = {value} {unit}".rstrip())
    print("Derived:")
    for key, value in summary.items():
        print(f"  {key}: {value}")
    return summary


def run_rates_table(config: SimConfig, options: RunOptions) -> str:
    """
    Build the rate table a run of this config would use and write it to the output directory
    """
    if not config.toggles.phonons:
        raise ConfigError("rate tables need phonons enabled", key="toggles.phonons")
    bath = PhononBath(config.bath)
    ensemble = ensemble_from_config(config)
    table = rate_table_for(config, ensemble, bath, _peak_field(config), threads=options.threads,
                           progress=options.progress, cache_dir=options.cache_dir)
    out_dir = os.path.join(output_root(config, options), "rates_table")
    path = os.path.join(out_dir, "rates_table.bin")
    save_rate_table(table, path)
    write_manifest(os.path.join(out_dir, "manifest.json"), {
        "name": "rates_table",
        "config_hash": config_hash(config),
        "table_key": table.key,
        "mean_B": table.mean_B,
        "shape": list(table.shape),
        "omega_range": [float(table.omega_axis[0]), float(table.omega_axis[-1])],
        "delta_range": [float(table.delta_axis[0]), float(table.delta_axis[-1])],
        "files": [os.path.basename(path)],
    })
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="main.py",
        description="Self-induced transparency of an optical pulse in a quantum dot ensemble with phonons",
    )
    parser.add_argument("--out", default=None, help="Output directory (default: SIT_OUTPUT_DIR, else output.directory of the config)")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads")
    parser.add_argument("--seedless", action="store_true", help="Accepted for compatibility; there is no RNG")
    parser.add_argument("--phonons", choices=("on", "off"), default=None, help="Override toggles.phonons")
    parser.add_argument("--cache", default=None, help="Rate table cache directory")
    parser.add_argument("--no-progress", action="store_true", help="Hide progress bars")

    commands = parser.add_subparsers(dest="command", required=True)
    run = commands.add_parser("run", help="Propagate the pulse described by a config file")
    run.add_argument("config", help="Config file")
    preset = commands.add_parser("preset", help="Run a named scenario")
    preset.add_argument("name", help=f"One of: {', '.join(PRESETS)}")
    preset.add_argument("--config", default=None, help="Base config file (defaults otherwise)")
    rates = commands.add_parser("rates-table", help="Build and dump the rate table for a config file")
    rates.add_argument("config", help="Config file")
    validate = commands.add_parser("validate", help="Parse a config file and print derived quantities")
    validate.add_argument("config", help="Config file")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main function
    """
    settings = setup_env()
    configure_logging(settings["log_level"])
    args = build_parser().parse_args(argv)

    options = RunOptions(
        out_dir=args.out or settings["output_dir"],
        threads=args.threads or settings["threads"],
        progress=settings["progress"] and not args.no_progress,
        cache_dir=args.cache,
        phonons=None if args.phonons is None else args.phonons == "on",
    )
    started = datetime.now()

    try:
        if args.command == "validate":
            run_validate(load_config(args.config))
            return EXIT_OK
        if args.command == "rates-table":
            config = load_config(args.config)
            if options.phonons is False:
                logger.warning("--phonons off is ignored by rates-table")
            path = run_rates_table(config, options)
            print(f"\nRate table written to: {path}")
            return EXIT_OK
        if args.command == "preset":
            if args.name not in PRESETS:
                print(f"Unknown preset: {args.name}. Choose from {', '.join(list_presets())}.")
                return EXIT_CONFIG
            config = load_config(args.config) if args.config else SimConfig()
            output = run_preset(args.name, config, options)
        else:
            config = load_config(args.config)
            name = os.path.splitext(os.path.basename(args.config))[0]
            output = run_config(config, options, name=name)
    except ConfigError as e:
        print(f"Config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidityBoundError as e:
        print(f"Validity bound exceeded: {e}", file=sys.stderr)
        return EXIT_VALIDITY
    except NumericalError as e:
        print(f"Numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SimulatorError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    print(f"\nCompleted in {(datetime.now() - started).total_seconds():.1f} s. Files written:")
    for path in output.files:
        print(f"- {path}")
    for key, value in output.summary.items():
        print(f"  {key}: {value}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
