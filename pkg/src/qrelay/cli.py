"""``qrelay-bench`` command line.

Exit codes: 0 success, 2 configuration or input error, 3 runtime invariant violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from qrelay.config import BACKENDS, BenchConfig, ConfigError
from qrelay.errors import DomainError, InvariantViolation

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3

log = logging.getLogger("qrelay")


def build_parser() -> argparse.ArgumentParser:
    from qrelay.pipeline import SCENARIOS

    p = argparse.ArgumentParser(prog="qrelay-bench", description="Quantum-dot relay simulation bench.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a named scenario")
    run.add_argument("scenario", choices=SCENARIOS)
    run.add_argument("--config", help="YAML configuration file (defaults apply to missing keys)")
    run.add_argument("--seed", type=int, help="override run.seed")
    run.add_argument("--backend", choices=BACKENDS, help="override run.backend")
    run.add_argument("--out", help="override run.output_dir")
    run.add_argument("--no-noise", action="store_true", help="set run.noise_disabled")
    run.add_argument("-v", "--verbose", action="store_true")
    sim = sub.add_parser("simulate", help="write an event-by-event time-tag dump")
    sim.add_argument("--input", default="D", choices=("H", "V", "D", "A", "R", "L"))
    sim.add_argument("--basis", default="DA", choices=("HV", "DA", "RL"))
    sim.add_argument("--duration", type=float, default=0.1, help="acquisition time in seconds")
    sim.add_argument("--config")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", required=True, help="output path; .csv selects the CSV export")
    sub.add_parser("show-config", help="print the default configuration as YAML")
    return p


def _simulate(args) -> int:
    from qrelay.polarization import NAMED_STATES
    from qrelay.relay import RelayScenario, simulate_time_tags
    from qrelay.tags import write_binary, write_csv

    cfg = BenchConfig.load(args.config) if args.config else BenchConfig()
    if args.seed is not None:
        cfg = cfg.replace(run=dataclasses.replace(cfg.run, seed=args.seed))
    eff = cfg.effective()
    scn = RelayScenario(NAMED_STATES[args.input], eff.source, eff.laser, eff.detector, eff.coupler,
                        args.basis, background=not eff.run.noise_disabled)
    tags = simulate_time_tags(eff.run.seed, scn, args.duration)
    if str(args.out).endswith(".csv"):
        write_csv(tags, args.out)
    else:
        write_binary(tags, args.out, cfg.digest())
    print(f"wrote {len(tags)} tags to {args.out}")
    return EXIT_OK


def load_config(args) -> BenchConfig:
    cfg = BenchConfig.load(args.config) if args.config else BenchConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.backend is not None:
        changes["backend"] = args.backend
    if args.out is not None:
        changes["output_dir"] = args.out
    if args.no_noise:
        changes["noise_disabled"] = True
    if changes:
        cfg = cfg.replace(run=dataclasses.replace(cfg.run, **changes))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "show-config":
        sys.stdout.write(BenchConfig().to_yaml())
        return EXIT_OK
    if args.command == "simulate":
        try:
            return _simulate(args)
        except ConfigError as exc:
            print(f"configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except DomainError as exc:
            print(f"invalid input: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    from qrelay.pipeline import run_scenario

    try:
        cfg = load_config(args)
        res = run_scenario(args.scenario, cfg)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{res.name}: wrote {len(res.files)} files to {cfg.run.output_dir}/{res.name}")
    for f in res.files:
        log.info("  %s", f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
