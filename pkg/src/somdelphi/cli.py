"""Command line entry point: ``somdelphi {screen,train,report,run,validate}``."""
from __future__ import annotations

import argparse
import logging
import secrets
import sys

from .config import OUTPUT_DIR_ENV, ConfigError, build_config, describe_keys, validate_config
from .fuzzy import DEFAULT_THRESHOLD, load_panel, screen_variables, write_screening
from .pipeline import StageError, config_from_manifest, run_pipeline, run_report, run_train

log = logging.getLogger("somdelphi")

# flag name -> config key
OVERRIDES = {
    "seed": "seed",
    "output_dir": "output_dir",
    "epochs": "epochs",
    "mode": "mode",
    "topology": "topology",
    "rows": "rows",
    "cols": "cols",
    "colormap": "colormap",
}


def _add_overrides(p: argparse.ArgumentParser):
    p.add_argument("config", nargs="?", help="config file (key = value lines)")
    p.add_argument("--manifest", help="re-run from a previous run's manifest.json instead of a config")
    g = p.add_argument_group("overrides (win over the config file)")
    g.add_argument("--seed", type=int)
    g.add_argument("--entropy-seed", action="store_true", help="draw a fresh random seed (recorded in the manifest)")
    g.add_argument("--output-dir", dest="output_dir", help=f"also settable via ${OUTPUT_DIR_ENV}")
    g.add_argument("--epochs", type=int, help="total epochs, split evenly between phases")
    g.add_argument("--mode", choices=("sequential", "batch"))
    g.add_argument("--topology", choices=("hexagonal", "rectangular"))
    g.add_argument("--rows", type=int)
    g.add_argument("--cols", type=int)
    g.add_argument("--colormap")


def _load(args):
    if args.manifest:
        cfg = config_from_manifest(args.manifest)
        if any(getattr(args, k) is not None for k in OVERRIDES) or args.entropy_seed:
            items = cfg.to_items()
            items.update(_overrides(args))
            cfg = build_config(items)
        return cfg
    if not args.config:
        raise ConfigError(["a config file or --manifest is required"])
    return validate_config(args.config, _overrides(args))


def _overrides(args) -> dict:
    out = {key: str(getattr(args, flag)) for flag, key in OVERRIDES.items() if getattr(args, flag) is not None}
    if args.entropy_seed:
        out["seed"] = str(secrets.randbits(63))
    return out


def _print_summary(summary: dict):
    print(f"status: {summary.get('status')}")
    for key in ("seed", "n_samples", "initial_mse", "final_mse", "topographic_error", "hits_total", "spearman"):
        if key in summary:
            print(f"{key}: {summary[key]}")
    if "ranking" in summary:
        print("ranking: " + ", ".join(f"{k + 1}. {n}" for k, n in enumerate(summary["ranking"])))


def cmd_screen(args) -> int:
    result = screen_variables(load_panel(args.panel), args.threshold)
    for name, t, keep in zip(result.variable_names, result.fuzzy_numbers, result.selected):
        print(f"{name:>30s}  l={t.l:.4g}  m={t.m:.4g}  u={t.u:.4g}  {'selected' if keep else '-'}")
    if args.output:
        write_screening(result, args.output)
    return 0


def cmd_validate(args) -> int:
    if args.keys:
        print(describe_keys())
        return 0
    cfg = validate_config(args.config)
    for key, value in cfg.to_items().items():
        print(f"{key} = {value}")
    return 0


def cmd_pipeline(runner):
    def cmd(args) -> int:
        cfg = _load(args)
        summary = runner(cfg) if runner is not run_report else runner(cfg, args.model)
        _print_summary(summary)
        print(f"artifacts in {cfg.output_dir}")
        return 0
    return cmd


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="somdelphi", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("screen", help="fuzzy Delphi screening of an expert panel CSV")
    p.add_argument("panel")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("-o", "--output", help="write the screening CSV here")
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("validate", help="check a config file and print it with defaults filled in")
    p.add_argument("config", nargs="?")
    p.add_argument("--keys", action="store_true", help="list every config key with type and default")
    p.set_defaults(func=cmd_validate)

    for name, runner, text in (
        ("run", run_pipeline, "full pipeline"),
        ("train", run_train, "screen, load, scale and train; writes model.txt"),
        ("report", run_report, "visualize, rank and compare from a saved model"),
    ):
        p = sub.add_parser(name, help=text)
        _add_overrides(p)
        if name == "report":
            p.add_argument("--model", help="model file (default: <output_dir>/model.txt)")
        p.set_defaults(func=cmd_pipeline(runner))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "validate" and not args.keys and not args.config:
        parser.error("validate needs a config file (or --keys)")
    try:
        return args.func(args)
    except ConfigError as exc:
        print("configuration errors:", file=sys.stderr)
        for err in exc.errors:
            print(f"  - {err}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
