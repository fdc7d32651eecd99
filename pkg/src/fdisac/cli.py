"""``isac-sim`` command line: run, sweep and validate scenario configs."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .config import FIELD_NAMES, ScenarioConfig, config_from_mapping, load_config
from .errors import ConfigError, InvalidInputError
from .runner import export_results, run_scenario, summarize, write_records_csv

log = logging.getLogger("fdisac")


def _overrides(args) -> dict:
    out = {}
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        out["mode"] = args.mode
    if getattr(args, "tx_power_dbm", None) is not None:
        out["tx_power_dbm"] = args.tx_power_dbm
    if getattr(args, "taps", None) is not None:
        out["n_taps"] = args.taps
    return out


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    changes = _overrides(args)
    return cfg.replace(**changes).validate() if changes else cfg.validate()


def _parse_value(text: str, field: str):
    """Coerce a sweep value through the same checks as a config file entry."""
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    return config_from_mapping({field: value}).__getattribute__(field)


def cmd_run(args) -> int:
    cfg = _load(args)
    records = run_scenario(cfg, keep_spectra=args.spectra)
    summary = export_results(records, args.out, cfg, spectra=args.spectra)
    print(json.dumps(summary["metrics"], indent=2))
    return 0


def cmd_sweep(args) -> int:
    if args.param not in FIELD_NAMES:
        raise ConfigError(f"unknown sweep parameter {args.param!r}")
    base = _load(args)
    values = [_parse_value(v.strip(), args.param) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values is empty")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        cfg = base.replace(**{args.param: value}).validate()
        records = run_scenario(cfg)
        write_records_csv(records, out / f"records_{args.param}_{value}.csv")
        metrics = summarize(records)
        rows.append({args.param: value, **metrics})
        log.info("%s=%s done", args.param, value)
    keys = list(rows[0])
    with (out / "summary.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    (out / "summary.json").write_text(
        json.dumps({"base_config": base.to_dict(), "param": args.param, "results": rows}, indent=2) + "\n",
        encoding="utf-8")
    print(json.dumps(rows, indent=2))
    return 0


def cmd_validate(args) -> int:
    cfg = _load(args)
    print(f"{args.config}: ok ({cfg.mode}, {cfg.tx_power_dbm} dBm, {cfg.n_subframes} subframes)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isac-sim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required):
        p.add_argument("--config", required=config_required, help="YAML key-value scenario file")
        p.add_argument("--seed", type=int)
        p.add_argument("--mode", choices=["fd", "hd", "ideal", "fd_isac", "hd_isac", "ideal_fd"])
        p.add_argument("--tx-power-dbm", type=float)
        p.add_argument("--taps", type=int, help="analog canceller taps N_C")

    run = sub.add_parser("run", help="simulate one scenario")
    common(run, True)
    run.add_argument("--out", default="results")
    run.add_argument("--spectra", action="store_true", help="also write spectrum_<i>.csv")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run one scenario per parameter value")
    common(sweep, False)
    sweep.add_argument("--param", required=True)
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--out", default="sweep")
    sweep.set_defaults(func=cmd_sweep)

    val = sub.add_parser("validate", help="check a config file")
    common(val, True)
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
