"""Command line front end: run, matrix, m-sweep, gen-outage, validate-data."""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import outage as outage_mod
from .dataset import DatasetError, load_district
from .energy_systems import heat_pump_cop
from .presets import PRESET_IDS, PresetError, parse_preset
from .protocol import EpisodeAborted, ProtocolError
from .runner import M_SWEEP_VALUES, m_sweep, run, run_matrix
from .synth import bundled_path

SEED_ENV = "GRIDBENCH_SEED"


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV, "")
    try:
        return int(raw)
    except ValueError:
        return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", default=None, help="dataset directory (default: bundled district)")
    p.add_argument("--seed", type=int, default=_default_seed(),
                   help=f"run seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--epochs", type=int, default=None, help="training epochs for learners")
    p.add_argument("--out", default=None, help="output directory")


def _run_overrides(args: argparse.Namespace) -> dict:
    overrides: dict = {"seed": args.seed}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if getattr(args, "m", None) is not None:
        overrides["m"] = args.m
    if getattr(args, "agent", None) is not None:
        overrides["agent_override"] = args.agent
    if getattr(args, "topology", None) is not None:
        overrides["topology"] = args.topology
    if getattr(args, "outage", None) is not None:
        overrides["outage_mode"] = args.outage
    for name in ("saifi", "caidi", "outage_seed", "futile_penalty"):
        value = getattr(args, name, None)
        if value is not None:
            key = {"saifi": "saifi_events_per_year", "caidi": "caidi_hours"}.get(name, name)
            overrides[key] = value
    if getattr(args, "include_fixed_charges", False):
        overrides["include_fixed_charges"] = True
    return overrides


def _load(args: argparse.Namespace):
    return load_district(args.data if args.data else bundled_path())


def _cmd_run(args: argparse.Namespace) -> int:
    config = parse_preset(args.preset, **_run_overrides(args))
    result = run(config, _load(args), args.out)
    sys.stdout.write(result.report.to_text())
    if args.out:
        print(f"outputs in {result.out_dir}")
    return 0


def _cmd_matrix(args: argparse.Namespace) -> int:
    ids = args.presets if args.presets else list(PRESET_IDS)
    overrides = _run_overrides(args)
    configs = [parse_preset(i, **overrides) for i in ids]
    results = run_matrix(configs, _load(args), args.out, workers=args.workers)
    for result in results:
        sys.stdout.write(result.report.to_text() + "\n")
    if args.out:
        print(f"outputs in {args.out}")
    return 0


def _cmd_m_sweep(args: argparse.Namespace) -> int:
    overrides = _run_overrides(args)
    overrides.pop("m", None)
    config = parse_preset(args.preset, **overrides)
    rows = m_sweep(config, _load(args), tuple(args.values), args.out)
    cols = ("m", "discomfort", "discomfort_pct", "consumption", "consumption_pct",
            "overcool_mean", "overcool_std", "undercool_mean", "undercool_std")
    print("  ".join(f"{c:>16s}" for c in cols))
    for row in rows:
        print("  ".join(f"{row[c]:16.4f}" for c in cols))
    return 0


def _cmd_gen_outage(args: argparse.Namespace) -> int:
    params = outage_mod.ReliabilityParams(
        saifi_events_per_year=args.saifi, caidi_hours=args.caidi, seed=args.seed
    )
    signal = outage_mod.generate(params, args.days, args.steps_per_day)
    outage_mod.save_signal(signal, args.out)
    events = signal.events()
    steps = int(signal.active.sum())
    print(f"{args.out}: {len(events)} outage events, {steps} affected steps")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        dataset = _load(args)
    except (DatasetError, FileNotFoundError) as err:
        print(f"invalid: {err}", file=sys.stderr)
        return 1
    days = dataset.n_steps // dataset.steps_per_day
    print(f"{dataset.name}: {dataset.n_steps} steps ({days} days) from {dataset.start}")
    print(f"split: {dataset.split_spec.train_days} train days, "
          f"{dataset.split_spec.test_days} test days")
    warnings = 0
    for name, bld in dataset.buildings.items():
        spec = bld.spec
        devices = [d for d, present in (
            ("dhw_storage", spec.dhw_storage), ("battery", spec.battery), ("pv", spec.pv),
        ) if present is not None]
        print(f"  {name}: heat pump {spec.heat_pump.nominal_power_kw} kW, "
              f"heater {spec.dhw_heater.nominal_power_kw} kW, "
              f"devices: {', '.join(devices) if devices else 'none'}")
        dt = dataset.dt_hours
        heater_cap = spec.dhw_heater.nominal_power_kw * dt * spec.dhw_heater.efficiency
        worst_cop = min(
            heat_pump_cop(spec.heat_pump, float(x)) for x in dataset.outdoor_temp.values
        )
        hp_cap = spec.heat_pump.nominal_power_kw * dt * worst_cop
        over_dhw = int((bld.dhw_load.values > heater_cap + 1e-9).sum())
        over_cool = int((bld.cooling_load.values > hp_cap + 1e-9).sum())
        if over_dhw:
            warnings += 1
            print(f"    warning: hot water demand exceeds heater capacity "
                  f"({heater_cap:.3f} kWh/step) on {over_dhw} steps")
        if over_cool:
            warnings += 1
            print(f"    warning: cooling demand exceeds heat pump capacity at the "
                  f"worst outdoor temperature ({hp_cap:.3f} kWh/step) on {over_cool} steps")
    print("ok" if not warnings else f"{warnings} warnings")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridbench",
        description="district energy flexibility benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration")
    _add_common(p)
    p.add_argument("--preset", required=True, help="configuration id, e.g. rbc-b1_b2-c-bess_pv")
    p.add_argument("--agent", default=None,
                   help="override the preset agent: none, rbc, qlearn, random, "
                        "external:HOST:PORT, or spawn:CMD")
    p.add_argument("--topology", choices=("centralized", "independent"), default=None)
    p.add_argument("--m", type=float, default=None, help="undercooling weight")
    p.add_argument("--outage", default=None,
                   help="none, stochastic, or static:FILE")
    p.add_argument("--saifi", type=float, default=None, help="outage events per year")
    p.add_argument("--caidi", type=float, default=None, help="mean outage duration, hours")
    p.add_argument("--outage-seed", type=int, default=None)
    p.add_argument("--futile-penalty", type=float, default=None)
    p.add_argument("--include-fixed-charges", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("matrix", help="run many configurations and compare to baselines")
    _add_common(p)
    p.add_argument("--presets", nargs="*", default=None,
                   help="configuration ids (default: the full matrix)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--m", type=float, default=None)
    p.set_defaults(func=_cmd_matrix)

    p = sub.add_parser("m-sweep", help="sweep the undercooling weight")
    _add_common(p)
    p.add_argument("--preset", default="rlc-b1_b2-d_o-hp")
    p.add_argument("--values", nargs="*", type=float, default=list(M_SWEEP_VALUES))
    p.set_defaults(func=_cmd_m_sweep)

    p = sub.add_parser("gen-outage", help="draw an outage schedule and save it")
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--steps-per-day", type=int, default=24)
    p.add_argument("--saifi", type=float, default=1.5)
    p.add_argument("--caidi", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_outage)

    p = sub.add_parser("validate-data", help="check a dataset directory")
    p.add_argument("--data", default=None)
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PresetError, DatasetError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (EpisodeAborted, ProtocolError) as err:
        # external peer failed mid-episode; the abort already reached it
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
