"""Command-line entry point for reproducible experiments.

Subcommands: ``simulate``, ``run``, ``sweep``, ``freeflight``, ``eval``.
Every command is deterministic given its inputs and flags (the optional
``--wall-clock`` timing column is the one explicit exception), writes the
exact configuration it used into the output directory, and emits CSV with
6-decimal floats.

Exit codes: 0 success, 1 validation/config error, 2 data error,
3 undefined metric.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bank import MODULE_HEAD, MODULE_SKELETON  # noqa: F401  (documented module names)
from .core import (
    CHANNELS,
    ConfigError,
    DataError,
    Scenario,
    ScenarioParseError,
    UndefinedMetricError,
    read_scenario,
    write_scenario,
)
from .metrics import AttrReport, ClearReport
from .pipeline import (
    RunConfig,
    evaluate,
    freeflight_table,
    run_scenario,
    sweep_channel,
)
from .simgen import generate, preset, preset_names, read_spec_file, spec_to_dict


def _f6(v: float) -> str:
    return f"{v:.6f}"


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


def _write_json(path: Path, payload) -> None:
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    lines = [",".join(header)] + [",".join(r) for r in rows]
    _write_text(path, "\n".join(lines) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args) -> RunConfig:
    if getattr(args, "config", None) is None:
        return RunConfig()
    try:
        payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {args.config}: invalid JSON ({e})") from e
    return RunConfig.from_dict(payload)


def _attr_rows(variant: str, report: AttrReport) -> list[list[str]]:
    return [[variant, s.channel, str(s.count), _f6(s.mean_offset), _f6(s.score)]
            for s in report.scores]


def _clear_row(r: ClearReport) -> list[str]:
    return [str(r.total_gt), str(r.matches), str(r.fp), str(r.fn), str(r.ids),
            _f6(r.ids_rate), _f6(r.mota), _f6(r.motp)]


# ---------------------------------------------------------------------------
# Commands

def cmd_simulate(args) -> None:
    if (args.preset is None) == (args.spec is None):
        raise ConfigError("pass exactly one of --preset or --spec")
    spec = preset(args.preset) if args.preset else read_spec_file(args.spec)
    scenario = generate(spec, args.seed)
    out = _out_dir(args)
    write_scenario(scenario, out / "scenario.txt")
    _write_json(out / "spec.json", {"seed": args.seed, "spec": spec_to_dict(spec)})
    print(f"wrote {out / 'scenario.txt'}: {scenario.n_frames} frames, "
          f"{len(spec.persons)} persons, {len(scenario.detections)} detections")


def cmd_run(args) -> None:
    scenario = read_scenario(args.scenario)
    config = _load_config(args)
    result = run_scenario(scenario, config, wall_clock=args.wall_clock)
    out = _out_dir(args)
    write_scenario(result.scenario, out / "augmented.txt")
    _write_json(out / "run_config.json", config.to_dict())
    th = result.throughput
    header = ["total_frames", "total_cost_s", "effective_hz", "model_hz", "speedup"]
    row = [str(th.total_frames), _f6(th.total_cost_s), _f6(th.effective_hz),
           _f6(th.model_hz), _f6(th.speedup)]
    if args.wall_clock:
        header.append("wall_hz")
        row.append(_f6(result.wall_hz))
    _write_csv(out / "cost.csv", header, [row])
    print(f"wrote {out / 'augmented.txt'}: {len(result.scenario.tracks)} trk records, "
          f"{len(result.scenario.track_attrs)} trk-attr records, "
          f"{result.dropped_observations} observations dropped, "
          f"model {_f6(th.effective_hz)} Hz")


def cmd_sweep(args) -> None:
    scenario = read_scenario(args.scenario)
    g_grid = _parse_grid(args.g_grid, "g")
    h_grid = _parse_grid(args.h_grid, "h")
    config = _load_config(args)
    result = sweep_channel(scenario, args.channel, g_grid, h_grid,
                           stride=args.stride, tracker=config.tracker,
                           expire_after=config.expire_after)
    out = _out_dir(args)
    rows = [[_f6(c.g), _f6(c.h), str(c.count), _f6(c.mean_offset), _f6(c.score),
             "1" if c.best else "0"] for c in result.cells]
    _write_csv(out / "sweep.csv", ["g", "h", "count", "mean_offset", "score", "best"], rows)
    _write_json(out / "sweep_summary.json", {
        "channel": result.channel,
        "stride": result.stride,
        "raw": {"count": result.raw.count, "mean_offset": result.raw.mean_offset,
                "score": result.raw.score},
        "best": {"g": result.best.g, "h": result.best.h, "score": result.best.score,
                 "mean_offset": result.best.mean_offset},
        "tracker": config.to_dict()["tracker"],
    })
    print(f"wrote {out / 'sweep.csv'}: best cell g={result.best.g} h={result.best.h} "
          f"score={_f6(result.best.score)} (raw {_f6(result.raw.score)})")


def cmd_freeflight(args) -> None:
    scenario = read_scenario(args.scenario)
    strides = [int(s) for s in _parse_grid(args.strides, "stride")]
    config = _load_config(args)
    rows = freeflight_table(scenario, args.channel, strides,
                            channels=config.channels,
                            fixed_cost=args.cost_fixed, call_cost=args.cost_call,
                            tracker=config.tracker, expire_after=config.expire_after)
    out = _out_dir(args)
    _write_csv(out / "freeflight.csv",
               ["stride", "keep_score", "predict_score", "model_hz", "measured_hz"],
               [[str(r.stride), _f6(r.keep_score), _f6(r.predict_score),
                 _f6(r.model_hz), _f6(r.measured_hz)] for r in rows])
    _write_json(out / "freeflight_config.json", {
        "channel": args.channel, "strides": strides,
        "cost": {"fixed_per_frame": args.cost_fixed, "per_call": args.cost_call},
        "config": config.to_dict(),
    })
    print(f"wrote {out / 'freeflight.csv'} ({len(rows)} strides)")


def cmd_eval(args) -> None:
    scenario = read_scenario(args.scenario)
    result = evaluate(scenario, iou_threshold=args.iou)
    out = _out_dir(args)
    _write_csv(out / "clear.csv",
               ["total_gt", "matches", "fp", "fn", "ids", "ids_rate", "mota", "motp"],
               [_clear_row(result.clear)])
    rows = _attr_rows("raw", result.attr["raw"]) + _attr_rows("filtered", result.attr["filtered"])
    _write_csv(out / "attr.csv", ["variant", "channel", "count", "mean_offset", "score"], rows)
    _write_json(out / "eval_config.json", {"iou_threshold": args.iou})
    c = result.clear
    print(f"CLEAR: MOTA {_f6(c.mota)}  MOTP {_f6(c.motp)}  "
          f"FP {c.fp}  FN {c.fn}  IDS {c.ids} ({_f6(c.ids_rate)}/box)")
    for variant in ("raw", "filtered"):
        for s in result.attr[variant].scores:
            print(f"{variant:>8}  {s.channel:<12} n={s.count:<6} "
                  f"offset={_f6(s.mean_offset)}  score={_f6(s.score)}")


def _parse_grid(text: str, name: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ConfigError(f"bad {name} grid {text!r}; expected comma-separated numbers") from None
    if not values:
        raise ConfigError(f"{name} grid is empty")
    return values


# ---------------------------------------------------------------------------
# Parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dettalab",
        description="Synthetic lab for track-keyed attribute filtering and "
                    "stride-scheduled analysis modules.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a scenario from a preset or spec file")
    p.add_argument("--preset", help=f"one of: {', '.join(preset_names())}")
    p.add_argument("--spec", help="path to a JSON scenario spec")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="track, filter, and schedule over a scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--config", help="JSON run config (defaults used when omitted)")
    p.add_argument("--wall-clock", action="store_true",
                   help="additionally report wall-clock Hz (not deterministic)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="filter-gain heatmap for one channel")
    p.add_argument("--scenario", required=True)
    p.add_argument("--channel", required=True, help=f"one of: {', '.join(CHANNELS)}")
    p.add_argument("--g-grid", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    p.add_argument("--h-grid", default="0,0.02,0.1,0.2")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("freeflight", help="keep-vs-predict scores and Hz per stride")
    p.add_argument("--scenario", required=True)
    p.add_argument("--channel", required=True, help=f"one of: {', '.join(CHANNELS)}")
    p.add_argument("--strides", default="1,2,3,5")
    p.add_argument("--cost-fixed", type=float, default=0.001,
                   help="fixed pipeline seconds per frame")
    p.add_argument("--cost-call", type=float, default=0.009,
                   help="seconds per scheduled module invocation")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_freeflight)

    p = sub.add_parser("eval", help="CLEAR and attribute reports for a completed run")
    p.add_argument("--scenario", required=True, help="augmented scenario (trk + trk-attr)")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UndefinedMetricError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (DataError, ScenarioParseError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
