"""Command line entry point: ``simulate``, ``verify`` and ``plot``.

Exit status is 0 on success, 1 when a verification report fails and 2 for
configuration or input errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .plot import CSV_HEADER, CSVFormatError, emit_plot
from .reconstruct import build_model, draw_noise, rollout, rollout_unconstrained, trajectory_rng
from .scenario import PRESETS, ConfigError, ScenarioConfig, load_config, preset
from .verify import check_prop1, check_prop2, check_prop3, check_prop4
from .weights import WeightBlocks, optimal_weight

log = logging.getLogger("destmodel")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def resolve_config(preset_name=None, config_path=None, seed=None) -> ScenarioConfig:
    """Preset (default: the constant-velocity scenario), then config file, then ``--seed``."""
    cfg = preset(preset_name) if preset_name else ScenarioConfig()
    if config_path:
        cfg = load_config(config_path, base=cfg)
    if seed is not None:
        cfg.seed = seed
    return cfg.validate()


def _fmt(v):
    return repr(float(v))


def simulate_rows(cfg: ScenarioConfig):
    """Generate CSV rows and a per-trajectory summary for ``cfg``."""
    sys_model = cfg.system()
    dt = cfg.dt
    rows, summary = [], []
    kinds = [("constrained", cfg.weight_mode)]
    if cfg.compare_identity:
        kinds = [("constrained", "optimal"), ("constrained_identity", "identity")]
    tid = 0
    for x0, dest in cfg.sets():
        dc = cfg.constraint(dest)
        models = {label: build_model(sys_model, dc, mode) for label, mode in kinds}
        for _ in range(cfg.trajectories):
            draw = draw_noise(sys_model, trajectory_rng(cfg.seed, tid), cfg.radial_mode)
            trajs = [(label, rollout(sys_model, dc, None, x0, draw, steps=models[label]))
                     for label, _ in kinds]
            if cfg.relaxed:
                trajs.append(("relaxed", rollout_unconstrained(sys_model, x0, draw)))
            for label, tr in trajs:
                for k, s in enumerate(tr.states):
                    rows.append([str(tid), label, str(k), _fmt(k * dt)] + [_fmt(v) for v in s])
                xN = tr.terminal
                summary.append({
                    "trajectory_id": tid,
                    "kind": label,
                    "origin": [float(x0[0]), float(x0[2])],
                    "destination": [float(dest[0]), float(dest[1])],
                    "terminal_residual": [float(r) for r in dc.residual(xN)],
                    "miss_distance_m": float(np.hypot(xN[0] - dest[0], xN[2] - dest[1])),
                })
            tid += 1
    return rows, summary


def run_simulate(cfg: ScenarioConfig, out_dir):
    """Write ``<name>.csv`` and ``<name>_summary.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, summary = simulate_rows(cfg)
    csv_path = out_dir / f"{cfg.name}.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(rows)
    summary_path = out_dir / f"{cfg.name}_summary.json"
    summary_path.write_text(json.dumps({"scenario": cfg.name, "seed": cfg.seed,
                                        "trajectories": summary}, indent=2) + "\n",
                            encoding="utf-8")
    return [csv_path, summary_path]


def _scenario_label(cfg):
    return (f"{cfg.name}: N={cfg.horizon}, T={cfg.dt}, g={cfg.accel_scale}, "
            f"x0={list(cfg.x0)}, destination={list(cfg.destination)}, theta={cfg.theta_deg} deg")


def build_reports(cfg: ScenarioConfig, propositions=(1, 2, 3, 4)):
    sys_model = cfg.system()
    dc = cfg.constraint()
    label = _scenario_label(cfg)
    rng = np.random.default_rng(cfg.seed)
    reports = {}
    for prop in sorted(set(propositions)):
        if prop == 1:
            reports[1] = check_prop1(sys_model, dc, rng, instances=cfg.qp_instances, scenario=label)
        elif prop == 2:
            candidate_fn = None
            if cfg.w2_scale != 1.0:
                def candidate_fn(s, k, scale=cfg.w2_scale):
                    W = optimal_weight(s, k)
                    return WeightBlocks(W.W1, scale * W.W2, W.W3)
            reports[2] = check_prop2(sys_model, dc, cfg.competitors, rng, scenario=label,
                                     candidate_fn=candidate_fn)
            reports[2].details["w2_scale"] = cfg.w2_scale
        elif prop == 3:
            reports[3] = check_prop3(sys_model, dc, scenario=label)
        elif prop == 4:
            if cfg.noise_full_file:
                raise ConfigError("the monotone-shrinkage check (--props 4) needs a time-invariant block-diagonal noise shape")
            D = np.eye(4) if cfg.prop4_constraint == "full" else dc.D
            try:
                reports[4] = check_prop4(cfg.transition(), cfg.noise_q(), D, cfg.horizon,
                                         scenario=f"{label}, D={cfg.prop4_constraint}")
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        else:
            raise ConfigError(f"unknown proposition {prop}; choose from 1, 2, 3, 4")
    return reports


def run_verify(cfg: ScenarioConfig, out_dir, propositions=(1, 2, 3, 4)):
    """Write ``prop<N>.json`` reports; returns ``(paths, all_passed)``."""
    reports = build_reports(cfg, propositions)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for prop, report in reports.items():
        path = out_dir / f"prop{prop}.json"
        path.write_text(report.to_json() + "\n", encoding="utf-8")
        paths.append(path)
        status = "PASS" if report.passed else "FAIL"
        log.info("proposition %s: %s (%d margins)", prop, status, len(report.margins))
    return paths, all(r.passed for r in reports.values())


def _props(text):
    try:
        out = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list, got {text!r}")
    return out


def make_parser():
    parser = argparse.ArgumentParser(prog="destmodel", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value scenario file")
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int)

    common(sub.add_parser("simulate", help="generate trajectory CSV"))
    p = sub.add_parser("verify", help="write proposition reports")
    common(p)
    p.add_argument("--props", type=_props, default=[1, 2, 3, 4],
                   help="comma separated subset of 1,2,3,4")
    p = sub.add_parser("plot", help="render trajectory CSV files as SVG")
    p.add_argument("csv", nargs="+")
    p.add_argument("--out", default=None, help="output directory (default: next to CSV)")
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "plot":
            for path in args.csv:
                for out in emit_plot(path, args.out):
                    print(out)
            return EXIT_OK
        cfg = resolve_config(args.preset, args.config, args.seed)
        if args.command == "simulate":
            for out in run_simulate(cfg, args.out):
                print(out)
            return EXIT_OK
        paths, ok = run_verify(cfg, args.out, args.props)
        for out in paths:
            print(out)
        return EXIT_OK if ok else EXIT_FAIL
    except (ConfigError, CSVFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
