"""Batch command-line entry point.

Subcommands:
  simulate  generate a scenario dataset and write it to a binary cache
  run       execute an estimator on a scenario and emit report artifacts
  compare   side-by-side report across completed run directories
  export    re-export a completed run as timestamped-pose text

A run directory contains:
  trajectory.txt    one line per pose: t x y z qx qy qz qw (17 sig. digits)
  conditioning.csv  per-recorded-step condition numbers (versioned header)
  metrics.csv       ATE/RTE summary (versioned header)
  flops.csv         counted FLOPs per phase (versioned header)
  timing.csv        wall-clock seconds per phase (not deterministic)
  events.csv        numerical instability events, if any
  results.npz       raw arrays for downstream tooling
  manifest.json     config + seed + scenario content hash; replays the run

All artifacts except timing.csv are byte-identical across repeated
invocations with the same configuration and seed.
"""

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .diag import compute_metrics
from .sim import (
    ScenarioSpec,
    conditioning_scenario,
    default_scenario,
    gen_dataset,
    load_cache,
    save_cache,
)
from .vins import ESTIMATORS, PRECISIONS, EstimatorAbort, FilterConfig, run_filter

MANIFEST_FORMAT = "srifkit-run/1"
CONDITIONING_HEADER = (
    "# srifkit-conditioning/1\n"
    "# t [s], squared condition numbers [unitless], sigma [unitless]\n"
    "t,kappa2_r22_post,kappa2_r22_post_scaled,kappa2_r22_post_precond,"
    "kappa2_r22_precond,sigma_max_p,sigma_min_p\n")
METRICS_HEADER = (
    "# srifkit-metrics/1\n"
    "# ate_translation [m RMS], ate_rotation [deg RMS],"
    " rte_translation [m RMS over 1 s], rte_rotation [deg RMS over 1 s]\n"
    "ate_translation,ate_rotation,rte_translation,rte_rotation\n")
FLOPS_HEADER = ("# srifkit-flops/1\n"
                "# phase, counted floating-point operations [flop]\n"
                "phase,flops\n")
TIMING_HEADER = ("# srifkit-timing/1\n"
                 "# phase, wall-clock [s]; hardware-dependent\n"
                 "phase,seconds\n")
EVENTS_HEADER = ("# srifkit-events/1\n"
                 "# t [s], kind, relative solution error [unitless]\n"
                 "t,kind,detail\n")
PHASE_LABELS = (("propagation", "Propagation"),
                ("marginalization", "Marginalization"),
                ("update", "Update"))


def scenario_hash(spec):
    return hashlib.sha256(spec.to_json().encode()).hexdigest()


def load_scenario(path_or_name, seed=None):
    """Resolve a preset name, a scenario JSON path, or a cache path."""
    presets = {"default": default_scenario, "conditioning": conditioning_scenario}
    if path_or_name in presets:
        spec = presets[path_or_name](0 if seed is None else seed)
        return spec, None
    if path_or_name.endswith(".bin"):
        ds = load_cache(path_or_name)
        return ds.spec, ds
    with open(path_or_name) as fh:
        spec = ScenarioSpec.from_json(fh.read())
    if seed is not None:
        import dataclasses
        spec = dataclasses.replace(spec, seed=seed)
    return spec, None


def format_trajectory(times, positions, quats):
    lines = []
    for t, p, q in zip(times, positions, quats):
        vals = [t, p[0], p[1], p[2], q[0], q[1], q[2], q[3]]
        lines.append(" ".join(f"{v:.17g}" for v in vals))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_trajectory(text):
    rows = [[float(v) for v in ln.split()] for ln in text.splitlines() if ln]
    arr = np.array(rows).reshape(-1, 8)
    return arr[:, 0], arr[:, 1:4], arr[:, 4:8]


def write_run_artifacts(outdir, spec, cfg, res, truth):
    os.makedirs(outdir, exist_ok=True)

    def put(name, text):
        with open(os.path.join(outdir, name), "w") as fh:
            fh.write(text)

    put("trajectory.txt", format_trajectory(res.times, res.positions, res.quats))

    rows = [f"{r.t:.17g},{r.kappa2_r22_post:.17g},"
            f"{r.kappa2_r22_post_scaled:.17g},"
            f"{r.kappa2_r22_post_precond:.17g},{r.kappa2_r22_precond:.17g},"
            f"{r.sigma_max_p:.17g},{r.sigma_min_p:.17g}"
            for r in res.conditioning]
    put("conditioning.csv", CONDITIONING_HEADER + "\n".join(rows)
        + ("\n" if rows else ""))

    m = compute_metrics(res.times, res.positions, res.quats,
                        truth.times, truth.positions, truth.quats)
    put("metrics.csv", METRICS_HEADER +
        f"{m.ate_translation:.17g},{m.ate_rotation:.17g},"
        f"{m.rte_translation:.17g},{m.rte_rotation:.17g}\n")

    total = sum(res.flops.values())
    put("flops.csv", FLOPS_HEADER + "".join(
        f"{label},{res.flops[key]}\n" for key, label in PHASE_LABELS)
        + f"Estimator Total,{total}\n")
    tot_s = sum(res.seconds.values())
    put("timing.csv", TIMING_HEADER + "".join(
        f"{label},{res.seconds[key]:.6f}\n" for key, label in PHASE_LABELS)
        + f"Estimator Total,{tot_s:.6f}\n")

    put("events.csv", EVENTS_HEADER + "".join(
        f"{e.t:.17g},{e.kind},{e.detail:.17g}\n" for e in res.events))

    np.savez(os.path.join(outdir, "results.npz"), times=res.times,
             positions=res.positions, quats=res.quats)

    manifest = {
        "format": MANIFEST_FORMAT,
        "version": __version__,
        "scenario": json.loads(spec.to_json()),
        "scenario_hash": scenario_hash(spec),
        "seed": spec.seed,
        "estimator": cfg.estimator,
        "precision": cfg.precision,
        "window": cfg.window,
        "fallback_qr": cfg.fallback_qr,
        "svd_stride": cfg.svd_stride,
        "count_flops": cfg.count_flops,
        "n_events": len(res.events),
        "status": "completed",
    }
    put("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return m


def write_abort_manifest(outdir, spec, cfg, abort):
    os.makedirs(outdir, exist_ok=True)
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": __version__,
        "scenario": json.loads(spec.to_json()),
        "scenario_hash": scenario_hash(spec),
        "seed": spec.seed,
        "estimator": cfg.estimator,
        "precision": cfg.precision,
        "status": "aborted",
        "failed_at_t": abort.t,
        "failed_phase": abort.phase,
        "error": str(abort),
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# -- subcommands ------------------------------------------------------------


def cmd_simulate(args):
    spec, ds = load_scenario(args.scenario, args.seed)
    if ds is None:
        ds = gen_dataset(spec)
    save_cache(args.out, ds)
    print(f"wrote {args.out} ({len(ds.frames)} frames, "
          f"{len(ds.truth.times)} IMU samples, hash {scenario_hash(spec)[:12]})")
    return 0


def cmd_run(args):
    spec, ds = load_scenario(args.scenario, args.seed)
    if ds is None:
        ds = gen_dataset(spec)
    cfg = FilterConfig(estimator=args.estimator, precision=args.precision,
                       fallback_qr=args.fallback_qr,
                       svd_stride=args.svd_stride,
                       count_flops=not args.no_flop_count)
    try:
        res = run_filter(ds, cfg)
    except EstimatorAbort as abort:
        write_abort_manifest(args.out, spec, cfg, abort)
        print(f"error: {abort}", file=sys.stderr)
        return 1
    m = write_run_artifacts(args.out, spec, cfg, res, ds.truth)
    print(f"{args.estimator}/{args.precision}: "
          f"ATE {m.ate_translation:.4f} m / {m.ate_rotation:.3f} deg, "
          f"RTE {m.rte_translation:.4f} m, {len(res.events)} events "
          f"-> {args.out}")
    return 0


def _read_run(d):
    with open(os.path.join(d, "manifest.json")) as fh:
        manifest = json.load(fh)
    if manifest.get("status") != "completed":
        raise ValueError(f"{d}: run did not complete")
    with open(os.path.join(d, "trajectory.txt")) as fh:
        times, positions, quats = parse_trajectory(fh.read())
    metrics = {}
    with open(os.path.join(d, "metrics.csv")) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    for k, v in zip(lines[0].strip().split(","), lines[1].strip().split(",")):
        metrics[k] = float(v)
    flops = {}
    with open(os.path.join(d, "flops.csv")) as fh:
        for ln in fh:
            if ln.startswith("#") or ln.startswith("phase,"):
                continue
            k, v = ln.strip().split(",")
            flops[k] = int(v)
    return manifest, times, positions, metrics, flops


def cmd_compare(args):
    runs = [_read_run(d) for d in args.rundirs]
    ref_hash = runs[0][0]["scenario_hash"]
    for d, (man, *_rest) in zip(args.rundirs, runs):
        if man["scenario_hash"] != ref_hash:
            print(f"error: {d} was produced on a different scenario "
                  f"({man['scenario_hash'][:12]} != {ref_hash[:12]})",
                  file=sys.stderr)
            return 1
    ref_pos = runs[0][2]
    name_w = max(len(os.path.basename(os.path.normpath(d)))
                 for d in args.rundirs)
    hdr = (f"{'run':<{name_w}}  {'estimator':<10} {'prec':<8} "
           f"{'ATE[m]':>10} {'RTE[m]':>10} {'update flops':>14} "
           f"{'divergence[m]':>14}")
    print(hdr)
    worst = 0.0
    for d, (man, times, pos, metrics, flops) in zip(args.rundirs, runs):
        n = min(len(pos), len(ref_pos))
        div = float(np.abs(pos[:n] - ref_pos[:n]).max())
        worst = max(worst, div)
        print(f"{os.path.basename(os.path.normpath(d)):<{name_w}}  "
              f"{man['estimator']:<10} {man['precision']:<8} "
              f"{metrics['ate_translation']:>10.4f} "
              f"{metrics['rte_translation']:>10.4f} "
              f"{flops['Update']:>14d} {div:>14.3e}")
    if args.tolerance is not None and worst > args.tolerance:
        print(f"error: max divergence {worst:.3e} exceeds tolerance "
              f"{args.tolerance:.3e}", file=sys.stderr)
        return 1
    return 0


def cmd_export(args):
    data = np.load(os.path.join(args.run, "results.npz"))
    text = format_trajectory(data["times"], data["positions"], data["quats"])
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="srifkit",
        description="square-root information filtering on synthetic "
                    "visual-inertial scenarios")
    sub = p.add_subparsers(dest="command", required=True)

    def add_scenario(sp):
        sp.add_argument("--scenario", default="default",
                        help="preset name (default, conditioning), scenario "
                             "JSON path, or .bin cache path")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")

    sp = sub.add_parser("simulate", help="generate and cache a dataset")
    add_scenario(sp)
    sp.add_argument("--out", required=True, help="output cache path (.bin)")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("run", help="run one estimator, write artifacts")
    add_scenario(sp)
    sp.add_argument("--estimator", choices=ESTIMATORS, default="srif")
    sp.add_argument("--precision", choices=sorted(PRECISIONS), default="binary64")
    sp.add_argument("--out", required=True, help="output run directory")
    sp.add_argument("--fallback-qr", action="store_true",
                    help="on Cholesky failure, redo the step via QR")
    sp.add_argument("--svd-stride", type=int, default=10,
                    help="conditioning-record stride in frames")
    sp.add_argument("--no-flop-count", action="store_true")
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("compare", help="cross-run report")
    sp.add_argument("rundirs", nargs="+", help="two or more run directories")
    sp.add_argument("--tolerance", type=float, default=None,
                    help="fail if any pairwise position divergence exceeds this")
    sp.set_defaults(fn=cmd_compare)

    sp = sub.add_parser("export", help="write a run's trajectory as text")
    sp.add_argument("--run", required=True, help="completed run directory")
    sp.add_argument("--out", default="-", help="output path, - for stdout")
    sp.set_defaults(fn=cmd_export)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "compare" and len(args.rundirs) < 2:
        parser.error("compare needs at least two run directories")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
