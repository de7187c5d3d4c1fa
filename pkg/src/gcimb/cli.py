"""Command-line front end: ``gcimb run | fig1 | table1``."""

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ParallelTargets, load_config, scenario1, scenario2
from .metrics import dominant_term_ratio, powered_sum_error, powered_sum_log_terms
from .rfs import BernoulliTrack, GaussianDensity, MBPosterior
from .simnet import monte_carlo

STEP_COLUMNS = ("step", "node", "mode", "local_ospa", "fused_ospa", "card_local", "card_fused")
SUMMARY_COLUMNS = ("node", "mode", "local_ospa", "fused_ospa", "card_local", "card_fused",
                   "approx_error_efficient", "efficiency")


def _metadata_lines(config, seed):
    cfg = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return [f"# config: {cfg}", f"# seed: {seed}"]


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path, header_lines, columns, rows):
    buf = io.StringIO()
    for line in header_lines:
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def step_rows(result):
    """Per-step, per-node means over runs in the ``ospa_by_step.csv`` layout."""
    means = {f: result.mean_by_step(f) for f in ("local_ospa", "fused_ospa", "card_local", "card_fused")}
    rows = []
    for k in range(result.config.steps):
        for j, node in enumerate(result.nodes):
            rows.append((k, node, result.config.mode, means["local_ospa"][k, j], means["fused_ospa"][k, j],
                         means["card_local"][k, j], means["card_fused"][k, j]))
    return rows


def summary_rows(result):
    rows = []
    for j, node in enumerate(result.nodes):
        sub = result.local_ospa[..., j]
        mask = sub < result.config.efficiency_threshold
        err = result.approx_error[..., j][mask]
        rows.append((node, result.config.mode,
                     result.mean("local_ospa", node), result.mean("fused_ospa", node),
                     result.mean("card_local", node), result.mean("card_fused", node),
                     float(err.mean()) if err.size else float("nan"), float(mask.mean())))
    return rows


def _plot(path, result, meta):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    steps = np.arange(result.config.steps)
    fig, ax = plt.subplots(figsize=(6, 4))
    for j, node in enumerate(result.nodes):
        ax.plot(steps, result.mean_by_step("local_ospa")[:, j], "--", label=f"node {node} local")
        ax.plot(steps, result.mean_by_step("fused_ospa")[:, j], "-", label=f"node {node} fused")
    ax.set_xlabel("scan")
    ax.set_ylabel("mean OSPA (m)")
    ax.set_title(f"{result.config.name} ({result.config.mode}, {result.runs} runs)")
    ax.legend(fontsize="small")
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "gcimb"}):
        fig.savefig(path, format="svg", metadata={"Date": None, "Description": "\n".join(meta)})
    plt.close(fig)


def _apply_overrides(config, args):
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.runs is not None:
        changes["runs"] = args.runs
    if args.mode is not None:
        changes["mode"] = args.mode
    if args.snr is not None:
        try:
            changes["sensor"] = dataclasses.replace(config.sensor, snr_db=args.snr)
        except ValueError as exc:
            raise ConfigError("sensor.snr_db", str(exc)) from None
    if args.de is not None:
        if not isinstance(config.targets, ParallelTargets):
            raise ConfigError("targets", "--de applies only to a 'parallel' target specification")
        changes["targets"] = ParallelTargets(args.de, config.targets.start, config.targets.velocity)
        changes["name"] = f"scenario1_de{args.de:g}" if config.name.startswith("scenario1") else config.name
    try:
        return config.replace(**changes)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("<override>", str(exc)) from None


def cmd_run(args):
    if args.config:
        config = load_config(args.config)
    else:
        config = scenario1(runs=10)
    config = _apply_overrides(config, args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = monte_carlo(config)
    meta = _metadata_lines(config, config.seed)
    _write_csv(out / "ospa_by_step.csv", meta, STEP_COLUMNS, step_rows(result))
    summary = summary_rows(result)
    _write_csv(out / "summary.csv", meta, SUMMARY_COLUMNS, summary)
    _plot(out / "ospa_by_step.svg", result, meta)
    print(f"{config.name}: mode {config.mode}, {result.runs} runs, seed {config.seed}")
    print(f"{'node':>5} {'local':>8} {'fused':>8} {'|X|loc':>7} {'|X|fus':>7}")
    for node, _, lo, fu, cl, cf, _, _ in summary:
        print(f"{node:>5} {lo:8.4f} {fu:8.4f} {cl:7.3f} {cf:7.3f}")
    print(f"wrote {out / 'ospa_by_step.csv'}, {out / 'summary.csv'}, {out / 'ospa_by_step.svg'}")
    return 0


def fig1_posterior():
    """Three 1-D Gaussian Bernoulli tracks at 3, 4 and 7 (variance 0.2)."""
    return MBPosterior([BernoulliTrack(r, GaussianDensity([m], [[0.2]]))
                        for r, m in ((0.8, 3.0), (0.9, 4.0), (0.9, 7.0))])


FIG1_SETS = ((4.0,), (7.0,), (4.0, 7.0), ())


def fig1_report(omega=0.5):
    """Product terms, dominant-term ratio and powered-sum error per estimate set."""
    mb = fig1_posterior()
    report = []
    for xs in FIG1_SETS:
        x = np.array(xs, dtype=float).reshape(-1, 1)
        if len(x):
            logp = np.column_stack([np.atleast_1d(t.density.logpdf(x)) for t in mb.tracks])
        else:
            logp = np.zeros((0, len(mb)))
        seqs, terms = powered_sum_log_terms(mb.existence, logp)
        err, rel = powered_sum_error(terms, omega)
        report.append({"X": xs, "sequences": seqs, "terms": np.exp(terms),
                       "ratio": dominant_term_ratio(terms), "error": err, "relative_error": rel})
    return report


def cmd_fig1(args):
    for entry in fig1_report(0.5):
        label = "{" + ", ".join(f"{v:g}" for v in entry["X"]) + "}"
        print(f"X = {label}")
        for seq, term in zip(entry["sequences"], entry["terms"]):
            tracks = ",".join(str(i + 1) for i in seq) or "-"
            print(f"  tracks ({tracks}): {term:.6e}")
        print(f"  dominant-term ratio {entry['ratio']:.10f}")
        print(f"  error at omega=0.5: {entry['error']:.6e} (relative {entry['relative_error']:.3e})")
    return 0


def table1(runs=50, seed=0, n_max=3):
    """Mean fused OSPA (averaged over nodes, scans and runs) per sensor count and mode."""
    table = {}
    for mode in ("M1", "M2"):
        for n in range(1, n_max + 1):
            result = monte_carlo(scenario2(n_sensors=n, mode=mode, runs=runs, seed=seed))
            table[mode, n] = result.mean("fused_ospa")
    return table


def cmd_table1(args):
    runs = 50 if args.runs is None else args.runs
    if runs < 10:
        print("error: runs: table1 needs at least 10 runs", file=sys.stderr)
        return 2
    seed = 0 if args.seed is None else args.seed
    table = table1(runs, seed)
    print(f"mean OSPA (m), {runs} runs, seed {seed}")
    print(f"{'sensors':>8} {'1':>8} {'2':>8} {'3':>8}")
    for mode in ("M1", "M2"):
        print(f"{mode:>8} " + " ".join(f"{table[mode, n]:8.4f}" for n in (1, 2, 3)))
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = [(mode, n, table[mode, n]) for mode in ("M1", "M2") for n in (1, 2, 3)]
        cfg = scenario2(runs=runs, seed=seed)
        _write_csv(out / "table1.csv", _metadata_lines(cfg, seed), ("mode", "sensors", "ospa"), rows)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="gcimb", description="Distributed MB-TBD tracking with GCI fusion.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--runs", type=int)
        p.add_argument("--out-dir", default=None)

    run = sub.add_parser("run", help="run a scenario and write OSPA tables and a plot")
    common(run)
    run.add_argument("--config", help="YAML scenario file (default: two parallel targets)")
    run.add_argument("--mode", choices=("M1", "M2"))
    run.add_argument("--snr", type=float, help="target SNR in dB")
    run.add_argument("--de", type=float, help="separation of the two parallel targets (m)")
    run.set_defaults(func=cmd_run, out_dir="out")

    fig1 = sub.add_parser("fig1", help="dominant-term example for three 1-D Bernoulli tracks")
    fig1.set_defaults(func=cmd_fig1)

    t1 = sub.add_parser("table1", help="mean OSPA versus number of sensors")
    common(t1)
    t1.set_defaults(func=cmd_table1)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
