"""Command-line entry point: ``lobchain <subcommand> --config run.json``.

Exit codes: 0 success or passing verdict, 1 usage/configuration error,
2 failing verdict.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .book import BookState
from .flow import (make_rng, read_trace_csv, simulate, write_snapshots_csv, write_trace_csv)
from .generator import (drift_check_continuous, drift_check_embedded, large_states,
                        sampled_states, stability_condition, truncated_stationary)
from .stats import CutoffRule, compute_report, spread_histogram, total_variation
from .toy import ToyParams, empirical_moments, fclt_check, simulate_toy, theoretical_moments

log = logging.getLogger("lobchain")

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def blob_hash(path: Path) -> str:
    data = path.read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])


def _state_dict(s: BookState) -> dict:
    return {"ask": list(s.ask), "bid": list(s.bid), "ask_price_ticks": s.ask_price}


def cmd_simulate(cfg: cfgmod.RunConfig, out: Path, replicas: int) -> int:
    sim, p = cfg.simulation, cfg.model
    for r in range(replicas):
        tag = "" if replicas == 1 else f"_{r:03d}"
        tr = simulate(p, sim.seed, sim.n_events, sim.burn_in, sim.snapshot_stride,
                      replica=None if replicas == 1 else r)
        files = {f"trace{tag}.csv": write_trace_csv}
        if sim.snapshot_stride:
            files[f"snapshots{tag}.csv"] = write_snapshots_csv
        for name, writer in files.items():
            writer(tr, out / name)
        manifest = {
            "seed": sim.seed, "replica": tr.replica, "params_digest": tr.params_digest,
            "n_events": len(tr), "burn_in": sim.burn_in, "snapshot_stride": sim.snapshot_stride,
            "halted": tr.halted, "mid0_half_ticks": tr.mid0, "spread0_ticks": tr.spread0,
            "state0": _state_dict(tr.state0),
            "files": {name: blob_hash(out / name) for name in files},
            "config": cfg.to_dict(),
        }
        _write_json(out / f"manifest{tag}.json", manifest)
        log.info("wrote %d events to %s", len(tr), out / f"trace{tag}.csv")
        if tr.halted:
            log.warning("simulation halted: total event rate reached zero")
    return EXIT_OK


def _load_trace(cfg: cfgmod.RunConfig, trace_dir: Path):
    mpath = trace_dir / "manifest.json"
    if not mpath.exists():
        raise UsageError(f"no manifest.json in {trace_dir}; run 'simulate' first")
    man = json.loads(mpath.read_text(encoding="utf-8"))
    if man["params_digest"] != cfg.model.digest():
        raise UsageError("trace was produced with different model parameters")
    s0 = man["state0"]
    return read_trace_csv(trace_dir / "trace.csv", cfg.model, man["seed"], man["mid0_half_ticks"],
                          man["spread0_ticks"], BookState(s0["ask"], s0["bid"], s0["ask_price_ticks"]),
                          trace_dir / "snapshots.csv", man["snapshot_stride"])


def cmd_stats(cfg: cfgmod.RunConfig, out: Path, trace_dir: Path, svg: bool) -> int:
    tr = _load_trace(cfg, trace_dir)
    a = cfg.analysis
    if len(tr) == 0:
        raise UsageError("trace is empty after burn-in; nothing to analyse")
    try:
        rep = compute_report(tr, a.max_lag, CutoffRule(a.cutoff_run, a.cutoff_threshold),
                             a.variance_grid, a.aggregation_windows, a.batch_size)
    except ValueError as e:
        raise UsageError(str(e)) from None
    N = cfg.model.N
    tables = {
        "depth_profile": (["level_ticks", "ask_depth_shares", "bid_depth_shares"],
                          [(i + 1, float(x), float(y)) for i, (x, y) in
                           enumerate(zip(rep.depth_ask, rep.depth_bid))]),
        "spread_histogram": (["spread_ticks", "frequency"],
                             [(i + 1, float(f)) for i, f in enumerate(rep.spread_hist)]),
        "increment_histogram": (["increment_half_ticks", "frequency"],
                                list(zip(rep.increment_values.tolist(), rep.increment_freq.tolist()))),
        "autocorrelation": (["lag_events", "autocovariance_half_ticks2", "autocorrelation"],
                            [(k, float(g), float(g / rep.autocov[0]) if rep.autocov[0] else 0.0)
                             for k, g in enumerate(rep.autocov)]),
        "variance_curve": (["window_events", "variance_half_ticks2", "windows", "fitted_half_ticks2"],
                           [(int(m), float(v), int(w), rep.scaling.slope * m + rep.scaling.intercept)
                            for m, v, w in zip(rep.scaling.grid, rep.scaling.variances,
                                               rep.scaling.windows)]),
    }
    path = tr.mid_path
    step = max(1, len(path) // 10_000)
    tables["price_path"] = (["event_index", "mid_half_ticks"],
                            [(int(k), int(path[k])) for k in range(0, len(path), step)])
    if rep.physical is not None:
        tables["physical_variance_curve"] = (
            ["window_model_time", "variance_half_ticks2", "windows"],
            [(float(t), float(v), int(w)) for t, v, w in
             zip(rep.physical.grid, rep.physical.variances, rep.physical.windows)])
    for name, (header, rows) in tables.items():
        _write_rows(out / f"{name}.csv", header, rows)
    summary = rep.summary()
    summary["frame_size"] = N
    summary["n_events"] = len(tr)
    _write_json(out / "summary.json", summary)
    if svg:
        _render_svgs(out, tables)
    return EXIT_OK


def _render_svgs(out: Path, tables: dict):
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "lobchain"
    import matplotlib.pyplot as plt

    for name, (header, rows) in tables.items():
        if not rows:
            continue
        cols = list(zip(*rows))
        fig, ax = plt.subplots(figsize=(6, 4))
        if name in ("depth_profile",):
            ax.bar(cols[0], cols[1], label=header[1])
            ax.bar([-x for x in cols[0]], cols[2], label=header[2])
            ax.legend()
        elif name in ("spread_histogram", "increment_histogram", "autocorrelation"):
            ax.bar(cols[0], cols[-1] if name == "autocorrelation" else cols[1])
        else:
            ax.plot(cols[0], cols[1], marker="o" if "variance" in name else None)
            if name == "variance_curve":
                ax.plot(cols[0], cols[3], "--")
        ax.set_xlabel(header[0])
        ax.set_ylabel(header[-1] if name == "autocorrelation" else header[1])
        ax.set_title(name.replace("_", " "))
        fig.tight_layout()
        fig.savefig(out / f"{name}.svg", format="svg", metadata={"Date": None})
        plt.close(fig)


def cmd_drift_check(cfg: cfgmod.RunConfig, out: Path) -> int:
    p, d = cfg.model, cfg.drift
    if not p.proportional:
        raise UsageError("drift-check needs proportional cancellation; use 'stability' for constant mode")
    states = sampled_states(p, cfg.simulation.seed, d.n_sample, burn_in=cfg.simulation.burn_in)
    states += large_states(p, make_rng(cfg.simulation.seed, 1), d.n_large, d.phi_max)
    cont = drift_check_continuous(p, states)
    emb = drift_check_embedded(p, d.z, states)
    cont.write_csv(out / "drift_continuous.csv")
    emb.write_csv(out / "drift_embedded.csv")
    _write_json(out / "drift_summary.json", {"continuous": cont.summary(), "embedded": emb.summary()})
    return EXIT_OK if cont.passed and emb.passed else EXIT_FAIL


def cmd_stability(cfg: cfgmod.RunConfig, out: Path) -> int:
    try:
        res = stability_condition(cfg.model)
    except ValueError as e:
        raise UsageError(str(e)) from None
    _write_json(out / "stability.json", res.to_dict())
    return EXIT_OK if res.holds else EXIT_FAIL


def cmd_oracle(cfg: cfgmod.RunConfig, out: Path) -> int:
    o = cfg.oracle
    try:
        res = truncated_stationary(cfg.model, o.cap)
    except ValueError as e:
        raise UsageError(str(e)) from None
    res.write_csv(out / "stationary.csv")
    tr = simulate(cfg.model, cfg.simulation.seed, o.n_events, cfg.simulation.burn_in)
    sim = spread_histogram(tr)
    exact = res.spread_marginal()
    tv = total_variation(exact, sim)
    _write_json(out / "oracle.json", {
        "cap_orders": o.cap, "n_states": len(res.states), "boundary_mass": res.boundary_mass,
        "spread_oracle": exact.tolist(), "spread_simulated": sim.tolist(),
        "tv_distance": tv, "tv_tolerance": o.tv_tolerance, "n_events": o.n_events,
        "verdict": "pass" if tv <= o.tv_tolerance else "fail"})
    return EXIT_OK if tv <= o.tv_tolerance else EXIT_FAIL


def cmd_toy(cfg: cfgmod.RunConfig, out: Path, replicas: int | None) -> int:
    t = cfg.toy
    try:
        tp = ToyParams(t.lam_plus, t.lam_minus, t.u, t.tick, cfg.simulation.seed, t.n_events)
    except ValueError as e:
        raise UsageError(str(e)) from None
    path = simulate_toy(tp, rng=make_rng(tp.seed))
    _write_rows(out / "toy_path.csv", ["event_index", "t_model_time", "price"],
                [(0, 0.0, float(path.prices[0]))]
                + [(k + 1, float(ti), float(pr)) for k, (ti, pr) in
                   enumerate(zip(path.times.tolist(), path.prices[1:].tolist()))])
    mu, sigma = theoretical_moments(tp)
    mu_hat, s2_hat = empirical_moments(path)
    summary = {"mu_theory": mu, "sigma2_theory": sigma ** 2, "mu_hat": mu_hat, "sigma2_hat": s2_hat,
               "mu_abs_error_over_sigma": abs(mu_hat - mu) / sigma if sigma else None,
               "sigma2_rel_error": abs(s2_hat - sigma ** 2) / sigma ** 2 if sigma else None}
    if sigma > 0:
        rep = fclt_check(tp, t.fclt_n, replicas or t.fclt_replicas, rng=make_rng(tp.seed, 1))
        summary["fclt"] = rep.summary()
    _write_json(out / "toy_summary.json", summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="lobchain", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("simulate", "stats", "drift-check", "stability", "oracle", "toy"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", type=Path, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--replicas", type=int, default=None)
        sp.add_argument("--svg", action="store_true")
        if name == "stats":
            sp.add_argument("--trace", type=Path, default=None,
                            help="directory holding trace.csv and manifest.json (default: --out)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = cfgmod.load(args.config)
    except FileNotFoundError:
        print(f"lobchain: error: config file {args.config} not found", file=sys.stderr)
        return EXIT_USAGE
    except cfgmod.ConfigError as e:
        print(f"lobchain: error: {args.config}: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        cfg.simulation.seed = args.seed
    if args.replicas is not None and args.replicas < 1:
        print("lobchain: error: --replicas must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    out = args.out or Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "simulate":
            return cmd_simulate(cfg, out, args.replicas or cfg.simulation.replicas)
        if args.command == "stats":
            return cmd_stats(cfg, out, args.trace or out, args.svg)
        if args.command == "drift-check":
            return cmd_drift_check(cfg, out)
        if args.command == "stability":
            return cmd_stability(cfg, out)
        if args.command == "oracle":
            return cmd_oracle(cfg, out)
        return cmd_toy(cfg, out, args.replicas)
    except UsageError as e:
        print(f"lobchain: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
