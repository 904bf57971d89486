"""Command-line entry point: ``dispersion-control {run,verify,spectrum}``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import BUNDLED, bundled_config, config_hash, load_document, parse_config
from .io import write_json, write_metrics_csv, write_trajectory_csv
from .sim import ConfigError, SimulationError, metrics, prepare, run
from .verify import format_report, verify_scenario

log = logging.getLogger("dispersion_control")


def _resolve_config_path(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    stem = p.stem if p.suffix == ".cfg" else name
    if stem in BUNDLED:
        return bundled_config(stem)
    raise FileNotFoundError(f"config {name!r} not found (bundled: {', '.join(BUNDLED)})")


def _overrides(args) -> dict:
    return {
        "seed": args.seed,
        "mode": args.mode,
        "duration": args.duration,
        "log_every": args.log_every,
    }


def _load(args):
    path = _resolve_config_path(args.config)
    doc = load_document(path)
    doc.update({k: v for k, v in _overrides(args).items() if v is not None})
    return path, doc, parse_config(doc)


def cmd_run(args) -> int:
    path, doc, cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    sc = prepare(cfg)
    log.info("running %s: n=%d, mode=%s, h=%.3g, %d steps", path.name, cfg.n_agents, cfg.mode, sc.h, sc.n_steps)
    trace = run(sc)
    summary = metrics(trace)

    files = {"trajectory": out / "trajectory.csv", "metrics": out / "metrics.csv", "summary": out / "summary.json"}
    write_trajectory_csv(trace, files["trajectory"])
    write_metrics_csv(trace, files["metrics"])
    figures = []
    if not args.no_plots:
        from .plotting import render_report

        figures = render_report(trace, out)

    manifest = {
        "config_path": str(path),
        "config_hash": config_hash(doc),
        "seed": cfg.seed,
        "version": __version__,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "wall_seconds": time.perf_counter() - t0,
        "outputs": {k: str(v) for k, v in files.items()} | {"figures": [str(f) for f in figures]},
    }
    write_json({"metrics": summary, "manifest": manifest}, files["summary"])
    lam = summary["final_true_spectrum"]
    print(f"final spectrum ({lam[0]:.6g}, {lam[1]:.6g}), target ({cfg.target.lambda1_star:g}, {cfg.target.lambda2_star:g})")
    print(f"final |e_lambda| = {summary['final_e_norm']:.3e}, min distance = {summary['min_pairwise_distance']:.3e}")
    if cfg.mode == "centralized":
        print(f"max centroid drift = {summary['max_centroid_drift']:.3e}")
    print(f"wrote {out}")
    return 0


def cmd_verify(args) -> int:
    _, _, cfg = _load(args)
    sc = prepare(cfg)
    checks = verify_scenario(sc)
    print(format_report(checks))
    ok = all(c.passed for c in checks)
    print("OVERALL:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_spectrum(args) -> int:
    _, _, cfg = _load(args)
    sc = prepare(cfg)
    from .graph import spectral_summary

    s = spectral_summary(sc.graph)
    np.set_printoptions(precision=6, suppress=True, linewidth=100)
    print(f"vertices: {sc.graph.n_vertices}, edges: {sc.graph.n_edges}")
    if sc.graph_radius is not None:
        print(f"geometric radius used: {sc.graph_radius:.6g}")
    print(f"algebraic connectivity: {s.algebraic_connectivity:.6g}")
    print(f"spectral radius: {s.spectral_radius:.6g}")
    print("laplacian eigenvalues:")
    print(s.laplacian_eigenvalues)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dispersion-control", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="scenario file, or a bundled name: " + ", ".join(BUNDLED))
        sp.add_argument("--seed", type=int)
        sp.add_argument("--mode", choices=("centralized", "distributed"))
        sp.add_argument("--duration", type=float)
        sp.add_argument("--log-every", type=int)

    r = sub.add_parser("run", help="simulate and write CSV, JSON and figures")
    common(r)
    r.add_argument("--out", required=True)
    r.add_argument("--no-plots", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run the invariant suite on a scenario")
    common(v)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("spectrum", help="print the Laplacian spectrum of the scenario graph")
    common(s)
    s.set_defaults(func=cmd_spectrum)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SimulationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
