"""Command line entry point: ``dagfault {run,rank,causal,report,synth}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 stage failure.
The log level comes from the ``DAGFAULT_LOG`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_STAGE = 0, 2, 3, 4

log = logging.getLogger("dagfault")


def _setup_logging():
    level = os.environ.get("DAGFAULT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _config(args):
    from .config import load_config

    cfg = load_config(args.config)
    return cfg.override(seed=args.seed, threads=args.threads, subset_size=getattr(args, "subset_size", None),
                        output=args.out)


def cmd_run(args):
    from .pipeline import run_pipeline

    cfg = _config(args)
    b = run_pipeline(cfg)
    print(f"wrote {cfg['output']}: {b.n_summaries()} metric summaries, {len(b.graphs)} graphs"
          + (f", failed: {', '.join(sorted(b.failures))}" if b.failures else ""))


def cmd_rank(args):
    from .pipeline import load_data, shap_ranking
    from .reporting import _json, _write, ranking_svg

    cfg = _config(args)
    ranking = shap_ranking(load_data(cfg), cfg)
    out = Path(cfg["output"])
    _write(out / "ranking.json", _json({"model": cfg.shap_model, **ranking.to_dict()}))
    _write(out / "ranking.svg", ranking_svg(ranking.items))
    for fid, v in ranking.items[:15]:
        print(f"{fid:10s} {v:.5f}")


def _load_ranking(path):
    from .attribution import Ranking

    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as err:
        from .exceptions import DataError
        raise DataError(f"cannot read ranking {path}: {err.strerror}") from None
    return Ranking(tuple((i["id"], float(i["importance"])) for i in d["ranking"]))


def cmd_causal(args):
    from .pipeline import ReportBundle, load_data, run_causal
    from .reporting import _json, _write, export_dot

    cfg = _config(args)
    ds = load_data(cfg)
    ranking = _load_ranking(args.ranking or Path(cfg["output"]) / "ranking.json")
    b = ReportBundle(cfg.seed, ds.n_samples, ds.n_variables, cfg["cv"]["mode"])
    run_causal(ds, ranking, cfg, b)
    out = Path(cfg["output"])
    for name, g in b.graphs.items():
        _write(out / "graphs" / f"{name}.json", _json(g.to_dict()))
        export_dot(g, out / "graphs" / f"{name}.dot", name)
    if b.full_graph is not None:
        _write(out / "graphs" / "rfci_full.json", _json(b.full_graph.to_dict()))
        export_dot(b.full_graph, out / "graphs" / "rfci_full.dot", "rfci_full")
    if b.table is not None:
        _write(out / "consensus.json", _json({"min_count": b.min_count, "centrality": b.centrality,
                                              **b.table.to_dict()}))
        _write(out / "consensus.txt", b.table.to_text())
        export_dot(b.consensus, out / "consensus.dot", "consensus")
        print(b.table.to_text(), end="")
    for name, why in sorted(b.failures.items()):
        print(f"{name} failed: {why}", file=sys.stderr)


def cmd_report(args):
    from .reporting import rerender

    out = Path(args.out if args.out else Path(args.manifest).parent)
    rerender(out)
    print(f"re-rendered {out}")


def cmd_synth(args):
    from .causal.synth import sem_data
    from .dataset import Dataset, write_csv
    from .synthetic import tep_like

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.kind == "tep":
        ds, truth = tep_like(args.n, max(args.n // 10, 10), args.faults, seed=args.seed)
        meta = {"kind": "tep", "causes": {str(c): v for c, v in truth["causes"].items()},
                "edges": [[ds.ids[i], ds.ids[j], float(truth["W"][i, j])] for i, j in zip(*np.nonzero(truth["W"]))]}
    else:
        X, sem = sem_data(args.d, args.n, args.seed, edge_prob=2.0 / max(args.d - 1, 1),
                          weight_range=(0.5, 1.0))
        ds = Dataset.from_arrays(X, np.zeros(len(X), dtype=int))
        meta = {"kind": "sem", "order": [f"x{i}" for i in sem.order],
                "edges": [[f"x{i}", f"x{j}", float(sem.W[i, j])] for i, j in zip(*np.nonzero(sem.W))]}
    write_csv(ds, out)
    Path(str(out) + ".truth.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out} ({ds.n_samples} rows, {ds.n_variables} variables)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dagfault", description="Fault detection with Shapley ranking and causal graphs")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, subset=True):
        sp.add_argument("--config", required=True, help="pipeline YAML (or a run manifest)")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--seed", type=int, help="master seed (overrides config)")
        sp.add_argument("--threads", type=int, help="parallel workers; 1 is bit-reproducible")
        if subset:
            sp.add_argument("--subset-size", type=int, help="variables passed to causal discovery")

    common(sub.add_parser("run", help="run all stages"))
    common(sub.add_parser("rank", help="Shapley ranking only"), subset=False)
    sp = sub.add_parser("causal", help="causal graphs from a saved ranking")
    common(sp)
    sp.add_argument("--ranking", help="ranking.json (default: OUT/ranking.json)")
    sp = sub.add_parser("report", help="re-render DOT/SVG/table from a finished run")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--out", help="output directory of a finished run")
    g.add_argument("--manifest", help="manifest.json of a finished run")
    sp = sub.add_parser("synth", help="write a synthetic dataset")
    sp.add_argument("--kind", choices=["tep", "sem"], default="tep")
    sp.add_argument("--out", required=True, help="CSV path")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n", type=int, default=500, help="rows (normal rows for --kind tep)")
    sp.add_argument("--d", type=int, default=10, help="variables for --kind sem")
    sp.add_argument("--faults", type=int, default=4, help="fault classes for --kind tep")
    return p


COMMANDS = {"run": cmd_run, "rank": cmd_rank, "causal": cmd_causal, "report": cmd_report, "synth": cmd_synth}


def main(argv=None) -> int:
    from .exceptions import ConfigInvalid, DataError, IoError, StageFailed

    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except ConfigInvalid as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (StageFailed, IoError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
