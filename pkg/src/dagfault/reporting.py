"""Report artifacts: metric JSON, ranking chart, graph DOT/JSON, consensus files, manifest."""

from __future__ import annotations

import json
import platform
from html import escape
from importlib import resources
from pathlib import Path

import jsonschema

from .causal.graph import MixedGraph
from .evaluation import MetricSummary, format_table
from .exceptions import IoError

SVG_TOP = 15


def versions() -> dict:
    import joblib
    import numpy
    import scipy
    import sklearn

    return {"python": platform.python_version(), "numpy": numpy.__version__, "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__, "joblib": joblib.__version__}


def report_schema() -> dict:
    return json.loads(resources.files("dagfault.data").joinpath("report.schema.json").read_text("utf-8"))


def _write(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as err:
        raise IoError(f"cannot write {path}: {err.strerror}") from err


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def export_dot(g: MixedGraph, path, name=None):
    _write(path, g.to_dot(name or Path(path).stem))


def ranking_svg(items, top=SVG_TOP, title="Mean |SHAP value|") -> str:
    """Horizontal bar chart of the ``top`` most important features, largest first."""
    items = sorted(items, key=lambda kv: (-kv[1], kv[0]))[:top]
    bar_h, gap, left, width = 18, 6, 110, 360
    height = 40 + len(items) * (bar_h + gap)
    vmax = max((v for _, v in items), default=0.0) or 1.0
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{left + width + 80}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<text x="{left}" y="20" font-weight="bold">{escape(title)}</text>']
    for k, (fid, v) in enumerate(items):
        y = 32 + k * (bar_h + gap)
        w = width * v / vmax
        out.append(f'<text x="{left - 6}" y="{y + 13}" text-anchor="end">{escape(fid)}</text>')
        out.append(f'<rect x="{left}" y="{y}" width="{w:.1f}" height="{bar_h}" fill="#4477aa"/>')
        out.append(f'<text x="{left + w + 4:.1f}" y="{y + 13}">{v:.4f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _summary(d) -> MetricSummary:
    return MetricSummary(d["mean"], d["std"], d["n_folds"])


def metrics_table(report: dict) -> str:
    rows = [(k, report["n_variables"], _summary(s)) for k, s in report["baseline"].items()]
    for m, per_kind in report["subsets"].items():
        rows += [(k, int(m), _summary(s)) for k, s in per_kind.items()]
    return format_table(rows)


def render(report: dict, out) -> None:
    """Derived artifacts (table, chart, DOT files) from a report dictionary."""
    out = Path(out)
    _write(out / "metrics" / "table.txt", metrics_table(report))
    items = [(i["id"], i["importance"]) for i in report["ranking"]["items"]]
    _write(out / "ranking.svg", ranking_svg(items))
    causal = report["causal"]
    for name, gd in causal["graphs"].items():
        export_dot(MixedGraph.from_dict(gd), out / "graphs" / f"{name}.dot", name)
    if causal.get("full_graph"):
        export_dot(MixedGraph.from_dict(causal["full_graph"]), out / "graphs" / "rfci_full.dot", "rfci_full")
    if report["consensus"]["graph"]:
        export_dot(MixedGraph.from_dict(report["consensus"]["graph"]), out / "consensus.dot", "consensus")


def export_report(bundle, out) -> None:
    """Write every artifact of a run to ``out``."""
    out = Path(out)
    report = bundle.report_dict()
    jsonschema.validate(report, report_schema())
    for kind, s in bundle.baseline.items():
        _write(out / "metrics" / f"baseline_{kind}.json", s.to_json() + "\n")
    for m, per_kind in bundle.subsets.items():
        for kind, s in per_kind.items():
            _write(out / "metrics" / f"top{m}_{kind}.json", s.to_json() + "\n")
    for key, table in bundle.searches.items():
        kind, width = key.split("@")
        rows = [{"spec": spec, "score": score if score != float("-inf") else None} for spec, score in table]
        _write(out / "metrics" / f"search_{kind}_{width}.json", _json(rows))
    if bundle.ranking is not None:
        _write(out / "ranking.json", _json({"model": bundle.shap_model, **bundle.ranking.to_dict()}))
    for name, g in bundle.graphs.items():
        _write(out / "graphs" / f"{name}.json", _json(g.to_dict()))
    if bundle.full_graph is not None:
        _write(out / "graphs" / "rfci_full.json", _json(bundle.full_graph.to_dict()))
    if bundle.table is not None:
        _write(out / "consensus.json", _json({"min_count": bundle.min_count, "centrality": bundle.centrality,
                                              **bundle.table.to_dict()}))
        _write(out / "consensus.txt", bundle.table.to_text())
    _write(out / "report.json", _json(report))
    _write(out / "manifest.json", _json(bundle.manifest))
    _write(out / "timings.txt", "".join(f"{k}\t{v:.3f}s\n" for k, v in bundle.timings.items()))
    render(report, out)


def rerender(out) -> None:
    """Rebuild derived artifacts from ``report.json`` in an existing output directory."""
    path = Path(out) / "report.json"
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except OSError as err:
        raise IoError(f"cannot read {path}: {err.strerror}") from err
    jsonschema.validate(report, report_schema())
    render(report, out)
