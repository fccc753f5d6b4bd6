"""Evaluation reports as schema-versioned JSON or an aligned text table.

The table has one block per feature set with a Training and a Validation
line and one column per tier-1 classifier, followed by the stacked result.
"""

import json
from pathlib import Path

REPORT_SCHEMA = 1
COLUMN_NAMES = {"rf": "RF", "et": "ET", "gbt": "GBT", "svm": "SVM"}


class ReportError(ValueError):
    pass


def _cell(value):
    return "-" if value is None else f"{value:.4f}"


def format_table(report):
    kinds = report["classifiers"]
    features = []
    for r in report["results"]:
        if r["feature"] not in features:
            features.append(r["feature"])
    acc = {(r["feature"], r["classifier"]): r for r in report["results"]}
    feat_w = max([len("Feature")] + [len(f) for f in features])
    header = [f"{'Feature':<{feat_w}}", f"{'Split':<10}"] + [f"{COLUMN_NAMES.get(k, k):>7}" for k in kinds]
    lines = ["  ".join(header).rstrip(), "  ".join(["-" * feat_w, "-" * 10] + ["-" * 7] * len(kinds))]
    for f in features:
        for i, (split, key) in enumerate((("Training", "train"), ("Validation", "validation"))):
            label = f if i == 0 else ""
            cells = [f"{_cell(acc[(f, k)][key] if (f, k) in acc else None):>7}" for k in kinds]
            lines.append("  ".join([f"{label:<{feat_w}}", f"{split:<10}"] + cells).rstrip())
    st = report.get("stacked")
    if st:
        lines.append("")
        lines.append(f"Stacked ({st['mode']}, {len(st['bases'])} bases, {st['folds']} folds, logistic regression)")
        lines.append(f"  {'Training':<10}  {_cell(st['train']):>7}")
        lines.append(f"  {'Validation':<10}  {_cell(st['validation']):>7}")
    return "\n".join(lines) + "\n"


def export_report(report, format="json", path=None):
    """Render ``report`` as ``json`` or ``table``; write to ``path`` if given."""
    if format == "json":
        text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    elif format == "table":
        text = format_table(report)
    else:
        raise ReportError(f"unknown report format {format!r}")
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    return text


def load_report(path):
    report = json.loads(Path(path).read_text(encoding="utf-8"))
    if report.get("schema_version") != REPORT_SCHEMA:
        raise ReportError(f"{path}: unsupported report schema {report.get('schema_version')}")
    return report
