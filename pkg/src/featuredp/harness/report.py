"""CSV, JSON and SVG views of sweep results.

Before anything is written, each row's epsilon is recomputed from its stored
mechanism, and the mechanism is checked against the stored training config.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

from featuredp.errors import ConsistencyError, DomainError
from featuredp.harness.sweep import SweepResults
from featuredp.tradeoff.accountant import MechanismSpec, epsilon_for

FORMATS = ("csv", "json", "svg")
CSV_COLUMNS = ("epsilon_target", "delta", "method", "status", "utility_mean", "utility_std",
               "accounted_epsilon", "sigma", "clip", "sampling_prob", "steps", "hyperparameters")
_REL_TOL = 1e-9


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=_REL_TOL, abs_tol=1e-15)


def verify_row(row: dict) -> dict:
    """Return ``row`` with its epsilon recomputed; raise if the stored claim is inconsistent."""
    if row.get("status") != "ok":
        return row
    cfg, mech = row.get("config") or {}, row.get("mechanism")
    if row["method"] == "public-only":
        if row.get("accounted_epsilon") != 0.0:
            raise ConsistencyError(f"public-only row claims epsilon {row.get('accounted_epsilon')}")
        return row
    if mech is None:
        recomputed = math.inf
    else:
        spec = MechanismSpec(**mech)
        m = cfg["priv_batch_expected"]
        expected = {
            "sensitivity": cfg["clip"] / m,
            "sigma": cfg["sigma"],
            "sampling_prob": min(1.0, m / row["n_train"]),
            "steps": cfg["steps"],
        }
        for name, value in expected.items():
            if not _close(getattr(spec, name), value):
                raise ConsistencyError(
                    f"{row['method']} at epsilon {row['epsilon_target']}: stored mechanism {name} "
                    f"{getattr(spec, name)!r} disagrees with the config ({value!r})")
        recomputed = epsilon_for(spec, row["delta"])
    claimed = row.get("accounted_epsilon")
    if claimed is None or not (claimed == recomputed or _close(claimed, recomputed)):
        raise ConsistencyError(
            f"{row['method']} at epsilon {row['epsilon_target']}: stored epsilon {claimed!r} "
            f"but the config accounts to {recomputed!r}")
    return {**row, "accounted_epsilon": recomputed}


def _cell(row: dict, key: str) -> str:
    if key == "sigma":
        v = (row.get("config") or {}).get("sigma")
    elif key == "clip":
        v = (row.get("config") or {}).get("clip")
    elif key in ("sampling_prob", "steps"):
        v = (row.get("mechanism") or {}).get(key)
    elif key == "hyperparameters":
        v = json.dumps(row.get("hyperparameters"), sort_keys=True) if row.get("hyperparameters") is not None else ""
    else:
        v = row.get(key)
    if v is None:
        return ""
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def to_csv(results: SweepResults) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in results.rows:
        writer.writerow([_cell(row, k) for k in CSV_COLUMNS])
    return buf.getvalue()


def to_svg(results: SweepResults, width: int = 640, height: int = 420) -> str:
    """Static line plot of mean utility against target epsilon, one line per method."""
    ok = [r for r in results.rows if r.get("status") == "ok"]
    if not ok:
        raise DomainError("no successful rows to plot")
    xs = sorted({r["epsilon_target"] for r in ok})
    ys = [r["utility_mean"] for r in ok]
    left, right, top, bottom = 70, 150, 30, 60
    x_lo, x_hi = xs[0], xs[-1] if xs[-1] > xs[0] else xs[0] + 1.0
    y_lo, y_hi = min(ys), max(ys)
    if y_hi - y_lo < 1e-12:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    px = lambda x: left + (x - x_lo) / (x_hi - x_lo) * (width - left - right)
    py = lambda y: height - bottom - (y - y_lo) / (y_hi - y_lo) * (height - top - bottom)
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
        f'<text x="{(left + width - right) / 2:.1f}" y="{height - 15}" text-anchor="middle">target epsilon</text>',
        f'<text x="18" y="{(top + height - bottom) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {(top + height - bottom) / 2:.1f})">utility</text>',
    ]
    for x in xs:
        parts.append(f'<text x="{px(x):.1f}" y="{height - bottom + 18}" text-anchor="middle">{x:g}</text>')
    for i in range(5):
        y = y_lo + i * (y_hi - y_lo) / 4
        parts.append(f'<text x="{left - 6}" y="{py(y) + 4:.1f}" text-anchor="end">{y:.3f}</text>')
    methods = list(dict.fromkeys(r["method"] for r in ok))
    for i, method in enumerate(methods):
        color = palette[i % len(palette)]
        pts = sorted((r["epsilon_target"], r["utility_mean"]) for r in ok if r["method"] == method)
        coords = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3" fill="{color}"/>')
        ly = top + 18 * i
        parts.append(f'<line x1="{width - right + 15}" y1="{ly}" x2="{width - right + 35}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{width - right + 40}" y="{ly + 4}">{escape(method)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(results: SweepResults, fmt: str, path) -> Path:
    """Verify every row, then write ``results`` in ``fmt`` to ``path``."""
    if fmt not in FORMATS:
        raise DomainError(f"format must be one of {FORMATS}")
    if not results.rows:
        raise DomainError("results are empty")
    checked = SweepResults(tuple(verify_row(r) for r in results.rows))
    path = Path(path)
    if fmt == "csv":
        text = to_csv(checked)
    elif fmt == "json":
        text = json.dumps(checked.to_json(), indent=2, sort_keys=True) + "\n"
    else:
        text = to_svg(checked)
    path.write_text(text)
    return path
