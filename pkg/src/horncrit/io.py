"""
Plain-text output helpers: CSV tables, flat ``key=value`` config files and
single-metric SVG line charts.

CSV files use ``\\r\\n`` line endings, a mandatory header row and floats at
17 significant digits so that values round-trip exactly.
"""
from __future__ import annotations

import csv
import math

__all__ = ["format_value", "write_csv", "read_config", "parse_config", "dump_config",
           "line_plot_svg"]


def format_value(v) -> str:
    """Render one CSV cell; floats at 17 significant digits, ``.`` as decimal point."""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def write_csv(path, header, rows) -> None:
    """Write ``rows`` (sequences aligned with ``header``) as an RFC-4180 style table."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])


def parse_config(text: str) -> dict:
    """Parse flat ``key=value`` lines; ``#`` starts a comment, blank lines are skipped.

    Values stay strings; the caller owns conversion.

    >>> parse_config("l=1  # width\\nprofile = power\\n")
    {'l': '1', 'profile': 'power'}
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        out[key.strip()] = val.strip()
    return out


def read_config(path) -> dict:
    with open(path) as fh:
        return parse_config(fh.read())


def dump_config(cfg: dict) -> str:
    """Inverse of :func:`parse_config` for string-convertible values, keys sorted."""
    lines = []
    for key in sorted(cfg):
        v = cfg[key]
        if v is None:
            continue
        if isinstance(v, float):
            v = repr(v)
        elif isinstance(v, (list, tuple)):
            v = ",".join(format_value(x) if not isinstance(x, float) else repr(x) for x in v)
        v = str(v)
        if "#" in v or "\n" in v:
            raise ValueError(f"value for {key!r} cannot be stored in a config file")
        lines.append(f"{key}={v}")
    return "\n".join(lines) + "\n"


def line_plot_svg(path, labels, estimate, stderr, oracle=None, title="") -> None:
    """Estimate with one-stderr error bars (and oracle, when finite) on an 800x600 canvas.

    The output is reproducible: no timestamp and a fixed id salt.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = list(range(len(labels)))
    with matplotlib.rc_context({"svg.hashsalt": "horncrit", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(800 / 72, 600 / 72), dpi=72)
        se = [0.0 if math.isnan(s) else s for s in stderr]
        ax.errorbar(x, estimate, yerr=se, marker="o", capsize=3, label="estimate")
        if oracle is not None and any(math.isfinite(o) for o in oracle):
            ax.plot(x, [o if math.isfinite(o) else math.nan for o in oracle], "k--",
                    marker="x", label="oracle")
        ax.set_xticks(x)
        ax.set_xticklabels(labels)
        ax.set_title(title)
        ax.legend()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
