"""Deterministic figure rendering from experiment CSV tables.

Figures carry the config hash from the CSV comment line in a footer and
embed no timestamps; rendering never alters or reorders data, and every
image gets a .data.json sidecar echoing the input rows verbatim.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .schemas import Table, load_table

_STYLE = {
    "figure.figsize": (7.0, 4.2),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "fracwick-plots",
}


def _footer(fig, table: Table) -> None:
    if table.config_hash:
        fig.text(0.99, 0.01, f"config {table.config_hash}", ha="right", va="bottom",
                 fontsize=7, color="0.45")


def _render_convergence(table: Table, fig) -> None:
    ax_err, ax_defect = fig.subplots(1, 2)
    if table.rows:
        k = table.floats("K")
        err = table.floats("l1_error")
        se = table.floats("std_err")
        ax_err.errorbar(k, err, yerr=se, marker="o", capsize=3)
        ax_err.set_xscale("log", base=2)
        positive = [e for e in err if e > 0]
        if positive:
            ax_err.set_yscale("log")
        defect = table.floats("sigma_defect_phi")
        ax_defect.plot(defect, err, "o")
    ax_err.set_xlabel("K")
    ax_err.set_ylabel("mean absolute gap at T")
    ax_err.set_title("strong error vs truncation")
    ax_defect.set_xlabel("projection defect (kernel norm)")
    ax_defect.set_ylabel("mean absolute gap at T")
    ax_defect.set_title("error vs defect")


def _render_bound(table: Table, fig) -> None:
    ax = fig.subplots()
    if table.rows:
        labels = [f"p={p:g},K={int(k)}" for p, k in zip(table.floats("p"), table.floats("K"))]
        ratio = table.floats("ratio")
        xs = range(len(ratio))
        ax.bar(xs, ratio, color="#4878a8")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.axhline(1.0, color="crimson", lw=1.2, ls="--", label="bound")
    ax.set_ylabel("(lhs + CI) / rhs")
    ax.set_title("moment bound headroom")
    ax.legend()


def _render_fp(table: Table, fig) -> None:
    ax = fig.subplots()
    if table.rows:
        res = table.floats("residual")
        se = table.floats("std_err")
        xs = range(len(res))
        ax.errorbar(xs, res, yerr=[3 * s for s in se], fmt="o", capsize=4,
                    label="residual with 3 SE whiskers")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(table.column("testfn"), fontsize=9)
        ax.legend()
    ax.axhline(0.0, color="0.3", lw=1.0)
    ax.set_ylabel("weak-form residual")
    ax.set_title("distributional identity residuals")


def _render_gronwall(table: Table, fig) -> None:
    ax = fig.subplots()
    if table.rows:
        t = table.floats("t")
        ax.plot(t, table.floats("estimate"), marker="o", label="estimate")
        ax.plot(t, table.floats("envelope"), marker="", ls="--", label="envelope")
        ax.legend()
    ax.set_xlabel("t")
    ax.set_ylabel("inhomogeneity")
    ax.set_title("error-inequality inhomogeneity vs envelope")


_RENDERERS = {
    "convergence": _render_convergence,
    "bound": _render_bound,
    "fp": _render_fp,
    "gronwall": _render_gronwall,
}


def render(kind: str, csv_path: str | Path, out_path: str | Path) -> Path:
    """Render one figure kind from a CSV, writing the image and its
    data-echo sidecar; returns the sidecar path."""
    table = load_table(csv_path, kind)
    out = Path(out_path)
    with plt.rc_context(_STYLE):
        fig = plt.figure()
        _RENDERERS[kind](table, fig)
        _footer(fig, table)
        fig.tight_layout(rect=(0, 0.03, 1, 1))
        fig.savefig(out, metadata=_image_metadata(out))
        plt.close(fig)
    sidecar = out.with_suffix(".data.json")
    sidecar.write_text(
        json.dumps(
            {
                "kind": kind,
                "config_hash": table.config_hash,
                "columns": table.columns,
                "rows": table.rows,
            },
            indent=2,
        )
        + "\n"
    )
    return sidecar


def _image_metadata(out: Path) -> dict | None:
    suffix = out.suffix.lower()
    if suffix == ".svg":
        return {"Date": None}  # drop the creation timestamp
    if suffix == ".png":
        return {"Software": "fracwick-plots"}
    return None
