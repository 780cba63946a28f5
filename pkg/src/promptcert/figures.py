"""Render experiment reports as figures next to the CSV output."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

RC = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 130,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
}


def _finite(rows, attr):
    vals = [getattr(r, attr) for r in rows]
    return [v for v in vals if v is not None and v == v and v != float("inf")]


def _save(fig, out_dir: Path, name: str) -> Path:
    path = out_dir / f"{name}.png"
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def _bound_vs_test(rows, out_dir: Path) -> list[Path]:
    pts = [(r.pb_bound, r.uc_bound, r.test_err) for r in rows if r.test_err is not None]
    if not pts:
        return []
    fig, ax = plt.subplots()
    ax.scatter([p[2] for p in pts], [p[1] for p in pts], s=14, label="UC", alpha=0.7)
    ax.scatter([p[2] for p in pts], [p[0] for p in pts], s=14, label="PAC-Bayes", alpha=0.7)
    lim = max(_finite(rows, "uc_bound") + _finite(rows, "test_err") + [1.0])
    ax.plot([0, lim], [0, lim], "k--", linewidth=0.8, label="y = x")
    ax.set_xlabel("test error")
    ax.set_ylabel("bound")
    ax.legend()
    return [_save(fig, out_dir, "bound_vs_test")]


def _sweep_curves(rows, out_dir: Path, xlabel: str, name: str, key="frac") -> list[Path]:
    by_frac = defaultdict(list)
    for r in rows:
        by_frac[getattr(r, key)].append(r)
    xs = sorted(by_frac)
    mean = lambda vals: sum(vals) / len(vals) if vals else float("nan")
    train = [mean(_finite(by_frac[x], "train_err")) for x in xs]
    test = [mean(_finite(by_frac[x], "test_err")) for x in xs]
    pb = [mean(_finite(by_frac[x], "pb_bound")) for x in xs]
    fig, ax = plt.subplots()
    ax.plot(xs, train, "o-", label="train error")
    ax.plot(xs, test, "s-", label="test error")
    ax.plot(xs, pb, "^-", label="PAC-Bayes bound")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("error / bound")
    ax.legend()
    return [_save(fig, out_dir, name)]


def _validity_histogram(rows, out_dir: Path) -> list[Path]:
    gaps = [r.pb_bound - r.test_err for r in rows if r.test_err is not None]
    if not gaps:
        return []
    fig, ax = plt.subplots()
    ax.hist(gaps, bins=30)
    ax.axvline(0.0, color="k", linewidth=1.0)
    ax.set_xlabel("bound - test error")
    ax.set_ylabel("trials")
    return [_save(fig, out_dir, "validity_gap")]


_SWEEP_LABELS = {
    "label_flip": "flip probability",
    "data_subsample": "data fraction",
    "vocab_subsample": "vocabulary fraction",
    "length_sweep": "prompt length",
    "srm_compare": "beta",
    "prune_compare": "k (0 = full vocabulary)",
}


def render_figures(rows, kind: str, out_dir: str | Path) -> list[Path]:
    """Write the figures for one experiment kind; returns the created paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not rows:
        return []
    with plt.rc_context(RC):
        paths = []
        if kind == "grid":
            paths += _bound_vs_test(rows, out)
            max_frac = max(r.frac for r in rows)
            paths += _sweep_curves(
                [r for r in rows if r.frac == max_frac],
                out,
                f"prompt length (at split fraction {max_frac:g})",
                "grid_length_curves",
                key="l",
            )
        elif kind == "bound_validity":
            paths += _validity_histogram(rows, out)
        elif kind in _SWEEP_LABELS:
            paths += _sweep_curves(rows, out, _SWEEP_LABELS[kind], f"{kind}_sweep")
            paths += _bound_vs_test(rows, out)
        else:
            paths += _bound_vs_test(rows, out)
        return paths
