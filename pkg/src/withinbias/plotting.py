"""Matplotlib renders of the figure analogues, written next to the CSVs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .diagnostics import bin_values  # noqa: E402
from .montecarlo import SHORT, McSummary  # noqa: E402

TITLES = {"y": "exit indicator", "A": "applications", "c": "callback rate", "C": "callbacks"}
_BAND_ALPHA = ((1, 99, 0.15), (5, 95, 0.25), (10, 90, 0.35))
_STYLE = {"ols": ("OLS", ":", "tab:blue"), "ols_alpha": ("OLS+alpha", "-.", "tab:green"), "fe": ("FE", "--", "tab:red")}


def _bands(ax, summary: McSummary, name: str, color="gray"):
    b = summary.band(name)
    t = np.arange(1, summary.tau_bar + 1)
    for lo, hi, a in _BAND_ALPHA:
        ax.fill_between(t, b[f"p{lo:02d}"], b[f"p{hi:02d}"], color=color, alpha=a, lw=0, label=f"p{lo:02d}-p{hi:02d}")
    return t, b


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def _profiles(summary, outcomes, path):
    fig, axes = plt.subplots(1, len(outcomes), figsize=(5 * len(outcomes), 4), squeeze=False)
    for ax, o in zip(axes[0], outcomes):
        so = SHORT[o]
        t, b = _bands(ax, summary, f"empirical_{so}")
        ax.plot(t, summary.series[f"structural_{so}"].mean(axis=0), "k-", lw=2, label="structural")
        ax.plot(t, b["mean"], "k--", lw=2, label="empirical")
        ax.set(title=TITLES[so], xlabel="duration t")
        ax.legend(fontsize=7)
    return _save(fig, path)


def _saturated(summary, outcomes, path, slugs):
    fig, axes = plt.subplots(1, len(outcomes), figsize=(5 * len(outcomes), 4), squeeze=False)
    for ax, o in zip(axes[0], outcomes):
        so = SHORT[o]
        t = np.arange(1, summary.tau_bar + 1)
        if f"profile_fe_{so}" in summary.series:
            _bands(ax, summary, f"profile_fe_{so}", color="tab:red")
        ax.plot(t, summary.series[f"structural_{so}"].mean(axis=0), "k-", lw=2, label="structural")
        for slug in slugs:
            name = f"profile_{slug}_{so}"
            if name not in summary.series:
                continue
            label, ls, color = _STYLE.get(slug, (slug.replace("ols_proxy_", "proxy sd "), "-", None))
            ax.plot(t, summary.series[name].mean(axis=0), ls=ls, color=color, marker="o", ms=3, label=label)
        ax.set(title=TITLES[so], xlabel="duration t")
        ax.legend(fontsize=7)
    return _save(fig, path)


def _selection(summary, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    t = np.arange(1, summary.tau_bar + 1)
    ax.plot(t, summary.series["alpha_s0"].mean(axis=0), "k-", lw=2, label="S0")
    ax.plot(t, summary.series["alpha_s1"].mean(axis=0), "k--", lw=2, label="S1")
    ax.set(xlabel="duration t", ylabel="mean alpha")
    ax.legend()
    return _save(fig, path)


def _linear(summary, outcomes, path):
    fig, axes = plt.subplots(1, len(outcomes), figsize=(5 * len(outcomes), 4), squeeze=False)
    for ax, o in zip(axes[0], outcomes):
        so = SHORT[o]
        slugs = [s for s in ("ols", "ols_alpha", "fe") if f"slope_{s}_{so}" in summary.scalars]
        pos = np.arange(1, len(slugs) + 1)
        ax.boxplot([summary.scalars[f"slope_{s}_{so}"] for s in slugs], positions=pos)
        ax.set_xticks(pos, [_STYLE[s][0] for s in slugs])
        ax.axhline(np.mean(summary.scalars[f"structural_slope_{so}"]), color="k", lw=1, label="structural")
        ax.set(title=f"linear slope: {TITLES[so]}")
        ax.legend(fontsize=7)
    return _save(fig, path)


def _residuals(summary, outcomes, path):
    fig, axes = plt.subplots(len(outcomes), 2, figsize=(10, 3.5 * len(outcomes)), squeeze=False)
    for row, o in zip(axes, outcomes):
        prof = summary.pooled_residuals(o)
        for ax, kind, label in zip(row, ("within_time", "lead"), ("t - mean(t)", "t - T_i")):
            x = bin_values(kind, summary.tau_bar)
            m = prof.mean(kind)
            ax.plot(x, m[:, 0], "ko-", ms=3, label="non-censored")
            ax.plot(x, m[:, 1], "o--", color="gray", ms=3, label="censored")
            ax.axhline(0, color="k", lw=0.5)
            ax.set(title=f"{TITLES[SHORT[o]]}: {label}", ylabel="mean within residual")
            ax.legend(fontsize=7)
    return _save(fig, path)


def render_figures(summary: McSummary, out_dir, kind: str, outcomes, proxy_sds=()) -> list[Path]:
    """Render PNG analogues of every figure for one scenario."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if kind == "sim1":
        names = ("figB1", "figB2", "figB3", "figB4")
    else:
        names = ("fig1", "figC1", "fig2", "figC4")
    paths = [
        _profiles(summary, outcomes, out / f"{names[0]}.png"),
        _selection(summary, out / f"{names[1]}.png"),
        _saturated(summary, outcomes, out / f"{names[2]}.png", ("ols", "ols_alpha", "fe")),
        _residuals(summary, outcomes, out / f"{names[3]}.png"),
    ]
    if kind == "sim2":
        paths.append(_linear(summary, outcomes, out / "figC2.png"))
        if proxy_sds:
            slugs = ("ols_alpha",) + tuple(f"ols_proxy_{s:g}" for s in proxy_sds)
            paths.append(_saturated(summary, outcomes, out / "figC3.png", slugs))
    return paths
