"""CSV emission, the figure map and gnuplot script generation.

Every numeric field is written with 9 significant digits and ``\\n`` line
endings so identical runs give byte-identical files.  Missing values (for
example an empty residual bin) are written as empty fields.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .diagnostics import BIN_KINDS, bin_values
from .montecarlo import PERCENTILES, SHORT, McSummary

BAND_COLUMNS = ("t", "mean") + tuple(f"p{p:02d}" for p in PERCENTILES)
ESTIMATE_COLUMNS = ("replication", "outcome", "spec", "control", "t", "coef", "level")
RESIDUAL_COLUMNS = ("bin_kind", "bin", "censored", "mean_eps", "mean_eps_within", "count")
SELECTION_COLUMNS = ("t", "mean_alpha_s0", "mean_alpha_s1")


def fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return ""
    out = format(v, ".9g")
    return "0" if out == "-0" else out


def write_csv(path: Path, columns, rows, comment: str | None = None) -> Path:
    lines = []
    if comment is not None:
        lines.append(f"# {comment}")
    lines.append(",".join(columns))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    try:
        path.write_bytes(("\n".join(lines) + "\n").encode("ascii"))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def emit_outputs(summary: McSummary, out_dir, comment: str | None = None) -> list[Path]:
    """Write the full CSV set for one scenario into ``out_dir``.

    Returns the written paths in a fixed order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    t = np.arange(1, summary.tau_bar + 1)

    for name in sorted(summary.series):
        b = summary.band(name)
        rows = zip(t, b["mean"], *(b[c] for c in BAND_COLUMNS[2:]))
        written.append(write_csv(out / f"mc_summary_{name}.csv", BAND_COLUMNS, rows, comment))

    for form in ("linear", "saturated"):
        rows = [r[:1] + r[2:] for r in summary.estimates if r[1] == form]
        written.append(write_csv(out / f"estimates_{form}.csv", ESTIMATE_COLUMNS, rows, comment))

    s0 = summary.series["alpha_s0"].mean(axis=0)
    s1 = summary.series["alpha_s1"].mean(axis=0)
    written.append(write_csv(out / "dynamic_selection.csv", SELECTION_COLUMNS, zip(t, s0, s1), comment))

    for outcome in summary.residuals:
        prof = summary.pooled_residuals(outcome)
        rows = []
        for kind in BIN_KINDS:
            bins = bin_values(kind, summary.tau_bar)
            eps = prof.mean(kind, "eps")
            eps_w = prof.mean(kind, "eps_within")
            cnt = prof.counts[kind]
            for i, b in enumerate(bins):
                for c in (0, 1):
                    rows.append((kind, b, c, eps[i, c], eps_w[i, c], cnt[i, c]))
        written.append(write_csv(out / f"residuals_{outcome}.csv", RESIDUAL_COLUMNS, rows, comment))

    names = sorted(summary.scalars)
    rows = ([k] + [summary.scalars[n][k] for n in names] for k in range(summary.k))
    written.append(write_csv(out / "replication_scalars.csv", ["replication", *names], rows, comment))
    return written


def figure_for(filename: str, kind: str) -> str:
    """Figure analogue reproduced from one CSV file."""
    sim1 = kind == "sim1"
    if filename == "dynamic_selection.csv" or filename.startswith("mc_summary_alpha_"):
        return "Figure B2 (dynamic selection)" if sim1 else "Figure C1 (dynamic selection)"
    if filename.startswith(("mc_summary_structural_", "mc_summary_empirical_")):
        return "Figure B1 (structural vs empirical profiles)" if sim1 else "Figure 1 (structural vs empirical profiles)"
    if filename.startswith("mc_summary_profile_ols_proxy_"):
        return "Figure C3 (noisy heterogeneity proxy)"
    if filename.startswith("mc_summary_profile_") or filename == "estimates_saturated.csv":
        if sim1:
            return "Figure B3 (saturated OLS, OLS+alpha, FE)"
        return "Figure 2 (saturated OLS, OLS+alpha, FE); Figure C3 (proxy rows)"
    if filename == "estimates_linear.csv":
        return "linear specification, no figure" if sim1 else "Figure C2 (linear OLS, OLS+alpha, FE)"
    if filename.startswith("residuals_"):
        return "Figure B4 (within residuals)" if sim1 else "Figure C4 (within residuals)"
    if filename == "replication_scalars.csv":
        return "per-replication slopes and bias terms, no figure"
    raise ValueError(f"no figure mapping for {filename}")


def write_figure_map(root, entries, kind: str) -> Path:
    """``entries`` are CSV paths relative to ``root``; each is listed once."""
    rel = [str(Path(e).as_posix()) for e in entries]
    if len(set(rel)) != len(rel):
        raise ValueError("duplicate CSV in figure map")
    lines = [f"{r}\t{figure_for(Path(r).name, kind)}" for r in rel]
    path = Path(root) / "figure_map.txt"
    path.write_bytes(("\n".join(lines) + "\n").encode("ascii"))
    return path


# gnuplot scripts ----------------------------------------------------------

_HEADER = """set terminal pngcairo size {w},{h}
set output '{png}'
set datafile separator ','
set key top left
set xlabel 'duration t'
"""

_TITLES = {"y": "exit indicator", "A": "applications", "c": "callback rate", "C": "callbacks"}


def _bands(csv: str) -> str:
    return (
        f"'{csv}' skip 2 using 1:3:8 with filledcurves lc rgb '#e8e8e8' title 'p01-p99', \\\n"
        f"     '{csv}' skip 2 using 1:4:7 with filledcurves lc rgb '#d0d0d0' title 'p05-p95', \\\n"
        f"     '{csv}' skip 2 using 1:5:6 with filledcurves lc rgb '#b8b8b8' title 'p10-p90'"
    )


def _filtered(outcome: str, spec: str) -> str:
    return (f"'estimates_saturated.csv' skip 2 using 5:((strcol(2) eq '{outcome}' && strcol(3) eq '{spec}') "
            f"? $7 : 1/0) smooth unique")


def _script_profiles(png, outcomes):
    s = [_HEADER.format(w=500 * len(outcomes), h=450, png=png), f"set multiplot layout 1,{len(outcomes)}"]
    for o in outcomes:
        so = SHORT[o]
        s.append(f"set title '{_TITLES[so]}'")
        s.append(f"plot {_bands(f'mc_summary_empirical_{so}.csv')}, \\\n"
                 f"     'mc_summary_structural_{so}.csv' skip 2 using 1:2 with lines lw 2 dt 1 lc rgb 'black' title 'structural', \\\n"
                 f"     'mc_summary_empirical_{so}.csv' skip 2 using 1:2 with lines lw 2 dt 2 lc rgb 'black' title 'empirical'")
    s.append("unset multiplot")
    return s


def _script_saturated(png, outcomes, specs):
    s = [_HEADER.format(w=500 * len(outcomes), h=450, png=png), f"set multiplot layout 1,{len(outcomes)}"]
    styles = {"OLS": "dt 3 lc rgb '#1f77b4'", "OLS+alpha": "dt 4 lc rgb '#2ca02c'", "FE": "dt 2 lc rgb '#d62728'"}
    for o in outcomes:
        so = SHORT[o]
        s.append(f"set title '{_TITLES[so]}'")
        parts = [_bands(f"mc_summary_profile_fe_{so}.csv"),
                 f"'mc_summary_structural_{so}.csv' skip 2 using 1:2 with lines lw 2 dt 1 lc rgb 'black' title 'structural'"]
        for spec in specs:
            style = styles.get(spec, "dt 5 lc rgb '#9467bd'")
            parts.append(f"{_filtered(o, spec)} with linespoints lw 2 {style} title '{spec}'")
        s.append("plot " + ", \\\n     ".join(parts))
    s.append("unset multiplot")
    return s


def _script_selection(png):
    return [_HEADER.format(w=600, h=450, png=png),
            "set ylabel 'mean alpha'",
            "plot 'dynamic_selection.csv' skip 2 using 1:2 with lines lw 2 dt 1 lc rgb 'black' title 'S0', \\\n"
            "     'dynamic_selection.csv' skip 2 using 1:3 with lines lw 2 dt 2 lc rgb 'black' title 'S1'"]


def _script_linear(png, outcomes):
    s = [_HEADER.format(w=500 * len(outcomes), h=450, png=png), f"set multiplot layout 1,{len(outcomes)}",
         "set xlabel 'specification (1 OLS, 2 OLS+alpha, 3 FE)'", "set xrange [0.5:3.5]"]
    for o in outcomes:
        s.append(f"set title 'linear slope draws: {_TITLES[SHORT[o]]}'")
        s.append("plot 'estimates_linear.csv' skip 2 using "
                 f"((strcol(2) eq '{o}' && $5 == 0) ? (strcol(3) eq 'OLS' ? 1 : strcol(3) eq 'OLS+alpha' ? 2 : "
                 "strcol(3) eq 'FE' ? 3 : 1/0) : 1/0):6 with points pt 7 ps 0.4 title 'replications'")
    s.append("unset multiplot")
    return s


def _script_residuals(png, outcomes):
    s = [_HEADER.format(w=1000, h=400 * len(outcomes), png=png), f"set multiplot layout {len(outcomes)},2",
         "set ylabel 'mean within residual'"]
    for o in outcomes:
        csv = f"residuals_{o}.csv"
        for kind, label in (("within_time", "within time t - mean(t)"), ("lead", "t - T_i")):
            s.append(f"set title '{_TITLES[SHORT[o]]}: {label}'")
            s.append(f"plot '{csv}' skip 2 using 2:((strcol(1) eq '{kind}' && $3 == 0) ? $5 : 1/0) "
                     "with linespoints lw 2 lc rgb 'black' title 'non-censored', \\\n"
                     f"     '{csv}' skip 2 using 2:((strcol(1) eq '{kind}' && $3 == 1) ? $5 : 1/0) "
                     "with linespoints lw 2 dt 2 lc rgb 'gray' title 'censored'")
    s.append("unset multiplot")
    return s


def plot_script_texts(kind: str, outcomes, proxy_specs=()) -> dict[str, tuple[str, ...]]:
    """Script name -> (script text, CSV files it reads...)."""
    base = ("OLS", "OLS+alpha", "FE")
    if kind == "sim1":
        names = {"figB1": "figB1", "figB2": "figB2", "figB3": "figB3", "figB4": "figB4"}
    else:
        names = {"figB1": "fig1", "figB2": "figC1", "figB3": "fig2", "figB4": "figC4"}
    so = [SHORT[o] for o in outcomes]
    scripts = {
        names["figB1"]: (_script_profiles(names["figB1"] + ".png", outcomes),
                         [f"mc_summary_{w}_{x}.csv" for x in so for w in ("empirical", "structural")]),
        names["figB2"]: (_script_selection(names["figB2"] + ".png"), ["dynamic_selection.csv"]),
        names["figB3"]: (_script_saturated(names["figB3"] + ".png", outcomes, base),
                         ["estimates_saturated.csv"] + [f"mc_summary_profile_fe_{x}.csv" for x in so]),
        names["figB4"]: (_script_residuals(names["figB4"] + ".png", outcomes),
                         [f"residuals_{o}.csv" for o in outcomes]),
    }
    if kind == "sim2":
        scripts["figC2"] = (_script_linear("figC2.png", outcomes), ["estimates_linear.csv"])
        if proxy_specs:
            scripts["figC3"] = (_script_saturated("figC3.png", outcomes, ("OLS+alpha",) + tuple(proxy_specs)),
                                ["estimates_saturated.csv"] + [f"mc_summary_profile_fe_{x}.csv" for x in so])
    return {k: ("\n".join(v[0]) + "\n", *v[1]) for k, v in scripts.items()}


def emit_plot_scripts(out_dir, kind: str, outcomes, proxy_specs=()) -> list[Path]:
    """Write one gnuplot script per figure analogue into ``out_dir``.

    Raises
    ------
    FileNotFoundError
        If a CSV the scripts read is not present.
    """
    out = Path(out_dir)
    written = []
    for name, (text, *csvs) in plot_script_texts(kind, outcomes, proxy_specs).items():
        missing = [c for c in csvs if not (out / c).is_file()]
        if missing:
            raise FileNotFoundError(f"{name}.gp needs missing CSV(s): {', '.join(missing)}")
        path = out / f"{name}.gp"
        path.write_bytes(text.encode("ascii"))
        written.append(path)
    return written
