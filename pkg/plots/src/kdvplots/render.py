"""The four figure kinds rendered from exported plot data.

bands         two-column segment diagram of the Sigma_1 / Sigma_2 bands
              of both backgrounds on the imaginary axis
coefficients  |rho| and arg rho over the real axis beside |r1|, |r2|
              over the upper bands
residuals     one heat strip per named residual series, log10 colors
profiles      overlay of the two closed-form background profiles

Side colors follow the band diagrams' convention: left background
blue, right background red.  Rendering is deterministic for identical
inputs: headless Agg backend, pinned font/figure parameters, and fixed
PNG metadata, so repeated renders are byte-identical.  Inputs are only
ever read.
"""

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg", force=True)

import matplotlib.pyplot as plt
import numpy as np

from kdvplots.data import SpecError, Table, read_table

__all__ = ["KINDS", "PlotSpec", "SpecError", "Style", "build_figure",
           "plot_spec", "render", "segment_layout"]

KINDS = ("bands", "coefficients", "residuals", "profiles")

_INPUTS = {
    "bands": ("bands.csv",),
    "coefficients": ("reflection_real.csv", "reflection_bands.csv"),
    "residuals": ("residuals.csv",),
    "profiles": ("profiles.csv",),
}

# everything that feeds text layout is pinned; fonts ship with matplotlib
_RC = {
    "font.family": "DejaVu Sans",
    "font.size": 10.0,
    "axes.titlesize": 10.0,
    "axes.labelsize": 10.0,
    "legend.fontsize": 9.0,
    "xtick.labelsize": 9.0,
    "ytick.labelsize": 9.0,
    "figure.dpi": 100.0,
    "text.usetex": False,
    "path.simplify": False,
}


@dataclass(frozen=True)
class Style:
    dpi: int = 150
    left_color: str = "#1f77b4"   # left background: blue
    right_color: str = "#d62728"  # right background: red


@dataclass(frozen=True)
class PlotSpec:
    """One figure: input files by schema name, kind tag, output path."""

    kind: str
    inputs: dict
    output: Path
    style: Style = field(default_factory=Style)


def plot_spec(kind, data_dir, out_dir, style=None) -> PlotSpec:
    """Spec for one kind using the documented export layout."""
    if kind not in KINDS:
        raise SpecError(f"unknown figure kind {kind!r} "
                        f"(kinds: {', '.join(KINDS)})")
    data_dir = Path(data_dir)
    return PlotSpec(kind=kind,
                    inputs={name: data_dir / name for name in _INPUTS[kind]},
                    output=Path(out_dir) / f"{kind}.png",
                    style=style or Style())


def build_figure(spec: PlotSpec):
    """The fully drawn matplotlib figure for one spec.

    Raises SpecError for an unknown kind or a missing file or column;
    an empty data series is skipped with a warning instead of failing.
    The caller owns the figure (render() writes and closes it).
    """
    if spec.kind not in KINDS:
        raise SpecError(f"unknown figure kind {spec.kind!r} "
                        f"(kinds: {', '.join(KINDS)})")
    tables = {name: read_table(path) for name, path in spec.inputs.items()}
    with plt.rc_context(_RC):
        return _BUILDERS[spec.kind](tables, spec.style)


def render(spec: PlotSpec) -> Path:
    """Render one figure to spec.output and return the written path."""
    fig = build_figure(spec)
    try:
        out = Path(spec.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        with plt.rc_context(_RC):
            fig.savefig(out, dpi=spec.style.dpi, format="png",
                        metadata={"Software": "kdvplots"})
    finally:
        plt.close(fig)
    return out


def segment_layout(table: Table) -> dict:
    """Band segments per side, sorted by lower end: (band, lo, hi)."""
    sides = table.column("side", numeric=False)
    names = table.column("band", numeric=False)
    los, his = table.column("im_lo"), table.column("im_hi")
    layout = {"left": [], "right": []}
    for side, name, lo, hi in zip(sides, names, los, his):
        if side not in layout:
            raise SpecError(f"{table.path.name}: unknown side {side!r}")
        layout[side].append((name, float(lo), float(hi)))
    for segs in layout.values():
        segs.sort(key=lambda seg: seg[1])
    return layout


def _skip(kind, series):
    warnings.warn(f"{kind}: empty series {series!r}; skipped", stacklevel=3)


def _build_bands(tables, style):
    table = tables["bands.csv"]
    layout = segment_layout(table)
    fig, ax = plt.subplots(figsize=(4.2, 4.6))
    for side, xc, color in (("left", 0.0, style.left_color),
                            ("right", 1.0, style.right_color)):
        segs = layout[side]
        if not segs:
            _skip("bands", side)
            continue
        for name, lo, hi in segs:
            ax.plot([xc, xc], [lo, hi], color=color, lw=7.0,
                    solid_capstyle="butt")
            ax.annotate(name, (xc, 0.5 * (lo + hi)),
                        xytext=(8.0, 0.0), textcoords="offset points",
                        va="center", fontsize=9.0, color=color)
    ax.axhline(0.0, color="0.55", lw=0.8, ls="--")
    ax.set_xlim(-0.7, 1.9)
    ax.set_xticks([0.0, 1.0])
    ax.set_xticklabels(["left", "right"])
    ax.set_ylabel("Im lambda")
    pattern = table.meta.get("pattern", "")
    ax.set_title(f"band configuration ({pattern})" if pattern
                 else "band configuration")
    fig.tight_layout()
    return fig


def _build_coefficients(tables, style):
    real, bands = (tables["reflection_real.csv"],
                   tables["reflection_bands.csv"])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.6))
    lam = real.column("lam")
    for name, color, ls in (("abs_rho", "0.15", "-"),
                            ("arg_rho", "0.55", "--")):
        vals = real.column(name)
        keep = ~np.isnan(vals)
        if not keep.any():
            _skip("coefficients", name)
            continue
        ax1.plot(lam[keep], vals[keep], color=color, ls=ls, lw=1.3,
                 label=name)
    ax1.axhline(0.0, color="0.85", lw=0.6, zorder=0)
    ax1.set_xlabel(real.columns[0])
    ax1.set_title("reflection on the real axis")
    if ax1.get_legend_handles_labels()[0]:
        ax1.legend(loc="upper right")
    lam_im = bands.column("lam_im")
    for name, color in (("abs_r1", style.left_color),
                        ("abs_r2", style.right_color)):
        vals = bands.column(name)
        keep = ~np.isnan(vals)
        if not keep.any():
            _skip("coefficients", name)
            continue
        ax2.plot(lam_im[keep], vals[keep], color=color, marker="o",
                 ms=4.0, ls="none", label=name)
    ax2.set_xlabel(bands.columns[0])
    ax2.set_title("band reflection coefficients")
    if ax2.get_legend_handles_labels()[0]:
        ax2.legend(loc="upper right")
    fig.tight_layout()
    return fig


def _build_residuals(tables, style):
    table = tables["residuals.csv"]
    series = table.column("series", numeric=False)
    pos = table.column("position")
    res = table.column("residual")
    names = list(dict.fromkeys(series))
    fig, ax = plt.subplots(
        figsize=(7.2, 1.4 + 0.45 * max(len(names), 1)))
    drawn = None
    for i, name in enumerate(names):
        mask = np.array([s == name for s in series])
        p, r = pos[mask], res[mask]
        keep = ~(np.isnan(p) | np.isnan(r))
        if not keep.any():
            _skip("residuals", name)
            continue
        p, r = p[keep], r[keep]
        span = p.max() - p.min()
        xn = (p - p.min()) / span if span > 0 else np.full(p.shape, 0.5)
        drawn = ax.scatter(xn, np.full(p.shape, float(i)),
                           c=np.log10(np.clip(r, 1e-18, None)),
                           cmap="viridis", vmin=-18.0, vmax=0.0,
                           marker="s", s=95.0)
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names, fontsize=8.0)
    ax.set_ylim(-0.7, len(names) - 0.3)
    ax.invert_yaxis()
    ax.set_xlabel("position (normalized per series)")
    ax.set_title("verification residuals")
    if drawn is not None:
        fig.colorbar(drawn, ax=ax, label="log10 residual")
    fig.tight_layout()
    return fig


def _build_profiles(tables, style):
    table = tables["profiles.csv"]
    x = table.column("x")
    fig, ax = plt.subplots(figsize=(6.8, 3.4))
    ut = table.column("u_theta")
    keep = ~(np.isnan(x) | np.isnan(ut))
    if keep.any():
        for mask, color, label in ((keep & (x < 0), style.left_color,
                                    "u_theta (left)"),
                                   (keep & (x >= 0), style.right_color,
                                    "u_theta (right)")):
            if mask.any():
                ax.plot(x[mask], ut[mask], color=color, lw=1.6, label=label)
    else:
        _skip("profiles", "u_theta")
    ud = table.column("u_dn")
    keep = ~(np.isnan(x) | np.isnan(ud))
    if keep.any():
        ax.plot(x[keep], ud[keep], color="0.1", lw=0.8, ls="--",
                label="u_dn")
    else:
        _skip("profiles", "u_dn")
    ax.set_xlabel(table.columns[0])
    ax.set_ylabel("u0")
    ax.set_title("background profiles (dual closed forms)")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="upper right")
    fig.tight_layout()
    return fig


_BUILDERS = {
    "bands": _build_bands,
    "coefficients": _build_coefficients,
    "residuals": _build_residuals,
    "profiles": _build_profiles,
}
