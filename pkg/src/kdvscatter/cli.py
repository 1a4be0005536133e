"""Batch front end: scenario ingestion, pipeline orchestration, exports.

    scatter run <scenario.json> [--stages ...] [--out DIR] [--threads N]
    scatter validate <scenario.json>
    scatter export-plots <run-dir> [--out DIR]

The pipeline stages form the dependency chain

    background -> jost -> scattering -> reflection -> verification,

and a requested stage set must be closed under prerequisites.  Every
stage writes its artifacts (CSV with a one-line ``#`` header carrying
the scenario hash, JSON for reports) into the run directory and
contributes named checks to the RunReport; each enabled check appears
exactly once and is compared against the scenario's tolerance table,
which is echoed into the report for auditability.  All numeric exports
serialize floats with repr, so identical scenarios produce bit-identical
CSV files.

Exit codes: 0 all enabled checks pass, 2 at least one check failed,
3 invalid scenario or arguments, 4 numerical failure (stiffness, branch
tracking, or quadrature resolution), with the failing stage named.
"""

from __future__ import annotations

import argparse
import cmath
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .background import (
    kdv_residual,
    phase_state,
    u_dn_form,
    u_theta_form,
)
from .jost import ProximityError, StiffnessError, solve_J
from .reflection import (
    AsymptoticsError,
    BranchError,
    DegenerateFactorizationError,
    PhaseTheta,
    ResolutionError,
    build_cauchy_table,
    factor_a1a2,
    jump_matrix_X,
    jumps_to_csv,
    reconstruct_u,
    reflection_coeffs,
    reflection_to_csv,
    verify_M_jumps,
    JumpSample,
)
from .scattering import (
    SolitonsError,
    band_geometry,
    check_jump_relations,
    compute_ab,
    hat_factor,
    sample_scattering,
    verify_solitonless,
)
from .scenario import Scenario, ScenarioError
from .surface import MINUS, PLUS, ContourPoint

__all__ = [
    "CheckResult",
    "RunReport",
    "PipelineDependencyError",
    "ExportError",
    "load_scenario",
    "run_pipeline",
    "export_plot_data",
    "main",
    "STAGES",
    "OUT_ENV",
]

STAGES = ("background", "jost", "scattering", "reflection", "verification")
OUT_ENV = "KDVSCATTER_OUT"

NUMERICAL_ERRORS = (ProximityError, StiffnessError, SolitonsError,
                    ResolutionError, BranchError,
                    DegenerateFactorizationError, AsymptoticsError)

EXIT_OK = 0
EXIT_CHECK_FAILED = 2
EXIT_BAD_SCENARIO = 3
EXIT_NUMERICAL = 4


class PipelineDependencyError(ValueError):
    """A requested stage set is not closed under prerequisites."""


class ExportError(RuntimeError):
    """A plot-data export is missing one of its source artifacts."""


class StageError(RuntimeError):
    """Numerical failure wrapped with the stage that raised it."""

    def __init__(self, stage, exc):
        super().__init__(f"stage {stage}: {exc}")
        self.stage = stage
        self.cause = exc


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"{self.name:<24} residual={self.residual:.3e} "
                f"tolerance={self.tolerance:.1e} {flag}")


@dataclass
class RunReport:
    """Named check residuals, tolerances, pass flags, and stage timings."""

    scenario_hash: str
    checks: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def add(self, name: str, residual: float, tolerance: float) -> None:
        if any(c.name == name for c in self.checks):
            raise ValueError(f"check {name} reported twice")
        residual = float(residual)
        self.checks.append(CheckResult(name, residual, float(tolerance),
                                       residual <= tolerance))

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> str:
        return json.dumps({
            "scenario": self.scenario_hash,
            "kind": "run_report",
            "checks": [
                {"name": c.name, "residual": c.residual,
                 "tolerance": c.tolerance, "passed": c.passed}
                for c in self.checks
            ],
            "timings": {k: round(v, 3) for k, v in self.timings.items()},
            "tolerances": dict(self.tolerances),
        }, indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")


# -- scenario ingestion --------------------------------------------------------

def load_scenario(path) -> Scenario:
    """Read and validate a scenario JSON document.

    Raises ScenarioError naming the offending field (or the file problem)
    for any schema violation, shared band endpoints, or eta1 >= eta2.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file {path} is not valid JSON: {exc}")
    return Scenario.from_dict(doc)


# -- artifact helpers ----------------------------------------------------------

def _write_csv(path, scenario_hash, kind, columns, rows, extra=""):
    hdr = f"# scenario={scenario_hash} kind={kind}"
    if extra:
        hdr += " " + extra
    lines = [hdr, ",".join(columns)]
    lines += [",".join(row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def _r(x) -> str:
    return repr(float(x))


# -- pipeline stages -----------------------------------------------------------

def _stage_background(scn, out, report, state):
    rows = []
    dual = kdv = 0.0
    for x in np.linspace(-8.0, 8.0, 200):
        side = "left" if x < 0 else "right"
        s = scn.surface(side)
        st = phase_state(s, float(x), 0.0)
        ut, ud = u_theta_form(st, s), u_dn_form(st, s)
        res = abs(ut - ud)
        dual = max(dual, res)
        kdv = max(kdv, abs(kdv_residual(st, s)))
        rows.append((_r(x), _r(0.0), _r(ut), _r(ud), _r(res)))
    report.add("dual_form", dual, scn.tolerances["dual_form"])
    report.add("kdv_residual", kdv, scn.tolerances["kdv_residual"])
    _write_csv(out / "background_profiles.csv", scn.scenario_hash,
               "background_profiles",
               ("x", "t", "u_theta", "u_dn", "residual"), rows)


def _stage_jost(scn, out, report, state):
    t_left = 0.5 * (scn.left.eta1 + scn.left.eta2)
    t_right = 0.5 * (scn.right.eta1 + scn.right.eta2)
    probes = [("left", -1.1, ContourPoint(1.7)),
              ("left", 0.8, ContourPoint(-0.8)),
              ("right", 0.4, ContourPoint(2.9)),
              ("right", -0.6, ContourPoint(1j * t_right, PLUS)),
              ("left", 0.8, ContourPoint(1j * t_left, MINUS))]
    rows, det_res = [], 0.0
    for side, x, p in probes:
        jm = solve_J(side, x, p, scn)
        d = complex(np.linalg.det(jm.J))
        det_res = max(det_res, abs(d - 1.0))
        lam = complex(p.lam)
        row = [side, _r(x), _r(lam.real), _r(lam.imag), str(p.side)]
        for entry in np.asarray(jm.J).ravel():
            row += [_r(entry.real), _r(entry.imag)]
        row += [_r(abs(d - 1.0)), _r(jm.est_error)]
        rows.append(row)
    s1 = np.array([[0.0, 1.0], [1.0, 0.0]])
    sym = 0.0
    for side, x, lam in (("left", -1.1, 1.7), ("right", 0.4, 2.9)):
        J = solve_J(side, x, ContourPoint(lam), scn).J
        Jn = solve_J(side, x, ContourPoint(-lam), scn).J
        sym = max(sym, float(np.max(np.abs(s1 @ Jn @ s1 - J))))
    J = solve_J("left", 0.9, ContourPoint(1.4 + 0.12j), scn).J
    Jc = solve_J("left", 0.9, ContourPoint(1.4 - 0.12j), scn).J
    sym = max(sym, float(np.max(np.abs(np.conj(Jc) - s1 @ J @ s1))))
    report.add("det", det_res, scn.tolerances["det"])
    report.add("symmetry", sym, scn.tolerances["symmetry"])
    _write_csv(out / "jost_samples.csv", scn.scenario_hash, "jost_samples",
               ("side", "x", "lam_re", "lam_im", "tag",
                "j11_re", "j11_im", "j12_re", "j12_im",
                "j21_re", "j21_im", "j22_re", "j22_im",
                "det_residual", "est_error"), rows)


def _stage_scattering(scn, out, report, state, threads):
    geom = band_geometry(scn)
    table = sample_scattering(scn, n_per_piece=4, n_real=8, workers=threads)
    state["scattering_table"] = table
    rel = check_jump_relations(geom, table)
    unimod = max(rel.get("det_S_cap", 0.0), rel.get("det_S_real", 0.0))
    jump = max((v for k, v in rel.items() if "_jump_" in k), default=0.0)
    schwarz = max(rel.get("schwarz_cap_mirror", 0.0),
                  rel.get("schwarz_real_reflection", 0.0),
                  rel.get("S_conjugation_cap", 0.0))
    xind = 0.0
    c = scn.perturbation.center
    for p in (ContourPoint(1.45), ContourPoint(1j * 0.5 * sum(
            next(iv for tag, iv in geom.pieces() if iv[0] > 0)), MINUS)):
        s0 = compute_ab(p, scn, x_match=c)
        s1 = compute_ab(p, scn, x_match=c + 0.8)
        xind = max(xind, abs(s0.a - s1.a))
    winding = verify_solitonless(scn, raise_on_nonzero=False)
    report.add("unimodularity", unimod, scn.tolerances["unimodularity"])
    report.add("jump", jump, scn.tolerances["jump"])
    report.add("schwarz", schwarz, scn.tolerances["schwarz"])
    report.add("x_independence", xind, scn.tolerances["x_independence"])
    report.add("winding", abs(winding), 0.5)
    if scn.is_trivial("left"):
        triv = 0.0
        for s in table.by_region("real_line"):
            lam = complex(s.lam.lam)
            triv = max(triv, abs(s.a * hat_factor(scn, lam) - 1.0),
                       abs(s.b))
        report.add("trivial_identity", triv, scn.tolerances["det"])
    table.to_csv(out / "scattering_table.csv")


def _stage_reflection(scn, out, report, state, threads):
    rtable = build_cauchy_table(scn, workers=threads)
    state["cauchy_table"] = rtable
    geom = rtable.geometry
    lam_max = 3.0 * max(scn.left.eta2, scn.right.eta2)
    samples = []
    for z in np.linspace(0.35, min(0.8 * lam_max, 0.85 * rtable.x_real), 8):
        samples.append(reflection_coeffs(ContourPoint(float(z)), rtable))
        samples.append(reflection_coeffs(ContourPoint(-float(z)), rtable))
    upper = [(tag, iv) for tag, iv in geom.pieces() if iv[0] > 0]
    band_pts = []
    for tag, (lo, hi) in upper:
        for k in range(3):
            t = lo + (k + 0.7) * (hi - lo) / 3.4
            band_pts.append(ContourPoint(1j * t, PLUS))
    for p in band_pts:
        samples.append(reflection_coeffs(p, rtable))
    refl_res = 0.0
    x0r = scn.right.x0
    for s in samples:
        lam = complex(s.lam.lam)
        if s.r1 is not None and s.r2 is None:
            fm = factor_a1a2(ContourPoint(lam, MINUS), rtable)
            fp = factor_a1a2(ContourPoint(lam, PLUS), rtable)
            simp = cmath.exp(-2j * lam * x0r) / (2.0 * fm.a1 * fp.a1)
            refl_res = max(refl_res, abs(s.r1 - simp))
        if s.r2 is not None and s.r1 is None:
            fm = factor_a1a2(ContourPoint(lam, MINUS), rtable)
            fp = factor_a1a2(ContourPoint(lam, PLUS), rtable)
            simp = cmath.exp(2j * lam * x0r) / (2.0 * fm.a2 * fp.a2)
            refl_res = max(refl_res, abs(s.r2 - simp))
    ph = PhaseTheta(x=0.0)
    det_res = 0.0
    jump_samples = []
    for s in samples:
        p = s.lam
        V = jump_matrix_X(ph, p, s)
        det_res = max(det_res, abs(complex(np.linalg.det(V)) - 1.0))
        region = "real_line" if abs(complex(p.lam).imag) < 1e-12 else \
            next(tag for tag, (lo, hi) in geom.pieces()
                 if lo <= complex(p.lam).imag <= hi)
        jump_samples.append(JumpSample(p, region, tuple(
            (complex(V[i, 0]), complex(V[i, 1])) for i in range(2))))
    report.add("reflection", refl_res, scn.tolerances["reflection"])
    report.add("det_V", det_res, scn.tolerances["det_V"])
    reflection_to_csv(samples, out / "reflection_coeffs.csv",
                      scn.scenario_hash,
                      extra_header=f"x_real={rtable.x_real:g}")
    jumps_to_csv(jump_samples, out / "jump_data.csv", scn.scenario_hash,
                 extra_header="theta_x=0 theta_t=0")


def _stage_verification(scn, out, report, state):
    mj = verify_M_jumps(0.4, scn, n_per_piece=4)
    report.add("m_jump", mj.max_residual, scn.tolerances["m_jump"])
    mj.save(out / "m_jump_report.json")
    rtable = state.get("cauchy_table")
    rec_res = 0.0
    rows = []
    for x in (-0.6, 0.25, 0.7):
        u = reconstruct_u(x, scn, rtable)
        u0 = scn.u0(x)
        rec_res = max(rec_res, abs(u - u0))
        rows.append((_r(x), _r(u), _r(u0), _r(abs(u - u0))))
    report.add("reconstruction", rec_res, scn.tolerances["reconstruction"])
    _write_csv(out / "reconstruction.csv", scn.scenario_hash,
               "reconstruction", ("x", "u_reconstructed", "u0", "residual"),
               rows)


def run_pipeline(scn: Scenario, stages=None, out_dir=None,
                 threads: int = 1) -> RunReport:
    """Execute the requested stages in dependency order.

    stages = None enables the full chain.  The requested set must be
    closed under prerequisites (PipelineDependencyError otherwise).
    Artifacts land in out_dir; numerical failures surface as StageError
    naming the stage.
    """
    if stages is None:
        enabled = set(STAGES)
    else:
        enabled = {str(s) for s in stages}
        unknown = enabled - set(STAGES)
        if unknown:
            raise PipelineDependencyError(
                f"unknown stage(s): {', '.join(sorted(unknown))}")
    for i, stage in enumerate(STAGES):
        if stage in enabled:
            missing = [s for s in STAGES[:i] if s not in enabled]
            if missing:
                raise PipelineDependencyError(
                    f"stage {stage} requires {', '.join(missing)}")

    out = Path(out_dir) if out_dir is not None else Path(
        os.environ.get(OUT_ENV, "runs")) / scn.scenario_hash
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.json").write_text(
        json.dumps(scn.to_dict(), indent=2, sort_keys=True) + "\n")

    report = RunReport(scenario_hash=scn.scenario_hash,
                       tolerances=dict(scn.tolerances))
    state: dict = {}
    runners = {
        "background": lambda: _stage_background(scn, out, report, state),
        "jost": lambda: _stage_jost(scn, out, report, state),
        "scattering": lambda: _stage_scattering(scn, out, report, state,
                                                threads),
        "reflection": lambda: _stage_reflection(scn, out, report, state,
                                                threads),
        "verification": lambda: _stage_verification(scn, out, report, state),
    }
    for stage in STAGES:
        if stage not in enabled:
            continue
        t0 = time.perf_counter()
        try:
            runners[stage]()
        except NUMERICAL_ERRORS as exc:
            raise StageError(stage, exc) from exc
        report.timings[stage] = time.perf_counter() - t0
    report.save(out / "run_report.json")
    return report


# -- plot-data export ----------------------------------------------------------

def _read_csv(path):
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# scenario="):
        raise ExportError(f"{path.name} lacks the scenario header")
    shash = lines[0].split("scenario=", 1)[1].split()[0]
    cols = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:] if line]
    return shash, cols, rows


def export_plot_data(run_dir, out_dir=None):
    """Write plot-ready CSVs from a completed run directory.

    Produces bands.csv (spectral band segments with side labels),
    reflection_real.csv (|rho|, arg rho over the real axis),
    reflection_bands.csv (|r1|, |r2| over the upper bands),
    profiles.csv (x, u_theta, u_dn), and residuals.csv (named residual
    series for heat strips).  Raises ExportError when a source artifact
    is missing or the scenario hashes disagree.
    """
    run = Path(run_dir)
    out = Path(out_dir) if out_dir is not None else run / "plot_data"
    scn_path = run / "scenario.json"
    if not scn_path.exists():
        raise ExportError(f"missing artifact: {scn_path}")
    scn = Scenario.from_dict(json.loads(scn_path.read_text()))
    shash = scn.scenario_hash
    sources = {
        "background": run / "background_profiles.csv",
        "reflection": run / "reflection_coeffs.csv",
        "jost": run / "jost_samples.csv",
        "m_jump": run / "m_jump_report.json",
    }
    for name, path in sources.items():
        if not path.exists():
            raise ExportError(f"missing artifact: {path}")
    out.mkdir(parents=True, exist_ok=True)
    written = []

    rows = []
    for side, bp in (("left", scn.left), ("right", scn.right)):
        rows.append((side, "sigma1", _r(bp.eta1), _r(bp.eta2)))
        rows.append((side, "sigma2", _r(-bp.eta2), _r(-bp.eta1)))
    _write_csv(out / "bands.csv", shash, "plot_bands",
               ("side", "band", "im_lo", "im_hi"), rows,
               extra=f"pattern={scn.pattern}")
    written.append(out / "bands.csv")

    src_hash, cols, data = _read_csv(sources["reflection"])
    if src_hash != shash:
        raise ExportError("reflection_coeffs.csv hash does not match "
                          "scenario.json")
    ix = {c: i for i, c in enumerate(cols)}
    real_rows, band_rows = [], []
    for row in data:
        lam_re, lam_im = float(row[ix["lam_re"]]), float(row[ix["lam_im"]])
        if row[ix["rho_re"]]:
            rho = complex(float(row[ix["rho_re"]]), float(row[ix["rho_im"]]))
            real_rows.append((_r(lam_re), _r(abs(rho)),
                              _r(cmath.phase(rho))))
        else:
            def mod(tag):
                return (_r(abs(complex(float(row[ix[tag + "_re"]]),
                                       float(row[ix[tag + "_im"]]))))
                        if row[ix[tag + "_re"]] else "")
            band_rows.append((_r(lam_im), mod("r1"), mod("r2")))
    real_rows.sort(key=lambda r: float(r[0]))
    band_rows.sort(key=lambda r: float(r[0]))
    _write_csv(out / "reflection_real.csv", shash, "plot_reflection_real",
               ("lam", "abs_rho", "arg_rho"), real_rows)
    _write_csv(out / "reflection_bands.csv", shash, "plot_reflection_bands",
               ("lam_im", "abs_r1", "abs_r2"), band_rows)
    written += [out / "reflection_real.csv", out / "reflection_bands.csv"]

    src_hash, cols, data = _read_csv(sources["background"])
    if src_hash != shash:
        raise ExportError("background_profiles.csv hash does not match "
                          "scenario.json")
    ix = {c: i for i, c in enumerate(cols)}
    rows = [(row[ix["x"]], row[ix["u_theta"]], row[ix["u_dn"]])
            for row in data]
    _write_csv(out / "profiles.csv", shash, "plot_profiles",
               ("x", "u_theta", "u_dn"), rows)
    written.append(out / "profiles.csv")

    rows = []
    src_hash, cols, data = _read_csv(sources["jost"])
    ix = {c: i for i, c in enumerate(cols)}
    for row in data:
        pos = math.hypot(float(row[ix["lam_re"]]), float(row[ix["lam_im"]]))
        rows.append(("jost_det", _r(pos), row[ix["det_residual"]]))
    mj = json.loads(sources["m_jump"].read_text())
    for piece in mj["pieces"]:
        pos = 0.5 * (piece["lo"] + piece["hi"])
        rows.append((f"m_jump:{piece['piece']}", _r(pos),
                     _r(piece["max_residual"])))
    _write_csv(out / "residuals.csv", shash, "plot_residuals",
               ("series", "position", "residual"), rows)
    written.append(out / "residuals.csv")
    return written


# -- command line --------------------------------------------------------------

def _parser():
    ap = argparse.ArgumentParser(
        prog="scatter",
        description="Direct scattering pipeline for step-like one-gap "
                    "KdV data")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run pipeline stages on a scenario")
    run.add_argument("scenario", help="scenario JSON file")
    run.add_argument("--stages", default=None,
                     help="comma-separated stage subset (default: all); "
                          f"chain: {' -> '.join(STAGES)}")
    run.add_argument("--out", default=None,
                     help=f"run directory (default: ${OUT_ENV}/<hash> "
                          "or runs/<hash>)")
    run.add_argument("--threads", type=int, default=1,
                     help="workers for lambda-grid sampling")
    val = sub.add_parser("validate", help="validate a scenario file")
    val.add_argument("scenario", help="scenario JSON file")
    exp = sub.add_parser("export-plots",
                         help="write plot-ready CSVs from a run directory")
    exp.add_argument("run_dir", help="directory produced by `scatter run`")
    exp.add_argument("--out", default=None,
                     help="output directory (default: <run-dir>/plot_data)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)

    if args.command == "validate":
        try:
            scn = load_scenario(args.scenario)
        except ScenarioError as exc:
            print(f"invalid scenario: {exc}", file=sys.stderr)
            return EXIT_BAD_SCENARIO
        print(f"scenario {scn.scenario_hash} valid: pattern ({scn.pattern}), "
              f"left ({scn.left.eta1:g}, {scn.left.eta2:g}), "
              f"right ({scn.right.eta1:g}, {scn.right.eta2:g}), "
              f"perturbation {scn.perturbation.kind}")
        return EXIT_OK

    if args.command == "export-plots":
        try:
            written = export_plot_data(args.run_dir, args.out)
        except (ExportError, ScenarioError) as exc:
            print(f"export failed: {exc}", file=sys.stderr)
            return EXIT_BAD_SCENARIO
        for path in written:
            print(path)
        return EXIT_OK

    # run
    try:
        scn = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_BAD_SCENARIO
    stages = None
    if args.stages is not None:
        stages = [s.strip() for s in args.stages.split(",") if s.strip()]
    try:
        report = run_pipeline(scn, stages=stages, out_dir=args.out,
                              threads=args.threads)
    except PipelineDependencyError as exc:
        print(f"invalid stage selection: {exc}", file=sys.stderr)
        return EXIT_BAD_SCENARIO
    except StageError as exc:
        print(f"numerical failure in {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for check in report.checks:
        print(check.line())
    total = sum(report.timings.values())
    print(f"scenario {report.scenario_hash}: "
          f"{'all checks passed' if report.all_passed else 'CHECKS FAILED'} "
          f"({total:.1f}s)")
    return EXIT_OK if report.all_passed else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
