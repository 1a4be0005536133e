"""Fixtures: a synthetic schema export and a real pipeline export.

The synthetic export exercises the renderers on hand-written CSVs that
follow the documented plot_data schema.  The real export drives the
scattering pipeline through its command line only (subprocess), so this
package stays on the CSV contract and never imports the solver.
"""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from schema_io import write_csv

TRIVIAL_SCENARIO = {
    "left": {"eta1": 1.0, "eta2": 2.0, "x0": 0.3},
    "right": {"eta1": 1.0, "eta2": 2.0, "x0": 0.3},
}


@pytest.fixture()
def synth_export(tmp_path):
    """Small but complete plot_data directory (overlap-style bands)."""
    data = tmp_path / "plot_data"
    data.mkdir()
    write_csv(data / "bands.csv",
              "# scenario=abc123 kind=plot_bands pattern=intersecting",
              ("side", "band", "im_lo", "im_hi"),
              [("left", "sigma1", 1.0, 2.0), ("left", "sigma2", -2.0, -1.0),
               ("right", "sigma1", 1.2, 2.4),
               ("right", "sigma2", -2.4, -1.2)])
    write_csv(data / "reflection_real.csv",
              "# scenario=abc123 kind=plot_reflection_real",
              ("lam", "abs_rho", "arg_rho"),
              [(-2.0, 0.3, 0.6), (-1.0, 0.2, -0.4), (1.0, 0.2, 0.4),
               (2.0, 0.3, -0.6)])
    write_csv(data / "reflection_bands.csv",
              "# scenario=abc123 kind=plot_reflection_bands",
              ("lam_im", "abs_r1", "abs_r2"),
              [(1.1, 2.7, ""), (1.6, 1.9, 2.1), (2.2, "", 2.5)])
    write_csv(data / "profiles.csv",
              "# scenario=abc123 kind=plot_profiles",
              ("x", "u_theta", "u_dn"),
              [(-1.0, 0.5, 0.5), (-0.5, 0.8, 0.8), (0.5, 1.1, 1.1),
               (1.0, 0.9, 0.9)])
    write_csv(data / "residuals.csv",
              "# scenario=abc123 kind=plot_residuals",
              ("series", "position", "residual"),
              [("jost_det", 1.7, 1e-12), ("jost_det", 2.9, 3e-11),
               ("m_jump:real_line", 0.0, 2e-9),
               ("m_jump:sigma1_cap", 1.6, 5e-10)])
    return data


def _scatter_argv():
    exe = shutil.which("scatter")
    if exe:
        return [exe]
    return [sys.executable, "-m", "kdvscatter.cli"]


@pytest.fixture(scope="session")
def real_export(tmp_path_factory):
    """plot_data of a completed trivial-junction run, via the CLI only."""
    root = tmp_path_factory.mktemp("trivial_run")
    scn = root / "scenario.json"
    scn.write_text(json.dumps(TRIVIAL_SCENARIO))
    run_dir = root / "run"
    for argv in ([*_scatter_argv(), "run", str(scn), "--out", str(run_dir)],
                 [*_scatter_argv(), "export-plots", str(run_dir)]):
        proc = subprocess.run(argv, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stdout + proc.stderr
    return run_dir / "plot_data"
