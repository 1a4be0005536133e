"""Batch front end: scenario ingestion, stage chain, reports, exports.

The trivial identical-background junction runs the full pipeline in well
under a second (every solver short-circuits to the exact background
solution), so these tests exercise the real stage chain end to end and
only use synthetic inputs for the failure paths.
"""

import json
from pathlib import Path

import pytest

from kdvscatter.cli import (
    EXIT_BAD_SCENARIO,
    EXIT_CHECK_FAILED,
    EXIT_OK,
    OUT_ENV,
    PipelineDependencyError,
    ExportError,
    RunReport,
    export_plot_data,
    load_scenario,
    main,
    run_pipeline,
)
from kdvscatter.scenario import Scenario, ScenarioError

TRIVIAL_DOC = {"left": {"eta1": 1.0, "eta2": 2.0, "x0": 0.3},
               "right": {"eta1": 1.0, "eta2": 2.0, "x0": 0.3}}


def _write_scenario(tmp_path, doc, name="scenario.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


@pytest.fixture(scope="module")
def trivial_run(tmp_path_factory):
    """One completed full-pipeline run directory, shared by the module."""
    root = tmp_path_factory.mktemp("trivial_run")
    path = _write_scenario(root, TRIVIAL_DOC)
    out = root / "run"
    rc = main(["run", str(path), "--out", str(out)])
    assert rc == EXIT_OK
    return out


class TestScenarioIngestion:
    def test_validate_accepts_trivial(self, tmp_path, capsys):
        path = _write_scenario(tmp_path, TRIVIAL_DOC)
        assert main(["validate", str(path)]) == EXIT_OK
        msg = capsys.readouterr().out
        assert "pattern (identical)" in msg
        assert Scenario.from_dict(TRIVIAL_DOC).scenario_hash in msg

    def test_missing_file_is_scenario_error(self, tmp_path, capsys):
        rc = main(["validate", str(tmp_path / "absent.json")])
        assert rc == EXIT_BAD_SCENARIO
        assert "cannot read" in capsys.readouterr().err

    def test_malformed_json_is_scenario_error(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["validate", str(path)]) == EXIT_BAD_SCENARIO
        assert "not valid JSON" in capsys.readouterr().err

    def test_field_error_names_the_path(self, tmp_path, capsys):
        doc = {"left": {"eta1": 2.0, "eta2": 1.0, "x0": 0.0},
               "right": {"eta1": 1.2, "eta2": 2.4, "x0": 0.0}}
        path = _write_scenario(tmp_path, doc)
        assert main(["validate", str(path)]) == EXIT_BAD_SCENARIO
        err = capsys.readouterr().err
        assert "field left" in err and "eta1" in err

    def test_load_scenario_round_trips_defaults(self, tmp_path):
        path = _write_scenario(tmp_path, TRIVIAL_DOC)
        scn = load_scenario(path)
        assert scn.pattern == "identical"
        assert scn.tolerances["reconstruction"] == 1e-3


class TestStageSelection:
    def test_non_prefix_subset_is_rejected(self, tmp_path, capsys):
        path = _write_scenario(tmp_path, TRIVIAL_DOC)
        rc = main(["run", str(path), "--stages", "scattering",
                   "--out", str(tmp_path / "out")])
        assert rc == EXIT_BAD_SCENARIO
        err = capsys.readouterr().err
        assert "requires" in err and "jost" in err

    def test_unknown_stage_is_rejected(self, tmp_path, capsys):
        path = _write_scenario(tmp_path, TRIVIAL_DOC)
        rc = main(["run", str(path), "--stages", "background,warp",
                   "--out", str(tmp_path / "out")])
        assert rc == EXIT_BAD_SCENARIO
        assert "warp" in capsys.readouterr().err

    def test_prefix_subset_runs_only_its_checks(self, tmp_path):
        scn = Scenario.from_dict(TRIVIAL_DOC)
        report = run_pipeline(scn, stages=["background", "jost"],
                              out_dir=tmp_path / "out")
        assert [c.name for c in report.checks] == [
            "dual_form", "kdv_residual", "det", "symmetry"]
        assert report.all_passed
        assert (tmp_path / "out" / "jost_samples.csv").exists()
        assert not (tmp_path / "out" / "scattering_table.csv").exists()

    def test_dependency_error_type(self):
        scn = Scenario.from_dict(TRIVIAL_DOC)
        with pytest.raises(PipelineDependencyError):
            run_pipeline(scn, stages=["verification"])


class TestTrivialPipeline:
    def test_exit_code_and_report(self, trivial_run, capsys):
        report = json.loads((trivial_run / "run_report.json").read_text())
        names = [c["name"] for c in report["checks"]]
        assert names == ["dual_form", "kdv_residual", "det", "symmetry",
                         "unimodularity", "jump", "schwarz",
                         "x_independence", "winding", "trivial_identity",
                         "reflection", "det_V", "m_jump", "reconstruction"]
        assert all(c["passed"] for c in report["checks"])
        triv = next(c for c in report["checks"]
                    if c["name"] == "trivial_identity")
        assert triv["residual"] < 1e-10
        assert set(report["timings"]) == {"background", "jost", "scattering",
                                          "reflection", "verification"}
        assert report["tolerances"]["m_jump"] == 1e-4

    def test_artifacts_written_with_hash_headers(self, trivial_run):
        shash = Scenario.from_dict(TRIVIAL_DOC).scenario_hash
        for name in ("background_profiles.csv", "jost_samples.csv",
                     "scattering_table.csv", "reflection_coeffs.csv",
                     "jump_data.csv", "reconstruction.csv"):
            first = (trivial_run / name).read_text().splitlines()[0]
            assert first.startswith(f"# scenario={shash} kind="), name
        scn_doc = json.loads((trivial_run / "scenario.json").read_text())
        assert Scenario.from_dict(scn_doc).scenario_hash == shash
        mj = json.loads((trivial_run / "m_jump_report.json").read_text())
        assert mj["scenario"] == shash

    def test_duplicate_check_names_rejected(self):
        report = RunReport(scenario_hash="deadbeef")
        report.add("det", 0.0, 1e-8)
        with pytest.raises(ValueError, match="twice"):
            report.add("det", 0.0, 1e-8)

    def test_reruns_are_byte_identical(self, trivial_run, tmp_path):
        path = _write_scenario(tmp_path, TRIVIAL_DOC)
        out2 = tmp_path / "again"
        assert main(["run", str(path), "--out", str(out2)]) == EXIT_OK
        for name in ("background_profiles.csv", "jost_samples.csv",
                     "scattering_table.csv", "reflection_coeffs.csv",
                     "jump_data.csv", "reconstruction.csv",
                     "scenario.json", "m_jump_report.json"):
            a = (trivial_run / name).read_bytes()
            b = (out2 / name).read_bytes()
            assert a == b, f"{name} differs between reruns"

    def test_impossible_tolerance_fails_with_exit_2(self, tmp_path, capsys):
        doc = dict(TRIVIAL_DOC)
        doc["tolerances"] = {"reconstruction": 1e-30}
        path = _write_scenario(tmp_path, doc)
        rc = main(["run", str(path), "--out", str(tmp_path / "out")])
        assert rc == EXIT_CHECK_FAILED
        out = capsys.readouterr().out
        assert "reconstruction" in out and "FAIL" in out
        report = json.loads(
            (tmp_path / "out" / "run_report.json").read_text())
        failed = [c for c in report["checks"] if not c["passed"]]
        assert [c["name"] for c in failed] == ["reconstruction"]

    def test_default_out_dir_honors_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUT_ENV, str(tmp_path / "rundirs"))
        scn = Scenario.from_dict(TRIVIAL_DOC)
        report = run_pipeline(scn, stages=["background"])
        expected = tmp_path / "rundirs" / scn.scenario_hash
        assert (expected / "run_report.json").exists()
        assert report.all_passed


class TestPlotExport:
    def test_missing_artifact_is_export_error(self, tmp_path):
        with pytest.raises(ExportError, match="scenario.json"):
            export_plot_data(tmp_path)
        run = tmp_path / "partial"
        run.mkdir()
        (run / "scenario.json").write_text(json.dumps(TRIVIAL_DOC))
        with pytest.raises(ExportError, match="missing artifact"):
            export_plot_data(run)

    def test_cli_reports_missing_artifact(self, tmp_path, capsys):
        rc = main(["export-plots", str(tmp_path)])
        assert rc == EXIT_BAD_SCENARIO
        assert "missing artifact" in capsys.readouterr().err

    def test_hash_mismatch_is_export_error(self, trivial_run, tmp_path):
        clone = tmp_path / "clone"
        clone.mkdir()
        for f in trivial_run.iterdir():
            if f.is_file():
                (clone / f.name).write_bytes(f.read_bytes())
        doc = dict(TRIVIAL_DOC)
        doc["left"] = {"eta1": 1.0, "eta2": 2.0, "x0": 0.4}
        (clone / "scenario.json").write_text(json.dumps(doc))
        with pytest.raises(ExportError, match="hash"):
            export_plot_data(clone)

    def test_full_export(self, trivial_run, capsys):
        rc = main(["export-plots", str(trivial_run)])
        assert rc == EXIT_OK
        printed = capsys.readouterr().out.splitlines()
        assert len(printed) == 5
        shash = Scenario.from_dict(TRIVIAL_DOC).scenario_hash
        pd = trivial_run / "plot_data"
        for name in ("bands.csv", "reflection_real.csv",
                     "reflection_bands.csv", "profiles.csv",
                     "residuals.csv"):
            lines = (pd / name).read_text().splitlines()
            assert lines[0].startswith(f"# scenario={shash} kind=plot_")
            assert len(lines) > 2, name

        lines = (pd / "bands.csv").read_text().splitlines()
        assert "pattern=identical" in lines[0]
        rows = [line.split(",") for line in lines[2:]]
        assert {(r[0], r[1]) for r in rows} == {
            ("left", "sigma1"), ("left", "sigma2"),
            ("right", "sigma1"), ("right", "sigma2")}
        sig1 = next(r for r in rows if tuple(r[:2]) == ("left", "sigma1"))
        assert (float(sig1[2]), float(sig1[3])) == (1.0, 2.0)

        lines = (pd / "reflection_real.csv").read_text().splitlines()
        lam = [float(r.split(",")[0]) for r in lines[2:]]
        assert lam == sorted(lam)
        assert all(abs(float(r.split(",")[1])) < 1e-12 for r in lines[2:])

        lines = (pd / "reflection_bands.csv").read_text().splitlines()
        for row in (r.split(",") for r in lines[2:]):
            t, r1m, r2m = float(row[0]), float(row[1]), float(row[2])
            assert 1.0 < t < 2.0
            # bare phases: |r1| = e^{2 t x0}, |r2| = 1/|r1|
            assert abs(r1m * r2m - 1.0) < 1e-9

        lines = (pd / "residuals.csv").read_text().splitlines()
        series = {r.split(",")[0] for r in lines[2:]}
        assert "jost_det" in series
        assert any(s.startswith("m_jump:") for s in series)

    def test_export_is_deterministic(self, trivial_run, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        export_plot_data(trivial_run, out_a)
        export_plot_data(trivial_run, out_b)
        for f in sorted(out_a.iterdir()):
            assert f.read_bytes() == (out_b / f.name).read_bytes()
