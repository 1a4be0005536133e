"""Renderer contracts on synthetic schema-conformant exports."""

import hashlib
from pathlib import Path

import pytest

from kdvplots import (KINDS, PlotSpec, SpecError, build_figure, plot_spec,
                      read_table, render, segment_layout)

from schema_io import write_csv

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _hash_dir(path):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(Path(path).iterdir())}


class TestSpec:
    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(SpecError, match="unknown figure kind"):
            plot_spec("sparklines", tmp_path, tmp_path)
        bogus = PlotSpec(kind="sparklines", inputs={}, output=tmp_path / "x")
        with pytest.raises(SpecError, match="unknown figure kind"):
            build_figure(bogus)

    def test_missing_file_rejected(self, tmp_path):
        spec = plot_spec("bands", tmp_path / "nowhere", tmp_path)
        with pytest.raises(SpecError, match="missing input file"):
            render(spec)

    def test_missing_column_rejected(self, tmp_path, synth_export):
        write_csv(synth_export / "bands.csv", "# scenario=abc123",
                  ("side", "band", "im_lo"),
                  [("left", "sigma1", 1.0)])
        with pytest.raises(SpecError, match="missing column 'im_hi'"):
            render(plot_spec("bands", synth_export, tmp_path))

    def test_unknown_side_rejected(self, tmp_path, synth_export):
        write_csv(synth_export / "bands.csv", "# scenario=abc123",
                  ("side", "band", "im_lo", "im_hi"),
                  [("middle", "sigma1", 1.0, 2.0)])
        with pytest.raises(SpecError, match="unknown side"):
            render(plot_spec("bands", synth_export, tmp_path))

    def test_headerless_file_rejected(self, tmp_path, synth_export):
        (synth_export / "residuals.csv").write_text("# scenario=abc123\n")
        with pytest.raises(SpecError, match="no column header"):
            render(plot_spec("residuals", synth_export, tmp_path))


class TestTableReader:
    def test_meta_and_nan_fields(self, synth_export):
        table = read_table(synth_export / "reflection_bands.csv")
        assert table.meta == {"scenario": "abc123",
                              "kind": "plot_reflection_bands"}
        r1 = table.column("abs_r1")
        assert r1[0] == 2.7
        assert r1[2] != r1[2]  # empty field -> NaN

    def test_pattern_metadata(self, synth_export):
        table = read_table(synth_export / "bands.csv")
        assert table.meta["pattern"] == "intersecting"


class TestRender:
    def test_all_kinds_write_png(self, tmp_path, synth_export):
        for kind in KINDS:
            out = render(plot_spec(kind, synth_export, tmp_path))
            assert out == tmp_path / f"{kind}.png"
            data = out.read_bytes()
            assert data[:8] == PNG_MAGIC
            assert len(data) > 4000

    def test_deterministic_and_nonmutating(self, tmp_path, synth_export):
        before = _hash_dir(synth_export)
        first = {k: render(plot_spec(k, synth_export, tmp_path / "a"))
                 .read_bytes() for k in KINDS}
        second = {k: render(plot_spec(k, synth_export, tmp_path / "b"))
                  .read_bytes() for k in KINDS}
        assert first == second
        assert _hash_dir(synth_export) == before

    def test_empty_series_warns_and_skips(self, tmp_path, synth_export):
        write_csv(synth_export / "reflection_bands.csv", "# scenario=abc123",
                  ("lam_im", "abs_r1", "abs_r2"),
                  [(1.1, 2.7, ""), (2.2, 1.9, "")])
        with pytest.warns(UserWarning, match="empty series 'abs_r2'"):
            out = render(plot_spec("coefficients", synth_export, tmp_path))
        assert out.read_bytes()[:8] == PNG_MAGIC

    def test_fully_empty_tables_still_render(self, tmp_path, synth_export):
        write_csv(synth_export / "profiles.csv", "# scenario=abc123",
                  ("x", "u_theta", "u_dn"), [])
        with pytest.warns(UserWarning, match="empty series"):
            out = render(plot_spec("profiles", synth_export, tmp_path))
        assert out.read_bytes()[:8] == PNG_MAGIC


class TestBandsFigure:
    def test_segment_layout_sorted_by_side(self, synth_export):
        layout = segment_layout(read_table(synth_export / "bands.csv"))
        assert layout["left"] == [("sigma2", -2.0, -1.0),
                                  ("sigma1", 1.0, 2.0)]
        assert layout["right"] == [("sigma2", -2.4, -1.2),
                                   ("sigma1", 1.2, 2.4)]

    def test_figure_carries_one_segment_per_band(self, tmp_path,
                                                 synth_export):
        fig = build_figure(plot_spec("bands", synth_export, tmp_path))
        segs = [(line.get_xdata()[0], *sorted(line.get_ydata()))
                for line in fig.axes[0].lines
                if line.get_linewidth() == 7.0]
        assert (0.0, 1.0, 2.0) in segs
        assert (0.0, -2.0, -1.0) in segs
        assert (1.0, 1.2, 2.4) in segs
        assert (1.0, -2.4, -1.2) in segs
        assert len(segs) == 4
