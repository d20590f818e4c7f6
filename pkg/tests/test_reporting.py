"""Unit tests for CSV rendering and atomic output."""

import numpy as np

from numfeas.reporting import RunManifest, format_value, render_csv, write_text


class TestFormatValue:
    def test_floats_full_precision(self):
        assert format_value(0.1) == "0.10000000000000001"
        assert format_value(1.0) == "1"
        assert float(format_value(np.pi)) == np.pi  # round-trips exactly

    def test_bools_and_ints(self):
        assert format_value(True) == "1"
        assert format_value(False) == "0"
        assert format_value(42) == "42"
        assert format_value("di") == "di"


class TestRenderCsv:
    def test_layout(self):
        manifest = RunManifest("lexmax", "sc.txt", {"seed": None})
        text = render_csv(manifest, ["a", "b"], [[1.0, 2], [3.0, 4]])
        lines = text.splitlines()
        assert lines[0] == "# numfeas lexmax"
        assert lines[1] == "# scenario = sc.txt"
        assert lines[2] == "# seed = None"
        assert lines[3] == "a,b"
        assert lines[4] == "1,2"
        assert text.endswith("\n")

    def test_no_scenario_line_when_empty(self):
        text = render_csv(RunManifest("demo"), ["a"], [])
        assert "scenario" not in text


class TestWriteText:
    def test_writes_file(self, tmp_path):
        target = tmp_path / "out.csv"
        write_text(str(target), "hello\n")
        assert target.read_text() == "hello\n"
        # overwrite is atomic replace, not append
        write_text(str(target), "bye\n")
        assert target.read_text() == "bye\n"
        leftovers = [p for p in tmp_path.iterdir() if p.name.startswith(".numfeas")]
        assert leftovers == []

    def test_stdout_when_no_path(self, capsys):
        write_text(None, "to-stdout\n")
        assert capsys.readouterr().out == "to-stdout\n"
