"""End-to-end tests of the command-line surface."""

import numpy as np
import pytest
from click.testing import CliRunner

from numfeas.cli import main

from conftest import SINGLE_LINK_TEXT, CHAIN10_TEXT

TWO_LINK_TEXT = """\
[network]
links = 2
users = 3
capacity 1 = 1.0
capacity 2 = 2.0
route 1 = 1 2
route 2 = 1
route 3 = 2

[utilities]
user 1 = log
user 2 = log
user 3 = log
"""


@pytest.fixture
def runner():
    return CliRunner()


def body_lines(text):
    """CSV lines with the manifest comments stripped."""
    return [ln for ln in text.splitlines() if not ln.startswith("#")]


class TestLexmax:
    def test_stdout_csv(self, runner, write_scenario):
        path = write_scenario(SINGLE_LINK_TEXT)
        result = runner.invoke(main, ["lexmax", "--scenario", path])
        assert result.exit_code == 0
        header, row = body_lines(result.output)
        assert header == "x1,x2,min_slack"
        values = [float(tok) for tok in row.split(",")]
        assert values == pytest.approx([1.5, 1.5, 0.0])

    def test_deterministic_output(self, runner, write_scenario):
        path = write_scenario(TWO_LINK_TEXT)
        a = runner.invoke(main, ["lexmax", "--scenario", path]).output
        b = runner.invoke(main, ["lexmax", "--scenario", path]).output
        assert a == b

    def test_output_file(self, runner, write_scenario, tmp_path):
        path = write_scenario(SINGLE_LINK_TEXT)
        out = tmp_path / "lex.csv"
        result = runner.invoke(
            main, ["lexmax", "--scenario", path, "--output", str(out)]
        )
        assert result.exit_code == 0
        assert out.exists()
        assert body_lines(out.read_text())[0] == "x1,x2,min_slack"

    def test_seed_recorded_in_manifest(self, runner, write_scenario):
        path = write_scenario(SINGLE_LINK_TEXT)
        result = runner.invoke(
            main, ["lexmax", "--scenario", path, "--seed", "7"]
        )
        assert "# seed = 7" in result.output


class TestInputErrors:
    def test_missing_scenario_file(self, runner, tmp_path):
        result = runner.invoke(
            main, ["lexmax", "--scenario", str(tmp_path / "nope.txt")]
        )
        assert result.exit_code == 2

    def test_malformed_scenario(self, runner, write_scenario):
        path = write_scenario(SINGLE_LINK_TEXT.replace("log", "exp"))
        result = runner.invoke(main, ["lexmax", "--scenario", path])
        assert result.exit_code == 2
        assert "line" in result.output


class TestPfSolve:
    def test_inline_prices(self, runner, write_scenario):
        path = write_scenario(SINGLE_LINK_TEXT)
        result = runner.invoke(
            main, ["pf-solve", "--scenario", path, "--prices", "1,2"]
        )
        assert result.exit_code == 0
        header, row = body_lines(result.output)
        assert header == "x1,x2,mu1,kkt_residual,iterations"
        values = [float(tok) for tok in row.split(",")]
        assert values[0] == pytest.approx(1.0, abs=1e-7)
        assert values[1] == pytest.approx(2.0, abs=1e-7)
        assert values[2] == pytest.approx(1.0, abs=1e-7)
        assert values[3] <= 1e-8

    def test_prices_from_lexmax(self, runner, write_scenario):
        path = write_scenario(SINGLE_LINK_TEXT)
        result = runner.invoke(
            main, ["pf-solve", "--scenario", path, "--prices", "from-lexmax"]
        )
        assert result.exit_code == 0
        # constant-price families: same solution as explicit (1, 2)
        row = body_lines(result.output)[1]
        assert float(row.split(",")[0]) == pytest.approx(1.0, abs=1e-7)

    def test_prices_from_rate_file(self, runner, write_scenario, tmp_path):
        path = write_scenario(SINGLE_LINK_TEXT)
        rates = tmp_path / "x.txt"
        rates.write_text("0.5 0.5\n")
        result = runner.invoke(
            main,
            ["pf-solve", "--scenario", path, "--prices", f"from-x:{rates}"],
        )
        assert result.exit_code == 0

    @pytest.mark.parametrize("bad", ["1", "1,2,3", "-1,2", "a,b"])
    def test_bad_prices(self, runner, write_scenario, bad):
        path = write_scenario(SINGLE_LINK_TEXT)
        result = runner.invoke(
            main, ["pf-solve", "--scenario", path, "--prices", bad]
        )
        assert result.exit_code == 2

    def test_summary_echo_with_file_output(self, runner, write_scenario,
                                           tmp_path):
        path = write_scenario(SINGLE_LINK_TEXT)
        out = tmp_path / "sol.csv"
        result = runner.invoke(
            main, ["pf-solve", "--scenario", path, "--prices", "1,2",
                   "--output", str(out)],
        )
        assert result.exit_code == 0
        assert result.output.startswith("x = ")
        assert out.exists()


class TestRun:
    def test_trace_columns_and_feasibility(self, runner, write_scenario):
        path = write_scenario(TWO_LINK_TEXT)
        result = runner.invoke(
            main, ["run", "--scenario", path, "--max-iters", "200",
                   "--stop-tol", "1e-12", "--record-every", "10"],
        )
        assert result.exit_code == 0
        lines = body_lines(result.output)
        assert lines[0] == "k,a_k,x1,x2,x3,error2,welfare,descent,min_slack"
        rows = [[float(tok) for tok in ln.split(",")] for ln in lines[1:]]
        assert rows[0][0] == 0
        cols = dict(zip(lines[0].split(","), zip(*rows)))
        assert all(s >= -1e-9 for s in cols["min_slack"])
        assert all(d >= -1e-9 for d in cols["descent"])
        # error shrinks over the run
        assert cols["error2"][-1] < 0.2 * cols["error2"][0]

    def test_infeasible_start_rejected(self, runner, write_scenario, tmp_path):
        path = write_scenario(SINGLE_LINK_TEXT)
        x0 = tmp_path / "x0.txt"
        x0.write_text("2.0 2.0\n")
        result = runner.invoke(
            main, ["run", "--scenario", path, "--x0", str(x0)]
        )
        assert result.exit_code == 2

    def test_figure_rendered(self, runner, write_scenario, tmp_path):
        path = write_scenario(TWO_LINK_TEXT)
        fig = tmp_path / "err.png"
        out = tmp_path / "trace.csv"
        result = runner.invoke(
            main, ["run", "--scenario", path, "--max-iters", "50",
                   "--stop-tol", "1e-12", "--output", str(out),
                   "--figure", str(fig)],
        )
        assert result.exit_code == 0
        assert fig.exists() and fig.stat().st_size > 0

    def test_deterministic_body(self, runner, write_scenario):
        path = write_scenario(TWO_LINK_TEXT)
        args = ["run", "--scenario", path, "--max-iters", "100",
                "--stop-tol", "1e-12", "--record-every", "20"]
        a = runner.invoke(main, args).output
        b = runner.invoke(main, args).output
        assert a == b


class TestKmt:
    def test_trace_columns(self, runner, write_scenario):
        path = write_scenario(SINGLE_LINK_TEXT)
        result = runner.invoke(
            main, ["kmt", "--scenario", path, "--horizon", "2.0"]
        )
        assert result.exit_code == 0
        lines = body_lines(result.output)
        assert lines[0] == "t,x1,x2,error2,welfare,min_slack"
        assert len(lines) == 1 + 201  # horizon 2.0 at default h = 0.01

    def test_bad_parameters(self, runner, write_scenario):
        path = write_scenario(SINGLE_LINK_TEXT)
        result = runner.invoke(
            main, ["kmt", "--scenario", path, "--kappa", "-1"]
        )
        assert result.exit_code == 2

    def test_figure_rendered(self, runner, write_scenario, tmp_path):
        path = write_scenario(SINGLE_LINK_TEXT)
        fig = tmp_path / "kmt.png"
        out = tmp_path / "kmt.csv"
        result = runner.invoke(
            main, ["kmt", "--scenario", path, "--horizon", "1.0",
                   "--output", str(out), "--figure", str(fig)],
        )
        assert result.exit_code == 0
        assert fig.exists() and fig.stat().st_size > 0


class TestCompare:
    def test_rows_per_system_and_kappa(self, runner, write_scenario):
        path = write_scenario(SINGLE_LINK_TEXT)
        result = runner.invoke(
            main, ["compare", "--scenario", path, "--kappa-list", "1,10",
                   "--horizon", "30"],
        )
        assert result.exit_code == 0
        lines = body_lines(result.output)
        assert lines[0] == "system,kappa,time_to_threshold,reached"
        assert len(lines) == 5
        systems = [ln.split(",")[0] for ln in lines[1:]]
        assert systems == ["di", "kmt", "di", "kmt"]
        di_rows = [ln.split(",") for ln in lines[1:] if ln.startswith("di")]
        for row in di_rows:
            assert row[3] == "1"  # the inclusion flow reaches 1e-2 here

    def test_bad_inputs(self, runner, write_scenario):
        path = write_scenario(SINGLE_LINK_TEXT)
        assert runner.invoke(
            main, ["compare", "--scenario", path, "--kappa-list", "0"]
        ).exit_code == 2
        assert runner.invoke(
            main, ["compare", "--scenario", path, "--threshold", "-1"]
        ).exit_code == 2

    def test_figure_rendered(self, runner, write_scenario, tmp_path):
        path = write_scenario(SINGLE_LINK_TEXT)
        fig = tmp_path / "cmp.png"
        out = tmp_path / "cmp.csv"
        result = runner.invoke(
            main, ["compare", "--scenario", path, "--kappa-list", "1",
                   "--horizon", "20", "--output", str(out),
                   "--figure", str(fig)],
        )
        assert result.exit_code == 0
        assert fig.exists() and fig.stat().st_size > 0


class TestAppendixDemo:
    def test_limits_printed(self, runner):
        result = runner.invoke(main, ["appendix-demo", "--c", "1.0"])
        assert result.exit_code == 0
        lines = result.output.splitlines()
        assert lines[0].startswith("limit along (c, 0, d):")
        assert lines[1].startswith("limit along (c, d, d):")
        assert float(lines[2].split(":")[1]) == pytest.approx(1.0, abs=1e-6)

    def test_nonpositive_c_rejected(self, runner):
        assert runner.invoke(main, ["appendix-demo", "--c", "0"]).exit_code == 2
