import csv
import io
import math
import subprocess
import sys
from pathlib import Path

import pytest

from rectent import cli, entropy as ent
from rectent.geometry import QuadratureError

GOLDEN = Path(__file__).parent / "golden"

# per-field tolerances for golden comparison; unnamed numeric fields use DEFAULT_TOL
DEFAULT_TOL = (1e-9, 1e-12)
FIELD_TOL = {
    "std_error": (1e-6, 1e-15),
    "residual": (0.0, 1e-9),
    "gap": (1e-8, 1e-10),
}

# (golden file, argv) pairs: one happy path per subcommand
CASES = [
    ("entropy_circle.csv", ["entropy", "--samples", "100000"]),
    ("marginal_circle.csv", ["marginal", "--coords", "2"]),
    ("chain_circle.csv", ["chain", "--coords", "2"]),
    ("mi_gauss.csv", ["mi", "--source", "gauss:corr:0.5"]),
    ("aep_vonmises_n1.csv", ["aep", "--source", "circle:vonmises:1", "--n", "1",
                             "--samples", "2000"]),
    ("code_vonmises.csv", ["code", "--source", "circle:vonmises:1"]),
    ("gamma.csv", ["gamma", "--s-points", "9"]),
    ("slb.csv", ["slb", "--s-points", "19"]),
    ("envelope.csv", ["envelope", "--s-points", "81"]),
    ("rdupper_64.csv", ["rdupper", "--n", "64"]),
]
FIGURE_FILES = ("gammas.csv", "slb_d01.csv", "envelope.csv", "upper.csv", "gaps.csv")


def run_cli(argv, capsys):
    code = cli.run(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def parse(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


def as_number(v):
    try:
        return float(v)
    except ValueError:
        return None


def assert_matches_golden(text, golden_text):
    header, rows = parse(text)
    g_header, g_rows = parse(golden_text)
    assert header == g_header
    assert len(rows) == len(g_rows)
    for row, g_row in zip(rows, g_rows):
        for name, v, g in zip(header, row, g_row):
            x, y = as_number(v), as_number(g)
            if x is None or y is None:
                assert v == g, name
            else:
                rel, abs_ = FIELD_TOL.get(name, DEFAULT_TOL)
                assert x == pytest.approx(y, rel=rel, abs=abs_), name


def table(text):
    header, rows = parse(text)
    return {r[0]: [float(v) for v in r[1:]] for r in rows}


class TestGolden:
    @pytest.mark.parametrize("golden,argv", CASES, ids=[c[0] for c in CASES])
    def test_happy_path(self, golden, argv, capsys):
        code, out, err = run_cli(argv + ["--format", "csv"], capsys)
        assert code == 0, err
        assert_matches_golden(out, (GOLDEN / golden).read_text())

    def test_figures(self, tmp_path, capsys):
        code, out, err = run_cli(["figures", "--out", str(tmp_path)], capsys)
        assert code == 0, err
        assert out.splitlines() == [str(tmp_path / n) for n in FIGURE_FILES]
        for name in FIGURE_FILES:
            assert_matches_golden((tmp_path / name).read_text(),
                                  (GOLDEN / "figures" / name).read_text())


class TestValues:
    """The worked examples, checked against closed forms rather than goldens."""

    def test_entropy_circle(self, capsys):
        _, out, _ = run_cli(["entropy", "--format", "csv"], capsys)
        t = table(out)
        assert t["quadrature"][0] == pytest.approx(math.log(2 * math.pi), abs=1e-6)
        assert f"{t['quadrature'][0]:.6f}" == "1.837877"

    def test_bits_flag(self, capsys):
        _, out, _ = run_cli(["entropy", "--bits", "--format", "csv"], capsys)
        assert parse(out)[0][1] == "entropy_bits"
        assert table(out)["analytic"][0] == pytest.approx(math.log2(2 * math.pi), abs=1e-10)

    def test_chain_table(self, capsys):
        _, out, _ = run_cli(["chain", "--coords", "2", "--format", "csv"], capsys)
        t = table(out)
        assert t["joint"][0] == pytest.approx(1.837877, abs=1e-6)
        assert t["marginal"][0] == pytest.approx(0.451583, abs=1e-6)
        assert t["conditional"][0] == pytest.approx(0.693147, abs=1e-6)
        assert t["correction"][0] == pytest.approx(-0.693147, abs=1e-6)
        assert abs(t["residual"][0]) < 1e-5

    def test_marginal_routes(self, capsys):
        _, out, _ = run_cli(["marginal", "--coords", "1", "--format", "csv"], capsys)
        t = table(out)
        for route in ("coarea", "direct"):
            assert t[route][0] == pytest.approx(math.log(math.pi / 2), abs=1e-6)

    def test_rdupper_two(self, capsys):
        _, out, _ = run_cli(["rdupper", "--n", "2", "--format", "csv"], capsys)
        _, rows = parse(out)
        D, R = map(float, rows[0])
        assert f"{D:.6f}" == "0.594715" and f"{R:.6f}" == "0.693147"

    def test_rdupper_curve(self, capsys):
        _, out, _ = run_cli(["rdupper", "--format", "csv"], capsys)
        _, rows = parse(out)
        assert len(rows) == 1024 and float(rows[0][0]) == 1.0

    def test_mi_infinite_for_circle(self, capsys):
        code, out, _ = run_cli(["mi", "--format", "csv"], capsys)
        assert code == 0
        assert parse(out)[1][0] == ["1", "1", "1", "inf"]

    def test_mi_independent_torus(self, capsys):
        _, out, _ = run_cli(["mi", "--source", "product:circle:uniformxcircle:uniform",
                             "--format", "csv"], capsys)
        assert float(parse(out)[1][0][3]) == pytest.approx(0.0, abs=1e-8)

    def test_aep_pair_sandwich(self, capsys):
        _, out, _ = run_cli(["aep", "--source", "circle:vonmises:1", "--n", "2",
                             "--epsilon", "0.2", "--samples", "1000", "--format", "csv"], capsys)
        header, rows = parse(out)
        rec = dict(zip(header, rows[0]))
        assert rec["sandwich_holds"] == "true"
        assert float(rec["lower"]) <= float(rec["measure"]) <= float(rec["upper"])

    def test_table_format_aligned(self, capsys):
        _, out, _ = run_cli(["chain", "--coords", "2"], capsys)
        lines = out.splitlines()
        assert lines[0].split() == ["term", "nats"] and len(lines) == 6
        assert "," not in out

    def test_out_file(self, tmp_path, capsys):
        target = tmp_path / "e.csv"
        code, out, _ = run_cli(["entropy", "--format", "csv", "--out", str(target)], capsys)
        assert code == 0 and out == ""
        assert target.read_text().startswith("method,entropy_nats")


class TestExitCodes:
    @pytest.mark.parametrize("argv", [
        ["entropy", "--source", "nonsense:source"],
        ["chain"],
        ["chain", "--coords", "3"],
        ["chain", "--coords", "1,1"],
        ["code", "--delta", "-1"],
        ["code", "--delta", "abc"],
        ["gamma", "--s-min", "0"],
        ["gamma", "--source", "gauss:corr:0.5"],
        ["figures"],
        ["figures", "--source", "circle:vonmises:1", "--out", "."],
        ["rdupper", "--n", "0"],
        ["aep", "--source", "product:circle:uniformxcircle:uniform", "--n", "2"],
        ["frobnicate"],
        ["entropy", "--seed", "notanint"],
    ])
    def test_usage_errors(self, argv, capsys):
        code, _, err = run_cli(argv, capsys)
        assert code == 2
        assert err

    def test_missing_out_directory(self, tmp_path, capsys):
        code, _, err = run_cli(["entropy", "--out", str(tmp_path / "no" / "x.csv")], capsys)
        assert code == 2 and "does not exist" in err

    def test_figures_out_must_be_directory(self, tmp_path, capsys):
        f = tmp_path / "file"
        f.write_text("")
        code, _, _ = run_cli(["figures", "--out", str(f)], capsys)
        assert code == 2

    def test_numerical_failure(self, monkeypatch, capsys):
        def fail(*a, **k):
            raise QuadratureError("integrand did not converge")

        monkeypatch.setattr(ent, "entropy_quadrature", fail)
        code, out, err = run_cli(["entropy"], capsys)
        assert code == 1 and out == ""
        assert "numerical failure in entropy" in err and "QuadratureError" in err

    def test_help(self, capsys):
        code, out, _ = run_cli(["--help"], capsys)
        assert code == 0 and "envelope" in out and "--seed" in out


class TestDeterminism:
    @pytest.mark.parametrize("argv", [
        ["entropy", "--source", "circle:vonmises:1", "--samples", "20000", "--seed", "7"],
        ["aep", "--source", "circle:vonmises:1", "--n", "20", "--samples", "3000",
         "--seed", "7"],
    ])
    def test_seeded_runs_identical(self, argv, capsys):
        a = run_cli(argv, capsys)[1]
        b = run_cli(argv, capsys)[1]
        assert a == b

    def test_seed_changes_monte_carlo(self, capsys):
        base = ["entropy", "--source", "circle:vonmises:1", "--samples", "20000"]
        a = run_cli(base + ["--seed", "1"], capsys)[1]
        b = run_cli(base + ["--seed", "2"], capsys)[1]
        assert a != b

    def test_separate_processes_identical(self, tmp_path):
        argv = [sys.executable, "-m", "rectent.cli", "aep", "--source", "circle:vonmises:1",
                "--n", "1", "--samples", "1000", "--format", "csv"]
        outs = [subprocess.run(argv, capture_output=True, check=True).stdout for _ in range(2)]
        assert outs[0] == outs[1] and outs[0]
