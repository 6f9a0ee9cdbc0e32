import json

import pytest
from hypothesis import given, settings, strategies as st

from surfdiff import csvio
from surfdiff.cli import main
from surfdiff.config import ConfigError, RunConfig, parse_config, parse_pairs


class TestConfig:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg == RunConfig()

    def test_example(self):
        cfg = parse_config("""
            # protrusion ensemble
            mode = ensemble
            family = poisson
            lambda = 0.5      # bumps per unit area
            alpha = 1
            R_list = 10, 15, 20
            seeds_per_R = 50
            tol_rel = 1e-2
        """)
        assert cfg.mode == "ensemble" and cfg.family == "poisson"
        assert cfg.spec.lam == 0.5 and cfg.spec.alpha == 1.0
        assert cfg.R_list == (10.0, 15.0, 20.0) and cfg.seeds_per_R == 50

    def test_gaussian_alpha(self):
        cfg = parse_config("family = gaussian\nalpha = 0.1\nR = 10\nmodes = 256")
        f = cfg.realize()
        assert f.period == 20.0 and len(f.lattice) == (17**2 - 1) // 2

    @pytest.mark.parametrize("text,line,key", [
        ("family = poisson\nR = 1", 2, "R"),
        ("alpha2 = 3", 1, "alpha2"),
        ("mode = cell\nmode = bounds", 2, "mode"),
        ("\n\nR 10", 3, None),
        ("R = ten", 1, "R"),
        ("R =", 1, "R"),
        ("family = ridge\nlambda = 1", 2, "lambda"),
        ("family = gaussian\nalpha = 0.01\nR = 5", 2, "alpha"),
        ("family = gaussian\nmodes = 1000", 2, "modes"),
        ("tol_rel = -1", 1, "tol_rel"),
        ("R = nan", 1, "R"),
        ("family = sphere", 1, "family"),
    ])
    def test_errors_carry_line_and_key(self, text, line, key):
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.line == line and info.value.key == key
        assert f"line {line}" in str(info.value)

    def test_bump_diameter_message(self):
        with pytest.raises(ConfigError, match="R must exceed bump diameter 2"):
            parse_config("family = poisson\nR = 1")

    def test_overrides_win(self):
        cfg = parse_config("seed = 1\nR = 3", {"seed": "5"})
        assert cfg.seed == 5 and cfg.R == 3.0
        with pytest.raises(ConfigError):
            parse_config("", {"bogus": "1"})

    def test_mcmc_plan_validated(self):
        with pytest.raises(ConfigError):
            parse_config("mode = mcmc\ndt = 0.3\ndelta = 0.5")

    @settings(max_examples=100)
    @given(st.text(alphabet="abc =#\n1.", max_size=40))
    def test_parser_never_crashes(self, text):
        try:
            parse_pairs(text)
        except ConfigError:
            pass


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_surface(tmp_path, capsys):
    out = tmp_path / "s.txt"
    code, _, _ = run(["surface", "--set", "family=poisson", "--seed", "3", "--set", "grid_n=8",
                      "--out", str(out)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# field=poisson R=20.0 n=8 seed=3"
    assert len(lines) == 65


def test_cell_flat(capsys):
    code, out, _ = run(["cell"], capsys)
    assert code == 0
    header, row = out.strip().splitlines()
    assert header.split(",") == list(csvio.TENSOR_COLUMNS)
    vals = dict(zip(header.split(","), row.split(",")))
    assert float(vals["D11"]) == 1.0 and vals["converged"] == "true"


def test_cell_not_converged_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("family = gaussian\nalpha = 0.1\nR = 10\ntol_rel = 1e-9\nn0 = 8\nmax_n = 16\n")
    code, _, err = run(["cell", "--config", str(cfg), "--out", str(tmp_path / "o.csv")], capsys)
    assert code == 2
    assert json.loads(err)["exit"] == 2
    assert csvio.read_rows(tmp_path / "o.csv")[0]["converged"] is False


def test_bounds(tmp_path, capsys):
    out = tmp_path / "b.csv"
    code, _, _ = run(["bounds", "--set", "family=ridge", "--set", "n0=64", "--out", str(out)],
                     capsys)
    assert code == 0
    (row,) = csvio.read_rows(out)
    assert row["lower11"] < row["upper11"] and row["upper22"] == pytest.approx(1.0)


def test_mcmc(tmp_path, capsys):
    out, msd = tmp_path / "m.csv", tmp_path / "msd.csv"
    code, _, _ = run(["mcmc", "--set", "dt=1e-3", "--set", "T=50", "--set", "delta=0.5",
                      "--set", f"msd_out={msd}", "--out", str(out)], capsys)
    assert code == 0
    (row,) = csvio.read_rows(out)
    assert abs(row["D11"] - 1) <= 4 * row["se11"]
    assert csvio.read_rows(msd)[0] == {"lag": 0.0, "msd": 0.0}


def test_ensemble_byte_identical(tmp_path, capsys):
    cfg = tmp_path / "e.cfg"
    cfg.write_text("family = poisson\nlambda = 0.5\nR_list = 5, 6\nseeds_per_R = 2\n"
                   "tol_rel = 5e-2\nmax_n = 128\nseed = 4\n")
    outs = []
    for k, threads in enumerate((1, 1, 2)):
        p = tmp_path / f"e{k}.csv"
        code, _, _ = run(["ensemble", "--config", str(cfg), "--threads", str(threads),
                          "--out", str(p)], capsys)
        assert code == 0
        outs.append((p.read_bytes(), (tmp_path / f"e{k}.summary.csv").read_bytes()))
    assert outs[0] == outs[1] == outs[2]
    assert len(outs[0][0].splitlines()) == 5


def test_verify(capsys):
    code, out, _ = run(["verify", "--set", "family=ridge", "--set", "amplitude=0.5"], capsys)
    assert code == 0
    assert out.strip().splitlines()[-1] == "RESULT PASS"
    assert "FAIL" not in out


def test_verify_failure_exit_code(capsys):
    # a deliberately loose refinement leaves the duality residual too large
    code, out, _ = run(["verify", "--set", "family=ridge", "--set", "amplitude=2",
                        "--set", "n0=4", "--set", "max_n=4"], capsys)
    assert code == 3 and "RESULT FAIL" in out


@pytest.mark.parametrize("argv", [
    ["cell", "--set", "R"],
    ["cell", "--set", "bogus=1"],
    ["cell", "--config", "/nonexistent.cfg"],
    ["nosuchmode"],
    ["cell", "--set", "family=poisson", "--set", "R=1.5"],
])
def test_usage_errors(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1
    if err.strip().startswith("{"):
        assert json.loads(err.strip().splitlines()[-1])["exit"] == 1


def test_config_error_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("family = poisson\n\nR = 1\n")
    code, _, err = run(["cell", "--config", str(cfg)], capsys)
    rec = json.loads(err)
    assert code == 1 and rec["line"] == 3 and rec["key"] == "R"
    assert "bump diameter" in rec["message"]


def test_gaussian_ensemble_summary(tmp_path, capsys):
    cfg = tmp_path / "g.cfg"
    cfg.write_text("family = gaussian\nalpha = 0.1\nR_list = 5, 10, 15\nseeds_per_R = 2\n")
    code, _, _ = run(["ensemble", "--config", str(cfg), "--out", str(tmp_path / "g.csv")], capsys)
    assert code == 0
    summary = csvio.read_rows(tmp_path / "g.summary.csv")
    assert [r["R"] for r in summary] == [5.0, 10.0, 15.0]
    assert all(r["count"] == 2 and r["stdD11"] >= 0 for r in summary)


def test_cell_ridge_row(capsys):
    from conftest import ridge_Z

    code, out, _ = run(["cell", "--set", "family=ridge"], capsys)
    header, row = out.strip().splitlines()
    vals = dict(zip(header.split(","), row.split(",")))
    assert code == 0 and vals["converged"] == "true"
    assert float(vals["D11"]) == pytest.approx(1 / ridge_Z(1.0) ** 2, rel=1e-2)
    assert float(vals["D22"]) == pytest.approx(1.0, abs=1e-2)


def test_minimal_protrusion_config():
    cfg = parse_config("family = poisson\nlambda = 0.5\nalpha = 1\nR = 20\nseed = 1\n")
    assert cfg.realize().provenance["R"] == 20.0
