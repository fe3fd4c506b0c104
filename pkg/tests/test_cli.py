import csv
import math

import pytest

from chaoskit.cli import EXIT_GUARD, EXIT_INVALID, EXIT_OK, ValidationError, parse_n_list, read_config, run


def table(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_n_list_grammar():
    assert parse_n_list("2,4,8,16") == [2, 4, 8, 16]
    assert parse_n_list("4..32") == [4, 8, 16, 32]
    assert parse_n_list("3..20") == [3, 6, 12]
    assert parse_n_list("2, 5..10,2") == [2, 5, 10]
    for bad in ["", "0", "a", "8..4", "1..x", "-2"]:
        with pytest.raises(ValidationError):
            parse_n_list(bad)


def test_error_rate_square(tmp_path):
    assert run(["error-rate", "--payoff", "power:2", "--T", "1", "--N-list", "2,4,8,16",
                "--out", str(tmp_path)]) == EXIT_OK
    rows = table(tmp_path / "rate.csv")
    assert [int(r["N"]) for r in rows] == [2, 4, 8, 16]
    for r in rows:
        assert float(r["err_sq"]) == pytest.approx(2 / int(r["N"]), rel=1e-12)
    fit = {r["fit"]: r for r in table(tmp_path / "fit.csv")}
    assert float(fit["tail_half"]["slope"]) == pytest.approx(-0.5, abs=1e-12)
    assert float(fit["full"]["slope"]) == pytest.approx(-0.5, abs=1e-12)


def test_occupation_bound_column(tmp_path):
    assert run(["occupation", "--T", "1", "--N-list", "4..1024", "--k-max", "2001",
                "--out", str(tmp_path)]) == EXIT_OK
    rows = table(tmp_path / "z.csv")
    assert {int(r["k"]) for r in rows} == set(range(2, 2002))
    for r in rows:
        assert float(r["z"]) <= float(r["bound"]) <= 9 / int(r["N"]) * (1 + 1e-15)


def test_clt_command(tmp_path):
    assert run(["clt", "--payoff", "power:2", "--N", "64", "--p-max", "1", "--samples", "100000",
                "--seed", "7", "--out", str(tmp_path)]) == EXIT_OK
    for r in table(tmp_path / "clt.csv"):
        assert abs(float(r["z"])) <= 3
    assert float(table(tmp_path / "clt.csv")[0]["limit_var"]) == pytest.approx(2.0, rel=1e-6)
    assert len(table(tmp_path / "samples.csv")) == 100_000
    assert (tmp_path / "walk.csv").exists() and (tmp_path / "cross_cov.csv").exists()


def test_chaos_and_alpha(tmp_path):
    assert run(["chaos", "--payoff", "heaviside", "--N-list", "1,2", "--n-max", "5",
                "--out", str(tmp_path)]) == EXIT_OK
    rows = table(tmp_path / "spectrum_N1.csv")
    c = {int(r["k_1"]): float(r["coeff"]) for r in rows}
    assert c[1] == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert (tmp_path / "spectrum_N2.csv").exists()
    assert run(["alpha", "--N-list", "2", "--degrees", "3", "--out", str(tmp_path)]) == EXIT_OK
    assert float(table(tmp_path / "alpha.csv")[0]["alpha"]) == pytest.approx(5.41421, abs=1e-5)


@pytest.mark.parametrize("argv,code", [
    (["error-rate", "--payoff", "put:1"], EXIT_INVALID),
    (["error-rate"], EXIT_INVALID),
    (["error-rate", "--payoff", "sin", "--N-list", "8..4"], EXIT_INVALID),
    (["clt", "--payoff", "sin", "--samples", "2"], EXIT_INVALID),
    (["nonsense"], EXIT_INVALID),
    ([], EXIT_INVALID),
    (["chaos", "--payoff", "sin", "--method", "tensor", "--N-list", "6", "--n-max", "4"], EXIT_GUARD),
    (["chaos", "--payoff", "heaviside", "--N-list", "64", "--n-max", "30"], EXIT_GUARD),
])
def test_exit_codes(tmp_path, argv, code):
    assert run(argv + ["--out", str(tmp_path)] if argv else argv) == code


def test_manifest_round_trip(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert run(["clt", "--payoff", "sin", "--N", "16", "--p-max", "2", "--samples", "3000",
                "--seed", "11", "--grid-points", "65", "--out", str(a)]) == EXIT_OK
    manifest = a / "manifest.cfg"
    cfg = read_config(manifest)
    assert cfg["command"] == "clt" and cfg["seed"] == "11"
    assert run(["clt", "--config", str(manifest), "--out", str(b)]) == EXIT_OK
    assert run(["--config", str(manifest), "--out", str(c)]) == EXIT_OK
    for name in ("clt.csv", "samples.csv", "walk.csv", "cross_cov.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes() == (c / name).read_bytes()


def test_cli_overrides_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("command = error-rate\npayoff = power:2\nN-list = 2,4\n")
    assert run(["error-rate", "--config", str(cfg), "--N-list", "2,4,8", "--out", str(tmp_path)]) == EXIT_OK
    assert [int(r["N"]) for r in table(tmp_path / "rate.csv")] == [2, 4, 8]
    bad = tmp_path / "bad.cfg"
    bad.write_text("command = error-rate\nbogus = 1\n")
    assert run(["--config", str(bad), "--out", str(tmp_path)]) == EXIT_INVALID
    assert run(["alpha", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_INVALID
