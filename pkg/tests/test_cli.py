import csv
import json
from pathlib import Path

import numpy as np
import pytest

from sslab import cli

CONFIGS = sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.cfg"))


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_config_values():
    cfg = cli.parse_config(
        "# comment\nexperiment: spectrum\nmodel: III\nL: 6\nS: 0.5\nΓ: 1.0\nsector: 3, 3\nk: pi/2\nflag: true\n"
    )
    assert cfg["experiment"] == "spectrum"
    assert cfg["L"] == 6 and isinstance(cfg["L"], int)
    assert cfg["Gamma"] == 1.0
    assert cfg["sector"] == [3, 3]
    assert cfg["k"] == pytest.approx(np.pi / 2)


def test_parse_config_rejects_malformed_lines():
    with pytest.raises(cli.ConfigError):
        cli.parse_config("experiment spectrum\n")
    with pytest.raises(cli.ConfigError):
        cli.parse_config("L: 4\nL: 6\n")


def test_validate_missing_J():
    problems = cli.validate({"experiment": "spectrum", "model": "I", "L": 4, "Gamma": 1.0})
    assert any(p.startswith("J:") for p in problems)


def test_validate_filling_range():
    problems = cli.validate({"experiment": "meanfield", "model": "II", "d": 2, "J": 0.1, "Gamma": 1.0, "n": 1.3})
    assert any(p.startswith("n:") for p in problems)


def test_validate_negative_rate_and_seed():
    base = {"experiment": "spectrum", "model": "I", "L": 4, "J": 0.1, "Gamma": 1.0}
    assert cli.validate(base) == []
    assert any(p.startswith("Gamma:") for p in cli.validate({**base, "Gamma": -1.0}))
    assert any(p.startswith("seed:") for p in cli.validate({**base, "seed": 2**64}))
    assert cli.validate({**base, "experiment": "nope"})
    assert cli.validate({**base, "model": "IV"})


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    cfg = cli.load_config(path)
    assert cli.validate(cfg) == []


def test_spectrum_model_III_contains_zero(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["spectrum", "--config", "configs/spectrum_model_III.cfg", "--output", str(out)])
    assert code == 0
    rows = read_csv(out / "spectrum_eigenvalues.csv")
    vals = np.array([complex(float(r["eigenvalue_re"]), float(r["eigenvalue_im"])) for r in rows])
    assert np.abs(vals).min() < 1e-9
    meta = json.loads((out / "spectrum.json").read_text())
    assert meta["config"]["model"] == "III"
    assert meta["results"]["symmetry"] == "strong"
    assert "version" in meta and "timestamp" in meta


def test_gap_sweep_trend():
    cfg = cli.load_config("configs/gap_sweep_model_I.cfg")
    tables, _ = cli.run(cfg)
    gaps = [row[-1] for row in tables["gap"].rows]
    assert all(np.diff(gaps) < 0)


def test_csv_bytes_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["meanfield", "--config", "configs/a04_model_II_fixed_points.cfg", "--output", str(out)]) == 0
    csvs = sorted(p.name for p in a.glob("*.csv"))
    assert csvs
    for name in csvs:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_sde_seed_determinism(tmp_path):
    text = "experiment: hydro\nequation: kpz\nd: 1\nL: 16\nD: 1.0\nlam: 1.0\nDelta: 1.0\ndt: 0.05\nT: 5\nsamples: 5\nrealizations: 2\n"
    path = write_cfg(tmp_path, text)
    outs = []
    for name, seed in [("a", "7"), ("b", "7"), ("c", "8")]:
        out = tmp_path / name
        assert cli.main(["hydro", "--config", path, "--output", str(out), "--seed", seed]) == 0
        outs.append({p.name: p.read_bytes() for p in out.glob("*.csv")})
    assert outs[0] == outs[1]
    assert outs[0] != outs[2]


def test_complex_columns_split():
    t = cli.Table(["k", "value"])
    t.add(0.5, 1 + 2j)
    text = t.to_csv()
    assert text.splitlines()[0] == "k,value_re,value_im"
    assert text.splitlines()[1] == "0.5,1.0,2.0"


def test_negative_gamma_exit_code(tmp_path, capsys):
    path = write_cfg(tmp_path, "experiment: spectrum\nmodel: I\nL: 4\nJ: 0.1\nGamma: -1\n")
    out = tmp_path / "out"
    code = cli.main(["spectrum", "--config", path, "--output", str(out)])
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == 2
    assert any(v.startswith("Gamma:") for v in err["violations"])
    assert json.loads((out / "error.json").read_text()) == err


def test_experiment_mismatch_exit_code(tmp_path):
    path = write_cfg(tmp_path, "experiment: spectrum\nmodel: I\nL: 4\nJ: 0.1\nGamma: 1\n")
    assert cli.main(["hydro", "--config", path, "--output", str(tmp_path / "o")]) == 2


def test_numerical_error_exit_code(tmp_path):
    text = "experiment: hydro\nequation: kpz\nd: 1\nL: 16\nD: 1.0\nlam: 40\nDelta: 50\ndt: 0.5\nT: 200\nsamples: 5\n"
    path = write_cfg(tmp_path, text)
    out = tmp_path / "out"
    assert cli.main(["hydro", "--config", path, "--output", str(out)]) == 3
    assert json.loads((out / "error.json").read_text())["error"] == "numerical"


def test_missing_config_is_io_error(tmp_path):
    assert cli.main(["spectrum", "--config", str(tmp_path / "absent.cfg"), "--output", str(tmp_path / "o")]) == 4


def test_bad_seed_rejected():
    with pytest.raises(SystemExit):
        cli.main(["spectrum", "--config", "x.cfg", "--seed", "-1"])


def test_threads_flag_sets_environment(tmp_path, monkeypatch):
    for var in cli.THREAD_VARS:
        monkeypatch.delenv(var, raising=False)
    cli.main(["spectrum", "--config", "configs/a10c_symmetry_model_III.cfg", "--output", str(tmp_path), "--threads", "2"])
    import os

    assert all(os.environ[v] == "2" for v in cli.THREAD_VARS)


def test_version_string():
    assert cli.version_string()
