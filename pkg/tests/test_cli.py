import json

import pytest
from hypothesis import given, settings, strategies as st

from fracfb import cli


def write(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_registry_has_eleven_unique_drivers():
    names = [n for n, _ in cli.registry()]
    assert len(names) == 11 and len(set(names)) == 11
    drivers = [e.driver for e in cli.REGISTRY.values()]
    assert len(set(drivers)) == 11
    assert all(doc for _, doc in cli.registry())


def test_parse_comments_and_defaults():
    cfg = cli.parse_config("# header\nexperiment = scaling_identity  # trailing\n\ngrid.nx = 65\n")
    assert cfg.experiment == "scaling_identity"
    assert cfg["grid.nx"] == 65
    assert cfg["params.sigma"] == 0.5


def test_parse_float_lists():
    cfg = cli.parse_config("experiment = opt_reg_scan\nscan.sigmas = 0.3, 0.5\n")
    assert cfg["scan.sigmas"] == (0.3, 0.5)


@pytest.mark.parametrize("text,fragment", [
    ("experiment = scaling_identiy\n", "did you mean 'scaling_identity'"),
    ("experiment = scaling_identity\ngrid.nxx = 3\n", ":2: unknown key 'grid.nxx'; did you mean 'grid.nx'"),
    ("experiment = scaling_identity\nparams.sigma = 1.5\n", ":2: params.sigma = '1.5' out of range"),
    ("experiment = scaling_identity\ngrid.nx = ten\n", ":2: cannot parse grid.nx"),
    ("experiment = scaling_identity\nnonsense\n", ":2: expected 'key = value'"),
    ("grid.nx = 65\n", "missing required key 'experiment'"),
    ("experiment = scaling_identity\nseed = 1\nseed = 2\n", ":3: duplicate key 'seed'"),
])
def test_config_errors(text, fragment):
    with pytest.raises(cli.ConfigError) as exc:
        cli.parse_config(text, "c.cfg")
    assert fragment in str(exc.value)


@given(st.sampled_from(sorted(cli.SCHEMA)), st.integers(0, 3))
@settings(max_examples=50)
def test_typo_suggestion_names_a_valid_key(key, cut):
    typo = key[:-cut] + "q" if cut else key + "q"
    with pytest.raises(cli.ConfigError) as exc:
        cli.parse_config(f"experiment = scaling_identity\n{typo} = 1\n")
    suggestion = str(exc.value).split("did you mean ")[1].strip("?'")
    assert suggestion in cli.SCHEMA


def test_digest_ignores_output_dir():
    a = cli.parse_config("experiment = scaling_identity\noutput_dir = x\n")
    b = cli.parse_config("experiment = scaling_identity\noutput_dir = y\n")
    c = cli.parse_config("experiment = scaling_identity\nseed = 3\n")
    assert a.digest() == b.digest() != c.digest()


def test_number_format():
    assert cli._num(0.1) == "0.10000000000000001"
    assert cli._num(3) == "3" and cli._num(True) == "1"
    assert cli._num(float("nan")) == "nan"


def test_main_list(capsys):
    assert cli.main(["list"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 11


def test_main_validate(tmp_path, capsys):
    assert cli.main(["validate", str(write(tmp_path, "experiment = riesz_suite\n"))]) == 0
    assert cli.main(["validate", str(write(tmp_path, "experiment = riesz\n", "b.cfg"))]) == 2
    assert cli.main(["validate", str(tmp_path / "missing.cfg")]) == 2


def test_run_scaling_identity(tmp_path, monkeypatch):
    out = tmp_path / "out"
    monkeypatch.setenv(cli.OUTPUT_ENV, str(out))
    assert cli.main(["run", str(write(tmp_path, "experiment = scaling_identity\n"))]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["passed"] and man["checks"] == {"exponents_equal": True}
    assert man["elapsed_s"] < 1.0
    assert "scaling_identity.csv" in man["artifacts"]
    assert man["code_version"] and len(man["config_hash"]) == 64
    rows = (out / "scaling_identity.csv").read_text().splitlines()
    assert len(rows) == 401


def test_runtime_error_exit_code(tmp_path, monkeypatch):
    def boom(cfg, out):
        raise RuntimeError("kaput")

    monkeypatch.setitem(cli.REGISTRY, "scaling_identity",
                        cli.Experiment("scaling_identity", boom, "fails"))
    cfg = cli.parse_config("experiment = scaling_identity\n")
    code, man = cli.run(cfg, str(tmp_path))
    assert code == 3 and "kaput" in man["error"]
    assert (tmp_path / "manifest.json").exists()


def test_check_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setitem(cli.REGISTRY, "scaling_identity",
                        cli.Experiment("scaling_identity", lambda cfg, out: cli.Result({"x": False}), "fails"))
    code, man = cli.run(cli.parse_config("experiment = scaling_identity\n"), str(tmp_path))
    assert code == 1 and not man["passed"]


def test_runs_are_byte_identical(tmp_path):
    cfg = cli.parse_config("experiment = minimize_single\ngrid.nx = 65\ngrid.ny = 33\n")
    for d in ("a", "b"):
        assert cli.run(cfg, str(tmp_path / d))[0] == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir() if p.suffix in (".csv", ".dat"))
    assert "trace.csv" in files and "minimizer.csv" in files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
