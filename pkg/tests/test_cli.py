import json

import pytest

from epicrit import config
from epicrit.cli import main
from epicrit.config import ConfigError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def run_cli(capsys, *argv):
    code = main(list(map(str, argv)))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    monkeypatch.setenv("EPI_OUTPUT_DIR", str(tmp_path / "out"))
    return tmp_path / "out"


SIS = "kind = meanfield  # comment\nmodel = SIS\nN = 1000\nreplicates = 20\nbase_seed = 7\nworkers = 1\n"


def test_parse_grammar():
    raw = config.parse_text("# header\n\n a = 1 \nmodel=SIS # trailing\n")
    assert raw == {"a": "1", "model": "SIS"}
    for bad in ("novalue\n", "1bad = 3\n", "a = 1\na = 2\n"):
        with pytest.raises(ConfigError):
            config.parse_text(bad)


def test_resolve_rejects_unknown_and_misplaced_keys():
    with pytest.raises(ConfigError, match="unknown key"):
        config.resolve({"kind": "meanfield", "model": "SIS", "N": "10", "colour": "red"})
    with pytest.raises(ConfigError, match="does not apply"):
        config.resolve({"kind": "diffusion", "model": "feller", "N": "10"})
    with pytest.raises(ConfigError, match="kind"):
        config.resolve({"kind": "nope"})
    with pytest.raises(ConfigError, match="expects int"):
        config.resolve({"kind": "meanfield", "model": "SIS", "N": "ten"})
    with pytest.raises(ConfigError, match="unstable"):
        config.resolve({"kind": "spde", "model": "none", "dt": "0.01"})


def test_resolved_defaults():
    cfg = config.resolve({"kind": "meanfield", "model": "SIS", "N": "8000"})
    assert cfg["J0"] == 90 and cfg["alpha"] == 0.5
    cfg = config.resolve({"kind": "meanfield", "model": "SIR", "N": "8000"})
    assert cfg["J0"] == 20 and cfg["alpha"] == pytest.approx(1 / 3)
    assert config.resolve(cfg) == cfg


def test_run_writes_outputs(capsys, tmp_path, outdir):
    cfgfile = write(tmp_path / "sis.cfg", SIS)
    code, out, err = run_cli(capsys, "run", cfgfile, "--set", "name=sis")
    assert code == 0 and err == ""
    res = (outdir / "sis" / "results.csv").read_bytes()
    assert b"\r" not in res
    lines = res.decode().splitlines()
    assert lines[0].split(",")[:3] == ["replicate", "T", "U"]
    assert len(lines) == 21
    man = json.loads((outdir / "sis" / "manifest.json").read_text())
    assert man["config"]["base_seed"] == 7 and man["config"]["J0"] == 32
    assert "version" in man


def test_zero_replicates(capsys, tmp_path, outdir):
    cfgfile = write(tmp_path / "z.cfg", SIS.replace("replicates = 20", "replicates = 0"))
    assert run_cli(capsys, "run", cfgfile)[0] == 0
    lines = (outdir / "meanfield" / "results.csv").read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("replicate,")
    assert (outdir / "meanfield" / "manifest.json").exists()


@pytest.mark.parametrize(
    "body, needle",
    [
        ("kind = meanfield\nmodel = SIS\nN = 100\nbogus = 1\n", "unknown key"),
        ("kind = meanfield\nmodel = XYZ\nN = 100\n", "model"),
        ("kind = meanfield\nmodel = SIS\nN = 100\nreplicates = -1\n", "replicates"),
        ("kind meanfield\n", "expected"),
    ],
)
def test_invalid_config_single_line_error(capsys, tmp_path, outdir, body, needle):
    cfgfile = write(tmp_path / "bad.cfg", body)
    code, out, err = run_cli(capsys, "run", cfgfile)
    assert code == 2 and out == ""
    assert err.startswith("error: ") and err.count("\n") == 1 and needle in err
    assert not outdir.exists() or not any(outdir.rglob("results.csv"))


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run_cli(capsys, "run", tmp_path / "nope.cfg")
    assert code == 2 and err.startswith("error: cannot read")


def test_override_is_applied(capsys, tmp_path, outdir):
    cfgfile = write(tmp_path / "sis.cfg", SIS)
    run_cli(capsys, "run", cfgfile, "--set", "replicates=3", "--set", "name=o")
    assert len((outdir / "o" / "results.csv").read_text().splitlines()) == 4


def test_determinism_and_manifest_round_trip(capsys, tmp_path, outdir):
    body = "kind = spatial\nmodel = coupled-SIR\nN = 200\nalpha = 0.5\nreplicates = 6\nbase_seed = 11\nstride = 5\n"
    cfgfile = write(tmp_path / "sp.cfg", body)
    run_cli(capsys, "run", cfgfile, "--set", "name=a", "--set", "workers=1")
    run_cli(capsys, "run", cfgfile, "--set", "name=b", "--set", "workers=2")
    for f in ("results.csv", "frames.csv"):
        assert (outdir / "a" / f).read_bytes() == (outdir / "b" / f).read_bytes()
    man = outdir / "a" / "manifest.json"
    run_cli(capsys, "run", man, "--set", "name=c")
    assert (outdir / "a" / "results.csv").read_bytes() == (outdir / "c" / "results.csv").read_bytes()


def test_first_stream_shifts_replicates(capsys, tmp_path, outdir):
    cfgfile = write(tmp_path / "d.cfg", "kind = diffusion\nmodel = feller\nreplicates = 4\nhorizon = 2\n")
    run_cli(capsys, "run", cfgfile, "--set", "name=all")
    run_cli(capsys, "run", cfgfile, "--set", "name=tail", "--set", "first_stream=2", "--set", "replicates=2")
    full = (outdir / "all" / "results.csv").read_text().splitlines()
    tail = (outdir / "tail" / "results.csv").read_text().splitlines()
    strip = lambda row: row.split(",", 1)[1]
    assert [strip(r) for r in full[3:]] == [strip(r) for r in tail[1:]]


def test_compare_self_and_disjoint(capsys, tmp_path):
    a = write(tmp_path / "a.csv", "x\n" + "\n".join(str(i) for i in range(100)) + "\n")
    b = write(tmp_path / "b.csv", "x\n" + "\n".join(str(i + 1000) for i in range(100)) + "\n")
    code, out, _ = run_cli(capsys, "compare", a, a, "--col", "x")
    assert code == 0 and "D=0 " in out and "PASS" in out
    code, out, _ = run_cli(capsys, "compare", a, b, "--col", "x", "--alpha", "0.05")
    assert code == 1 and "D=1 " in out and "FAIL" in out
    code, _, err = run_cli(capsys, "compare", a, b, "--col", "y")
    assert code == 2 and err.startswith("error: ") and "y" in err


def test_compare_kind_via_run(capsys, tmp_path, outdir):
    a = write(tmp_path / "a.csv", "x\n" + "\n".join(str(i) for i in range(100)) + "\n")
    cfgfile = write(tmp_path / "c.cfg", f"kind = compare\nfile_a = {a}\nfile_b = {a}\ncolumn = x\n")
    assert run_cli(capsys, "run", cfgfile)[0] == 0
    rows = (outdir / "compare" / "results.csv").read_text().splitlines()
    assert rows[0].startswith("column,") and rows[1].endswith("PASS")


def test_list_and_unknown_presets(capsys):
    code, out, _ = run_cli(capsys, "list-presets")
    assert code == 0
    names = [line.split()[0] for line in out.splitlines()]
    assert "sis-threshold" in names and "determinism" in names and len(names) == 11
    code, _, err = run_cli(capsys, "preset", "nope")
    assert code == 2 and "available" in err and "graph-oracle" in err


def test_graph_oracle_preset(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "preset", "graph-oracle", "--root", tmp_path, "--factor", "0.2")
    assert code == 0 and "PASS" in out
