import json
import subprocess
import sys

import pytest

from qpusim import cli
from qpusim.config import ConfigError, GlobalConfig, config_schema, default_config, load_config


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# -- config ---------------------------------------------------------------


def test_bundled_config_is_default():
    assert default_config() == GlobalConfig()
    assert load_config() == GlobalConfig()


def test_config_round_trip(tmp_path):
    cfg = GlobalConfig()
    p = tmp_path / "c.json"
    p.write_text(cfg.to_json())
    assert load_config(p) == cfg


def test_unknown_key_rejected(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"thermal": {"wiring": {"n_qubits": 3}}}))
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ConfigError):
        load_config(p)


def test_partial_config_falls_back_to_defaults(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"seed": 7}))
    cfg = load_config(p)
    assert cfg.seed == 7 and cfg.thermal == GlobalConfig().thermal


def test_schema_lists_sections_and_unit_suffixes():
    s = config_schema()
    assert s["additionalProperties"] is False
    assert {"patgen", "pulsegen", "analog", "noise", "detector", "thermal", "qexp"} <= set(s["properties"])


# -- exit codes -----------------------------------------------------------


def test_config_error_exit_1(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"nope": 1}))
    code, _, err = run(["thermal", "--config", str(p)], capsys)
    assert code == 1
    assert json.loads(err)["error"] == "config"


def test_validation_error_exit_2(capsys):
    code, _, err = run(["vdac-ramp", "--target-v", "0.9"], capsys)
    assert code == 2
    assert "message" in json.loads(err)
    code, _, _ = run(["pulse", "--sel1", "17"], capsys)
    assert code == 2


def test_missing_file_exit_2(tmp_path, capsys):
    code, _, _ = run(["assemble", str(tmp_path / "missing.qpat")], capsys)
    assert code == 2


# -- outputs --------------------------------------------------------------


def test_reproduce_6d(capsys):
    code, out, _ = run(["reproduce", "6d", "--format", "csv"], capsys)
    assert code == 0
    bits = [int(line.split(",")[2]) for line in out.strip().splitlines()[1:]]
    assert bits == [1088, 1088, 896, 1024]


def test_noise_injector_total(capsys):
    code, out, _ = run(["noise-injector"], capsys)
    assert code == 0
    assert json.loads(out)["total_rms_v"] == pytest.approx(27.4e-6, rel=0.05)


def test_thermal_total(tmp_path, capsys):
    p = tmp_path / "paper.json"
    p.write_text(GlobalConfig().to_json())
    code, out, _ = run(["thermal", "--config", str(p)], capsys)
    assert code == 0
    assert json.loads(out)["total_w"] == pytest.approx(21e-3, rel=0.10)


def test_disassemble_round_trip(tmp_path, capsys):
    img = tmp_path / "s1.bin"
    code, _, _ = run(["assemble", "script1", "--image", str(img)], capsys)
    assert code == 0 and img.stat().st_size == 512 * 8
    code, out, _ = run(["disassemble", str(img)], capsys)
    assert code == 0 and out


SMALL = {
    "assemble": ["script3"],
    "budget": [],
    "phases": ["--duration-s", "16e-9"],
    "pulse": [],
    "vdac-ramp": [],
    "noise-injector": [],
    "noise-detector": [],
    "thermal": [],
    "thermal-scale": ["--multiplier", "1", "--multiplier", "10"],
    "experiment": ["--trials", "500"],
    "bias-scan": ["--trials", "50"],
    "acf": ["--trials", "500", "--max-lag", "5"],
    "reproduce": ["8d"],
    "schema": [],
    "config": [],
}


def test_every_subcommand_is_covered():
    parser = cli.build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    assert set(sub.choices) - {"disassemble"} == set(SMALL)


@pytest.mark.parametrize("fmt", ["json", "csv"])
@pytest.mark.parametrize("name", sorted(SMALL))
def test_format_and_out(name, fmt, tmp_path, capsys):
    out = tmp_path / f"{name}.{fmt}"
    code, stdout, _ = run([name, *SMALL[name], "--format", fmt, "--out", str(out)], capsys)
    assert code == 0
    assert stdout == ""
    text = out.read_text()
    if fmt == "json":
        json.loads(text)
    else:
        assert "," in text.splitlines()[0]


def test_help_documents_flags():
    res = subprocess.run([sys.executable, "-m", "qpusim", "experiment", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for flag in ("--config", "--format", "--out", "--seed", "--step-v", "--trials"):
        assert flag in res.stdout
