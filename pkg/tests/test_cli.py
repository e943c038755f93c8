import json
import math
import subprocess
import sys

import pytest

from bruijnregret.cli import ExperimentConfig, cmd_converge, loglog_slope, main
from bruijnregret.experts import static_panel, write_panel

CONFIG = """[panel]
family = static
values = 1,-1
[payoff]
spec = {payoff}
[sweep]
N = 16,32,64
probes = 0@0; 0.5,0@0.5
seed = 0
[strategy]
matchups = exact:exhaustive, block:greedy, gradient:random
N = 8
seeds = 0..1
[local]
k = 1..3
eps = 1e-2
contexts = 2
[output]
dir = {out}
"""


def write_config(tmp_path, payoff="max", out="out", **panel):
    text = CONFIG.format(payoff=payoff, out=tmp_path / out)
    if panel:
        body = "".join(f"{k} = {v}\n" for k, v in panel.items())
        text = text.replace("family = static\nvalues = 1,-1\n", body)
    p = tmp_path / f"{out}.ini"
    p.write_text(text)
    return str(p)


def test_validate_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.txt"
    write_panel(static_panel([1, -1]), good)
    assert main(["validate", str(good)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report
    agree = tmp_path / "agree.txt"
    write_panel(static_panel([0.5, 0.5]), agree)
    assert main(["validate", str(agree)]) == 1
    dup = tmp_path / "dup.txt"
    write_panel(static_panel([1, -1, -1]), dup)
    assert main(["validate", str(dup)]) == 1


def test_validate_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("2 1 1\n- 1 -1\n+ 1 2\n")
    assert main(["validate", str(bad)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_runtime_error_exit_code(tmp_path):
    assert main(["value", "--config", str(tmp_path / "missing.ini"), "--N", "4"]) == 2


def test_value_command(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["value", "--config", cfg, "--N", "4"]) == 0
    # unscaled; the rescaled value 0.75 times sqrt(N)
    assert float(capsys.readouterr().out) == pytest.approx(1.5, abs=1e-12)


def test_pde_command(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["pde", "--config", cfg, "--x", "0", "--t", "0"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["u"] == pytest.approx(math.sqrt(2 / math.pi), abs=1e-10)


def test_converge_linear_payoff_exact(tmp_path):
    cfg = ExperimentConfig.load(write_config(tmp_path, payoff="linear:0.25,0.75"))
    records, slope = cmd_converge(cfg)
    assert len(records) == 6
    assert all(not r["error"] for r in records)
    assert max(max(r["err_plus"], r["err_minus"]) for r in records) <= 1e-9


def test_converge_records_errors(tmp_path):
    cfg = ExperimentConfig.load(write_config(tmp_path, family="static", values="0.5,0.5"))
    records, slope = cmd_converge(cfg)
    assert all("SingularDiffusion" in r["error"] for r in records)
    assert math.isnan(slope)


def test_loglog_slope():
    assert loglog_slope([10, 100, 1000], [1.0, 0.1, 0.01]) == pytest.approx(-1.0)


def _read_all(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "timing.json"}


@pytest.mark.parametrize("command", ["converge", "simulate", "local"])
def test_outputs_reproducible(tmp_path, command):
    outs = []
    for run in ("a", "b"):
        cfg = write_config(tmp_path, out=run)
        assert main([command, "--config", cfg]) == 0
        outs.append(_read_all(tmp_path / run))
    a, b = outs
    assert a.keys() == b.keys() and a
    assert a == b
    assert (tmp_path / "a" / "timing.json").is_file()


def test_metadata_line(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["local", "--config", cfg, "--seed", "7"]) == 0
    lines = (tmp_path / "out" / "local.csv").read_text().splitlines()
    assert lines[-1].startswith("# version=0.1.0 config_hash=") and lines[-1].endswith("seed=7")
    assert main(["simulate", "--config", cfg]) == 0
    traj = sorted((tmp_path / "out").glob("traj_*.csv"))
    assert len(traj) == 6
    text = traj[0].read_text().splitlines()
    assert text[0].startswith("day,state,f,b,x_1,x_2,running_payoff")
    assert len(text) == 1 + 7 + 1


def test_module_entry_point(tmp_path):
    good = tmp_path / "good.txt"
    write_panel(static_panel([1, -1]), good)
    r = subprocess.run([sys.executable, "-m", "bruijnregret", "validate", str(good)],
                       capture_output=True, text=True)
    assert r.returncode == 0
