import numpy as np
import pytest

from tvflow.cli import main
from tvflow.config import ExperimentConfig, load_config, parse_config
from tvflow.errors import ConfigError
from tvflow.experiments import SCENARIOS, defaults_for, run_scenario

GOOD = """
[experiment]
scenario = ball-curvature
seed = 7
output = runs/ball   # inline comment

[grid]
dim = 2
N = 64

[params]
radius = 0.25
rel_tol = 0.05
"""


def test_parse_config_types():
    cfg = parse_config(GOOD, defaults_for)
    assert cfg.scenario == "ball-curvature" and cfg.seed == 7 and cfg.output == "runs/ball"
    assert cfg.dim == 2 and cfg.N == 64
    assert cfg.params == {"radius": 0.25, "rel_tol": 0.05}
    ladder = parse_config("[experiment]\nscenario = stability-ladder\n[params]\nm_ladder = 10, 100\n", defaults_for)
    assert ladder.params["m_ladder"] == (10.0, 100.0)


@pytest.mark.parametrize(
    "text, msg",
    [
        ("[experiment]\nscenario = ball-curvature\n[params]\nradiuss = 0.2\n", "unknown key 'radiuss'"),
        ("[experiment]\nscenario = ball-curvature\ncolour = red\n", "unknown key 'colour'"),
        ("[experiment]\nscenario = ball-curvature\n[grid]\nsize = 3\n", "unknown key 'size'"),
        ("[experiment]\nscenario = ball-curvature\n[extra]\n", r"unknown section \[extra\]"),
        ("[experiment]\nseed = 1\n", "missing key 'scenario'"),
        ("[experiment]\nscenario = ball-curvature\nthis line is broken\n", "line 3"),
        ("[experiment]\nscenario = ball-curvature\n[params]\nradius = wide\n", "cannot read radius"),
        ("[experiment]\nscenario = ball-curvature\n[params]\nrel_tol = -0.1\n", "tolerance rel_tol must be positive"),
        ("[experiment]\nscenario = ball-curvature\n[grid]\ndim = 4\n", "dim must be 1, 2 or 3"),
        ("[experiment]\nscenario = ball-curvature\nseed = x\n", "cannot read seed"),
    ],
)
def test_config_errors_name_the_problem(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text, defaults_for)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "nope.cfg")


def test_output_dir_precedence(monkeypatch, tmp_path):
    cfg = ExperimentConfig("whole-torus", output="explicit")
    monkeypatch.delenv("TVFLOW_OUT", raising=False)
    assert str(cfg.output_dir()) == "explicit"
    assert str(ExperimentConfig("whole-torus").output_dir()) == "tvflow-out/whole-torus"
    monkeypatch.setenv("TVFLOW_OUT", str(tmp_path))
    assert cfg.output_dir() == tmp_path / "whole-torus"


def test_every_criterion_has_one_scenario():
    numbers = [sc.criterion for sc in SCENARIOS.values() if sc.criterion is not None]
    assert sorted(numbers) == list(range(1, 13))


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in ("annulus-calibrable", "facet-speed-1d", "stability-ladder", "ball-curvature"):
        assert name in out
    assert len(out.strip().splitlines()) == len(SCENARIOS)


def _write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_run_writes_summary_and_is_deterministic(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("TVFLOW_OUT", raising=False)
    text = f"[experiment]\nscenario = whole-torus\noutput = {tmp_path / 'a'}\n[grid]\nN = 32\n"
    cfg = _write(tmp_path, text)
    assert main(["run", cfg, "--tier", "quick"]) == 0
    first = (tmp_path / "a" / "summary.csv").read_bytes()
    assert first.splitlines()[0] == b"name,measured,expected,tolerance,result"
    assert b",pass" in first
    assert main(["run", cfg, "--tier", "quick"]) == 0
    assert (tmp_path / "a" / "summary.csv").read_bytes() == first
    assert "whole-torus: PASS" in capsys.readouterr().out


def test_run_failing_assertion_exits_one(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TVFLOW_OUT", str(tmp_path))
    text = "[experiment]\nscenario = ball-curvature\n[grid]\nN = 64\n[params]\nrel_tol = 1e-9\n"
    assert main(["run", _write(tmp_path, text), "--tier", "quick"]) == 1
    out = capsys.readouterr().out
    assert "FAIL ball mean Lambda" in out
    assert (tmp_path / "ball-curvature" / "summary.csv").exists()


def test_run_config_errors_exit_two(tmp_path, capsys):
    bad = _write(tmp_path, "[experiment]\nscenario = ball-curvature\n[params]\nbogus = 1\n")
    assert main(["run", bad]) == 2
    assert "bogus" in capsys.readouterr().err
    unknown = _write(tmp_path, "[experiment]\nscenario = nothing\n", "u.cfg")
    assert main(["run", unknown]) == 2
    assert "unknown scenario" in capsys.readouterr().err
    no_grid = _write(tmp_path, "[experiment]\nscenario = wulff-identity\n[grid]\nN = 64\n", "g.cfg")
    assert main(["run", no_grid]) == 2
    assert "does not take [grid] N" in capsys.readouterr().err


def test_verify_subset(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TVFLOW_OUT", str(tmp_path))
    assert main(["verify", "--tier", "quick", "--only", "whole-torus", "exact-identities"]) == 0
    out = capsys.readouterr().out
    assert "2/2 scenarios passed" in out
    assert (tmp_path / "exact-identities" / "summary.csv").exists()
    assert main(["verify", "--only", "nothing"]) == 2


QUICK = [n for n in SCENARIOS if n not in ("stability-ladder", "lipschitz-preservation", "resolvent-comparison")]


@pytest.mark.parametrize("name", QUICK)
def test_quick_tier_scenarios_run(tmp_path, name):
    out = run_scenario(name, seed=3, outdir=tmp_path, tier="quick")
    assert out.assertions
    rows = (tmp_path / "summary.csv").read_text().splitlines()
    assert len(rows) == len(out.assertions) + 1
    assert all(np.isfinite(a.measured) for a in out.assertions if isinstance(a.measured, float))
