import csv
import json

import numpy as np
import pytest

from hessquot.cli import main
from hessquot.config import ConfigError, parse_config

SOLVE = """\
subcommand = solve
problem.n = 3
problem.P = 2
problem.k = 2
problem.l = 0
problem.p = 4
problem.q = 1
phi.kind = constant
phi.value = 12
grid.resolution = 24
"""


def run(tmp_path, text, *extra, name="run.cfg"):
    cfg = tmp_path / name
    cfg.write_text(text)
    out = tmp_path / "out"
    return main(["--config", str(cfg), "--out", str(out), "-q", *extra]), out


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_constant_solve(tmp_path):
    code, out = run(tmp_path, SOLVE)
    assert code == 0
    rows = read_csv(out / "solution.csv")
    assert max(abs(float(r["u"]) - 1) for r in rows) < 1e-8
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] and report["case"] == "nonhomogeneous"
    assert (out / "trace.csv").exists()
    effective = (out / "config.effective").read_text()
    assert "problem.P = 2" in effective and "# computed: problem.case = nonhomogeneous" in effective


def test_reruns_are_byte_identical(tmp_path):
    text = SOLVE.replace("phi.kind = constant", "phi.kind = axisym_power\nphi.base = 12\nphi.delta = 0.1")
    outputs = []
    for i in range(2):
        cfg = tmp_path / f"c{i}.cfg"
        cfg.write_text(text)
        out = tmp_path / f"o{i}"
        assert main(["--config", str(cfg), "--out", str(out), "-q"]) == 0
        outputs.append({p.name: p.read_bytes() for p in out.iterdir() if p.name != "config.effective"})
    assert outputs[0] == outputs[1]


def test_solve_rejects_homogeneous_case(tmp_path):
    code, _ = run(tmp_path, SOLVE.replace("problem.p = 4", "problem.p = 1"))
    assert code == 2


def test_homogeneous_constant(tmp_path):
    text = SOLVE.replace("subcommand = solve", "subcommand = homogeneous")
    text = text.replace("problem.p = 4", "problem.p = 2").replace("problem.q = 1", "problem.q = 2")
    text = text.replace("phi.value = 12", "phi.value = 3")
    code, out = run(tmp_path, text)
    assert code == 0
    assert json.loads((out / "report.json").read_text())["gamma"] == pytest.approx(4.0, abs=1e-8)


def test_check_phi(tmp_path, capsys):
    code, out = run(tmp_path, SOLVE.replace("subcommand = solve", "subcommand = check-phi"))
    assert code == 0
    assert json.loads((out / "report.json").read_text())["phi"]["passed"]


def test_phi_from_file(tmp_path):
    theta = np.linspace(0, np.pi, 25)
    with open(tmp_path / "phi.csv", "w") as fh:
        fh.write("theta,phi,value\n")
        for t in theta:
            fh.write(f"{t},0,{12 * (1 + 0.05 * np.cos(t)) ** -5}\n")
    text = SOLVE.replace("phi.kind = constant", f"phi.kind = file\nphi.path = {tmp_path / 'phi.csv'}")
    code, out = run(tmp_path, text)
    assert code == 0


def test_verify_properties(tmp_path):
    text = "subcommand = verify-properties\nproperties.dims = 3,2,1,0\nproperties.trials = 100\n"
    code, out = run(tmp_path, text, "--seed", "1")
    assert code == 0
    rows = read_csv(out / "properties.csv")
    assert rows and all(r["pass"] == "True" for r in rows)


def test_k_larger_than_n_fails(tmp_path):
    code, _ = run(tmp_path, "subcommand = verify-properties\nproperties.dims = 3,2,4,0\nproperties.trials = 10\n")
    assert code == 2
    code, _ = run(tmp_path, SOLVE.replace("problem.k = 2", "problem.k = 4"))
    assert code == 2


@pytest.mark.parametrize("text, key", [
    ("problem.x = 1\n", "problem.x"),
    ("problem.n = two\n", "problem.n"),
    ("problem.n = 3\nproblem.n = 4\n", "problem.n"),
    ("subcommand = solve\n", "problem."),
    ("grid.backend = axisym\ngrid.resolution = 8,16\n", "grid.resolution"),
])
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError, match=key):
        parse_config(text)


def test_config_is_case_sensitive():
    cfg = parse_config(SOLVE)
    assert cfg.P == 2 and cfg.p == 4.0


def test_missing_config_file(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "nope.cfg")]) == 2
    assert "--config" in capsys.readouterr().err


def test_cli_overrides(tmp_path):
    code, out = run(tmp_path, SOLVE, "--resolution", "16")
    assert code == 0
    assert "grid.resolution = 16" in (out / "config.effective").read_text()
    assert len(read_csv(out / "solution.csv")) == 17


def test_inline_comments():
    cfg = parse_config(SOLVE.replace("phi.kind = constant", "phi.kind = constant   # or axisym_power"))
    assert cfg.phi_kind == "constant"
