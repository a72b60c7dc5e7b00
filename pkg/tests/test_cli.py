import subprocess
import sys

import numpy as np
import pytest

from misscov import cli
from misscov.linalg import load_matrix
from misscov.pipeline import parse_report

SWEEP = """\
d: 3
spectrum:
  kind: geometric
  gamma: 0.7
rotation_seed: 7
p_values: [1.0]
N_values: [200, 400, 800]
trials: 2
master_seed: 5
estimators: [full, sample]
net_extra_random: 20
"""


@pytest.fixture
def dataset(tmp_path):
    rc = cli.main(["gen", "--d", "3", "--N", "400", "--p", "0.8", "--seed", "2", "--spectrum", "spiked:3,1",
                   "--rotation-seed", "1", "-o", str(tmp_path / "d.txt"), "--sigma-out", str(tmp_path / "s.txt")])
    assert rc == 0
    return tmp_path


def test_gen_and_estimate(dataset, capsys):
    assert load_matrix(dataset / "s.txt").trace() == pytest.approx(5.0)
    capsys.readouterr()
    assert cli.main(["estimate", str(dataset / "d.txt"), "--truth", str(dataset / "s.txt")]) == 0
    fields, sigma = parse_report(capsys.readouterr().out)
    assert sigma.dim == 3 and float(fields["error_opnorm"]) >= 0
    (dataset / "c.yaml").write_text("delta: 0.2\nseed: 3\n")
    out = dataset / "r.txt"
    assert cli.main(["estimate", str(dataset / "d.txt"), "--config", str(dataset / "c.yaml"), "-o", str(out)]) == 0
    assert parse_report(out.read_text())[0]["error_opnorm"] == "none"


def test_validation_exit_codes(dataset, capsys):
    (dataset / "bad.yaml").write_text("delta: 0.2\nkappa: 0.5\n")
    assert cli.main(["estimate", str(dataset / "d.txt"), "--config", str(dataset / "bad.yaml")]) == 1
    assert "bad.yaml:2: kappa" in capsys.readouterr().err
    assert cli.main(["estimate", str(dataset / "missing.txt")]) == 1
    assert cli.main(["gen", "--d", "3", "--N", "10", "--p", "1.5", "-o", str(dataset / "x")]) == 1
    assert cli.main(["gen", "--d", "3", "--N", "10", "--p", "0.5", "--spectrum", "geometric:2",
                     "-o", str(dataset / "x")]) == 1
    assert cli.main(["gen", "--d", "3", "--N", "10", "--p", "0.5", "--dist", "student_t", "--dof", "3",
                     "-o", str(dataset / "x")]) == 1
    assert cli.main(["sweep", str(dataset / "nope.yaml")]) == 1


def test_runtime_failure_exit_code(tmp_path):
    (tmp_path / "z.txt").write_text("20 2 1.0 0 gaussian\n" + "0 0\n" * 20)
    assert cli.main(["estimate", str(tmp_path / "z.txt")]) == 3


def test_sweep_and_rate(tmp_path, capsys):
    cfg = tmp_path / "s.yaml"
    cfg.write_text(SWEEP)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["sweep", str(cfg), "-o", str(a), "--summary", str(tmp_path / "sum.csv")]) == 0
    assert cli.main(["sweep", str(cfg), "-o", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "sum.csv").read_text().startswith("estimator_tag,p,N,")
    capsys.readouterr()
    assert cli.main(["rate", str(a), "--estimator", "sample"]) == 0
    out = capsys.readouterr().out
    assert "slope=" in out and "failures=0" in out
    assert cli.main(["rate", str(a), "--x-axis", "p"]) == 1


def test_verify_mutation(monkeypatch, capsys):
    from misscov import invariants

    real = invariants.run_invariant_suite
    broken = lambda seed, quick: real(seed, psi_fn=lambda x: float(np.clip(x, -2, 2)), quick=quick)
    monkeypatch.setattr(invariants, "run_invariant_suite", broken)
    assert cli.main(["verify", "--quick"]) == 2
    out = capsys.readouterr().out
    assert "FAIL lemma3" in out


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "misscov.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for sub in ("gen", "estimate", "sweep", "rate", "verify"):
        assert sub in out.stdout
