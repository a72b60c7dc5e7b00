import pytest

from misscov.config import (
    ConfigError,
    load_experiment_config,
    parse_estimator_overrides,
    parse_experiment_config,
)
from misscov.datagen import Spectrum, gaussian_kappa, student_t_kappa

GOOD = """\
d: 10
spectrum:
  kind: geometric
  gamma: 0.7
rotation_seed: 7
distribution:
  kind: student_t
  dof: 5
p_values: [0.3, 0.5, 1.0]
N_values: [500, 1000]
trials: 4
delta: 0.05
master_seed: 123
estimators: [full, inverse_weighted]
output_path: out.csv
opnorm_constants:
  L2: 0.4
"""


def test_parse_good(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(GOOD)
    cfg = load_experiment_config(path)
    assert cfg.d == 10 and cfg.spectrum == Spectrum.geometric(0.7)
    assert cfg.p_values == (0.3, 0.5, 1.0) and cfg.N_values == (500, 1000)
    assert cfg.dist == "student_t" and cfg.dof == 5.0
    assert cfg.effective_kappa == student_t_kappa(5.0)
    assert cfg.opnorm_constants.L2 == 0.4 and cfg.opnorm_constants.C1 == 0.1
    assert cfg.workers == 1 and cfg.record_timing is False


def test_defaults():
    cfg = parse_experiment_config("d: 2\np_values: [1]\nN_values: [100]\ntrials: 1\n"
                                  "master_seed: 0\nestimators: [sample]\n")
    assert cfg.spectrum == Spectrum.identity() and cfg.delta == 0.1
    assert cfg.effective_kappa == gaussian_kappa() and cfg.output_path == "sweep.csv"


@pytest.mark.parametrize("edit,where", [
    (("trials: 4", "trials: 0"), "c.yaml:11: trials: must be >= 1"),
    (("[0.3, 0.5, 1.0]", "[0.3, 1.5, 1.0]"), "c.yaml:9: p_values.1: must lie in (0, 1]"),
    (("[500, 1000]", "[500, 4]"), "c.yaml:10: N_values.1: must be >= 8"),
    (("gamma: 0.7", "gamma: 1.7"), "c.yaml:4: spectrum.gamma"),
    (("dof: 5", "dof: 3"), "c.yaml:8: distribution.dof: fourth moment does not exist"),
    (("[full, inverse_weighted]", "[full, median]"), "c.yaml:14: estimators.1: unknown estimator"),
    (("output_path: out.csv", "output_path: out.csv\nbogus: 1"), "c.yaml:16: bogus: unknown key"),
    (("  L2: 0.4", "  L2: 0.95"), "c.yaml:17: opnorm_constants.L2: need 1.1 * L2 < 1"),
    (("d: 10", "d: ten"), "c.yaml:1: d: expected an integer"),
    (("master_seed: 123\n", ""), "missing required key 'master_seed'"),
    (("[0.3, 0.5, 1.0]", "[0.3, 0.5"), "c.yaml:10: invalid YAML"),
])
def test_line_precise_errors(edit, where):
    text = GOOD.replace(*edit)
    with pytest.raises(ConfigError) as info:
        parse_experiment_config(text, "c.yaml")
    assert where in str(info.value)


def test_top_level_must_be_mapping():
    with pytest.raises(ConfigError, match="mapping"):
        parse_experiment_config("- 1\n- 2\n", "c.yaml")


def test_estimator_overrides():
    out = parse_estimator_overrides("delta: 0.05\nseed: 4\nfit_method: subgradient\n"
                                    "opnorm_constants:\n  L2: 0.3\n")
    assert out["delta"] == 0.05 and out["seed"] == 4 and out["opnorm_constants"].L2 == 0.3
    with pytest.raises(ConfigError, match="x.yaml:2: fit_method"):
        parse_estimator_overrides("delta: 0.05\nfit_method: newton\n", "x.yaml")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_estimator_overrides("mode: oracle\n", "x.yaml")
