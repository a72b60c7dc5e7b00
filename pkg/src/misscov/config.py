"""YAML experiment configs with line-precise validation errors."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .datagen import Spectrum, gaussian_kappa, student_t_kappa
from .params import OpNormConstants

__all__ = ["ConfigError", "ExperimentConfig", "load_experiment_config", "parse_experiment_config"]

ESTIMATORS = ("full", "oracle", "sample", "inverse_weighted")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    d: int
    p_values: tuple
    N_values: tuple
    trials: int
    master_seed: int
    estimators: tuple
    output_path: str = "sweep.csv"
    spectrum: Spectrum = field(default_factory=Spectrum.identity)
    rotation_seed: Optional[int] = None
    dist: str = "gaussian"
    dof: Optional[float] = None
    delta: float = 0.1
    kappa: Optional[float] = None
    net_extra_random: Optional[int] = None
    opnorm_constants: OpNormConstants = field(default_factory=OpNormConstants)
    psd_project: bool = False
    gate_constant: float = 1.0
    workers: int = 1
    record_timing: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.estimators:
            raise ValueError("estimators must not be empty")
        for e in self.estimators:
            if e not in ESTIMATORS:
                raise ValueError(f"unknown estimator {e!r}; choose from {', '.join(ESTIMATORS)}")
        if len(set(self.estimators)) != len(self.estimators):
            raise ValueError("estimators must not repeat")
        if not self.p_values or not self.N_values:
            raise ValueError("p_values and N_values must be non-empty")
        for p in self.p_values:
            if not 0.0 < p <= 1.0:
                raise ValueError(f"p value {p} not in (0, 1]")
        for n in self.N_values:
            if n < 8:
                raise ValueError(f"N value {n} below the minimum of 8")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.dist not in ("gaussian", "student_t"):
            raise ValueError(f"unknown distribution {self.dist!r}")
        if self.dist == "student_t" and not (self.dof is not None and self.dof > 4):
            raise ValueError("student_t needs dof > 4 (fourth moment must exist)")
        if self.kappa is not None and self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.spectrum.validate()

    @property
    def effective_kappa(self):
        if self.kappa is not None:
            return self.kappa
        return gaussian_kappa() if self.dist == "gaussian" else student_t_kappa(self.dof)


def _line_map(node, prefix=(), out=None):
    """Map key paths to 1-based line numbers of their values."""
    if out is None:
        out = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, val_node in node.value:
            path = prefix + (key_node.value,)
            out[path] = key_node.start_mark.line + 1
            _line_map(val_node, path, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            out[prefix + (i,)] = item.start_mark.line + 1
            _line_map(item, prefix + (i,), out)
    return out


class _Reader:
    def __init__(self, data, lines, source):
        self.data = data
        self.lines = lines
        self.source = source

    def fail(self, path, message):
        line = self.lines.get(tuple(path))
        where = f"{self.source}:{line}" if line else self.source
        raise ConfigError(f"{where}: {'.'.join(map(str, path))}: {message}")

    def get(self, path, kind, default=..., check=None):
        node = self.data
        for key in path:
            if not isinstance(node, dict) or key not in node:
                if default is ...:
                    parent = tuple(path[:-1])
                    line = self.lines.get(parent)
                    where = f"{self.source}:{line}" if line else self.source
                    raise ConfigError(f"{where}: missing required key {'.'.join(map(str, path))!r}")
                return default
            node = node[key]
        if node is None and default is None:
            return None
        value = self._coerce(path, node, kind)
        if check is not None:
            msg = check(value)
            if msg:
                self.fail(path, msg)
        return value

    def _coerce(self, path, node, kind):
        if kind == "int":
            if isinstance(node, bool) or not isinstance(node, int):
                self.fail(path, f"expected an integer, got {node!r}")
            return node
        if kind == "float":
            if isinstance(node, bool) or not isinstance(node, (int, float)):
                self.fail(path, f"expected a number, got {node!r}")
            return float(node)
        if kind == "bool":
            if not isinstance(node, bool):
                self.fail(path, f"expected true/false, got {node!r}")
            return node
        if kind == "str":
            if not isinstance(node, str):
                self.fail(path, f"expected a string, got {node!r}")
            return node
        if kind == "dict":
            if not isinstance(node, dict):
                self.fail(path, f"expected a mapping, got {node!r}")
            return node
        if kind.startswith("list:"):
            if not isinstance(node, list) or not node:
                self.fail(path, f"expected a non-empty list, got {node!r}")
            sub = kind.split(":", 1)[1]
            return tuple(self._coerce(tuple(path) + (i,), item, sub) for i, item in enumerate(node))
        raise AssertionError(kind)

    def check_keys(self, path, allowed):
        node = self.get(path, "dict") if path else self.data
        for key in node:
            if key not in allowed:
                self.fail(tuple(path) + (key,), f"unknown key; allowed: {', '.join(sorted(allowed))}")


_TOP_KEYS = {
    "d", "spectrum", "rotation_seed", "distribution", "p_values", "N_values", "trials",
    "delta", "master_seed", "estimators", "output_path", "workers", "kappa",
    "net_extra_random", "opnorm_constants", "psd_project", "gate_constant", "record_timing",
}


def _positive(v):
    return None if v > 0 else "must be positive"


def _parse_spectrum(r):
    if "spectrum" not in r.data:
        return Spectrum.identity()
    r.check_keys(("spectrum",), {"kind", "gamma", "spike", "bulk"})
    kind = r.get(("spectrum", "kind"), "str")
    if kind == "identity":
        return Spectrum.identity()
    if kind == "geometric":
        gamma = r.get(("spectrum", "gamma"), "float",
                      check=lambda g: None if 0 < g < 1 else "gamma must lie in (0, 1)")
        return Spectrum.geometric(gamma)
    if kind == "spiked":
        bulk = r.get(("spectrum", "bulk"), "float", check=_positive)
        spike = r.get(("spectrum", "spike"), "float",
                      check=lambda s: None if s >= bulk else "spike must be >= bulk")
        return Spectrum.spiked(spike, bulk)
    r.fail(("spectrum", "kind"), f"unknown spectrum {kind!r}; use identity, geometric or spiked")


def parse_opnorm_constants(r, path=("opnorm_constants",)):
    if path[0] not in r.data:
        return OpNormConstants()
    r.check_keys(path, {"C1", "L1", "L2", "c_beta"})
    default = OpNormConstants()
    kw = {
        name: r.get(path + (name,), "float", getattr(default, name), check=_positive)
        for name in ("C1", "L1", "L2", "c_beta")
    }
    if not 1.1 * kw["L2"] < 1:
        r.fail(path + ("L2",), "need 1.1 * L2 < 1")
    return OpNormConstants(**kw)


def _compose(text, source):
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{source}{line}: invalid YAML: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    return _Reader(data, _line_map(node), source)


def parse_experiment_config(text, source="<config>"):
    r = _compose(text, source)
    r.check_keys((), _TOP_KEYS)
    spectrum = _parse_spectrum(r)
    dist, dof = "gaussian", None
    if "distribution" in r.data:
        r.check_keys(("distribution",), {"kind", "dof"})
        dist = r.get(("distribution", "kind"), "str",
                     check=lambda k: None if k in ("gaussian", "student_t") else "use gaussian or student_t")
        if dist == "student_t":
            dof = r.get(("distribution", "dof"), "float",
                        check=lambda v: None if v > 4 else "fourth moment does not exist (need dof > 4)")
    kw = dict(
        d=r.get(("d",), "int", check=lambda v: None if v >= 1 else "must be >= 1"),
        p_values=r.get(("p_values",), "list:float"),
        N_values=r.get(("N_values",), "list:int"),
        trials=r.get(("trials",), "int", check=lambda v: None if v >= 1 else "must be >= 1"),
        master_seed=r.get(("master_seed",), "int"),
        estimators=r.get(("estimators",), "list:str"),
        output_path=r.get(("output_path",), "str", "sweep.csv"),
        spectrum=spectrum,
        rotation_seed=r.get(("rotation_seed",), "int", None),
        dist=dist,
        dof=dof,
        delta=r.get(("delta",), "float", 0.1, check=lambda v: None if 0 < v < 1 else "must lie in (0, 1)"),
        kappa=r.get(("kappa",), "float", None, check=lambda v: None if v >= 1 else "must be >= 1"),
        net_extra_random=r.get(("net_extra_random",), "int", None,
                               check=lambda v: None if v >= 0 else "must be >= 0"),
        opnorm_constants=parse_opnorm_constants(r),
        psd_project=r.get(("psd_project",), "bool", False),
        gate_constant=r.get(("gate_constant",), "float", 1.0, check=_positive),
        workers=r.get(("workers",), "int", 1, check=lambda v: None if v >= 1 else "must be >= 1"),
        record_timing=r.get(("record_timing",), "bool", False),
    )
    for i, e in enumerate(kw["estimators"]):
        if e not in ESTIMATORS:
            r.fail(("estimators", i), f"unknown estimator {e!r}; choose from {', '.join(ESTIMATORS)}")
    for i, p in enumerate(kw["p_values"]):
        if not 0 < p <= 1:
            r.fail(("p_values", i), "must lie in (0, 1]")
    for i, n in enumerate(kw["N_values"]):
        if n < 8:
            r.fail(("N_values", i), "must be >= 8")
    try:
        return ExperimentConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_experiment_config(path):
    path = Path(path)
    return parse_experiment_config(path.read_text(), str(path))


_ESTIMATE_KEYS = {
    "delta", "kappa", "net_extra_random", "opnorm_constants", "psd_project",
    "gate_constant", "seed", "fit_method",
}


def parse_estimator_overrides(text, source="<config>"):
    """Keyword overrides for :class:`misscov.pipeline.EstimatorConfig`."""
    r = _compose(text, source)
    r.check_keys((), _ESTIMATE_KEYS)
    out = {}
    if "delta" in r.data:
        out["delta"] = r.get(("delta",), "float", check=lambda v: None if 0 < v < 1 else "must lie in (0, 1)")
    if "kappa" in r.data:
        out["kappa"] = r.get(("kappa",), "float", check=lambda v: None if v >= 1 else "must be >= 1")
    if "net_extra_random" in r.data:
        out["net_extra_random"] = r.get(("net_extra_random",), "int",
                                        check=lambda v: None if v >= 0 else "must be >= 0")
    if "opnorm_constants" in r.data:
        out["opnorm_constants"] = parse_opnorm_constants(r)
    if "psd_project" in r.data:
        out["psd_project"] = r.get(("psd_project",), "bool")
    if "gate_constant" in r.data:
        out["gate_constant"] = r.get(("gate_constant",), "float", check=_positive)
    if "seed" in r.data:
        out["seed"] = r.get(("seed",), "int")
    if "fit_method" in r.data:
        out["fit_method"] = r.get(("fit_method",), "str",
                                  check=lambda v: None if v in ("lp", "subgradient") else "use lp or subgradient")
    return out
