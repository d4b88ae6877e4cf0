"""Flat ``section.key = value`` run configuration.

Example::

    subcommand = solve
    problem.n = 3
    problem.P = 2
    problem.k = 2
    problem.l = 0
    problem.p = 4
    problem.q = 1
    phi.kind = constant
    phi.value = 12
    grid.backend = axisym
    grid.resolution = 64

Lines starting with ``#`` or ``;`` are comments, as is anything after
whitespace followed by ``#``.  Unknown keys are errors.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .problem import ProblemSpec
from .properties import DEFAULT_DIMS
from .solver import DEFAULT_EPS

__all__ = ["RunConfig", "ConfigError", "SUBCOMMANDS", "load_config", "parse_config", "validate"]

SUBCOMMANDS = ("solve", "homogeneous", "check-phi", "verify-properties")
PHI_KINDS = ("constant", "axisym_power", "file")


class ConfigError(ValueError):
    """A config value is missing or malformed; the message starts with the key."""


@dataclass(frozen=True)
class RunConfig:
    subcommand: str = "solve"
    n: int = 2
    P: int = 1
    k: int = 1
    l: int = 0
    p: float = 2.0
    q: float = 1.0
    phi_kind: str = "constant"
    phi_value: float = 1.0
    phi_delta: float = 0.1
    phi_base: float = 1.0
    phi_path: str = ""
    backend: str = "axisym"
    resolution: tuple = (64,)
    tol: float = 1e-10
    max_steps: int = 10
    eps_list: tuple = DEFAULT_EPS
    cauchy_tol: float = 1e-4
    dims: tuple = DEFAULT_DIMS
    trials: int = 1000
    seed: int = 0
    output_dir: str = "out"
    problem_keys: frozenset = field(default=frozenset(), repr=False, compare=False)

    def problem(self, phi=None) -> ProblemSpec:
        return ProblemSpec(self.n, self.P, self.k, self.l, self.p, self.q, phi)

    def effective(self) -> str:
        """The configuration with every default filled in, in the input format."""
        dims = "; ".join(",".join(str(x) for x in d) for d in self.dims)
        lines = [
            f"subcommand = {self.subcommand}",
            f"seed = {self.seed}",
            f"output_dir = {self.output_dir}",
            f"problem.n = {self.n}",
            f"problem.P = {self.P}",
            f"problem.k = {self.k}",
            f"problem.l = {self.l}",
            f"problem.p = {self.p!r}",
            f"problem.q = {self.q!r}",
            f"phi.kind = {self.phi_kind}",
            f"phi.value = {self.phi_value!r}",
            f"phi.delta = {self.phi_delta!r}",
            f"phi.base = {self.phi_base!r}",
            f"phi.path = {self.phi_path}",
            f"grid.backend = {self.backend}",
            f"grid.resolution = {','.join(str(r) for r in self.resolution)}",
            f"solver.tol = {self.tol!r}",
            f"solver.max_steps = {self.max_steps}",
            f"solver.eps_list = {','.join(repr(e) for e in self.eps_list)}",
            f"solver.cauchy_tol = {self.cauchy_tol!r}",
            f"properties.dims = {dims}",
            f"properties.trials = {self.trials}",
        ]
        if self.subcommand != "verify-properties":
            try:
                case = self.problem().case
            except ValueError:
                case = "invalid"
            lines.append(f"# computed: problem.case = {case}")
        return "\n".join(lines) + "\n"


def _ints(text, key):
    try:
        return tuple(int(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{key}: expected integers, got {text!r}") from None


def _floats(text, key):
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{key}: expected numbers, got {text!r}") from None


def _scalar(conv, kind):
    def parse(text, key):
        try:
            return conv(text)
        except ValueError:
            raise ConfigError(f"{key}: expected {kind}, got {text!r}") from None
    return parse


def _dims(text, key):
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            vals = _ints(chunk, key)
            if len(vals) != 4:
                raise ConfigError(f"{key}: each tuple needs 4 integers (n,P,k,l), got {chunk.strip()!r}")
            out.append(vals)
    if not out:
        raise ConfigError(f"{key}: no dimension tuples given")
    return tuple(out)


def _choice(options):
    def parse(text, key):
        if text not in options:
            raise ConfigError(f"{key}: expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


_INT, _FLOAT = _scalar(int, "an integer"), _scalar(float, "a number")

# config key -> (RunConfig field, parser)
_KEYS = {
    "subcommand": ("subcommand", _choice(SUBCOMMANDS)),
    "seed": ("seed", _INT),
    "output_dir": ("output_dir", lambda t, k: t),
    "problem.n": ("n", _INT),
    "problem.P": ("P", _INT),  # keys are case-sensitive: problem.P and problem.p differ
    "problem.p": ("p", _FLOAT),
    "problem.k": ("k", _INT),
    "problem.l": ("l", _INT),
    "problem.q": ("q", _FLOAT),
    "phi.kind": ("phi_kind", _choice(PHI_KINDS)),
    "phi.value": ("phi_value", _FLOAT),
    "phi.delta": ("phi_delta", _FLOAT),
    "phi.base": ("phi_base", _FLOAT),
    "phi.path": ("phi_path", lambda t, k: t),
    "grid.backend": ("backend", _choice(("axisym", "full_s2"))),
    "grid.resolution": ("resolution", _ints),
    "solver.tol": ("tol", _FLOAT),
    "solver.max_steps": ("max_steps", _INT),
    "solver.eps_list": ("eps_list", _floats),
    "solver.cauchy_tol": ("cauchy_tol", _FLOAT),
    "properties.dims": ("dims", _dims),
    "properties.trials": ("trials", _INT),
}


def parse_config(text: str, source: str = "<config>", *, check: bool = True) -> RunConfig:
    values = {}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = re.split(r"\s#", raw, maxsplit=1)[0].strip()
        if not line or line[0] in "#;":
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"{key}: given more than once")
        seen.add(key)
        if key not in _KEYS:
            raise ConfigError(f"{key}: unknown key ({source}:{lineno})")
        name, conv = _KEYS[key]
        values[name] = conv(value, key)
    cfg = replace(RunConfig(), **values,
                  problem_keys=frozenset(k for k in seen if k.startswith("problem.")))
    return validate(cfg) if check else cfg


def validate(cfg: RunConfig) -> RunConfig:
    if len(cfg.resolution) not in (1, 2):
        raise ConfigError("grid.resolution: give one value (axisym) or two (full_s2)")
    if cfg.backend == "axisym" and len(cfg.resolution) != 1:
        raise ConfigError("grid.resolution: the axisym backend takes a single resolution")
    if cfg.tol <= 0:
        raise ConfigError("solver.tol: must be positive")
    if cfg.max_steps < 1:
        raise ConfigError("solver.max_steps: must be at least 1")
    if cfg.trials < 1:
        raise ConfigError("properties.trials: must be at least 1")
    if cfg.phi_kind == "file" and not cfg.phi_path:
        raise ConfigError("phi.path: required when phi.kind = file")
    if cfg.phi_kind == "constant" and cfg.phi_value <= 0:
        raise ConfigError("phi.value: must be positive")
    if cfg.phi_kind == "axisym_power" and (cfg.phi_base <= 0 or abs(cfg.phi_delta) >= 1):
        raise ConfigError("phi.delta/phi.base: need |delta| < 1 and base > 0")
    if cfg.subcommand in ("solve", "homogeneous", "check-phi"):
        missing = {"problem.n", "problem.P", "problem.k", "problem.l", "problem.p", "problem.q"} - cfg.problem_keys
        if missing:
            raise ConfigError(f"{sorted(missing)[0]}: required for subcommand {cfg.subcommand}")
    return cfg


def load_config(path, *, check: bool = True) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"--config: cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path), check=check)
