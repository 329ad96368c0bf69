"""Experiment specification and its flat ``key = value`` text format.

Example::

    # aggregation sweep
    name = blob
    scenario = gaussian_blob
    n_atoms = 1000
    epsilon_list = 0.1, 0.05, 0.025, 0.0125, 0.00625
    seed = 7
    potential.kind = gaussian_attractive
    potential.amplitude = 1.0
    potential.length = 1.0

Lists are comma separated, booleans are ``true``/``false``, ``none`` clears
an optional field.  Keys under ``potential.`` form the potential block.
"""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..potentials import RadialPotential

__all__ = [
    "DEFAULT_EPSILONS",
    "DIAGNOSTICS",
    "SCENARIOS",
    "ExperimentSpec",
    "SpecError",
    "load_spec",
    "parse_spec_text",
]

SCENARIOS = ("two_atom_quadratic", "gaussian_blob", "ring_2d", "custom_csv")
STOCHASTIC = ("gaussian_blob", "ring_2d")
VELOCITY_INITS = ("matched", "zero", "noise")
DIAGNOSTICS = ("I", "support", "w1", "momentum", "phase_w1", "trajectory")
DEFAULT_EPSILONS = (0.1, 0.05, 0.025, 0.0125, 0.00625)

# fields that do not change what is computed
_NON_SEMANTIC = {"name", "output_dir"}


class SpecError(ValueError):
    """Invalid experiment specification."""


@dataclass(frozen=True)
class ExperimentSpec:
    name: str = "experiment"
    scenario: str = "gaussian_blob"
    n_atoms: int = 1000
    dim: int = 2
    potential: RadialPotential | None = None
    epsilon_list: tuple = DEFAULT_EPSILONS
    horizon: float = 2.0
    step: float = 1e-3
    substeps: int = 1
    snapshot_interval: float = 0.01
    reference_step: float = 0.01
    include_self_term: bool = True
    cutoff: float | None = None
    velocity_init: str = "matched"
    velocity_noise: float = 1.0
    blob_scale: float = 1.0
    ring_radius: float = 1.0
    input_csv: str | None = None
    w1_times: tuple = (0.5, 1.0, 2.0)
    diagnostics: tuple = DIAGNOSTICS
    output_dir: str = "runs"
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "epsilon_list", tuple(float(e) for e in self.epsilon_list))
        object.__setattr__(self, "w1_times", tuple(float(t) for t in self.w1_times))
        object.__setattr__(self, "diagnostics", tuple(d for d in DIAGNOSTICS if d in set(self.diagnostics)))
        self.validate()

    def validate(self):
        unknown_diag = set(self.diagnostics) - set(DIAGNOSTICS)
        if unknown_diag:
            raise SpecError(f"unknown diagnostics {sorted(unknown_diag)}")
        if self.scenario not in SCENARIOS:
            raise SpecError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        eps = self.epsilon_list
        if not eps:
            raise SpecError("epsilon_list must be nonempty")
        if any(e <= 0 for e in eps):
            raise SpecError("epsilon_list entries must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise SpecError("epsilon_list must be strictly decreasing")
        if not (0 < self.step <= self.horizon):
            raise SpecError("need 0 < step <= horizon")
        if self.substeps < 1:
            raise SpecError("substeps must be >= 1")
        if self.snapshot_interval <= 0 or self.reference_step <= 0:
            raise SpecError("snapshot_interval and reference_step must be positive")
        for name, h in (("step", self.step), ("reference_step", self.reference_step)):
            ratio = self.snapshot_interval / h
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise SpecError(f"snapshot_interval must be a whole multiple of {name}")
        if self.dim < 1:
            raise SpecError("dim must be >= 1")
        if self.velocity_init not in VELOCITY_INITS:
            raise SpecError(f"velocity_init must be one of {VELOCITY_INITS}")
        if self.velocity_noise < 0 or self.blob_scale <= 0 or self.ring_radius <= 0:
            raise SpecError("velocity_noise >= 0, blob_scale > 0 and ring_radius > 0 required")
        if self.scenario == "two_atom_quadratic" and self.n_atoms != 2:
            raise SpecError("two_atom_quadratic uses exactly 2 atoms")
        if self.scenario in ("gaussian_blob", "ring_2d") and not 1 <= self.n_atoms <= 20000:
            raise SpecError("n_atoms must be in [1, 20000]")
        if self.scenario == "ring_2d" and self.dim != 2:
            raise SpecError("ring_2d is two-dimensional")
        if self.scenario == "custom_csv" and not self.input_csv:
            raise SpecError("custom_csv needs input_csv")
        if self.scenario in STOCHASTIC and self.seed is None:
            raise SpecError(f"scenario {self.scenario} is stochastic: a seed is mandatory")
        if any(t < 0 or t > self.horizon + 1e-12 for t in self.w1_times):
            raise SpecError("w1_times must lie in [0, horizon]")

    def replace(self, **changes) -> "ExperimentSpec":
        return dataclasses.replace(self, **changes)

    # text form ------------------------------------------------------------------
    def to_text(self, semantic_only: bool = False) -> str:
        lines = []
        for f in fields(self):
            if semantic_only and f.name in _NON_SEMANTIC:
                continue
            value = getattr(self, f.name)
            if f.name == "potential":
                if value is not None:
                    for k, v in value.to_mapping().items():
                        lines.append(f"potential.{k} = {_fmt(v)}")
                continue
            lines.append(f"{f.name} = {_fmt(value)}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text(semantic_only=True).encode()).hexdigest()[:16]


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


_FIELD_TYPES = {
    "name": str, "scenario": str, "n_atoms": int, "dim": int, "epsilon_list": "floats",
    "horizon": float, "step": float, "substeps": int, "snapshot_interval": float,
    "reference_step": float, "include_self_term": bool, "cutoff": "optfloat",
    "velocity_init": str, "velocity_noise": float, "blob_scale": float, "ring_radius": float,
    "input_csv": "optstr", "w1_times": "floats", "diagnostics": "strs", "output_dir": str,
    "seed": "optint",
}


def parse_value(key: str, raw: str):
    kind = _FIELD_TYPES.get(key)
    if kind is None:
        raise SpecError(f"unknown config key {key!r}")
    raw = raw.strip()
    try:
        if kind is str:
            return raw
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            if raw.lower() not in ("true", "false"):
                raise ValueError(f"expected true/false, got {raw!r}")
            return raw.lower() == "true"
        if raw.lower() == "none" and kind.startswith("opt"):
            return None
        if kind == "optfloat":
            return float(raw)
        if kind == "optint":
            return int(raw)
        if kind == "optstr":
            return raw
        items = [s.strip() for s in raw.split(",") if s.strip()]
        return tuple(float(s) for s in items) if kind == "floats" else tuple(items)
    except ValueError as exc:
        raise SpecError(f"bad value for {key}: {exc}") from None


def parse_spec_text(text: str, base: ExperimentSpec | None = None, **overrides) -> ExperimentSpec:
    """Parse the key/value format; ``overrides`` (already typed) win over the text."""
    values, pot = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key.startswith("potential."):
            pot[key[len("potential."):]] = raw.strip()
        else:
            if key in values:
                raise SpecError(f"line {lineno}: duplicate key {key!r}")
            values[key] = parse_value(key, raw)
    if pot:
        values["potential"] = RadialPotential.from_mapping(pot)
    values.update(overrides)
    # the two-atom scenario fixes its atom count; spare users from spelling it out
    if values.get("scenario") == "two_atom_quadratic" and "n_atoms" not in values and base is None:
        values["n_atoms"] = 2
    try:
        return dataclasses.replace(base or _unchecked_default(), **values)
    except TypeError as exc:
        raise SpecError(str(exc)) from None


def _unchecked_default():
    # the bare default has no seed, which is fine for deterministic scenarios only;
    # validation happens on the final replaced spec
    spec = object.__new__(ExperimentSpec)
    for f in fields(ExperimentSpec):
        object.__setattr__(spec, f.name, f.default)
    return spec


def load_spec(path, **overrides) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_spec_text(text, **overrides)
