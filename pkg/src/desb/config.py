"""Flat ``key = value`` run configuration files.

Example::

    # syn5, plain DE
    dataset = syn5
    topology = 1-3-1
    variant = de
    Np = 80
    epsilon0 = 5e-5
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources

from .de import CROSSOVER_MODES, DEFAULT_MAX_EVALS, DEConfig
from .experiments import VARIANTS, ExperimentConfig
from .network import PENALTY_MODES, Topology, parse_topology

__all__ = ["RunConfig", "parse_config", "load_config", "preset_names", "preset_path",
           "OUTPUT_ENV"]

OUTPUT_ENV = "DESB_OUTPUT_DIR"
DEFAULT_OUTPUT = "desb-out"

REQUIRED = ("dataset", "topology", "variant", "Np", "epsilon0")
DEFAULTS = {
    "F": 0.5,
    "Cr": 0.9,
    "crossover": "mutant",
    "max_evals": DEFAULT_MAX_EVALS,
    "runs": 50,
    "seed": 0,
    "data_seed": 0,
    "sigma": 5e-3,
    "output_dir": None,
    "penalty_mode": "literal",
}
_INTS = {"Np", "max_evals", "runs", "seed", "data_seed"}
_FLOATS = {"F", "Cr", "epsilon0", "sigma"}


@dataclass(frozen=True)
class RunConfig:
    dataset: str
    topology: Topology
    variants: tuple[str, ...]
    Np: int
    epsilon0: float
    F: float
    Cr: float
    crossover: str
    max_evals: int
    runs: int
    seed: int
    data_seed: int
    sigma: float
    output_dir: str | None
    penalty_mode: str

    def resolved_output_dir(self) -> str:
        return self.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT

    def experiment(self, variant: str, runs: int | None = None) -> ExperimentConfig:
        de = DEConfig(Np=self.Np, F=self.F, Cr=self.Cr, crossover=self.crossover,
                      max_evals=self.max_evals, epsilon0=self.epsilon0, seed=self.seed)
        return ExperimentConfig(self.dataset, self.topology, variant, de,
                                runs=runs or self.runs, base_seed=self.seed,
                                data_seed=self.data_seed, sigma=self.sigma,
                                penalty_mode=self.penalty_mode)


def _parse_variant(value):
    if value in ("both", "de,de-sb", "de-sb,de"):
        return VARIANTS
    if value not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS + ('both',)}, got {value!r}")
    return (value,)


def parse_config(text: str, source: str = "<config>", overrides: dict | None = None) -> RunConfig:
    """Parse and validate config text; ``overrides`` replace parsed values."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ValueError(f"{source}:{lineno}: expected 'key = value'")
        if key not in REQUIRED and key not in DEFAULTS:
            raise ValueError(f"{source}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ValueError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    raw.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})
    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise ValueError(f"{source}: missing required key(s) {', '.join(missing)}")

    values = dict(DEFAULTS)
    for key, value in raw.items():
        try:
            if key in _INTS:
                values[key] = int(float(value)) if "e" in value.lower() else int(value)
            elif key in _FLOATS:
                values[key] = float(value)
            else:
                values[key] = value
        except ValueError:
            raise ValueError(f"{source}: bad value for {key}: {value!r}") from None

    if values["crossover"] not in CROSSOVER_MODES:
        raise ValueError(f"{source}: crossover must be one of {CROSSOVER_MODES}")
    if values["penalty_mode"] not in PENALTY_MODES:
        raise ValueError(f"{source}: penalty_mode must be one of {PENALTY_MODES}")
    cfg = RunConfig(
        dataset=values["dataset"],
        topology=parse_topology(values["topology"]),
        variants=_parse_variant(values["variant"]),
        Np=values["Np"], epsilon0=values["epsilon0"], F=values["F"], Cr=values["Cr"],
        crossover=values["crossover"], max_evals=values["max_evals"], runs=values["runs"],
        seed=values["seed"], data_seed=values["data_seed"], sigma=values["sigma"],
        output_dir=values["output_dir"], penalty_mode=values["penalty_mode"],
    )
    # surface range errors now rather than mid-run
    for variant in cfg.variants:
        cfg.experiment(variant)
    return cfg


def preset_names() -> list[str]:
    base = resources.files("desb") / "presets"
    return sorted(p.name[:-4] for p in base.iterdir() if p.name.endswith(".cfg"))


def preset_path(name: str):
    path = resources.files("desb") / "presets" / f"{name}.cfg"
    if not path.is_file():
        raise ValueError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return path


def load_config(path=None, preset: str | None = None, overrides: dict | None = None) -> RunConfig:
    if preset is not None:
        p = preset_path(preset)
        return parse_config(p.read_text(), f"preset:{preset}", overrides)
    if path is None:
        raise ValueError("no config file or preset given")
    if not os.path.isfile(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path) as fh:
        return parse_config(fh.read(), str(path), overrides)
