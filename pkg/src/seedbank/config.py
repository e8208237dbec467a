"""Run configuration: parsing, validation and canonical serialisation.

A configuration is TOML (or JSON, including a previously emitted report that
embeds its config under ``"config"``)::

    [measure]
    kind = "discrete"            # or "gamma"
    atoms = [[1.0, 1.0]]         # (rate, mass) pairs for kind = "discrete"
    # gamma = {shape = 2.0, scale = 1.0, mass = 2.0}   for kind = "gamma"
    # bins = 8, cutoff = 4.0                           binning of a gamma measure

    [init]
    x = 0.5
    y = 0.5                      # scalar or one value per atom

    [sim]
    dt = 1e-3
    t_max = 1.0
    reps = 1
    seed = 0
    record_stride = 1
    workers = 1

    [wf]
    N = 1000                     # t_max, reps default to the sim block
    records = 10

    [dual.initial]
    n = 2
    m = [[1.0, 1]]               # (rate, multiplicity) pairs

    [duality]
    target = "exact"             # or "dual"
    threshold = 3.0

    [scaling]
    tol = 0.02

Validation reports every violation at once.
"""
from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .exceptions import SeedbankError
from .measure import DiscretizedMeasure, SeedBankMeasure, discretize

U64 = 1 << 64

DEFAULTS = {
    "init": {"x": 0.5},
    "sim": {"dt": 1e-3, "t_max": 1.0, "reps": 1, "seed": 0, "record_stride": 1, "workers": 1},
    "wf": {"N": 1000, "records": 10},
    "dual": {"initial": {"n": 2, "m": []}},
    "duality": {"target": "exact", "threshold": 3.0},
    "scaling": {"tol": 0.02},
}
KNOWN = {
    "measure": {"kind", "atoms", "gamma", "bins", "cutoff"},
    "init": {"x", "y"},
    "sim": set(DEFAULTS["sim"]),
    "wf": {"N", "t_max", "reps", "records"},
    "dual": {"initial"},
    "duality": {"target", "threshold"},
    "scaling": {"tol"},
}


class ConfigError(SeedbankError):
    """Parse or validation failure; ``errors`` lists every problem found."""

    def __init__(self, errors, line=None):
        self.errors = list(errors)
        self.line = line
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    data: dict

    @property
    def measure(self) -> SeedBankMeasure:
        m = self.data["measure"]
        if m["kind"] == "discrete":
            return SeedBankMeasure.discrete(m["atoms"])
        g = m["gamma"]
        return SeedBankMeasure.gamma(g["shape"], g["scale"], g["mass"])

    def discretized(self) -> DiscretizedMeasure:
        """The finite measure used by the forward and dual simulators."""
        mu = self.measure
        if mu.kind == "discrete":
            return mu.as_discretized()
        m = self.data["measure"]
        if "bins" not in m or "cutoff" not in m:
            raise ConfigError(["measure.bins and measure.cutoff are required to bin a gamma measure"])
        return discretize(mu, m["bins"], m["cutoff"])

    def section(self, name: str) -> dict:
        return self.data[name]

    @property
    def seed(self) -> int:
        return self.data["sim"]["seed"]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def canonical_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def _load(text: str) -> dict:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError([f"parse error at line {e.lineno}, column {e.colno}: {e.msg}"], e.lineno) from None
        return data.get("config", data) if isinstance(data, dict) else data
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError([f"parse error: {e}"], getattr(e, "lineno", None)) from None


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _positive(errors, where, v):
    if not _is_num(v) or not v > 0:
        errors.append(f"{where} must be a positive number, got {v!r}")
        return False
    return True


def _check_measure(m, errors) -> int | None:
    """Validate the measure block in place; returns the atom count when known."""
    kind = m.get("kind")
    if kind == "discrete":
        atoms = m.get("atoms")
        if not isinstance(atoms, list) or not atoms:
            errors.append("measure.atoms must be a nonempty list of [rate, mass] pairs")
            return None
        rates = []
        for i, atom in enumerate(atoms):
            if not isinstance(atom, list) or len(atom) != 2:
                errors.append(f"measure.atoms[{i}] must be a [rate, mass] pair")
                continue
            _positive(errors, f"measure.atoms[{i}].rate", atom[0])
            _positive(errors, f"measure.atoms[{i}].mass", atom[1])
            rates.append(atom[0])
        if len(set(rates)) != len(rates):
            errors.append("measure.atoms rates must be distinct")
        m["atoms"] = sorted([float(a[0]), float(a[1])] for a in atoms
                            if isinstance(a, list) and len(a) == 2 and _is_num(a[0]) and _is_num(a[1]))
        if "gamma" in m:
            errors.append("measure.gamma is only valid for kind = 'gamma'")
        return len(atoms)
    if kind == "gamma":
        g = m.get("gamma")
        if not isinstance(g, dict):
            errors.append("measure.gamma must be a table {shape, scale, mass}")
            return None
        g.setdefault("mass", 1.0)
        for key in sorted(set(g) - {"shape", "scale", "mass"}):
            errors.append(f"unknown key measure.gamma.{key}")
        for key in ("shape", "scale", "mass"):
            if key not in g:
                errors.append(f"measure.gamma.{key} is required")
            elif _positive(errors, f"measure.gamma.{key}", g[key]):
                g[key] = float(g[key])
        if "atoms" in m:
            errors.append("measure.atoms is only valid for kind = 'discrete'")
        if "bins" in m and (not _is_int(m["bins"]) or m["bins"] < 1):
            errors.append(f"measure.bins must be a positive integer, got {m['bins']!r}")
        if "cutoff" in m and _positive(errors, "measure.cutoff", m["cutoff"]):
            m["cutoff"] = float(m["cutoff"])
        return None
    errors.append(f"measure.kind must be 'discrete' or 'gamma', got {kind!r}")
    return None


def validate(raw: dict) -> RunConfig:
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["configuration must be a table"])
    data = copy.deepcopy(raw)
    for section in data:
        if section not in KNOWN:
            errors.append(f"unknown section {section!r}")
        elif isinstance(data[section], dict):
            for key in data[section]:
                if key not in KNOWN[section]:
                    errors.append(f"unknown key {section}.{key}")
    for section, defaults in DEFAULTS.items():
        block = data.setdefault(section, {})
        for key, value in defaults.items():
            block.setdefault(key, copy.deepcopy(value))

    if "measure" not in data or not isinstance(data["measure"], dict):
        errors.append("a [measure] section is required")
        n_atoms = None
    else:
        n_atoms = _check_measure(data["measure"], errors)

    init = data["init"]
    x = init["x"]
    if not _is_num(x) or not 0 <= x <= 1:
        errors.append(f"init.x must lie in [0, 1], got {x!r}")
    init.setdefault("y", x)
    y = init["y"]
    ys = y if isinstance(y, list) else [y]
    if any(not _is_num(v) or not 0 <= v <= 1 for v in ys):
        errors.append(f"init.y entries must lie in [0, 1], got {y!r}")
    if isinstance(y, list) and n_atoms is not None and len(y) != n_atoms:
        errors.append(f"init.y has {len(y)} entries but the measure has {n_atoms} atoms")
    if isinstance(y, list) and data.get("measure", {}).get("kind") == "gamma":
        errors.append("init.y must be a scalar for a gamma measure")

    sim = data["sim"]
    dt_ok = _positive(errors, "sim.dt", sim["dt"])
    tm_ok = _positive(errors, "sim.t_max", sim["t_max"])
    if dt_ok and tm_ok and sim["dt"] > sim["t_max"]:
        errors.append(f"sim.dt={sim['dt']} exceeds sim.t_max={sim['t_max']}")
    for key in ("reps", "record_stride", "workers"):
        if not _is_int(sim[key]) or sim[key] < 1:
            errors.append(f"sim.{key} must be an integer >= 1, got {sim[key]!r}")
    if not _is_int(sim["seed"]) or not 0 <= sim["seed"] < U64:
        errors.append(f"sim.seed must be an integer in [0, 2^64), got {sim['seed']!r}")

    wf = data["wf"]
    wf.setdefault("t_max", sim["t_max"])
    wf.setdefault("reps", sim["reps"])
    if not _is_int(wf["N"]) or wf["N"] < 1:
        errors.append(f"wf.N must be a positive integer, got {wf['N']!r}")
    _positive(errors, "wf.t_max", wf["t_max"])
    for key in ("reps", "records"):
        if not _is_int(wf[key]) or wf[key] < 1:
            errors.append(f"wf.{key} must be an integer >= 1, got {wf[key]!r}")

    initial = data["dual"]["initial"]
    if not isinstance(initial, dict):
        errors.append("dual.initial must be a table with keys n and m")
    else:
        initial.setdefault("n", 2)
        initial.setdefault("m", [])
        if not _is_int(initial["n"]) or initial["n"] < 0:
            errors.append(f"dual.initial.n must be a non-negative integer, got {initial['n']!r}")
        atom_rates = {a[0] for a in data.get("measure", {}).get("atoms", []) if isinstance(a, list) and a}
        for i, pair in enumerate(initial["m"] if isinstance(initial["m"], list) else [None]):
            if not isinstance(pair, list) or len(pair) != 2 or not _is_num(pair[0]) or not _is_int(pair[1]):
                errors.append(f"dual.initial.m[{i}] must be a [rate, multiplicity] pair")
                continue
            if not pair[0] > 0 or pair[1] < 1:
                errors.append(f"dual.initial.m[{i}] needs rate > 0 and multiplicity >= 1")
            elif data.get("measure", {}).get("kind") == "discrete" and float(pair[0]) not in atom_rates:
                errors.append(f"dual.initial.m[{i}] rate {pair[0]} is not an atom of the measure")

    duality = data["duality"]
    if duality["target"] not in ("exact", "dual"):
        errors.append(f"duality.target must be 'exact' or 'dual', got {duality['target']!r}")
    _positive(errors, "duality.threshold", duality["threshold"])
    _positive(errors, "scaling.tol", data["scaling"]["tol"])

    if errors:
        raise ConfigError(errors)
    return RunConfig(data)


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse and validate; ``overrides`` maps ``"section.key"`` to a value."""
    raw = _load(text)
    if isinstance(raw, dict):
        for dotted, value in (overrides or {}).items():
            section, key = dotted.split(".", 1)
            raw.setdefault(section, {})[key] = value
    return validate(raw)
