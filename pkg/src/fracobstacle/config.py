"""Run configuration: parsing, validation, and named source profiles.

Grammar (one item per line)::

    # comment            ; also a comment
    [section]
    key = value

Keys are unique within a section; a repeated key is an error reporting both
line numbers. Unknown sections or keys are rejected with their line number.
Values are plain text; lists are whitespace separated. See README.md for the
full key table.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError

COMMANDS = (
    "solve-poisson",
    "solve-obstacle",
    "evolve",
    "verify-ls",
    "compare",
    "asymptotic",
    "extension-check",
    "suite",
)

# section -> key -> (converter, default)
_SCHEMA = {
    "run": {
        "command": (str, None),
        "seed": (int, 0),
        "output_dir": (str, "fracobstacle-out"),
        "method": (str, "auto"),
    },
    "domain": {
        "lengths": (lambda t: tuple(float(x) for x in t.split()), (1.0,)),
        "n_cells": (lambda t: tuple(int(x) for x in t.split()), (32,)),
    },
    "operator": {
        "s": (float, 0.5),
        "shift": (float, 0.0),
    },
    "solver": {
        "omega": (float, 1.5),
        "tol": (float, 1e-10),
        "max_iter": (int, 100_000),
        "residual_tol": (float, 1e-7),
        "act_tol": (float, 1e-8),
        "oracle_cap": (int, 512),
        "trials": (int, 64),
    },
    "time": {
        "T": (float, 1.0),
        "steps": (int, 20),
        "horizon": (float, 100.0),
        "step": (float, 0.1),
        "stop_tol": (float, 1e-8),
        "asymp_tol": (float, 1e-3),
    },
    "sources": {
        "f": (str, "zero"),
        "f_time": (str, "constant"),
        "psi": (str, "zero"),
        "u0": (str, "zero"),
        "f2": (str, None),
        "psi2": (str, None),
        "u0_2": (str, None),
        "f_star": (str, None),
    },
    "extension": {
        "levels": (lambda t: tuple(int(x) for x in t.split()), (32, 64, 128)),
        "mode": (int, 1),
        "samples": (int, 10),
        "orders": (lambda t: tuple(float(x) for x in t.split()), ()),
    },
    "suite": {
        "orders": (lambda t: tuple(float(x) for x in t.split()), (0.25, 0.5, 0.75)),
        "shifts": (lambda t: tuple(float(x) for x in t.split()), (0.0, 1.0)),
        "trials": (int, 10),
    },
}

_REQUIRED = {
    "solve-poisson": [("sources", "f")],
    "solve-obstacle": [("sources", "f"), ("sources", "psi")],
    "verify-ls": [("sources", "f"), ("sources", "psi")],
    "compare": [("sources", "f"), ("sources", "psi"), ("sources", "f2"), ("sources", "psi2")],
    "evolve": [("time", "T"), ("time", "steps")],
    "asymptotic": [("sources", "f")],
    "extension-check": [],
    "suite": [],
}


@dataclass
class RunConfig:
    """Validated configuration; ``values[section][key]`` with defaults filled."""

    values: dict
    explicit: set = field(default_factory=set)
    source_dir: Path = field(default_factory=Path.cwd)

    def __getitem__(self, section):
        return self.values[section]

    @property
    def command(self):
        return self.values["run"]["command"]

    @property
    def seed(self):
        return self.values["run"]["seed"]

    @property
    def s(self):
        return self.values["operator"]["s"]


_SECTION = re.compile(r"^\[\s*([A-Za-z_][\w-]*)\s*\]$")
_ITEM = re.compile(r"^([A-Za-z_][\w]*)\s*=\s*(.*)$")


def parse_config(text, source_dir=None):
    """Parse and validate configuration text into a :class:`RunConfig`."""
    raw = {}
    seen = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        m = _SECTION.match(stripped)
        if m:
            section = m.group(1)
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", (lineno,))
            raw.setdefault(section, {})
            continue
        m = _ITEM.match(stripped)
        if not m:
            raise ConfigError(f"cannot parse {stripped!r}", (lineno,))
        if section is None:
            raise ConfigError("key outside of any [section]", (lineno,))
        key, value = m.group(1), m.group(2).strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", (lineno,), field=key)
        if (section, key) in seen:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", (seen[section, key], lineno), field=key)
        seen[section, key] = lineno
        raw[section][key] = (value, lineno)

    values = {}
    for sec, keys in _SCHEMA.items():
        values[sec] = {}
        for key, (conv, default) in keys.items():
            if key in raw.get(sec, {}):
                text_value, lineno = raw[sec][key]
                try:
                    values[sec][key] = conv(text_value)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key!r}: {exc}", (lineno,), field=key) from None
            else:
                values[sec][key] = default
    cfg = RunConfig(values, set(seen), Path(source_dir) if source_dir else Path.cwd())
    validate(cfg, seen)
    return cfg


def _fail(msg, fieldname, seen, key):
    lines = (seen[key],) if key in seen else ()
    raise ConfigError(msg, lines, field=fieldname)


def validate(cfg, seen=None):
    seen = seen if seen is not None else {}
    v = cfg.values
    cmd = v["run"]["command"]
    if cmd is None:
        raise ConfigError("missing required key 'command' in [run]", field="command")
    if cmd not in COMMANDS:
        _fail(f"unknown command {cmd!r}; expected one of {', '.join(COMMANDS)}", "command", seen, ("run", "command"))
    if v["run"]["method"] not in ("auto", "psor", "active_set"):
        _fail("method must be auto, psor or active_set", "method", seen, ("run", "method"))
    s = v["operator"]["s"]
    if not 0.0 < s < 1.0:
        _fail(f"s must lie in (0, 1), got {s}", "s", seen, ("operator", "s"))
    if v["operator"]["shift"] < 0:
        _fail("shift must be >= 0", "shift", seen, ("operator", "shift"))
    dom = v["domain"]
    if len(dom["lengths"]) != len(dom["n_cells"]) or len(dom["lengths"]) not in (1, 2):
        _fail("domain needs matching lengths and n_cells of arity 1 or 2", "n_cells", seen, ("domain", "n_cells"))
    if any(n < 2 for n in dom["n_cells"]):
        _fail("each axis needs at least 2 interior nodes", "n_cells", seen, ("domain", "n_cells"))
    if any(L <= 0 for L in dom["lengths"]):
        _fail("lengths must be positive", "lengths", seen, ("domain", "lengths"))
    sol = v["solver"]
    if not 0 < sol["omega"] < 2:
        _fail("omega must lie in (0, 2)", "omega", seen, ("solver", "omega"))
    if sol["tol"] <= 0 or sol["max_iter"] < 1:
        _fail("tol must be positive and max_iter >= 1", "tol", seen, ("solver", "tol"))
    t = v["time"]
    if t["T"] <= 0 or t["steps"] < 1 or t["horizon"] <= 0 or t["step"] <= 0:
        _fail("time settings must be positive", "T", seen, ("time", "T"))
    if v["sources"]["f_time"] not in ("constant", "linear", "sin"):
        _fail("f_time must be constant, linear or sin", "f_time", seen, ("sources", "f_time"))
    if any(M < 8 for M in v["extension"]["levels"]):
        _fail("extension levels must be >= 8", "levels", seen, ("extension", "levels"))
    for o in v["extension"]["orders"] + v["suite"]["orders"]:
        if not 0 < o < 1:
            raise ConfigError(f"orders must lie in (0, 1), got {o}", field="orders")
    for sec, key in _REQUIRED[cmd]:
        if v[sec][key] is None or ((sec, key) not in seen and sec == "sources"):
            raise ConfigError(f"command {cmd!r} requires {key!r} in [{sec}]", field=key)
    return cfg


def load_config(path):
    path = Path(path)
    return parse_config(path.read_text(), source_dir=path.parent)


def build_profile(text, basis, rng=None, source_dir=None):
    """Grid values for a named profile.

    ``zero`` | ``constant C`` | ``hat H [c1 [c2]]`` (``max(0, H - |x - c|)``,
    centre defaults to the box centre) | ``mode K [AMP]`` (``AMP * phi_K``,
    1-based) | ``random SCALE`` (seeded normal) | ``file PATH`` (one value
    per line, or whitespace/comma separated).
    """
    parts = text.replace(",", " ").split()
    if not parts:
        raise ConfigError("empty profile")
    name, args = parts[0], parts[1:]
    dom = basis.domain
    try:
        nums = [float(a) for a in args] if name != "file" else []
    except ValueError:
        raise ConfigError(f"profile {name!r} expects numeric arguments, got {args}") from None
    if name == "zero":
        return np.zeros(basis.size)
    if name == "constant":
        return np.full(basis.size, nums[0] if nums else 1.0)
    if name == "hat":
        height = nums[0] if nums else 0.2
        centre = np.array(nums[1:] if len(nums) > 1 else [L / 2 for L in dom.lengths])
        if centre.size != dom.dim:
            raise ConfigError("hat centre must have one coordinate per axis")
        dist = np.linalg.norm(basis.nodes - centre, axis=1)
        return np.maximum(0.0, height - dist)
    if name == "mode":
        k = int(nums[0]) if nums else 1
        if not 1 <= k <= basis.size:
            raise ConfigError(f"mode index {k} out of range 1..{basis.size}")
        amp = nums[1] if len(nums) > 1 else 1.0
        return amp * basis.mode(k - 1)
    if name == "random":
        scale = nums[0] if nums else 1.0
        return scale * np.random.default_rng(rng).standard_normal(basis.size)
    if name == "file":
        if not args:
            raise ConfigError("file profile needs a path")
        p = Path(args[0])
        if not p.is_absolute() and source_dir is not None:
            p = Path(source_dir) / p
        vals = np.array(p.read_text().replace(",", " ").split(), dtype=float)
        return basis.values(vals, str(p))
    raise ConfigError(f"unknown profile {name!r}")


def time_profile(name):
    return {"constant": lambda t: 1.0, "linear": lambda t: t, "sin": np.sin}[name]
