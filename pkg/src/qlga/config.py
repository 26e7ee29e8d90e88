"""Experiment configuration: a sectioned key-value format with typed, validated values.

Example::

    [experiment]
    kind = run-brick

    [lattice]
    l = 32

    [kinetic]
    a = 0+0.7071067811865476j
    b = 0.7071067811865476+0j

Every key has a default, unknown keys are rejected with a suggestion, and all
problems are reported together.
"""

from __future__ import annotations

import configparser
import difflib
import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics as dyn
from .gates import ATOL, STATISTICS, CollisionSpec, KineticParams, kinetic_violations
from .lattice import BRICK1D, QLGA, LatticeSpec, build_lattice

KINDS = ("run-brick", "run-qlga", "dispersion", "converge", "oracle-check", "gate-count", "m-inverse")


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


# value types --------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_complex(z: complex) -> str:
    z = complex(z)
    im = repr(z.imag)
    sign = "" if im.startswith("-") else "+"
    return f"{z.real!r}{sign}{im}j"


class Field:
    def __init__(self, default, check=None, doc=""):
        self.default = default
        self.check = check
        self.doc = doc

    def parse(self, text: str):
        raise NotImplementedError

    def render(self, value) -> str:
        return str(value)


class Int(Field):
    kind = "integer"

    def parse(self, text):
        return int(text.strip())


class Float(Field):
    kind = "real number"

    def parse(self, text):
        v = float(text.strip())
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v

    def render(self, value):
        return _fmt_float(value)


class OptFloat(Float):
    kind = "real number or none"

    def parse(self, text):
        return None if text.strip().lower() == "none" else super().parse(text)

    def render(self, value):
        return "none" if value is None else _fmt_float(value)


class Complex(Field):
    kind = "complex number (re+imj)"

    def parse(self, text):
        v = complex(text.strip().replace(" ", ""))
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise ValueError("must be finite")
        return v

    def render(self, value):
        return _fmt_complex(value)


class Choice(Field):
    def __init__(self, options, default, **kw):
        super().__init__(default, **kw)
        self.options = tuple(options)
        self.kind = "one of " + ", ".join(self.options)

    def parse(self, text):
        v = text.strip()
        if v not in self.options:
            hint = difflib.get_close_matches(v, self.options, n=1)
            extra = f" (did you mean {hint[0]!r}?)" if hint else ""
            raise ValueError(f"{v!r} is not {self.kind}{extra}")
        return v


class IntList(Field):
    kind = "comma-separated integers"

    def parse(self, text):
        text = text.strip()
        return tuple(int(t) for t in text.split(",") if t.strip()) if text else ()

    def render(self, value):
        return ", ".join(str(v) for v in value)


class FloatList(Field):
    kind = "comma-separated real numbers"

    def parse(self, text):
        text = text.strip()
        vals = tuple(float(t) for t in text.split(",") if t.strip()) if text else ()
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("must be finite")
        return vals

    def render(self, value):
        return ", ".join(_fmt_float(v) for v in value)


def _positive(v):
    return None if v > 0 else "must be positive"


def _nonneg(v):
    return None if v >= 0 else "must be >= 0"


SCHEMA = {
    "experiment": {
        "kind": Choice(KINDS, "run-brick"),
        "seed": Int(0, _nonneg),
    },
    "lattice": {
        "d": Int(1),
        "l": Int(64),
        "epsilon": Float(0.1),
        "mode": Choice((BRICK1D, QLGA), BRICK1D),
    },
    "kinetic": {
        "a": Complex(1j / math.sqrt(2)),
        "b": Complex(1 / math.sqrt(2) + 0j),
        "phi": Float(0.0),
    },
    "collision": {
        "mu": Complex(1 + 0j),
        "nu": Complex(1j),
        "lambda": Complex(complex(math.cos(0.5), math.sin(0.5))),
        "phi_onsite": Float(0.0),
    },
    "run": {
        "statistics": Choice(STATISTICS, STATISTICS[0]),
        "steps": Int(0, _nonneg),
        "observe_every": Int(0, _nonneg),
        "representation": Choice(("sector", "dense"), "sector"),
        "pair_every": Choice(("pass", "double"), "pass"),
        "first_parity": Choice((dyn.ODD, dyn.EVEN), dyn.ODD),
        "shots": Int(0, _nonneg),
    },
    "initial": {
        "kind": Choice(("basis", "gaussian", "bloch"), "basis"),
        "occupied": IntList((0,)),
        "centers": FloatList(()),
        "widths": FloatList(()),
        "momenta": FloatList(()),
        "k": Int(0),
    },
    "potential": {
        "external": Choice(("none", "harmonic", "well", "random"), "none"),
        "strength": Float(1.0),
        "center": OptFloat(None),
        "width": Float(1.0, _positive),
        "modes": Int(3, _positive),
        "pair": Choice(("none", "contact", "gaussian"), "none"),
        "pair_strength": Float(0.0),
        "pair_range": Float(0.0, _nonneg),
    },
    "dispersion": {
        "k_list": IntList((1, 2)),
        "steps": Int(20, _positive),
    },
    "converge": {
        "length": Float(20.0, _positive),
        "time": Float(1.0, _positive),
        "h": Float(0.05, _positive),
        "levels": IntList((4, 2, 1)),
        "center": OptFloat(None),
        "width": Float(1.0, _positive),
        "momentum": Float(2.0),
        "potential": Choice(("free", "well"), "free"),
        "depth": Float(3.0),
        "well_width": Float(1.5, _positive),
        "refine": Int(4, _positive),
        "reference_dt": OptFloat(None),
    },
    "gate-count": {
        "n": Int(1, _nonneg),
    },
    "m-inverse": {
        "a": Complex(0.5j),
        "b": Complex(1 / math.sqrt(2) + 0j),
        "l_list": IntList((16, 64, 256)),
        "threshold": Float(1e-10, _positive),
    },
    "tolerance": {
        "norm": Float(1e-9, _positive),
        "dense_limit": Int(24, _positive),
    },
}


@dataclass(eq=True)
class ExperimentConfig:
    """Fully resolved configuration: ``values[section][key]``."""

    values: dict
    explicit: set = field(default_factory=set, compare=False, repr=False)

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    @property
    def kind(self) -> str:
        return self.values["experiment"]["kind"]

    @property
    def seed(self) -> int:
        return self.values["experiment"]["seed"]

    def with_overrides(self, updates: dict) -> "ExperimentConfig":
        """Copy with ``updates[section][key]`` replaced, revalidated."""
        vals = {s: dict(v) for s, v in self.values.items()}
        for section, items in updates.items():
            vals[section].update(items)
        out = ExperimentConfig(vals, set(self.explicit))
        _check_constraints(out)
        return out

    def as_dict(self) -> dict:
        """JSON-friendly copy (complex values rendered as text)."""
        out = {}
        for section, fields in SCHEMA.items():
            out[section] = {}
            for key, f in fields.items():
                v = self.values[section][key]
                out[section][key] = f.render(v) if isinstance(f, Complex) else (list(v) if isinstance(v, tuple) else v)
        return out


def default_config() -> ExperimentConfig:
    return ExperimentConfig({s: {k: f.default for k, f in fields.items()} for s, fields in SCHEMA.items()})


def _suggest(name: str, options) -> str:
    hint = difflib.get_close_matches(name, list(options), n=1, cutoff=0.6)
    return f"; did you mean {hint[0]!r}?" if hint else ""


def parse_config(text: str, kind: str | None = None) -> ExperimentConfig:
    """Parse and validate; raises :class:`ConfigError` listing every problem.

    Without an explicit ``[experiment] kind`` the experiment is ``kind`` when
    given, else ``run-qlga`` or ``run-brick`` depending on the lattice mode.
    """
    parser = configparser.ConfigParser(interpolation=None, default_section="\x00unused")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc.message if hasattr(exc, 'message') else exc}"]) from None
    errors = []
    cfg = default_config()
    for section in parser.sections():
        if section not in SCHEMA:
            errors.append(f"unknown section [{section}]{_suggest(section, SCHEMA)}")
            continue
        fields = SCHEMA[section]
        for key, raw in parser.items(section):
            if key not in fields:
                errors.append(f"unknown key {key!r} in [{section}]{_suggest(key, fields)}")
                continue
            f = fields[key]
            try:
                value = f.parse(raw)
            except ValueError as exc:
                errors.append(f"[{section}] {key}: expected {f.kind}, got {raw!r} ({exc})")
                continue
            if f.check is not None and (msg := f.check(value)):
                errors.append(f"[{section}] {key}: {msg}")
                continue
            cfg.values[section][key] = value
            cfg.explicit.add((section, key))
    if errors:
        raise ConfigError(errors)
    if ("experiment", "kind") not in cfg.explicit:
        if kind is not None:
            cfg.values["experiment"]["kind"] = kind
        elif cfg["lattice"]["mode"] == QLGA:
            cfg.values["experiment"]["kind"] = "run-qlga"
    _check_constraints(cfg)
    return cfg


def _check_constraints(cfg: ExperimentConfig):
    errors = []
    lat = cfg["lattice"]
    kind = cfg.kind
    try:
        build_lattice(lat["d"], lat["l"], lat["epsilon"], lat["mode"])
    except ValueError as exc:
        errors.extend(f"[lattice] {e}" for e in str(exc).split("; "))
    kin = cfg["kinetic"]
    for problem in kinetic_violations(kin["a"], kin["b"]):
        errors.append(f"[kinetic] constraint violated: {problem}")
    col = cfg["collision"]
    for key in ("mu", "nu", "lambda"):
        if abs(abs(col[key]) - 1) > ATOL:
            errors.append(f"[collision] {key} must be unimodular (|{key}| = {abs(col[key])!r})")
    if kind == "run-brick" and lat["mode"] != BRICK1D:
        errors.append("[lattice] mode must be brick1d for run-brick")
    if kind == "run-qlga" and lat["mode"] != QLGA:
        errors.append("[lattice] mode must be qlga for run-qlga")
    if kind == "converge" and lat["mode"] != BRICK1D:
        errors.append("[lattice] converge studies use the brick1d model")
    run = cfg["run"]
    if lat["mode"] == BRICK1D and run["pair_every"] == "double" and run["steps"] % 2:
        errors.append("[run] pair_every = double needs an even number of steps")
    if kind == "dispersion" and lat["mode"] == BRICK1D and cfg["dispersion"]["steps"] % 2:
        errors.append("[dispersion] steps must be even for the brick model")
    init = cfg["initial"]
    if init["kind"] == "gaussian":
        n = len(init["centers"])
        if n == 0:
            errors.append("[initial] gaussian needs at least one center")
        for key in ("widths", "momenta"):
            if init[key] and len(init[key]) != n:
                errors.append(f"[initial] {key} needs {n} entries to match centers")
        if any(w <= 0 for w in init["widths"]):
            errors.append("[initial] widths must be positive")
    mi = cfg["m-inverse"]
    a, b = mi["a"], mi["b"]
    if abs(abs(b) ** 2 + 2 * abs(a) ** 2 - 1) > ATOL:
        errors.append(f"[m-inverse] constraint violated: normalization |b|^2+2|a|^2 = 1 (got {abs(b) ** 2 + 2 * abs(a) ** 2!r})")
    cross = a * b.conjugate() + a.conjugate() * b
    if abs(cross) > ATOL:
        errors.append(f"[m-inverse] constraint violated: unitarity a*conj(b)+conj(a)*b = 0 (got {cross.real!r})")
    if any(v < 3 or v > 512 for v in mi["l_list"]):
        errors.append("[m-inverse] l_list entries must lie in [3, 512]")
    conv = cfg["converge"]
    if not conv["levels"] or any(v <= 0 for v in conv["levels"]):
        errors.append("[converge] levels must be positive integers")
    if errors:
        raise ConfigError(errors)


def render(cfg: ExperimentConfig) -> str:
    lines = []
    for section, fields in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, f in fields.items():
            lines.append(f"{key} = {f.render(cfg.values[section][key])}".rstrip())
        lines.append("")
    return "\n".join(lines)


# builders -----------------------------------------------------------------------


def lattice_of(cfg: ExperimentConfig) -> LatticeSpec:
    lat = cfg["lattice"]
    return build_lattice(lat["d"], lat["l"], lat["epsilon"], lat["mode"])


def kinetic_of(cfg: ExperimentConfig) -> KineticParams:
    return KineticParams(cfg["kinetic"]["a"], cfg["kinetic"]["b"])


def collision_of(cfg: ExperimentConfig) -> CollisionSpec:
    c = cfg["collision"]
    return CollisionSpec(c["mu"], c["nu"], c["lambda"], c["phi_onsite"], cfg["run"]["statistics"])


def _periodic_offsets(lattice: LatticeSpec, center) -> np.ndarray:
    L = lattice.length
    pos = lattice.site_coords * lattice.epsilon
    c = np.full(lattice.d, L / 2 if center is None else center)
    return (pos - c + L / 2) % L - L / 2


def external_field(cfg: ExperimentConfig, lattice: LatticeSpec) -> dyn.PotentialField | None:
    p = cfg["potential"]
    kind = p["external"]
    if kind == "none":
        return None
    r2 = np.sum(_periodic_offsets(lattice, p["center"]) ** 2, axis=1)
    if kind == "harmonic":
        values = p["strength"] * r2
    elif kind == "well":
        values = -p["strength"] * np.exp(-r2 / (2 * p["width"] ** 2))
    else:
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        pos = lattice.site_coords * lattice.epsilon
        values = np.zeros(lattice.num_sites)
        for axis in range(lattice.d):
            for j in range(1, p["modes"] + 1):
                amp = p["strength"] * rng.normal() / j**2
                values += amp * np.cos(2 * np.pi * j * pos[:, axis] / lattice.length + rng.uniform(0, 2 * np.pi))
    return dyn.PotentialField(values)


def pair_field(cfg: ExperimentConfig, lattice: LatticeSpec) -> dyn.PairPotential | None:
    p = cfg["potential"]
    kind = p["pair"]
    if kind == "none":
        return None
    L = lattice.length
    pos = lattice.site_coords * lattice.epsilon
    diff = (pos[:, None, :] - pos[None, :, :] + L / 2) % L - L / 2
    dist = np.sqrt(np.sum(diff**2, axis=2))
    dist = np.minimum(dist, dist.T)  # exact symmetry despite rounding
    if kind == "contact":
        table = np.where(dist <= p["pair_range"] + 1e-12, p["pair_strength"], 0.0)
    else:
        rng = max(p["pair_range"], 1e-300)
        table = p["pair_strength"] * np.exp(-(dist**2) / (2 * rng**2))
    return dyn.PairPotential(table)


def initial_of(cfg: ExperimentConfig) -> dyn.InitialState:
    i = cfg["initial"]
    return dyn.InitialState(
        kind=i["kind"],
        occupied=i["occupied"],
        centers=i["centers"],
        widths=i["widths"],
        momenta=i["momenta"],
        k=i["k"],
    )


def run_config_of(cfg: ExperimentConfig) -> dyn.RunConfig:
    lattice = lattice_of(cfg)
    run = cfg["run"]
    return dyn.RunConfig(
        lattice=lattice,
        kinetic=kinetic_of(cfg) if lattice.mode == BRICK1D else None,
        phi=cfg["kinetic"]["phi"],
        collision=collision_of(cfg) if lattice.mode == QLGA else None,
        statistics=run["statistics"],
        external=external_field(cfg, lattice),
        pair=pair_field(cfg, lattice),
        pair_every=run["pair_every"],
        steps=run["steps"],
        initial=initial_of(cfg),
        observe_every=run["observe_every"],
        seed=cfg.seed,
        representation=run["representation"],
        first_parity=run["first_parity"],
        norm_tol=cfg["tolerance"]["norm"],
    )
