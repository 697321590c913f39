"""INI-style configuration files and the shipped presets.

Experiment files hold one ``[experiment]`` section plus one
``[policy <name>]`` section per noise policy; every listed state is run
against every policy.  Extensivity files hold ``[extensivity]`` plus
``[family <name>]`` sections.  Unknown keys are rejected.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .extensivity import KacPolicy, PolicyKind
from .lindblad import DissipatorKind, IntegratorOptions, Method
from .metrology import DerivativeMode
from .states import StateKind
from .sweep import ExperimentConfig, NoisePolicy

PRESETS = ("fig1", "fig2", "extensivity")


class ConfigError(ValueError):
    """Schema violation; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _parser() -> configparser.ConfigParser:
    return configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))


def _read(path: str | Path) -> configparser.ConfigParser:
    cp = _parser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(str(path), f"unparsable: {exc}") from exc
    return cp


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise ConfigError("--preset", f"unknown preset {name!r}; choose from {PRESETS}")
    return Path(str(resources.files("openqi") / "presets" / f"{name}.cfg"))


def parse_grid(text: str, where: str) -> tuple[int, ...]:
    """'2:24:2' (inclusive range) or '2, 4, 8'."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            start, stop, step = parts
            if step == 0:
                raise ValueError("zero step")
            grid = tuple(range(start, stop + (1 if step > 0 else -1), step))
        else:
            grid = tuple(int(p) for p in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(where, f"bad integer grid {text!r} ({exc})") from exc
    if not grid:
        raise ConfigError(where, "grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(where, "grid must be strictly ascending")
    if grid[0] < 1:
        raise ConfigError(where, "grid entries must be >= 1")
    return grid


def parse_window(text: str, where: str) -> tuple[int, int] | None:
    text = text.strip()
    if text in ("", "upper_half", "auto"):
        return None
    try:
        lo, hi = (int(p) for p in text.split(":"))
    except ValueError as exc:
        raise ConfigError(where, f"expected N_min:N_max, got {text!r}") from exc
    if hi < lo:
        raise ConfigError(where, "window upper bound below lower bound")
    return lo, hi


class _Section:
    def __init__(self, cp, name):
        self.name = name
        self.sec = cp[name]
        self.used = set()

    def _get(self, key, default):
        self.used.add(key)
        if key in self.sec:
            return self.sec[key]
        if default is _REQUIRED:
            raise ConfigError(f"{self.name}.{key}", "missing required field")
        return default

    def str(self, key, default=None):
        v = self._get(key, default)
        return v.strip() if isinstance(v, str) else v

    def float(self, key, default=None):
        v = self._get(key, default)
        if v is None or isinstance(v, (int, float)):
            return v
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"{self.name}.{key}", f"not a number: {v!r}") from None

    def int(self, key, default=None):
        v = self._get(key, default)
        if v is None or isinstance(v, int):
            return v
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"{self.name}.{key}", f"not an integer: {v!r}") from None

    def bool(self, key, default=None):
        v = self._get(key, default)
        if v is None or isinstance(v, bool):
            return v
        low = v.strip().lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{self.name}.{key}", f"not a boolean: {v!r}")

    def enum(self, key, cls, default=None):
        v = self.str(key, default)
        if v is None or isinstance(v, cls):
            return v
        try:
            return cls(v)
        except ValueError:
            allowed = ", ".join(m.value for m in cls)
            raise ConfigError(f"{self.name}.{key}", f"{v!r} not one of: {allowed}") from None

    def finish(self):
        extra = set(self.sec) - self.used
        if extra:
            raise ConfigError(f"{self.name}.{sorted(extra)[0]}", "unknown field")


_REQUIRED = object()


@dataclass
class RunSpec:
    """A parsed experiment file: states x policies on one base configuration."""

    base: ExperimentConfig
    states: list[StateKind]
    policies: list[NoisePolicy]
    timing: bool = True
    source: str = ""

    def configs_for(self, state: StateKind) -> ExperimentConfig:
        return replace(self.base, state=state)


def _policy(sec: _Section, label: str) -> NoisePolicy:
    rule = sec.enum("rule", PolicyKind, PolicyKind.NONE)
    gamma0 = sec.float("gamma0", _REQUIRED)
    sigma = sec.float("sigma")
    power = sec.float("power")
    label = sec.str("label", label)
    if gamma0 < 0 or not math.isfinite(gamma0):
        raise ConfigError(f"{sec.name}.gamma0", "must be a finite rate >= 0")
    try:
        policy = KacPolicy(rule, sigma=sigma, power=power)
    except ValueError as exc:
        raise ConfigError(f"{sec.name}.rule", str(exc)) from None
    sec.finish()
    return NoisePolicy(label, gamma0, policy)


def load_run_config(path: str | Path, fit_window: str | None = None) -> RunSpec:
    cp = _read(path)
    if "experiment" not in cp:
        raise ConfigError("experiment", "missing [experiment] section")
    sec = _Section(cp, "experiment")

    states_text = sec.str("states", _REQUIRED)
    states = []
    for s in states_text.replace(",", " ").split():
        try:
            states.append(StateKind(s))
        except ValueError:
            allowed = ", ".join(m.value for m in StateKind)
            raise ConfigError("experiment.states", f"{s!r} not one of: {allowed}") from None
    if not states:
        raise ConfigError("experiment.states", "no states listed")

    grid = parse_grid(sec.str("n_grid", _REQUIRED), "experiment.n_grid")
    window = parse_window(
        fit_window if fit_window is not None else sec.str("fit_window", ""),
        "experiment.fit_window",
    )
    apply_bs_text = sec.str("apply_bs", "auto").lower()
    apply_bs = None if apply_bs_text == "auto" else sec.bool("apply_bs")

    defaults = IntegratorOptions()
    integrator = IntegratorOptions(
        method=sec.enum("method", Method, defaults.method),
        rel_tol=sec.float("rel_tol", defaults.rel_tol),
        abs_tol=sec.float("abs_tol", defaults.abs_tol),
        max_step=sec.float("max_step", defaults.max_step),
        rk4_steps=sec.int("rk4_steps", defaults.rk4_steps),
        rehermitize_every=sec.int("rehermitize_every", defaults.rehermitize_every),
    )
    base_kwargs = dict(
        dissipator=sec.enum("dissipator", DissipatorKind, _REQUIRED),
        n_grid=grid,
        delta0=sec.float("delta0", 0.1),
        hold_time=sec.float("hold_time", 1.0),
        apply_bs=apply_bs,
        derivative=sec.enum("derivative", DerivativeMode, DerivativeMode.SENSITIVITY_ODE),
        fd_step=sec.float("fd_step"),
        eps_p=sec.float("eps_p", 1e-12),
        fit_window=window,
        integrator=integrator,
    )
    timing = sec.bool("timing", True)
    sec.finish()

    policies = []
    for name in cp.sections():
        if name == "experiment":
            continue
        kind, _, label = name.partition(" ")
        if kind != "policy" or not label.strip():
            raise ConfigError(name, "expected a section named [policy <label>]")
        policies.append(_policy(_Section(cp, name), label.strip()))
    if not policies:
        raise ConfigError("policy", "at least one [policy <label>] section is required")

    try:
        base = ExperimentConfig(state=states[0], **base_kwargs)
        for s in states[1:]:
            ExperimentConfig(state=s, **base_kwargs)
    except ValueError as exc:
        field_name = "n_grid" if "grid" in str(exc) else "experiment"
        raise ConfigError(f"experiment.{field_name}", str(exc)) from None
    return RunSpec(base, states, policies, timing, str(path))


@dataclass
class FamilySpec:
    name: str
    kind: str
    expected: float
    n_grid: tuple[int, ...] = ()
    g_grid: tuple[float, ...] = ()
    n_a: float = 4.0
    n_r: float = 16.0


@dataclass
class ExtensivitySpec:
    epsilon: float
    g: float
    m_avg: float
    omega_a: float
    omega_min: float
    omega_max: float
    detuning: float
    tolerance: float
    families: list[FamilySpec] = field(default_factory=list)
    source: str = ""


_FAMILY_KINDS = {
    "single_mode": 1.5,
    "two_mode_linear": 1.5,
    "two_mode_number_conserving": 2.0,
    "single_pair": 1.0,
}


def load_extensivity_config(path: str | Path) -> ExtensivitySpec:
    cp = _read(path)
    if "extensivity" not in cp:
        raise ConfigError("extensivity", "missing [extensivity] section")
    sec = _Section(cp, "extensivity")
    grid_text = sec.str("n_grid", "8, 16, 32, 64")
    spec = ExtensivitySpec(
        epsilon=sec.float("epsilon", 0.1),
        g=sec.float("g", 0.05),
        m_avg=sec.float("m_avg", 2.0),
        omega_a=sec.float("omega_a", 1.0),
        omega_min=sec.float("omega_min", 0.5),
        omega_max=sec.float("omega_max", 1.5),
        detuning=sec.float("detuning", 0.0),
        tolerance=sec.float("tolerance", 0.02),
        source=str(path),
    )
    default_grid = parse_grid(grid_text, "extensivity.n_grid")
    sec.finish()
    if not 0 < spec.epsilon <= 1:
        raise ConfigError("extensivity.epsilon", "must lie in (0, 1]")

    for name in cp.sections():
        if name == "extensivity":
            continue
        kind, _, label = name.partition(" ")
        if kind != "family" or not label.strip():
            raise ConfigError(name, "expected a section named [family <label>]")
        fs = _Section(cp, name)
        fkind = fs.str("kind", _REQUIRED)
        if fkind not in _FAMILY_KINDS:
            raise ConfigError(f"{name}.kind", f"{fkind!r} not one of: {', '.join(_FAMILY_KINDS)}")
        fam = FamilySpec(label.strip(), fkind, fs.float("expected", _FAMILY_KINDS[fkind]))
        if fkind == "single_pair":
            g_text = fs.str("g_grid", "0.05, 0.1, 0.2, 0.4")
            try:
                fam.g_grid = tuple(float(x) for x in g_text.replace(",", " ").split())
            except ValueError:
                raise ConfigError(f"{name}.g_grid", f"bad number list {g_text!r}") from None
            fam.n_a = fs.float("n_a", 4.0)
            fam.n_r = fs.float("n_r", 16.0)
        else:
            text = fs.str("n_grid")
            fam.n_grid = parse_grid(text, f"{name}.n_grid") if text else default_grid
        fs.finish()
        spec.families.append(fam)
    if not spec.families:
        raise ConfigError("family", "at least one [family <label>] section is required")
    return spec
