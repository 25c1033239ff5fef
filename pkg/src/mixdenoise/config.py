"""Flat ``section.key = value`` configuration files.

Blank lines and lines starting with ``#`` are ignored. Unset weights fall
back to the sigma-scaled defaults of :meth:`SolverConfig.for_sigma`.
"""

from __future__ import annotations

import os

from .noise_synth import NoiseKind
from .nonlocal_prior import NonlocalConfig
from .solver import SolverConfig


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.replace(",", " ").split())


# key -> (SolverConfig field or "nonlocal.<field>", parser)
KEYS = {
    "solver.lambda": ("lam", float),
    "solver.beta": ("beta", float),
    "solver.mu1": ("mu1", float),
    "solver.mu2": ("mu2", float),
    "solver.sigma": ("sigma", float),
    "solver.kind": ("kind", NoiseKind.parse),
    "solver.inner_iters": ("inner_iters", int),
    "solver.outer_iters": ("outer_iters", int),
    "solver.init": ("init", str),
    "detect.w_max": ("w_max", int),
    "detect.amf_extremes_only": ("amf_extremes_only", _bool),
    "detect.delta_schedule": ("delta_schedule", _floats),
    "detect.acwmf_scale": ("acwmf_scale", float),
    "local.rho0_factor": ("rho0_factor", float),
    "local.hqs_iters": ("hqs_iters", int),
    "nonlocal.block_size": ("nonlocal.block_size", int),
    "nonlocal.group_size": ("nonlocal.group_size", int),
    "nonlocal.window": ("nonlocal.window", int),
    "nonlocal.step": ("nonlocal.step", int),
    "nonlocal.weights": ("nonlocal.weights", str),
}


class ConfigError(ValueError):
    pass


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse config text into a ``{key: typed value}`` dict."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        key, _, val = (p.strip() for p in line.partition("="))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = KEYS[key][1](val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return values


def load_config(path: str | os.PathLike) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))


def build_config(values: dict, sigma: float | None = None, kind=None) -> SolverConfig:
    """Turn parsed values (plus CLI sigma/kind, which win) into a SolverConfig."""
    solver_kw = {}
    nl_kw = {}
    for key, val in values.items():
        target = KEYS[key][0]
        if target.startswith("nonlocal."):
            nl_kw[target.split(".", 1)[1]] = val
        else:
            solver_kw[target] = val
    if sigma is not None:
        solver_kw["sigma"] = sigma
    if kind is not None:
        solver_kw["kind"] = kind
    sig = solver_kw.pop("sigma", 10.0)
    knd = solver_kw.pop("kind", NoiseKind.SALT_PEPPER)
    if nl_kw:
        solver_kw["nonlocal_cfg"] = NonlocalConfig(**nl_kw)
    return SolverConfig.for_sigma(sig, knd, **solver_kw)


def dump_config(cfg: SolverConfig) -> list[str]:
    """Every configurable key with its effective value, in ``KEYS`` order."""
    lines = []
    for key, (target, _) in KEYS.items():
        if target.startswith("nonlocal."):
            val = getattr(cfg.nonlocal_cfg, target.split(".", 1)[1])
        else:
            val = getattr(cfg, target)
        if isinstance(val, NoiseKind):
            val = val.value
        elif isinstance(val, tuple):
            val = ",".join(repr(v) for v in val)
        elif isinstance(val, bool):
            val = str(val).lower()
        lines.append(f"{key} = {val}")
    return lines

