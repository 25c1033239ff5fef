"""Seeded synthesis of Gaussian-then-impulse degradations.

All randomness comes from a ``numpy.random.Generator`` (PCG64) seeded
with ``NoiseSpec.seed``; draws are made in a fixed order (Gaussian field,
impulse selector, impulse values) so equal inputs give bit-identical
outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .image_core import D_MAX, D_MIN, clip


class NoiseKind(str, Enum):
    SALT_PEPPER = "sp"
    RANDOM_VALUED = "rv"

    @classmethod
    def parse(cls, value: "str | NoiseKind") -> "NoiseKind":
        if isinstance(value, cls):
            return value
        aliases = {
            "sp": cls.SALT_PEPPER,
            "saltpepper": cls.SALT_PEPPER,
            "salt_pepper": cls.SALT_PEPPER,
            "rv": cls.RANDOM_VALUED,
            "randomvalued": cls.RANDOM_VALUED,
            "random_valued": cls.RANDOM_VALUED,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown noise kind {value!r}; use 'sp' or 'rv'") from None


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    rate: float
    kind: NoiseKind = NoiseKind.SALT_PEPPER
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"rate must lie in [0, 1], got {self.rate}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        object.__setattr__(self, "kind", NoiseKind.parse(self.kind))


@dataclass(frozen=True)
class CorruptionRecord:
    noisy: np.ndarray
    truth_mask: np.ndarray
    spec: NoiseSpec


def _check_rate(rate: float) -> None:
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must lie in [0, 1], got {rate}")


def add_gaussian(x: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. N(0, sigma^2) noise. The result is not clipped."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    x = np.asarray(x, dtype=np.float64)
    noise = rng.standard_normal(x.shape)
    if sigma == 0:
        return x.copy()
    return x + sigma * noise


def add_salt_pepper(
    y_tilde: np.ndarray, rate: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Set each pixel to 0 or 255 with probability rate/2 each."""
    _check_rate(rate)
    out = np.array(y_tilde, dtype=np.float64)
    u = rng.random(out.shape)
    pepper = u < rate / 2
    salt = (u >= rate / 2) & (u < rate)
    out[pepper] = D_MIN
    out[salt] = D_MAX
    return out, pepper | salt


def add_random_valued(
    y_tilde: np.ndarray, rate: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Replace each pixel with probability ``rate`` by a uniform draw in [0, 255].

    A replacement that happens to equal the original still counts as masked.
    """
    _check_rate(rate)
    out = np.array(y_tilde, dtype=np.float64)
    hit = rng.random(out.shape) < rate
    values = rng.uniform(D_MIN, D_MAX, size=out.shape)
    out[hit] = values[hit]
    return out, hit


def corrupt(x: np.ndarray, spec: NoiseSpec) -> CorruptionRecord:
    rng = np.random.default_rng(spec.seed)
    y_tilde = clip(add_gaussian(x, spec.sigma, rng))
    if spec.kind is NoiseKind.SALT_PEPPER:
        noisy, mask = add_salt_pepper(y_tilde, spec.rate, rng)
    else:
        noisy, mask = add_random_valued(y_tilde, spec.rate, rng)
    return CorruptionRecord(noisy=noisy, truth_mask=mask, spec=spec)
