"""Sampling kernels for correlated photon counts.

Every kernel is a pure function of its inputs and an explicit
``numpy.random.Generator``.  Generators are derived from an
:class:`RngStream`, which keys a Philox counter-based generator on
``(seed, frame block, channel tag)`` so that a block of frames produces the
same draws no matter which worker evaluates it, or in what order.

Count model
-----------
A pixel collecting ``M`` thermal modes with ``mu / M`` photons per mode
sees a negative-binomial count (gamma-Poisson mixture) with mean ``mu`` and
variance ``mu (1 + mu / M)``.  Binomial thinning of that count models
losses; thinning both arms of one shared count independently gives twin-beam
correlations, multinomial routing of one shared count gives split-thermal
correlations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

# Below this many photons per mode the negative binomial is replaced by a
# Poisson draw; the relative variance error is at most this value.
POISSON_OCCUPATION_THRESHOLD = 1e-3

CHANNEL_TAGS = {
    "source": 1,
    "thinning": 2,
    "noise-probe": 3,
    "noise-reference": 4,
}


@dataclass(frozen=True)
class ModeStatistics:
    """Multi-mode thermal count statistics for one pixel and frame."""

    mean_photons_per_mode: float
    modes: float

    def __post_init__(self):
        if not np.isfinite(self.mean_photons_per_mode) or self.mean_photons_per_mode < 0:
            raise ValidationError(
                f"mean_photons_per_mode must be finite and >= 0, got {self.mean_photons_per_mode}"
            )
        if not np.isfinite(self.modes) or self.modes < 1:
            raise ValidationError(f"mode count must be >= 1, got {self.modes}")

    @property
    def mean(self) -> float:
        return self.modes * self.mean_photons_per_mode

    @property
    def variance(self) -> float:
        mu = self.mean
        return mu * (1.0 + self.mean_photons_per_mode)

    @property
    def poissonian(self) -> bool:
        return self.mean_photons_per_mode <= POISSON_OCCUPATION_THRESHOLD


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream identified by a seed and an integer key."""

    seed: int
    key: tuple = ()

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed), spawn_key=tuple(int(k) for k in self.key))
        return np.random.Generator(np.random.Philox(seq))


def block_stream(seed: int, block: int, channel: str) -> RngStream:
    """Stream for one frame block and one channel of a simulation."""
    return RngStream(seed, (block, CHANNEL_TAGS[channel]))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def sample_generated_count(stats: ModeStatistics, rng, size=None) -> np.ndarray:
    """Draw pre-detection photon counts with the multi-mode thermal law.

    Uses a gamma-Poisson mixture with shape ``M``; in the deeply
    Poissonian regime (occupation per mode at or below
    ``POISSON_OCCUPATION_THRESHOLD``) draws a plain Poisson count instead.
    """
    rng = _as_generator(rng)
    mu = stats.mean
    if mu == 0:
        return np.zeros(size if size is not None else (), dtype=np.int64)
    if stats.poissonian:
        return rng.poisson(mu, size=size)
    intensity = rng.gamma(stats.modes, stats.mean_photons_per_mode, size=size)
    return rng.poisson(intensity)


def _check_probability(name, p):
    p = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValidationError(f"{name} must lie in [0, 1]")
    return p


def thin_independent(G, p1, p2, rng):
    """Detect each of ``G`` shared photons in two arms independently.

    Returns ``(d1, d2)`` with ``d1 ~ Bin(G, p1)`` and ``d2 ~ Bin(G, p2)``,
    conditionally independent given ``G``.  Over the compound law
    ``Cov(d1, d2) = p1 p2 Var(G)``.
    """
    rng = _as_generator(rng)
    p1 = _check_probability("p1", p1)
    p2 = _check_probability("p2", p2)
    G = np.asarray(G)
    d1 = rng.binomial(G, p1)
    d2 = rng.binomial(G, p2)
    return d1, d2


def thin_partition(G, q1, q2, rng):
    """Route each of ``G`` photons to arm 1, arm 2, or loss.

    Each photon lands in arm 1 with probability ``q1``, in arm 2 with
    probability ``q2``, and is lost otherwise.  Over the compound law
    ``Cov(d1, d2) = q1 q2 (Var(G) - E[G])``.
    """
    rng = _as_generator(rng)
    q1 = _check_probability("q1", q1)
    q2 = _check_probability("q2", q2)
    if np.any(q1 + q2 > 1 + 1e-12):
        raise ValidationError("q1 + q2 must not exceed 1")
    G = np.asarray(G)
    d1 = rng.binomial(G, q1)
    remaining = 1.0 - q1
    cond = np.divide(q2, remaining, out=np.zeros(np.broadcast(q2, remaining).shape), where=remaining > 0)
    d2 = rng.binomial(G - d1, np.clip(cond, 0.0, 1.0))
    return d1, d2


def add_electronic_noise(d, delta_el: float, rng) -> np.ndarray:
    """Add zero-mean Gaussian read noise of rms ``delta_el`` to counts."""
    if delta_el < 0 or not np.isfinite(delta_el):
        raise ValidationError(f"delta_el must be finite and >= 0, got {delta_el}")
    out = np.asarray(d, dtype=np.float64)
    if delta_el == 0:
        return out.copy()
    rng = _as_generator(rng)
    return out + rng.normal(0.0, delta_el, size=out.shape)
