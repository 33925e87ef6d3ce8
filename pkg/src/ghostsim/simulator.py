"""Paired probe/reference frame generation for twin-beam and split-thermal light.

Per pixel and frame the twin source draws a pair count ``G`` with mean
``n2 / eta`` over ``M`` modes and detects it independently in both arms
(probe with probability ``eta * t``, reference with ``eta``).  The thermal
source draws ``G`` with mean ``n2 / q`` (``q = eta / 2``, a balanced
splitter) and routes each photon to one arm or to loss.  Read noise is added
to both channels afterwards.

Frames are produced in fixed blocks of ``BLOCK_FRAMES``; each block draws from
its own keyed random streams, so the output does not depend on the number of
workers.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import statcore
from .errors import ValidationError
from .scene import TransmissionMap

BLOCK_FRAMES = 512
KINDS = ("twin", "thermal")


def default_workers() -> int:
    env = os.environ.get("GHOSTSIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"GHOSTSIM_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SourceParams:
    kind: str
    n2: float
    M: float
    eta: float
    delta_el: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not (np.isfinite(self.n2) and self.n2 > 0):
            raise ValidationError(f"n2 must be > 0, got {self.n2}")
        if not (np.isfinite(self.M) and self.M >= 1):
            raise ValidationError(f"M must be >= 1, got {self.M}")
        if not (0 < self.eta <= 1):
            raise ValidationError(f"eta must lie in (0, 1], got {self.eta}")
        if not (np.isfinite(self.delta_el) and self.delta_el >= 0):
            raise ValidationError(f"delta_el must be >= 0, got {self.delta_el}")

    @property
    def brightness(self) -> float:
        """Detected photons per mode, ``n2 / M``."""
        return self.n2 / self.M

    @property
    def regime(self) -> str:
        b = self.brightness
        if b >= 1e3:
            return "high_brightness"
        if b <= 1e-3 * self.eta:
            return "low_brightness"
        return "general"


@dataclass(frozen=True)
class FrameStack:
    """``H`` frames of real-valued detected signal, shape ``(H, height, width)``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[0] < 1:
            raise ValidationError("frame stack must have shape (H, height, width) with H >= 1")
        object.__setattr__(self, "values", v)

    @property
    def H(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self):
        return self.values.shape[1:]

    def frames(self, start: int = 0, stop=None) -> "FrameStack":
        return FrameStack(self.values[start:stop])

    def crop(self, rows: slice, cols: slice) -> "FrameStack":
        return FrameStack(self.values[:, rows, cols])


def apply_extra_loss(params: SourceParams, loss_factor: float) -> SourceParams:
    """Neutral filter in front of both arms: scales ``eta`` and ``n2`` together."""
    if not (0 < loss_factor <= 1):
        raise ValidationError(f"loss_factor must lie in (0, 1], got {loss_factor}")
    return replace(params, eta=params.eta * loss_factor, n2=params.n2 * loss_factor)


def _simulate_block(params, t_flat, seed, block, n_frames):
    size = (n_frames, t_flat.size)
    src = statcore.block_stream(seed, block, "source").generator()
    thin = statcore.block_stream(seed, block, "thinning").generator()
    if params.kind == "twin":
        stats = statcore.ModeStatistics(params.n2 / (params.eta * params.M), params.M)
        G = statcore.sample_generated_count(stats, src, size=size)
        d1, d2 = statcore.thin_independent(G, params.eta * t_flat, params.eta, thin)
    else:
        q = params.eta / 2.0
        stats = statcore.ModeStatistics(params.n2 / (q * params.M), params.M)
        G = statcore.sample_generated_count(stats, src, size=size)
        d1, d2 = statcore.thin_partition(G, q * t_flat, q, thin)
    probe = statcore.add_electronic_noise(
        d1, params.delta_el, statcore.block_stream(seed, block, "noise-probe"))
    ref = statcore.add_electronic_noise(
        d2, params.delta_el, statcore.block_stream(seed, block, "noise-reference"))
    return probe, ref


def simulate_pair(params: SourceParams, scene: TransmissionMap, H: int, seed: int,
                  workers=None):
    """Simulate ``H`` frames of the probe and reference channels.

    Returns ``(probe, reference)`` as :class:`FrameStack` objects on the
    scene's grid.  Identical ``seed`` gives bit-identical stacks for any
    ``workers``.
    """
    H = int(H)
    if H < 1:
        raise ValidationError(f"H must be >= 1, got {H}")
    if params.kind == "thermal" and (params.eta / 2.0) * (1.0 + scene.t.max()) > 1 + 1e-12:
        raise ValidationError("thermal routing probabilities exceed 1")
    workers = default_workers() if workers is None else max(1, int(workers))
    t_flat = scene.t.ravel()
    probe = np.empty((H, t_flat.size))
    ref = np.empty((H, t_flat.size))
    starts = range(0, H, BLOCK_FRAMES)

    def run(start):
        stop = min(start + BLOCK_FRAMES, H)
        p, r = _simulate_block(params, t_flat, seed, start // BLOCK_FRAMES, stop - start)
        probe[start:stop] = p
        ref[start:stop] = r

    if workers == 1:
        for s in starts:
            run(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    shape = (H, scene.height, scene.width)
    return FrameStack(probe.reshape(shape)), FrameStack(ref.reshape(shape))


def _region_groups(scene: TransmissionMap, regions: np.ndarray):
    """Flat pixel indices grouped by (region, transmission level)."""
    t_flat = scene.t.ravel()
    lab = regions.ravel()
    groups = []
    for r in range(int(lab.max()) + 1):
        in_r = np.flatnonzero(lab == r)
        for level in np.unique(t_flat[in_r]):
            groups.append((r, float(level), in_r[t_flat[in_r] == level]))
    return groups


def _buckets_block_fast(params, groups, n_regions, region_sizes, n_pix, seed, block, n_frames):
    src = statcore.block_stream(seed, block, "source").generator()
    thin = statcore.block_stream(seed, block, "thinning").generator()
    nprobe = statcore.block_stream(seed, block, "noise-probe").generator()
    d2 = src.poisson(params.n2, size=(n_frames, n_pix))
    buckets = np.zeros((n_frames, n_regions))
    for r, level, idx in groups:
        if params.kind == "twin":
            # both-arm photons: binomial share of the reference counts;
            # probe-only photons: independent Poisson
            shared = thin.binomial(d2[:, idx].sum(axis=1), params.eta * level)
            alone = thin.poisson(idx.size * params.n2 * level * (1.0 - params.eta), size=n_frames)
            buckets[:, r] += shared + alone
        else:
            buckets[:, r] += thin.poisson(idx.size * params.n2 * level, size=n_frames)
    if params.delta_el > 0:
        buckets += nprobe.normal(0.0, 1.0, size=(n_frames, n_regions)) * (
            params.delta_el * np.sqrt(region_sizes))
    ref = statcore.add_electronic_noise(
        d2, params.delta_el, statcore.block_stream(seed, block, "noise-reference"))
    return buckets, ref


def poisson_regime(params: SourceParams) -> bool:
    """True when the generated count is drawn as Poisson by the sampler."""
    q = params.eta if params.kind == "twin" else params.eta / 2.0
    return params.n2 / (q * params.M) <= statcore.POISSON_OCCUPATION_THRESHOLD


def simulate_buckets(params: SourceParams, scene: TransmissionMap, H: int, seed: int,
                     regions=None, workers=None):
    """Simulate per-region probe bucket totals and the full reference stack.

    ``regions`` is an integer label map (default: one region covering the
    grid); the result is ``(buckets, reference)`` with ``buckets`` of shape
    ``(H, n_regions)``.  The joint law of buckets and reference pixels equals
    that of summing :func:`simulate_pair` probe pixels over each region.  In
    the Poissonian regime the probe is never resolved per pixel: given the
    reference counts, the photons shared with the probe are a binomial draw of
    their sum and the probe-only photons an independent Poisson draw, one per
    (region, transmission level) group.  Outside that regime the full pair is
    simulated block by block and summed.
    """
    H = int(H)
    if H < 1:
        raise ValidationError(f"H must be >= 1, got {H}")
    if regions is None:
        regions = np.zeros(scene.t.shape, dtype=int)
    regions = np.asarray(regions)
    if regions.shape != scene.t.shape or regions.min() < 0:
        raise ValidationError("regions must be a non-negative label map on the scene grid")
    n_regions = int(regions.max()) + 1
    region_sizes = np.bincount(regions.ravel(), minlength=n_regions).astype(float)
    if np.any(region_sizes == 0):
        raise ValidationError("region labels must be contiguous from 0")
    if params.kind == "thermal" and (params.eta / 2.0) * (1.0 + scene.t.max()) > 1 + 1e-12:
        raise ValidationError("thermal routing probabilities exceed 1")
    workers = default_workers() if workers is None else max(1, int(workers))
    n_pix = scene.t.size
    buckets = np.empty((H, n_regions))
    ref = np.empty((H, n_pix))
    fast = poisson_regime(params)
    groups = _region_groups(scene, regions) if fast else None
    lab = regions.ravel()
    t_flat = scene.t.ravel()

    def run(start):
        stop = min(start + BLOCK_FRAMES, H)
        block = start // BLOCK_FRAMES
        if fast:
            b, r = _buckets_block_fast(params, groups, n_regions, region_sizes, n_pix,
                                       seed, block, stop - start)
        else:
            p, r = _simulate_block(params, t_flat, seed, block, stop - start)
            b = np.stack([p[:, lab == i].sum(axis=1) for i in range(n_regions)], axis=1)
        buckets[start:stop] = b
        ref[start:stop] = r

    starts = range(0, H, BLOCK_FRAMES)
    if workers == 1:
        for s in starts:
            run(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    return buckets, FrameStack(ref.reshape(H, scene.height, scene.width))
