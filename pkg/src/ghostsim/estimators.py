"""Ghost-image reconstruction and figures of merit from frame stacks.

All reconstructions are sample covariances (divisor ``H - 1``) between a
bucket-like series ``N_k = N1 - k N2`` and every reference pixel, where
``N1``/``N2`` are the per-frame sums of the probe/reference stacks over the
reconstructed region (the pixel itself included).

    protocol   k
    --------   --------------------------------------------
    gi         0
    dgi        mean(N1) / mean(N2)
    sk         caller supplied
    odgi       Cov(N1, N2) / Var(N2)  (or the analytic optimum)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import analytic
from .errors import ValidationError
from .simulator import FrameStack, SourceParams

PROTOCOLS = ("gi", "dgi", "sk", "odgi")


@dataclass(frozen=True)
class Reconstruction:
    S: np.ndarray
    protocol: str
    k_used: float
    H_used: int
    tile_k: Optional[np.ndarray] = field(default=None, compare=False)

    @property
    def height(self) -> int:
        return self.S.shape[0]

    @property
    def width(self) -> int:
        return self.S.shape[1]


@dataclass(frozen=True)
class SnrReport:
    snr: float
    mean_plus: float
    mean_minus: float
    var_plus: float
    var_minus: float
    n_plus: int
    n_minus: int
    degenerate: bool = False


@dataclass(frozen=True)
class NrfReport:
    nrf: float
    std_error: float

    @property
    def nonclassical(self) -> bool:
        return self.nrf + 3 * self.std_error < 1


def _check_mask(mask, shape, name="roi"):
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != tuple(shape):
        raise ValidationError(f"{name} shape {mask.shape} does not match grid {tuple(shape)}")
    if not mask.any():
        raise ValidationError(f"{name} is empty")
    return mask


def bucket_series(stack: FrameStack, roi=None) -> np.ndarray:
    """Per-frame sum of the stack over ``roi`` (whole grid when omitted)."""
    if roi is None:
        return stack.values.sum(axis=(1, 2))
    roi = _check_mask(roi, stack.shape)
    return stack.values[:, roi].sum(axis=1)


def _check_pair(probe: FrameStack, reference: FrameStack):
    if probe.values.shape != reference.values.shape:
        raise ValidationError(
            f"probe {probe.values.shape} and reference {reference.values.shape} stacks differ")
    if reference.H < 2:
        raise ValidationError("at least 2 frames are needed to estimate a covariance")


def empirical_k_from_buckets(N1: np.ndarray, N2: np.ndarray) -> float:
    """Sample ``Cov(N1, N2) / Var(N2)``."""
    if len(N2) < 2:
        raise ValidationError("at least 2 frames are needed")
    d2 = N2 - N2.mean()
    var2 = d2 @ d2
    if var2 <= 0:
        raise ValidationError("reference bucket has zero variance; k is undefined")
    return float(((N1 - N1.mean()) @ d2) / var2)


def empirical_k(probe: FrameStack, reference: FrameStack) -> float:
    _check_pair(probe, reference)
    return empirical_k_from_buckets(bucket_series(probe), bucket_series(reference))


def analytic_k(params: SourceParams, t_bar: float) -> float:
    """SNR-optimal ``k`` from calibrated source parameters."""
    return analytic.k_opt(params, t_bar).value


def choose_k(protocol, N1, N2, k=None, k_source="empirical", params=None, t_bar=None):
    protocol = protocol.lower()
    if protocol == "gi":
        return 0.0
    if protocol == "dgi":
        return float(N1.mean() / N2.mean())
    if protocol == "sk":
        if k is None:
            raise ValidationError("protocol 'sk' requires k")
        return float(k)
    if protocol == "odgi":
        if k_source == "empirical":
            return empirical_k_from_buckets(N1, N2)
        if k_source == "analytic":
            if params is None:
                raise ValidationError("analytic k requires source parameters")
            if t_bar is None:
                # shot noise can push the measured ratio just past 1
                t_bar = min(max(float(N1.mean() / N2.mean()), 0.0), 1.0)
            return analytic_k(params, t_bar)
        raise ValidationError(f"unknown k source {k_source!r}")
    raise ValidationError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")


def correlate(Nk: np.ndarray, reference: FrameStack) -> np.ndarray:
    """Sample covariance of a bucket series with every reference pixel."""
    H = reference.H
    if H < 2:
        raise ValidationError("at least 2 frames are needed to estimate a covariance")
    if Nk.shape != (H,):
        raise ValidationError("bucket series length does not match the frame count")
    n2 = reference.values.reshape(H, -1)
    dN = Nk - Nk.mean()
    # sum_h dN_h (n2_h - mean n2) == sum_h dN_h n2_h since sum dN = 0
    S = (dN @ n2) / (H - 1)
    return S.reshape(reference.shape)


def reconstruct_from_buckets(N1: np.ndarray, reference: FrameStack, protocol: str, k=None,
                             k_source="empirical", params=None, t_bar=None) -> Reconstruction:
    """Reconstruct from a probe bucket series and the reference stack."""
    N1 = np.asarray(N1, dtype=np.float64)
    if reference.H < 2:
        raise ValidationError("at least 2 frames are needed to estimate a covariance")
    N2 = bucket_series(reference)
    k_used = choose_k(protocol, N1, N2, k, k_source, params, t_bar)
    S = correlate(N1 - k_used * N2 if k_used != 0 else N1, reference)
    return Reconstruction(S, protocol.lower(), k_used, reference.H)


def reconstruct(probe: FrameStack, reference: FrameStack, protocol: str, k=None,
                k_source="empirical", params=None, t_bar=None) -> Reconstruction:
    """Ghost image ``S(x) = Cov(N1 - k N2, n2(x))`` for one protocol.

    ``k`` is only read for protocol ``sk``.  For ``odgi`` the coefficient is
    the empirical optimum unless ``k_source="analytic"``, which evaluates the
    closed form from ``params`` and ``t_bar`` (``t_bar`` defaults to the
    measured ``mean(N1) / mean(N2)``, clipped to ``[0, 1]``).
    """
    _check_pair(probe, reference)
    return reconstruct_from_buckets(bucket_series(probe), reference, protocol, k,
                                    k_source, params, t_bar)


def tile_bounds(n: int, parts: int):
    """Split ``range(n)`` into ``parts`` slices; the remainder joins the last."""
    base = n // parts
    bounds = [slice(i * base, (i + 1) * base) for i in range(parts - 1)]
    bounds.append(slice((parts - 1) * base, n))
    return bounds


def tile_labels(height: int, width: int, rows: int, cols: int) -> np.ndarray:
    """Integer region map numbering tiles row-major."""
    labels = np.empty((height, width), dtype=int)
    for i, rs in enumerate(tile_bounds(height, rows)):
        for j, cs in enumerate(tile_bounds(width, cols)):
            labels[rs, cs] = i * cols + j
    return labels


def tiled_reconstruct(probe: FrameStack, reference: FrameStack, protocol: str, tiles=(3, 3),
                      k=None, k_source="empirical", params=None) -> Reconstruction:
    """Reconstruct each tile independently with its own buckets, then stitch."""
    _check_pair(probe, reference)
    rows, cols = tiles
    height, width = reference.shape
    if rows < 1 or cols < 1 or height // rows < 2 or width // cols < 2:
        raise ValidationError(f"tiling {rows}x{cols} of a {height}x{width} grid gives tiles under 2x2")
    N1 = np.stack([bucket_series(probe.crop(rs, cs)) for rs in tile_bounds(height, rows)
                   for cs in tile_bounds(width, cols)], axis=1)
    return tiled_reconstruct_from_buckets(N1, reference, protocol, (rows, cols), k, k_source, params)


def tiled_reconstruct_from_buckets(N1_tiles: np.ndarray, reference: FrameStack, protocol: str,
                                   tiles=(3, 3), k=None, k_source="empirical",
                                   params=None) -> Reconstruction:
    """Tiled reconstruction from per-tile probe buckets of shape ``(H, rows*cols)``.

    Tile ``i`` (row-major) uses column ``i`` of ``N1_tiles``.
    """
    rows, cols = tiles
    height, width = reference.shape
    if rows < 1 or cols < 1 or height // rows < 2 or width // cols < 2:
        raise ValidationError(f"tiling {rows}x{cols} of a {height}x{width} grid gives tiles under 2x2")
    if N1_tiles.shape != (reference.H, rows * cols):
        raise ValidationError("per-tile bucket array has the wrong shape")
    S = np.empty((height, width))
    tile_k = np.empty((rows, cols))
    for i, rs in enumerate(tile_bounds(height, rows)):
        for j, cs in enumerate(tile_bounds(width, cols)):
            rec = reconstruct_from_buckets(N1_tiles[:, i * cols + j], reference.crop(rs, cs),
                                           protocol, k, k_source, params)
            S[rs, cs] = rec.S
            tile_k[i, j] = rec.k_used
    k_used = float(tile_k[0, 0]) if rows * cols == 1 else float("nan")
    return Reconstruction(S, protocol.lower(), k_used, reference.H, tile_k)


def measure_snr(recon, mask_plus, mask_minus) -> SnrReport:
    """Contrast-to-noise of a reconstruction between two regions.

    ``snr = |mean+ - mean-| / sqrt(var+ + var-)`` with spatial sample
    variances (divisor ``n - 1``).  A zero pooled variance is reported with
    ``degenerate=True`` and an infinite (or zero, if there is no contrast)
    ``snr``.
    """
    S = recon.S if isinstance(recon, Reconstruction) else np.asarray(recon, dtype=float)
    mp = _check_mask(mask_plus, S.shape, "mask_plus")
    mm = _check_mask(mask_minus, S.shape, "mask_minus")
    if np.any(mp & mm):
        raise ValidationError("masks overlap")
    if mp.sum() < 2 or mm.sum() < 2:
        raise ValidationError("each mask needs at least 2 pixels")
    sp, sm = S[mp], S[mm]
    mean_p, mean_m = float(sp.mean()), float(sm.mean())
    var_p, var_m = float(sp.var(ddof=1)), float(sm.var(ddof=1))
    pooled = var_p + var_m
    diff = abs(mean_p - mean_m)
    if pooled == 0:
        snr = float("inf") if diff > 0 else 0.0
        return SnrReport(snr, mean_p, mean_m, var_p, var_m, int(mp.sum()), int(mm.sum()), True)
    return SnrReport(diff / np.sqrt(pooled), mean_p, mean_m, var_p, var_m,
                     int(mp.sum()), int(mm.sum()))


def measure_nrf(probe: FrameStack, reference: FrameStack, region=None) -> NrfReport:
    """Noise reduction factor ``Var(n1 - n2) / mean(n1 + n2)`` over correlated pairs.

    Evaluated per pixel pair inside ``region`` (a unit-transmission area) and
    averaged; the standard error comes from the pair-to-pair scatter.
    """
    _check_pair(probe, reference)
    if region is None:
        region = np.ones(reference.shape, dtype=bool)
    region = _check_mask(region, reference.shape, "region")
    n1 = probe.values[:, region]
    n2 = reference.values[:, region]
    per_pair = (n1 - n2).var(axis=0, ddof=1) / (n1 + n2).mean(axis=0)
    n = per_pair.size
    err = float(per_pair.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    return NrfReport(float(per_pair.mean()), err)
