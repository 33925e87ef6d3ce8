"""Repeated simulate -> reconstruct -> SNR pipelines over parameter grids."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import analytic
from .errors import ValidationError
from .estimators import measure_snr, reconstruct_from_buckets
from .io import ResultRow
from .scene import TransmissionMap, make_binary_scene, scene_stats
from .simulator import SourceParams, default_workers, simulate_buckets

VARIABLES = ("epsilon", "tminus", "eta")


def derive_seed(master: int, *indices: int) -> int:
    """64-bit seed derived from a master seed and grid/replicate indices."""
    words = np.random.SeedSequence([int(master), *map(int, indices)]).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def measure_protocols(params: SourceParams, scene: TransmissionMap, H: int, seed: int,
                      protocols=("gi", "dgi", "odgi"), k_source="empirical", workers=1):
    """One simulated acquisition reconstructed with each protocol.

    Returns ``{protocol: (SnrReport, Reconstruction)}``.
    """
    mask_plus, mask_minus = scene.level_masks()
    buckets, ref = simulate_buckets(params, scene, H, seed, workers=workers)
    t_bar = scene_stats(scene).t_bar
    out = {}
    for p in protocols:
        rec = reconstruct_from_buckets(buckets[:, 0], ref, p, k_source=k_source,
                                       params=params, t_bar=t_bar)
        out[p] = (measure_snr(rec, mask_plus, mask_minus), rec)
    return out


@dataclass(frozen=True)
class PointSummary:
    protocol: str
    snr_mean: float
    snr_sd: float
    snr_err: float
    snr_values: np.ndarray
    snr_pred: float


def repeat_point(params: SourceParams, scene: TransmissionMap, H: int, seeds,
                 protocols=("gi", "dgi", "odgi"), k_source="empirical", workers=1):
    """Seed-resampled SNR statistics for one scene; returns ``{protocol: PointSummary}``."""
    seeds = list(seeds)
    values = {p: [] for p in protocols}
    for s in seeds:
        res = measure_protocols(params, scene, H, s, protocols, k_source, workers)
        for p in protocols:
            values[p].append(res[p][0].snr)
    st = scene_stats(scene)
    out = {}
    for p in protocols:
        v = np.array(values[p])
        sd = float(v.std(ddof=1)) if v.size > 1 else float("nan")
        try:
            pred = analytic.snr(params, st.epsilon, scene.n_cells, H, p, st.t_plus, st.t_minus)
        except ValidationError:
            pred = float("nan")
        out[p] = PointSummary(p, float(v.mean()), sd, sd / np.sqrt(v.size), v, pred)
    return out


def sweep(params: SourceParams, vary: str, values, *, width: int, height: int, H: int,
          epsilon: float = 0.5, t_plus: float = 1.0, t_minus: float = 0.0, layout: str = "left",
          protocols=("gi", "dgi", "odgi"), n_seeds: int = 10, master_seed: int = 0,
          k_source="empirical", workers=None):
    """SNR of each protocol over a one-dimensional parameter grid.

    Every grid point is an independent set of ``n_seeds`` acquisitions whose
    seeds derive from ``master_seed`` and the grid index, so results do not
    depend on how points are scheduled.  Returns :class:`ResultRow` objects
    with extra fields ``x`` (the realized abscissa), ``snr_sd``, ``snr_pred``
    and ``n_seeds``.
    """
    if vary not in VARIABLES:
        raise ValidationError(f"vary must be one of {VARIABLES}")
    if n_seeds < 1:
        raise ValidationError("n_seeds must be >= 1")
    values = list(values)
    workers = default_workers() if workers is None else max(1, int(workers))

    def point(i):
        p, eps, tm = params, epsilon, t_minus
        if vary == "epsilon":
            eps = values[i]
        elif vary == "tminus":
            tm = values[i]
        else:
            p = replace(params, eta=values[i])
        scene = make_binary_scene(width, height, eps, t_plus, tm, layout)
        st = scene_stats(scene)
        seeds = [derive_seed(master_seed, i, j) for j in range(n_seeds)]
        summary = repeat_point(p, scene, H, seeds, protocols, k_source)
        x = {"epsilon": st.epsilon, "tminus": tm, "eta": p.eta}[vary]
        rows = []
        for proto in protocols:
            s = summary[proto]
            rows.append(ResultRow(proto, p.eta, p.n2, p.M, p.delta_el, scene.n_cells, H,
                                  st.epsilon, t_plus, tm, s.snr_mean, s.snr_err,
                                  {"x": x, "snr_sd": s.snr_sd, "snr_pred": s.snr_pred,
                                   "n_seeds": n_seeds}))
        return rows

    if workers == 1:
        nested = [point(i) for i in range(len(values))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            nested = list(pool.map(point, range(len(values))))
    return [r for rows in nested for r in rows]


SWEEP_EXTRA_COLUMNS = ("x", "snr_sd", "snr_pred", "n_seeds")


def frames_to_reach(snr_by_frames: dict, target: float) -> float:
    """Frames needed to reach ``target`` assuming ``SNR = a sqrt(H)``.

    ``a`` is the least-squares slope of the measured SNRs against
    ``sqrt(H)`` over the supplied frame counts.
    """
    h = np.array(sorted(snr_by_frames), dtype=float)
    y = np.array([snr_by_frames[k] for k in sorted(snr_by_frames)], dtype=float)
    x = np.sqrt(h)
    a = float(x @ y / (x @ x))
    return (target / a) ** 2
