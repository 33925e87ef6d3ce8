"""Closed-form photon-count moments, ghost-image signal, noise and SNR.

Notation: ``n2`` mean detected photons per reference pixel per frame, ``M``
modes per pixel per frame, ``eta`` channel efficiency, ``delta_el`` read
noise rms, ``t`` cell transmission, ``t_bar``/``t2_bar`` scene means of
``t`` and ``t**2``, ``n_pixels`` the number of reconstructed cells and ``H``
the number of frames.

Per correlated pixel pair::

    <n2>        = n2                    <n1>        = n2 t
    Var n2      = n2 (1 + n2/M) + d^2   Var n1      = n2 t (1 + n2 t/M) + d^2
    Cov thermal = t n2^2/M              Cov twin    = t (n2^2/M + eta n2)

The general SNR of ``S_k`` for a two-level object is assembled from these
moments: contrast ``(t+ - t-) Cov/t`` over noise
``sqrt(2 Var(N1 - k N2) Var(n2) / H)``.  The noise of a single pixel's
estimate is the usual leading-order product of variances, an approximation
whose dropped terms are ``O(1/n_pixels)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError
from .simulator import SourceParams


@dataclass(frozen=True)
class AnalyticPrediction:
    quantity: str
    value: float
    regime: str
    inputs: dict


@dataclass(frozen=True)
class Moments:
    mean1: float
    mean2: float
    var1: float
    var2: float
    cov: float


def _excess(params: SourceParams, x: float) -> float:
    # x**2 / M evaluated as x * (x / M) to keep precision at very large M
    return x * (x / params.M)


def pair_covariance_per_t(params: SourceParams) -> float:
    """Covariance of a correlated pixel pair divided by the cell transmission."""
    c = _excess(params, params.n2)
    if params.kind == "twin":
        c += params.eta * params.n2
    return c


def moments(params: SourceParams, t: float) -> Moments:
    n2, d2 = params.n2, params.delta_el ** 2
    var2 = n2 + _excess(params, n2) + d2
    var1 = n2 * t + _excess(params, n2 * t) + d2
    return Moments(n2 * t, n2, var1, var2, t * pair_covariance_per_t(params))


def covariance_ratio(params: SourceParams) -> float:
    """Twin over thermal pair covariance, ``1 + eta M / n2``."""
    return 1.0 + params.eta * params.M / params.n2


def reference_variance(params: SourceParams) -> float:
    return params.n2 + _excess(params, params.n2) + params.delta_el ** 2


def signal_profile(params: SourceParams, t_bar: float, t: float, protocol: str = "gi",
                   k=None) -> float:
    """Expected reconstruction value at a cell of transmission ``t``."""
    k = protocol_k(params, t_bar, protocol, k)
    return t * pair_covariance_per_t(params) - k * reference_variance(params)


def protocol_k(params: SourceParams, t_bar: float, protocol: str, k=None) -> float:
    protocol = protocol.lower()
    if protocol == "gi":
        return 0.0
    if protocol == "dgi":
        return float(t_bar)
    if protocol == "odgi":
        return k_opt(params, t_bar).value
    if protocol == "sk":
        if k is None:
            raise ValidationError("protocol 'sk' requires k")
        return float(k)
    raise ValidationError(f"unknown protocol {protocol!r}")


@dataclass(frozen=True)
class BucketMoments:
    var1: float
    var2: float
    cov: float

    def var_k(self, k: float) -> float:
        return self.var1 + k * k * self.var2 - 2.0 * k * self.cov


def bucket_moments(params: SourceParams, t_bar: float, t2_bar: float, n_pixels: int) -> BucketMoments:
    """Variances and covariance of the probe and reference buckets."""
    n2, d2 = params.n2, params.delta_el ** 2
    var1 = n_pixels * (n2 * t_bar + _excess(params, n2) * t2_bar + d2)
    var2 = n_pixels * reference_variance(params)
    cov = n_pixels * t_bar * pair_covariance_per_t(params)
    return BucketMoments(var1, var2, cov)


def pixel_noise_variance(params: SourceParams, t_bar: float, t2_bar: float, n_pixels: int,
                         k: float = 0.0) -> float:
    """Leading-order variance of one pixel of ``S_k`` for a single frame."""
    return bucket_moments(params, t_bar, t2_bar, n_pixels).var_k(k) * reference_variance(params)


def _binary_means(epsilon, t_plus, t_minus):
    t_bar = (1 - epsilon) * t_plus + epsilon * t_minus
    t2_bar = (1 - epsilon) * t_plus ** 2 + epsilon * t_minus ** 2
    return t_bar, t2_bar


def snr(params: SourceParams, epsilon: float, n_pixels: int, H: float, protocol: str = "gi",
        t_plus: float = 1.0, t_minus: float = 0.0, k=None) -> float:
    """Expected SNR of a two-level object reconstruction.

    For ``t_plus=1, t_minus=0, delta_el=0`` and protocol ``gi`` this reduces
    exactly to ``sqrt(H / (2 n_pixels (1 - eps)))`` times ``n2/(n2+M)``
    (thermal) or ``(n2 + M eta)/(n2 + M)`` (twin).
    """
    if not (0 < epsilon < 1):
        raise ValidationError(f"epsilon={epsilon} leaves no contrast region")
    if not (0 <= t_minus <= t_plus <= 1):
        raise ValidationError("need 0 <= t_minus <= t_plus <= 1")
    t_bar, t2_bar = _binary_means(epsilon, t_plus, t_minus)
    k = protocol_k(params, t_bar, protocol, k)
    contrast = (t_plus - t_minus) * pair_covariance_per_t(params)
    noise = pixel_noise_variance(params, t_bar, t2_bar, n_pixels, k)
    return abs(contrast) * math.sqrt(H / (2.0 * noise))


def snr_gi_closed_form(params: SourceParams, epsilon: float, n_pixels: int, H: float) -> float:
    """GI SNR for ``t+ = 1``, ``t- = 0`` and no read noise."""
    base = math.sqrt(H / (2.0 * n_pixels * (1.0 - epsilon)))
    if params.kind == "twin":
        return base * (params.n2 + params.M * params.eta) / (params.n2 + params.M)
    return base * params.n2 / (params.n2 + params.M)


def snr_ratios(params: SourceParams, epsilon: float, regime: str = "general"):
    """``(SNR_dgi / SNR_gi, SNR_odgi / SNR_gi)`` for ``t+ = 1``, ``t- = 0``.

    ``regime="general"`` evaluates the full expressions (read noise
    included); ``"high_brightness"`` and ``"low_brightness"`` return the
    limiting closed forms, which ignore read noise.
    """
    if not (0 < epsilon < 1):
        raise ValidationError(f"epsilon={epsilon} leaves no contrast region")
    if regime == "general":
        gi = snr(params, epsilon, 1, 1.0, "gi")
        return snr(params, epsilon, 1, 1.0, "dgi") / gi, snr(params, epsilon, 1, 1.0, "odgi") / gi
    if regime == "high_brightness":
        r = 1.0 / math.sqrt(epsilon)
        return r, r
    if regime == "low_brightness":
        eta = params.eta
        dgi = 1.0 / math.sqrt(2.0 * (eta - 0.5) * (epsilon - 1.0) + 1.0)
        odgi = 1.0 / math.sqrt(eta * eta * (epsilon - 1.0) + 1.0)
        return dgi, odgi
    raise ValidationError(f"unknown regime {regime!r}")


def k_opt(params: SourceParams, t_bar: float) -> AnalyticPrediction:
    """SNR-optimal subtraction coefficient and the brightness regime it falls in.

    Equal to ``Cov(N1, N2) / Var(N2)``; for the twin beam
    ``n2 (n2 + M eta) t_bar / (n2^2 + M (n2 + d^2))``, for thermal light the
    same without the ``M eta`` term.
    """
    if not (0 <= t_bar <= 1):
        raise ValidationError(f"t_bar must lie in [0, 1], got {t_bar}")
    value = t_bar * pair_covariance_per_t(params) / reference_variance(params)
    return AnalyticPrediction("k_opt", value, params_regime(params),
                              {"params": params, "t_bar": t_bar})


def k_opt_limit(params: SourceParams, t_bar: float, regime: str) -> float:
    """Limiting forms of the optimal ``k`` (twin beam)."""
    if regime == "high_brightness":
        return float(t_bar)
    if regime == "low_brightness":
        n2 = params.n2
        if params.kind == "thermal":
            return 0.0
        return n2 / (n2 + params.delta_el ** 2) * params.eta * t_bar
    raise ValidationError(f"unknown regime {regime!r}")


def params_regime(params: SourceParams) -> str:
    """``high_brightness`` when ``n2/M >= 1e3``, ``low_brightness`` when ``n2/M <= 1e-3 eta``."""
    return params.regime


def nrf_prediction(params: SourceParams, t: float = 1.0) -> float:
    """Expected ``Var(n1 - n2) / <n1 + n2>`` of one correlated pixel pair.

    At ``t = 1`` this is ``1 - eta + d^2/n2`` for twin beams and
    ``1 + d^2/n2`` for split thermal light.
    """
    m = moments(params, t)
    return (m.var1 + m.var2 - 2.0 * m.cov) / (m.mean1 + m.mean2)
