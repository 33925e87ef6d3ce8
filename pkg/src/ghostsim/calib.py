"""Channel-efficiency estimation: covariance inversion and SNR-curve fitting."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import analytic
from .errors import ConvergenceError, ValidationError
from .simulator import FrameStack, SourceParams

CURVE_KINDS = ("snr_vs_eps", "snr_vs_tminus")
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class EtaEstimate:
    eta: float
    std_error: float
    n_pairs: int


def estimate_eta_covariance(probe: FrameStack, reference: FrameStack, region, M: float,
                            kind: str = "twin", min_pixels: int = 50) -> EtaEstimate:
    """Invert the twin-beam pair covariance over a unit-transmission region.

    Per correlated pair ``eta = Cov(n1, n2) / <n2> - <n2> / M``; the pairs
    are averaged and the standard error taken from their scatter.
    """
    if kind != "twin":
        raise ValidationError("covariance inversion needs twin-beam data; thermal "
                              "covariance carries no separable efficiency term")
    if probe.values.shape != reference.values.shape:
        raise ValidationError("probe and reference stacks differ in shape")
    if reference.H < 2:
        raise ValidationError("at least 2 frames are needed")
    region = np.asarray(region, dtype=bool)
    if region.shape != reference.shape:
        raise ValidationError("region does not match the grid")
    n = int(region.sum())
    if n < min_pixels:
        raise ValidationError(f"region has {n} pixels, need at least {min_pixels}")
    n1 = probe.values[:, region]
    n2 = reference.values[:, region]
    m2 = n2.mean(axis=0)
    cov = ((n1 - n1.mean(axis=0)) * (n2 - m2)).sum(axis=0) / (reference.H - 1)
    per_pair = cov / m2 - m2 / M
    return EtaEstimate(float(per_pair.mean()), float(per_pair.std(ddof=1) / math.sqrt(n)), n)


@dataclass(frozen=True)
class FitFixed:
    """Everything the SNR model needs apart from the efficiency."""

    n2: float
    M: float
    delta_el: float
    n_pixels: int
    H: float
    protocol: str
    kind: str = "twin"
    t_plus: float = 1.0
    t_minus: float = 0.0
    epsilon: Optional[float] = None

    def params(self, eta: float) -> SourceParams:
        return SourceParams(self.kind, self.n2, self.M, eta, self.delta_el)


@dataclass(frozen=True)
class FitResult:
    eta_hat: float
    std_error: float
    residual_sum: float
    abscissa: np.ndarray
    fitted: np.ndarray
    band_lower: np.ndarray
    band_upper: np.ndarray
    at_boundary: bool
    iterations: int
    band_method: str = "first-order propagation of std_error"


def model_curve(fixed: FitFixed, curve_kind: str, eta: float, abscissa) -> np.ndarray:
    params = fixed.params(eta)
    x = np.asarray(abscissa, dtype=float)
    if curve_kind == "snr_vs_eps":
        vals = [analytic.snr(params, e, fixed.n_pixels, fixed.H, fixed.protocol,
                             fixed.t_plus, fixed.t_minus) for e in x]
    elif curve_kind == "snr_vs_tminus":
        if fixed.epsilon is None:
            raise ValidationError("snr_vs_tminus needs a fixed epsilon")
        vals = [analytic.snr(params, fixed.epsilon, fixed.n_pixels, fixed.H, fixed.protocol,
                             fixed.t_plus, tm) for tm in x]
    else:
        raise ValidationError(f"unknown curve kind {curve_kind!r}; expected {CURVE_KINDS}")
    return np.array(vals)


def golden_section(f, a: float, b: float, tol: float = 1e-5, max_iter: int = 200):
    """Minimize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x), iterations)``."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol:
        if it >= max_iter:
            raise ConvergenceError(f"golden-section search did not converge in {max_iter} iterations")
        it += 1
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = c if fc <= fd else d
    return x, min(fc, fd), it


def fit_eta(points, curve_kind: str, fixed: FitFixed, eta_bounds=(1e-4, 1.0),
            tol: float = 1e-5, max_iter: int = 200) -> FitResult:
    """Weighted least-squares fit of the efficiency to measured SNR points.

    ``points`` holds ``(abscissa, snr, sigma_snr)`` triples.  The efficiency
    minimizing ``sum(((snr - model) / sigma)**2)`` is found by golden-section
    search; its standard error is ``sqrt(2 / chi2'')`` from the local
    curvature, and the band is the model curve shifted by the first-order
    propagation of that error.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValidationError("points must be (abscissa, snr, sigma) triples")
    if len(pts) < 3:
        raise ValidationError("at least 3 points are needed to fit with an error estimate")
    x, y, s = pts.T
    if np.any(~(s > 0)):
        raise ValidationError("sigma_snr must be > 0")
    lo, hi = eta_bounds

    def chi2(eta):
        r = (y - model_curve(fixed, curve_kind, eta, x)) / s
        return float(r @ r)

    eta_hat, resid, it = golden_section(chi2, lo, hi, tol, max_iter)
    at_boundary = eta_hat - lo < 2 * tol or hi - eta_hat < 2 * tol

    h = 1e-3 * max(eta_hat, 1e-2)
    if eta_hat + h > hi:
        e0 = hi - 2 * h
    elif eta_hat - h < lo:
        e0 = lo + h
    else:
        e0 = eta_hat
    curv = (chi2(e0 + h) - 2.0 * chi2(e0) + chi2(e0 - h)) / (h * h)
    std_error = math.sqrt(2.0 / curv) if curv > 0 else float("inf")

    fitted = model_curve(fixed, curve_kind, eta_hat, x)
    up = model_curve(fixed, curve_kind, min(e0 + h, hi), x)
    down = model_curve(fixed, curve_kind, max(e0 - h, lo), x)
    spread = np.abs(up - down) / (2 * h) * std_error
    return FitResult(eta_hat, std_error, resid, x, fitted, fitted - spread, fitted + spread,
                     bool(at_boundary), it)
