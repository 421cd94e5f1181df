"""Bergman metric, Bergman distance, metric balls and weighted volumes.

The metric is g_{ij} = d/dz_i d/dconj(z_j) log K(z, z), with line element
ds^2 = g_{ij} dz_i conj(dz_j).  On the disk this gives
d(z, w) = sqrt(2) artanh |(z - w)/(1 - conj(w) z)|; on the ball the factor is
sqrt(d + 1); the polydisk uses the product metric, so its distance is the
Euclidean combination of the factor distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domains import (
    DomainSpec,
    WeightParams,
    _log_kernel_diag,
    as_points,
    check_beta,
    check_inside,
    inner,
    involution,
    sq_norm,
)
from .errors import UnsupportedDomain
from .sampling import (
    McConfig,
    UniformSampler,
    _disk_points,
    _ball_points,
    estimate,
    euclidean_ball_volume,
    stream_key,
)


@dataclass(frozen=True)
class MetricBall:
    """Closed Bergman-metric ball B(center, radius)."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", as_points(self.center))


class _WholeDomain:
    def __repr__(self):
        return "WHOLE_DOMAIN"


WHOLE_DOMAIN = _WholeDomain()


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    std_error: float
    samples: int
    seed: int = 0

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error,
                "samples": self.samples, "seed": self.seed}


def _metric_factor(spec: DomainSpec) -> float:
    """sqrt of the metric scale: sqrt(d+1) on the ball, sqrt(2) per disk factor."""
    return math.sqrt(spec.size + 1) if spec.kind == "ball" else math.sqrt(2.0)


def metric_tensor(spec: DomainSpec, z) -> np.ndarray:
    """Hermitian matrix g_{ij} = d_i dbar_j log K(z, z) at a single point."""
    spec.require_kernel()
    z = check_inside(spec, as_points(z, spec.dimension).reshape(spec.dimension))
    if spec.kind == "ball":
        d = spec.size
        t = 1.0 - float(sq_norm(z))
        return (d + 1) * (t * np.eye(d) + np.outer(np.conj(z), z)) / t ** 2
    return np.diag(2.0 / (1.0 - np.abs(z) ** 2) ** 2).astype(complex)


def _artanh_stable(x, t):
    """artanh(x) given x and t = 1 - x^2 computed independently."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    near = x >= 0.5
    out = np.empty_like(x)
    out[~near] = np.arctanh(x[~near])
    out[near] = np.log1p(x[near]) - 0.5 * np.log(t[near])
    return out


def _ball_pseudo(z, w):
    """Return (|phi_z(w)|, 1 - |phi_z(w)|^2) for the ball, computed stably."""
    zw = inner(w, z)
    den = np.abs(1.0 - zw) ** 2
    diff = sq_norm(z - w)
    d = z.shape[-1]
    lag = 0.0
    for i in range(d):
        for j in range(i + 1, d):
            lag = lag + np.abs(z[..., i] * w[..., j] - z[..., j] * w[..., i]) ** 2
    x2 = np.maximum(diff - lag, 0.0) / den
    t = (1.0 - sq_norm(z)) * (1.0 - sq_norm(w)) / den
    return np.sqrt(np.minimum(x2, 1.0)), t


def _disk_pseudo(z, w):
    x = np.abs(z - w) / np.abs(1.0 - np.conj(w) * z)
    t = (1.0 - np.abs(z) ** 2) * (1.0 - np.abs(w) ** 2) / np.abs(1.0 - np.conj(w) * z) ** 2
    return np.minimum(x, 1.0), t


def _distance(spec, z, w):
    if spec.kind == "ball":
        x, t = _ball_pseudo(z, w)
        return math.sqrt(spec.size + 1) * _artanh_stable(x, t)
    x, t = _disk_pseudo(z, w)
    per = math.sqrt(2.0) * _artanh_stable(x, t)
    return np.sqrt(np.sum(per ** 2, axis=-1))


def bergman_distance(spec: DomainSpec, z, w) -> np.ndarray:
    """Bergman distance, vectorized over leading axes."""
    spec.require_kernel()
    z = check_inside(spec, z)
    w = check_inside(spec, w)
    z, w = np.broadcast_arrays(z, w)
    out = _distance(spec, z, w)
    return float(out) if np.ndim(out) == 0 else out


def in_metric_ball(spec: DomainSpec, ball: MetricBall, w) -> np.ndarray:
    check_inside(spec, ball.center, "ball center")
    res = np.asarray(bergman_distance(spec, ball.center, w)) <= ball.radius
    return bool(res) if res.ndim == 0 else res


def pseudo_radius(spec: DomainSpec, r: float) -> float:
    """Euclidean radius (per factor on the polydisk) of B(0, r)'s bounding set."""
    return math.tanh(r / _metric_factor(spec))


class MetricBallSampler:
    """Points of B(center, r) obtained by transporting B(0, r) with the involution.

    B(0, r) is the Euclidean ball of radius tanh(r / sqrt(d+1)) on the ball; on
    the polydisk it sits inside the product of disks of radius tanh(r / sqrt 2)
    and is cut out by rejection.  The returned weights include the Jacobian
    of the transport, so integrals are with respect to Lebesgue measure on
    B(center, r).
    """

    def __init__(self, spec: DomainSpec, center, r: float):
        spec.require_kernel()
        self.spec = spec
        self.center = check_inside(spec, center).reshape(spec.dimension)
        self.r = float(r)
        self.rho = pseudo_radius(spec, r)
        if spec.kind == "ball":
            self.box = euclidean_ball_volume(spec.size, self.rho)
        else:
            self.box = (math.pi * self.rho ** 2) ** spec.size

    def __call__(self, rng, n):
        spec = self.spec
        if spec.kind == "ball":
            u = _ball_points(rng, n, spec.size, self.rho)
            accept = np.ones(n, dtype=bool)
        else:
            u = _disk_points(rng, (n, spec.size), self.rho)
            per = 2.0 * np.arctanh(np.abs(u)) ** 2
            accept = np.sum(per, axis=-1) <= self.r ** 2
        w, det = involution(spec, self.center, u)
        return w, np.where(accept, self.box * np.abs(det) ** 2, 0.0)


def _beta_of(wp) -> float:
    return float(wp.beta) if isinstance(wp, WeightParams) else float(wp)


def weight_density(spec: DomainSpec, beta: float):
    """Integrand w -> K(w, w)^-beta of dV_beta against Lebesgue measure."""
    if beta == 0:
        return lambda w: np.ones(w.shape[0])
    return lambda w: np.exp(-beta * _log_kernel_diag(spec, w))


def vol_beta(spec: DomainSpec, wp, region=WHOLE_DOMAIN, mc: McConfig = McConfig()) -> VolumeEstimate:
    """Monte Carlo Vol_beta(E) for E a MetricBall or the whole domain."""
    spec.require_kernel()
    beta = _beta_of(wp)
    check_beta(spec, beta)
    if region is WHOLE_DOMAIN:
        sampler = UniformSampler(spec)
        key = stream_key("vol_beta", str(spec), beta)
    elif isinstance(region, MetricBall):
        sampler = MetricBallSampler(spec, region.center, region.radius)
        key = stream_key("vol_beta", str(spec), beta, region.center, region.radius)
    else:
        raise UnsupportedDomain(f"unsupported region {region!r}")
    est = estimate(weight_density(spec, beta), sampler, mc, key)
    return VolumeEstimate(float(est.value), est.std_error, est.samples, mc.seed)


def volume_kernel_product(spec: DomainSpec, beta: float, a, r: float, mc: McConfig) -> float:
    """Vol_beta(B(a, r)) * K(a, a)^(1+beta); bounded above and below uniformly in a."""
    a = check_inside(spec, a)
    v = vol_beta(spec, beta, MetricBall(a, r), mc)
    return v.value * math.exp((1.0 + beta) * float(_log_kernel_diag(spec, a)))


def mean_value_ratio(spec: DomainSpec, beta: float, f, z, r: float, p: float, mc: McConfig) -> float:
    """|f(z)|^p divided by the V_beta-average of |f|^p over B(z, r).

    Both integrals share one sample stream so the ratio is consistent.
    """
    z = check_inside(spec, z).reshape(spec.dimension)
    dens = weight_density(spec, beta)

    def integrand(w):
        base = dens(w)
        return np.stack([np.abs(f(w)) ** p * base, base], axis=1)

    key = stream_key("mean_value", str(spec), beta, z, r, p)
    num, vol = estimate(integrand, MetricBallSampler(spec, z, r), mc, key)
    avg = num.value / vol.value
    val = float(np.abs(f(z[None, :]))[0] ** p)
    return val / avg if avg > 0 else math.inf
