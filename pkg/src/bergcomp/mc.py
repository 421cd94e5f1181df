"""Weighted integration and Monte Carlo checks of the kernel integral identities.

The transported integral identity says that, for beta > beta_min and
alpha > beta + beta_int,

    I(z) = int |K(z, w)|^(1+alpha) |det J(Phi, w)|^(1+2beta-alpha) dV_beta(w)

equals a z-independent constant times K(z, z)^(alpha-beta) |det J(Phi, z)|^(1+2beta-alpha),
where Phi is the Cayley map onto the Siegel domain.  ``verify_identity``
estimates the normalized ratio at several probe points and checks that the
ratios agree.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .domains import (
    DomainSpec,
    WeightParams,
    _log_abs_cayley_det,
    _log_cayley_det,
    _log_kernel,
    _log_kernel_diag,
    _weighted_kernel,
    as_points,
    check_beta,
    check_inside,
    domain_beta_int,
    domain_beta_min,
    format_number,
    format_point,
)
from .errors import ParameterOutOfRange, UnsupportedDomain
from .geometry import weight_density
from .sampling import (
    AnchoredSampler,
    McConfig,
    McEstimate,
    ShellSampler,
    UniformSampler,
    estimate,
    stream_key,
)

log = logging.getLogger(__name__)

CONSTANT_CONSISTENT = "constant-consistent"
INCONSISTENT = "inconsistent"
DIVERGENCE_SUSPECTED = "divergence-suspected"

DEFAULT_PROBES = (0.0, 0.3, 0.6j, 0.9, 0.99)
# per-shell sums decaying slower than 2^(-0.1 k) are flagged as divergent
DIVERGENCE_SLOPE = -0.1


def integrate_weighted(spec: DomainSpec, wp, f: Callable, mc: McConfig, *,
                       anchor=None, key: tuple | None = None, mix: float = 0.5) -> McEstimate:
    """Estimate the integral of ``f`` against dV_beta.

    Uniform samples carry the weight K(w, w)^-beta.  Passing ``anchor``
    switches to the mixture sampler concentrated around that point, which
    helps when ``f`` peaks there.
    """
    spec.require_kernel()
    beta = wp.beta if isinstance(wp, WeightParams) else float(wp)
    check_beta(spec, beta)
    dens = weight_density(spec, beta)
    if anchor is None:
        sampler = UniformSampler(spec)
    else:
        sampler = AnchoredSampler(spec, check_inside(spec, anchor), mix)
    if key is None:
        key = stream_key("integrate", str(spec), beta, anchor if anchor is not None else 0.0)
    return estimate(lambda w: f(w) * dens(w), sampler, mc, key)


def default_probes(spec: DomainSpec) -> list:
    d = spec.dimension
    scale = 1.0 / math.sqrt(d) if spec.kind == "ball" else 1.0
    return [np.full(d, c * scale, dtype=complex) for c in DEFAULT_PROBES]


def _check_identity_params(spec, alpha, beta, divergence_probe):
    if spec.kind not in ("ball", "polydisk"):
        raise UnsupportedDomain(f"no Cayley map available for {spec}")
    bmin = domain_beta_min(spec)
    bint = domain_beta_int(spec)
    if not beta > bmin:
        raise ParameterOutOfRange(
            f"beta = {beta} must exceed beta_min = {format_number(bmin)} for {spec}")
    if not alpha > beta + bint:
        msg = (f"alpha = {alpha} must exceed beta + beta_int = {beta} + {format_number(bint)}; "
               "the integral diverges otherwise")
        if not divergence_probe:
            raise ParameterOutOfRange(msg)
        log.warning("%s (running in divergence-probe mode)", msg)


def _log_normalizer(spec, alpha, beta, z):
    e = 1.0 + 2.0 * beta - alpha
    return (alpha - beta) * _log_kernel_diag(spec, z) + e * _log_abs_cayley_det(spec, z)


def _scaled_integrand(spec, alpha, beta, z):
    """Integrand of I(z) against Lebesgue measure, divided by the normalizer."""
    e = 1.0 + 2.0 * beta - alpha
    lnorm = float(_log_normalizer(spec, alpha, beta, z))

    def g(w):
        lk = _log_kernel(spec, z, w).real
        lg = (1.0 + alpha) * lk + e * _log_abs_cayley_det(spec, w) - beta * _log_kernel_diag(spec, w)
        return np.exp(lg - lnorm)

    return g, lnorm


def _identity_constancy_ratio(spec, alpha, beta, z, mc, mix):
    g, lnorm = _scaled_integrand(spec, alpha, beta, z)
    key = stream_key("identity", str(spec), alpha, beta, z)
    return estimate(g, AnchoredSampler(spec, z, mix), mc, key), lnorm


def shell_partial_sums(spec, alpha, beta, z, mc, shells: int = 12) -> list:
    """Per-shell contributions to I(z)/normalizer over depths [2^-(k+1), 2^-k]."""
    g, _ = _scaled_integrand(spec, alpha, beta, z)
    per = max(1, mc.samples // shells)
    out = []
    for k in range(shells):
        lo, hi = 2.0 ** -(k + 1), 2.0 ** -k
        key = stream_key("identity-shell", str(spec), alpha, beta, z, k)
        est = estimate(g, ShellSampler(spec, lo, hi), mc, key, samples=per)
        out.append((lo, hi, est))
    return out


def divergence_slope(partials) -> float:
    """Least-squares slope of log2(shell sum) against shell index, over the deeper half."""
    vals = np.array([max(p[2].value, 1e-300) for p in partials])
    k = np.arange(len(vals))
    half = len(vals) // 2
    return float(np.polyfit(k[half:], np.log2(vals[half:]), 1)[0])


@dataclass
class IdentityReport:
    alpha: float
    beta: float
    probe_points: list
    ratios: list
    coefficient_of_variation: float
    verdict: str
    # (probe index, depth lo, depth hi, estimate) rows, only in divergence-probe mode
    shell_sums: list = field(default_factory=list, compare=False)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "probe_points": [format_point(p) for p in self.probe_points],
            "ratios": [r.to_dict() for r in self.ratios],
            "coefficient_of_variation": self.coefficient_of_variation,
            "verdict": self.verdict,
        }


def coefficient_of_variation(values: Sequence[float]) -> float:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    return float(np.std(v, ddof=1) / abs(np.mean(v)))


def verify_identity(spec: DomainSpec, alpha: float, beta: float, probes=None,
                     mc: McConfig = McConfig(), *, divergence_probe: bool = False,
                     mix: float = 0.5, shells: int = 12) -> IdentityReport:
    """Check that the normalized ratios I(z)/(K(z,z)^(a-b) |det J(Phi,z)|^(1+2b-a)) agree.

    Each probe uses its own substream and the mixture sampler anchored at the
    probe.  The verdict is constant-consistent when the coefficient of
    variation of the ratio means is at most ``mc.tolerance``.  With
    ``divergence_probe`` out-of-range parameters are accepted and per-shell
    partial sums are examined for a non-decaying trend.
    """
    _check_identity_params(spec, alpha, beta, divergence_probe)
    probes = default_probes(spec) if probes is None else [check_inside(spec, p).reshape(spec.dimension)
                                                          for p in probes]
    ratios = [_identity_constancy_ratio(spec, alpha, beta, z, mc, mix)[0] for z in probes]
    cv = coefficient_of_variation([r.value for r in ratios])
    verdict = CONSTANT_CONSISTENT if cv <= mc.tolerance else INCONSISTENT
    rows = []
    if divergence_probe:
        diverging = False
        for i, z in enumerate(probes):
            partials = shell_partial_sums(spec, alpha, beta, z, mc, shells)
            rows.extend((i, lo, hi, est) for lo, hi, est in partials)
            if divergence_slope(partials) > DIVERGENCE_SLOPE:
                diverging = True
        if diverging:
            verdict = DIVERGENCE_SUSPECTED
    return IdentityReport(float(alpha), float(beta), probes, ratios, cv, verdict, rows)


def lp_test_function(spec: DomainSpec, alpha: float, beta: float, z, w) -> np.ndarray:
    """g_z(w) = K(w, z)^((1+alpha)/2) det J(Phi, w)^((1+2beta-alpha)/2), principal branches."""
    z = check_inside(spec, z)
    w = check_inside(spec, w)
    e = 1.0 + 2.0 * beta - alpha
    return np.exp(0.5 * (1.0 + alpha) * _log_kernel(spec, w, z) + 0.5 * e * _log_cayley_det(spec, w))


def bump_norm(spec: DomainSpec, alpha: float, beta: float, z,
                      mc: McConfig = McConfig(), *, mix: float = 0.5) -> McEstimate:
    """Estimate ||g_z||^2 in L^2(dV_beta); same integrand and stream as ``verify_identity``."""
    _check_identity_params(spec, alpha, beta, False)
    z = check_inside(spec, z).reshape(spec.dimension)
    ratio, lnorm = _identity_constancy_ratio(spec, alpha, beta, z, mc, mix)
    scale = math.exp(lnorm)
    return McEstimate(ratio.value * scale, ratio.std_error * scale, ratio.samples, ratio.seed)


def lp_norm_prediction(spec: DomainSpec, alpha: float, beta: float, z, constant: float) -> float:
    """constant * K(z,z)^(alpha-beta) * |det J(Phi, z)|^(1+2beta-alpha)."""
    z = check_inside(spec, z).reshape(spec.dimension)
    return constant * math.exp(float(_log_normalizer(spec, alpha, beta, z)))


# ---------------------------------------------------------------------------
# reproducing property
# ---------------------------------------------------------------------------

def polynomial(terms: Mapping[tuple, complex]) -> Callable:
    """Vectorized evaluator for {exponent tuple: coefficient}."""
    items = [(tuple(int(k) for k in exps), complex(c)) for exps, c in terms.items()]

    def p(w):
        w = np.asarray(w, dtype=complex)
        out = np.zeros(w.shape[:-1], dtype=complex)
        for exps, c in items:
            term = np.full(w.shape[:-1], c, dtype=complex)
            for j, k in enumerate(exps):
                if k:
                    term = term * w[..., j] ** k
            out = out + term
        return out

    return p


def monomials(dim: int, max_degree: int) -> list:
    """All exponent tuples of total degree <= max_degree."""
    out = [()]
    for _ in range(dim):
        out = [e + (k,) for e in out for k in range(max_degree + 1)]
    return sorted((e for e in out if sum(e) <= max_degree), key=lambda e: (sum(e), e))


@dataclass(frozen=True)
class ReproducingReport:
    estimate: McEstimate
    expected: complex
    abs_error: float
    rel_error: float

    def to_dict(self) -> dict:
        return {"estimate": self.estimate.to_dict(),
                "expected": {"re": self.expected.real, "im": self.expected.imag},
                "abs_error": self.abs_error, "rel_error": self.rel_error}


def verify_reproducing(spec: DomainSpec, wp: WeightParams, terms: Mapping[tuple, complex], z,
                       mc: McConfig = McConfig(), *, mix: float = 0.5) -> ReproducingReport:
    """Estimate int K^(beta)(z, w) p(w) dV_beta(w) and compare it with p(z).

    ``terms`` maps exponent tuples to coefficients; total degree at most 3.
    """
    for exps in terms:
        if len(exps) != spec.dimension or sum(exps) > 3 or min(exps, default=0) < 0:
            raise ParameterOutOfRange(f"bad monomial exponent {exps} (need total degree <= 3)")
    z = check_inside(spec, z).reshape(spec.dimension)
    p = polynomial(terms)

    def f(w):
        return _weighted_kernel(spec, wp, z, w) * p(w)

    key = stream_key("reproducing", str(spec), wp.beta, z, repr(sorted(terms.items())))
    est = integrate_weighted(spec, wp, f, mc, anchor=z, key=key, mix=mix)
    expected = complex(p(z[None, :])[0])
    err = abs(est.value - expected)
    rel = err / abs(expected) if expected != 0 else math.inf
    return ReproducingReport(est, expected, float(err), float(rel))
