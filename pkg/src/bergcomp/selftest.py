"""Built-in invariant runner behind ``bergcomp selftest``.

Each check returns ``(passed, detail)``; details are formatted with fixed
precision so the table is identical across runs with the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import compop, mc as mcmod
from .domains import (
    DomainSpec,
    WeightParams,
    ball_automorphism,
    domain_beta_int,
    domain_beta_min,
    kernel,
    parse_domain,
    weighted_volume,
)
from .geometry import MetricBall, bergman_distance, metric_tensor, vol_beta, volume_kernel_product
from .maps import parse_map
from .sampling import McConfig, sample_uniform


@dataclass(frozen=True)
class CheckResult:
    suite: str
    check: str
    passed: bool
    detail: str

    def to_dict(self) -> dict:
        return {"suite": self.suite, "check": self.check, "passed": self.passed,
                "detail": self.detail}


def _golden(mc: McConfig):
    cases = {"ball:1": ("-1/2", "0"), "ball:3": ("-1/4", "0"), "polydisk:2": ("-1/2", "0"),
             "symmetric:r=2,a=1,b=0": ("-1/3", "1/6"), "vinberg": ("-1/3", "1/4")}
    bad = [k for k, (bm, bi) in cases.items()
           if (str(domain_beta_min(parse_domain(k))), str(domain_beta_int(parse_domain(k)))) != (bm, bi)]
    return not bad, "all match" if not bad else f"mismatch: {', '.join(bad)}"


def _minimality(mc: McConfig):
    worst = 0.0
    for spec in (DomainSpec.ball(3), DomainSpec.polydisk(3)):
        z = sample_uniform(spec, mc.with_samples(500))
        k = kernel(spec, z, np.zeros(spec.dimension))
        worst = max(worst, float(np.max(np.abs(k * spec.volume() - 1.0))))
    return worst < 1e-12, f"max |K(z,0) Vol - 1| = {worst:.1e}"


def _automorphism(mc: McConfig):
    img, _ = ball_automorphism([0.5], [0.25])
    return abs(img[0] + 2 / 7) < 1e-12, f"phi_0.5(0.25) = {img[0].real:.6f}"


def _metric(mc: McConfig):
    g = metric_tensor(DomainSpec.disk(), [0.0])
    d = bergman_distance(DomainSpec.disk(), [0.0], [0.5])
    ok = abs(g[0, 0] - 2.0) < 1e-12 and abs(d - math.sqrt(2) * math.atanh(0.5)) < 1e-12
    return ok, f"g(0) = {g[0, 0].real:.6f}, d(0, 0.5) = {d:.6f}"


def _vol_beta(mc: McConfig):
    spec = DomainSpec.disk()
    errs = []
    for beta in (0.0, 1.0):
        v = vol_beta(spec, beta, mc=mc)
        errs.append(abs(v.value / weighted_volume(spec, beta) - 1))
    return max(errs) < 0.02, f"max rel err = {max(errs):.4f}"


def _volume_band(mc: McConfig):
    spec = DomainSpec.disk()
    vals = [volume_kernel_product(spec, 0.0, [1 - t], 1.0, mc) for t in (0.5, 0.1, 0.01, 0.001)]
    ratio = max(vals) / min(vals)
    return ratio <= 10, f"max/min = {ratio:.3f}"


def _identity_constancy(mc: McConfig):
    rep = mcmod.verify_identity(DomainSpec.disk(), 1.0, 0.0, mc=mc)
    return rep.verdict == mcmod.CONSTANT_CONSISTENT, f"cv = {rep.coefficient_of_variation:.4f}"


def _reproducing(mc: McConfig):
    spec = DomainSpec.disk()
    wp = WeightParams.for_domain(spec, 1.0)
    worst = max(mcmod.verify_reproducing(spec, wp, {(k,): 1.0}, [0.4 + 0.2j], mc).rel_error
                for k in range(4))
    return worst < 0.05, f"max rel err = {worst:.4f}"


def _parser(mc: McConfig):
    phi = parse_map("(z1^2 + 0.1 - 2i*z1)/3, -z2^3", 2)
    psi = parse_map(str(phi), 2)
    z = sample_uniform(DomainSpec.polydisk(2), mc.with_samples(100))
    return bool(np.array_equal(phi(z), psi(z))), "print/parse round trip"


def _validation(mc: McConfig):
    spec = DomainSpec.disk()
    a = compop.validate_self_map(spec, parse_map("z1", 1), mc.with_samples(2000)).passed
    b = compop.validate_self_map(spec, parse_map("z1*2", 1), mc.with_samples(2000)).passed
    return a and not b, f"identity passed={a}, doubling passed={b}"


def _ratio(mc: McConfig):
    r1 = compop.kernel_ratio(DomainSpec.disk(), parse_map("0", 1), [0.9])
    r2 = compop.kernel_ratio(DomainSpec.polydisk(2), parse_map("z1, 0", 2), [0.99, 0.5])
    ok = abs(r1 - 0.0361) < 1e-12 and abs(r2 - 0.5625) < 1e-12
    return ok, f"{r1:.6f}, {r2:.6f}"


def _adjoint(mc: McConfig):
    spec = DomainSpec.disk()
    wp = WeightParams.for_domain(spec, 0.0)
    c = compop.adjoint_norm_check(spec, wp, parse_map("z1^2", 1), [0.5], mc)
    return c.rel_deviation < 0.05, f"mc = {c.mc_side.value:.4f}, closed = {c.closed_side:.4f}"


def _verdicts(mc: McConfig):
    disk = DomainSpec.disk()
    v0 = compop.diagnose(disk, parse_map("0", 1), 0.0, 1.0, 6, 1.0, mc, points_per_shell=2).verdict
    v1 = compop.diagnose(disk, parse_map("z1", 1), 0.0, 1.0, 6, 1.0, mc, points_per_shell=2).verdict
    ok = v0 == compop.COMPACT_CONSISTENT and v1 == compop.NOT_COMPACT
    return ok, f"constant: {v0}, identity: {v1}"


def _triangle(mc: McConfig):
    worst = math.inf
    for spec in (DomainSpec.ball(2), DomainSpec.polydisk(2)):
        pts = sample_uniform(spec, mc.with_samples(300)).reshape(100, 3, spec.dimension)
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        slack = bergman_distance(spec, x, y) + bergman_distance(spec, y, z) - bergman_distance(spec, x, z)
        worst = min(worst, float(np.min(slack)))
    return worst > -1e-9, f"min slack = {worst:.2e}"


def _bidisk_identity(mc: McConfig):
    rep = mcmod.verify_identity(DomainSpec.polydisk(2), 1.5, 0.25, mc=mc)
    return rep.verdict == mcmod.CONSTANT_CONSISTENT, f"cv = {rep.coefficient_of_variation:.4f}"


def _divergence(mc: McConfig):
    rep = mcmod.verify_identity(DomainSpec.disk(), -0.1, 0.0, mc=mc, divergence_probe=True)
    return rep.verdict == mcmod.DIVERGENCE_SUSPECTED, f"verdict = {rep.verdict}"


def _identity_functionals(mc: McConfig):
    spec = DomainSpec.disk()
    wp = WeightParams.for_domain(spec, 0.5)
    est = compop.pullback_functionals(spec, wp, parse_map("z1", 1), [0.7j], 1.0, mc)
    ok = abs(est.mu_tilde.value - 1) < 0.05 and abs(est.mu_hat.value - 1) < 0.1 \
        and est.f_r_beta.value <= est.mu_tilde.value
    return ok, (f"mu_tilde = {est.mu_tilde.value:.4f}, mu_hat = {est.mu_hat.value:.4f}, "
                f"F = {est.f_r_beta.value:.4f}")


def _scaling(mc: McConfig):
    disk = DomainSpec.disk()
    deep, verdicts = [], []
    for c in (0.3, 0.6, 0.9):
        b = compop.boundedness_bound(disk, parse_map(f"{c}*z1", 1), 6, mc, points_per_shell=64)
        deep.append(b.shell_maxima[-1])
        verdicts.append(compop.decide_verdict(b.shell_maxima, b.sup_ratio, True))
    ok = all(v == compop.COMPACT_CONSISTENT for v in verdicts) and deep == sorted(deep)
    return ok, "deepest max ratios " + ", ".join(f"{x:.2e}" for x in deep)


def _determinism(mc: McConfig):
    spec = DomainSpec.disk()
    a = vol_beta(spec, 0.5, MetricBall([0.3], 1.0), mc.with_samples(20000))
    b = vol_beta(spec, 0.5, MetricBall([0.3], 1.0),
                 McConfig(20000, mc.seed, workers=2, chunk_size=4096))
    c = vol_beta(spec, 0.5, MetricBall([0.3], 1.0),
                 McConfig(20000, mc.seed, workers=1, chunk_size=4096))
    return b.value == c.value and a.samples == b.samples, "worker count does not change results"


Check = Callable[[McConfig], tuple]

# (suite, name, function, included in --fast, sample count)
CHECKS: list = [
    ("domains", "golden constants", _golden, True, 0),
    ("domains", "minimality K(z,0) = 1/Vol", _minimality, True, 0),
    ("domains", "ball automorphism example", _automorphism, True, 0),
    ("geometry", "metric and distance at 0", _metric, True, 0),
    ("geometry", "Vol_beta closed form", _vol_beta, True, 200_000),
    ("geometry", "volume-kernel band", _volume_band, False, 100_000),
    ("geometry", "triangle inequality", _triangle, True, 0),
    ("mc", "integral identity constancy", _identity_constancy, True, 100_000),
    ("mc", "bidisk identity constancy", _bidisk_identity, False, 100_000),
    ("mc", "divergence probe", _divergence, False, 100_000),
    ("mc", "reproducing property", _reproducing, False, 200_000),
    ("mc", "stream determinism", _determinism, True, 0),
    ("compop", "parser round trip", _parser, True, 0),
    ("compop", "self-map validation", _validation, True, 0),
    ("compop", "kernel ratio examples", _ratio, True, 0),
    ("compop", "adjoint norm identity", _adjoint, True, 100_000),
    ("compop", "identity-map functionals", _identity_functionals, False, 100_000),
    ("compop", "scaling-map monotonicity", _scaling, True, 0),
    ("compop", "verdicts", _verdicts, False, 40_000),
]


def run_selftest(seed: int = 0, fast: bool = False, workers: int = 1) -> list:
    out = []
    for suite, name, fn, in_fast, samples in CHECKS:
        if fast and not in_fast:
            continue
        n = samples or 1000
        if fast:
            n = max(1000, n // 4)
        cfg = McConfig(samples=n, seed=seed, workers=workers)
        try:
            ok, detail = fn(cfg)
        except Exception as exc:  # failures are reported, not raised
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(suite, name, bool(ok), detail))
    return out


def format_table(results: list) -> str:
    w_suite = max(len("suite"), *(len(r.suite) for r in results))
    w_check = max(len("check"), *(len(r.check) for r in results))
    lines = [f"{'suite':<{w_suite}}  {'check':<{w_check}}  result  detail"]
    for r in results:
        flag = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.suite:<{w_suite}}  {r.check:<{w_check}}  {flag:<6}  {r.detail}")
    n_ok = sum(r.passed for r in results)
    lines.append(f"{n_ok}/{len(results)} checks passed")
    return "\n".join(lines)
