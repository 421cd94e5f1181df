"""Composition-operator diagnostics for holomorphic self-maps.

The pull-back measure mu = phi_* V_beta is never built.  Every functional is
an integral over u in the domain of a quantity evaluated at phi(u), sampled
with the V_beta weight in u-space.  The Berezin symbol, the ball mass and the
restricted Berezin integral F share one sample stream, so F <= mu_tilde
holds sample by sample.

Verdicts are heuristics read off finite shells near the boundary: they are
labeled "consistent" and never claim a proof.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .domains import (
    DomainSpec,
    WeightParams,
    _abs2_normalized_kernel,
    _log_kernel,
    _log_kernel_diag,
    check_beta,
    check_inside,
    contains,
    domain_beta_int,
    domain_beta_min,
    format_number,
    format_point,
)
from .errors import ImageOutsideDomain, ParameterOutOfRange
from .geometry import MetricBall, _distance, vol_beta, weight_density
from .maps import HoloMap
from .sampling import (
    AnchoredSampler,
    McConfig,
    McEstimate,
    _sphere_directions,
    _disk_points,
    estimate,
    stream_key,
    substream,
    uniform_points,
)

log = logging.getLogger(__name__)

COMPACT_CONSISTENT = "compact-consistent"
NOT_COMPACT = "not-compact"
BOUNDED_ONLY = "bounded-only"
UNBOUNDED_SUSPECTED = "unbounded-suspected"
INCONCLUSIVE = "inconclusive"

THETA_LO = 0.05
THETA_HI = 0.5

DISCLAIMER = ("self-map check is sampling evidence only: a pass does not prove "
              "that phi maps the domain into itself")


def _check_arity(spec: DomainSpec, phi: HoloMap):
    spec.require_kernel()
    if phi.arity != spec.dimension:
        raise ParameterOutOfRange(
            f"map arity {phi.arity} does not match the dimension {spec.dimension} of {spec}")


def default_depths(shells: int, depth_max: float = 0.5, depth_min: float = 1e-4) -> np.ndarray:
    """Geometrically spaced shell depths 1 - |z|, strictly decreasing."""
    if shells < 1:
        raise ParameterOutOfRange("need at least one shell")
    if shells == 1:
        return np.array([depth_min])
    return np.geomspace(depth_max, depth_min, shells)


def _as_depths(shells) -> np.ndarray:
    if np.ndim(shells) == 0:
        return default_depths(int(shells))
    depths = np.asarray(shells, dtype=float)
    if np.any(np.diff(depths) >= 0) or np.any(depths <= 0) or np.any(depths >= 1):
        raise ParameterOutOfRange("shell depths must lie in (0, 1) and strictly decrease")
    return depths


def shell_points(spec: DomainSpec, depth: float, count: int, rng) -> np.ndarray:
    """Points at boundary distance ``depth``: fixed axis/diagonal points, then random ones.

    On the polydisk the shell is max_j |z_j| = 1 - depth.
    """
    d = spec.dimension
    rho = 1.0 - depth
    fixed = [rho * np.eye(d, dtype=complex)[j] for j in range(d)]
    if spec.kind == "ball":
        if d > 1:
            fixed.append(np.full(d, rho / math.sqrt(d), dtype=complex))
        fixed.append(-fixed[0])
        fixed.append(1j * fixed[0])
    else:
        if d > 1:
            fixed.append(np.full(d, rho, dtype=complex))
        fixed.append(-fixed[0])
        fixed.append(1j * fixed[0])
    fixed = np.array(fixed)
    extra = max(0, count - len(fixed))
    if spec.kind == "ball":
        rand = _sphere_directions(rng, extra, d) * rho
    else:
        rand = _disk_points(rng, (extra, d), rho)
        lead = rng.integers(0, d, extra)
        rand[np.arange(extra), lead] = rho * np.exp(2j * math.pi * rng.random(extra))
    return np.concatenate([fixed, rand])[:max(count, 1)]


# ---------------------------------------------------------------------------
# self-map validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    points_checked: int
    witness: np.ndarray | None = None
    image: np.ndarray | None = None
    disclaimer: str = DISCLAIMER

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "points_checked": self.points_checked,
            "witness": None if self.witness is None else format_point(self.witness),
            "image": None if self.image is None else format_point(self.image),
            "disclaimer": self.disclaimer,
        }


def _images_ok(spec, img) -> np.ndarray:
    finite = np.all(np.isfinite(img), axis=-1)
    ok = finite.copy()
    ok[finite] = contains(spec, img[finite])
    return ok


def validate_self_map(spec: DomainSpec, phi: HoloMap, mc: McConfig = McConfig(),
                      *, shell_depths=None, per_shell: int = 256) -> ValidationReport:
    """Evaluate phi on uniform and near-boundary samples and check every image is inside.

    On failure the witness is the offending sample closest to the origin.
    """
    _check_arity(spec, phi)
    d = spec.dimension
    if shell_depths is None:
        shell_depths = np.geomspace(0.5, 1e-6, 12)
    rng = substream(mc.seed, stream_key("validate", str(spec), str(phi)))
    pts = [np.zeros((1, d), dtype=complex), uniform_points(spec, rng, mc.samples)]
    pts += [shell_points(spec, float(t), per_shell, rng) for t in shell_depths]
    pts = np.concatenate(pts)
    img = phi(pts)
    ok = _images_ok(spec, img)
    if np.all(ok):
        return ValidationReport(True, len(pts))
    bad = np.nonzero(~ok)[0]
    i = bad[np.argmin(np.sum(np.abs(pts[bad]) ** 2, axis=1))]
    return ValidationReport(False, len(pts), pts[i], img[i])


def _require_images(spec, phi, z) -> np.ndarray:
    img = phi(z)
    ok = _images_ok(spec, img.reshape(-1, spec.dimension))
    if not np.all(ok):
        zz = z.reshape(-1, spec.dimension)
        i = int(np.nonzero(~ok)[0][0])
        bad = img.reshape(-1, spec.dimension)[i]
        raise ImageOutsideDomain(
            f"phi({format_point(zz[i])}) = {format_point(bad)} is not inside {spec}", zz[i], bad)
    return img


# ---------------------------------------------------------------------------
# kernel ratio
# ---------------------------------------------------------------------------

def kernel_ratio(spec: DomainSpec, phi: HoloMap, z):
    """K(phi(z), phi(z)) / K(z, z), vectorized over points."""
    _check_arity(spec, phi)
    z = check_inside(spec, z)
    img = _require_images(spec, phi, z)
    out = np.exp(_log_kernel_diag(spec, img) - _log_kernel_diag(spec, z))
    return float(out) if np.ndim(out) == 0 else out


def _growing(maxima, factor: float = 10.0) -> bool:
    r = np.asarray(maxima, dtype=float)
    if len(r) < 3:
        return False
    return bool(r[-1] > factor * max(1.0, r[0]) and np.all(np.diff(r[-3:]) > 0))


@dataclass(frozen=True)
class BoundednessEstimate:
    sup_ratio: float
    argmax: np.ndarray
    depths: list
    shell_maxima: list
    unbounded_suspected: bool

    def to_dict(self) -> dict:
        return {"sup_ratio": self.sup_ratio, "argmax": format_point(self.argmax),
                "depths": list(self.depths), "shell_maxima": list(self.shell_maxima),
                "unbounded_suspected": self.unbounded_suspected}


def boundedness_bound(spec: DomainSpec, phi: HoloMap, shells=8, mc: McConfig = McConfig(),
                      *, points_per_shell: int = 2048) -> BoundednessEstimate:
    """Largest kernel ratio seen over the origin, interior samples and boundary shells.

    ``shells`` is a shell count (depths 0.5 down to 1e-4) or explicit depths.
    """
    _check_arity(spec, phi)
    depths = _as_depths(shells)
    rng = substream(mc.seed, stream_key("bound", str(spec), str(phi)))
    interior = np.concatenate([np.zeros((1, spec.dimension), dtype=complex),
                               uniform_points(spec, rng, min(mc.samples, 4096))])
    best_val, best_pt = -1.0, interior[0]
    ratios = kernel_ratio(spec, phi, interior)
    i = int(np.argmax(ratios))
    best_val, best_pt = float(ratios[i]), interior[i]
    maxima = []
    for t in depths:
        pts = shell_points(spec, float(t), points_per_shell, rng)
        ratios = kernel_ratio(spec, phi, pts)
        i = int(np.argmax(ratios))
        maxima.append(float(ratios[i]))
        if ratios[i] > best_val:
            best_val, best_pt = float(ratios[i]), pts[i]
    return BoundednessEstimate(best_val, best_pt, [float(t) for t in depths], maxima,
                               _growing(maxima))


# ---------------------------------------------------------------------------
# adjoint norm of normalized kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdjointCheck:
    mc_side: McEstimate
    closed_side: float

    @property
    def rel_deviation(self) -> float:
        return abs(self.mc_side.value - self.closed_side) / self.closed_side

    def to_dict(self) -> dict:
        return {"mc_side": self.mc_side.to_dict(), "closed_side": self.closed_side,
                "rel_deviation": self.rel_deviation}


def adjoint_norm_check(spec: DomainSpec, wp: WeightParams, phi: HoloMap, z,
                       mc: McConfig = McConfig(), *, mix: float = 0.5) -> AdjointCheck:
    """Compare int |K^(beta)(w, phi(z))|^2 dV_beta(w) / K^(beta)(z, z) with (K(phi z, phi z)/K(z, z))^(1+beta)."""
    _check_arity(spec, phi)
    check_beta(spec, wp.beta)
    z = check_inside(spec, z).reshape(spec.dimension)
    a = _require_images(spec, phi, z)
    lz = float(_log_kernel_diag(spec, z))
    la = float(_log_kernel_diag(spec, a))
    b1 = 1.0 + wp.beta
    dens = weight_density(spec, wp.beta)

    def g(w):
        lk = _log_kernel(spec, w, a).real
        return wp.c_beta * np.exp(b1 * (2.0 * lk - lz)) * dens(w)

    key = stream_key("adjoint", str(spec), wp.beta, z, str(phi))
    est = estimate(g, AnchoredSampler(spec, a, mix), mc, key)
    return AdjointCheck(est, math.exp(b1 * (la - lz)))


# ---------------------------------------------------------------------------
# pull-back functionals
# ---------------------------------------------------------------------------

def _to_unbounded(spec, u):
    # inverse of the tanh squashing below
    if spec.kind == "ball":
        r = math.sqrt(float(np.sum(np.abs(u) ** 2)))
        x = u * (math.atanh(min(r, 1 - 1e-15)) / r) if r > 0 else u
    else:
        r = np.abs(u)
        x = np.where(r > 0, u * np.arctanh(np.minimum(r, 1 - 1e-15)) / np.where(r > 0, r, 1), u)
    return np.concatenate([x.real, x.imag])


def _from_unbounded(spec, v):
    d = spec.dimension
    x = v[:d] + 1j * v[d:]
    if spec.kind == "ball":
        r = math.sqrt(float(np.sum(np.abs(x) ** 2)))
        return x * (math.tanh(r) / r) if r > 0 else x
    r = np.abs(x)
    return np.where(r > 0, x * np.tanh(r) / np.where(r > 0, r, 1), x)


def preimage_anchors(spec: DomainSpec, phi: HoloMap, z, *, seed: int = 0,
                     candidates: int = 32, polish: int = 8, max_anchors: int = 4) -> np.ndarray:
    """Distinct points u with phi(u) close to z, used to centre the sampler.

    The ``polish`` best of z, 0 and ``candidates`` random starts are refined by
    Nelder-Mead on the squared Bergman distance of phi(u) to z.  Refined
    points whose image lies within distance 1 of the best image and at least
    distance 1 from each other are kept, best first; a non-injective map then
    gets an anchor near each preimage.  If no image comes within distance 1
    of z the best point is returned alone.  Only a sampling aid: any answer
    is valid.
    """
    z = np.asarray(z, dtype=complex).reshape(spec.dimension)
    rng = substream(seed, stream_key("anchor", str(spec), str(phi), z))
    cands = np.concatenate([z[None], np.zeros((1, spec.dimension), dtype=complex),
                            uniform_points(spec, rng, candidates)])

    def cost_many(u):
        img = phi(u)
        ok = _images_ok(spec, img)
        out = np.full(len(u), np.inf)
        if np.any(ok):
            out[ok] = _distance(spec, z[None], img[ok]) ** 2
        return out

    def cost(v):
        u = _from_unbounded(spec, v)
        if not contains(spec, u):
            return np.inf
        return float(cost_many(u[None])[0])

    costs = cost_many(cands)
    order = [int(i) for i in np.argsort(costs, kind="stable")[:polish] if np.isfinite(costs[i])]
    if not order:
        return cands[:1]
    found = []
    for i in order:
        u0, c0 = cands[i], costs[i]
        # a start inside the basin of a polished point would only reproduce it
        if any(_distance(spec, u0[None], v[None])[0] < 0.5 for _, v in found):
            continue
        if c0 > 1e-18:
            # distance 1e-4 is ample for centring a unit metric ball
            res = minimize(cost, _to_unbounded(spec, u0), method="Nelder-Mead",
                           options={"xatol": 1e-6, "fatol": 1e-8,
                                    "maxfev": 300 * spec.dimension})
            u1 = _from_unbounded(spec, res.x)
            if res.fun < c0 and contains(spec, u1):
                u0, c0 = u1, float(res.fun)
        found.append((c0, u0))
        if len(found) == 1 and c0 > 1.0:
            # z is not attained; the nearest approach is the only useful centre
            break
    found.sort(key=lambda t: t[0])
    limit = math.sqrt(found[0][0]) + 1.0
    kept = []
    for c, u in found:
        if math.sqrt(c) > limit or len(kept) == max_anchors:
            break
        if all(_distance(spec, u[None], v[None])[0] >= 1.0 for v in kept):
            kept.append(u)
    return np.array(kept)


def preimage_anchor(spec: DomainSpec, phi: HoloMap, z, *, seed: int = 0,
                    candidates: int = 32) -> np.ndarray:
    """The best point found by :func:`preimage_anchors`."""
    return preimage_anchors(spec, phi, z, seed=seed, candidates=candidates)[0]


@dataclass(frozen=True)
class PullbackEstimates:
    """mu_tilde(z), mu_hat(z) and F_{r,beta}(z) from one stream."""

    mu_tilde: McEstimate
    mu_hat: McEstimate
    f_r_beta: McEstimate
    ball_mass: McEstimate
    ball_volume: float
    anchors: np.ndarray

    def to_dict(self) -> dict:
        return {"mu_tilde": self.mu_tilde.to_dict(), "mu_hat": self.mu_hat.to_dict(),
                "f_r_beta": self.f_r_beta.to_dict(), "anchors": [format_point(a) for a in self.anchors]}


def _check_r(r):
    if not r > 0:
        raise ParameterOutOfRange(f"radius r must be positive, got {r}")


def pullback_functionals(spec: DomainSpec, wp: WeightParams, phi: HoloMap, z, r: float = 1.0,
                         mc: McConfig = McConfig(), *, mix: float = 0.5) -> PullbackEstimates:
    """Estimate the Berezin symbol, averaging function and F_{r,beta} of the pull-back measure.

    With I(u) the indicator of d(phi(u), z) <= r and k = k_z^(beta):
    mu_tilde = int |k(phi u)|^2 dV_beta, mu(B) = int I dV_beta and
    F = int I |k(phi u)|^2 dV_beta.  mu_hat divides mu(B) by Vol_beta(B(z, r)),
    estimated on its own stream.
    """
    _check_arity(spec, phi)
    check_beta(spec, wp.beta)
    _check_r(r)
    z = check_inside(spec, z).reshape(spec.dimension)
    dens = weight_density(spec, wp.beta)
    zz = z[None, :]

    def g(u):
        img = phi(u)
        ok = _images_ok(spec, img)
        if not np.all(ok):
            i = int(np.nonzero(~ok)[0][0])
            raise ImageOutsideDomain(
                f"phi({format_point(u[i])}) = {format_point(img[i])} is not inside {spec}",
                u[i], img[i])
        base = dens(u)
        k2 = _abs2_normalized_kernel(spec, wp, z, img) * base
        ind = (_distance(spec, zz, img) <= r) * base
        return np.stack([k2, ind, np.where(ind > 0, k2, 0.0)], axis=1)

    anchors = preimage_anchors(spec, phi, z, seed=mc.seed)
    key = stream_key("pullback", str(spec), wp.beta, z, str(phi), r)
    mu_tilde, mass, f = estimate(g, AnchoredSampler(spec, anchors, mix), mc, key)
    vol = vol_beta(spec, wp.beta, MetricBall(z, r), mc)
    v = vol.value
    se = math.hypot(mass.std_error / v, mass.value * vol.std_error / v ** 2)
    mu_hat = McEstimate(mass.value / v, se, mass.samples, mc.seed)
    return PullbackEstimates(mu_tilde, mu_hat, f, mass, v, anchors)


def berezin_pullback(spec: DomainSpec, wp: WeightParams, phi: HoloMap, z,
                     mc: McConfig = McConfig()) -> McEstimate:
    """mu_tilde(z) = int |k_z^(beta)(phi(u))|^2 dV_beta(u)."""
    return pullback_functionals(spec, wp, phi, z, 1.0, mc).mu_tilde


def averaging_pullback(spec: DomainSpec, wp: WeightParams, phi: HoloMap, z, r: float,
                       mc: McConfig = McConfig()) -> McEstimate:
    """mu_hat(z) = V_beta(phi^-1(B(z, r))) / V_beta(B(z, r))."""
    return pullback_functionals(spec, wp, phi, z, r, mc).mu_hat


def f_r_beta(spec: DomainSpec, wp: WeightParams, phi: HoloMap, z, r: float,
             mc: McConfig = McConfig()) -> McEstimate:
    """F_{r,beta}(z) = int over phi(u) in B(z, r) of |k_z^(beta)(phi(u))|^2 dV_beta(u)."""
    return pullback_functionals(spec, wp, phi, z, r, mc).f_r_beta


# ---------------------------------------------------------------------------
# diagnosis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShellStats:
    depth: float
    max_ratio: float
    mean_mu_hat: float
    mean_mu_tilde: float
    mean_f: float

    def to_dict(self) -> dict:
        return {"depth": self.depth, "max_ratio": self.max_ratio, "mean_mu_hat": self.mean_mu_hat,
                "mean_mu_tilde": self.mean_mu_tilde, "mean_F": self.mean_f}


@dataclass
class DiagnosticsReport:
    beta0: float
    beta: float
    sup_ratio: float
    shell_profile: list
    verdict: str
    radius: float = 1.0
    carleson_constant: float = 0.0
    thresholds: tuple = (THETA_LO, THETA_HI)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "beta0": self.beta0,
            "beta": self.beta,
            "radius": self.radius,
            "sup_ratio": self.sup_ratio,
            "shell_profile": [s.to_dict() for s in self.shell_profile],
            "carleson_constant": self.carleson_constant,
            "thresholds": {"theta_lo": self.thresholds[0], "theta_hi": self.thresholds[1]},
            "verdict": self.verdict,
            "notes": list(self.notes),
        }


def check_diagnose_params(spec: DomainSpec, beta0: float, beta: float) -> bool:
    """Validate the weights; return whether beta clears beta0 + beta_int."""
    bmin = domain_beta_min(spec)
    if not beta0 > bmin:
        raise ParameterOutOfRange(
            f"beta0 = {beta0} must exceed beta_min = {format_number(bmin)} for {spec}")
    if beta < beta0:
        raise ParameterOutOfRange(f"need beta >= beta0, got beta = {beta} < beta0 = {beta0}")
    return beta > beta0 + domain_beta_int(spec)


def decide_verdict(maxima, sup_ratio: float, gap_ok: bool,
                   theta_lo: float = THETA_LO, theta_hi: float = THETA_HI) -> str:
    """Verdict from the per-shell maximal kernel ratios (shallowest first)."""
    r = np.asarray(maxima, dtype=float)
    if not math.isfinite(sup_ratio) or _growing(r):
        return UNBOUNDED_SUSPECTED
    if not gap_ok:
        return BOUNDED_ONLY
    if len(r) >= 2 and r[-1] >= theta_hi and r[-2] >= theta_hi \
            and abs(r[-1] - r[-2]) <= 0.1 * r[-2]:
        return NOT_COMPACT
    if r[-1] < theta_lo and np.all(r[1:] <= 1.05 * r[:-1]):
        return COMPACT_CONSISTENT
    return INCONCLUSIVE


def diagnose(spec: DomainSpec, phi: HoloMap, beta0: float, beta: float, shells=8,
             r: float = 1.0, mc: McConfig = McConfig(), *, points_per_shell: int = 4,
             ratio_points: int = 2048, theta_lo: float = THETA_LO, theta_hi: float = THETA_HI,
             validate: bool = True) -> DiagnosticsReport:
    """Shell-by-shell kernel ratios and pull-back functionals, with a verdict.

    ``mc.samples`` is the per-shell budget of the pull-back stream, split over
    ``points_per_shell`` points.  The max ratio per shell uses ``ratio_points``
    deterministic points.
    """
    _check_arity(spec, phi)
    _check_r(r)
    gap_ok = check_diagnose_params(spec, beta0, beta)
    depths = _as_depths(shells)
    notes = ["verdicts are numerical consistency checks on finite shells, not proofs",
             f"thresholds theta_lo = {theta_lo}, theta_hi = {theta_hi} are heuristics"]
    if validate:
        rep = validate_self_map(spec, phi, mc.with_samples(min(mc.samples, 20000)))
        if not rep.passed:
            raise ImageOutsideDomain(
                f"phi is not a self-map of {spec}: phi({format_point(rep.witness)}) = "
                f"{format_point(rep.image)}", rep.witness, rep.image)
    if not gap_ok:
        msg = (f"beta = {beta} does not exceed beta0 + beta_int = "
               f"{beta0} + {format_number(domain_beta_int(spec))}; no compactness verdict, "
               "only boundedness evidence is reported")
        log.warning(msg)
        notes.append(msg)
    wp = WeightParams.for_domain(spec, beta)
    bound = boundedness_bound(spec, phi, depths, mc, points_per_shell=ratio_points)
    per_point = mc.with_samples(max(1, mc.samples // points_per_shell))
    rng = substream(mc.seed, stream_key("diagnose-points", str(spec), str(phi)))
    profile = []
    c_fit = 0.0
    for t, mx in zip(depths, bound.shell_maxima):
        pts = shell_points(spec, float(t), points_per_shell, rng)
        hats, tildes, fs = [], [], []
        for z in pts:
            est = pullback_functionals(spec, wp, phi, z, r, per_point)
            hats.append(max(est.mu_hat.value, 0.0))
            tildes.append(max(est.mu_tilde.value, 0.0))
            fs.append(max(est.f_r_beta.value, 0.0))
            if tildes[-1] > 0:
                c_fit = max(c_fit, hats[-1] / tildes[-1])
        profile.append(ShellStats(float(t), mx, float(np.mean(hats)), float(np.mean(tildes)),
                                  float(np.mean(fs))))
    verdict = decide_verdict(bound.shell_maxima, bound.sup_ratio, gap_ok, theta_lo, theta_hi)
    if verdict in (NOT_COMPACT, COMPACT_CONSISTENT, INCONCLUSIVE, BOUNDED_ONLY):
        notes.append(f"boundedness on the beta0 = {beta0} space transfers to every beta >= beta0")
    return DiagnosticsReport(float(beta0), float(beta), bound.sup_ratio, profile, verdict,
                             float(r), c_fit, (theta_lo, theta_hi), notes)
