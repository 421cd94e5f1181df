"""Supported domains, their Siegel structure data and Bergman kernels.

Points are numpy complex arrays whose last axis holds the coordinates, so a
single point has shape ``(d,)`` and a batch has shape ``(n, d)``.  All kernel
functions broadcast over leading axes.

Two domain families are kernel-evaluable: the unit ball B^d (``ball:d``,
the disk for d = 1) and the polydisk D^m (``polydisk:m``).  The irreducible
bounded symmetric domains (``symmetric:r=..,a=..,b=..``) and the
representative domain of the Vinberg tube (``vinberg``) only expose their
structure constants.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Sequence, Union

import numpy as np

from .errors import (
    BetaOutOfRange,
    DomainSpecError,
    KernelNotAvailable,
    PointOutsideDomain,
    UnsupportedDomain,
)

Number = Union[int, Fraction, float]

# strict-interior margin; points closer to the boundary are rejected
BOUNDARY_MARGIN = 1e-12

KERNEL_EVALUABLE = "kernel-evaluable"
METRIC_EVALUABLE = "metric-evaluable"
SAMPLABLE = "samplable"


# ---------------------------------------------------------------------------
# structure data
# ---------------------------------------------------------------------------

def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def _as_number(x) -> Number:
    if _is_exact(x):
        return Fraction(x)
    if isinstance(x, Real):
        return float(x)
    raise TypeError(f"expected a real number, got {x!r}")


@dataclass(frozen=True)
class SiegelStructure:
    """Rank ``l`` and the vectors ``n``, ``d``, ``q`` of the associated Siegel domain."""

    l: int
    n: tuple
    d: tuple
    q: tuple

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(_as_number(x) for x in self.n))
        object.__setattr__(self, "d", tuple(_as_number(x) for x in self.d))
        object.__setattr__(self, "q", tuple(_as_number(x) for x in self.q))
        if self.l < 1:
            raise DomainSpecError(f"rank must be positive, got {self.l}")
        if not len(self.n) == len(self.d) == len(self.q) == self.l:
            raise DomainSpecError("n, d, q must all have length l")
        for nj, dj, qj in zip(self.n, self.d, self.q):
            if nj < 0 or qj < 0 or dj > 0:
                raise DomainSpecError("need n_j >= 0, q_j >= 0 and d_j <= 0")
            if -2 * dj + qj <= 0:
                raise DomainSpecError("need -2 d_j + q_j > 0")

    @property
    def exact(self) -> bool:
        return all(_is_exact(x) for x in self.n + self.d + self.q)

    def to_dict(self) -> dict:
        return {
            "l": self.l,
            "n": [format_number(x) for x in self.n],
            "d": [format_number(x) for x in self.d],
            "q": [format_number(x) for x in self.q],
        }


def beta_min(s: SiegelStructure) -> Number:
    """Infimum of admissible weights: -min_j (n_j + 2) / (2 (-2 d_j + q_j))."""
    return -min((nj + 2) / (2 * (-2 * dj + qj)) for nj, dj, qj in zip(s.n, s.d, s.q))


def beta_int(s: SiegelStructure) -> Number:
    """Exponent gap of the integral formula: max_j n_j / (2 (-2 d_j + q_j))."""
    return max(nj / (2 * (-2 * dj + qj)) for nj, dj, qj in zip(s.n, s.d, s.q))


def format_number(x: Number) -> str:
    """Render exact rationals as ``"p/q"`` (or ``"p"``), floats with repr."""
    if isinstance(x, Fraction):
        return str(x)
    if _is_exact(x):
        return str(int(x))
    return repr(float(x))


# ---------------------------------------------------------------------------
# domain specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DomainSpec:
    """Tagged description of a supported domain.

    ``kind`` is one of ``"ball"``, ``"polydisk"``, ``"symmetric"``,
    ``"vinberg"``.  For the ball ``size`` is the complex dimension d, for the
    polydisk the number of factors m.  ``rank``, ``a``, ``b`` only apply to
    ``symmetric``.
    """

    kind: str
    size: int = 0
    rank: int = 0
    a: int = 0
    b: int = 0

    def __post_init__(self):
        if self.kind in ("ball", "polydisk"):
            if int(self.size) != self.size or self.size < 1:
                raise DomainSpecError(f"{self.kind} needs a positive integer size, got {self.size}")
        elif self.kind == "symmetric":
            if self.rank < 1 or self.a < 0 or self.b < 0:
                raise DomainSpecError("symmetric needs r >= 1, a >= 0, b >= 0")
        elif self.kind != "vinberg":
            raise DomainSpecError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def ball(cls, d: int) -> "DomainSpec":
        return cls("ball", size=d)

    @classmethod
    def disk(cls) -> "DomainSpec":
        return cls("ball", size=1)

    @classmethod
    def polydisk(cls, m: int) -> "DomainSpec":
        return cls("polydisk", size=m)

    @classmethod
    def symmetric(cls, r: int, a: int, b: int) -> "DomainSpec":
        return cls("symmetric", rank=r, a=a, b=b)

    @classmethod
    def vinberg(cls) -> "DomainSpec":
        return cls("vinberg")

    def __str__(self) -> str:
        if self.kind in ("ball", "polydisk"):
            return f"{self.kind}:{self.size}"
        if self.kind == "symmetric":
            return f"symmetric:r={self.rank},a={self.a},b={self.b}"
        return "vinberg"

    @property
    def capabilities(self) -> frozenset:
        if self.kind in ("ball", "polydisk"):
            return frozenset({KERNEL_EVALUABLE, METRIC_EVALUABLE, SAMPLABLE})
        return frozenset()

    @property
    def kernel_evaluable(self) -> bool:
        return KERNEL_EVALUABLE in self.capabilities

    @property
    def dimension(self) -> int:
        """Complex dimension of the ambient space."""
        if self.kind in ("ball", "polydisk"):
            return self.size
        if self.kind == "symmetric":
            r, a, b = self.rank, self.a, self.b
            return r + a * r * (r - 1) // 2 + b * r
        return 5

    def volume(self) -> float:
        """Euclidean volume: pi^d/d! for the ball, pi^m for the polydisk."""
        self.require_kernel()
        if self.kind == "ball":
            return math.pi ** self.size / math.factorial(self.size)
        return math.pi ** self.size

    def require_kernel(self):
        if not self.kernel_evaluable:
            raise KernelNotAvailable(
                f"{self} only exposes structure constants; no kernel is available")


_SYM_RE = re.compile(r"^symmetric:r=(\d+),a=(\d+),b=(\d+)$")


def parse_domain(text: str) -> DomainSpec:
    """Parse ``ball:<d>``, ``polydisk:<m>``, ``symmetric:r=..,a=..,b=..`` or ``vinberg``."""
    t = text.strip().replace(" ", "")
    if t == "vinberg":
        return DomainSpec.vinberg()
    m = _SYM_RE.match(t)
    if m:
        return DomainSpec.symmetric(*(int(g) for g in m.groups()))
    kind, sep, arg = t.partition(":")
    if sep and kind in ("ball", "polydisk") and arg.isdigit():
        return DomainSpec(kind, size=int(arg))
    raise DomainSpecError(
        f"cannot parse domain spec {text!r}; expected ball:<d>, polydisk:<m>, "
        "symmetric:r=<r>,a=<a>,b=<b> or vinberg")


def structure_of(spec: DomainSpec) -> SiegelStructure:
    if spec.kind == "ball":
        return SiegelStructure(1, (0,), (-1,), (spec.size - 1,))
    if spec.kind == "polydisk":
        m = spec.size
        return SiegelStructure(m, (0,) * m, (-1,) * m, (0,) * m)
    if spec.kind == "symmetric":
        r, a, b = spec.rank, spec.a, spec.b
        dj = -1 - Fraction(a * (r - 1), 2)
        return SiegelStructure(r, tuple(a * (r - j) for j in range(1, r + 1)),
                               (dj,) * r, (b,) * r)
    return SiegelStructure(3, (2, 0, 0), (-2, Fraction(-3, 2), Fraction(-3, 2)), (0, 0, 0))


def domain_beta_min(spec: DomainSpec) -> Number:
    return beta_min(structure_of(spec))


def domain_beta_int(spec: DomainSpec) -> Number:
    return beta_int(structure_of(spec))


# ---------------------------------------------------------------------------
# points
# ---------------------------------------------------------------------------

def as_points(z, dim: int | None = None) -> np.ndarray:
    """Coerce scalars, sequences or arrays into a complex array with coordinates last."""
    arr = np.asarray(z, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if dim is not None and arr.shape[-1] != dim:
        raise PointOutsideDomain(
            f"point has {arr.shape[-1]} coordinates, domain dimension is {dim}")
    return arr


_COMPONENT_RE = re.compile(r"^[+-]?[0-9.eE+-]*[ij]?$")


def parse_point(text: str) -> np.ndarray:
    """Parse ``"0.5+0i,0.1-0.2i"`` into a complex coordinate vector."""
    coords = []
    for raw in text.split(","):
        comp = raw.strip().replace("i", "j")
        if not comp or not _COMPONENT_RE.match(comp):
            raise ValueError(f"bad complex component {raw!r}")
        try:
            coords.append(complex(comp))
        except ValueError:
            raise ValueError(f"bad complex component {raw!r}") from None
    return np.array(coords, dtype=complex)


def format_point(z) -> str:
    z = np.asarray(z, dtype=complex).reshape(-1)
    parts = []
    for c in z:
        re_, im = float(c.real) + 0.0, float(c.imag) + 0.0  # drop negative zeros
        sign = "-" if math.copysign(1.0, im) < 0 else "+"
        parts.append(f"{re_!r}{sign}{abs(im)!r}i")
    return ",".join(parts)


def sq_norm(z: np.ndarray) -> np.ndarray:
    return np.sum(z.real ** 2 + z.imag ** 2, axis=-1)


def inner(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """<z, w> = sum_j z_j conj(w_j)."""
    return np.sum(z * np.conj(w), axis=-1)


def contains(spec: DomainSpec, z, margin: float = BOUNDARY_MARGIN) -> np.ndarray:
    """Strict interior test, vectorized over leading axes."""
    spec.require_kernel()
    z = as_points(z, spec.dimension)
    if spec.kind == "ball":
        return np.sqrt(sq_norm(z)) < 1.0 - margin
    return np.all(np.abs(z) < 1.0 - margin, axis=-1)


def check_inside(spec: DomainSpec, z, what: str = "point") -> np.ndarray:
    z = as_points(z, spec.dimension)
    inside = contains(spec, z)
    if not np.all(inside):
        bad = z[~inside][0] if z.ndim > 1 else z
        raise PointOutsideDomain(f"{what} {format_point(bad)} is not inside {spec}", bad)
    return z


def boundary_distance(spec: DomainSpec, z) -> np.ndarray:
    """1 - |z| for the ball, 1 - max_j |z_j| for the polydisk."""
    z = as_points(z, spec.dimension)
    if spec.kind == "ball":
        return 1.0 - np.sqrt(sq_norm(z))
    return 1.0 - np.max(np.abs(z), axis=-1)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def _log_kernel(spec: DomainSpec, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    # principal log of the base factors 1 - <z, w>, whose real part is > 0
    if spec.kind == "ball":
        d = spec.size
        c = math.lgamma(d + 1) - d * math.log(math.pi)
        return c - (d + 1) * np.log(1.0 - inner(z, w))
    m = spec.size
    return -m * math.log(math.pi) - 2.0 * np.sum(np.log(1.0 - z * np.conj(w)), axis=-1)


def _log_kernel_diag(spec: DomainSpec, z: np.ndarray) -> np.ndarray:
    """Real log K(z, z) without forming complex intermediates."""
    if spec.kind == "ball":
        d = spec.size
        c = math.lgamma(d + 1) - d * math.log(math.pi)
        return c - (d + 1) * np.log1p(-sq_norm(z))
    m = spec.size
    return -m * math.log(math.pi) - 2.0 * np.sum(np.log1p(-(z.real ** 2 + z.imag ** 2)), axis=-1)


def log_kernel(spec: DomainSpec, z, w) -> np.ndarray:
    """Holomorphic-in-z branch of log K(z, w)."""
    spec.require_kernel()
    z = check_inside(spec, z)
    w = check_inside(spec, w)
    return _log_kernel(spec, z, w)


def kernel(spec: DomainSpec, z, w) -> np.ndarray:
    """Unweighted Bergman kernel K(z, w).

    Ball: d! pi^-d (1 - <z,w>)^-(d+1).  Polydisk: prod_j pi^-1 (1 - z_j conj(w_j))^-2.
    """
    return np.exp(log_kernel(spec, z, w))


def kernel_diag(spec: DomainSpec, z) -> np.ndarray:
    spec.require_kernel()
    return np.exp(_log_kernel_diag(spec, check_inside(spec, z)))


@dataclass(frozen=True)
class WeightParams:
    """Weight exponent ``beta`` and the constant ``c_beta`` of K^(beta) = c_beta K^(1+beta)."""

    beta: float
    c_beta: float

    def __post_init__(self):
        if not self.c_beta > 0:
            raise BetaOutOfRange(f"c_beta must be positive, got {self.c_beta}")

    @classmethod
    def for_domain(cls, spec: DomainSpec, beta: float, c_beta: float | None = None) -> "WeightParams":
        check_beta(spec, beta)
        if c_beta is None:
            c_beta = weight_constant(spec, beta)
        return cls(float(beta), float(c_beta))


def check_beta(spec: DomainSpec, beta: float) -> None:
    bmin = domain_beta_min(spec)
    if not beta > bmin:
        raise BetaOutOfRange(
            f"beta = {beta} is not above beta_min = {format_number(bmin)} for {spec}")


def weight_constant(spec: DomainSpec, beta: float) -> float:
    """c_beta = Vol(U)^(1+beta) / Vol_beta(U), in closed form.

    For the ball with s = (d+1) beta this is Gamma(d+s+1) / (d! Gamma(s+1));
    the polydisk gives (2 beta + 1)^m.
    """
    spec.require_kernel()
    check_beta(spec, beta)
    if spec.kind == "ball":
        d = spec.size
        s = (d + 1) * beta
        return math.exp(math.lgamma(d + s + 1) - math.lgamma(s + 1) - math.lgamma(d + 1))
    return (2.0 * beta + 1.0) ** spec.size


def weighted_volume(spec: DomainSpec, beta: float) -> float:
    """Closed-form Vol_beta(U) = integral of K(w,w)^-beta over U."""
    return spec.volume() ** (1.0 + beta) / weight_constant(spec, beta)


def weighted_kernel(spec: DomainSpec, wp: WeightParams, z, w) -> np.ndarray:
    """K^(beta)(z, w) = c_beta K(z, w)^(1+beta), principal branch on the base factors."""
    check_beta(spec, wp.beta)
    return wp.c_beta * np.exp((1.0 + wp.beta) * log_kernel(spec, z, w))


def _weighted_kernel(spec, wp, z, w):
    return wp.c_beta * np.exp((1.0 + wp.beta) * _log_kernel(spec, z, w))


def normalized_kernel(spec: DomainSpec, wp: WeightParams, z, w) -> np.ndarray:
    """k_z^(beta)(w) = K^(beta)(w, z) / sqrt(K^(beta)(z, z)), anchored at ``z``."""
    check_beta(spec, wp.beta)
    z = check_inside(spec, z)
    w = check_inside(spec, w)
    return _normalized_kernel(spec, wp, z, w)


def _normalized_kernel(spec, wp, z, w):
    num = (1.0 + wp.beta) * (_log_kernel(spec, w, z) - 0.5 * _log_kernel_diag(spec, z))
    return math.sqrt(wp.c_beta) * np.exp(num)


def _abs2_normalized_kernel(spec, wp, z, w):
    """|k_z^(beta)(w)|^2 through real logs."""
    lk = _log_kernel(spec, w, z).real
    return wp.c_beta * np.exp((1.0 + wp.beta) * (2.0 * lk - _log_kernel_diag(spec, z)))


# ---------------------------------------------------------------------------
# Cayley transform onto the Siegel domain
# ---------------------------------------------------------------------------

def cayley(spec: DomainSpec, z):
    """Map into the Siegel domain, returning ``(image, jac_det)``.

    Disk factor: w = i(1+z)/(1-z), derivative 2i/(1-z)^2; the polydisk works
    coordinatewise.  Ball: (xi, eta) = (i(1+z_1)/(1-z_1), z'/(1-z_1)) onto
    {Im xi > |eta|^2}, with determinant 2i/(1-z_1)^(d+1).
    """
    if spec.kind not in ("ball", "polydisk"):
        raise UnsupportedDomain(f"no Cayley map implemented for {spec}")
    z = check_inside(spec, z)
    return _cayley(spec, z)


def _cayley(spec, z):
    if spec.kind == "polydisk":
        one_minus = 1.0 - z
        image = 1j * (1.0 + z) / one_minus
        return image, np.prod(2j / one_minus ** 2, axis=-1)
    d = spec.size
    z1 = z[..., 0]
    one_minus = 1.0 - z1
    image = np.empty_like(z)
    image[..., 0] = 1j * (1.0 + z1) / one_minus
    image[..., 1:] = z[..., 1:] / one_minus[..., None]
    return image, 2j / one_minus ** (d + 1)


def _log_cayley_det(spec, z):
    """Holomorphic branch of log det J(Phi, z): log 2 + i pi/2 - k log(1 - z)."""
    c = math.log(2.0) + 0.5j * math.pi
    if spec.kind == "polydisk":
        return np.sum(c - 2.0 * np.log(1.0 - z), axis=-1)
    return c - (spec.size + 1) * np.log(1.0 - z[..., 0])


def _log_abs_cayley_det(spec, z):
    if spec.kind == "polydisk":
        return np.sum(math.log(2.0) - 2.0 * np.log(np.abs(1.0 - z)), axis=-1)
    return math.log(2.0) - (spec.size + 1) * np.log(np.abs(1.0 - z[..., 0]))


# ---------------------------------------------------------------------------
# automorphisms
# ---------------------------------------------------------------------------

def _ball_involution(a: np.ndarray, z: np.ndarray):
    """Involutive automorphism phi_a of the ball (phi_a(0) = a, phi_a(a) = 0).

    Returns the image and det J(phi_a, z) = (-1)^d (1-|a|^2)^((d+1)/2) / (1-<z,a>)^(d+1).
    """
    d = z.shape[-1]
    a2 = sq_norm(a)
    za = inner(z, a)
    denom = 1.0 - za
    if np.all(a2 == 0):
        image = -z + 0.0 * a
    else:
        # project onto the unit direction of a; rescaling first avoids underflow
        scale = np.max(np.abs(a), axis=-1, keepdims=True)
        u = a / np.where(scale == 0, 1.0, scale)
        u = u / np.where(scale == 0, 1.0, np.linalg.norm(u, axis=-1, keepdims=True))
        proj = inner(z, u)[..., None] * u
        s = np.sqrt(1.0 - a2)[..., None]
        image = (a - proj - s * (z - proj)) / denom[..., None]
    det = (-1) ** d * (1.0 - a2) ** ((d + 1) / 2.0) / denom ** (d + 1)
    return image, det


def _polydisk_involution(a: np.ndarray, z: np.ndarray):
    denom = 1.0 - np.conj(a) * z
    image = (a - z) / denom
    det = np.prod(-(1.0 - np.abs(a) ** 2) / denom ** 2, axis=-1)
    return image, det


def involution(spec: DomainSpec, a, z):
    """The involutive automorphism exchanging ``a`` and 0, with its Jacobian determinant."""
    a = np.asarray(a, dtype=complex)
    z = np.asarray(z, dtype=complex)
    if spec.kind == "ball":
        return _ball_involution(a, z)
    if spec.kind == "polydisk":
        return _polydisk_involution(a, z)
    raise UnsupportedDomain(f"no automorphisms implemented for {spec}")


def ball_automorphism(a, z):
    """Mobius automorphism of the unit ball sending ``a`` to 0.

    Uses the convention (z - a)/(1 - conj(a) z) on the disk, so ``a = 0`` gives
    the identity; it is minus the usual involution, hence maps 0 to -a.
    Returns ``(image, jac_det)``.
    """
    a = as_points(a)
    z = as_points(z, a.shape[-1])
    spec = DomainSpec.ball(a.shape[-1])
    check_inside(spec, a, "automorphism parameter")
    check_inside(spec, z)
    image, det = _ball_involution(a, z)
    return -image, (-1) ** a.shape[-1] * det
