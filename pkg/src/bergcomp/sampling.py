"""Monte Carlo plumbing: substreams, samplers over the domains, chunked estimator.

Every estimate is a sum over fixed-size chunks.  Chunk ``i`` of an estimate
with stream key ``k`` draws from a Philox generator seeded with
``SeedSequence(seed, spawn_key=(*k, i))``, so a chunk's samples depend only
on ``(seed, key, i)``.  Chunks are reduced in index order with the pairwise
(Chan) mean/variance update, which keeps results bit-identical for any
worker count.

A sampler is a callable ``sampler(rng, n) -> (points, inv_density)``; the
estimator returns mean(integrand(points) * inv_density), an unbiased estimate
of the Lebesgue integral of the integrand over the sampler's support.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .domains import DomainSpec, format_point, involution, sq_norm
from .errors import NonFiniteIntegrand, UnsupportedDomain

DEFAULT_CHUNK = 1 << 16
# cap on sampled radii so no point rounds onto the boundary
_RADIUS_CAP = 1.0 - 1e-15


@dataclass(frozen=True)
class McConfig:
    samples: int = 100_000
    seed: int = 0
    workers: int = 1
    tolerance: float = 0.03
    chunk_size: int = DEFAULT_CHUNK

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def with_samples(self, samples: int) -> "McConfig":
        return McConfig(max(1, int(samples)), self.seed, self.workers, self.tolerance, self.chunk_size)


@dataclass(frozen=True)
class McEstimate:
    value: float | complex
    std_error: float
    samples: int
    seed: int

    def to_dict(self) -> dict:
        if isinstance(self.value, complex):
            value = {"re": self.value.real, "im": self.value.imag}
        else:
            value = float(self.value)
        return {"value": value, "std_error": float(self.std_error),
                "samples": int(self.samples), "seed": int(self.seed)}

    @property
    def relative_error(self) -> float:
        return self.std_error / abs(self.value) if self.value else math.inf


# ---------------------------------------------------------------------------
# substreams
# ---------------------------------------------------------------------------

def _key_int(part) -> int:
    if isinstance(part, (int, np.integer)) and not isinstance(part, bool):
        return int(part) & 0xFFFFFFFF
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    if isinstance(part, float):
        return zlib.crc32(repr(part).encode())
    arr = np.ascontiguousarray(np.asarray(part, dtype=complex))
    return zlib.crc32(arr.tobytes())


def stream_key(*parts) -> tuple:
    """Turn tags, integers, floats and points into a SeedSequence spawn key."""
    return tuple(_key_int(p) for p in parts)


def substream(seed: int, key: tuple = ()) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


def _chunk_sizes(total: int, chunk: int) -> list:
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def _disk_points(rng, shape, radius=1.0):
    r = np.minimum(radius * np.sqrt(rng.random(shape)), _RADIUS_CAP)
    theta = 2.0 * math.pi * rng.random(shape)
    return r * np.exp(1j * theta)


def _sphere_directions(rng, n, d):
    g = rng.standard_normal((n, 2 * d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g[:, :d] + 1j * g[:, d:]


def _ball_points(rng, n, d, radius=1.0):
    u = _sphere_directions(rng, n, d)
    r = np.minimum(radius * rng.random(n) ** (1.0 / (2 * d)), _RADIUS_CAP)
    return u * r[:, None]


def euclidean_ball_volume(d: int, radius: float = 1.0) -> float:
    return math.pi ** d * radius ** (2 * d) / math.factorial(d)


def uniform_points(spec: DomainSpec, rng, n: int) -> np.ndarray:
    if spec.kind == "ball":
        return _ball_points(rng, n, spec.size)
    if spec.kind == "polydisk":
        return _disk_points(rng, (n, spec.size))
    raise UnsupportedDomain(f"{spec} is not samplable")


def _clip_inside(spec, w):
    # transported points can round onto the boundary; pull them back
    if spec.kind == "ball":
        r = np.sqrt(sq_norm(w))
        bad = r >= _RADIUS_CAP
        if np.any(bad):
            w[bad] *= (_RADIUS_CAP / r[bad])[:, None]
    else:
        r = np.abs(w)
        bad = r >= _RADIUS_CAP
        if np.any(bad):
            w[bad] *= _RADIUS_CAP / r[bad]
    return w


class UniformSampler:
    """Lebesgue-uniform points on the whole domain."""

    def __init__(self, spec: DomainSpec):
        self.spec = spec
        self.volume = spec.volume()

    def __call__(self, rng, n):
        return uniform_points(self.spec, rng, n), np.full(n, self.volume)


class AnchoredSampler:
    """Defensive mixture of uniform points and uniform points transported to anchors.

    With probability ``mix`` a point is uniform; otherwise it is phi_a(u) for
    uniform u, phi_a the involution exchanging 0 and an anchor a picked
    uniformly from ``anchor`` (one point or a ``(k, d)`` array).  Each
    transported component has density |det J(phi_a, w)|^2 / Vol(U), which
    puts a fixed share of the mass into every Bergman ball around each anchor
    however close it sits to the boundary.
    """

    def __init__(self, spec: DomainSpec, anchor, mix: float = 0.5):
        self.spec = spec
        self.anchors = np.asarray(anchor, dtype=complex).reshape(-1, spec.dimension)
        self.anchor = self.anchors[0]
        self.mix = float(mix)
        self.volume = spec.volume()

    def __call__(self, rng, n):
        u = uniform_points(self.spec, rng, n)
        if self.mix >= 1.0 or not np.any(self.anchors):
            return u, np.full(n, self.volume)
        keep = rng.random(n) < self.mix
        k = len(self.anchors)
        pick = rng.integers(0, k, n) if k > 1 else np.zeros(n, dtype=int)
        w = u.copy()
        for j, a in enumerate(self.anchors):
            sel = ~keep & (pick == j)
            if np.any(sel):
                w[sel] = involution(self.spec, a, u[sel])[0]
        w = _clip_inside(self.spec, w)
        jac = np.zeros(n)
        for a in self.anchors:
            jac += np.abs(involution(self.spec, a, w)[1]) ** 2
        q = (self.mix + (1.0 - self.mix) * jac / k) / self.volume
        return w, 1.0 / q


class ShellSampler:
    """Uniform points in the shell ``lo <= boundary distance <= hi``.

    Boundary distance is 1 - |w| on the ball and 1 - max_j |w_j| on the
    polydisk.  The polydisk shell is sampled by choosing the maximal
    coordinate at random and weighting by the exact density.
    """

    def __init__(self, spec: DomainSpec, lo: float, hi: float):
        if not 0 <= lo < hi <= 1:
            raise ValueError("need 0 <= lo < hi <= 1")
        self.spec = spec
        self.r0 = 1.0 - hi
        self.r1 = 1.0 - lo

    def __call__(self, rng, n):
        spec, r0, r1 = self.spec, self.r0, self.r1
        if spec.kind == "ball":
            d = spec.size
            p0, p1 = r0 ** (2 * d), r1 ** (2 * d)
            r = (p0 + rng.random(n) * (p1 - p0)) ** (1.0 / (2 * d))
            r = np.minimum(r, _RADIUS_CAP)
            w = _sphere_directions(rng, n, d) * r[:, None]
            return w, np.full(n, euclidean_ball_volume(d) * (p1 - p0))
        if spec.kind != "polydisk":
            raise UnsupportedDomain(f"{spec} is not samplable")
        m = spec.size
        jstar = rng.integers(0, m, n)
        s = np.minimum(np.sqrt(r0 ** 2 + rng.random(n) * (r1 ** 2 - r0 ** 2)), _RADIUS_CAP)
        lead = s * np.exp(2j * math.pi * rng.random(n))
        w = _disk_points(rng, (n, m)) * s[:, None]
        w[np.arange(n), jstar] = lead
        annulus = math.pi * (r1 ** 2 - r0 ** 2)
        return w, m * annulus * (math.pi * s ** 2) ** (m - 1)


# ---------------------------------------------------------------------------
# estimator
# ---------------------------------------------------------------------------

def _chunk_stats(values):
    n = values.shape[0]
    mean = values.mean(axis=0)
    dev = values - mean
    m2 = np.sum(dev.real ** 2 + dev.imag ** 2, axis=0) if np.iscomplexobj(values) \
        else np.sum(dev ** 2, axis=0)
    return n, mean, m2


def _merge(a, b):
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    delta = mb - ma
    mean = ma + delta * (nb / n)
    d2 = delta.real ** 2 + delta.imag ** 2 if np.iscomplexobj(delta) else delta ** 2
    return n, mean, sa + sb + d2 * (na * nb / n)


def _reduce(stats):
    # deterministic pairwise tree over chunks in index order
    while len(stats) > 1:
        nxt = [_merge(stats[i], stats[i + 1]) for i in range(0, len(stats) - 1, 2)]
        if len(stats) % 2:
            nxt.append(stats[-1])
        stats = nxt
    return stats[0]


def _as_scalar(x):
    x = complex(x) if np.iscomplexobj(x) else float(x)
    return x


def estimate(integrand: Callable, sampler: Callable, mc: McConfig, key: tuple,
             samples: int | None = None):
    """Monte Carlo estimate of the integral of ``integrand`` under ``sampler``.

    ``integrand`` maps an ``(n, d)`` point array to ``(n,)`` or ``(n, k)``
    values; with ``k`` columns a list of ``k`` estimates sharing one sample
    stream is returned.  Real integrands give real estimates.
    """
    total = mc.samples if samples is None else int(samples)
    sizes = _chunk_sizes(total, mc.chunk_size)

    def run(i):
        rng = substream(mc.seed, key + (i,))
        pts, inv = sampler(rng, sizes[i])
        live = inv != 0
        with np.errstate(all="ignore"):
            vals = np.asarray(integrand(pts))
            if vals.ndim == 1:
                weighted = np.where(live, vals * inv, 0.0)
            else:
                weighted = np.where(live[:, None], vals * inv[:, None], 0.0)
        finite = np.isfinite(weighted)
        if not np.all(finite):
            row = np.nonzero(~finite if finite.ndim == 1 else ~finite.all(axis=1))[0][0]
            raise NonFiniteIntegrand(
                f"integrand is not finite at {format_point(pts[row])}", pts[row])
        return _chunk_stats(weighted)

    if mc.workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=mc.workers) as pool:
            stats = list(pool.map(run, range(len(sizes))))
    else:
        stats = [run(i) for i in range(len(sizes))]
    n, mean, m2 = _reduce(stats)
    var = m2 / (n - 1) if n > 1 else np.zeros_like(m2)
    se = np.sqrt(var / n)
    if np.ndim(mean) == 0:
        return McEstimate(_as_scalar(mean), float(se), n, mc.seed)
    return [McEstimate(_as_scalar(mv), float(sv), n, mc.seed) for mv, sv in zip(mean, se)]


def iter_uniform(spec: DomainSpec, mc: McConfig) -> Iterator[np.ndarray]:
    """Yield uniform sample chunks; chunk ``i`` depends only on ``(seed, i)``."""
    key = stream_key("uniform", str(spec))
    for i, size in enumerate(_chunk_sizes(mc.samples, mc.chunk_size)):
        yield uniform_points(spec, substream(mc.seed, key + (i,)), size)


def sample_uniform(spec: DomainSpec, mc: McConfig) -> np.ndarray:
    """``mc.samples`` i.i.d. Lebesgue-uniform points as an ``(n, d)`` array."""
    if "samplable" not in spec.capabilities:
        raise UnsupportedDomain(f"{spec} is not samplable")
    return np.concatenate(list(iter_uniform(spec, mc)), axis=0)
