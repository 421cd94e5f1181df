import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergcomp import mc as mcmod
from bergcomp.domains import DomainSpec, WeightParams, _abs2_normalized_kernel, weighted_volume
from bergcomp.errors import NonFiniteIntegrand, ParameterOutOfRange, UnsupportedDomain
from bergcomp.mc import (
    CONSTANT_CONSISTENT,
    DIVERGENCE_SUSPECTED,
    coefficient_of_variation,
    bump_norm,
    integrate_weighted,
    lp_norm_prediction,
    lp_test_function,
    monomials,
    polynomial,
    verify_identity,
    verify_reproducing,
)
from bergcomp.sampling import (
    AnchoredSampler,
    McConfig,
    McEstimate,
    ShellSampler,
    UniformSampler,
    estimate,
    iter_uniform,
    sample_uniform,
    stream_key,
)

DISK = DomainSpec.disk()
BIDISK = DomainSpec.polydisk(2)


# ---------------------------------------------------------------- config and sampling


@pytest.mark.parametrize("kwargs", [dict(samples=0), dict(workers=0), dict(tolerance=0.0),
                                    dict(seed=-1), dict(seed=2 ** 64)])
def test_mcconfig_validation(kwargs):
    with pytest.raises(ValueError):
        McConfig(**kwargs)


def test_uniform_disk_second_moment():
    z = sample_uniform(DISK, McConfig(samples=1_000_000))
    x = np.abs(z[:, 0]) ** 2
    se = x.std(ddof=1) / math.sqrt(len(x))
    assert abs(x.mean() - 0.5) < 3 * se


def test_uniform_ball_radial_cdf():
    spec = DomainSpec.ball(2)
    z = sample_uniform(spec, McConfig(samples=200_000, seed=3))
    inside = (np.linalg.norm(z, axis=1) < 2 ** -0.25).astype(float)
    se = inside.std(ddof=1) / math.sqrt(len(inside))
    assert abs(inside.mean() - 0.5) < 3 * se


def test_uniform_polydisk_coordinates_independent():
    z = sample_uniform(DomainSpec.polydisk(3), McConfig(samples=200_000, seed=8))
    r2 = np.abs(z) ** 2
    assert np.allclose(r2.mean(axis=0), 0.5, atol=0.005)
    assert abs(np.corrcoef(r2[:, 0], r2[:, 1])[0, 1]) < 0.01


def test_uniform_determinism():
    a = sample_uniform(BIDISK, McConfig(samples=100, seed=5))
    b = sample_uniform(BIDISK, McConfig(samples=100, seed=5))
    c = sample_uniform(BIDISK, McConfig(samples=100, seed=6))
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    # chunk i depends only on (seed, i)
    first = next(iter_uniform(BIDISK, McConfig(samples=200_000, seed=5, chunk_size=1000)))
    alone = sample_uniform(BIDISK, McConfig(samples=1000, seed=5, chunk_size=1000))
    assert np.array_equal(first, alone)


def test_sample_uniform_unsupported():
    with pytest.raises(UnsupportedDomain):
        sample_uniform(DomainSpec.vinberg(), McConfig(samples=10))


@pytest.mark.parametrize("spec", [DISK, DomainSpec.ball(3), BIDISK, DomainSpec.polydisk(3)])
def test_samplers_are_unbiased_for_volume(spec):
    one = lambda w: np.ones(len(w))
    mc = McConfig(samples=200_000, seed=2)
    anchor = np.full(spec.dimension, 0.9 / math.sqrt(spec.dimension), dtype=complex)
    est = estimate(one, AnchoredSampler(spec, anchor), mc, (1,))
    assert abs(est.value - spec.volume()) < 4 * est.std_error
    # shells over [0, 1] tile the domain
    total = sum(estimate(one, ShellSampler(spec, lo, hi), mc, (2, k)).value
                for k, (lo, hi) in enumerate([(0.5, 1.0), (0.1, 0.5), (0.0, 0.1)]))
    assert total == pytest.approx(spec.volume(), rel=0.01)


def test_estimate_is_worker_and_chunk_stable():
    f = lambda w: np.abs(w[:, 0]) ** 3
    key = stream_key("t")
    a = estimate(f, UniformSampler(DISK), McConfig(samples=100_000, chunk_size=4096), key)
    b = estimate(f, UniformSampler(DISK), McConfig(samples=100_000, chunk_size=4096, workers=4), key)
    assert a == b


def test_estimate_multi_column_and_complex():
    f = lambda w: np.stack([w[:, 0], np.abs(w[:, 0]) ** 2], axis=1)
    est = estimate(f, UniformSampler(DISK), McConfig(samples=50_000), (3,))
    assert isinstance(est, list) and len(est) == 2
    assert abs(est[1].value.imag) == 0 and est[1].value.real == pytest.approx(math.pi / 2, rel=0.01)
    d = est[0].to_dict()
    assert set(d["value"]) == {"re", "im"}


def test_nonfinite_integrand_reports_witness():
    f = lambda w: np.where(np.abs(w[:, 0]) > 0.99, np.inf, 1.0)
    with pytest.raises(NonFiniteIntegrand) as exc:
        estimate(f, UniformSampler(DISK), McConfig(samples=20_000), (4,))
    assert abs(exc.value.witness[0]) > 0.99


def test_standard_error_scaling():
    f = lambda w: np.abs(w[:, 0]) ** 2
    ratios = []
    for rep in range(5):
        se1 = estimate(f, UniformSampler(DISK), McConfig(samples=20_000, seed=rep), (5,)).std_error
        se2 = estimate(f, UniformSampler(DISK), McConfig(samples=40_000, seed=rep), (5,)).std_error
        ratios.append(se1 / se2)
    assert np.mean(ratios) == pytest.approx(math.sqrt(2), rel=0.05)


# ---------------------------------------------------------------- weighted integration


def test_integrate_weighted_examples():
    mc = McConfig(samples=400_000)
    one = lambda w: np.ones(len(w))
    assert integrate_weighted(DISK, 0.0, one, mc).value == pytest.approx(math.pi, rel=1e-12)
    v1 = integrate_weighted(DISK, 1.0, one, mc)
    assert v1.value == pytest.approx(math.pi ** 2 / 3, rel=0.01)
    for beta in (0.0, 0.5, 2.0):
        wp = WeightParams.for_domain(BIDISK, beta)
        k0 = lambda w: _abs2_normalized_kernel(BIDISK, wp, np.zeros(2), w)
        assert integrate_weighted(BIDISK, wp, k0, mc).value == pytest.approx(1.0, rel=0.01)


@pytest.mark.parametrize("spec,z", [(DISK, [0.7]), (DomainSpec.ball(2), [0.5, 0.6j]),
                                    (BIDISK, [0.9, -0.5])])
@pytest.mark.parametrize("beta", [0.0, 1.0])
def test_normalized_kernel_has_unit_norm(spec, z, beta):
    wp = WeightParams.for_domain(spec, beta)
    z = np.array(z, dtype=complex)
    f = lambda w: _abs2_normalized_kernel(spec, wp, z, w)
    est = integrate_weighted(spec, wp, f, McConfig(samples=200_000), anchor=z)
    assert abs(est.value - 1.0) < max(4 * est.std_error, 1e-3)


@pytest.mark.parametrize("spec", [DISK, DomainSpec.ball(3), BIDISK])
# finite variance needs the weight exponent above -1/2
@pytest.mark.parametrize("beta", [-0.1, 0.5, 1.5])
def test_weighted_volume_closed_form_vs_mc(spec, beta):
    one = lambda w: np.ones(len(w))
    est = integrate_weighted(spec, beta, one, McConfig(samples=400_000))
    assert abs(est.value - weighted_volume(spec, beta)) < 4 * est.std_error


# ---------------------------------------------------------------- integral identity


# gaps alpha - beta <= 1/2 give infinite variance near the Cayley pole
GRID = [(b + g, b) for b in (0.0, 0.25, 1.0) for g in (0.75, 1.0, 2.0)]


@pytest.mark.parametrize("spec", [DISK, BIDISK])
@pytest.mark.parametrize("alpha,beta", GRID)
def test_identity_constancy_grid(spec, alpha, beta):
    rep = verify_identity(spec, alpha, beta, mc=McConfig(samples=200_000))
    assert rep.verdict == CONSTANT_CONSISTENT
    assert rep.coefficient_of_variation <= 0.03
    assert len(rep.ratios) == len(rep.probe_points) == 5


@pytest.mark.parametrize("alpha,beta", [(0.5, 0.0), (1.0, 0.0), (1.0, -0.2)])
def test_identity_on_ball(alpha, beta):
    rep = verify_identity(DomainSpec.ball(2), alpha, beta, mc=McConfig(samples=200_000))
    assert rep.verdict == CONSTANT_CONSISTENT


def test_identity_unit_constant_for_alpha_one_beta_zero():
    # alpha = 1, beta = 0 reduces to the reproducing identity int |K(z,w)|^2 dV = K(z,z)
    rep = verify_identity(DISK, 1.0, 0.0, mc=McConfig(samples=200_000))
    for r in rep.ratios:
        assert abs(r.value - 1.0) < 4 * r.std_error + 1e-3


def test_identity_refuses_out_of_range():
    with pytest.raises(ParameterOutOfRange, match="alpha"):
        verify_identity(DISK, -0.1, 0.0)
    with pytest.raises(ParameterOutOfRange):
        verify_identity(DISK, 1.0, -0.6)
    with pytest.raises(UnsupportedDomain):
        verify_identity(DomainSpec.vinberg(), 1.0, 0.0)


def test_divergence_probe_flags_divergence():
    rep = verify_identity(DISK, -0.1, 0.0, mc=McConfig(samples=100_000), divergence_probe=True)
    assert rep.verdict == DIVERGENCE_SUSPECTED
    assert len(rep.shell_sums) == 5 * 12
    # per-shell sums of the first probe do not decay
    sums = [e.value for i, lo, hi, e in rep.shell_sums if i == 0]
    assert sums[-1] > 0.5 * sums[5]


def test_divergence_probe_in_range_is_quiet():
    rep = verify_identity(DISK, 1.0, 0.0, mc=McConfig(samples=100_000), divergence_probe=True)
    assert rep.verdict == CONSTANT_CONSISTENT


def test_identity_report_to_dict_fields():
    rep = verify_identity(DISK, 1.0, 0.0, mc=McConfig(samples=10_000))
    d = rep.to_dict()
    assert list(d) == ["alpha", "beta", "probe_points", "ratios", "coefficient_of_variation", "verdict"]


def test_coefficient_of_variation():
    assert coefficient_of_variation([1.0, 1.0, 1.0]) == 0.0
    assert coefficient_of_variation([1.0, 3.0]) == pytest.approx(math.sqrt(2) / 2)
    assert coefficient_of_variation([2.0]) == 0.0


# ---------------------------------------------------------------- Lp test function


def test_bump_norm_matches_identity_stream():
    mc = McConfig(samples=50_000, seed=11)
    z = np.array([0.3])
    rep = verify_identity(DISK, 1.5, 0.25, [z], mc)
    val = bump_norm(DISK, 1.5, 0.25, z, mc)
    assert val.value == pytest.approx(rep.ratios[0].value * lp_norm_prediction(DISK, 1.5, 0.25, z, 1.0),
                                      rel=1e-14)


def test_bump_norm_center_and_boundary_scaling():
    mc = McConfig(samples=400_000)
    v0 = bump_norm(DISK, 1.0, 0.0, [0.0], mc)
    assert 0 < v0.value < math.inf
    rep = verify_identity(DISK, 1.0, 0.0, mc=mc)
    c = float(np.mean([r.value for r in rep.ratios]))
    for zz in (0.9, 0.99):
        got = bump_norm(DISK, 1.0, 0.0, [zz], mc).value
        assert got == pytest.approx(lp_norm_prediction(DISK, 1.0, 0.0, [zz], c), rel=0.1)


@pytest.mark.parametrize("spec", [DISK, BIDISK, DomainSpec.ball(2)])
def test_lp_test_function_modulus_matches_integrand(spec):
    # |g_z|^2 equals the identity integrand with modulus taken first
    alpha, beta = 1.5, 0.25
    z = np.full(spec.dimension, 0.3 + 0.2j) / spec.dimension
    w = sample_uniform(spec, McConfig(samples=50, seed=12))
    g = lp_test_function(spec, alpha, beta, z, w)
    from bergcomp.domains import cayley, kernel

    _, det = cayley(spec, w)
    expected = np.abs(kernel(spec, w, z)) ** (1 + alpha) * np.abs(det) ** (1 + 2 * beta - alpha)
    assert np.allclose(np.abs(g) ** 2, expected, rtol=1e-10)


def test_lp_test_function_is_holomorphic():
    # Cauchy-Riemann via a complex-step comparison in two directions
    spec = DISK
    z = np.array([0.4j])
    w = np.array([[0.2 - 0.5j]])
    h = 1e-6
    f = lambda x: lp_test_function(spec, 1.5, 0.25, z, x)[0]
    dx = (f(w + h) - f(w - h)) / (2 * h)
    dy = (f(w + 1j * h) - f(w - 1j * h)) / (2j * h)
    assert dx == pytest.approx(dy, rel=1e-6)


# ---------------------------------------------------------------- reproducing property


def test_polynomial_and_monomials():
    p = polynomial({(2, 0): 1.0, (0, 1): 2j, (0, 0): -1})
    w = np.array([[0.5, 0.25]])
    assert p(w)[0] == pytest.approx(0.25 + 0.5j - 1)
    mons = monomials(2, 3)
    assert len(mons) == 10 and mons[0] == (0, 0)
    assert all(sum(m) <= 3 for m in mons)


def test_reproducing_examples():
    mc = McConfig(samples=400_000)
    wp0 = WeightParams.for_domain(DISK, 0.0)
    rep = verify_reproducing(DISK, wp0, {(0,): 1.0}, [0.0], mc)
    assert abs(rep.estimate.value - 1) < 4 * rep.estimate.std_error + 1e-12
    rep = verify_reproducing(DISK, wp0, {(1,): 1.0}, [0.5], mc)
    assert rep.rel_error < 0.05
    wp1 = WeightParams.for_domain(DISK, 1.0)
    rep = verify_reproducing(DISK, wp1, {(2,): 1.0}, [0.3 + 0.2j], mc)
    assert rep.expected == pytest.approx((0.3 + 0.2j) ** 2)
    assert rep.rel_error < 0.05


@pytest.mark.parametrize("spec,beta", [(BIDISK, 0.5), (DomainSpec.ball(2), 1.0)])
def test_reproducing_all_monomials_multivariate(spec, beta):
    wp = WeightParams.for_domain(spec, beta)
    z = np.array([0.3 + 0.1j, -0.2j])
    for e in monomials(2, 3):
        rep = verify_reproducing(spec, wp, {e: 1.0}, z, McConfig(samples=100_000))
        assert abs(rep.estimate.value - rep.expected) < 5 * rep.estimate.std_error + 1e-3


def test_reproducing_rejects_high_degree():
    wp = WeightParams.for_domain(DISK, 0.0)
    with pytest.raises(ParameterOutOfRange):
        verify_reproducing(DISK, wp, {(4,): 1.0}, [0.1])


@settings(max_examples=10, deadline=None)
@given(st.floats(-0.4, 2.0), st.floats(0.0, 0.95), st.floats(0.0, 6.3))
def test_reproducing_constant_property(beta, r, theta):
    # p = 1 reproduces exactly in expectation for any admissible weight and point
    wp = WeightParams.for_domain(DISK, beta)
    rep = verify_reproducing(DISK, wp, {(0,): 1.0}, [r * np.exp(1j * theta)], McConfig(samples=20_000))
    assert abs(rep.estimate.value - 1) < 6 * rep.estimate.std_error + 1e-3
