import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergcomp import compop
from bergcomp.compop import (
    BOUNDED_ONLY,
    COMPACT_CONSISTENT,
    INCONCLUSIVE,
    NOT_COMPACT,
    UNBOUNDED_SUSPECTED,
    adjoint_norm_check,
    averaging_pullback,
    berezin_pullback,
    boundedness_bound,
    decide_verdict,
    default_depths,
    diagnose,
    f_r_beta,
    kernel_ratio,
    preimage_anchors,
    pullback_functionals,
    shell_points,
    validate_self_map,
)
from bergcomp.domains import DomainSpec, WeightParams
from bergcomp.errors import ImageOutsideDomain, ParameterOutOfRange, PointOutsideDomain
from bergcomp.maps import parse_map
from bergcomp.sampling import McConfig, substream

DISK = DomainSpec.disk()
BIDISK = DomainSpec.polydisk(2)
BALL2 = DomainSpec.ball(2)
RHO1 = math.tanh(1 / math.sqrt(2))  # Euclidean radius of the disk metric ball B(0, 1)


def wp(spec, beta):
    return WeightParams.for_domain(spec, beta)


# ---------------------------------------------------------------- shells


def test_default_depths_and_shell_points():
    d = default_depths(8)
    assert d[0] == 0.5 and d[-1] == pytest.approx(1e-4)
    assert np.all(np.diff(d) < 0)
    rng = substream(0, (1,))
    for spec in (DISK, BALL2, BIDISK, DomainSpec.polydisk(3)):
        pts = shell_points(spec, 0.01, 50, rng)
        assert pts.shape == (50, spec.dimension)
        if spec.kind == "ball":
            assert np.allclose(np.linalg.norm(pts, axis=1), 0.99)
        else:
            assert np.allclose(np.max(np.abs(pts), axis=1), 0.99)


# ---------------------------------------------------------------- validation


def test_validation_examples():
    mc = McConfig(samples=5000)
    rep = validate_self_map(DISK, parse_map("z1", 1), mc)
    assert rep.passed and rep.witness is None and "not prove" in rep.disclaimer
    assert validate_self_map(DISK, parse_map("z1^2", 1), mc).passed
    rep = validate_self_map(DISK, parse_map("z1*2", 1), mc)
    assert not rep.passed
    assert 0.5 - 1e-12 <= abs(rep.witness[0]) <= 0.6
    assert abs(rep.image[0]) >= 1 - 1e-12
    d = rep.to_dict()
    assert d["passed"] is False and d["witness"] and d["image"]


@pytest.mark.parametrize("spec,text,ok", [
    (BALL2, "z1, z2", True),
    (BALL2, "z2, z1", True),
    (BALL2, "z1*z2, 0", True),
    (BALL2, "z1 + z2, 0", False),
    (BIDISK, "z1*z2, z2^3", True),
    (BIDISK, "(z1 + z2)/2, z1", True),
    (BIDISK, "z1 + z2/2, 0", False),
    (DISK, "(1 + z1)/2", True),
    (DISK, "1/z1", False),
    (DISK, "1/(z1 - 2)", True),
])
def test_validation_cases(spec, text, ok):
    assert validate_self_map(spec, parse_map(text, spec.dimension), McConfig(samples=5000)).passed is ok


def test_validation_witness_for_pole():
    rep = validate_self_map(DISK, parse_map("1/z1", 1), McConfig(samples=100))
    assert rep.witness[0] == 0 and not np.isfinite(rep.image[0])


def test_arity_mismatch():
    with pytest.raises(ParameterOutOfRange):
        validate_self_map(BIDISK, parse_map("z1", 1))


# ---------------------------------------------------------------- kernel ratio


def test_kernel_ratio_examples():
    assert kernel_ratio(DISK, parse_map("0", 1), [0.9]) == pytest.approx(0.0361, rel=1e-12)
    assert kernel_ratio(BIDISK, parse_map("z1, 0", 2), [0.99, 0.5]) == pytest.approx(0.5625, rel=1e-12)
    z = np.array([[0.1], [0.5j], [-0.999]])
    assert np.allclose(kernel_ratio(DISK, parse_map("z1", 1), z), 1, rtol=1e-12)
    assert np.allclose(kernel_ratio(BALL2, parse_map("z1, z2", 2), [[0.6, 0.7j]]), 1, rtol=1e-12)
    x = np.abs(z[:, 0]) ** 2
    want = ((1 - x) / (1 - x / 4)) ** 2
    assert np.allclose(kernel_ratio(DISK, parse_map("z1/2", 1), z), want, rtol=1e-12)


def test_kernel_ratio_errors():
    with pytest.raises(ImageOutsideDomain):
        kernel_ratio(DISK, parse_map("z1*2", 1), [0.6])
    with pytest.raises(PointOutsideDomain):
        kernel_ratio(DISK, parse_map("z1", 1), [1.0])


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 0.999), st.floats(0, 6.3), st.floats(0.01, 0.99))
def test_kernel_ratio_scaling_is_monotone(r, theta, c):
    # |cz| < |z| so the ratio is at most 1, and it grows with c
    z = [r * np.exp(1j * theta)]
    a = kernel_ratio(DISK, parse_map(repr(c) + "*z1", 1), z)
    b = kernel_ratio(DISK, parse_map(repr(min(c + 0.005, 1.0)) + "*z1", 1), z)
    assert 0 < a <= 1 + 1e-12 and a <= b + 1e-12


# ---------------------------------------------------------------- boundedness


@pytest.mark.parametrize("text", ["z1", "0", "z1/2"])
def test_boundedness_examples(text):
    b = boundedness_bound(DISK, parse_map(text, 1), 8, McConfig(samples=2000), points_per_shell=256)
    assert b.sup_ratio == pytest.approx(1.0, rel=1e-12)
    assert not b.unbounded_suspected
    if text != "z1":
        assert b.argmax[0] == 0


def test_boundedness_projection_and_profile():
    b = boundedness_bound(BIDISK, parse_map("z1, 0", 2), 6, McConfig(samples=2000))
    assert b.sup_ratio == pytest.approx(1.0, abs=1e-9)
    assert min(b.shell_maxima) > 0.99
    assert b.depths == sorted(b.depths, reverse=True)
    assert set(b.to_dict()) == {"sup_ratio", "argmax", "depths", "shell_maxima", "unbounded_suspected"}


def test_growing_detector():
    assert compop._growing([1, 5, 50, 500])
    assert not compop._growing([1, 1, 1, 1])
    assert not compop._growing([1, 50, 20, 30])
    assert not compop._growing([1, 2])


# ---------------------------------------------------------------- adjoint norm


def test_adjoint_examples():
    mc = McConfig(samples=200_000)
    c = adjoint_norm_check(DISK, wp(DISK, 0.0), parse_map("z1^2", 1), [0.5], mc)
    assert c.closed_side == pytest.approx(0.64, rel=1e-12)
    assert c.rel_deviation < 0.05
    c = adjoint_norm_check(DISK, wp(DISK, 1.0), parse_map("0", 1), [0.9], mc)
    assert c.closed_side == pytest.approx(0.00130321, rel=1e-12)
    assert c.rel_deviation < 0.05
    c = adjoint_norm_check(DISK, wp(DISK, 0.5), parse_map("z1", 1), [0.3j], mc)
    assert c.closed_side == pytest.approx(1.0)
    assert set(c.to_dict()) == {"mc_side", "closed_side", "rel_deviation"}


ADJ_GRID = [
    (DISK, "z1", [0.7]), (DISK, "z1^2", [0.9j]), (DISK, "0", [0.3]), (DISK, "(z1 + 1)/2", [-0.6]),
    (BIDISK, "z2, z1", [0.9, 0.2]), (BIDISK, "z1*z2, 0", [0.5, 0.5j]),
    (BALL2, "z1, 0", [0.3, 0.7]), (BALL2, "z2/2, z1^2", [0.6, 0.6]),
]


@pytest.mark.parametrize("beta", [0.0, 1.0])
@pytest.mark.parametrize("spec,text,z", ADJ_GRID)
def test_adjoint_identity_within_three_sigma(spec, text, z, beta):
    c = adjoint_norm_check(spec, wp(spec, beta), parse_map(text, spec.dimension), z,
                           McConfig(samples=100_000, seed=3))
    assert abs(c.mc_side.value - c.closed_side) <= 3 * c.mc_side.std_error + 1e-12 * c.closed_side


# ---------------------------------------------------------------- pull-back functionals


MC = McConfig(samples=100_000)


@pytest.mark.parametrize("z", [[0.0], [0.5], [0.9j], [-0.99]])
@pytest.mark.parametrize("beta", [0.0, 1.0])
def test_identity_fixed_points(z, beta):
    est = pullback_functionals(DISK, wp(DISK, beta), parse_map("z1", 1), z, 1.0, MC)
    assert abs(est.mu_tilde.value - 1) <= 4 * est.mu_tilde.std_error + 1e-12
    assert abs(est.mu_hat.value - 1) <= 4 * est.mu_hat.std_error + 1e-12
    assert est.f_r_beta.value <= 1


@pytest.mark.parametrize("beta", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("x", [0.0, 0.5, 0.9])
def test_constant_map_berezin_closed_form(beta, x):
    # |k_z(0)|^2 Vol_beta(U) = (1 - |z|^2)^(2 + 2 beta) on the disk
    est = berezin_pullback(DISK, wp(DISK, beta), parse_map("0", 1), [x * 1j], MC)
    want = (1 - x * x) ** (2 + 2 * beta)
    assert abs(est.value - want) < 4 * est.std_error + 1e-12


@pytest.mark.parametrize("beta", [0.0, 1.0])
@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_constant_map_averaging_at_origin(beta, r):
    # Vol_beta(U) / Vol_beta(B(0, r)) with B(0, r) the disk of radius tanh(r / sqrt 2)
    est = averaging_pullback(DISK, wp(DISK, beta), parse_map("0", 1), [0.0], r, MC)
    rho2 = math.tanh(r / math.sqrt(2)) ** 2
    want = 1 / (1 - (1 - rho2) ** (2 * beta + 1))
    assert abs(est.value - want) < 4 * est.std_error


def test_constant_map_far_from_origin():
    phi = parse_map("0", 1)
    assert averaging_pullback(DISK, wp(DISK, 0.0), phi, [0.95], 1.0, MC).value == 0
    assert f_r_beta(DISK, wp(DISK, 0.0), phi, [0.95], 1.0, MC).value == 0


def test_identity_f_at_origin():
    est = f_r_beta(DISK, wp(DISK, 0.0), parse_map("z1", 1), [0.0], 1.0, McConfig(samples=400_000))
    assert abs(est.value - RHO1 ** 2) < 4 * est.std_error


def test_squaring_berezin_limit():
    # the pull-back of dA under z^2 is dA / (2|w|), so mu_tilde -> 1/2 at the boundary
    est = berezin_pullback(DISK, wp(DISK, 0.0), parse_map("z1^2", 1), [0.999], MC)
    assert abs(est.value - 0.5) < 4 * est.std_error + 0.01


def test_preimage_anchors_find_every_branch():
    a = preimage_anchors(DISK, parse_map("z1^2", 1), [0.81])
    assert len(a) == 2
    assert sorted(np.round(a[:, 0].real, 6)) == [-0.9, 0.9]
    a = preimage_anchors(DISK, parse_map("z1", 1), [0.3j])
    assert len(a) == 1 and a[0, 0] == 0.3j


MAPS = {DISK: ["z1", "0", "z1^2", "z1/2", "(z1 + 1)/2", "z1^3*0.5 + 0.5*z1^2"],
        BIDISK: ["z1, 0", "z2, z1", "z1*z2, z2^2"],
        BALL2: ["z1, z2", "z1^2, 0"]}


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([(s, m) for s, ms in MAPS.items() for m in ms]),
       st.floats(0.0, 0.999), st.floats(0, 6.3), st.sampled_from([0.0, 1.0]),
       st.sampled_from([0.5, 1.0, 2.0]))
def test_f_never_exceeds_mu_tilde(case, rad, theta, beta, r):
    spec, text = case
    z = np.full(spec.dimension, rad * np.exp(1j * theta) / math.sqrt(spec.dimension))
    est = pullback_functionals(spec, wp(spec, beta), parse_map(text, spec.dimension), z, r,
                               McConfig(samples=2000))
    assert 0 <= est.f_r_beta.value <= est.mu_tilde.value
    assert est.mu_hat.value >= 0


@pytest.mark.parametrize("text", ["z1^2", "(z1 + 1)/2", "z1"])
def test_carleson_constant_is_stable(text):
    # mu_hat / mu_tilde stays bounded across shells
    phi = parse_map(text, 1)
    ratios = []
    for t in (0.5, 0.1, 0.01, 0.001):
        est = pullback_functionals(DISK, wp(DISK, 0.0), phi, [1 - t], 1.0, MC)
        ratios.append(est.mu_hat.value / est.mu_tilde.value)
    assert all(math.isfinite(x) and x > 0 for x in ratios)
    assert max(ratios) < 10
    assert max(ratios[1:]) / min(ratios[1:]) < 1.5


def test_pullback_errors():
    with pytest.raises(ParameterOutOfRange):
        pullback_functionals(DISK, wp(DISK, 0.0), parse_map("z1", 1), [0.2], 0.0)
    with pytest.raises(ImageOutsideDomain):
        pullback_functionals(DISK, wp(DISK, 0.0), parse_map("z1*2", 1), [0.2], 1.0, McConfig(samples=1000))


# ---------------------------------------------------------------- verdicts


@pytest.mark.parametrize("maxima,sup,gap,want", [
    ([1, 1, 1, 1], 1.0, True, NOT_COMPACT),
    ([0.5, 0.1, 0.01, 0.001], 1.0, True, COMPACT_CONSISTENT),
    ([0.5, 0.1, 0.01, 0.001], 1.0, False, BOUNDED_ONLY),
    ([0.5, 0.3, 0.26, 0.25], 1.0, True, INCONCLUSIVE),
    ([0.5, 0.1, 0.2, 0.01], 1.0, True, INCONCLUSIVE),
    ([1, 5, 50, 500], 500.0, True, UNBOUNDED_SUSPECTED),
    ([1, 1], math.inf, True, UNBOUNDED_SUSPECTED),
    ([0.9, 0.6, 0.5], 1.0, True, INCONCLUSIVE),
    ([0.9, 0.55, 0.52], 1.0, True, NOT_COMPACT),
])
def test_decide_verdict(maxima, sup, gap, want):
    assert decide_verdict(maxima, sup, gap) == want


def test_decide_verdict_thresholds():
    assert decide_verdict([0.2, 0.1, 0.09], 1.0, True) == INCONCLUSIVE
    assert decide_verdict([0.2, 0.1, 0.09], 1.0, True, theta_lo=0.095) == COMPACT_CONSISTENT
    assert decide_verdict([0.3, 0.3], 1.0, True, theta_hi=0.25) == NOT_COMPACT


VMC = McConfig(samples=20_000)


@pytest.mark.parametrize("spec,text,want", [
    (DISK, "0", COMPACT_CONSISTENT),
    (DISK, "z1/2", COMPACT_CONSISTENT),
    (DISK, "z1", NOT_COMPACT),
    (BALL2, "z1, z2", NOT_COMPACT),
    (BIDISK, "z1, 0", NOT_COMPACT),
    (DISK, "z1^2", INCONCLUSIVE),
])
def test_verdict_examples(spec, text, want):
    rep = diagnose(spec, parse_map(text, spec.dimension), 0.0, 1.0, 6, 1.0, VMC, points_per_shell=2)
    assert rep.verdict == want
    depths = [s.depth for s in rep.shell_profile]
    assert all(a > b for a, b in zip(depths, depths[1:]))
    for s in rep.shell_profile:
        assert min(s.max_ratio, s.mean_mu_hat, s.mean_mu_tilde, s.mean_f) >= 0
    assert math.isfinite(rep.carleson_constant)


def test_identity_report_fixed_points():
    rep = diagnose(DISK, parse_map("z1", 1), 0.0, 1.0, 4, 1.0, McConfig(samples=80_000),
                   points_per_shell=2)
    for s in rep.shell_profile:
        assert s.max_ratio == pytest.approx(1.0)
        assert s.mean_mu_tilde == pytest.approx(1.0, rel=0.05)
        assert s.mean_mu_hat == pytest.approx(1.0, rel=0.1)
        assert s.mean_f <= s.mean_mu_tilde


def test_scaling_monotonicity():
    deep = []
    for c in (0.3, 0.6, 0.9):
        rep = diagnose(DISK, parse_map(f"{c}*z1", 1), 0.0, 1.0, 6, 1.0, McConfig(samples=4000),
                       points_per_shell=1)
        assert rep.verdict == COMPACT_CONSISTENT
        deep.append(rep.shell_profile[-1].max_ratio)
    assert deep == sorted(deep)


@pytest.mark.parametrize("text", ["0", "z1", "z1/2"])
def test_verdict_is_radius_insensitive(text):
    verdicts = {diagnose(DISK, parse_map(text, 1), 0.0, 1.0, 5, r, McConfig(samples=4000),
                         points_per_shell=1).verdict for r in (0.5, 1.0, 2.0)}
    assert len(verdicts) == 1


def test_diagnose_parameter_errors():
    phi = parse_map("z1", 1)
    with pytest.raises(ParameterOutOfRange, match="beta_min"):
        diagnose(DISK, phi, -0.5, 1.0)
    with pytest.raises(ParameterOutOfRange, match="beta >= beta0"):
        diagnose(DISK, phi, 0.5, 0.2)
    with pytest.raises(ImageOutsideDomain):
        diagnose(DISK, parse_map("z1*2", 1), 0.0, 1.0, 3, 1.0, McConfig(samples=1000))


def test_gap_not_met_gives_bounded_only():
    rep = diagnose(DISK, parse_map("0", 1), 0.0, 0.0, 4, 1.0, McConfig(samples=2000),
                   points_per_shell=1)
    assert rep.verdict == BOUNDED_ONLY
    assert any("beta_int" in n for n in rep.notes)
    rep = diagnose(DISK, parse_map("0", 1), 0.0, 0.1, 4, 1.0,
                   McConfig(samples=2000), points_per_shell=1)
    assert rep.verdict == COMPACT_CONSISTENT


def test_report_dict_shape():
    rep = diagnose(DISK, parse_map("0", 1), 0.0, 1.0, 3, 1.0, McConfig(samples=2000),
                   points_per_shell=1)
    d = rep.to_dict()
    assert list(d) == ["beta0", "beta", "radius", "sup_ratio", "shell_profile", "carleson_constant",
                       "thresholds", "verdict", "notes"]
    assert set(d["shell_profile"][0]) == {"depth", "max_ratio", "mean_mu_hat", "mean_mu_tilde", "mean_F"}
