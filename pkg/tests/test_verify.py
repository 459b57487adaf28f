"""Monte-Carlo verification layer tests.

The double-entry rule: everything sampled is compared against the exact
algebra value at 4 standard errors; everything exact is pinned to a closed
form derived independently in the comments.  The telescoping-integral case
asserts bitwise equality — in binary round-to-nearest, fl(a+b) - a is always
exactly representable, so sequential cumulative sums telescope without error.
"""

import math

import numpy as np
import pytest

from expmart import (
    TimeChange,
    TimeGrid,
    VarianceMismatchError,
    expectation,
    generate,
    make_element,
    make_exponential,
    mul,
    one_element,
    zero_element,
)
from expmart.cli import random_element
from expmart.verify import (
    CenteringFunction,
    Estimate,
    EvaluationOverflowError,
    ProcessElement,
    energy_integral,
    evaluate_element,
    ito_integral,
    lemma2_case,
    mc_expectation,
    pde_grid,
    verify_h1,
    verify_h2,
    verify_isometry,
    verify_l2_limit,
    verify_pde,
    weighted_energy_integral,
)

H_ID = TimeChange.identity()


@pytest.fixture(scope="module")
def big_ens():
    """One N=1e5, M=512 Brownian ensemble shared by the integral checks."""
    return generate(H_ID, TimeGrid.uniform(1.0, 512), 100_000, seed=2026)


@pytest.fixture(scope="module")
def flat_ens():
    """1e6 draws of X_1 (single-step grid) for fixed-time expectations."""
    return generate(H_ID, TimeGrid.uniform(1.0, 1), 1_000_000, seed=7)


# ---------------------------------------------------------------------------
# pointwise evaluation

def test_evaluate_constant():
    assert evaluate_element(one_element(1.0), 3.7) == 1.0


def test_evaluate_exponential_martingale():
    got = evaluate_element(make_exponential(1.0, 1.0), 1.0)
    assert got == pytest.approx(math.exp(0.5), rel=1e-14)


def test_evaluate_coordinate():
    f = make_element(1.0, [(0.0, (0.0, 1.0))])
    assert evaluate_element(f, -2.5) == -2.5


def test_evaluate_vectorized_matches_scalar():
    f = make_element(2.0, [(0.5 - 1j, (1.0, 2.0, 0.5j)), (0.0, (0.0, 1.0))])
    xs = np.linspace(-3, 3, 11)
    vec = evaluate_element(f, xs)
    assert vec.shape == xs.shape
    for x, v in zip(xs, vec):
        assert v == evaluate_element(f, float(x))


def test_evaluate_overflow_is_flagged():
    f = make_exponential(-40.0, 0.0)
    with pytest.raises(EvaluationOverflowError):
        evaluate_element(f, -20.0)  # exponent real part 800


# ---------------------------------------------------------------------------
# estimates

def test_estimate_from_samples():
    e = Estimate.from_samples(np.array([1.0, 2.0, 3.0, 4.0]))
    assert e.mean == 2.5 and e.n == 4
    assert e.stderr == pytest.approx(math.sqrt(np.var([1, 2, 3, 4], ddof=1) / 4))
    assert e.z_against(2.5) == 0.0
    assert e.z_against(3.0) == pytest.approx(0.5 / e.stderr)


def test_exact_estimate_sentinel():
    e = Estimate.exact(2 + 1j)
    assert e.n == 0 and e.stderr == 0.0
    assert e.z_against(2 + 1j) == 0.0
    assert e.z_against(2.0) == math.inf


def test_estimate_rejects_bad_inputs():
    with pytest.raises(ValueError):
        Estimate(mean=1.0, stderr=0.1, n=1)
    with pytest.raises(ValueError):
        Estimate(mean=1.0, stderr=-0.1, n=5)
    with pytest.raises(ValueError):
        Estimate.from_samples(np.array([1.0]))


def test_estimate_flags_sample_overflow():
    vals = np.full(100, 1e200)
    vals[0] = -1e200
    with pytest.raises(EvaluationOverflowError):
        Estimate.from_samples(vals)  # variance of these overflows float64


# ---------------------------------------------------------------------------
# sampled vs exact expectations

def test_mc_expectation_of_martingale_is_one(flat_ens):
    est = mc_expectation(make_exponential(1.0, 1.0), flat_ens)
    assert est.z_against(1.0) <= 4.0


def test_mc_expectation_of_squared_martingale(flat_ens):
    f = mul(make_exponential(1.0, 1.0), make_exponential(1.0, 1.0))
    assert mc_expectation(f, flat_ens).z_against(math.e) <= 4.0


def test_mc_expectation_of_zero_element(flat_ens):
    est = mc_expectation(zero_element(1.0), flat_ens)
    assert est.mean == 0.0 and est.stderr == 0.0 and est.n == flat_ens.n_paths


def test_mc_expectation_checks_variance(flat_ens):
    with pytest.raises(VarianceMismatchError):
        mc_expectation(make_exponential(1.0, 2.0), flat_ens)


def test_mc_matches_exact_expectation_on_random_elements(flat_ens):
    # the central double-entry property, on a tame family (small exponents
    # so the sample estimator has finite-looking tails at this N)
    rng = np.random.default_rng(515)
    for _ in range(12):
        f = random_element(rng, 1.0, max_degree=4, max_terms=2, c_bound=1.0)
        est = mc_expectation(f, flat_ens)
        dev = abs(est.mean - expectation(f))
        assert dev <= 4.0 * est.stderr + 1e-12


# ---------------------------------------------------------------------------
# stochastic integrals

def test_constant_integrand_telescopes_bitwise(big_ens):
    acc = ito_integral(ProcessElement.constant_one(H_ID), big_ens)
    assert np.array_equal(acc.real, big_ens.paths[:, -1])
    assert not acc.imag.any()


def test_zero_integrand_integrates_to_zero(big_ens):
    z = ProcessElement.from_template(H_ID, [(0.0, (0.0,))])
    assert not ito_integral(z, big_ens).any()


def test_isometry_constant_case(big_ens):
    rep = verify_isometry(ProcessElement.constant_one(H_ID), big_ens)
    assert rep.exact == 1.0
    assert rep.passed and rep.z <= 4.0


def test_isometry_coordinate_case(big_ens):
    rep = verify_isometry(ProcessElement.coordinate(H_ID), big_ens)
    assert rep.exact == pytest.approx(0.5, abs=1e-12)  # trapezoid of t is exact
    assert rep.passed


def test_isometry_zero_case(big_ens):
    z = ProcessElement.from_template(H_ID, [(0.0, (0.0,))])
    rep = verify_isometry(z, big_ens)
    assert rep.mc.mean == 0.0 and rep.exact == 0.0 and rep.z == 0.0


def test_energy_integrals_pinned():
    grid = TimeGrid.uniform(1.0, 512)
    assert energy_integral(ProcessElement.constant_one(H_ID), grid) == pytest.approx(1.0, abs=1e-13)
    # E|X_t|^2 h(t) = t^2: composite trapezoid error is h''/12 * T * step^2
    got = weighted_energy_integral(ProcessElement.constant_one(H_ID), grid)
    assert got == pytest.approx(0.5, abs=1e-13)
    got = weighted_energy_integral(ProcessElement.coordinate(H_ID), grid)
    assert got == pytest.approx(1.0 / 3.0, abs=1e-6)


# ---------------------------------------------------------------------------
# time-indexed elements

def test_process_element_rejects_wrong_variance():
    bad = ProcessElement(H_ID, lambda t, q: one_element(q + 1.0))
    with pytest.raises(VarianceMismatchError):
        bad.at(0.5)


def test_process_element_factories():
    assert ProcessElement.constant_one(H_ID).at(0.25) == one_element(0.25)
    el = ProcessElement.exponential(H_ID, 1j).at(0.5)
    assert el == make_exponential(1j, 0.5)
    gt = ProcessElement.exponential(H_ID, 1.0).gauss_transform().at(0.5)
    assert gt == make_exponential(-1j, 0.5)


def test_centered_position_shape():
    y = ProcessElement.constant_one(H_ID).centered_position(CenteringFunction.constant(2.0))
    el = y.at(1.0)  # X - 2 at q = 1
    assert el == make_element(1.0, [(0.0, (-2.0, 1.0))])


def test_centering_function_values():
    assert CenteringFunction.zero()(0.3) == 0.0
    assert CenteringFunction.constant(1.5)(0.3) == 1.5
    pw = CenteringFunction.piecewise_linear([(0.0, 0.0), (1.0, 2.0)])
    assert pw(0.25) == 0.5
    with pytest.raises(ValueError):
        CenteringFunction.piecewise_linear([(0.0, 0.0)])
    with pytest.raises(ValueError):
        CenteringFunction("quadratic")


# ---------------------------------------------------------------------------
# fixed-time inequality (exact factors)

def test_h1_equality_case():
    # Y = 1, zero centerings: both factors are ||X|| = sqrt(q), so
    # LHS = q = RHS exactly
    rep = verify_h1(one_element(1.0), 0.0, 0.0)
    assert rep.passed and rep.lhs_product == 1.0 and rep.rhs == 1.0
    assert rep.slack == 0.0


def test_h1_coordinate_case():
    # Y = X: factors sqrt(E[X^4]) = sqrt(3) twice, LHS 3 against RHS 1
    y = make_element(1.0, [(0.0, (0.0, 1.0))])
    rep = verify_h1(y, 0.0, 0.0)
    assert rep.lhs_product == pytest.approx(3.0, rel=1e-12)
    assert rep.rhs == pytest.approx(1.0, rel=1e-12)
    assert rep.passed


def test_h1_exponential_case():
    # Y = E(1), q = 1: LHS = sqrt(5e) * sqrt(e) = e sqrt(5), RHS = e
    rep = verify_h1(make_exponential(1.0, 1.0), 0.0, 0.0)
    assert rep.rhs == pytest.approx(math.e, rel=1e-12)
    assert rep.lhs_product == pytest.approx(math.e * math.sqrt(5.0), rel=1e-12)
    assert rep.passed


@pytest.mark.parametrize("a, q", [(0.5, 1.0), (1.0, 0.25), (-0.75, 4.0)])
def test_h1_tilted_equality_family(a, q):
    # Y = E(a) with c = 2 a q, c~ = 0 achieves equality: both sides q e^{a^2 q}
    rep = verify_h1(make_exponential(a, q), 2.0 * a * q, 0.0)
    assert abs(rep.slack) <= 1e-9 * max(1.0, rep.rhs)
    assert rep.passed


def test_h1_rejects_mismatched_q():
    with pytest.raises(VarianceMismatchError):
        verify_h1(one_element(1.0), 0.0, 0.0, q=2.0)


def test_h1_holds_on_randomized_family():
    rng = np.random.default_rng(1109)
    failures = []
    for i in range(150):
        q = (0.25, 1.0, 4.0)[i % 3]
        y = random_element(rng, q, max_degree=4, max_terms=2, c_bound=2.0)
        if y.is_zero:
            continue
        c, ct = rng.uniform(-2.0, 2.0, size=2)
        rep = verify_h1(y, c, ct)
        if not rep.passed:
            failures.append((i, rep.case, rep.slack))
    assert failures == []


# ---------------------------------------------------------------------------
# integrated inequality (sampled factors)

def test_h2_equality_case(big_ens):
    # Y = 1, g = g~ = 0: LHS and RHS both 1/2
    rep = verify_h2(ProcessElement.constant_one(H_ID), None, None, big_ens)
    assert rep.rhs == pytest.approx(0.5, abs=1e-12)
    assert abs(rep.lhs_product - 0.5) <= rep.allowance
    assert rep.passed


def test_h2_strict_case(big_ens):
    # Y = X: LHS ~ int 3 t^2 dt = 1, RHS = int t^2 dt = 1/3
    rep = verify_h2(ProcessElement.coordinate(H_ID), None, None, big_ens)
    assert rep.rhs == pytest.approx(1.0 / 3.0, abs=1e-6)
    assert abs(rep.lhs_product - 1.0) <= rep.allowance
    assert rep.passed and rep.slack > 0.5


def test_h2_zero_case(big_ens):
    y = ProcessElement.from_template(H_ID, [(0.0, (0.0,))])
    rep = verify_h2(y, None, None, big_ens)
    assert rep.lhs_product == 0.0 and rep.rhs == 0.0 and rep.passed


def test_h2_reports_refinement_metadata(big_ens):
    rep = verify_h2(ProcessElement.coordinate(H_ID), None, None, big_ens)
    extra = dict(rep.extra)
    assert abs(extra["rhs_refined"] - rep.rhs) <= 1e-6
    assert extra["stat_allowance"] + extra["disc_allowance"] == pytest.approx(rep.allowance)


def _random_centering(rng):
    kind = rng.integers(3)
    if kind == 0:
        return None
    if kind == 1:
        return CenteringFunction.constant(rng.uniform(-1.0, 1.0))
    vals = rng.uniform(-1.0, 1.0, size=3)
    return CenteringFunction.piecewise_linear([(0.0, vals[0]), (0.5, vals[1]), (1.0, vals[2])])


def test_h2_holds_on_randomized_configurations(big_ens):
    # 20 tame (Y, g, g~) draws: small exponents keep the sampled factors
    # well inside the 4-sigma + 10/M allowance regime
    rng = np.random.default_rng(4242)
    failures = []
    for i in range(20):
        n_terms = 1 + int(rng.integers(2))
        terms = []
        for _ in range(n_terms):
            c = complex(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5))
            deg = int(rng.integers(3))
            coeffs = np.round(rng.standard_normal(deg + 1), 3)
            coeffs[-1] = coeffs[-1] if coeffs[-1] != 0 else 0.5
            terms.append((c, tuple(coeffs)))
        y = ProcessElement.from_template(H_ID, terms)
        rep = verify_h2(y, _random_centering(rng), _random_centering(rng), big_ens)
        if not rep.passed:
            failures.append((i, rep.case, rep.slack, rep.allowance))
    assert failures == []


# ---------------------------------------------------------------------------
# PDE residual

def test_pde_constant_exponent_residual_is_zero():
    assert verify_pde(0.0) == 0.0


@pytest.mark.parametrize("c", [1.0, 1j, 1 + 1j])
def test_pde_residual_small_on_box(c):
    assert verify_pde(c) <= 1e-6


def test_pde_residual_scales_second_order():
    # genuine central stencil: halving accuracy by 10x step multiplies the
    # residual by ~100
    pt = [(0.5, 1.0)]
    r4 = verify_pde(1.0, points=pt, step=1e-4)
    r3 = verify_pde(1.0, points=pt, step=1e-3)
    assert 30.0 <= r3 / r4 <= 300.0


def test_pde_grid_covers_box():
    pts = pde_grid()
    assert len(pts) == 21 * 13
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    assert min(xs) == -2.0 and max(xs) == 2.0
    assert min(ys) == 0.5 and max(ys) == 2.0


# ---------------------------------------------------------------------------
# L2 difference-quotient limit

@pytest.mark.parametrize("c", [0.0, 1.0, 1j])
def test_l2_limit_converges_first_order(c):
    norms = verify_l2_limit(c, 1.0)
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert norms[-1] <= 1e-3
    assert norms[-1] / norms[-2] == pytest.approx(0.5, abs=0.05)


def test_l2_limit_asymptote_matches_taylor():
    # (E(r) - 1)/r E(c) - X E(c) = (r/2)(X^2 - q) E(c) + O(r^2), so the norm
    # at r = 2^-13 is ~ 2^-14 ||(X^2 - q) E(c)||; for c = 0, q = 1 that is
    # 2^-14 sqrt(2), for c = 1 it is 2^-14 sqrt(34 e)
    norms0 = verify_l2_limit(0.0, 1.0)
    assert norms0[-1] == pytest.approx(2.0**-14 * math.sqrt(2.0), rel=2e-3)
    norms1 = verify_l2_limit(1.0, 1.0)
    assert norms1[-1] == pytest.approx(2.0**-14 * math.sqrt(34.0 * math.e), rel=2e-3)


def test_l2_limit_degenerate_variance():
    assert verify_l2_limit(1.0, 0.0) == tuple([0.0] * 13)


# ---------------------------------------------------------------------------
# two-point exponential formula

EXPONENT_PAIRS = [(c, d) for c in (1, -1, 1j) for d in (1, -1, 1j)]


@pytest.mark.parametrize("c, d", EXPONENT_PAIRS)
def test_lemma2_algebra_entry(c, d):
    row = lemma2_case(c, d, 1.0)
    assert row["algebra_deviation"] <= 1e-12 * max(1.0, abs(row["reference"]))


@pytest.mark.parametrize("c, d", EXPONENT_PAIRS)
def test_lemma2_mc_entry(c, d, flat_ens):
    row = lemma2_case(c, d, 1.0, ensemble=flat_ens)
    assert row["mc_deviation"] <= 4.0 * row["mc"].stderr + 1e-12
