"""Tests for the integral classifiers and the blow-up growth condition."""

import math

import numpy as np
import pytest

from modelpot import core, criteria
from modelpot.criteria import PropertyTag, Verdict


# ---------------------------------------------------------------------------
# the divergence heuristic on analytic integrands


def test_heuristic_harmonic_diverges():
    v = criteria.test_L1_at_infinity(lambda r: 1.0 / r, 1.0)
    assert v.verdict is Verdict.DIVERGES
    assert v.slope_estimate == pytest.approx(-1.0, abs=1e-6)
    assert v.partial_integral == pytest.approx(math.log(1e4), rel=1e-8)


def test_heuristic_quadratic_converges():
    v = criteria.test_L1_at_infinity(lambda r: r ** -2.0, 1.0)
    assert v.verdict is Verdict.CONVERGES
    assert v.slope_estimate == pytest.approx(-2.0, abs=1e-6)


def test_heuristic_supercritical_power_diverges():
    v = criteria.test_L1_at_infinity(lambda r: r ** -0.5, 1.0)
    assert v.verdict is Verdict.DIVERGES


def test_heuristic_exponential_converges():
    v = criteria.test_L1_at_infinity(lambda r: math.exp(-r), 1.0)
    assert v.verdict is Verdict.CONVERGES


def test_heuristic_blind_spot_is_inconclusive():
    # 1/(r log r): diverges, but the fitted slope -1 - 1/log(r) sits inside
    # the critical band at any finite truncation
    v = criteria.test_L1_at_infinity(lambda r: 1.0 / (r * math.log(r)), 2.0)
    assert v.verdict is Verdict.INCONCLUSIVE
    assert -1.15 < v.slope_estimate < -1.01


def test_heuristic_slow_convergence_resolved_by_tail():
    # 1/(r log^2 r) converges; the slope estimate clears the margin
    v = criteria.test_L1_at_infinity(
        lambda r: 1.0 / (r * math.log(r) ** 2), 2.0)
    assert v.verdict is Verdict.CONVERGES


def test_heuristic_threshold_shortcut():
    cfg = criteria.DivergenceConfig(divergence_threshold=10.0)
    v = criteria.test_L1_at_infinity(lambda r: 1.0, 1.0, cfg)
    assert v.verdict is Verdict.DIVERGES
    assert v.partial_integral > 10.0


def test_heuristic_validation():
    with pytest.raises(core.DomainError):
        criteria.test_L1_at_infinity(lambda r: 1.0, 0.0)
    with pytest.raises(core.NumericError):
        criteria.test_L1_at_infinity(lambda r: -1.0, 1.0)


# ---------------------------------------------------------------------------
# comparison profiles


def test_v_pa_closed_form():
    M = core.manifold_from_tag("euclidean", 2)
    op = core.p_laplacian_operator(2.0)
    assert criteria.v_pa(M, op, 0.5, 4.0) == pytest.approx(0.125)
    op3 = core.p_laplacian_operator(3.0)
    # phi^-1(y) = sqrt(y)
    assert criteria.v_pa(M, op3, 1.0, 4.0) == pytest.approx(0.5)


def test_v_st_closed_form():
    M = core.manifold_from_tag("euclidean", 3)
    op = core.p_laplacian_operator(2.0)
    # r^-2 * (r^3 - 1)/3 at r=2, c=1
    assert criteria.v_st(M, op, 1.0, 1.0, 2.0) == pytest.approx(7.0 / 12.0)
    assert criteria.v_st(M, op, 1.0, 1.0, 1.0) == 0.0


# ---------------------------------------------------------------------------
# classifier truth table


TRUTH_TABLE = [
    ("euclidean", 2, 2.0, PropertyTag.PARABOLIC),
    ("euclidean", 3, 3.0, PropertyTag.PARABOLIC),
    ("euclidean", 3, 2.0, PropertyTag.NON_PARABOLIC),
    ("hyperbolic", 3, 2.0, PropertyTag.NON_PARABOLIC),
]


@pytest.mark.parametrize("tag,m,p,expected", TRUTH_TABLE)
def test_classify_parabolic_truth_table(tag, m, p, expected):
    M = core.manifold_from_tag(tag, m)
    op = core.p_laplacian_operator(p)
    cls = criteria.classify_parabolic(M, op)
    assert cls.property is expected


def test_classify_parabolic_slope_margins():
    # resolved verdicts clear the inconclusive band by >= 0.15
    M = core.manifold_from_tag("euclidean", 3)
    op = core.p_laplacian_operator(2.0)
    cls = criteria.classify_parabolic(M, op)
    for dv in cls.per_c:
        assert abs(dv.slope_estimate - (-1.0)) >= 0.15


def test_classify_KL_linear_potential_holds():
    M = core.manifold_from_tag("euclidean", 3)
    op = core.p_laplacian_operator(2.0)
    pot = core.linear_power_potential(2.0, 1.0)
    cls = criteria.classify_KL(M, op, pot)
    assert cls.property is PropertyTag.KL_HOLDS


def test_classify_KL_fast_growth_fails():
    M = core.manifold_from_tag("power-exp:alpha=3", 2)
    op = core.p_laplacian_operator(2.0)
    pot = core.linear_power_potential(2.0, 1.0)
    cls = criteria.classify_KL(M, op, pot)
    assert cls.property is PropertyTag.KL_FAILS


def test_classify_KL_zero_potential_reduces_to_parabolicity():
    op = core.p_laplacian_operator(2.0)
    pot = core.zero_potential()
    M2 = core.manifold_from_tag("euclidean", 2)
    M3 = core.manifold_from_tag("euclidean", 3)
    assert criteria.classify_KL(M2, op, pot).property is PropertyTag.KL_HOLDS
    assert criteria.classify_KL(M3, op, pot).property is PropertyTag.KL_FAILS


def test_classify_inconclusive_on_tabulated_blind_spot():
    # warping r*log(e+r): the parabolicity integrand behaves like
    # 1/(r log r), squarely inside the heuristic's critical band
    r = np.geomspace(1e-3, 2e4, 4000)
    g = r * np.log(math.e + r)
    M = core.tabulated_manifold(r, g, m=2, monotone=True)
    op = core.p_laplacian_operator(2.0)
    cls = criteria.classify_parabolic(M, op)
    assert cls.property is PropertyTag.INCONCLUSIVE


def test_operator_type_classification():
    t1 = criteria.classify_operator_type(core.linear_power_potential(2.0, 1.0))
    assert t1.tag is criteria.OperatorTypeTag.TYPE1
    t2 = criteria.classify_operator_type(core.plateau_potential(1.0, 2.0))
    assert t2.tag is criteria.OperatorTypeTag.TYPE2
    assert t2.T == pytest.approx(1.0, rel=0.1)
    tz = criteria.classify_operator_type(core.zero_potential())
    assert tz.tag is criteria.OperatorTypeTag.TYPE2
    assert tz.T == math.inf


def test_classification_invariants():
    with pytest.raises(ValueError):
        criteria.Classification(PropertyTag.PARABOLIC, (), ())
    with pytest.raises(ValueError):
        criteria.Classification(PropertyTag.PARABOLIC, (0.1, 1.0), (None,) * 2)


# ---------------------------------------------------------------------------
# cross-consistency of the generic and p-Laplacian paths


CROSS_CASES = [("euclidean", 2), ("euclidean", 3),
               ("hyperbolic", 3), ("power-exp:alpha=3", 2)]


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("tag,m", CROSS_CASES)
def test_cross_consistency_parabolic_form(tag, m, p):
    M = core.manifold_from_tag(tag, m)
    op = core.p_laplacian_operator(p)
    _, pa = criteria.p_laplacian_criteria(M, p)
    generic = criteria.classify_parabolic(M, op).per_c[0].verdict
    assert generic is pa.verdict


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("tag,m", CROSS_CASES)
def test_cross_consistency_stochastic_form(tag, m, p):
    M = core.manifold_from_tag(tag, m)
    op = core.p_laplacian_operator(p)
    st, _ = criteria.p_laplacian_criteria(M, p)
    pot = core.linear_power_potential(p, 1.0)   # strictly positive: Type1
    generic = criteria.classify_KL(M, op, pot).per_c[0].verdict
    assert generic is st.verdict


def test_hyperbolic_volume_ratio_verdicts():
    # vol(B_r)/vol(dB_r) -> 1/2 on hyperbolic m=3: the ratio form diverges
    # even though the surface form converges (stochastically complete but
    # non-parabolic)
    M = core.manifold_from_tag("hyperbolic", 3)
    st, pa = criteria.p_laplacian_criteria(M, 2.0)
    assert st.verdict is Verdict.DIVERGES
    assert pa.verdict is Verdict.CONVERGES


# ---------------------------------------------------------------------------
# growth condition


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("kind", ["critical", "super", "plateau"])
def test_keller_osserman_grid(p, kind):
    op = core.p_laplacian_operator(p)
    if kind == "critical":
        pot = core.linear_power_potential(p, 1.0)
        expected = "NotKO_holds"          # q = p-1
    elif kind == "super":
        pot = core.superlinear_potential(p - 1.0 + 0.5)
        expected = "NotKO_fails"          # q > p-1
    else:
        pot = core.plateau_potential(1.0, p)
        expected = "NotKO_holds"          # q = p-1 beyond the plateau
    res = criteria.keller_osserman(op, pot)
    assert res.verdict == expected
    assert res.form_primitive is res.form_simple


def test_keller_osserman_zero_potential_trivially_holds():
    op = core.p_laplacian_operator(2.0)
    res = criteria.keller_osserman(op, core.zero_potential())
    assert res.verdict == "NotKO_holds"


def test_keller_osserman_analytic_oracle():
    # beta(t) = t^(q+1)/(q+1): beta^(-1/p) integrable iff q > p - 1
    for p, q in [(2.0, 0.5), (2.0, 1.0), (2.0, 5.0), (3.0, 1.5), (3.0, 3.0)]:
        op = core.p_laplacian_operator(p)
        pot = core.superlinear_potential(q)
        res = criteria.keller_osserman(op, pot)
        assert res.verdict == ("NotKO_holds" if q <= p - 1 else "NotKO_fails")


# ---------------------------------------------------------------------------
# serialization


def test_classification_rows_and_text():
    M = core.manifold_from_tag("euclidean", 2)
    op = core.p_laplacian_operator(2.0)
    cls = criteria.classify_parabolic(M, op)
    rows = criteria.classification_rows("euclidean", 2.0, "zero", cls)
    assert len(rows) == len(cls.c_values_tested)
    assert all(len(r) == len(criteria.CSV_COLUMNS) for r in rows)
    assert rows[0][3] == "Parabolic"
    text = criteria.classification_text("euclidean", 2.0, "zero", cls)
    assert "property=Parabolic" in text
    assert text.count("verdict=") == len(cls.c_values_tested)
