"""Form fields: evaluation, closedness, ratios, metrics, potentials."""

import math

import numpy as np
import pytest

from qrcurves import forms
from qrcurves.errors import DomainError
from qrcurves.exterior import AltTensor, mass
from qrcurves.grids import GridDomain


def fd_exterior_derivative(F, p, eps=1e-6):
    """d of the coefficient field by central finite differences."""
    from qrcurves.exterior import _index_pos, _merge_sign, multi_indices
    p = np.asarray(p, dtype=float)
    m, k = F.ambient_dim, F.degree
    out = np.zeros(math.comb(m, k + 1))
    pos = _index_pos(m, k + 1)
    for j in range(1, m + 1):
        pp, pm = p.copy(), p.copy()
        pp[j - 1] += eps
        pm[j - 1] -= eps
        grad = (F.eval_coeffs(pp[None])[0] - F.eval_coeffs(pm[None])[0]) \
            / (2 * eps)
        for q, I in enumerate(multi_indices(m, k)):
            if j in I or grad[q] == 0.0:
                continue
            out[pos[tuple(sorted((j,) + I))]] += _merge_sign((j,), I) * grad[q]
    return AltTensor(k + 1, m, out)


# ---------------------------------------------------------------------------
# evaluation


def test_symplectic_constant_eval():
    F = forms.symplectic(4)
    t = forms.eval_form(F, [3.0, -1.0, 0.5, 2.0])
    assert t.terms() == [((1, 2), 1.0), ((3, 4), 1.0)]
    assert F.is_constant and not F.is_simple_everywhere


def test_heisenberg_eval():
    F = forms.heisenberg_star()
    t = forms.eval_form(F, [2.0, 0.0, 7.0])
    assert t.coefficient((1, 2)) == pytest.approx(1.0)
    assert t.coefficient((1, 3)) == pytest.approx(1.0)
    assert t.coefficient((2, 3)) == pytest.approx(0.0)
    # oracle: star of theta_H computed in the exterior core
    from qrcurves.exterior import hodge_star
    theta = AltTensor.from_terms(3, 1, {(1,): 0.0, (2,): -1.0, (3,): 1.0})
    assert hodge_star(theta).allclose(t)


def test_hyperbolic_eval_and_domain():
    F = forms.hyperbolic_volume(2, 3)
    t = forms.eval_form(F, [0.0, 0.0, 2.0])
    assert t.terms() == [((1, 3), 0.25)]
    with pytest.raises(DomainError):
        forms.eval_form(F, [0.0, 0.0, -1.0])


# ---------------------------------------------------------------------------
# closedness


def test_constant_forms_closed():
    for F in (forms.symplectic(6), forms.euclidean_volume(3),
              forms.simple_constant(4, (1, 3))):
        assert forms.closedness_residual(F, np.ones(F.ambient_dim)) == 0.0


def test_heisenberg_closed():
    F = forms.heisenberg_star()
    rng = np.random.default_rng(1)
    for _ in range(5):
        assert forms.closedness_residual(F, rng.standard_normal(3)) == \
            pytest.approx(0.0, abs=1e-14)


def test_open_form_residual_one():
    F = forms.expression_form(2, 3, {(1, 2): "x3"}, "x3dx12")
    p = [0.4, -0.2, 0.9]
    assert forms.closedness_residual(F, p) == pytest.approx(1.0)
    # oracle: finite differences of the coefficients
    assert mass(fd_exterior_derivative(F, p)) == pytest.approx(1.0, rel=1e-6)


def test_hyperbolic_closed():
    F = forms.hyperbolic_volume(3, 4)
    assert forms.closedness_residual(F, [0.1, 0.2, 0.3, 1.5]) == \
        pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# bounded ratio


def test_bounded_ratio_constant():
    F = forms.symplectic(4)
    region = GridDomain(((-1, 1),) * 4, (4, 4, 4, 4))
    res = forms.bounded_ratio(F, region)
    assert res.as_tuple() == pytest.approx((1.0, 1.0, 1.0))


def test_bounded_ratio_heisenberg_cylinderish():
    # comass of *theta_H is sqrt(1 + (x^2+y^2)/4); on |(x,y)| <= 2 the sup
    # tends to sqrt(2) from below on cell centers
    F = forms.heisenberg_star()
    region = GridDomain(((-2, 2), (-2, 2), (0, 1)), (48, 48, 2))
    res = forms.bounded_ratio(F, region)
    assert res.inf == pytest.approx(1.0, abs=5e-3)
    assert res.sup == pytest.approx(math.sqrt(2.0), rel=2e-2)
    assert res.sup < math.sqrt(2.0) + 1e-9
    # oracle: comass at the outermost sampled radius
    X = region.points()
    r2 = (X[:, 0] ** 2 + X[:, 1] ** 2).max()
    assert res.sup == pytest.approx(math.sqrt(1 + r2 / 4), rel=1e-12)


def test_bounded_ratio_hyperbolic_is_one():
    F = forms.hyperbolic_volume(2, 3)
    region = GridDomain(((-1, 1), (-1, 1), (0.5, 4.0)), (6, 6, 12))
    res = forms.bounded_ratio(F, region)
    assert res.as_tuple() == pytest.approx((1.0, 1.0, 1.0))


def test_bounded_ratio_monotone_under_inclusion():
    F = forms.heisenberg_star()
    small = GridDomain(((-1, 1), (-1, 1), (0, 1)), (16, 16, 2))
    large = GridDomain(((-3, 3), (-3, 3), (0, 1)), (48, 48, 2))
    assert forms.bounded_ratio(F, small).ratio <= \
        forms.bounded_ratio(F, large).ratio


def test_bounded_ratio_vanishing_rejected():
    F = forms.expression_form(1, 2, {(1,): "x1"}, "x1dx1")
    region = GridDomain(((-1, 1), (-1, 1)), (9, 9))
    with pytest.raises(DomainError):
        forms.bounded_ratio(F, region)


# ---------------------------------------------------------------------------
# conformal comass


def test_conformal_comass_euclidean_reduces():
    F = forms.symplectic(4)
    lam = forms.euclidean_metric(4)
    p = [0.3, 0.4, 0.5, 0.6]
    from qrcurves.exterior import comass
    assert forms.conformal_comass(F, lam, p) == pytest.approx(
        comass(forms.eval_form(F, p)))


def test_conformal_comass_hyperbolic_plane():
    F = forms.simple_constant(3, (1, 2))
    lam = forms.hyperbolic_metric(3)
    assert forms.conformal_comass(F, lam, [0.0, 0.0, 2.0]) == \
        pytest.approx(4.0)
    # oracle: frame maximization with rescaled vectors; unit vectors in the
    # metric have Euclidean length x3, so the sup is x3^2 * 1
    assert forms.conformal_comass(F, lam, [1.0, 1.0, 0.5]) == \
        pytest.approx(0.25)


def test_conformal_comass_hyperbolic_potential_half():
    tau0 = forms.potential_field(forms.hyperbolic_volume(3, 4))
    lam = forms.hyperbolic_metric(4)
    for xm in (0.5, 1.0, 3.7):
        assert forms.conformal_comass(tau0, lam, [0.0, 0.0, 0.0, xm]) == \
            pytest.approx(0.5, rel=1e-12)


def test_hyperbolic_norms_on_grid():
    # |omega_0| = 1 everywhere; |tau_0| = 1/(n-1) everywhere (this
    # artifact's computed value)
    n, m = 3, 4
    F = forms.hyperbolic_volume(n, m)
    region = GridDomain(((-1, 1),) * 3 + ((0.3, 3.0),), (3, 3, 3, 8))
    lam = forms.hyperbolic_metric(m)
    X = region.points()
    vals, _ = forms.comass_field(F, X, lam)
    assert np.allclose(vals, 1.0)
    tvals, _ = forms.comass_field(F.potential, X, lam)
    assert np.allclose(tvals, 1.0 / (n - 1))


def test_metric_positive_guard():
    lam = forms.expression_metric(2, "x1")
    with pytest.raises(DomainError):
        lam(np.array([[-1.0, 0.0]]))


# ---------------------------------------------------------------------------
# potentials


def test_poincare_potential_constant_form():
    F = forms.euclidean_volume(2)
    t = forms.poincare_potential(F, [1.0, 2.0])
    assert t.coefficient((1,)) == pytest.approx(-1.0)
    assert t.coefficient((2,)) == pytest.approx(0.5)
    assert np.allclose(forms.poincare_potential(F, [0.0, 0.0]).coeffs, 0.0)


def test_potential_d_equals_form():
    rng = np.random.default_rng(14)
    cases = [forms.euclidean_volume(2), forms.symplectic(4),
             forms.symplectic(6), forms.heisenberg_star(),
             forms.hyperbolic_volume(2, 3), forms.hyperbolic_volume(3, 4)]
    for F in cases:
        tau = forms.potential_field(F)
        m = F.ambient_dim
        P = rng.uniform(0.2, 2.0, size=(200, m))
        assert forms.potential_residual(F, tau, P) < 1e-8


def test_poincare_rejected_for_varying_field_without_analytic():
    F = forms.expression_form(2, 3, {(1, 2): "1 + x3*x3"}, "varying")
    with pytest.raises(DomainError, match="no potential"):
        forms.potential_field(F)


def test_potential_provenance():
    assert forms.potential_field(forms.symplectic(4)).provenance == "poincare"
    assert forms.potential_field(forms.heisenberg_star()).provenance == \
        "analytic"


def test_expression_form_constant_detection():
    F = forms.expression_form(2, 4, {"1,2": "1", "3,4": "2"}, "c")
    assert F.is_constant
    t = forms.eval_form(F, np.zeros(4))
    assert t.coefficient((3, 4)) == 2.0
    G = forms.expression_form(2, 4, {"1,2": "x1"}, "v")
    assert not G.is_constant


def test_check_volume_form():
    F = forms.expression_form(1, 2, {(1,): "x1"}, "x1dx1")
    with pytest.raises(DomainError):
        forms.check_volume_form(F, GridDomain(((-1, 1), (-1, 1)), (9, 9)))
    forms.check_volume_form(forms.symplectic(4),
                            GridDomain(((-1, 1),) * 4, (3, 3, 3, 3)))
