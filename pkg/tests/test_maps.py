"""Map engine: jets against finite differences, norms, pullbacks, grids."""

import math
from itertools import combinations

import numpy as np
import pytest

from qrcurves import forms, maps
from qrcurves.errors import DimensionError, DomainError
from qrcurves.grids import AnnulusMask, BallMask, GridDomain


def fd_jacobian(f, x, eps=1e-6):
    """Central finite differences, the AD oracle."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.shape[0]):
        xp, xm = x.copy(), x.copy()
        xp[i] += eps
        xm[i] -= eps
        cols.append((maps.eval_batch(f, xp[None])[0]
                     - maps.eval_batch(f, xm[None])[0]) / (2 * eps))
    return np.stack(cols, axis=1)


def minor_sum_sq(D):
    """Cauchy-Binet left side, enumerated directly."""
    m, n = D.shape
    return sum(np.linalg.det(D[list(rows), :]) ** 2
               for rows in combinations(range(m), n))


# ---------------------------------------------------------------------------
# jets


def test_jet_z_squared():
    f = maps.winding(2)
    J = maps.jet(f, [1.0, 0.0])
    assert np.allclose(J.value, [1.0, 0.0])
    assert np.allclose(J.differential, [[2.0, 0.0], [0.0, 2.0]])
    assert np.allclose(J.differential, fd_jacobian(f, [1.0, 0.0]), atol=1e-6)


def test_jet_identity():
    J = maps.jet(maps.identity(3), [0.3, -1.0, 2.0])
    assert np.allclose(J.differential, np.eye(3))


def test_jet_graph_curve():
    f = maps.holomorphic_polynomial([[0, 1], [0, 0, 1]], name="(z,z^2)")
    J = maps.jet(f, [1.0, 0.0])
    assert np.allclose(J.differential,
                       [[1, 0], [0, 1], [2, 0], [0, 2]])


@pytest.mark.parametrize("factory,point", [
    (lambda: maps.winding(3), [0.7, -0.2]),
    (lambda: maps.holomorphic_polynomial([[1, 2, 0.5], [0, -1, 0, 1]]),
     [0.3, 0.4]),
    (lambda: maps.radial_stretch(1.5, 3), [0.5, -0.3, 0.8]),
    (lambda: maps.graph_map(2, "sin(x1)*x2"), [0.2, 0.9]),
    (lambda: maps.sine_graph(), [1.1, -0.4]),
    (lambda: maps.oscillation(5), [0.3, 0.3]),
    (lambda: maps.expression_map(2, ["x1*x1 - x2", "exp(x1)*x2", "x1/2"]),
     [0.4, 1.2]),
    (lambda: maps.affine([[1., 2.], [0., 1.], [3., -1.]], [1., 0., 2.]),
     [0.5, 0.6]),
])
def test_jets_match_finite_differences(factory, point):
    f = factory()
    J = maps.jet(f, point)
    fd = fd_jacobian(f, point)
    scale = 1.0 + np.abs(fd).max()
    assert np.abs(J.differential - fd).max() / scale < 1e-6


def test_jet_batch_families_against_fd():
    rng = np.random.default_rng(2)
    for f in (maps.winding(2), maps.radial_stretch(2.0, 2),
              maps.sine_graph()):
        X = rng.uniform(0.2, 1.0, size=(100, 2))
        _, diffs = maps.jet_batch(f, X)
        for r in range(0, 100, 17):
            fd = fd_jacobian(f, X[r])
            assert np.abs(diffs[r] - fd).max() / (1 + np.abs(fd).max()) < 1e-6


def test_domain_error_names_coordinate():
    f = maps.expression_map(2, ["log(x1)", "x2"])
    with pytest.raises(DomainError, match="coordinate 1"):
        maps.jet(f, [-1.0, 0.5])


def test_composition_chain_rule():
    f = maps.winding(2)
    g = maps.affine([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
    comp = maps.compose(f, g)
    x = [0.6, -0.3]
    Jf = maps.jet(f, x)
    Jc = maps.jet(comp, x)
    assert np.allclose(Jc.differential,
                       np.array([[1, 0], [0, 2], [1, 1]]) @ Jf.differential)


# ---------------------------------------------------------------------------
# norms


def test_operator_norm_diag():
    assert maps.operator_norm(np.diag([2.0, 1.0])) == pytest.approx(2.0)
    assert maps.operator_norm(np.zeros((3, 2))) == 0.0


def test_operator_norm_graph_jet():
    f = maps.holomorphic_polynomial([[0, 1], [0, 0, 1]])
    J = maps.jet(f, [1.0, 0.0])
    assert maps.operator_norm(J) == pytest.approx(math.sqrt(5.0))
    # oracle: power iteration on the Gram matrix
    G = J.differential.T @ J.differential
    v = np.ones(2)
    for _ in range(200):
        v = G @ v
        v /= np.linalg.norm(v)
    assert math.sqrt(v @ G @ v) == pytest.approx(math.sqrt(5.0), rel=1e-10)


def test_top_minor_norm_values():
    f = maps.holomorphic_polynomial([[0, 1], [0, 0, 1]])
    J = maps.jet(f, [1.0, 0.0])
    assert maps.top_minor_norm(J) == pytest.approx(5.0)
    assert maps.top_minor_norm(np.eye(3)) == pytest.approx(1.0)
    assert maps.top_minor_norm(np.array([[1.0, 2.0], [2.0, 4.0]])) == \
        pytest.approx(0.0, abs=1e-12)


def test_cauchy_binet_random():
    rng = np.random.default_rng(8)
    for _ in range(50):
        m, n = int(rng.integers(2, 7)), 0
        n = int(rng.integers(1, m + 1))
        D = rng.standard_normal((m, n))
        lhs = minor_sum_sq(D)
        rhs = np.linalg.det(D.T @ D)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))
        assert maps.top_minor_norm(D) == pytest.approx(math.sqrt(max(lhs, 0)),
                                                       rel=1e-9)


def test_hadamard_inequality():
    rng = np.random.default_rng(12)
    for _ in range(100):
        m, n = 5, 3
        D = rng.standard_normal((m, n))
        assert maps.top_minor_norm(D) <= maps.operator_norm(D) ** n + 1e-12


# ---------------------------------------------------------------------------
# pullbacks


def test_star_pullback_jacobian():
    f = maps.winding(2)
    J = maps.jet(f, [1.0, 0.0])
    assert maps.star_pullback(J, forms.euclidean_volume(2)) == \
        pytest.approx(4.0)
    # oracle: finite-difference Jacobian determinant
    assert np.linalg.det(fd_jacobian(f, [1.0, 0.0])) == pytest.approx(
        4.0, rel=1e-6)


def test_star_pullback_symplectic_sum_of_jacobians():
    f = maps.holomorphic_polynomial([[0, 1], [0, 0, 1]])
    J = maps.jet(f, [1.0, 0.0])
    assert maps.star_pullback(J, forms.symplectic(4)) == pytest.approx(5.0)


def test_star_pullback_hyperbolic_vanishes():
    # (f, 0, t) into the upper half-space kills the hyperbolic density
    f = maps.product(maps.winding(2), maps.constant_map([0.0, 1.0], 2),
                     name="(f,0,t)")
    omega0 = forms.hyperbolic_volume(2, 4)
    rng = np.random.default_rng(3)
    for _ in range(10):
        J = maps.jet(f, rng.uniform(0.2, 1.0, 2))
        assert maps.star_pullback(J, omega0) == pytest.approx(0.0, abs=1e-14)


def test_product_pullback_splits():
    f1 = maps.winding(2)
    f2 = maps.radial_stretch(2.0, 2)
    f = maps.product(f1, f2)
    F = forms.symplectic(4)
    vol = forms.euclidean_volume(2)
    rng = np.random.default_rng(6)
    for _ in range(10):
        x = rng.uniform(0.3, 1.0, 2)
        lhs = maps.star_pullback(maps.jet(f, x), F)
        rhs = (maps.star_pullback(maps.jet(f1, x), vol)
               + maps.star_pullback(maps.jet(f2, x), vol))
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_pullback_naturality_affine():
    # constant form under an affine map equals the analytic minor formula
    rng = np.random.default_rng(7)
    A = rng.standard_normal((4, 2))
    f = maps.affine(A, rng.standard_normal(4))
    F = forms.symplectic(4)
    J = maps.jet(f, rng.standard_normal(2))
    expect = (np.linalg.det(A[[0, 1], :]) + np.linalg.det(A[[2, 3], :]))
    assert maps.star_pullback(J, F) == pytest.approx(expect, rel=1e-12)


def test_pullback_potential_identity():
    tau = forms.potential_field(forms.euclidean_volume(2))
    J = maps.jet(maps.identity(2), [0.7, -0.4])
    got = maps.pullback_potential(J, tau)
    assert got.coefficient((1,)) == pytest.approx(0.2)   # -b/2
    assert got.coefficient((2,)) == pytest.approx(0.35)  # a/2


def test_pullback_potential_z_squared():
    # f = z^2, tau = (x dy - y dx)/2 at (1, 0): dx-coefficient 0, dy 1
    tau = forms.potential_field(forms.euclidean_volume(2))
    f = maps.winding(2)
    J = maps.jet(f, [1.0, 0.0])
    got = maps.pullback_potential(J, tau)
    assert got.coefficient((1,)) == pytest.approx(0.0, abs=1e-12)
    assert got.coefficient((2,)) == pytest.approx(1.0)
    # oracle: finite differences of the composed scalar functions
    eps = 1e-6

    def composed(x):
        y = maps.eval_batch(f, np.asarray(x, dtype=float)[None])[0]
        return y

    x0 = np.array([1.0, 0.0])
    for axis, expect in [(0, 0.0), (1, 1.0)]:
        xp, xm = x0.copy(), x0.copy()
        xp[axis] += eps
        xm[axis] -= eps
        yp, ym = composed(xp), composed(xm)
        y0 = composed(x0)
        dy = (yp - ym) / (2 * eps)
        val = 0.5 * (y0[0] * dy[1] - y0[1] * dy[0])
        assert val == pytest.approx(expect, abs=1e-6)


def test_pullback_potential_zero_differential():
    tau = forms.potential_field(forms.euclidean_volume(2))
    J = maps.jet(maps.constant_map([1.0, 2.0], 2), [0.0, 0.0])
    assert np.allclose(maps.pullback_potential(J, tau).coeffs, 0.0)


# ---------------------------------------------------------------------------
# grids


def test_grid_midpoint_weights():
    g = GridDomain(((0, 1), (0, 2)), (4, 8))
    X = g.points()
    assert X.shape == (32, 2)
    assert g.cell_volume == pytest.approx(1 / 4 * 2 / 8)
    assert g.measure == pytest.approx(2.0)
    assert X[:, 0].min() == pytest.approx(0.125)


def test_grid_masks():
    disc = GridDomain(((-1, 1), (-1, 1)), (64, 64), BallMask((0, 0), 1.0))
    assert disc.measure == pytest.approx(math.pi, rel=5e-3)
    ann = GridDomain(((-1, 1), (-1, 1)), (64, 64),
                     AnnulusMask((0, 0), 0.5, 1.0))
    assert ann.measure == pytest.approx(math.pi * 0.75, rel=5e-3)


def test_grid_validation():
    with pytest.raises(DimensionError):
        GridDomain(((1, 0),), (4,))
    with pytest.raises(DimensionError):
        GridDomain(((0, 1),), (1,))


def test_grid_hash_stable_and_sensitive():
    g = GridDomain(((0, 1), (0, 1)), (8, 8))
    assert g.hash_hex() == GridDomain(((0, 1), (0, 1)), (8, 8)).hash_hex()
    assert g.hash_hex() != g.refined().hash_hex()


def test_boundary_points_box():
    g = GridDomain(((0, 1), (0, 2)), (4, 4))
    B = g.boundary_points(16)
    assert ((np.isclose(B[:, 0], 0) | np.isclose(B[:, 0], 1)
             | np.isclose(B[:, 1], 0) | np.isclose(B[:, 1], 2))).all()


def test_jet_csv_dump(tmp_path):
    f = maps.winding(2)
    X = np.array([[1.0, 0.0], [0.5, 0.5]])
    path = tmp_path / "jets.csv"
    maps.write_jets_csv(f, X, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x1,x2,f1,f2,d1_1,d1_2,d2_1,d2_2"
    row = [float(v) for v in lines[1].split(",")]
    assert row == [1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 0.0, 2.0]
