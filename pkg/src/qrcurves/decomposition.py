"""Local graph structure of curves against simple volume forms.

For a simple form the target splits, near a point, into the support plane
of the form and its orthogonal complement.  Rotating the plane onto the
first n coordinates turns the curve locally into a pair (fhat, h) with
fhat quasiregular and the Jacobian of fhat sandwiched between multiples of
the pullback density.  This module constructs the rotation, the
constant-coefficient localization radius, the decomposition itself, the
dominant simple part of a general form along a C^1 curve, and the
sign-of-Jacobian diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .distortion import DEGENERATE_TOL, DistortionReport, verify_qrc
from .errors import DegreeError, DimensionError, DomainError
from .exterior import AltTensor, comass, comass_batch, interior_product, \
    is_simple, mass, multi_indices, pullback_linear
from .forms import FormField, comass_field, euclidean_volume
from .grids import BallMask, GridDomain, ball_points
from .maps import MapSpec, affine, compose, eval_batch, jet, jet_batch, \
    minors_batch, operator_norm_batch, star_pullback_batch


class NotSimpleError(ValueError):
    """Raised where an operation needs a simple form; points the caller at
    dominant_simple_part for the general case."""


RANK_CUTOFF = 1e-9


# ---------------------------------------------------------------------------
# support plane and rotation


def support_plane(a: AltTensor, tol: float = RANK_CUTOFF) -> np.ndarray:
    """Orthonormal basis (columns) of the k-plane a restricts to a volume on.

    The plane is the orthogonal complement of {v : v -| a = 0}, extracted
    from the singular value decomposition of the contraction map with rank
    cutoff tol * |a|.
    """
    m, k = a.ambient_dim, a.degree
    scale = mass(a)
    if scale <= 0.0:
        raise DomainError("support_plane: zero tensor")
    if not is_simple(a):
        raise NotSimpleError("support_plane: tensor is not simple")
    M = np.empty((math.comb(m, k - 1), m))
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        M[:, i] = interior_product(e, a).coeffs
    _, sv, Vt = np.linalg.svd(M, full_matrices=True)
    sv = np.concatenate([sv, np.zeros(m - sv.shape[0])])
    rank = int((sv > tol * scale).sum())
    if rank != k:
        raise NotSimpleError(f"support_plane: contraction rank {rank} != {k}")
    raw = Vt[:k].T
    # canonicalize: Gram-Schmidt of the coordinate axes projected onto the
    # plane, in axis order, so axis-aligned planes come out as plain axes
    proj = raw @ raw.T
    basis = []
    for i in range(m):
        v = proj[:, i].copy()
        for b in basis:
            v -= (b @ v) * b
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            basis.append(v / norm)
        if len(basis) == k:
            break
    if len(basis) < k:
        return raw
    return np.stack(basis, axis=1)


@dataclass(frozen=True)
class Isometry:
    """Affine isometry p -> A (p - anchor) with A orthogonal."""
    matrix: np.ndarray
    anchor: np.ndarray
    det_sign: int

    def __post_init__(self):
        A = self.matrix
        if np.abs(A @ A.T - np.eye(A.shape[0])).max() > 1e-12:
            raise DimensionError("Isometry: matrix is not orthogonal to 1e-12")

    def apply(self, P: np.ndarray) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        return (P - self.anchor) @ self.matrix.T

    def inverse(self, Q: np.ndarray) -> np.ndarray:
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        return Q @ self.matrix + self.anchor

    def as_map(self) -> MapSpec:
        return affine(self.matrix, -self.matrix @ self.anchor, name="isometry")

    def to_dict(self) -> dict:
        return {"matrix": [[float(v) for v in row] for row in self.matrix],
                "anchor": [float(v) for v in self.anchor],
                "det_sign": self.det_sign}


def rotation_isometry(F: FormField, p) -> Isometry:
    """The affine isometry L with L(p) = 0 and (L^-1)^* F_p a positive
    multiple of dx_1 ^ ... ^ dx_n, the multiple being the comass of F_p.

    The orientation rule: if the rotated covector comes out negative, the
    n-th basis vector of the support plane is flipped.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    a = F.at(p)
    try:
        plane = support_plane(a)
    except NotSimpleError:
        raise NotSimpleError(
            "rotation_isometry: the form is not simple at the point; use "
            "dominant_simple_part to reduce to a simple comparison form"
        ) from None
    m, k = a.ambient_dim, a.degree
    # complete the plane to an orthonormal basis of R^m; QR supplies the
    # complement, the plane rows are kept verbatim and the complement rows
    # get a deterministic sign
    q, _ = np.linalg.qr(np.hstack([plane, np.eye(m)]))
    A = q.T
    A[:k] = plane.T
    for r in range(k, m):
        lead_idx = np.flatnonzero(np.abs(A[r]) > 1e-9)
        if lead_idx.size and A[r, lead_idx[0]] < 0.0:
            A[r] = -A[r]
    lead = pullback_linear(a, A.T).coefficient(tuple(range(1, k + 1)))
    if lead < 0.0:
        A[k - 1] = -A[k - 1]
    det_sign = 1 if np.linalg.det(A) > 0 else -1
    return Isometry(A, p, det_sign)


# ---------------------------------------------------------------------------
# localization (constant-coefficient comparison form)


def localization_constant(K: float, K_prime: float) -> float:
    """Smallest c with c >= 2K and c/(c - 1 - K) <= K'/K."""
    if not K_prime > K or K < 1.0:
        raise ValueError("localization needs K' > K >= 1")
    return max(2.0 * K, K_prime * (1.0 + K) / (K_prime - K))


def _bisect_radius(cond, hi: float, floor: float, steps: int = 40):
    """Largest verified radius: cond(lo) holds, bisect against failures."""
    if cond(hi):
        return hi
    lo = floor
    if not cond(lo):
        return None
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if cond(mid):
            lo = mid
        else:
            hi = mid
    return lo


def localization(F: FormField, p, K: float, K_prime: float, *,
                 samples: int = 256, seed: int = 2024, floor: float = 1e-9,
                 safety: float = 0.9) -> tuple:
    """(c, rho): the proof constant and a radius on which the form moves by
    at most |F_p| / c in comass.

    Constant-coefficient fields get rho = inf.  The radius is found by
    bisection over seeded dense ball samples and shrunk by the safety
    factor; comass of the difference field is measured with the same
    dispatch as everywhere else.
    """
    c = localization_constant(K, K_prime)
    p = np.asarray(p, dtype=float).reshape(-1)
    if F.is_constant:
        return c, math.inf
    a0 = F.eval_coeffs(p[None, :])[0]
    bound = comass(AltTensor(F.degree, F.ambient_dim, a0)) / c

    def cond(rho):
        pts = ball_points(p, rho, samples, seed)
        try:
            diff = F.eval_coeffs(pts) - a0
        except DomainError:
            return False
        values, _ = comass_batch(diff, F.ambient_dim, F.degree)
        return bool(values.max() <= bound)

    hi = 1.0
    while cond(hi) and hi < 1e9:
        hi *= 2.0
    rho = _bisect_radius(cond, hi, floor)
    if rho is None:
        raise DomainError("localization: no positive radius above the "
                          f"resolution floor {floor}")
    return c, safety * rho


# ---------------------------------------------------------------------------
# graph decomposition


@dataclass
class DecompositionResult:
    anchor: np.ndarray
    isometry: Optional[Isometry]
    c: float
    rho: float
    radius: float
    epsilon: float
    K: float
    K_prime: float
    margin_min: float
    margin_max: float
    n_samples: int
    n_degenerate: int
    sandwich_violations: int
    fhat: Optional[MapSpec]
    h: Optional[MapSpec]
    fhat_report: Optional[DistortionReport]
    grid_hash: str
    inconclusive: bool
    sample_points: Optional[np.ndarray] = None
    fhat_jets: Optional[tuple] = None
    h_jets: Optional[tuple] = None
    notes: dict = field(default_factory=dict)

    @property
    def sandwich_bounds(self) -> tuple:
        return (1.0 / ((1.0 + self.epsilon) * self.K_prime),
                (1.0 + self.epsilon) * self.K)

    def to_dict(self) -> dict:
        return {
            "anchor": [float(v) for v in self.anchor],
            "isometry": self.isometry.to_dict() if self.isometry else None,
            "c": self.c,
            "rho": self.rho if math.isfinite(self.rho) else "inf",
            "radius": self.radius,
            "epsilon": self.epsilon,
            "K": self.K,
            "K_prime": self.K_prime,
            "sandwich_bounds": list(self.sandwich_bounds),
            "margin_min": self.margin_min,
            "margin_max": self.margin_max,
            "n_samples": self.n_samples,
            "n_degenerate": self.n_degenerate,
            "sandwich_violations": self.sandwich_violations,
            "fhat_verified": (self.fhat_report.verified
                              if self.fhat_report else None),
            "grid_hash": self.grid_hash,
            "inconclusive": self.inconclusive,
            "notes": self.notes,
        }


def graph_decompose(f: MapSpec, F: FormField, x, K: float, K_prime: float,
                    epsilon: float, grid: Optional[GridDomain] = None, *,
                    verify_resolution: int = 48, samples: int = 256,
                    seed: int = 2024, sandwich_tol: float = 1e-6,
                    qr_tol: float = 1e-6) -> DecompositionResult:
    """Split f near x as an isometry followed by (fhat, h).

    fhat is the projection of the rotated curve to the support plane and is
    verified K'-quasiregular on a sample grid; h is the complementary
    block.  The Jacobian sandwich

        1/((1+eps) K')  <=  |F_{f(x)}| J_fhat / (*f^*F)  <=  (1+eps) K

    is checked at every non-degenerate sample.  A degenerate center point
    (Df(x) = 0) yields a result flagged inconclusive rather than an error.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    n, m = f.source_dim, f.target_dim
    J0 = jet(f, x)
    empty = dict(anchor=x, c=localization_constant(K, K_prime),
                 rho=float("nan"), epsilon=epsilon, K=K, K_prime=K_prime,
                 margin_min=float("nan"), margin_max=float("nan"),
                 n_samples=0, n_degenerate=0, sandwich_violations=0,
                 fhat=None, h=None, fhat_report=None, grid_hash="",
                 isometry=None, radius=float("nan"), inconclusive=True)
    if operator_norm_batch(J0.differential[None])[0] <= DEGENERATE_TOL:
        return DecompositionResult(
            notes={"reason": "Df vanishes at the center point"}, **empty)

    p = J0.value
    L = rotation_isometry(F, p)
    c, rho = localization(F, p, K, K_prime, samples=samples, seed=seed)
    comass_p = comass(F.at(p))

    if grid is not None:
        hi = min(min(x[a] - lo, hi_ - x[a])
                 for a, (lo, hi_) in enumerate(grid.box))
        floor = 1e-6 * max(hi_ - lo for lo, hi_ in grid.box)
    else:
        hi, floor = 1.0, 1e-6

    lo_c, hi_c = comass_p / (1.0 + epsilon), comass_p * (1.0 + epsilon)

    def cond(r):
        pts = ball_points(x, r, samples, seed + 1)
        try:
            images = eval_batch(f, pts)
            com, _ = comass_field(F, images)
        except DomainError:
            return False
        if math.isfinite(rho):
            d = images - p
            if np.einsum("ij,ij->i", d, d).max() > rho * rho:
                return False
        return bool((com >= lo_c).all() and (com <= hi_c).all())

    radius = _bisect_radius(cond, hi, floor)
    if radius is None:
        return DecompositionResult(
            notes={"reason": "no admissible neighborhood above the radius "
                             "floor"}, **empty)

    A = L.matrix
    fhat = compose(f, affine(A[:n], -A[:n] @ p, name="project_plane"))
    fhat.name = f"fhat({f.name})"
    h = (compose(f, affine(A[n:], -A[n:] @ p, name="project_normal"))
         if m > n else None)
    if h is not None:
        h.name = f"h({f.name})"

    D = GridDomain(tuple((x[a] - radius, x[a] + radius) for a in range(n)),
                   (verify_resolution,) * n, BallMask(tuple(x), radius))
    pts = D.points()
    values, diffs = jet_batch(f, pts)
    DF = np.einsum("ab,nbc->nac", A, diffs)
    J_hat = np.linalg.det(DF[:, :n, :])
    jac = star_pullback_batch(values, diffs, F)
    opn = operator_norm_batch(diffs)
    nondeg = opn > DEGENERATE_TOL
    lo_b, hi_b = (1.0 / ((1.0 + epsilon) * K_prime), (1.0 + epsilon) * K)
    ratios = np.full(pts.shape[0], np.nan)
    ok = nondeg & (jac > 0.0)
    ratios[ok] = comass_p * J_hat[ok] / jac[ok]
    bad = int((nondeg & ((~ok) | (ratios < lo_b - sandwich_tol)
                         | (ratios > hi_b + sandwich_tol))).sum())
    fhat_report = verify_qrc(fhat, euclidean_volume(n), D, K_prime, qr_tol,
                             refine=False)
    return DecompositionResult(
        anchor=x, isometry=L, c=c, rho=rho, radius=radius, epsilon=epsilon,
        K=K, K_prime=K_prime,
        margin_min=float(np.nanmin(ratios)) if ok.any() else float("nan"),
        margin_max=float(np.nanmax(ratios)) if ok.any() else float("nan"),
        n_samples=int(pts.shape[0]), n_degenerate=int((~nondeg).sum()),
        sandwich_violations=bad, fhat=fhat, h=h, fhat_report=fhat_report,
        grid_hash=D.hash_hex(), inconclusive=False,
        sample_points=pts,
        fhat_jets=(values @ A[:n].T - (A[:n] @ p), DF[:, :n, :]),
        h_jets=((values @ A[n:].T - (A[n:] @ p), DF[:, n:, :])
                if m > n else None))


# ---------------------------------------------------------------------------
# dominant simple part (C^1 argument) and Jacobian positivity


@dataclass
class DominantPart:
    index: tuple
    constant: float
    center: np.ndarray
    radius: Optional[float]
    whole_domain: bool
    form: FormField
    terms_at_center: dict
    n_checked: int


def dominant_simple_part(f: MapSpec, F: FormField, x, domain: GridDomain,
                         K: float, *, samples: int = 256,
                         seed: int = 2024) -> DominantPart:
    """Select the multi-index J whose term dominates *f^*F near x.

    Returns the simple comparison form u_J dx_J, a neighborhood U (ball, or
    the whole domain when the inequality holds at every grid sample), and
    the distortion constant 2 C(m,n) K of the reduction

        *f^*F = sum_I (u_I o f)(*f^* dx_I) <= 2 C(m,n) (u_J o f)(*f^* dx_J).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    n, m = f.source_dim, f.target_dim
    if F.degree != n or F.ambient_dim != m:
        raise DegreeError("form degree/dimension does not match the map")
    values, diffs = jet_batch(f, x[None, :])
    terms = F.eval_coeffs(values)[0] * minors_batch(diffs, n)[0]
    total = float(terms.sum())
    if total <= 0.0:
        raise DomainError(f"dominant_simple_part: *f^*F = {total:.3g} <= 0 "
                          "at the center; the C^1 argument needs a positive "
                          "density")
    j_pos = int(np.argmax(terms))
    if terms[j_pos] <= 0.0:
        raise DomainError("dominant_simple_part: no positive term at the "
                          "center point")
    J = multi_indices(m, n)[j_pos]
    factor = 2.0 * math.comb(m, n)

    def holds(pts):
        vals, dfs = jet_batch(f, pts)
        coeffs = F.eval_coeffs(vals)
        minors = minors_batch(dfs, n)
        lhs = np.einsum("nc,nc->n", coeffs, minors)
        rhs = factor * coeffs[:, j_pos] * minors[:, j_pos]
        return bool((lhs <= rhs + 1e-12 * (1.0 + np.abs(lhs))).all())

    simple = FormField(n, m, {J: F._coeffs[J]},
                       name=f"u{''.join(map(str, J))}*dx{''.join(map(str, J))}",
                       is_constant=F.is_constant, is_simple_everywhere=True,
                       analytically_closed=F.is_constant,
                       domain_guard=F.domain_guard)
    terms_map = {I: float(t) for I, t in zip(multi_indices(m, n), terms)
                 if t != 0.0}

    grid_pts = domain.points()
    if holds(grid_pts):
        return DominantPart(J, factor * K, x, None, True, simple, terms_map,
                            int(grid_pts.shape[0]))

    hi = min(min(x[a] - lo, hi_ - x[a])
             for a, (lo, hi_) in enumerate(domain.box))
    floor = 1e-6 * max(hi_ - lo for lo, hi_ in domain.box)
    radius = _bisect_radius(lambda r: holds(ball_points(x, r, samples, seed)),
                            hi, floor)
    if radius is None:
        raise DomainError("dominant_simple_part: dominance fails down to the "
                          "radius floor")
    return DominantPart(J, factor * K, x, float(radius), False, simple,
                        terms_map, samples)


@dataclass
class PositivityReport:
    fraction: float
    n_samples: int
    violations: np.ndarray
    violating_jacs: np.ndarray

    def to_dict(self) -> dict:
        return {"fraction": self.fraction, "n_samples": self.n_samples,
                "n_violations": int(self.violations.shape[0])}


def jacobian_positivity(f: MapSpec, F: FormField,
                        grid: GridDomain) -> PositivityReport:
    """Fraction of grid samples with *f^*F > 0 plus the meaningful
    violations (non-positive density where Df != 0)."""
    X = grid.points()
    values, diffs = jet_batch(f, X)
    jac = star_pullback_batch(values, diffs, F)
    opn = operator_norm_batch(diffs)
    bad = (jac <= 0.0) & (opn > DEGENERATE_TOL)
    return PositivityReport(float((jac > 0.0).mean()), int(X.shape[0]),
                            X[bad], jac[bad])
