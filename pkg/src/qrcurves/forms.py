"""Smooth differential form fields on R^m with differentiable coefficients.

Coefficient functions take the list of m coordinate values (floats, numpy
arrays, or Duals) and return one value, so a single definition serves
pointwise evaluation, batched grid sweeps, and exact differentiation with
forward-mode duals.  Built-ins carry analytically known structure flags
(constant, simple everywhere, closed), an optional conformal metric on the
target, and, when one exists in closed form, an analytic potential.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from . import autodiff
from .autodiff import seed as dual_seed, value_of
from .errors import DegreeError, DimensionError, DomainError
from .exterior import (AltTensor, _contraction_table, _index_pos, _merge_sign,
                       comass, comass_batch, is_simple, mass, multi_indices)
from .expressions import compile_expression
from .grids import GridDomain


# ---------------------------------------------------------------------------
# conformal metrics


class ConformalMetric:
    """A conformal rescaling g = lambda^2 * (Euclidean) given by its factor."""

    def __init__(self, factor: Callable, dim: int, name: str = "metric"):
        self.factor = factor
        self.dim = dim
        self.name = name

    def __call__(self, P) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if P.shape[1] != self.dim:
            raise DimensionError(f"metric {self.name}: points have dimension "
                                 f"{P.shape[1]}, expected {self.dim}")
        lam = value_of(self.factor([P[:, i] for i in range(self.dim)]),
                       (P.shape[0],))
        if not np.all(lam > 0.0) or not np.isfinite(lam).all():
            raise DomainError(f"metric {self.name}: factor not positive at "
                              "a queried point")
        return lam


def euclidean_metric(dim: int) -> ConformalMetric:
    return ConformalMetric(lambda ys: 1.0, dim, "euclidean")


def hyperbolic_metric(dim: int) -> ConformalMetric:
    """Upper half-space factor 1/x_d, defined for x_d > 0."""
    return ConformalMetric(lambda ys: 1.0 / ys[dim - 1], dim, "hyperbolic")


def expression_metric(dim: int, source: str, name: str = "expr") -> ConformalMetric:
    return ConformalMetric(compile_expression(source, dim), dim, name)


# ---------------------------------------------------------------------------
# coefficient fields


class CoefficientField:
    """Shared machinery: a degree-k field with per-multi-index coefficients."""

    def __init__(self, degree: int, ambient_dim: int, coefficients: dict,
                 domain_guard: Optional[Callable] = None):
        if not 0 <= degree <= ambient_dim:
            raise DegreeError(f"degree {degree} invalid on R^{ambient_dim}")
        self.degree = degree
        self.ambient_dim = ambient_dim
        pos = _index_pos(ambient_dim, degree)
        self._coeffs = {}
        for I, fn in coefficients.items():
            I = tuple(int(i) for i in I)
            if I not in pos:
                raise DimensionError(f"bad multi-index {I} for degree {degree}")
            self._coeffs[I] = fn
        self.domain_guard = domain_guard

    def _check_domain(self, P: np.ndarray):
        if self.domain_guard is not None:
            ok = self.domain_guard(P)
            if not np.all(ok):
                bad = np.atleast_2d(P)[~np.atleast_1d(ok)][0]
                raise DomainError(f"point {bad.tolist()} outside the domain "
                                  "of the field")

    def eval_coeffs(self, P: np.ndarray) -> np.ndarray:
        """Coefficient array (N, C(m,k)) at the rows of P."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if P.shape[1] != self.ambient_dim:
            raise DimensionError("points have wrong ambient dimension")
        self._check_domain(P)
        cols = [P[:, i] for i in range(self.ambient_dim)]
        pos = _index_pos(self.ambient_dim, self.degree)
        out = np.zeros((P.shape[0], math.comb(self.ambient_dim, self.degree)))
        with np.errstate(all="ignore"):
            for I, fn in self._coeffs.items():
                out[:, pos[I]] = value_of(fn(cols), (P.shape[0],))
        if not np.isfinite(out).all():
            raise DomainError("coefficient evaluation produced a non-finite "
                              "value")
        return out

    def at(self, p) -> AltTensor:
        return AltTensor(self.degree, self.ambient_dim,
                         self.eval_coeffs(np.asarray(p, dtype=float))[0])

    def d_coeffs(self, P: np.ndarray) -> np.ndarray:
        """Exterior-derivative coefficients (N, C(m,k+1)), exact via duals."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        self._check_domain(P)
        m, k = self.ambient_dim, self.degree
        if k >= m:
            return np.zeros((P.shape[0], 0))
        duals = dual_seed(P)
        out_pos = _index_pos(m, k + 1)
        out = np.zeros((P.shape[0], math.comb(m, k + 1)))
        with np.errstate(all="ignore"):
            for I, fn in self._coeffs.items():
                val = fn(duals)
                grads = autodiff.partials_of(val, (P.shape[0],), m)
                for j in range(1, m + 1):
                    if j in I:
                        continue
                    sign = _merge_sign((j,), I)
                    J = tuple(sorted((j,) + I))
                    out[:, out_pos[J]] += sign * grads[:, j - 1]
        return out

    def d_at(self, p) -> AltTensor:
        return AltTensor(self.degree + 1, self.ambient_dim,
                         self.d_coeffs(np.asarray(p, dtype=float))[0])


class PotentialField(CoefficientField):
    """A degree (n-1) field tau with d(tau) equal to a given n-form."""

    def __init__(self, degree, ambient_dim, coefficients, provenance: str,
                 domain_guard=None, name: str = "potential"):
        super().__init__(degree, ambient_dim, coefficients, domain_guard)
        if provenance not in ("analytic", "poincare"):
            raise ValueError("provenance must be 'analytic' or 'poincare'")
        self.provenance = provenance
        self.name = name


class FormField(CoefficientField):
    """A smooth degree-n form field, normally a non-vanishing closed one."""

    def __init__(self, degree, ambient_dim, coefficients, name: str,
                 is_constant: bool = False, is_simple_everywhere: bool = False,
                 analytically_closed: bool = False,
                 metric: Optional[ConformalMetric] = None,
                 potential: Optional[PotentialField] = None,
                 domain_guard=None):
        super().__init__(degree, ambient_dim, coefficients, domain_guard)
        self.name = name
        self.is_constant = is_constant
        self.is_simple_everywhere = is_simple_everywhere
        self.analytically_closed = analytically_closed
        self.metric = metric
        self.potential = potential


# ---------------------------------------------------------------------------
# operations


def eval_form(F: FormField, p) -> AltTensor:
    """The coefficient tensor of F at a point."""
    return F.at(p)


def closedness_residual(F: FormField, p) -> float:
    """Mass norm of dF at p; zero for closed fields up to AD round-off."""
    return mass(F.d_at(p))


def comass_field(F: CoefficientField, P: np.ndarray,
                 metric: Optional[ConformalMetric] = None, seed: int = 0):
    """Comass of F at each row of P; returns (values, heuristic flag).

    With a conformal metric the Euclidean comass is rescaled by
    lambda(p)^(-k), which is exact for conformal factors.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    coeffs = F.eval_coeffs(P)
    k = F.degree
    if getattr(F, "is_constant", False) and P.shape[0] > 1:
        value = comass(AltTensor(k, F.ambient_dim, coeffs[0]), seed=seed,
                       full_output=True)
        values = np.full(P.shape[0], value.value)
        heuristic = value.heuristic
    else:
        values, heuristic = comass_batch(
            coeffs, F.ambient_dim, k,
            simple=getattr(F, "is_simple_everywhere", False), seed=seed)
    if metric is not None:
        values = values * metric(P) ** (-k)
    return values, heuristic


def conformal_comass(F: CoefficientField, metric: ConformalMetric, p) -> float:
    """Comass of F at p measured in the metric lambda^2 * Euclidean."""
    values, _ = comass_field(F, np.asarray(p, dtype=float)[None, :], metric)
    return float(values[0])


class BoundedRatioResult:
    def __init__(self, sup, inf, ratio, n_samples, heuristic):
        self.sup = sup
        self.inf = inf
        self.ratio = ratio
        self.n_samples = n_samples
        self.heuristic = heuristic

    def as_tuple(self):
        return (self.sup, self.inf, self.ratio)

    def __repr__(self):
        return (f"BoundedRatioResult(sup={self.sup:.6g}, inf={self.inf:.6g}, "
                f"ratio={self.ratio:.6g})")


def bounded_ratio(F: FormField, region: GridDomain,
                  vanish_tol: float = 1e-12) -> BoundedRatioResult:
    """sup, inf, and ratio of the (metric-aware) comass over grid samples.

    Raises DomainError when the infimum is not safely positive: the field
    is then not an n-volume form on the region.
    """
    if region.dim != F.ambient_dim:
        raise DimensionError("region dimension differs from the field's")
    P = region.points()
    values, heuristic = comass_field(F, P, F.metric)
    sup, inf = float(values.max()), float(values.min())
    if inf <= vanish_tol:
        raise DomainError(f"form {F.name} has vanishing comass "
                          f"({inf:.3g}) on the region")
    return BoundedRatioResult(sup, inf, sup / inf, P.shape[0], heuristic)


def potential_field(F: FormField) -> PotentialField:
    """A potential tau with d(tau) = F.

    Built-ins with a registered analytic potential return it; otherwise a
    constant-coefficient field gets the exact contraction formula
    tau(y) = (1/n) y -| F, normalized so tau(0) = 0.  Anything else is an
    explicit error: numerically integrated potentials are never produced.
    """
    if F.potential is not None:
        return F.potential
    if not F.is_constant:
        raise DomainError(f"no potential available for {F.name}: coefficients "
                          "are not constant and no analytic potential is "
                          "registered")
    n, m = F.degree, F.ambient_dim
    if n < 1:
        raise DegreeError("potential of a degree-0 form is undefined")
    omega = F.at(np.zeros(m)).coeffs
    pos_in, pos_out, vec, sign = _contraction_table(m, n)
    per_index: dict[tuple, list] = {}
    out_indices = multi_indices(m, n - 1)
    for pi, po, v, s in zip(pos_in, pos_out, vec, sign):
        if omega[pi] == 0.0:
            continue
        per_index.setdefault(out_indices[po], []).append(
            (int(v), float(s) * float(omega[pi]) / n))

    def make(entries):
        def coeff(ys):
            acc = entries[0][1] * ys[entries[0][0]]
            for v, c in entries[1:]:
                acc = acc + c * ys[v]
            return acc
        return coeff

    coeffs = {J: make(entries) for J, entries in per_index.items()}
    return PotentialField(n - 1, m, coeffs, "poincare",
                          name=f"poincare({F.name})")


def poincare_potential(F: FormField, p) -> AltTensor:
    """Evaluate a potential of F at p; see `potential_field` for rules."""
    return potential_field(F).at(p)


def potential_residual(F: FormField, tau: PotentialField, P: np.ndarray) -> float:
    """max_p mass(d tau(p) - F(p)) over the rows of P."""
    d = tau.d_coeffs(P)
    w = F.eval_coeffs(P)
    return float(np.linalg.norm(d - w, axis=1).max())


def check_volume_form(F: FormField, region: GridDomain,
                      tol: float = 1e-12) -> None:
    """Assert F is non-vanishing on the region's sample set."""
    coeffs = F.eval_coeffs(region.points())
    smallest = float(np.linalg.norm(coeffs, axis=1).min())
    if smallest <= tol:
        raise DomainError(f"form {F.name} vanishes on the sample set "
                          f"(min mass {smallest:.3g})")


# ---------------------------------------------------------------------------
# built-in catalog


def constant_form(tensor: AltTensor, name: str = "constant",
                  metric: Optional[ConformalMetric] = None) -> FormField:
    coeffs = {}
    for I, c in tensor.terms():
        coeffs[I] = (lambda cc: (lambda ys: cc))(c)
    simple = (tensor.degree <= 1 or tensor.degree >= tensor.ambient_dim - 1
              or is_simple(tensor))
    return FormField(tensor.degree, tensor.ambient_dim, coeffs, name,
                     is_constant=True, is_simple_everywhere=simple,
                     analytically_closed=True, metric=metric)


def euclidean_volume(n: int) -> FormField:
    """dx_1 ^ ... ^ dx_n on R^n."""
    return constant_form(AltTensor.basis(n, tuple(range(1, n + 1))),
                         name=f"volume_R{n}")


def simple_constant(ambient_dim: int, index, scale: float = 1.0) -> FormField:
    index = tuple(int(i) for i in index)
    return constant_form(scale * AltTensor.basis(ambient_dim, index),
                         name=f"dx{''.join(map(str, index))}")


def symplectic(ambient_dim: int) -> FormField:
    """dx1^dx2 + dx3^dx4 + ... on R^(2k), pairing consecutive coordinates."""
    if ambient_dim % 2:
        raise DimensionError("symplectic form needs even ambient dimension")
    t = AltTensor.zero(ambient_dim, 2)
    for i in range(0, ambient_dim, 2):
        t = t + AltTensor.basis(ambient_dim, (i + 1, i + 2))
    return constant_form(t, name=f"symplectic_R{ambient_dim}")


def heisenberg_star() -> FormField:
    """Hodge dual of the contact form dt - (x dy - y dx)/2 on R^3 = (x, y, t).

    *theta_H = dx^dy + (x/2) dx^dt + (y/2) dy^dt; coclosed contact form, so
    the field is closed, and every 2-form on R^3 is simple.
    """
    coeffs = {
        (1, 2): lambda ys: 1.0,
        (1, 3): lambda ys: 0.5 * ys[0],
        (2, 3): lambda ys: 0.5 * ys[1],
    }
    potential = PotentialField(
        1, 3,
        {(2,): lambda ys: ys[0],
         (3,): lambda ys: 0.25 * (ys[0] * ys[0] + ys[1] * ys[1])},
        "analytic", name="heisenberg_potential")
    return FormField(2, 3, coeffs, "heisenberg_star",
                     is_simple_everywhere=True, analytically_closed=True,
                     potential=potential)


def hyperbolic_volume(n: int, m: int) -> FormField:
    """x_m^(-n) dx_1 ^ ... ^ dx_{n-1} ^ dx_m on the upper half-space of R^m.

    Carries the hyperbolic factor 1/x_m and the analytic potential
    (-1)^n (n-1)^(-1) x_m^(1-n) dx_1 ^ ... ^ dx_{n-1}.
    """
    if not 2 <= n <= m:
        raise DimensionError("hyperbolic volume needs 2 <= n <= m")
    guard = lambda P: np.atleast_2d(P)[:, m - 1] > 0.0
    index = tuple(range(1, n)) + (m,)
    tau_scale = (-1.0) ** n / (n - 1)
    potential = PotentialField(
        n - 1, m,
        {tuple(range(1, n)): lambda ys: tau_scale * ys[m - 1] ** (1 - n)},
        "analytic", domain_guard=guard, name="hyperbolic_potential")
    return FormField(
        n, m, {index: lambda ys: ys[m - 1] ** (-float(n))},
        f"hyperbolic_volume(n={n},m={m})",
        is_simple_everywhere=True, analytically_closed=True,
        metric=hyperbolic_metric(m), potential=potential, domain_guard=guard)


def expression_form(degree: int, ambient_dim: int, coefficients: dict,
                    name: str = "user_form", closed: bool = False) -> FormField:
    """Field from config: {multi-index: expression in x1..xm} entries.

    Multi-index keys may be tuples or comma-separated strings like "1,3".
    """
    compiled = {}
    constant = True
    for key, src in coefficients.items():
        if isinstance(key, str):
            key = tuple(int(s) for s in key.replace(" ", "").split(","))
        try:
            float(src)
        except (TypeError, ValueError):
            constant = False
        compiled[tuple(key)] = (compile_expression(str(src), ambient_dim)
                                if isinstance(src, str)
                                else (lambda c: (lambda ys: c))(float(src)))
    f = FormField(degree, ambient_dim, compiled, name,
                  is_constant=constant, analytically_closed=closed or constant)
    if constant:
        f.is_simple_everywhere = is_simple(f.at(np.ones(ambient_dim)))
    return f


BUILTIN_FORMS = {
    "volume": (euclidean_volume, "volume(n)"),
    "simple_constant": (simple_constant,
                        "simple_constant(ambient_dim, index, scale=1)"),
    "symplectic": (symplectic, "symplectic(ambient_dim)"),
    "heisenberg_star": (heisenberg_star, "heisenberg_star()"),
    "hyperbolic_volume": (hyperbolic_volume, "hyperbolic_volume(n, m)"),
}

BUILTIN_METRICS = {
    "euclidean": (euclidean_metric, "euclidean(dim)"),
    "hyperbolic": (hyperbolic_metric, "hyperbolic(dim)"),
    "expression": (expression_metric, "expression(dim, source)"),
}
