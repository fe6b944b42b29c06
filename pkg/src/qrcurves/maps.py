"""Maps f: R^n -> R^m with exact jets via forward-mode dual numbers.

A MapSpec wraps a coordinate function that accepts a list of n coordinate
values (arrays or Duals) and returns m values, so one definition serves
plain evaluation and exact differentiation, pointwise or over a whole grid
in a single vectorized pass.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .autodiff import evaluate_values, evaluate_with_jacobian, sin, cos
from .errors import DegreeError, DimensionError
from .expressions import compile_expression
from .exterior import AltTensor, multi_indices
from .forms import CoefficientField, FormField, PotentialField
from .grids import GridDomain


class MapSpec:
    """A map R^n -> R^m given by a dual-capable coordinate function."""

    def __init__(self, source_dim: int, target_dim: int, fn: Callable,
                 name: str = "map", params: Optional[dict] = None,
                 domain: Optional[GridDomain] = None):
        self.source_dim = int(source_dim)
        self.target_dim = int(target_dim)
        self.fn = fn
        self.name = name
        self.params = dict(params or {})
        self.domain = domain

    def __repr__(self):
        return (f"MapSpec({self.name}: R^{self.source_dim} -> "
                f"R^{self.target_dim})")


@dataclass(frozen=True)
class Jet:
    """Point, value, and the exact m x n differential at the point."""
    x: np.ndarray
    value: np.ndarray
    differential: np.ndarray


# ---------------------------------------------------------------------------
# jets


def jet(f: MapSpec, x) -> Jet:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != f.source_dim:
        raise DimensionError(f"point has dimension {x.shape[0]}, map expects "
                             f"{f.source_dim}")
    values, jacs = evaluate_with_jacobian(f.fn, x[None, :], f.target_dim)
    return Jet(x, values[0], jacs[0])


def jet_batch(f: MapSpec, X: np.ndarray):
    """Values (N, m) and differentials (N, m, n) at the rows of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != f.source_dim:
        raise DimensionError("batch points have wrong source dimension")
    return evaluate_with_jacobian(f.fn, X, f.target_dim)


def eval_batch(f: MapSpec, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return evaluate_values(f.fn, X, f.target_dim)


# ---------------------------------------------------------------------------
# norms of differentials


def _as_diff(J) -> np.ndarray:
    return J.differential if isinstance(J, Jet) else np.asarray(J, dtype=float)


def operator_norm_batch(diffs: np.ndarray) -> np.ndarray:
    """Largest singular value from the n x n Gram matrix Df^T Df."""
    gram = np.einsum("nki,nkj->nij", diffs, diffs)
    ev = np.linalg.eigvalsh(gram)[:, -1]
    return np.sqrt(np.maximum(ev, 0.0))


def operator_norm(J) -> float:
    return float(operator_norm_batch(_as_diff(J)[None, :, :])[0])


def top_minor_norm_batch(diffs: np.ndarray) -> np.ndarray:
    """|Lambda^n Df| = sqrt(det(Df^T Df)), the Cauchy-Binet closed form."""
    gram = np.einsum("nki,nkj->nij", diffs, diffs)
    return np.sqrt(np.maximum(np.linalg.det(gram), 0.0))


def top_minor_norm(J) -> float:
    return float(top_minor_norm_batch(_as_diff(J)[None, :, :])[0])


# ---------------------------------------------------------------------------
# pullbacks


def minors_batch(diffs: np.ndarray, degree: int) -> np.ndarray:
    """det of every degree-row submatrix against the full source columns.

    diffs: (N, m, n) with degree == n; output (N, C(m, degree)) ordered by
    lexicographic multi-index.
    """
    m = diffs.shape[1]
    rows = np.array(multi_indices(m, degree)) - 1
    return np.linalg.det(diffs[:, rows, :])


def star_pullback_batch(values: np.ndarray, diffs: np.ndarray,
                        F: FormField) -> np.ndarray:
    """The scalar *f^*F: sum_I u_I(f(x)) det(rows I of Df), batched."""
    n = diffs.shape[2]
    if F.degree != n:
        raise DegreeError(f"form degree {F.degree} != source dimension {n}")
    if F.ambient_dim != diffs.shape[1]:
        raise DimensionError("form ambient dimension != map target dimension")
    return np.einsum("nc,nc->n", F.eval_coeffs(values), minors_batch(diffs, n))


def star_pullback(J: Jet, F: FormField) -> float:
    return float(star_pullback_batch(J.value[None, :],
                                     J.differential[None, :, :], F)[0])


def pullback_potential_batch(values: np.ndarray, diffs: np.ndarray,
                             tau: CoefficientField) -> np.ndarray:
    """Coefficients (N, C(n, n-1)) of f^* tau on the source, batched."""
    N, m, n = diffs.shape
    if tau.degree != n - 1:
        raise DegreeError(f"potential degree {tau.degree} != n-1 = {n - 1}")
    if tau.ambient_dim != m:
        raise DimensionError("potential ambient dimension mismatch")
    tgt_rows = np.array(multi_indices(m, n - 1)) - 1    # (Ct, n-1)
    src_cols = np.array(multi_indices(n, n - 1)) - 1    # (Cs, n-1)
    coeff = tau.eval_coeffs(values)                     # (N, Ct)
    out = np.empty((N, src_cols.shape[0]))
    for a, cols in enumerate(src_cols):
        sub = diffs[:, :, cols][:, tgt_rows, :]         # (N, Ct, n-1, n-1)
        out[:, a] = np.einsum("nc,nc->n", coeff, np.linalg.det(sub))
    return out


def pullback_potential(J: Jet, tau: CoefficientField) -> AltTensor:
    coeffs = pullback_potential_batch(J.value[None, :],
                                      J.differential[None, :, :], tau)
    n = J.differential.shape[1]
    return AltTensor(n - 1, n, coeffs[0])


# ---------------------------------------------------------------------------
# built-in map families


def identity(n: int) -> MapSpec:
    return MapSpec(n, n, lambda xs: list(xs), "identity", {"n": n})


def constant_map(values, source_dim: int) -> MapSpec:
    values = [float(v) for v in values]
    return MapSpec(source_dim, len(values), lambda xs: list(values),
                   "constant", {"values": values})


def affine(matrix, offset=None, name: str = "affine") -> MapSpec:
    """x -> A x + b with A of shape (m, n)."""
    A = np.asarray(matrix, dtype=float)
    b = np.zeros(A.shape[0]) if offset is None else np.asarray(offset, float)

    def fn(xs):
        out = []
        for i in range(A.shape[0]):
            acc = b[i]
            for j in range(A.shape[1]):
                if A[i, j] != 0.0:
                    acc = acc + A[i, j] * xs[j]
            out.append(acc)
        return out

    return MapSpec(A.shape[1], A.shape[0], fn, name,
                   {"matrix": A.tolist(), "offset": b.tolist()})


def expression_map(source_dim: int, expressions: Sequence[str],
                   name: str = "expression") -> MapSpec:
    fns = [compile_expression(src, source_dim) for src in expressions]
    return MapSpec(source_dim, len(fns), lambda xs: [g(xs) for g in fns],
                   name, {"expressions": list(expressions)})


def compose(*specs: MapSpec) -> MapSpec:
    """Apply the given maps left to right; jets come out by the chain rule."""
    for f, g in zip(specs, specs[1:]):
        if f.target_dim != g.source_dim:
            raise DimensionError(f"cannot compose {f.name} -> {g.name}: "
                                 f"{f.target_dim} != {g.source_dim}")

    def fn(xs):
        for s in specs:
            xs = s.fn(xs)
        return xs

    return MapSpec(specs[0].source_dim, specs[-1].target_dim, fn,
                   "(" + " ; ".join(s.name for s in specs) + ")")


def _as_complex_pair(c):
    if isinstance(c, (list, tuple)):
        return float(c[0]), float(c[1])
    c = complex(c)
    return c.real, c.imag


def _complex_horner(coeffs, x, y):
    """Evaluate sum c_j z^j at z = x + iy; coeffs are (re, im) pairs,
    constant term first."""
    re, im = 0.0, 0.0
    for cr, ci in reversed(coeffs):
        re, im = re * x - im * y + cr, re * y + im * x + ci
    return re, im


def holomorphic_polynomial(coefficients, name: str = "holomorphic") -> MapSpec:
    """z -> (p_1(z), ..., p_k(z)) as a map R^2 -> R^(2k).

    `coefficients` is one list per component polynomial, constant term
    first; entries may be real numbers, complex numbers, or (re, im) pairs.
    """
    polys = [[_as_complex_pair(c) for c in comp] for comp in coefficients]

    def fn(xs):
        x, y = xs
        out = []
        for c in polys:
            re, im = _complex_horner(c, x, y)
            out.append(re)
            out.append(im)
        return out

    return MapSpec(2, 2 * len(polys), fn, name,
                   {"coefficients": [[list(c) for c in p] for p in polys]})


def winding(p: int) -> MapSpec:
    """z -> z^p on R^2."""
    return holomorphic_polynomial([[0.0] * p + [1.0]], name=f"winding({p})")


def graph_map(p: int, height: Optional[object] = None,
              name: Optional[str] = None) -> MapSpec:
    """z -> (z^p, h(z)) into R^3; `height` is an expression in x1, x2,
    a dual-capable callable of (x, y), or None for h = 0.

    The theory wants |h| <= |z|^p and |h'| <= p |z|^{p-1}; the choice of h
    is the caller's responsibility and is not enforced pointwise.
    """
    if height is None:
        h = lambda xs: 0.0
    elif callable(height):
        h = lambda xs: height(xs[0], xs[1])
    else:
        compiled = compile_expression(str(height), 2)
        h = compiled

    zp = [(0.0, 0.0)] * p + [(1.0, 0.0)]

    def fn(xs):
        re, im = _complex_horner(zp, xs[0], xs[1])
        return [re, im, h(xs)]

    return MapSpec(2, 3, fn, name or f"graph(z^{p})",
                   {"p": p, "height": str(height)})


def radial_stretch(a: float, n: int) -> MapSpec:
    """x -> |x|^(a-1) x; a K-quasiregular map with K = a^(n-1) for a >= 1."""
    from .autodiff import sqrt as _sqrt

    def fn(xs):
        s2 = xs[0] * xs[0]
        for x in xs[1:]:
            s2 = s2 + x * x
        factor = _sqrt(s2) ** (a - 1.0)
        return [factor * x for x in xs]

    return MapSpec(n, n, fn, f"radial_stretch(a={a})", {"a": a, "n": n})


def product(f1: MapSpec, f2: MapSpec, name: Optional[str] = None) -> MapSpec:
    """x -> (f1(x), f2(x)) with a shared source."""
    if f1.source_dim != f2.source_dim:
        raise DimensionError("product factors need the same source dimension")

    def fn(xs):
        return list(f1.fn(xs)) + list(f2.fn(xs))

    return MapSpec(f1.source_dim, f1.target_dim + f2.target_dim, fn,
                   name or f"({f1.name} x {f2.name})")


def conjugate() -> MapSpec:
    """The orientation-reversing map z -> conj(z) on R^2."""
    return MapSpec(2, 2, lambda xs: [xs[0], -xs[1]], "conjugate")


def sine_graph() -> MapSpec:
    """The bounded map (x, y) -> (sin x sin y, cos x cos y)."""
    return MapSpec(2, 2,
                   lambda xs: [sin(xs[0]) * sin(xs[1]),
                               cos(xs[0]) * cos(xs[1])],
                   "sine_graph")


def oscillation(j: int) -> MapSpec:
    """(x, y) -> (x, y + sin(jx)/j); converges uniformly to the identity."""
    return MapSpec(2, 2,
                   lambda xs: [xs[0], xs[1] + sin(float(j) * xs[0]) / float(j)],
                   f"oscillation({j})", {"j": j})


def polynomial_drift(j: int) -> MapSpec:
    """z -> z^2 + z/j; holomorphic, converges uniformly to z^2."""
    return holomorphic_polynomial([[0.0, 1.0 / j, 1.0]],
                                  name=f"z^2+z/{j}")


BUILTIN_MAPS = {
    "identity": (identity, "identity(n)"),
    "constant": (constant_map, "constant(values, source_dim)"),
    "affine": (affine, "affine(matrix, offset)"),
    "expression": (expression_map, "expression(source_dim, expressions)"),
    "holomorphic_polynomial": (holomorphic_polynomial,
                               "holomorphic_polynomial(coefficients)"),
    "winding": (winding, "winding(p)"),
    "graph": (graph_map, "graph(p, height)"),
    "radial_stretch": (radial_stretch, "radial_stretch(a, n)"),
    "conjugate": (conjugate, "conjugate()"),
    "sine_graph": (sine_graph, "sine_graph()"),
    "oscillation": (oscillation, "oscillation(j)"),
    "polynomial_drift": (polynomial_drift, "polynomial_drift(j)"),
}


# ---------------------------------------------------------------------------
# CSV dumps


def write_jets_csv(f: MapSpec, X: np.ndarray, path) -> None:
    """Dump jets at the rows of X: x1..xn, f1..fm, then Df row-major."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    values, diffs = jet_batch(f, X)
    n, m = f.source_dim, f.target_dim
    header = ([f"x{i + 1}" for i in range(n)]
              + [f"f{i + 1}" for i in range(m)]
              + [f"d{i + 1}_{j + 1}" for i in range(m) for j in range(n)])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in range(X.shape[0]):
            writer.writerow([repr(float(v)) for v in X[r]]
                            + [repr(float(v)) for v in values[r]]
                            + [repr(float(v)) for v in diffs[r].reshape(-1)])
