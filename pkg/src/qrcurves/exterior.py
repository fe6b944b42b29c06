"""Exact alternating multilinear algebra on R^m.

Coefficients are stored densely, one real number per strictly increasing
multi-index, with multi-indices enumerated in lexicographic order.  Two
conventions fix every sign in this module:

    basis      dx_I = dx_{i_1} ^ ... ^ dx_{i_k},  i_1 < ... < i_k,
               listed lexicographically; <dx_I, dx_J> = delta_IJ
    Hodge star dx_I ^ *dx_I = dx_1 ^ ... ^ dx_m

Everything else is a consequence:

    wedge      dx_I ^ dx_J = sgn(I,J) dx_{sort(I+J)}, 0 if I and J meet,
               where sgn(I,J) = parity of the merge of I and J
    star       *dx_I = sgn(I, I^c) dx_{I^c};   **a = (-1)^{k(m-k)} a
    interior   e_i -| dx_I = (-1)^{pos_I(i)} dx_{I \\ i}  (pos 0-based)
    mass       |a| = sqrt(sum_I a_I^2);  comass <= mass, equal for simple a

Ambient dimension is capped at 12 so the dense coefficient vector never
exceeds C(12,6) = 924 entries.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import DegreeError, DimensionError

MAX_AMBIENT_DIM = 12

#: default relative tolerance of the decomposability test
SIMPLE_TOL = 1e-9


# ---------------------------------------------------------------------------
# multi-index bookkeeping


@lru_cache(maxsize=None)
def multi_indices(m: int, k: int) -> tuple[tuple[int, ...], ...]:
    """All strictly increasing k-tuples from {1..m}, lexicographic order."""
    if not 0 <= k <= m:
        raise DegreeError(f"no degree-{k} multi-indices in dimension {m}")
    return tuple(combinations(range(1, m + 1), k))


@lru_cache(maxsize=None)
def _index_pos(m: int, k: int) -> dict[tuple[int, ...], int]:
    return {I: p for p, I in enumerate(multi_indices(m, k))}


def check_multi_index(I: tuple[int, ...], m: int) -> tuple[int, ...]:
    """Validate a multi-index: strictly increasing entries in [1..m]."""
    I = tuple(int(i) for i in I)
    if any(i < 1 or i > m for i in I):
        raise DimensionError(f"multi-index {I} has entries outside [1..{m}]")
    if any(a >= b for a, b in zip(I, I[1:])):
        raise DimensionError(f"multi-index {I} is not strictly increasing")
    return I


def _merge_sign(I: tuple[int, ...], J: tuple[int, ...]) -> int:
    """Parity of sorting the concatenation (I, J); inputs are increasing."""
    inversions = 0
    for i in I:
        for j in J:
            if j < i:
                inversions += 1
    return -1 if inversions % 2 else 1


@lru_cache(maxsize=None)
def _star_table(m: int, k: int):
    """Positions and signs realizing  *dx_I = sgn(I, I^c) dx_{I^c}."""
    pos_out = []
    signs = []
    complement_pos = _index_pos(m, m - k)
    for I in multi_indices(m, k):
        Ic = tuple(i for i in range(1, m + 1) if i not in I)
        pos_out.append(complement_pos[Ic])
        signs.append(_merge_sign(I, Ic))
    return np.array(pos_out), np.array(signs, dtype=float)


@lru_cache(maxsize=None)
def _contraction_table(m: int, k: int):
    """Flat (pos_in, pos_out, vec, sign) arrays for e_i -| dx_I, all I, i in I."""
    pos_in, pos_out, vec, sign = [], [], [], []
    out_pos = _index_pos(m, k - 1)
    for p, I in enumerate(multi_indices(m, k)):
        for slot, i in enumerate(I):
            pos_in.append(p)
            pos_out.append(out_pos[I[:slot] + I[slot + 1:]])
            vec.append(i - 1)
            sign.append(-1.0 if slot % 2 else 1.0)
    return (np.array(pos_in), np.array(pos_out), np.array(vec),
            np.array(sign))


# ---------------------------------------------------------------------------
# the tensor type


class AltTensor:
    """A degree-k alternating tensor on R^m with dense real coefficients.

    Values are immutable after construction (the coefficient array is
    frozen), so instances are safe to share across threads.
    """

    __slots__ = ("degree", "ambient_dim", "coeffs")

    def __init__(self, degree: int, ambient_dim: int, coeffs=None):
        if not 0 <= degree <= ambient_dim:
            raise DegreeError(
                f"degree {degree} invalid in ambient dimension {ambient_dim}")
        if ambient_dim > MAX_AMBIENT_DIM:
            raise DimensionError(
                f"ambient dimension {ambient_dim} exceeds cap {MAX_AMBIENT_DIM}")
        n_coeffs = math.comb(ambient_dim, degree)
        if coeffs is None:
            c = np.zeros(n_coeffs)
        else:
            c = np.array(coeffs, dtype=float).reshape(-1)
            if c.shape != (n_coeffs,):
                raise DimensionError(
                    f"expected {n_coeffs} coefficients, got {c.shape[0]}")
        c.flags.writeable = False
        self.degree = degree
        self.ambient_dim = ambient_dim
        self.coeffs = c

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, ambient_dim: int, degree: int) -> "AltTensor":
        return cls(degree, ambient_dim)

    @classmethod
    def basis(cls, ambient_dim: int, index: tuple[int, ...]) -> "AltTensor":
        """The basis covector dx_I."""
        index = check_multi_index(index, ambient_dim)
        k = len(index)
        c = np.zeros(math.comb(ambient_dim, k))
        c[_index_pos(ambient_dim, k)[index]] = 1.0
        return cls(k, ambient_dim, c)

    @classmethod
    def from_terms(cls, ambient_dim: int, degree: int,
                   terms: dict) -> "AltTensor":
        """Build from a {multi-index: coefficient} mapping."""
        c = np.zeros(math.comb(ambient_dim, degree))
        pos = _index_pos(ambient_dim, degree)
        for I, v in terms.items():
            c[pos[check_multi_index(tuple(I), ambient_dim)]] = float(v)
        return cls(degree, ambient_dim, c)

    # -- access ------------------------------------------------------------

    def coefficient(self, index: tuple[int, ...]) -> float:
        index = check_multi_index(index, self.ambient_dim)
        if len(index) != self.degree:
            raise DegreeError(f"index {index} has wrong degree")
        return float(self.coeffs[_index_pos(self.ambient_dim, self.degree)[index]])

    def terms(self, tol: float = 0.0) -> list[tuple[tuple[int, ...], float]]:
        """Nonzero (multi-index, coefficient) pairs, lexicographic order."""
        out = []
        for I, c in zip(multi_indices(self.ambient_dim, self.degree), self.coeffs):
            if abs(c) > tol:
                out.append((I, float(c)))
        return out

    # -- linear structure ----------------------------------------------------

    def _check_compatible(self, other: "AltTensor"):
        if self.ambient_dim != other.ambient_dim:
            raise DimensionError("ambient dimensions differ")
        if self.degree != other.degree:
            raise DegreeError("degrees differ")

    def __add__(self, other):
        self._check_compatible(other)
        return AltTensor(self.degree, self.ambient_dim, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return AltTensor(self.degree, self.ambient_dim, self.coeffs - other.coeffs)

    def __neg__(self):
        return AltTensor(self.degree, self.ambient_dim, -self.coeffs)

    def __mul__(self, scalar):
        return AltTensor(self.degree, self.ambient_dim, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return AltTensor(self.degree, self.ambient_dim, self.coeffs / float(scalar))

    def allclose(self, other: "AltTensor", tol: float = 1e-12) -> bool:
        self._check_compatible(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=tol))

    def __repr__(self):
        body = " + ".join(f"{c:g}*dx{''.join(map(str, I))}"
                          for I, c in self.terms()) or "0"
        return f"AltTensor(k={self.degree}, m={self.ambient_dim}: {body})"


# ---------------------------------------------------------------------------
# algebra operations


def wedge(a: AltTensor, b: AltTensor) -> AltTensor:
    """Exterior product a ^ b.

    Raises DegreeError when deg a + deg b exceeds the ambient dimension:
    that is a caller bug, not a zero tensor.
    """
    if a.ambient_dim != b.ambient_dim:
        raise DimensionError("wedge: ambient dimensions differ")
    m = a.ambient_dim
    k = a.degree + b.degree
    if k > m:
        raise DegreeError(f"wedge: degree {a.degree}+{b.degree} exceeds dimension {m}")
    out = np.zeros(math.comb(m, k))
    pos = _index_pos(m, k)
    for I, ca in a.terms():
        for J, cb in b.terms():
            if set(I) & set(J):
                continue
            out[pos[tuple(sorted(I + J))]] += _merge_sign(I, J) * ca * cb
    return AltTensor(k, m, out)


def hodge_star(a: AltTensor) -> AltTensor:
    """Hodge dual for the Euclidean metric and standard orientation."""
    m, k = a.ambient_dim, a.degree
    pos_out, signs = _star_table(m, k)
    out = np.zeros(math.comb(m, m - k))
    out[pos_out] = signs * a.coeffs
    return AltTensor(m - k, m, out)


def interior_product(v, a: AltTensor) -> AltTensor:
    """Contraction v -| a with the first slot of a."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != a.ambient_dim:
        raise DimensionError("interior_product: vector dimension mismatch")
    if a.degree < 1:
        raise DegreeError("interior_product: degree-0 input")
    pos_in, pos_out, vec, sign = _contraction_table(a.ambient_dim, a.degree)
    out = np.zeros(math.comb(a.ambient_dim, a.degree - 1))
    np.add.at(out, pos_out, sign * a.coeffs[pos_in] * v[vec])
    return AltTensor(a.degree - 1, a.ambient_dim, out)


def inner(a: AltTensor, b: AltTensor) -> float:
    """Euclidean inner product in the orthonormal dx_I basis."""
    a._check_compatible(b)
    return float(a.coeffs @ b.coeffs)


def mass(a: AltTensor) -> float:
    """Euclidean (Hilbert-Schmidt) norm sqrt(<a, a>)."""
    return float(np.linalg.norm(a.coeffs))


def is_simple(a: AltTensor, tol: float = SIMPLE_TOL) -> bool:
    """Decomposability test: (e_i -| a) ^ a = 0 for every basis vector.

    The tolerance is relative, measured against |a|^2 in the mass norm.
    Degrees k, k = m and k = m - 1 are simple for every a; the zero tensor
    passes trivially.
    """
    if a.degree < 1:
        raise DegreeError("is_simple: degree-0 input")
    m, k = a.ambient_dim, a.degree
    if k <= 1 or k >= m - 1:
        return True
    bound = tol * mass(a) ** 2
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        if mass(wedge(interior_product(e, a), a)) > bound:
            return False
    return True


def pullback_linear(a: AltTensor, matrix) -> AltTensor:
    """Pullback of a under the linear map x -> matrix @ x (same dimension)."""
    M = np.asarray(matrix, dtype=float)
    m, k = a.ambient_dim, a.degree
    if M.shape != (m, m):
        raise DimensionError("pullback_linear: matrix must be m x m")
    out = np.zeros(math.comb(m, k))
    idx = multi_indices(m, k)
    for q, J in enumerate(idx):
        cols = [j - 1 for j in J]
        acc = 0.0
        for I, ca in a.terms():
            rows = [i - 1 for i in I]
            acc += ca * np.linalg.det(M[np.ix_(rows, cols)])
        out[q] = acc
    return AltTensor(k, m, out)


# ---------------------------------------------------------------------------
# comass


@dataclass(frozen=True)
class ComassResult:
    """Comass value plus provenance of the computation."""
    value: float
    method: str
    heuristic: bool
    restarts: int
    converged: bool


def skew_matrix(a: AltTensor) -> np.ndarray:
    """Coefficient matrix A of a 2-form: a(u, v) = u^T A v, A skew."""
    if a.degree != 2:
        raise DegreeError("skew_matrix: input must be a 2-form")
    m = a.ambient_dim
    A = np.zeros((m, m))
    for (i, j), c in zip(multi_indices(m, 2), a.coeffs):
        A[i - 1, j - 1] = c
        A[j - 1, i - 1] = -c
    return A


def _spectral_comass(a: AltTensor) -> float:
    return float(np.linalg.svd(skew_matrix(a), compute_uv=False)[0])


def frame_value(a: AltTensor, frame: np.ndarray) -> float:
    """Evaluate a on the columns of an m x k frame matrix."""
    rows = np.array(multi_indices(a.ambient_dim, a.degree)) - 1
    return float(np.linalg.det(frame[rows, :]) @ a.coeffs)


def _contract_batch(coeffs: np.ndarray, v: np.ndarray, m: int, deg: int):
    """Batched interior product: coeffs (R, C(m,deg)), v (R, m)."""
    pos_in, pos_out, vec, sign = _contraction_table(m, deg)
    out = np.zeros((coeffs.shape[0], math.comb(m, deg - 1)))
    np.add.at(out, (slice(None), pos_out),
              sign[None, :] * coeffs[:, pos_in] * v[:, vec])
    return out


def _frame_values_batch(coeffs: np.ndarray, rows: np.ndarray, V: np.ndarray):
    return np.linalg.det(V[:, rows, :]) @ coeffs


def _frame_grad_batch(coeffs: np.ndarray, m: int, k: int, V: np.ndarray):
    """d/dV of V -> a(v_1,...,v_k); computed by slotwise contraction."""
    R = V.shape[0]
    prefixes = [np.broadcast_to(coeffs, (R, coeffs.shape[0])).copy()]
    for t in range(k - 1):
        prefixes.append(_contract_batch(prefixes[-1], V[:, :, t], m, k - t))
    G = np.empty((R, m, k))
    for j in range(k):
        T = prefixes[j]          # degree k - j, first j columns contracted
        deg = k - j
        for t in range(j + 1, k):
            T = _contract_batch(T, V[:, :, t], m, deg)
            deg -= 1
        G[:, :, j] = ((-1) ** (k - 1 - j)) * T
    return G


def _qr_retract(V: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(V)
    s = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    s = np.where(s == 0.0, 1.0, s)
    return Q * s[..., None, :]


def _comass_ascent(a: AltTensor, restarts: int, seed: int,
                   max_iter: int = 400, gtol: float = 1e-12):
    """Projected-gradient ascent of a(v_1..v_k)^2 on the Stiefel manifold.

    QR retraction, Armijo backtracking, all restarts advanced in one batch.
    Returns (best |value|, converged flag for the best restart).
    """
    m, k = a.ambient_dim, a.degree
    rows = np.array(multi_indices(m, k)) - 1
    coeffs = a.coeffs
    rng = np.random.default_rng(seed)
    V = _qr_retract(rng.standard_normal((restarts, m, k)))
    f = _frame_values_batch(coeffs, rows, V)
    step = np.full(restarts, 1.0)
    grad_ok = np.zeros(restarts, dtype=bool)
    best = np.abs(f).max()
    stalled = 0
    for _ in range(max_iter):
        G = _frame_grad_batch(coeffs, m, k, V) * (2.0 * f)[:, None, None]
        W = np.einsum("rij,rik->rjk", V, G)
        RG = G - np.einsum("rij,rjk->rik", V, 0.5 * (W + W.transpose(0, 2, 1)))
        gn2 = np.einsum("rij,rij->r", RG, RG)
        grad_ok = gn2 <= gtol
        if grad_ok.all():
            break
        t = step.copy()
        phi = f * f
        new_V, new_f = V.copy(), f.copy()
        active = ~grad_ok
        for _bt in range(40):
            cand = _qr_retract(V[active] + t[active, None, None] * RG[active])
            fc = _frame_values_batch(coeffs, rows, cand)
            good = fc * fc >= phi[active] + 1e-4 * t[active] * gn2[active]
            idx = np.flatnonzero(active)
            acc = idx[good]
            new_V[acc] = cand[good]
            new_f[acc] = fc[good]
            step[acc] = t[acc] * 1.5
            rem = idx[~good]
            active = np.zeros_like(active)
            active[rem] = True
            t[rem] *= 0.25
            if not active.any():
                break
        V, f = new_V, new_f
        # flat maximizer sets make the gradient test unreachable; stop once
        # the best value stops moving at machine precision
        new_best = np.abs(f).max()
        stalled = stalled + 1 if new_best - best <= 1e-14 * (1.0 + best) else 0
        best = max(best, new_best)
        if stalled >= 12:
            grad_ok |= np.abs(f) >= best - 1e-12 * (1.0 + best)
            break
    winner = int(np.argmax(np.abs(f)))
    return float(np.abs(f[winner])), bool(grad_ok[winner])


def comass(a: AltTensor, method: str = "auto", seed: int = 0,
           restarts: int = 64, full_output: bool = False):
    """Pointwise comass: max |a(v_1,...,v_k)| over orthonormal k-frames.

    Dispatch for method="auto": degree 1 -> Euclidean norm; simple tensors
    -> mass norm; 2-forms -> largest singular value of the skew coefficient
    matrix; anything else -> seeded multi-restart ascent on the Stiefel
    manifold.  The ascent value is a certified lower bound only and is
    flagged heuristic.
    """
    if a.degree < 1:
        raise DegreeError("comass: degree-0 input")
    heuristic = False
    converged = True
    used = restarts
    if method == "auto":
        if a.degree == 1:
            value, how = float(np.linalg.norm(a.coeffs)), "norm"
        elif is_simple(a):
            value, how = mass(a), "simple"
        elif a.degree == 2:
            value, how = _spectral_comass(a), "spectral"
        else:
            value, converged = _comass_ascent(a, restarts, seed)
            how, heuristic = "optimize", True
    elif method == "simple":
        if not is_simple(a):
            raise ValueError("comass(method='simple'): tensor is not simple")
        value, how = mass(a), "simple"
    elif method == "spectral":
        value, how = _spectral_comass(a), "spectral"
    elif method == "optimize":
        value, converged = _comass_ascent(a, restarts, seed)
        how, heuristic = "optimize", a.degree >= 3
    else:
        raise ValueError(f"unknown comass method {method!r}")
    if how != "optimize":
        used = 0
    if not converged:
        warnings.warn("comass ascent stopped before the gradient tolerance; "
                      "returned value is the best restart", stacklevel=2)
    if full_output:
        return ComassResult(value, how, heuristic, used, converged)
    return value


# ---------------------------------------------------------------------------
# batched variants used by field sweeps


def mass_batch(coeffs: np.ndarray) -> np.ndarray:
    return np.linalg.norm(coeffs, axis=-1)


def skew_matrices_batch(coeffs: np.ndarray, m: int) -> np.ndarray:
    N = coeffs.shape[0]
    A = np.zeros((N, m, m))
    for p, (i, j) in enumerate(multi_indices(m, 2)):
        A[:, i - 1, j - 1] = coeffs[:, p]
        A[:, j - 1, i - 1] = -coeffs[:, p]
    return A


def comass_batch(coeffs: np.ndarray, m: int, k: int, *, simple: bool = False,
                 seed: int = 0, restarts: int = 16):
    """Comass of many degree-k tensors given as rows of a coefficient array.

    Returns (values, heuristic_flag).  `simple=True` asserts every row is
    simple so the mass norm applies.  Rows of unknown shape fall back to the
    per-row dispatch of `comass`, which may engage the heuristic ascent.
    """
    if k == 1:
        return np.linalg.norm(coeffs, axis=-1), False
    if simple or k >= m - 1:
        return mass_batch(coeffs), False
    if k == 2:
        return np.linalg.svd(skew_matrices_batch(coeffs, m),
                             compute_uv=False)[:, 0], False
    values = np.empty(coeffs.shape[0])
    heuristic = False
    for r in range(coeffs.shape[0]):
        res = comass(AltTensor(k, m, coeffs[r]), seed=seed + r,
                     restarts=restarts, full_output=True)
        values[r] = res.value
        heuristic = heuristic or res.heuristic
    return values, heuristic
