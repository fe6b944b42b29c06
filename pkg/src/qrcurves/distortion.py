"""Pointwise and aggregate distortion of a map against an n-volume form.

The central inequality is  (|omega| o f) |Df|^n <= K (*f^*omega)  with
|omega| the pointwise comass and *f^*omega the pullback density.  Points
with Df = 0 satisfy it trivially and carry K = 1 by convention; points
with a non-positive pullback density but Df != 0 are hard violations and
are reported as data, never as infinities folded into statistics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegreeError, DimensionError
from .forms import ConformalMetric, FormField, comass_field
from .grids import GridDomain
from .maps import MapSpec, jet_batch, operator_norm_batch, star_pullback_batch

DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class DistortionSample:
    """Distortion data of one point."""
    x: np.ndarray
    opnorm: float
    jac: float
    comass_at_image: float
    K_pointwise: float
    degenerate: bool
    violating: bool


@dataclass
class DistortionReport:
    """Aggregate distortion data over a grid sweep."""
    grid: dict
    grid_hash: str
    K_target: float
    tol: float
    sup_K: float
    quantiles: dict
    n_samples: int
    n_degenerate: int
    n_violations: int
    worst_violation: Optional[float]
    verified: bool
    vacuous: bool
    comass_heuristic: bool
    refinement: Optional[dict] = None
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "sup_K": self.sup_K,
            "quantiles": self.quantiles,
            "n_samples": self.n_samples,
            "n_degenerate": self.n_degenerate,
            "n_violations": self.n_violations,
            "worst_violation": self.worst_violation,
            "verified": self.verified,
            "vacuous": self.vacuous,
            "K_target": self.K_target,
            "tol": self.tol,
            "comass_heuristic": self.comass_heuristic,
            "refinement": self.refinement,
            "grid_hash": self.grid_hash,
            "grid": self.grid,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _check_curve_dims(f: MapSpec, F: FormField):
    if f.source_dim > f.target_dim:
        raise DimensionError("a curve needs source_dim <= target_dim")
    if F.degree != f.source_dim:
        raise DegreeError(f"form degree {F.degree} != source dimension "
                          f"{f.source_dim}")
    if F.ambient_dim != f.target_dim:
        raise DimensionError("form lives on a different target space")


def distortion_arrays(f: MapSpec, F: FormField, X: np.ndarray,
                      metrics: Optional[tuple] = None,
                      degenerate_tol: float = DEGENERATE_TOL):
    """Vectorized distortion data at the rows of X.

    metrics, when given, is the pair (lambda_domain, lambda_target) of
    conformal factors; the rescaling of each ingredient is exact for
    conformal metrics, so K is unchanged up to round-off.

    Returns (opnorm, jac, comass, K, degenerate, violating, heuristic).
    """
    _check_curve_dims(f, F)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = f.source_dim
    values, diffs = jet_batch(f, X)
    opnorm = operator_norm_batch(diffs)
    jac = star_pullback_batch(values, diffs, F)
    com, heuristic = comass_field(F, values)
    if metrics is not None:
        lam_dom, lam_tgt = metrics
        ld = lam_dom(X) if lam_dom is not None else 1.0
        lt = lam_tgt(values) if lam_tgt is not None else 1.0
        opnorm = opnorm * lt / ld
        jac = jac / ld ** n
        com = com * lt ** (-float(n))
    degenerate = opnorm <= degenerate_tol
    violating = (~degenerate) & (jac <= 0.0)
    K = np.ones_like(opnorm)
    ok = (~degenerate) & (jac > 0.0)
    K[ok] = com[ok] * opnorm[ok] ** n / jac[ok]
    K[violating] = np.inf
    return opnorm, jac, com, K, degenerate, violating, heuristic


def pointwise_distortion(f: MapSpec, F: FormField, x,
                         metrics: Optional[tuple] = None) -> DistortionSample:
    """Distortion data of f against F at one point."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    opn, jac, com, K, deg, vio, _ = distortion_arrays(f, F, x, metrics)
    return DistortionSample(x[0], float(opn[0]), float(jac[0]), float(com[0]),
                            float(K[0]), bool(deg[0]), bool(vio[0]))


def _aggregate(K, degenerate, violating, jac, grid, K_target, tol,
               heuristic, refinement=None) -> DistortionReport:
    finite = (~degenerate) & np.isfinite(K)
    n_vio = int(violating.sum())
    vacuous = not bool((~degenerate).any())
    if vacuous:
        sup = float("nan")
        quantiles = {"p50": None, "p90": None, "p99": None}
    else:
        sup = float(K[~degenerate].max())
        if finite.any():
            q = np.percentile(K[finite], [50, 90, 99])
            quantiles = {"p50": float(q[0]), "p90": float(q[1]),
                         "p99": float(q[2])}
        else:
            quantiles = {"p50": None, "p90": None, "p99": None}
    verified = ((not vacuous) and n_vio == 0
                and sup <= K_target * (1.0 + tol))
    worst = float(jac[violating].min()) if n_vio else None
    return DistortionReport(
        grid=grid.canonical(), grid_hash=grid.hash_hex(), K_target=K_target,
        tol=tol, sup_K=sup, quantiles=quantiles, n_samples=int(K.shape[0]),
        n_degenerate=int(degenerate.sum()), n_violations=n_vio,
        worst_violation=worst, verified=verified, vacuous=vacuous,
        comass_heuristic=heuristic, refinement=refinement)


def verify_qrc(f: MapSpec, F: FormField, grid: GridDomain, K: float,
               tol: float = 1e-6, metrics: Optional[tuple] = None,
               refine: bool = True) -> DistortionReport:
    """Sweep the grid and decide whether f is a K-quasiregular F-curve.

    The grid supremum is a lower bound for the essential supremum; with
    `refine=True` the sweep is repeated on a coarsened grid and the change
    of sup_K is reported as a Richardson-style convergence hint.
    """
    if K < 1.0:
        raise ValueError("K must be >= 1")
    if tol < 0.0:
        raise ValueError("tol must be >= 0")
    X = grid.points()
    _, jac, _, Kp, deg, vio, heur = distortion_arrays(f, F, X, metrics)
    refinement = None
    if refine:
        coarse = grid.coarsened()
        _, _, _, Kc, degc, _, _ = distortion_arrays(f, F, coarse.points(),
                                                    metrics)
        sup_c = float(Kc[~degc].max()) if (~degc).any() else float("nan")
        sup_f = float(Kp[~deg].max()) if (~deg).any() else float("nan")
        refinement = {"sup_K_coarse": sup_c,
                      "sup_K_delta": (sup_f - sup_c
                                      if np.isfinite(sup_f) and np.isfinite(sup_c)
                                      else None)}
    return _aggregate(Kp, deg, vio, jac, grid, K, tol, heur, refinement)


def conformal_invariance_check(f: MapSpec, F: FormField,
                               lam_dom: Optional[ConformalMetric],
                               lam_tgt: Optional[ConformalMetric],
                               grid: GridDomain) -> float:
    """max |K_pointwise(with metrics) - K_pointwise(Euclidean)| over the grid.

    Pointwise distortion is invariant under conformal rescalings of domain
    and target, so the deviation is pure round-off (contract: <= 1e-9).
    """
    X = grid.points()
    *_, K0, deg0, vio0, _ = distortion_arrays(f, F, X, None)
    *_, K1, deg1, vio1, _ = distortion_arrays(f, F, X, (lam_dom, lam_tgt))
    both = np.isfinite(K0) & np.isfinite(K1)
    dev = float(np.abs(K0[both] - K1[both]).max()) if both.any() else 0.0
    if ((vio0 != vio1).any()) or ((deg0 != deg1).any()):
        dev = float("inf")
    return dev


def write_distortion_csv(f: MapSpec, F: FormField, grid: GridDomain, path,
                         metrics: Optional[tuple] = None) -> None:
    """Per-point dump: coordinates, opnorm, jac, comass, K, flags."""
    import csv

    X = grid.points()
    opn, jac, com, K, deg, vio, _ = distortion_arrays(f, F, X, metrics)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(X.shape[1])]
                        + ["opnorm", "jac", "comass", "K", "degenerate",
                           "violating"])
        for r in range(X.shape[0]):
            writer.writerow([repr(float(v)) for v in X[r]]
                            + [repr(float(opn[r])), repr(float(jac[r])),
                               repr(float(com[r])), repr(float(K[r])),
                               int(deg[r]), int(vio[r])])
