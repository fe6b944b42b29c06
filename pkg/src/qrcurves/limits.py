"""Convergence checks for sequences of curves.

Sequences are declared with their analytic limit (the compactness step of
the theory is not constructive), and the lab measures the consequences:
uniform distance per index, weak convergence of the pullback densities
against a fixed cutoff, lower semicontinuity of the n-energy as a
finite-tail liminf estimate, and the distortion of the declared limit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .distortion import DistortionReport, verify_qrc
from .forms import FormField
from .functionals import CutoffSpec
from .grids import GridDomain
from .maps import (MapSpec, eval_batch, identity, jet_batch,
                   operator_norm_batch, oscillation, polynomial_drift,
                   star_pullback_batch, winding)


@dataclass
class SequenceSpec:
    """j -> MapSpec generator, a declared limit, and the indices to probe."""
    generator: Callable[[int], MapSpec]
    limit: MapSpec
    indices: Sequence[int]
    name: str = "sequence"

    def members(self):
        return [(j, self.generator(j)) for j in self.indices]


def uniform_distance(f: MapSpec, g: MapSpec, grid: GridDomain) -> float:
    """max over grid samples of |f(x) - g(x)|."""
    X = grid.points()
    return float(np.linalg.norm(eval_batch(f, X) - eval_batch(g, X),
                                axis=1).max())


def weak_pullback_residual(fj: MapSpec, f: MapSpec, zeta: CutoffSpec,
                           F: FormField, grid: GridDomain) -> float:
    """|int zeta (*fj^*F) - int zeta (*f^*F)| by quadrature."""
    X = grid.points()
    z = zeta.psi(X) ** fj.source_dim
    vj, dj = jet_batch(fj, X)
    v, d = jet_batch(f, X)
    diff = (star_pullback_batch(vj, dj, F) - star_pullback_batch(v, d, F))
    return float(abs((z * diff).sum() * grid.cell_volume))


@dataclass
class LscReport:
    limit_energy: float
    energies: dict
    tail_min: float
    gap: float
    ok: bool

    def to_dict(self) -> dict:
        return {"limit_energy": self.limit_energy,
                "energies": {str(j): e for j, e in self.energies.items()},
                "tail_min": self.tail_min, "gap": self.gap, "ok": self.ok}


def energy_lsc_check(seq: SequenceSpec, U: GridDomain,
                     slack: float = 0.02) -> LscReport:
    """Finite-tail lower semicontinuity estimate of int |Df|^n.

    The liminf is approximated by the minimum over the evaluated indices;
    the contract is limit_energy <= tail_min * (1 + slack).  The gap
    tail_min - limit_energy stays strictly positive for oscillation
    families, which is the interesting part.
    """
    X = U.points()
    w = U.cell_volume
    n = seq.limit.source_dim

    def n_energy(spec):
        _, diffs = jet_batch(spec, X)
        return float((operator_norm_batch(diffs) ** n).sum() * w)

    energies = {j: n_energy(fj) for j, fj in seq.members()}
    limit_energy = n_energy(seq.limit)
    tail_min = min(energies.values())
    return LscReport(limit_energy, energies, tail_min,
                     tail_min - limit_energy,
                     limit_energy <= tail_min * (1.0 + slack))


def limit_distortion(seq: SequenceSpec, F: FormField, grid: GridDomain,
                     K: float, tol: float = 1e-6) -> DistortionReport:
    """Verify the declared limit at the members' K.

    Every evaluated member must verify first; a failing member is a
    precondition error naming the offender, since then the limit theorem
    promises nothing.
    """
    for j, fj in seq.members():
        rep = verify_qrc(fj, F, grid, K, tol, refine=False)
        if not rep.verified:
            raise ValueError(
                f"sequence member j={j} fails (QRC) at K={K}: sup_K = "
                f"{rep.sup_K:.9g}, violations = {rep.n_violations}")
    return verify_qrc(seq.limit, F, grid, K, tol)


@dataclass
class ConvergenceReport:
    rows: list                     # (j, uniform_distance, weak_residual, n_energy)
    limit_energy: float
    lsc: LscReport
    limit_report: Optional[DistortionReport]
    name: str = "sequence"
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "rows": [{"j": j, "uniform_distance": u, "weak_residual": wr,
                      "n_energy": e} for j, u, wr, e in self.rows],
            "limit_energy": self.limit_energy,
            "lsc": self.lsc.to_dict(),
            "limit_verified": (self.limit_report.verified
                               if self.limit_report else None),
            "limit_sup_K": (self.limit_report.sup_K
                            if self.limit_report else None),
            "notes": self.notes,
        }


def convergence_report(seq: SequenceSpec, F: FormField, zeta: CutoffSpec,
                       grid: GridDomain, K: Optional[float] = None,
                       tol: float = 1e-6) -> ConvergenceReport:
    """Per-index distances, residuals, and energies, plus the limit checks."""
    lsc = energy_lsc_check(seq, grid)
    rows = []
    for j, fj in seq.members():
        rows.append((j,
                     uniform_distance(fj, seq.limit, grid),
                     weak_pullback_residual(fj, seq.limit, zeta, F, grid),
                     lsc.energies[j]))
    limit_report = (limit_distortion(seq, F, grid, K, tol)
                    if K is not None else None)
    return ConvergenceReport(rows, lsc.limit_energy, lsc, limit_report,
                             seq.name)


def write_convergence_csv(report: ConvergenceReport, path) -> None:
    """Columns: j, uniform_distance, weak_residual, n_energy."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "uniform_distance", "weak_residual",
                         "n_energy"])
        for j, u, wr, e in report.rows:
            writer.writerow([j, repr(float(u)), repr(float(wr)),
                             repr(float(e))])


# ---------------------------------------------------------------------------
# built-in families


def polynomial_drift_family(indices: Sequence[int]) -> SequenceSpec:
    """f_j = z^2 + z/j, holomorphic, converging uniformly to z^2."""
    from .maps import holomorphic_polynomial
    limit = holomorphic_polynomial([[0.0, 0.0, 1.0]], name="z^2")
    return SequenceSpec(polynomial_drift, limit, list(indices),
                        "polynomial_drift")


def oscillation_family(indices: Sequence[int]) -> SequenceSpec:
    """f_j = (x, y + sin(jx)/j): uniform convergence to the identity with a
    persistent n-energy gap (the gradients do not converge pointwise)."""
    return SequenceSpec(oscillation, identity(2), list(indices),
                        "oscillation")


def winding_drift_family(p: int, indices: Sequence[int]) -> SequenceSpec:
    """f_j = z^p + z/j converging to the winding map z^p."""
    from .maps import holomorphic_polynomial

    def gen(j):
        coeffs = [0.0, 1.0 / j] + [0.0] * (p - 2) + [1.0]
        return holomorphic_polynomial([coeffs], name=f"z^{p}+z/{j}")

    return SequenceSpec(gen, winding(p), list(indices), f"winding_drift({p})")


BUILTIN_FAMILIES = {
    "polynomial_drift": (polynomial_drift_family,
                         "polynomial_drift(indices)"),
    "oscillation": (oscillation_family, "oscillation(indices)"),
    "winding_drift": (winding_drift_family, "winding_drift(p, indices)"),
}
