"""Post-hoc check of the irreversibility KKT conditions at nodes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dofs import Formulation, SystemState


@dataclass(frozen=True)
class KKTReport:
    """Nodal KKT diagnostics.

    ``multiplier`` is the nodal Lagrange multiplier for the multiplier
    formulation and ``-eta (h - theta^2)`` for the penalty formulation.
    Violations are reported as non-negative magnitudes.
    """

    primal_violation: float  # max(-min(h, 0))
    dual_violation: float  # max(-min(multiplier, 0))
    complementarity: float  # max |multiplier * h|
    slack_residual: float  # max |theta^2 - h|
    slack_product: float  # max |multiplier * theta|
    min_multiplier: float
    offending_nodes: np.ndarray  # nodes violating primal or dual feasibility beyond tol
    tol: float

    @property
    def passed(self) -> bool:
        return len(self.offending_nodes) == 0

    def as_dict(self) -> dict:
        return {
            "primal_violation": self.primal_violation,
            "dual_violation": self.dual_violation,
            "complementarity": self.complementarity,
            "slack_residual": self.slack_residual,
            "slack_product": self.slack_product,
            "min_multiplier": self.min_multiplier,
            "n_offending": int(len(self.offending_nodes)),
        }


def nodal_multiplier(state: SystemState, eta: float | None = None) -> np.ndarray:
    if state.dofmap.formulation is Formulation.LMM:
        return state.lam.copy()
    if eta is None:
        raise ValueError("penalty multiplier needs eta")
    h = state.phi - state.phi_prev
    return -eta * (h - state.theta**2)


def kkt_report(state: SystemState, tol: float, eta: float | None = None, multiplier_scale: float = 1.0) -> KKTReport:
    """Primal/dual feasibility and complementarity of a converged state.

    ``tol`` bounds ``h`` violations directly and multiplier violations after
    division by ``multiplier_scale``.
    """
    h = state.phi - state.phi_prev
    lam = nodal_multiplier(state, eta)
    theta = state.theta
    bad = (h < -tol) | (lam < -tol * multiplier_scale)
    return KKTReport(
        primal_violation=float(max(0.0, -h.min(initial=0.0))),
        dual_violation=float(max(0.0, -lam.min(initial=0.0))),
        complementarity=float(np.abs(lam * h).max(initial=0.0)),
        slack_residual=float(np.abs(theta**2 - h).max(initial=0.0)),
        slack_product=float(np.abs(lam * theta).max(initial=0.0)),
        min_multiplier=float(lam.min(initial=0.0)),
        offending_nodes=np.flatnonzero(bad),
        tol=tol,
    )
