"""Field-wise DOF numbering and the solution state container."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Formulation(str, enum.Enum):
    LMM = "lmm"
    PENALTY = "penalty"


@dataclass(frozen=True)
class DofMap:
    """Dense field-blocked numbering.

    Displacements come first (node-interleaved ``ux, uy``), followed by one
    block of ``n_nodes`` entries per scalar field: ``phi``, ``theta`` and, for
    the multiplier formulation, ``lam``.
    """

    n_nodes: int
    formulation: Formulation

    @property
    def fields(self) -> tuple[str, ...]:
        base = ("u", "phi", "theta")
        return base + ("lam",) if self.formulation is Formulation.LMM else base

    @property
    def scalar_fields(self) -> tuple[str, ...]:
        return self.fields[1:]

    def offset(self, name: str) -> int:
        if name == "u":
            return 0
        return self.n_nodes * (2 + self.scalar_fields.index(name))

    def size(self, name: str) -> int:
        return 2 * self.n_nodes if name == "u" else self.n_nodes

    @property
    def total_dofs(self) -> int:
        return self.n_nodes * (1 + len(self.fields))

    def slice(self, name: str) -> slice:
        o = self.offset(name)
        return slice(o, o + self.size(name))

    def u_dof(self, nodes, component: int) -> np.ndarray:
        return 2 * np.asarray(nodes, dtype=int) + component

    def scalar_dof(self, name: str, nodes) -> np.ndarray:
        return self.offset(name) + np.asarray(nodes, dtype=int)

    def element_dofs(self, conn: np.ndarray) -> np.ndarray:
        """Global DOFs per element in local order ``[u (interleaved), phi, theta, (lam)]``."""
        ne, nen = conn.shape
        u = np.empty((ne, 2 * nen), dtype=int)
        u[:, 0::2] = 2 * conn
        u[:, 1::2] = 2 * conn + 1
        parts = [u] + [self.offset(f) + conn for f in self.scalar_fields]
        return np.concatenate(parts, axis=1)

    def field_of_dof(self) -> np.ndarray:
        """Index into :attr:`fields` for every global DOF."""
        out = np.empty(self.total_dofs, dtype=int)
        for k, f in enumerate(self.fields):
            out[self.slice(f)] = k
        return out


@dataclass
class SystemState:
    """All nodal unknowns plus the phase field of the last accepted step."""

    dofmap: DofMap
    x: np.ndarray
    phi_prev: np.ndarray
    t: float = 0.0
    step: int = 0

    @classmethod
    def zeros(cls, dofmap: DofMap) -> "SystemState":
        return cls(dofmap, np.zeros(dofmap.total_dofs), np.zeros(dofmap.n_nodes))

    def field(self, name: str) -> np.ndarray:
        """View into the global vector; reshaped to (n, 2) for ``u``."""
        v = self.x[self.dofmap.slice(name)]
        return v.reshape(-1, 2) if name == "u" else v

    @property
    def u(self) -> np.ndarray:
        return self.field("u")

    @property
    def phi(self) -> np.ndarray:
        return self.field("phi")

    @property
    def theta(self) -> np.ndarray:
        return self.field("theta")

    @property
    def lam(self) -> np.ndarray | None:
        return self.field("lam") if "lam" in self.dofmap.fields else None

    def copy(self) -> "SystemState":
        return SystemState(self.dofmap, self.x.copy(), self.phi_prev.copy(), self.t, self.step)

    def accept(self) -> None:
        """Commit the current phase field as the irreversibility reference."""
        self.phi_prev = self.phi.copy()
