"""Global assembly, constraint elimination and fictitious stiffness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..material_models import count_overshoot
from .dofs import DofMap, Formulation, SystemState
from .kernels import (
    Constitutive,
    ElementContrib,
    element_residual_pen,
    element_residual_phi_lmm,
    element_residual_phi,
    element_residual_theta_lambda_lmm,
    element_residual_u,
)
from .shape import ElementGeometry

# kappa_f = FICTITIOUS_FACTOR * Gc / l, per unit area of the node's support.
FICTITIOUS_FACTOR = 1.0e-8

_COMMON_BLOCKS = [(("u", "u"), True), (("u", "phi"), True), (("phi", "u"), True), (("phi", "phi"), True)]
_LMM_BLOCKS = [
    (("phi", "lam"), False),
    (("theta", "theta"), False),
    (("theta", "lam"), False),
    (("lam", "phi"), False),
    (("lam", "theta"), False),
]
_PEN_BLOCKS = [(("phi", "theta"), False), (("theta", "phi"), False), (("theta", "theta"), False)]


def element_contributions(
    geo: ElementGeometry, dofmap: DofMap, state: SystemState, mat, eta=None, tangent: bool = True
) -> ElementContrib:
    """All element residuals/tangents of one block for the active formulation."""
    conn = geo.conn
    ue = state.u[conn]
    phie = state.phi[conn]
    thetae = state.theta[conn]
    phin = state.phi_prev[conn]
    out = element_residual_u(geo, ue, phie, mat, tangent)
    if dofmap.formulation is Formulation.LMM:
        lame_e = state.lam[conn]
        out += element_residual_phi_lmm(geo, ue, phie, lame_e, mat, tangent)
        out += element_residual_theta_lambda_lmm(geo, phie, phin, thetae, lame_e)
    else:
        if eta is None or not eta > 0:
            raise ValueError("penalty formulation needs eta > 0")
        out += element_residual_phi(geo, ue, phie, mat, tangent)
        out += element_residual_pen(geo, phie, phin, thetae, eta)
    return out


@dataclass
class Constraints:
    """Affine map ``x = T y + x_p`` from reduced unknowns ``y`` to all DOFs.

    ``load_dir`` is ``dx / du_applied``: it moves the prescribed part of
    ``x`` when the applied displacement changes, and its dot product with the
    internal force vector is the reaction load on the driven boundary.
    """

    T: sp.csr_matrix
    load_dir: np.ndarray
    reduced_field: np.ndarray  # field index per reduced DOF, -1 for pin masters
    selection: np.ndarray | None  # reduced -> full DOF when T is a pure selection

    @property
    def n_reduced(self) -> int:
        return self.T.shape[1]

    def reduce_matrix(self, K: sp.csr_matrix) -> sp.csr_matrix:
        if self.selection is not None:
            return K[self.selection][:, self.selection].tocsc()
        return (self.T.T @ K @ self.T).tocsc()

    def reduce_vector(self, r: np.ndarray) -> np.ndarray:
        if self.selection is not None:
            return r[self.selection]
        return self.T.T @ r

    def expand(self, dy: np.ndarray) -> np.ndarray:
        return self.T @ dy


@dataclass(frozen=True)
class PinSpec:
    """Rigid connector tying ``nodes`` to a master at ``center``.

    ``ux``/``uy`` give the master translation as a coefficient on the applied
    displacement (0.0 for fixed) or ``None`` when left free; the master
    rotation is always free.
    """

    center: tuple[float, float]
    nodes: np.ndarray
    ux: float | None = 0.0
    uy: float | None = 0.0


def build_constraints(dofmap: DofMap, nodes_xy: np.ndarray, prescribed: dict[int, float], pins=()) -> Constraints:
    """Assemble the constraint map.

    ``prescribed`` maps displacement DOFs to their coefficient on the applied
    displacement (0.0 = fixed).
    """
    n = dofmap.total_dofs
    load_dir = np.zeros(n)
    constrained = np.zeros(n, bool)
    for dof, coeff in prescribed.items():
        constrained[dof] = True
        load_dir[dof] = coeff
    tied = {}
    for pin in pins:
        for node in np.asarray(pin.nodes).tolist():
            for c in (0, 1):
                if constrained[2 * node + c]:
                    raise ValueError(f"node {node} is both prescribed and tied to a pin")
                tied[2 * node + c] = pin
    free = np.flatnonzero(~constrained & ~np.isin(np.arange(n), list(tied)))
    rows, cols, vals = list(free), list(range(len(free))), [1.0] * len(free)
    field_of = dofmap.field_of_dof()
    reduced_field = list(field_of[free])
    col = len(free)
    for pin in pins:
        cx, cy = pin.center
        pn = np.asarray(pin.nodes)
        dx, dy = nodes_xy[pn, 0] - cx, nodes_xy[pn, 1] - cy
        for comp, coeff in ((0, pin.ux), (1, pin.uy)):
            dofs = 2 * pn + comp
            if coeff is None:
                rows += dofs.tolist()
                cols += [col] * len(dofs)
                vals += [1.0] * len(dofs)
                reduced_field.append(-1)
                col += 1
            else:
                load_dir[dofs] = coeff
        # rotation: ux -= w * dy, uy += w * dx
        rows += (2 * pn).tolist() + (2 * pn + 1).tolist()
        cols += [col] * (2 * len(pn))
        vals += (-dy).tolist() + dx.tolist()
        reduced_field.append(-1)
        col += 1
    T = sp.csr_matrix((vals, (rows, cols)), shape=(n, col))
    selection = free if not pins else None
    return Constraints(T, load_dir, np.array(reduced_field, dtype=int), selection)


@dataclass
class AssembledSystem:
    K: sp.csr_matrix
    residual: np.ndarray
    clipped: int  # Gauss/nodal phi values outside [0, 1] beyond tolerance

    def reaction(self, load_dir: np.ndarray) -> float:
        return float(load_dir @ self.residual)


class Assembler:
    """Assembles the global residual and tangent for one mesh and formulation.

    The sparsity pattern is computed once; every call scatters values with a
    fixed-order ``bincount`` so results are bit-reproducible.
    """

    def __init__(self, mesh, dofmap: DofMap, mat: Constitutive, eta: float | None = None, fictitious: bool = True):
        self.mesh = mesh
        self.dofmap = dofmap
        self.mat = mat
        self.eta = eta
        self.fictitious = fictitious
        self.geometries = [ElementGeometry.build(t, conn, mesh.nodes) for t, conn, _ in mesh.cell_blocks()]
        blocks = _COMMON_BLOCKS + (_LMM_BLOCKS if dofmap.formulation is Formulation.LMM else _PEN_BLOCKS)
        self.block_keys = blocks
        self.node_area = np.zeros(dofmap.n_nodes)
        for geo in self.geometries:
            np.add.at(self.node_area, geo.conn, geo.lumped)
        self.kappa = FICTITIOUS_FACTOR * mat.fracture.Gc / mat.fracture.length_scale
        reg_fields = [f for f in ("theta", "lam") if f in dofmap.fields]
        self.reg_dofs = np.concatenate([dofmap.scalar_dof(f, np.arange(dofmap.n_nodes)) for f in reg_fields])
        self._build_pattern()

    def _local(self, geo: ElementGeometry, name: str) -> np.ndarray:
        conn = geo.conn
        if name == "u":
            out = np.empty((len(conn), 2 * conn.shape[1]), dtype=int)
            out[:, 0::2] = 2 * conn
            out[:, 1::2] = 2 * conn + 1
            return out
        return self.dofmap.scalar_dof(name, conn)

    def _build_pattern(self):
        rows, cols = [], []
        for geo in self.geometries:
            for (f, g), dense in self.block_keys:
                F, G = self._local(geo, f), self._local(geo, g)
                if dense:
                    rows.append(np.broadcast_to(F[:, :, None], F.shape + (G.shape[1],)).ravel())
                    cols.append(np.broadcast_to(G[:, None, :], (F.shape[0], F.shape[1], G.shape[1])).ravel())
                else:
                    rows.append(F.ravel())
                    cols.append(G.ravel())
        rows.append(self.reg_dofs)
        cols.append(self.reg_dofs)
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        n = self.dofmap.total_dofs
        key = rows.astype(np.int64) * n + cols
        uniq, inverse = np.unique(key, return_inverse=True)
        self._inverse = inverse.ravel()
        self._nnz = len(uniq)
        r, c = uniq // n, uniq % n
        # CSR structure of the unique (row, col) pairs, already row-major sorted.
        self._indptr = np.concatenate([[0], np.cumsum(np.bincount(r, minlength=n))])
        self._indices = c.astype(np.int32)
        diag_key = self.reg_dofs.astype(np.int64) * n + self.reg_dofs
        self._reg_pos = np.searchsorted(uniq, diag_key)

    def contributions(self, state: SystemState, tangent: bool = True) -> list[ElementContrib]:
        return [element_contributions(geo, self.dofmap, state, self.mat, self.eta, tangent) for geo in self.geometries]

    def assemble(self, state: SystemState) -> AssembledSystem:
        n = self.dofmap.total_dofs
        r = np.zeros(n)
        values = []
        clipped = count_overshoot(state.phi)
        for geo, con in zip(self.geometries, self.contributions(state)):
            for name, vec in con.res.items():
                np.add.at(r, self._local(geo, name), vec)
            for key, dense in self.block_keys:
                v = con.jac[key]
                if dense and v.ndim == 2:
                    raise AssertionError(f"block {key} expected dense")
                if not dense and v.ndim == 3:
                    raise AssertionError(f"block {key} expected diagonal")
                values.append(v.ravel())
        values.append(np.zeros(len(self.reg_dofs)))
        data = np.bincount(self._inverse, weights=np.concatenate(values), minlength=self._nnz)
        if self.fictitious:
            area = np.tile(self.node_area, len(self.reg_dofs) // self.dofmap.n_nodes)
            kf = self.kappa * area
            small = np.abs(data[self._reg_pos]) < kf
            data[self._reg_pos] += np.where(small, kf, 0.0)
        K = sp.csr_matrix((data, self._indices, self._indptr), shape=(n, n))
        return AssembledSystem(K, r, clipped)

    def residual(self, state: SystemState) -> np.ndarray:
        r = np.zeros(self.dofmap.total_dofs)
        for geo, con in zip(self.geometries, self.contributions(state, tangent=False)):
            for name, vec in con.res.items():
                np.add.at(r, self._local(geo, name), vec)
        return r
