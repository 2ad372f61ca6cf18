"""Shared builders for the finite-element tests."""

from __future__ import annotations

import numpy as np

from slackpf.fem import Assembler, Constitutive, DofMap, Formulation, SystemState
from slackpf.material_models import FractureParams, PhaseFieldModel
from slackpf.mesh import generate_rect_mesh
from slackpf.tensor_kernels import LameParams, spectral_split

SEN_LAME = LameParams(121.154e3, 80.769e3)
SEN_FRACTURE = FractureParams(Gc=2.7, length_scale=0.015)
TPB_FRACTURE = FractureParams(Gc=0.113, length_scale=2.5, E0=2.0e4, ft=2.4)
TPB_LAME = LameParams(5555.555555555556, 8333.333333333334)


def material(kind: str) -> Constitutive:
    if kind == "at2":
        return Constitutive(PhaseFieldModel.brittle("at2"), SEN_LAME, SEN_FRACTURE)
    return Constitutive(PhaseFieldModel.quasi_brittle(kind, TPB_FRACTURE), TPB_LAME, TPB_FRACTURE)


def patch(mat: Constitutive, n: int = 2):
    """n x n quad patch sized to the length scale, so gradient terms matter."""
    size = 2.0 * mat.fracture.length_scale
    return generate_rect_mesh(size, size, size / n)


def random_state(mesh, dofmap: DofMap, mat: Constitutive, rng, strain: float = 2e-3, gap: float = 1e-4) -> SystemState:
    st = SystemState.zeros(dofmap)
    L = mesh.nodes.max()
    st.u[:] = rng.normal(scale=strain * L, size=st.u.shape)
    st.phi_prev[:] = rng.uniform(0.0, 0.4, dofmap.n_nodes)
    st.phi[:] = st.phi_prev + rng.uniform(0.02, 0.5, dofmap.n_nodes)
    st.theta[:] = rng.choice([-1.0, 1.0], dofmap.n_nodes) * rng.uniform(0.05, 0.6, dofmap.n_nodes)
    if st.lam is not None:
        st.lam[:] = rng.normal(scale=mat.fracture.Gc / mat.fracture.length_scale, size=dofmap.n_nodes)
    else:
        # penalty states: small constraint gap h - theta^2, as near a penalty solution;
        # a large gap times eta would drown the finite differences in round-off
        h = st.phi - st.phi_prev
        st.theta[:] = np.sign(st.theta) * np.sqrt(h + rng.uniform(-gap, gap, dofmap.n_nodes))
    return st


def near_kink(asm: Assembler, state: SystemState, rel: float = 1e-4) -> bool:
    """True if a Gauss-point strain sits near an eigenvalue or trace kink of the split."""
    for geo in asm.geometries:
        ue = state.u[geo.conn].reshape(len(geo.conn), -1)
        from slackpf.fem.kernels import strains

        _, eps = strains(geo, ue)
        sp = spectral_split(eps)
        e1, e2 = sp.eigenvalues[..., 0], sp.eigenvalues[..., 1]
        scale = np.abs(sp.eigenvalues).max()
        if (np.abs(e1) < rel * scale).any() or (np.abs(e2) < rel * scale).any():
            return True
        if (np.abs(e1 - e2) < rel * scale).any() or (np.abs(e1 + e2) < rel * scale).any():
            return True
    return False


def fd_blocks(asm: Assembler, state: SystemState, steps: dict[str, float]) -> dict[tuple[str, str], float]:
    """Central-difference Jacobian of the residual, compared block by block.

    Returns the max-norm error of every field-pair block relative to the max
    entry of the matching assembled block (or of the whole matrix when the
    block is empty).
    """
    dm = asm.dofmap
    K = asm.assemble(state).K.toarray()
    fd = np.zeros_like(K)
    field_of = dm.field_of_dof()
    for j in range(dm.total_dofs):
        h = steps[dm.fields[field_of[j]]]
        x0 = state.x[j]
        state.x[j] = x0 + h
        rp = asm.residual(state)
        state.x[j] = x0 - h
        rm = asm.residual(state)
        state.x[j] = x0
        fd[:, j] = (rp - rm) / (2 * h)
    out = {}
    gmax = np.abs(K).max()
    for f in dm.fields:
        for g in dm.fields:
            a, b = K[dm.slice(f), dm.slice(g)], fd[dm.slice(f), dm.slice(g)]
            ref = np.abs(a).max()
            out[(f, g)] = float(np.abs(a - b).max() / (ref if ref > 0 else gmax))
    return out


def fd_steps(mat: Constitutive) -> dict[str, float]:
    L = 2.0 * mat.fracture.length_scale
    return {"u": 1e-5 * L * 2e-3, "phi": 1e-6, "theta": 1e-6, "lam": 1e-6 * mat.fracture.Gc / mat.fracture.length_scale}


def build(kind: str, formulation: Formulation, n: int = 2, eta: float = 1e6, fictitious: bool = False):
    mat = material(kind)
    mesh = patch(mat, n)
    dm = DofMap(mesh.n_nodes, formulation)
    asm = Assembler(mesh, dm, mat, eta if formulation is Formulation.PENALTY else None, fictitious=fictitious)
    return mat, mesh, dm, asm
