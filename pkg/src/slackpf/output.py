"""Result files: load-displacement CSV, VTK snapshots, KKT log, metadata and checkpoints."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .fem import DofMap, Formulation, SystemState
from .fem.assembly import FICTITIOUS_FACTOR
from .material_models import Softening, softening_constants
from .mesh import Mesh
from .solver import RESEED_REL, Progress, SimulationResult, SolverConfig, StepRecord

LD_HEADER = "step,t,u_mm,load_kN,iters,err"
KKT_KEYS = (
    "primal_violation", "dual_violation", "complementarity",
    "slack_residual", "slack_product", "min_multiplier", "n_offending",
)

# VTK legacy cell type ids
_VTK_TYPES = {"tri3": 5, "quad4": 9}


def fmt(x: float) -> str:
    """Fixed 12-significant-digit decimal text, independent of platform repr."""
    return np.format_float_positional(float(x), precision=12, unique=False, fractional=False, trim="-")


def ld_row(rec: StepRecord) -> str:
    return ",".join([str(rec.step), fmt(rec.t), fmt(rec.u_applied), fmt(rec.load_kN), str(rec.iterations), fmt(rec.err)])


def write_ld_csv(records: SimulationResult | Iterable[StepRecord], path) -> None:
    """Load-displacement table in mm and kN; header only when there are no records."""
    if isinstance(records, SimulationResult):
        records = records.records
    lines = [LD_HEADER] + [ld_row(r) for r in records]
    Path(path).write_text("\n".join(lines) + "\n")


def read_ld_csv(path) -> np.ndarray:
    """Structured array of a CSV written by :func:`write_ld_csv`."""
    return np.genfromtxt(path, delimiter=",", names=True, dtype=None, ndmin=1)


def write_kkt_csv(records: Iterable[StepRecord], path) -> None:
    lines = ["step," + ",".join(KKT_KEYS)]
    for r in records:
        lines.append(",".join([str(r.step)] + [fmt(r.kkt.get(k, np.nan)) for k in KKT_KEYS]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_fields(state: SystemState, mesh: Mesh, path, eta: float | None = None) -> None:
    """Legacy ASCII unstructured-grid file with nodal u, phi, theta, lam and h - theta^2.

    phi is written clipped to [0, 1], the range every constitutive evaluation
    sees. For the penalty formulation ``lam`` holds the effective multiplier
    ``-eta (h - theta^2)`` when ``eta`` is given.
    """
    if state.dofmap.n_nodes != mesh.n_nodes:
        raise ValueError(f"state has {state.dofmap.n_nodes} nodes, mesh has {mesh.n_nodes}")
    n = mesh.n_nodes
    blocks = list(mesh.cell_blocks())
    n_cells = sum(len(conn) for _, conn, _ in blocks)
    size = sum(len(conn) * (conn.shape[1] + 1) for _, conn, _ in blocks)

    out = ["# vtk DataFile Version 3.0", "slackpf fields", "ASCII", "DATASET UNSTRUCTURED_GRID"]
    out.append(f"POINTS {n} double")
    out += [f"{fmt(x)} {fmt(y)} 0" for x, y in mesh.nodes]
    out.append(f"CELLS {n_cells} {size}")
    for _, conn, _ in blocks:
        k = conn.shape[1]
        out += [f"{k} " + " ".join(map(str, row)) for row in conn.tolist()]
    out.append(f"CELL_TYPES {n_cells}")
    for kind, conn, _ in blocks:
        out += [str(_VTK_TYPES[kind])] * len(conn)

    out.append(f"POINT_DATA {n}")
    out.append("VECTORS u double")
    out += [f"{fmt(a)} {fmt(b)} 0" for a, b in state.u]
    h = state.phi - state.phi_prev
    scalars = {"phi": np.clip(state.phi, 0.0, 1.0), "theta": state.theta}
    if state.lam is not None:
        scalars["lam"] = state.lam
    elif eta is not None:
        scalars["lam"] = -eta * (h - state.theta**2)
    scalars["slack_gap"] = h - state.theta**2
    for name, values in scalars.items():
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [fmt(v) for v in values]
    Path(path).write_text("\n".join(out) + "\n")


def read_vtk_point_scalars(path) -> dict[str, np.ndarray]:
    """Minimal reader for the scalar point data written by :func:`write_fields`."""
    lines = Path(path).read_text().splitlines()
    out, i = {}, 0
    n = None
    while i < len(lines):
        parts = lines[i].split()
        if parts and parts[0] == "POINT_DATA":
            n = int(parts[1])
        elif parts and parts[0] == "SCALARS" and n is not None:
            out[parts[1]] = np.array([float(v) for v in lines[i + 2 : i + 2 + n]])
            i += 2 + n
            continue
        i += 1
    return out


def run_metadata(problem, config: SolverConfig, result: SimulationResult | None = None, **extra) -> dict:
    """Every numerical choice that is not fixed by the model equations."""
    frac = problem.fracture
    a2_exp = softening_constants(Softening.EXPONENTIAL)[1]
    meta = {
        "package_version": __version__,
        "benchmark": problem.summary(),
        "formulation": config.formulation.value,
        "eta": config.eta if config.formulation is Formulation.PENALTY else None,
        "tol": config.tol,
        "scales": config.scales(frac.Gc, frac.length_scale),
        "fictitious_stiffness": {
            "kappa_f": FICTITIOUS_FACTOR * frac.Gc / frac.length_scale,
            "rule": "kappa_f times the lumped nodal area is added to a theta/lam diagonal whose magnitude falls below it",
            "enabled": config.fictitious,
        },
        "plane": problem.plane,
        "thickness_mm": problem.thickness,
        "interpolation": {
            "u": "linear Lagrange, full Gauss quadrature",
            "phi": "linear Lagrange, full Gauss quadrature",
            "theta": "linear Lagrange, nodal (lumped) quadrature",
            "lam": "linear Lagrange, nodal (lumped) quadrature" if config.formulation is Formulation.LMM else None,
        },
        "exponential_a2": {"value": a2_exp, "reading": "2**(5/3) - 3 as a positive constant"},
        "newton": {
            "kind": "full Newton, no damping or line search",
            "max_iters": config.max_iters,
            "max_halvings": config.max_halvings,
            "linear_solver": "scipy.sparse.linalg.splu",
        },
        "slack_handling": {
            "theta_seed": config.theta_seed,
            "warm_start": "nodes that grew last step start the step on the inactive branch",
            "lock_on_sign_change": config.lock_on_sign_change,
            "max_reseeds": config.max_reseeds,
            "reseed_floor": config.reseed,
            "reseed_release_rel": RESEED_REL,
        },
        "units": {"length": "mm", "load": "kN", "stress": "N/mm^2"},
    }
    if result is not None:
        meta.update(status=result.status, message=result.message, n_steps=len(result.records))
    meta.update(extra)
    return meta


def write_metadata(meta: dict, path) -> None:
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


def save_checkpoint(path, progress: Progress) -> None:
    """Everything needed to continue a run bit-for-bit."""
    st = progress.state
    lg = progress.last_growth if progress.last_growth is not None else np.zeros(st.dofmap.n_nodes)
    records = json.dumps([asdict(r) for r in progress.records])
    np.savez(
        path,
        x=st.x, phi_prev=st.phi_prev, last_growth=lg,
        t=st.t, step=st.step, u_applied=progress.u_applied,
        phase=progress.phase, count=progress.count,
        formulation=st.dofmap.formulation.value, n_nodes=st.dofmap.n_nodes,
        records=records,
    )


def load_checkpoint(path, dofmap: DofMap | None = None) -> Progress:
    with np.load(path) as d:
        form = Formulation(str(d["formulation"]))
        n_nodes = int(d["n_nodes"])
        if dofmap is not None and (dofmap.formulation is not form or dofmap.n_nodes != n_nodes):
            raise ValueError(
                f"checkpoint holds a {form.value} state on {n_nodes} nodes, "
                f"run expects {dofmap.formulation.value} on {dofmap.n_nodes}"
            )
        state = SystemState(DofMap(n_nodes, form), d["x"].copy(), d["phi_prev"].copy(), float(d["t"]), int(d["step"]))
        records = [StepRecord(**r) for r in json.loads(str(d["records"]))]
        return Progress(
            state, float(d["u_applied"]), int(d["phase"]), int(d["count"]), records, d["last_growth"].copy()
        )
