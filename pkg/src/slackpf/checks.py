"""Fast self-checks on homogeneous patches with closed-form answers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fem import Constitutive, DofMap, build_constraints
from .material_models import FractureParams, ModelKind, PhaseFieldModel, Softening, compute_a1, softening_constants
from .mesh import Mesh, generate_rect_mesh
from .solver import Formulation, SimulationResult, SolverConfig, StepSchedule, error_norm, run_simulation
from .tensor_kernels import LameParams, ddot, psi_split, spectral_split, trace

SEN_LAME = LameParams(121.154e3, 80.769e3)
SEN_FRACTURE = FractureParams(Gc=2.7, length_scale=0.015)


@dataclass(frozen=True)
class PatchProblem:
    """Rectangle whose displacement is fully prescribed as ``u = (x * load, 0)``.

    The strain is uniform uniaxial with ``eps_xx`` equal to the applied
    load parameter, so the phase field is homogeneous.
    """

    mesh: Mesh
    constitutive: Constitutive
    schedule: StepSchedule
    thickness: float = 1.0
    name: str = "patch"

    def constraints(self, dofmap: DofMap):
        x = self.mesh.nodes[:, 0]
        presc = {2 * a: float(x[a]) for a in range(self.mesh.n_nodes)}
        presc.update({2 * a + 1: 0.0 for a in range(self.mesh.n_nodes)})
        return build_constraints(dofmap, self.mesh.nodes, presc)


def critical_strain(lame: LameParams = SEN_LAME, fracture: FractureParams = SEN_FRACTURE) -> float:
    """Uniaxial strain at which the tensile energy equals Gc / (2 l)."""
    return math.sqrt(fracture.Gc / (2.0 * fracture.length_scale) / (0.5 * lame.lambda1 + lame.mu))


def patch_problem(schedule: StepSchedule, model: PhaseFieldModel | None = None, nx: int = 1) -> PatchProblem:
    mesh = generate_rect_mesh(1.0, 1.0, 1.0 / nx, [])
    mat = Constitutive(model or PhaseFieldModel.brittle(ModelKind.AT2), SEN_LAME, SEN_FRACTURE)
    return PatchProblem(mesh, mat, schedule)


def load_unload(formulation: Formulation | str, n_unload: int = 10) -> SimulationResult:
    """Load one element to the AT2 half-damage strain, then unload to zero."""
    e = critical_strain()
    sched = StepSchedule(((1, e), (n_unload, -e / n_unload)))
    return run_simulation(patch_problem(sched), SolverConfig(formulation=Formulation(formulation)))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _homogeneous(form: Formulation) -> CheckResult:
    e = critical_strain()
    res = run_simulation(patch_problem(StepSchedule(((1, e),))), SolverConfig(formulation=form))
    phi = res.state.phi
    dev = float(np.abs(phi - 0.5).max()) if res.status == "completed" else math.inf
    return CheckResult(f"homogeneous AT2 phi = 1/2 ({form.value})", dev < 1e-6, f"max |phi - 0.5| = {dev:.2e}")


def _irreversible(form: Formulation, tol: float = 1e-4) -> CheckResult:
    res = load_unload(form)
    if res.status != "completed":
        return CheckResult(f"unload keeps phi ({form.value})", False, res.message)
    drop = -min(r.min_increment for r in res.records)
    return CheckResult(f"unload keeps phi ({form.value})", drop <= 10 * tol, f"largest per-step decrease {max(drop, 0):.2e}")


def _random_strains(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).normal(scale=1e-3, size=(n, 3))


def _split(n: int = 2000, seed: int = 0) -> CheckResult:
    eps = _random_strains(n, seed)
    sp = spectral_split(eps)
    scale = np.abs(eps).max()
    sum_err = float(np.abs(sp.eps_plus + sp.eps_minus - eps).max() / scale)
    orth = float(np.abs(ddot(sp.eps_plus, sp.eps_minus)).max() / scale**2)
    return CheckResult("spectral split identities", sum_err < 1e-12 and orth < 1e-12, f"sum {sum_err:.1e}, orthogonality {orth:.1e}")


def _energy_sum(n: int = 2000, seed: int = 1) -> CheckResult:
    eps = _random_strains(n, seed)
    pp, pm = psi_split(eps, SEN_LAME)
    full = 0.5 * SEN_LAME.lambda1 * trace(eps) ** 2 + SEN_LAME.mu * ddot(eps, eps)
    err = float(np.abs(pp + pm - full).max() / np.abs(full).max())
    ok = err < 1e-12 and pp.min() >= 0 and pm.min() >= 0
    return CheckResult("energy split sums to the elastic energy", bool(ok), f"relative error {err:.1e}")


def _quasi_brittle() -> CheckResult:
    tpb = compute_a1(FractureParams(Gc=0.113, length_scale=2.5, E0=2.0e4, ft=2.4))
    lp = compute_a1(FractureParams(Gc=0.130, length_scale=5.0, E0=2.0e4, ft=2.5))
    ok = abs(tpb - 199.83) < 0.05 and abs(lp - 105.93) < 0.05 and softening_constants(Softening.CORNELISSEN) == (2.0, 1.3868, 0.6567)
    return CheckResult("quasi-brittle a1 values", ok, f"a1 = {tpb:.2f}, {lp:.2f}")


def _norm() -> CheckResult:
    v = error_norm([np.array([1e-5])], [np.array([0.5])], [1.0])
    return CheckResult("convergence norm", abs(v - 1e-5) < 1e-15, f"single-DOF value {v:.3e}")


def run_checks() -> list[CheckResult]:
    out = [_split(), _energy_sum(), _quasi_brittle(), _norm()]
    for form in Formulation:
        out += [_homogeneous(form), _irreversible(form)]
    return out
