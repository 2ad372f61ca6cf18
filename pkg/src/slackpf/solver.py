"""Monolithic Newton-Raphson driver with pseudo-time stepping."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .fem import Assembler, Constraints, DofMap, Formulation, SystemState, kkt_report, nodal_multiplier

log = logging.getLogger(__name__)

RESEED_REL = 1.0e-10


class SolverError(RuntimeError):
    pass


class NonConvergence(SolverError):
    def __init__(self, message: str, errors: Sequence[float] = ()):
        super().__init__(message)
        self.errors = list(errors)

    @property
    def last_error(self) -> float:
        return self.errors[-1] if self.errors else math.nan


class LinearSolveFailure(SolverError):
    def __init__(self, message: str, size: int):
        super().__init__(message)
        self.size = size


@dataclass(frozen=True)
class StepSchedule:
    """Ordered ``(count, increment)`` phases of prescribed displacement (mm)."""

    phases: tuple[tuple[int, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple((int(c), float(d)) for c, d in self.phases))
        for c, d in self.phases:
            if c <= 0:
                raise ValueError(f"phase step count must be positive, got {c}")
            if d == 0.0:
                raise ValueError("phase increment must be nonzero")

    @property
    def total_steps(self) -> int:
        return sum(c for c, _ in self.phases)

    @property
    def end_displacement(self) -> float:
        return sum(c * d for c, d in self.phases)

    @classmethod
    def until(cls, phases: Sequence[tuple[int | None, float]], end: float) -> "StepSchedule":
        """Phases where a count of ``None`` means "as many steps as needed to reach ``end``"."""
        out, u = [], 0.0
        for count, du in phases:
            if count is None:
                count = max(1, math.ceil((end - u) / du - 1e-9))
            out.append((count, du))
            u += count * du
        return cls(tuple(out))

    def increments(self, start_phase: int = 0, start_count: int = 0):
        """Yield ``(phase_index, count_in_phase, du)`` from the given position."""
        for p in range(start_phase, len(self.phases)):
            count, du = self.phases[p]
            for k in range(start_count if p == start_phase else 0, count):
                yield p, k, du


@dataclass(frozen=True)
class SolverConfig:
    formulation: Formulation = Formulation.LMM
    tol: float = 1.0e-4
    max_iters: int = 50
    eta: float = 1.0e6
    # per-field scaling S_j; None entries fall back to defaults_for()
    scaling: dict[str, float] | None = None
    max_steps: int | None = None
    u_end: float | None = None
    stop_load_fraction: float | None = None
    max_halvings: int = 4
    theta_seed: float = 0.0
    # re-solves allowed when a converged step sits on a dual-infeasible theta = 0 root
    max_reseeds: int = 8
    # lower bound on the slack of a reseeded node
    reseed: float = 1.0e-3
    fictitious: bool = True
    lock_on_sign_change: bool = True

    def __post_init__(self):
        object.__setattr__(self, "formulation", Formulation(self.formulation))
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.formulation is Formulation.PENALTY and not self.eta > 0:
            raise ValueError("eta must be positive for the penalty formulation")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        for k, v in (self.scaling or {}).items():
            if not v > 0:
                raise ValueError(f"scaling for {k!r} must be positive")

    def scales(self, Gc: float, length_scale: float) -> dict[str, float]:
        base = {"u": 1.0e-3, "phi": 1.0, "theta": 1.0, "lam": Gc / length_scale}
        base.update(self.scaling or {})
        return base


def error_norm(updates: Sequence[np.ndarray], solutions: Sequence[np.ndarray], scales: Sequence[float]) -> float:
    """Weighted Euclidean norm of a Newton update.

    ``sqrt(1/M) * sqrt(sum_j 1/N_j sum_i (|E_ij| / W_ij)^2)`` with
    ``W_ij = max(|U_ij|, S_j)``; fields with no entries are skipped.
    """
    total, m = 0.0, 0
    for e, u, s in zip(updates, solutions, scales):
        e = np.asarray(e, float)
        if e.size == 0:
            continue
        w = np.maximum(np.abs(np.asarray(u, float)), s)
        total += float(np.sum((np.abs(e) / w) ** 2)) / e.size
        m += 1
    if m == 0:
        return 0.0
    return math.sqrt(total / m)


@dataclass
class NewtonResult:
    iterations: int
    errors: list[float]
    reaction: float  # N along the driving direction, times the thickness
    clipped: int


@dataclass
class StepRecord:
    step: int
    t: float
    u_applied: float  # mm
    load_kN: float
    iterations: int
    err: float
    kkt: dict = field(default_factory=dict)
    min_increment: float = 0.0  # min over nodes of phi - phi_prev at acceptance


@dataclass
class SimulationResult:
    records: list[StepRecord]
    state: SystemState
    status: str = "completed"
    message: str = ""
    snapshots: list[tuple[int, SystemState]] = field(default_factory=list)
    progress: Progress | None = None  # resumable end position

    @property
    def loads(self) -> np.ndarray:
        return np.array([r.load_kN for r in self.records])

    @property
    def displacements(self) -> np.ndarray:
        return np.array([r.u_applied for r in self.records])


@dataclass
class Progress:
    """Resumable position within a schedule."""

    state: SystemState
    u_applied: float = 0.0
    phase: int = 0
    count: int = 0
    records: list[StepRecord] = field(default_factory=list)
    # per-node phase growth of the last accepted step, used to warm-start the next
    last_growth: np.ndarray | None = None


class Simulation:
    """Binds a problem to a formulation: DOFs, constraints and assembler."""

    def __init__(self, problem, config: SolverConfig):
        self.problem = problem
        self.config = config
        self.dofmap = DofMap(problem.mesh.n_nodes, config.formulation)
        self.constraints: Constraints = problem.constraints(self.dofmap)
        eta = config.eta if config.formulation is Formulation.PENALTY else None
        self.assembler = Assembler(problem.mesh, self.dofmap, problem.constitutive, eta, config.fictitious)
        frac = problem.constitutive.fracture
        self.scales = config.scales(frac.Gc, frac.length_scale)
        self.thickness = float(getattr(problem, "thickness", 1.0))
        active = np.asarray(abs(self.constraints.T).sum(axis=1)).ravel() > 0
        self.field_dofs = {}
        for f in self.dofmap.fields:
            idx = np.arange(self.dofmap.total_dofs)[self.dofmap.slice(f)]
            self.field_dofs[f] = idx[active[idx]]
        self.free_theta = self.field_dofs["theta"]
        # phase-field increment of the last accepted step, used as predictor
        self.last_growth = np.zeros(self.dofmap.n_nodes)
        self.phi_free = np.zeros(self.dofmap.n_nodes, bool)
        self.phi_free[self.field_dofs["phi"] - self.dofmap.offset("phi")] = True

    def initial_state(self) -> SystemState:
        return SystemState.zeros(self.dofmap)

    def begin_step(self, state: SystemState, du: float) -> None:
        """Apply the displacement increment and seed the slack field.

        Nodes that grew in the previous step start on the inactive branch with
        that step's increment; the others start locked at ``theta_seed``
        (zero by default) and are reseeded after the first solve if their
        multiplier comes out negative.
        """
        state.x += du * self.constraints.load_dir
        nodes = self.free_theta - self.dofmap.offset("theta")
        nodes = nodes[self.phi_free[nodes]]
        growth = np.maximum(self.last_growth[nodes], self.config.theta_seed**2)
        self.seed(state, nodes, growth, reset_lam=False)

    def seed(self, state: SystemState, nodes: np.ndarray, growth: np.ndarray, reset_lam: bool) -> None:
        """Place ``nodes`` on the inactive branch ``phi - phi_prev = theta^2``."""
        h = np.maximum(state.phi[nodes] - state.phi_prev[nodes], 0.0) + growth
        h = np.minimum(h, np.maximum(1.0 - state.phi_prev[nodes], 0.0))
        state.phi[nodes] = state.phi_prev[nodes] + h
        state.theta[nodes] = np.sqrt(h)
        if reset_lam and state.lam is not None:
            state.lam[nodes] = 0.0

    def predicted_growth(self, state: SystemState, nodes: np.ndarray) -> np.ndarray:
        """Nodal phase-field increment that would release a negative multiplier.

        One diagonal Newton step on the phase-field equation with the
        constraint force removed: ``m * lam / K_phiphi``.
        """
        lam = nodal_multiplier(state, self.config.eta)[nodes]
        system = self.assembler.assemble(state)
        dofs = self.dofmap.scalar_dof("phi", nodes)
        k = system.K[dofs, dofs].A1 if hasattr(system.K[dofs, dofs], "A1") else np.asarray(system.K[dofs, dofs]).ravel()
        m = self.assembler.node_area[nodes]
        if self.config.formulation is Formulation.PENALTY:
            k = k - self.config.eta * m
        k = np.maximum(k, 1e-12 * np.abs(k).max(initial=1.0))
        return np.maximum(-m * lam / k, self.config.reseed**2)

    def solve_linear(self, K, rhs) -> np.ndarray:
        try:
            lu = spla.splu(K)
        except RuntimeError as exc:
            raise LinearSolveFailure(f"sparse LU failed: {exc}", K.shape[0]) from exc
        dy = lu.solve(rhs)
        if not np.all(np.isfinite(dy)):
            raise LinearSolveFailure("linear solve produced non-finite values", K.shape[0])
        return dy

    def spurious_nodes(self, state: SystemState, rel: float | None = None) -> np.ndarray:
        """Free slack nodes locked at theta = 0 while their multiplier is negative.

        A multiplier counts as negative below ``-rel * S_lam``, ``rel``
        defaulting to the Newton tolerance.
        """
        rel = self.config.tol if rel is None else rel
        lam = nodal_multiplier(state, self.config.eta)
        off = self.dofmap.offset("theta")
        nodes = self.free_theta - off
        bad = (lam[nodes] < -rel * self.scales["lam"]) & (state.theta[nodes] ** 2 < self.config.tol)
        bad &= self.phi_free[nodes]
        return nodes[bad]

    def solve_step(self, state: SystemState) -> NewtonResult:
        """Newton solve followed by reseeding of spurious slack roots."""
        total, errors = 0, []
        reseeded = np.zeros(self.dofmap.n_nodes, bool)
        unlocked = np.zeros(self.dofmap.n_nodes, bool)
        for attempt in range(self.config.max_reseeds + 1):
            res = self.newton(state, unlocked)
            total += res.iterations
            errors += res.errors
            bad = self.spurious_nodes(state)
            if len(bad) == 0:
                break
            if attempt == self.config.max_reseeds:
                raise NonConvergence(f"{len(bad)} nodes remain on a dual-infeasible slack root", errors)
            # release every locked node with a negative multiplier, not just the
            # ones past tolerance, so the released front does not creep outwards
            bad = self.spurious_nodes(state, RESEED_REL)
            # a node that falls back onto the locked root after one release is
            # let through zero on its next try; its mirror root is just as valid
            unlocked[bad[reseeded[bad]]] = True
            reseeded[bad] = True
            self.seed(state, bad, self.predicted_growth(state, bad), reset_lam=True)
        return NewtonResult(total, errors, res.reaction, res.clipped)

    def newton(self, state: SystemState, unlocked: np.ndarray | None = None) -> NewtonResult:
        """Full Newton iterations; ``unlocked`` nodes are exempt from the sign lock."""
        cfg = self.config
        lockable = np.ones(len(self.free_theta), bool)
        if unlocked is not None:
            lockable = ~unlocked[self.free_theta - self.dofmap.offset("theta")]
        errors: list[float] = []
        clipped = 0
        for it in range(1, cfg.max_iters + 1):
            system = self.assembler.assemble(state)
            clipped = max(clipped, system.clipped)
            Kr = self.constraints.reduce_matrix(system.K)
            rr = self.constraints.reduce_vector(system.residual)
            dy = self.solve_linear(Kr, -rr)
            dx = self.constraints.expand(dy)
            if cfg.lock_on_sign_change:
                # a slack crossing zero means the node is switching to active;
                # lock it instead of letting Newton creep back from the mirror root
                th = state.x[self.free_theta]
                flip = (th * (th + dx[self.free_theta]) < 0.0) & lockable
                dx[self.free_theta[flip]] = -th[flip]
            state.x += dx
            err = error_norm(
                [dx[self.field_dofs[f]] for f in self.dofmap.fields],
                [state.x[self.field_dofs[f]] for f in self.dofmap.fields],
                [self.scales[f] for f in self.dofmap.fields],
            )
            errors.append(err)
            if not math.isfinite(err):
                raise NonConvergence("non-finite Newton update", errors)
            if err < cfg.tol:
                r = self.assembler.residual(state)
                reaction = float(self.constraints.load_dir @ r) * self.thickness
                return NewtonResult(it, errors, reaction, clipped)
        raise NonConvergence(f"no convergence in {cfg.max_iters} iterations", errors)

    def kkt(self, state: SystemState):
        return kkt_report(state, self.config.tol, self.config.eta, self.scales["lam"])


def newton_step(problem, state: SystemState, config: SolverConfig, du: float = 0.0) -> NewtonResult:
    """Solve one pseudo-time step in place; convenience wrapper for tests."""
    sim = Simulation(problem, config)
    if state.dofmap != sim.dofmap:
        raise ValueError("state does not match the problem's DOF map")
    sim.begin_step(state, du)
    return sim.solve_step(state)


def run_simulation(
    problem,
    config: SolverConfig,
    *,
    schedule=None,
    resume: Progress | None = None,
    snapshot_every: int = 0,
    on_step: Callable[[Progress, StepRecord], bool | None] | None = None,
) -> SimulationResult:
    """Run the loading schedule; returns partial results on non-convergence.

    ``on_step`` sees every accepted step and may return True to stop the run.
    """
    sim = Simulation(problem, config)
    schedule = schedule or problem.schedule
    prog = resume or Progress(sim.initial_state())
    if prog.last_growth is not None:
        sim.last_growth = prog.last_growth.copy()
    state = prog.state
    records = prog.records
    snapshots: list[tuple[int, SystemState]] = []
    peak = max((abs(r.load_kN) for r in records), default=0.0)
    u_end = config.u_end

    def done() -> str | None:
        if config.max_steps is not None and len(records) >= config.max_steps:
            return "max_steps"
        if u_end is not None and abs(prog.u_applied) >= abs(u_end) - 1e-12 * max(1.0, abs(u_end)):
            return "u_end"
        if config.stop_load_fraction is not None and records and peak > 0:
            if abs(records[-1].load_kN) < config.stop_load_fraction * peak and len(records) > 1:
                return "load_drop"
        return None

    def advance(du: float, depth: int) -> list[StepRecord]:
        backup = state.copy()
        try:
            sim.begin_step(state, du)
            res = sim.solve_step(state)
        except (NonConvergence, LinearSolveFailure) as exc:
            state.x[:] = backup.x
            state.phi_prev[:] = backup.phi_prev
            if depth >= config.max_halvings:
                raise
            log.info("step failed (%s); halving increment %.3e", exc, du)
            return advance(0.5 * du, depth + 1) + advance(0.5 * du, depth + 1)
        rep = sim.kkt(state)
        inc = state.phi - state.phi_prev
        min_inc = float(inc.min(initial=0.0))
        sim.last_growth = np.where(inc > sim.config.reseed**2, inc, 0.0)
        prog.last_growth = sim.last_growth
        state.accept()
        state.step += 1
        state.t += 0.5**depth
        prog.u_applied += du
        rec = StepRecord(
            state.step, state.t, prog.u_applied, res.reaction / 1000.0,
            res.iterations, res.errors[-1], rep.as_dict(), min_inc,
        )
        records.append(rec)
        return [rec]

    status, message = "completed", ""
    if (reason := done()) is not None:
        return SimulationResult(records, state, "stopped", reason, snapshots, prog)
    for phase, count, du in schedule.increments(prog.phase, prog.count):
        try:
            new = advance(du, 0)
        except (NonConvergence, LinearSolveFailure) as exc:
            status, message = "non-convergence", str(exc)
            log.warning("aborting at u=%.6e: %s", prog.u_applied, exc)
            break
        prog.phase, prog.count = phase, count + 1
        halt = False
        for rec in new:
            peak = max(peak, abs(rec.load_kN))
            if snapshot_every and rec.step % snapshot_every == 0:
                snapshots.append((rec.step, state.copy()))
            if on_step is not None:
                halt = bool(on_step(prog, rec)) or halt
        if halt:
            status, message = "stopped", "callback"
            break
        if (reason := done()) is not None:
            status, message = "stopped", reason
            break
    if status == "completed" and not message:
        message = "schedule exhausted"
    return SimulationResult(records, state, status, message, snapshots, prog)
