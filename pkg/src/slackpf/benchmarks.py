"""Catalog of the five benchmark problems.

Everything is in N, mm and N/mm^2; reactions are reported per
``thickness`` mm out of plane.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable

import numpy as np

from .fem import Constitutive, Constraints, DofMap, PinSpec, build_constraints
from .material_models import FractureParams, ModelKind, PhaseFieldModel, Softening, lame_from_engineering
from .mesh import (
    CircleHole,
    Mesh,
    MeshError,
    RefinementBand,
    cut_notch,
    generate_rect_mesh,
    generate_tri_mesh,
    remove_elements,
)
from .solver import StepSchedule
from .tensor_kernels import LameParams


class BCKind(str, enum.Enum):
    FIXED_ALL = "fixed_all"
    FIXED_COMPONENT = "fixed_component"
    PRESCRIBED = "prescribed"
    RIGID_PIN = "rigid_pin"
    FIXED_PHASE = "fixed_phase"


@dataclass(frozen=True)
class BoundaryCondition:
    """A boundary condition on the node set ``target``.

    ``coeff`` scales the applied displacement for ``PRESCRIBED``. For
    ``RIGID_PIN``, ``drive`` holds the master's ``(ux, uy)`` coefficients on
    the applied displacement, ``None`` leaving that translation free.
    """

    kind: BCKind
    target: str
    axis: int | None = None
    coeff: float = 1.0
    center: tuple[float, float] | None = None
    drive: tuple[float | None, float | None] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "kind", BCKind(self.kind))
        if self.kind in (BCKind.FIXED_COMPONENT, BCKind.PRESCRIBED) and self.axis not in (0, 1):
            raise ValueError(f"{self.kind.value} on {self.target!r} needs axis 0 or 1, got {self.axis}")
        if self.kind is BCKind.RIGID_PIN and self.center is None:
            raise ValueError(f"rigid pin on {self.target!r} needs a center")

    @classmethod
    def fixed(cls, target):
        return cls(BCKind.FIXED_ALL, target)

    @classmethod
    def roller(cls, target, axis):
        """Blocks displacement component ``axis`` only."""
        return cls(BCKind.FIXED_COMPONENT, target, axis)

    @classmethod
    def driven(cls, target, axis, coeff=1.0):
        return cls(BCKind.PRESCRIBED, target, axis, coeff)

    @classmethod
    def pin(cls, target, center, drive=(0.0, 0.0)):
        return cls(BCKind.RIGID_PIN, target, center=tuple(center), drive=tuple(drive))

    @classmethod
    def no_damage(cls, target):
        return cls(BCKind.FIXED_PHASE, target)


def check_closed_loop(mesh: Mesh, nodes: np.ndarray) -> None:
    """Raise unless ``nodes`` form one closed cycle of boundary edges."""
    nodes = np.unique(nodes)
    inside = np.zeros(mesh.n_nodes, bool)
    inside[nodes] = True
    be = mesh.boundary_edges()
    loop = be[inside[be[:, 0]] & inside[be[:, 1]]]
    deg = np.bincount(loop.ravel(), minlength=mesh.n_nodes)[nodes]
    if len(nodes) < 3 or np.any(deg != 2):
        raise MeshError("rigid pin nodes do not form a closed boundary loop")
    adj = {int(n): [] for n in nodes}
    for a, b in loop.tolist():
        adj[a].append(b)
        adj[b].append(a)
    seen, stack = set(), [int(nodes[0])]
    while stack:
        n = stack.pop()
        if n not in seen:
            seen.add(n)
            stack.extend(adj[n])
    if len(seen) != len(nodes):
        raise MeshError("rigid pin nodes form more than one loop")


def apply_rigid_pin(mesh: Mesh, bc: BoundaryCondition) -> PinSpec:
    """Tie the pin's node loop to translation and rotation masters at its center."""
    if bc.kind is not BCKind.RIGID_PIN:
        raise ValueError("not a rigid pin condition")
    nodes = mesh.node_sets[bc.target]
    check_closed_loop(mesh, nodes)
    ux, uy = bc.drive
    return PinSpec(bc.center, np.unique(nodes), ux, uy)


@dataclass(frozen=True)
class BenchmarkProblem:
    name: str
    mesh: Mesh
    lame: LameParams
    fracture: FractureParams
    model: PhaseFieldModel
    bcs: tuple[BoundaryCondition, ...]
    schedule: StepSchedule
    u_end: float
    monitored: str  # node set whose reaction is reported
    thickness: float = 1.0
    plane: str = "strain"
    notes: tuple[str, ...] = ()
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        for bc in self.bcs:
            if bc.target not in self.mesh.node_sets:
                raise MeshError(f"boundary condition refers to unknown node set {bc.target!r}")
        if self.monitored not in self.mesh.node_sets:
            raise MeshError(f"unknown monitored set {self.monitored!r}")

    @property
    def constitutive(self) -> Constitutive:
        return Constitutive(self.model, self.lame, self.fracture)

    def constraints(self, dofmap: DofMap) -> Constraints:
        prescribed: dict[int, float] = {}
        pins = []
        for bc in self.bcs:
            nodes = np.unique(self.mesh.node_sets[bc.target])
            if bc.kind is BCKind.FIXED_ALL:
                for c in (0, 1):
                    prescribed.update(dict.fromkeys((2 * nodes + c).tolist(), 0.0))
            elif bc.kind is BCKind.FIXED_COMPONENT:
                prescribed.update(dict.fromkeys((2 * nodes + bc.axis).tolist(), 0.0))
            elif bc.kind is BCKind.PRESCRIBED:
                prescribed.update(dict.fromkeys((2 * nodes + bc.axis).tolist(), bc.coeff))
            elif bc.kind is BCKind.FIXED_PHASE:
                # theta and lam have no equation left once phi is fixed
                for f in dofmap.scalar_fields:
                    prescribed.update(dict.fromkeys(dofmap.scalar_dof(f, nodes).tolist(), 0.0))
            else:
                pins.append(apply_rigid_pin(self.mesh, bc))
        return build_constraints(dofmap, self.mesh.nodes, prescribed, pins)

    def with_schedule(self, schedule: StepSchedule, u_end: float | None = None) -> "BenchmarkProblem":
        return replace(self, schedule=schedule, u_end=schedule.end_displacement if u_end is None else u_end)

    def summary(self) -> dict:
        m = self.mesh
        return {
            "name": self.name,
            "n_nodes": m.n_nodes,
            "n_elements": m.n_elements,
            "cell_types": sorted(m.cells),
            "h_min": float(m.min_side_lengths().min()),
            "h_max": float(m.element_sizes().max()),
            "thickness_mm": self.thickness,
            "plane": self.plane,
            "notes": list(self.notes),
            **self.parameters,
        }


# ---------------------------------------------------------------------------
# parameter tables
# ---------------------------------------------------------------------------

SEN_LAME = LameParams(121.154e3, 80.769e3)
SEN_FRACTURE = dict(Gc=2.7, length_scale=0.015)
HOLE_LAME = LameParams(1.94e3, 2.45e3)
HOLE_FRACTURE = dict(Gc=2.28, length_scale=0.25)
TPB_MATERIAL = dict(E0=2.0e4, nu=0.2, ft=2.4, Gc=0.113, length_scale=2.5)
LPANEL_MATERIAL = dict(E0=2.0e4, nu=0.18, ft=2.5, Gc=0.130, length_scale=5.0)

HOLE_PIN_RADIUS = 5.0


def load_manifest() -> dict:
    """Checked-in table values of the canonical benchmarks."""
    text = resources.files("slackpf").joinpath("data/benchmarks.json").read_text()
    return json.loads(text)


def _sets_from(mesh: Mesh, **predicates: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Mesh:
    return mesh.with_sets(node_sets={k: mesh.select_nodes(p) for k, p in predicates.items()})


def _near(x0, y0, r):
    return lambda x, y: np.hypot(x - x0, y - y0) <= r + 1e-9


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def _sen_mesh(l, band_h, coarse_factor, band, name):
    coarse = coarse_factor * band_h
    mesh = generate_rect_mesh(1.0, 1.0, coarse, [band], x_breaks=[0.5], y_breaks=[0.5])
    return cut_notch(mesh, (0.0, 0.5), (0.5, 0.5), "notch")


def build_sent(
    *,
    length_scale: float = SEN_FRACTURE["length_scale"],
    band_h: float | None = None,
    coarse_factor: float = 10.0,
    band_halfwidth: float | None = None,
    schedule: StepSchedule | None = None,
) -> BenchmarkProblem:
    """Single edge notched plate in tension, brittle AT2."""
    l = length_scale
    h = band_h or l / 2
    w = band_halfwidth or 5 * l
    band = RefinementBand(0.5 - 2 * l, 1.0, 0.5 - w, 0.5 + w, h, "crack_band")
    mesh = _sen_mesh(l, h, coarse_factor, band, "sent")
    u_end = 6.5e-3
    sched = schedule or StepSchedule.until([(450, 1e-5), (None, 1e-6)], u_end)
    return BenchmarkProblem(
        name="sent",
        mesh=mesh,
        lame=SEN_LAME,
        fracture=FractureParams(Gc=SEN_FRACTURE["Gc"], length_scale=l),
        model=PhaseFieldModel.brittle(ModelKind.AT2),
        bcs=(BoundaryCondition.fixed("bottom"), BoundaryCondition.roller("top", 0), BoundaryCondition.driven("top", 1)),
        schedule=sched,
        u_end=u_end,
        monitored="top",
        notes=("top edge: ux = 0, uy prescribed",),
        parameters={"band_h": h, "band_halfwidth": w},
    )


def build_sens(
    *,
    length_scale: float = SEN_FRACTURE["length_scale"],
    band_h: float | None = None,
    coarse_factor: float = 10.0,
    band_margin: float | None = None,
    schedule: StepSchedule | None = None,
) -> BenchmarkProblem:
    """Single edge notched plate in shear, brittle AT2."""
    l = length_scale
    h = band_h or l / 2
    m = band_margin or 2 * l
    # covers the expected path from the notch tip towards the lower right corner
    band = RefinementBand(0.5 - m, 1.0, 0.0, 0.5 + m, h, "crack_band")
    mesh = _sen_mesh(l, h, coarse_factor, band, "sens")
    u_end = 1.5e-2
    sched = schedule or StepSchedule.until([(90, 1e-4), (None, 1e-5)], u_end)
    return BenchmarkProblem(
        name="sens",
        mesh=mesh,
        lame=SEN_LAME,
        fracture=FractureParams(Gc=SEN_FRACTURE["Gc"], length_scale=l),
        model=PhaseFieldModel.brittle(ModelKind.AT2),
        bcs=(
            BoundaryCondition.fixed("bottom"),
            BoundaryCondition.roller("left", 1),
            BoundaryCondition.roller("right", 1),
            BoundaryCondition.roller("top", 1),
            BoundaryCondition.driven("top", 0),
        ),
        schedule=sched,
        u_end=u_end,
        monitored="top",
        notes=("refinement band is a box over the lower right quadrant (assumed path)", "top edge: uy = 0"),
        parameters={"band_h": h, "band_margin": m},
    )


def build_notched_hole(
    *,
    length_scale: float = HOLE_FRACTURE["length_scale"],
    band_h: float | None = None,
    coarse_factor: float = 10.0,
    coarse_h: float | None = None,
    schedule: StepSchedule | None = None,
) -> BenchmarkProblem:
    """Notched plate with a hole loaded through two rigid pins, brittle AT2."""
    l = length_scale
    h = band_h or l / 2
    band = RefinementBand(0.0, 40.0, 53.0, 68.0, h, "crack_band")
    holes = [
        CircleHole((36.5, 51.0), 10.0, "hole"),
        CircleHole((20.0, 20.0), HOLE_PIN_RADIUS, "pin_lower"),
        CircleHole((20.0, 100.0), HOLE_PIN_RADIUS, "pin_upper"),
    ]
    mesh = generate_tri_mesh(
        65.0, 120.0, coarse_h or coarse_factor * h, [band], holes, align=[("y", 65.0), ("x", 10.0)]
    )
    mesh = cut_notch(mesh, (0.0, 65.0), (10.0, 65.0), "notch")
    u_end = 2.0
    sched = schedule or StepSchedule.until([(None, 1e-3)], u_end)
    return BenchmarkProblem(
        name="notched_hole",
        mesh=mesh,
        lame=HOLE_LAME,
        fracture=FractureParams(Gc=HOLE_FRACTURE["Gc"], length_scale=l),
        model=PhaseFieldModel.brittle(ModelKind.AT2),
        bcs=(
            BoundaryCondition.pin("pin_lower", (20.0, 20.0), (0.0, 0.0)),
            BoundaryCondition.pin("pin_upper", (20.0, 100.0), (0.0, 1.0)),
        ),
        schedule=sched,
        u_end=u_end,
        monitored="pin_upper",
        notes=(
            "pin centers (20, 20) and (20, 100) read from the specimen schematic",
            "pins are rigid connectors; driven pin has ux = 0, rotations free",
            "only the notch-to-hole region is pre-refined",
        ),
        parameters={"band_h": h},
    )


def build_tpb(
    *,
    length_scale: float = TPB_MATERIAL["length_scale"],
    band_h: float | None = None,
    coarse_factor: float = 10.0,
    band_halfwidth: float | None = None,
    schedule: StepSchedule | None = None,
    softening: Softening = Softening.CORNELISSEN,
) -> BenchmarkProblem:
    """Notched three-point bending beam, quasi-brittle."""
    p = dict(TPB_MATERIAL, length_scale=length_scale)
    l = length_scale
    h = band_h or l / 5
    w = band_halfwidth or 4 * l
    band = RefinementBand(225.0 - w, 225.0 + w, 45.0, 100.0, h, "crack_band")
    mesh = generate_rect_mesh(
        450.0, 100.0, coarse_factor * h, [band], x_breaks=[222.5, 225.0, 227.5], y_breaks=[50.0]
    )
    c = mesh.centroids()
    mesh = remove_elements(mesh, (c[:, 0] > 222.5) & (c[:, 0] < 227.5) & (c[:, 1] < 50.0))
    mesh = _sets_from(
        mesh,
        support_left=_near(0.0, 0.0, 0.0),
        support_right=_near(450.0, 0.0, 0.0),
        load_point=_near(225.0, 100.0, 0.0),
        load_zone=_near(225.0, 100.0, 2 * l),
        support_zone=lambda x, y: (np.hypot(x, y) <= 2 * l) | (np.hypot(x - 450.0, y) <= 2 * l),
    )
    fracture = FractureParams(Gc=p["Gc"], length_scale=l, E0=p["E0"], ft=p["ft"], nu=p["nu"])
    u_end = 1.0
    sched = schedule or StepSchedule.until([(None, 1e-3)], u_end)
    return BenchmarkProblem(
        name="tpb",
        mesh=mesh,
        lame=lame_from_engineering(p["E0"], p["nu"]),
        fracture=fracture,
        model=PhaseFieldModel.quasi_brittle(softening, fracture),
        bcs=(
            BoundaryCondition.fixed("support_left"),
            BoundaryCondition.roller("support_right", 1),
            BoundaryCondition.driven("load_point", 1, -1.0),
            BoundaryCondition.no_damage("load_zone"),
            BoundaryCondition.no_damage("support_zone"),
        ),
        schedule=sched,
        u_end=u_end,
        monitored="load_point",
        notes=(
            "supports and load are single nodes",
            "phase field held at zero within 2l of the load and support nodes",
        ),
        parameters={"band_h": h, "band_halfwidth": w, "softening": softening.value},
    )


def build_lpanel(
    *,
    length_scale: float = LPANEL_MATERIAL["length_scale"],
    band_h: float | None = None,
    coarse_factor: float = 10.0,
    band: tuple[float, float, float, float] = (0.0, 260.0, 240.0, 330.0),
    schedule: StepSchedule | None = None,
    softening: Softening = Softening.CORNELISSEN,
) -> BenchmarkProblem:
    """Winkler L-shaped panel, quasi-brittle."""
    p = dict(LPANEL_MATERIAL, length_scale=length_scale)
    l = length_scale
    h = band_h or l / 5
    rb = RefinementBand(*band, h, "crack_band")
    mesh = generate_rect_mesh(500.0, 500.0, coarse_factor * h, [rb], x_breaks=[250.0, 470.0], y_breaks=[250.0])
    c = mesh.centroids()
    mesh = remove_elements(mesh, (c[:, 0] > 250.0) & (c[:, 1] < 250.0))
    tol = 1e-9
    mesh = _sets_from(
        mesh,
        load_edge=lambda x, y: (np.abs(y - 250.0) < tol) & (x >= 470.0 - tol),
        load_zone=lambda x, y: (x >= 470.0 - 2 * l) & (y <= 250.0 + 2 * l) & (y >= 250.0 - tol),
        bottom=lambda x, y: np.abs(y) < tol,
    )
    fracture = FractureParams(Gc=p["Gc"], length_scale=l, E0=p["E0"], ft=p["ft"], nu=p["nu"])
    u_end = 1.0
    sched = schedule or StepSchedule.until([(None, 1e-3)], u_end)
    return BenchmarkProblem(
        name="lpanel",
        mesh=mesh,
        lame=lame_from_engineering(p["E0"], p["nu"]),
        fracture=fracture,
        model=PhaseFieldModel.quasi_brittle(softening, fracture),
        bcs=(
            BoundaryCondition.fixed("bottom"),
            BoundaryCondition.driven("load_edge", 1),
            BoundaryCondition.no_damage("load_zone"),
        ),
        schedule=sched,
        u_end=u_end,
        monitored="load_edge",
        notes=("phase field held at zero within 2l of the loaded edge",),
        parameters={"band_h": h, "band": list(band), "softening": softening.value},
    )


BENCHMARKS: dict[str, Callable[..., BenchmarkProblem]] = {
    "sent": build_sent,
    "sens": build_sens,
    "notched_hole": build_notched_hole,
    "tpb": build_tpb,
    "lpanel": build_lpanel,
}

# named variants: (builder, overrides)
VARIANTS: dict[str, tuple[str, dict]] = {
    "notched_hole_l01": ("notched_hole", {"length_scale": 0.1}),
    "sent_coarse": ("sent", {"length_scale": 0.03}),
    "sens_coarse": ("sens", {"length_scale": 0.03}),
    "lpanel_coarse": (
        "lpanel",
        {"band_h": 2.5, "band": (200.0, 260.0, 240.0, 290.0)},
    ),
    "tpb_coarse": ("tpb", {"band_h": 1.25, "band_halfwidth": 10.0}),
}


def build(name: str, **overrides) -> BenchmarkProblem:
    """Build a benchmark or named variant by name."""
    if name in VARIANTS:
        base, preset = VARIANTS[name]
        return replace(BENCHMARKS[base](**{**preset, **overrides}), name=name)
    if name not in BENCHMARKS:
        raise KeyError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS) + sorted(VARIANTS)}")
    return BENCHMARKS[name](**overrides)
