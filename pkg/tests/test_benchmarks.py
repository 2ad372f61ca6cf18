from dataclasses import replace

import numpy as np
import pytest

from slackpf.benchmarks import (
    BENCHMARKS,
    VARIANTS,
    BCKind,
    BenchmarkProblem,
    BoundaryCondition,
    build,
    check_closed_loop,
    load_manifest,
)
from slackpf.fem import DofMap, Formulation
from slackpf.material_models import FractureParams, ModelKind, PhaseFieldModel, Softening
from slackpf.mesh import CircleHole, MeshError, generate_tri_mesh
from slackpf.solver import SolverConfig, StepSchedule, run_simulation
from slackpf.tensor_kernels import LameParams


@pytest.fixture(scope="module")
def hole():
    return build("notched_hole")


def on(points, xy, tol=1e-9):
    return np.all(np.abs(points - np.asarray(xy)) < tol, axis=-1)


class TestSENT:
    def test_material(self):
        p = build("sent")
        assert (p.fracture.Gc, p.fracture.length_scale) == (2.7, 0.015)
        assert (p.lame.lambda1, p.lame.mu) == (121.154e3, 80.769e3)
        assert p.model.kind is ModelKind.AT2

    def test_notch(self):
        p = build("sent")
        lower, upper = p.mesh.node_sets["notch_lower"], p.mesh.node_sets["notch_upper"]
        assert p.mesh.nodes[lower, 0].max() < 0.5
        np.testing.assert_allclose(p.mesh.nodes[upper, 1], 0.5)
        assert on(p.mesh.nodes, (0.5, 0.5)).sum() == 1

    def test_band_resolution(self):
        p = build("sent")
        assert p.summary()["h_min"] <= p.fracture.length_scale / 2

    def test_loading(self):
        p = build("sent")
        kinds = {(bc.kind, bc.target, bc.axis) for bc in p.bcs}
        assert (BCKind.PRESCRIBED, "top", 1) in kinds
        assert (BCKind.FIXED_ALL, "bottom", None) in kinds
        assert p.u_end == 6.5e-3

    def test_load_direction_covers_top(self):
        p = build("sent_coarse")
        c = p.constraints(DofMap(p.mesh.n_nodes, Formulation.LMM))
        top = p.mesh.node_sets["top"]
        np.testing.assert_array_equal(c.load_dir[2 * top + 1], 1.0)
        assert c.load_dir.sum() == len(top)


class TestSENS:
    def test_rollers(self):
        p = build("sens")
        kinds = {(bc.kind, bc.target, bc.axis) for bc in p.bcs}
        for side in ("left", "right"):
            assert (BCKind.FIXED_COMPONENT, side, 1) in kinds
        assert (BCKind.PRESCRIBED, "top", 0) in kinds

    def test_same_material_as_sent(self):
        a, b = build("sens"), build("sent")
        assert (a.lame, a.fracture) == (b.lame, b.fracture)


class TestNotchedHole:
    def test_hole_geometry(self, hole):
        xy = hole.mesh.nodes[hole.mesh.node_sets["hole"]]
        np.testing.assert_allclose(np.hypot(xy[:, 0] - 36.5, xy[:, 1] - 51.0), 10.0, rtol=1e-9)

    def test_increment(self, hole):
        assert hole.schedule.phases[0][1] == 1e-3
        assert hole.model.kind is ModelKind.AT2

    def test_pins_are_loops(self, hole):
        for name in ("pin_lower", "pin_upper"):
            check_closed_loop(hole.mesh, hole.mesh.node_sets[name])

    def test_notch(self, hole):
        upper = hole.mesh.nodes[hole.mesh.node_sets["notch_upper"]]
        np.testing.assert_allclose(upper[:, 1], 65.0)
        assert upper[:, 0].max() <= 10.0


class TestRigidPin:
    def problem(self):
        mesh = generate_tri_mesh(20.0, 20.0, 1.5, [], [CircleHole((10.0, 12.0), 3.0, "pin")])
        return BenchmarkProblem(
            name="pinned",
            mesh=mesh,
            lame=LameParams(1.94e3, 2.45e3),
            fracture=FractureParams(Gc=2.28, length_scale=2.0),
            model=PhaseFieldModel.brittle(ModelKind.AT2),
            bcs=(BoundaryCondition.fixed("bottom"), BoundaryCondition.pin("pin", (10.0, 12.0), (0.0, 1.0))),
            schedule=StepSchedule(((1, 1e-4),)),
            u_end=1e-4,
            monitored="pin",
        )

    def test_pin_moves_rigidly(self):
        p = self.problem()
        res = run_simulation(p, SolverConfig())
        assert res.status == "completed"
        nodes = p.mesh.node_sets["pin"]
        u = res.state.u.reshape(-1, 2)[nodes]
        r = p.mesh.nodes[nodes] - [10.0, 12.0]
        # u = t + omega * (-ry, rx); fit the three rigid parameters
        A = np.zeros((2 * len(nodes), 3))
        A[0::2, 0], A[1::2, 1] = 1.0, 1.0
        A[0::2, 2], A[1::2, 2] = -r[:, 1], r[:, 0]
        coef, *_ = np.linalg.lstsq(A, u.ravel(), rcond=None)
        np.testing.assert_allclose(A @ coef, u.ravel(), atol=1e-12)
        assert coef[:2] == pytest.approx([0.0, 1e-4], abs=1e-15)
        assert res.records[-1].load_kN > 0

    def test_open_loop_rejected(self):
        p = self.problem()
        nodes = p.mesh.node_sets["pin"][:-2]
        with pytest.raises(MeshError):
            check_closed_loop(p.mesh, nodes)


class TestTPB:
    def test_notch_removed(self):
        p = build("tpb_coarse")
        c = p.mesh.centroids()
        assert not ((np.abs(c[:, 0] - 225.0) < 2.5) & (c[:, 1] < 50.0)).any()

    def test_quasi_brittle(self):
        p = build("tpb")
        assert p.model.kind is ModelKind.QUASI_BRITTLE
        assert p.model.softening is Softening.CORNELISSEN
        assert p.model.a1 == pytest.approx(199.83, abs=0.05)

    def test_supports(self):
        p = build("tpb_coarse")
        np.testing.assert_allclose(p.mesh.nodes[p.mesh.node_sets["support_left"]], [[0.0, 0.0]])
        np.testing.assert_allclose(p.mesh.nodes[p.mesh.node_sets["support_right"]], [[450.0, 0.0]])
        np.testing.assert_allclose(p.mesh.nodes[p.mesh.node_sets["load_point"]], [[225.0, 100.0]])


class TestLPanel:
    def test_load_edge(self):
        p = build("lpanel")
        xy = p.mesh.nodes[p.mesh.node_sets["load_edge"]]
        np.testing.assert_allclose(xy[:, 1], 250.0)
        assert xy[:, 0].max() - xy[:, 0].min() == pytest.approx(30.0)

    def test_material(self):
        p = build("lpanel")
        assert p.fracture.nu == 0.18 and p.fracture.length_scale == 5.0
        assert p.lame.lambda1 == pytest.approx(4766.95, abs=0.01)

    def test_band_spacing(self):
        p = build("lpanel")
        assert p.summary()["h_min"] == pytest.approx(1.0)

    def test_reentrant_corner_removed(self):
        c = build("lpanel_coarse").mesh.centroids()
        assert not ((c[:, 0] > 250.0) & (c[:, 1] < 250.0)).any()


class TestCatalog:
    def test_manifest_lists_all(self):
        assert set(load_manifest()) == set(BENCHMARKS)

    def test_unknown_name(self):
        with pytest.raises(KeyError, match="unknown benchmark"):
            build("nope")

    def test_variants_resolve(self):
        for name in VARIANTS:
            if name.startswith("notched_hole"):
                continue
            assert build(name).name == name

    def test_missing_set(self):
        p = build("sent_coarse")
        with pytest.raises(MeshError, match="unknown node set"):
            replace(p, bcs=p.bcs + (BoundaryCondition.fixed("nowhere"),))

    def test_bad_bc(self):
        with pytest.raises(ValueError):
            BoundaryCondition(BCKind.FIXED_COMPONENT, "top", axis=2)
