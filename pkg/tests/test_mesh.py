import numpy as np
import pytest

from slackpf.fem import element_jacobians
from slackpf.mesh import (
    CircleHole,
    Mesh,
    MeshError,
    RefinementBand,
    cut_notch,
    generate_rect_mesh,
    generate_tri_mesh,
    graded_coordinates,
    load_mesh,
    remove_elements,
    save_mesh,
)


def edge_lengths(mesh: Mesh, elements: np.ndarray) -> np.ndarray:
    conn = mesh.cells["quad4"][elements]
    xy = mesh.nodes[conn]
    return np.linalg.norm(xy - np.roll(xy, -1, axis=1), axis=2)


class TestRectMesh:
    def test_uniform_grid(self):
        m = generate_rect_mesh(1.0, 1.0, 0.25)
        assert m.n_nodes == 25 and m.n_elements == 16
        m.validate()

    def test_boundary_sets(self):
        m = generate_rect_mesh(2.0, 1.0, 0.25)
        np.testing.assert_allclose(m.nodes[m.node_sets["left"], 0], 0.0)
        np.testing.assert_allclose(m.nodes[m.node_sets["top"], 1], 1.0)
        assert len(m.node_sets["bottom"]) == 9
        assert len(m.edge_sets["right"]) == 4

    def test_band_refinement(self):
        band = RefinementBand(0.0, 1.0, 0.45, 0.55, 0.0075)
        m = generate_rect_mesh(1.0, 1.0, 0.075, [band])
        inside = m.region_sets["band"]
        assert len(inside) > 0
        assert edge_lengths(m, inside).max() <= 0.0075 * (1 + 1e-9)
        m.validate()

    def test_band_outside_domain(self):
        with pytest.raises(MeshError):
            generate_rect_mesh(1.0, 1.0, 0.25, [RefinementBand(2.0, 3.0, 0.0, 1.0, 0.01)])

    def test_breaks_become_grid_lines(self):
        xs = graded_coordinates(1.0, 0.3, breaks=[0.5])
        assert np.any(np.isclose(xs, 0.5, atol=1e-14))
        assert xs[0] == 0.0 and xs[-1] == pytest.approx(1.0)

    def test_positive_jacobians(self):
        band = RefinementBand(0.3, 0.7, 0.3, 0.7, 0.02)
        m = generate_rect_mesh(1.0, 1.0, 0.2, [band])
        detj = element_jacobians("quad4", m.nodes[m.cells["quad4"]])
        assert detj.min() > 0


class TestNotch:
    def make(self):
        return generate_rect_mesh(1.0, 1.0, 0.125, y_breaks=[0.5], x_breaks=[0.5])

    def test_sent_slit(self):
        m = self.make()
        cut = cut_notch(m, (0.0, 0.5), (0.5, 0.5))
        lower, upper = cut.node_sets["notch_lower"], cut.node_sets["notch_upper"]
        np.testing.assert_allclose(cut.nodes[lower], cut.nodes[upper])
        # the left boundary node on the notch line is split, the tip is not
        assert np.any(np.isclose(cut.nodes[lower, 0], 0.0))
        tip = np.flatnonzero(np.all(np.isclose(cut.nodes, [0.5, 0.5]), axis=1))
        assert len(tip) == 1
        cut.validate()

    def test_duplicate_count(self):
        m = self.make()
        on_line = np.flatnonzero(np.isclose(m.nodes[:, 1], 0.5) & (m.nodes[:, 0] <= 0.5 + 1e-12))
        cut = cut_notch(m, (0.0, 0.5), (0.5, 0.5))
        # every node on the segment except the interior tip is duplicated
        assert cut.n_nodes - m.n_nodes == len(on_line) - 1

    def test_faces_disconnected(self):
        cut = cut_notch(self.make(), (0.0, 0.5), (0.5, 0.5))
        upper = set(cut.node_sets["notch_upper"].tolist())
        lower = set(cut.node_sets["notch_lower"].tolist())
        for conn in cut.cells["quad4"].tolist():
            assert not (upper & set(conn) and lower & set(conn))

    def test_zero_length(self):
        m = self.make()
        assert cut_notch(m, (0.5, 0.5), (0.5, 0.5)) is m

    def test_non_conforming(self):
        with pytest.raises(MeshError):
            cut_notch(self.make(), (0.0, 0.51), (0.5, 0.51))


class TestRemoveElements:
    def test_drops_orphans(self):
        m = generate_rect_mesh(1.0, 1.0, 0.5)
        drop = np.zeros(m.n_elements, bool)
        drop[3] = True
        out = remove_elements(m, drop)
        assert out.n_elements == 3 and out.n_nodes == 8
        out.validate()


class TestTriMesh:
    def test_hole_and_band(self):
        m = generate_tri_mesh(
            10.0, 10.0, 1.0, [RefinementBand(0.0, 10.0, 4.0, 6.0, 0.25)], [CircleHole((5.0, 2.0), 1.0)]
        )
        m.validate()
        hole = m.nodes[m.node_sets["hole"]]
        np.testing.assert_allclose(np.linalg.norm(hole - [5.0, 2.0], axis=1), 1.0, rtol=1e-9)
        c = m.centroids()
        assert np.linalg.norm(c - [5.0, 2.0], axis=1).min() > 0.9


class TestTextFormat:
    def test_round_trip(self, tmp_path):
        m = cut_notch(generate_rect_mesh(1.0, 1.0, 0.125, y_breaks=[0.5]), (0.0, 0.5), (0.5, 0.5))
        save_mesh(m, tmp_path / "m.txt")
        back = load_mesh(tmp_path / "m.txt")
        np.testing.assert_array_equal(back.nodes, m.nodes)
        np.testing.assert_array_equal(back.cells["quad4"], m.cells["quad4"])
        assert back.node_sets.keys() == m.node_sets.keys()
        for k in m.node_sets:
            np.testing.assert_array_equal(back.node_sets[k], m.node_sets[k])
        for k in m.edge_sets:
            np.testing.assert_array_equal(back.edge_sets[k], m.edge_sets[k])

    def test_inverted_element_named(self, tmp_path):
        m = generate_rect_mesh(1.0, 1.0, 0.5)
        conn = m.cells["quad4"].copy()
        conn[2] = conn[2][::-1]
        save_mesh(Mesh(m.nodes, {"quad4": conn}), tmp_path / "bad.txt")
        with pytest.raises(MeshError, match="element 2"):
            load_mesh(tmp_path / "bad.txt")

    def test_bad_header(self, tmp_path):
        (tmp_path / "x.txt").write_text("not a mesh\n")
        with pytest.raises(MeshError, match="header"):
            load_mesh(tmp_path / "x.txt")
