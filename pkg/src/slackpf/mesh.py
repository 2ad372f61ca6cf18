"""2D meshes: data model, graded generators, explicit notches and a text format.

Two generators are provided. ``generate_rect_mesh`` builds a tensor-product
grid of bilinear quadrilaterals whose line spacing is graded towards
refinement bands, so the mesh is conforming without hanging nodes.
``generate_tri_mesh`` handles domains with circular holes: graded points from
a quadtree are triangulated (Delaunay) and the holes carved out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.spatial import Delaunay

from .fem.shape import ELEMENT_TYPES, element_jacobians

CELL_ORDER = ("quad4", "tri3")
NODES_PER_CELL = {"quad4": 4, "tri3": 3}
# Default ratio by which the element size may grow per unit distance from a band.
DEFAULT_GROWTH = 0.25


class MeshError(ValueError):
    """Invalid mesh, mesh recipe or mesh file."""


@dataclass(frozen=True)
class RefinementBand:
    """Axis-aligned box ``[x0, x1] x [y0, y1]`` meshed with edge length ``target_h``."""

    x0: float
    x1: float
    y0: float
    y1: float
    target_h: float
    name: str = "band"

    def __post_init__(self):
        if not self.target_h > 0.0:
            raise MeshError(f"band {self.name!r}: target_h must be positive")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise MeshError(f"band {self.name!r}: empty box")

    def contains(self, xy: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        x, y = xy[..., 0], xy[..., 1]
        return (x >= self.x0 - tol) & (x <= self.x1 + tol) & (y >= self.y0 - tol) & (y <= self.y1 + tol)


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray  # (n, 2)
    cells: dict[str, np.ndarray]  # type -> (ne, k) connectivity, CCW
    node_sets: dict[str, np.ndarray] = field(default_factory=dict)
    edge_sets: dict[str, np.ndarray] = field(default_factory=dict)
    region_sets: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return sum(len(c) for c in self.cells.values())

    def cell_blocks(self):
        """Yield ``(type, connectivity, first_global_element_id)`` in storage order."""
        start = 0
        for ctype in CELL_ORDER:
            conn = self.cells.get(ctype)
            if conn is not None and len(conn):
                yield ctype, conn, start
                start += len(conn)

    def element_nodes(self, eid: int) -> tuple[str, np.ndarray]:
        for ctype, conn, start in self.cell_blocks():
            if eid < start + len(conn):
                return ctype, conn[eid - start]
        raise IndexError(eid)

    def edges(self) -> np.ndarray:
        """All element edges as ``(m, 2)`` node pairs, one row per element side."""
        out = []
        for ctype, conn, _ in self.cell_blocks():
            k = conn.shape[1]
            for i in range(k):
                out.append(conn[:, [i, (i + 1) % k]])
        return np.concatenate(out) if out else np.zeros((0, 2), int)

    def boundary_edges(self) -> np.ndarray:
        e = self.edges()
        key = np.sort(e, axis=1)
        _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        return e[counts[inv.ravel()] == 1]

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_edges())

    def centroids(self) -> np.ndarray:
        return np.concatenate([self.nodes[conn].mean(axis=1) for _, conn, _ in self.cell_blocks()])

    def element_sizes(self) -> np.ndarray:
        """Characteristic size per element: longest edge."""
        sizes = []
        for _, conn, _ in self.cell_blocks():
            xy = self.nodes[conn]
            d = np.linalg.norm(np.roll(xy, -1, axis=1) - xy, axis=2)
            sizes.append(d.max(axis=1))
        return np.concatenate(sizes)

    def min_side_lengths(self) -> np.ndarray:
        """Shortest edge per element."""
        sizes = []
        for _, conn, _ in self.cell_blocks():
            xy = self.nodes[conn]
            sizes.append(np.linalg.norm(np.roll(xy, -1, axis=1) - xy, axis=2).min(axis=1))
        return np.concatenate(sizes)

    def with_sets(self, node_sets=None, edge_sets=None, region_sets=None) -> "Mesh":
        return replace(
            self,
            node_sets={**self.node_sets, **(node_sets or {})},
            edge_sets={**self.edge_sets, **(edge_sets or {})},
            region_sets={**self.region_sets, **(region_sets or {})},
        )

    def select_nodes(self, predicate: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
        return np.flatnonzero(predicate(self.nodes[:, 0], self.nodes[:, 1]))

    def select_boundary_edges(self, predicate: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
        """Boundary edges whose both end nodes satisfy ``predicate``."""
        be = self.boundary_edges()
        ok = predicate(self.nodes[:, 0], self.nodes[:, 1])
        return be[ok[be[:, 0]] & ok[be[:, 1]]]

    def validate(self) -> None:
        """Raise :class:`MeshError` if an invariant is violated."""
        n = self.n_nodes
        for ctype, conn, start in self.cell_blocks():
            if conn.min(initial=0) < 0 or conn.max(initial=0) >= n:
                raise MeshError(f"{ctype} connectivity references missing nodes")
            detj = element_jacobians(ctype, self.nodes[conn])
            bad = np.flatnonzero((detj <= 0.0).any(axis=1))
            if len(bad):
                raise MeshError(f"element {start + bad[0]} has a non-positive Jacobian")
        conns = [np.sort(c, axis=1) for _, c, _ in self.cell_blocks()]
        for c in conns:
            if len(np.unique(c, axis=0)) != len(c):
                raise MeshError("duplicate element connectivity")
        for name, ids in self.node_sets.items():
            if len(ids) and (ids.min() < 0 or ids.max() >= n):
                raise MeshError(f"node set {name!r} references missing nodes")
        for name, e in self.edge_sets.items():
            if len(e) and (e.min() < 0 or e.max() >= n):
                raise MeshError(f"edge set {name!r} references missing nodes")
        for name, ids in self.region_sets.items():
            if len(ids) and (ids.min() < 0 or ids.max() >= self.n_elements):
                raise MeshError(f"region set {name!r} references missing elements")


# ---------------------------------------------------------------------------
# graded spacing
# ---------------------------------------------------------------------------


def _size_1d(x: np.ndarray, intervals, coarse_h: float, growth: float) -> np.ndarray:
    s = np.full_like(x, coarse_h)
    for a, b, h in intervals:
        d = np.maximum(0.0, np.maximum(a - x, x - b))
        s = np.minimum(s, h + growth * d)
    return s


def graded_coordinates(
    length: float,
    coarse_h: float,
    intervals: Sequence[tuple[float, float, float]] = (),
    breaks: Iterable[float] = (),
    growth: float = DEFAULT_GROWTH,
    origin: float = 0.0,
) -> np.ndarray:
    """Grid line positions on ``[origin, origin + length]``.

    ``intervals`` holds ``(a, b, h)`` triples: inside ``[a, b]`` the spacing is
    at most ``h``; outside it grows linearly with distance up to ``coarse_h``.
    Interval ends and ``breaks`` are always grid lines.
    """
    lo, hi = origin, origin + length
    pts = {lo, hi}
    for a, b, _ in intervals:
        pts.update(v for v in (a, b) if lo < v < hi)
    pts.update(v for v in breaks if lo < v < hi)
    pts = np.array(sorted(pts))
    coords = [np.array([lo])]
    for a, b in zip(pts[:-1], pts[1:]):
        xs = np.linspace(a, b, 4001)
        inv = 1.0 / _size_1d(xs, intervals, coarse_h, growth)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1]) * np.diff(xs))])
        n = max(1, math.ceil(cum[-1] - 1e-6))
        inner = np.interp(np.arange(1, n) * cum[-1] / n, cum, xs)
        coords.append(np.concatenate([inner, [b]]))
    return np.concatenate(coords)


def _band_intervals(bands, lo, hi, axis):
    out = []
    for b in bands:
        a, c = (b.x0, b.x1) if axis == 0 else (b.y0, b.y1)
        a, c = max(a, lo), min(c, hi)
        out.append((a, c, b.target_h))
    return out


def _check_bands(bands, x0, x1, y0, y1, coarse_h):
    for b in bands:
        if b.target_h > coarse_h:
            raise MeshError(f"band {b.name!r}: target_h {b.target_h} exceeds coarse_h {coarse_h}")
        if b.x1 <= x0 or b.x0 >= x1 or b.y1 <= y0 or b.y0 >= y1:
            raise MeshError(f"band {b.name!r} does not intersect the domain")


def _rect_sets(nodes, x0, x1, y0, y1, tol):
    x, y = nodes[:, 0], nodes[:, 1]
    return {
        "left": np.flatnonzero(np.abs(x - x0) < tol),
        "right": np.flatnonzero(np.abs(x - x1) < tol),
        "bottom": np.flatnonzero(np.abs(y - y0) < tol),
        "top": np.flatnonzero(np.abs(y - y1) < tol),
    }


def _edge_sets_from_node_sets(mesh: Mesh, names) -> dict[str, np.ndarray]:
    be = mesh.boundary_edges()
    out = {}
    for name in names:
        mask = np.zeros(mesh.n_nodes, bool)
        mask[mesh.node_sets[name]] = True
        out[name] = be[mask[be[:, 0]] & mask[be[:, 1]]]
    return out


def generate_rect_mesh(
    width: float,
    height: float,
    coarse_h: float,
    bands: Sequence[RefinementBand] = (),
    *,
    origin: tuple[float, float] = (0.0, 0.0),
    x_breaks: Iterable[float] = (),
    y_breaks: Iterable[float] = (),
    growth: float = DEFAULT_GROWTH,
) -> Mesh:
    """Structured quad4 mesh of a rectangle, refined inside ``bands``.

    Boundary node/edge sets ``left``, ``right``, ``bottom``, ``top`` are
    created, and one region set per band (elements with centroid inside).
    """
    if not (width > 0 and height > 0 and coarse_h > 0):
        raise MeshError("width, height and coarse_h must be positive")
    x0, y0 = origin
    x1, y1 = x0 + width, y0 + height
    _check_bands(bands, x0, x1, y0, y1, coarse_h)
    xs = graded_coordinates(width, coarse_h, _band_intervals(bands, x0, x1, 0), x_breaks, growth, x0)
    ys = graded_coordinates(height, coarse_h, _band_intervals(bands, y0, y1, 1), y_breaks, growth, y0)
    nx, ny = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys)  # row j = y index
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    j, i = np.meshgrid(np.arange(ny - 1), np.arange(nx - 1), indexing="ij")
    n0 = (j * nx + i).ravel()
    quads = np.column_stack([n0, n0 + 1, n0 + nx + 1, n0 + nx])
    tol = 1e-9 * max(width, height)
    mesh = Mesh(nodes, {"quad4": quads}, _rect_sets(nodes, x0, x1, y0, y1, tol))
    mesh = mesh.with_sets(edge_sets=_edge_sets_from_node_sets(mesh, ("left", "right", "bottom", "top")))
    cents = mesh.centroids()
    return mesh.with_sets(region_sets={b.name: np.flatnonzero(b.contains(cents)) for b in bands})


def remove_elements(mesh: Mesh, drop: np.ndarray) -> Mesh:
    """Delete elements flagged in the boolean array ``drop`` and orphaned nodes."""
    keep_cells = {}
    offset = 0
    new_ids = np.full(mesh.n_elements, -1)
    count = 0
    for ctype, conn, start in mesh.cell_blocks():
        k = ~drop[start : start + len(conn)]
        keep_cells[ctype] = conn[k]
        new_ids[start : start + len(conn)][k] = np.arange(count, count + k.sum())
        count += k.sum()
        offset += len(conn)
    used = np.zeros(mesh.n_nodes, bool)
    for conn in keep_cells.values():
        used[conn.ravel()] = True
    remap = np.full(mesh.n_nodes, -1)
    remap[used] = np.arange(used.sum())
    cells = {t: remap[c] for t, c in keep_cells.items() if len(c)}
    node_sets = {n: remap[ids][remap[ids] >= 0] for n, ids in mesh.node_sets.items()}
    edge_sets = {}
    for n, e in mesh.edge_sets.items():
        r = remap[e]
        edge_sets[n] = r[(r >= 0).all(axis=1)]
    region_sets = {n: new_ids[ids][new_ids[ids] >= 0] for n, ids in mesh.region_sets.items()}
    return Mesh(mesh.nodes[used], cells, node_sets, edge_sets, region_sets)


# ---------------------------------------------------------------------------
# triangulated domains with circular holes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CircleHole:
    center: tuple[float, float]
    radius: float
    name: str = "hole"
    min_segments: int = 64


def _box_distance(cx0, cx1, cy0, cy1, band: RefinementBand):
    dx = np.maximum(0.0, np.maximum(band.x0 - cx1, cx0 - band.x1))
    dy = np.maximum(0.0, np.maximum(band.y0 - cy1, cy0 - band.y1))
    return np.hypot(dx, dy)


def _quadtree_points(width, height, x0, y0, coarse_h, bands, growth):
    h_min = min([b.target_h for b in bands], default=coarse_h)
    levels = max(0, round(math.log2(coarse_h / h_min)))
    root = h_min * 2**levels
    nx = max(1, round(width / root))
    ny = max(1, round(height / root))
    dx, dy = width / nx, height / ny
    scale = 2**levels  # integer lattice at the finest level
    # each cell: integer lower-left corner (lattice units) and level
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    cells = [(ii.ravel() * scale, jj.ravel() * scale)]
    points = set()
    size = scale
    for level in range(levels + 1):
        ci, cj = cells[-1]
        if not len(ci):
            break
        cx0, cy0 = x0 + ci / scale * dx, y0 + cj / scale * dy
        cx1, cy1 = cx0 + size / scale * dx, cy0 + size / scale * dy
        target = np.full(len(ci), coarse_h)
        for b in bands:
            target = np.minimum(target, b.target_h + growth * _box_distance(cx0, cx1, cy0, cy1, b))
        split = (max(dx, dy) * size / scale > target * (1 + 1e-9)) & (level < levels)
        leaf_i, leaf_j = ci[~split], cj[~split]
        for di in (0, size):
            for dj in (0, size):
                points.update(zip((leaf_i + di).tolist(), (leaf_j + dj).tolist()))
        half = size // 2
        si, sj = ci[split], cj[split]
        cells.append(
            (np.concatenate([si, si + half, si, si + half]), np.concatenate([sj, sj, sj + half, sj + half]))
        )
        size = half
    lattice = np.array(sorted(points), dtype=float)
    return np.column_stack([x0 + lattice[:, 0] / scale * dx, y0 + lattice[:, 1] / scale * dy]), dx / scale


def generate_tri_mesh(
    width: float,
    height: float,
    coarse_h: float,
    bands: Sequence[RefinementBand] = (),
    holes: Sequence[CircleHole] = (),
    *,
    origin: tuple[float, float] = (0.0, 0.0),
    growth: float = DEFAULT_GROWTH,
    smoothing_passes: int = 3,
    align: Sequence[tuple[str, float]] = (),
) -> Mesh:
    """Triangle mesh of a rectangle with circular holes, graded towards ``bands``.

    Each hole boundary is a closed polygon of at least ``min_segments`` edges
    and is exposed as a node set named after the hole. ``align`` entries such
    as ``("y", 65.0)`` shift the nearest lattice line onto that coordinate so
    that a later :func:`cut_notch` along it is edge-conforming.
    """
    x0, y0 = origin
    x1, y1 = x0 + width, y0 + height
    _check_bands(bands, x0, x1, y0, y1, coarse_h)
    pts, h_leaf = _quadtree_points(width, height, x0, y0, coarse_h, bands, growth)
    for axis, value in align:
        k = {"x": 0, "y": 1}[axis]
        lines = np.unique(pts[:, k])
        nearest = lines[np.argmin(np.abs(lines - value))]
        if abs(nearest - value) > 0.5 * h_leaf:
            raise MeshError(f"no lattice line within half a cell of {axis} = {value}")
        pts[pts[:, k] == nearest, k] = value

    def local_h(xy):
        s = np.full(len(xy), coarse_h)
        for b in bands:
            d = _box_distance(xy[:, 0], xy[:, 0], xy[:, 1], xy[:, 1], b)
            s = np.minimum(s, b.target_h + growth * d)
        return s

    ring_pts, ring_ids = [], []
    for hole in holes:
        c = np.asarray(hole.center, float)
        h_here = float(local_h(c[None, :] + [[hole.radius, 0.0]])[0])
        nseg = max(hole.min_segments, math.ceil(2 * math.pi * hole.radius / h_here))
        ang = 2 * math.pi * np.arange(nseg) / nseg
        ring = c + hole.radius * np.column_stack([np.cos(ang), np.sin(ang)])
        spacing = 2 * math.pi * hole.radius / nseg
        d = np.linalg.norm(pts - c, axis=1)
        pts = pts[d > hole.radius + 0.5 * spacing]
        ring_pts.append(ring)
    n_grid = len(pts)
    start = n_grid
    for ring in ring_pts:
        ring_ids.append(np.arange(start, start + len(ring)))
        start += len(ring)
    nodes = np.concatenate([pts, *ring_pts]) if ring_pts else pts

    tri = Delaunay(nodes).simplices
    cents = nodes[tri].mean(axis=1)
    keep = np.ones(len(tri), bool)
    for hole in holes:
        keep &= np.linalg.norm(cents - np.asarray(hole.center), axis=1) > hole.radius
    tri = tri[keep]
    a = nodes[tri]
    area2 = (a[:, 1, 0] - a[:, 0, 0]) * (a[:, 2, 1] - a[:, 0, 1]) - (a[:, 2, 0] - a[:, 0, 0]) * (
        a[:, 1, 1] - a[:, 0, 1]
    )
    tri[area2 < 0] = tri[area2 < 0][:, [0, 2, 1]]
    tri = tri[np.abs(area2) > 1e-12 * h_leaf**2]

    fixed = np.zeros(len(nodes), bool)
    mesh = Mesh(nodes, {"tri3": tri})
    fixed[mesh.boundary_nodes()] = True
    if holes and smoothing_passes:
        near = np.zeros(len(nodes), bool)
        for hole in holes:
            d = np.linalg.norm(nodes - np.asarray(hole.center), axis=1)
            near |= d < hole.radius + 4.0 * local_h(nodes)
        mesh = _laplace_smooth(mesh, near & ~fixed, smoothing_passes)
    nodes = mesh.nodes
    tol = 1e-9 * max(width, height)
    sets = _rect_sets(nodes, x0, x1, y0, y1, tol)
    for hole, ids in zip(holes, ring_ids):
        sets[hole.name] = ids
    mesh = mesh.with_sets(node_sets=sets)
    mesh = mesh.with_sets(edge_sets=_edge_sets_from_node_sets(mesh, list(sets)))
    cents = mesh.centroids()
    return mesh.with_sets(region_sets={b.name: np.flatnonzero(b.contains(cents)) for b in bands})


def _laplace_smooth(mesh: Mesh, movable: np.ndarray, passes: int) -> Mesh:
    edges = np.unique(np.sort(mesh.edges(), axis=1), axis=0)
    nodes = mesh.nodes.copy()
    deg = np.bincount(edges.ravel(), minlength=len(nodes)).astype(float)
    for _ in range(passes):
        acc = np.zeros_like(nodes)
        np.add.at(acc, edges[:, 0], nodes[edges[:, 1]])
        np.add.at(acc, edges[:, 1], nodes[edges[:, 0]])
        trial = nodes.copy()
        trial[movable] = acc[movable] / deg[movable, None]
        ok = all((element_jacobians(t, trial[c]) > 0).all() for t, c, _ in mesh.cell_blocks())
        if not ok:
            break
        nodes = trial
    return replace(mesh, nodes=nodes)


# ---------------------------------------------------------------------------
# notches
# ---------------------------------------------------------------------------


def cut_notch(mesh: Mesh, p0, p1, name: str = "notch") -> Mesh:
    """Open a slit along the segment ``p0 -> p1``.

    Nodes on the segment are duplicated, except segment end points that lie in
    the interior of the domain (crack tips). Elements on the left of the
    directed segment receive the copies. Node sets ``<name>_upper`` and
    ``<name>_lower`` hold the two faces.
    """
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    seg = p1 - p0
    length = float(np.linalg.norm(seg))
    if length == 0.0:
        return mesh
    t_hat = seg / length
    rel = mesh.nodes - p0
    s = rel @ t_hat
    dist = np.abs(rel[:, 0] * t_hat[1] - rel[:, 1] * t_hat[0])
    tol = 1e-9 * max(1.0, length)
    on = np.flatnonzero((dist < tol) & (s > -tol) & (s < length + tol))
    on = on[np.argsort(s[on])]
    if len(on) < 2 or abs(s[on[0]]) > tol or abs(s[on[-1]] - length) > tol:
        raise MeshError("notch end points are not mesh nodes")
    edge_keys = {tuple(e) for e in np.sort(mesh.edges(), axis=1).tolist()}
    for a, b in zip(on[:-1], on[1:]):
        if (min(a, b), max(a, b)) not in edge_keys:
            raise MeshError(f"notch segment is not edge-conforming between nodes {a} and {b}")
    boundary = set(mesh.boundary_nodes().tolist())
    dup = [n for i, n in enumerate(on) if not ((i == 0 or i == len(on) - 1) and n not in boundary)]
    dup = np.array(dup, dtype=int)
    if not len(dup):
        return mesh

    n_old = mesh.n_nodes
    copy_of = np.full(n_old, -1)
    copy_of[dup] = n_old + np.arange(len(dup))
    nodes = np.concatenate([mesh.nodes, mesh.nodes[dup]])

    cells = {}
    upper_edges = set()
    for ctype, conn, _ in mesh.cell_blocks():
        c = mesh.nodes[conn].mean(axis=1) - p0
        left = (t_hat[0] * c[:, 1] - t_hat[1] * c[:, 0]) > 0
        touches = (copy_of[conn] >= 0).any(axis=1)
        upper = left & touches
        k = conn.shape[1]
        for i in range(k):
            for a, b in conn[upper][:, [i, (i + 1) % k]].tolist():
                upper_edges.add((min(a, b), max(a, b)))
        new = conn.copy()
        sub = new[upper]
        sub = np.where(copy_of[sub] >= 0, copy_of[sub], sub)
        new[upper] = sub
        cells[ctype] = new

    node_sets = {}
    for nm, ids in mesh.node_sets.items():
        extra = copy_of[ids][copy_of[ids] >= 0]
        node_sets[nm] = np.concatenate([ids, extra])
    edge_sets = {}
    for nm, e in mesh.edge_sets.items():
        e = e.copy()
        for r in range(len(e)):
            a, b = e[r]
            if (min(a, b), max(a, b)) in upper_edges:
                e[r] = [copy_of[a] if copy_of[a] >= 0 else a, copy_of[b] if copy_of[b] >= 0 else b]
        edge_sets[nm] = e
    node_sets[f"{name}_lower"] = dup
    node_sets[f"{name}_upper"] = copy_of[dup]
    return Mesh(nodes, cells, node_sets, edge_sets, dict(mesh.region_sets))


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

HEADER = "mesh2d v1"


def save_mesh(mesh: Mesh, path) -> None:
    lines = [HEADER, f"nodes {mesh.n_nodes}"]
    lines += [f"{i} {x!r} {y!r}" for i, (x, y) in enumerate(mesh.nodes.tolist())]
    lines.append(f"elements {mesh.n_elements}")
    for ctype, conn, start in mesh.cell_blocks():
        lines += [f"{start + i} {ctype} " + " ".join(map(str, row)) for i, row in enumerate(conn.tolist())]
    for name, ids in mesh.node_sets.items():
        lines.append(f"nodeset {name} {len(ids)}")
        lines += [str(i) for i in ids.tolist()]
    for name, e in mesh.edge_sets.items():
        lines.append(f"edgeset {name} {len(e)}")
        lines += [f"{a} {b}" for a, b in e.tolist()]
    for name, ids in mesh.region_sets.items():
        lines.append(f"elemset {name} {len(ids)}")
        lines += [str(i) for i in ids.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_mesh(path) -> Mesh:
    text = Path(path).read_text().splitlines()
    pos = 0

    def fail(msg, line=None):
        raise MeshError(f"{path}:{(line if line is not None else pos) + 1}: {msg}")

    def next_tokens():
        nonlocal pos
        while pos < len(text) and not text[pos].strip():
            pos += 1
        if pos >= len(text):
            return None
        toks = text[pos].split()
        pos += 1
        return toks

    def count_line(keyword):
        toks = next_tokens()
        if toks is None or toks[0] != keyword or len(toks) != 2:
            fail(f"expected '{keyword} <count>'", pos - 1)
        try:
            return int(toks[1])
        except ValueError:
            fail(f"bad count {toks[1]!r}", pos - 1)

    if next_tokens() != HEADER.split():
        fail(f"missing header '{HEADER}'", 0)
    n = count_line("nodes")
    nodes = np.empty((n, 2))
    for k in range(n):
        toks = next_tokens()
        if toks is None or len(toks) != 3:
            fail("expected 'id x y'", pos - 1)
        try:
            i, x, y = int(toks[0]), float(toks[1]), float(toks[2])
        except ValueError:
            fail("malformed node line", pos - 1)
        if i != k:
            fail(f"node ids must be consecutive from 0, got {i}", pos - 1)
        nodes[k] = x, y
    m = count_line("elements")
    rows: dict[str, list] = {t: [] for t in CELL_ORDER}
    order = []
    for k in range(m):
        toks = next_tokens()
        if toks is None or len(toks) < 2:
            fail("expected 'id type n1 .. nk'", pos - 1)
        ctype = toks[1]
        if ctype not in NODES_PER_CELL:
            fail(f"unknown element type {ctype!r}", pos - 1)
        if len(toks) != 2 + NODES_PER_CELL[ctype]:
            fail(f"{ctype} needs {NODES_PER_CELL[ctype]} nodes", pos - 1)
        try:
            eid, conn = int(toks[0]), [int(t) for t in toks[2:]]
        except ValueError:
            fail("malformed element line", pos - 1)
        if eid != k:
            fail(f"element ids must be consecutive from 0, got {eid}", pos - 1)
        order.append(ctype)
        rows[ctype].append(conn)
    if order != sorted(order, key=CELL_ORDER.index):
        fail("elements must be grouped quad4 before tri3")
    cells = {t: np.array(r, dtype=int).reshape(-1, NODES_PER_CELL[t]) for t, r in rows.items() if r}
    node_sets, edge_sets, region_sets = {}, {}, {}
    while True:
        toks = next_tokens()
        if toks is None:
            break
        if len(toks) != 3 or toks[0] not in ("nodeset", "edgeset", "elemset"):
            fail("expected 'nodeset|edgeset|elemset NAME k'", pos - 1)
        kind, name, k = toks[0], toks[1], int(toks[2])
        vals = []
        for _ in range(k):
            t = next_tokens()
            if t is None:
                fail(f"{kind} {name}: unexpected end of file")
            try:
                vals.append([int(v) for v in t])
            except ValueError:
                fail(f"{kind} {name}: malformed id", pos - 1)
        if kind == "edgeset":
            if any(len(v) != 2 for v in vals):
                fail(f"edgeset {name}: expected node pairs")
            edge_sets[name] = np.array(vals, dtype=int).reshape(-1, 2)
        else:
            arr = np.array([v[0] for v in vals], dtype=int)
            (node_sets if kind == "nodeset" else region_sets)[name] = arr
    mesh = Mesh(nodes, cells, node_sets, edge_sets, region_sets)
    mesh.validate()
    return mesh


def merge_node_sets(*sets: np.ndarray) -> np.ndarray:
    return np.unique(np.concatenate(sets)) if sets else np.zeros(0, int)


__all__ = [
    "CircleHole",
    "ELEMENT_TYPES",
    "Mesh",
    "MeshError",
    "RefinementBand",
    "cut_notch",
    "generate_rect_mesh",
    "generate_tri_mesh",
    "graded_coordinates",
    "load_mesh",
    "remove_elements",
    "save_mesh",
]
