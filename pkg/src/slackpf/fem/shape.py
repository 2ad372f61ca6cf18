"""Lagrange shape functions and Gauss rules for quad4 and tri3 elements."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_G = 1.0 / np.sqrt(3.0)


@dataclass(frozen=True)
class ElementType:
    name: str
    n_nodes: int
    gauss_points: np.ndarray  # (ngp, 2) reference coordinates
    gauss_weights: np.ndarray  # (ngp,)

    def shape(self, xi: np.ndarray) -> np.ndarray:
        """Shape function values, (npts, n_nodes)."""
        xi = np.atleast_2d(xi)
        r, s = xi[:, 0], xi[:, 1]
        if self.name == "quad4":
            return 0.25 * np.column_stack([(1 - r) * (1 - s), (1 + r) * (1 - s), (1 + r) * (1 + s), (1 - r) * (1 + s)])
        return np.column_stack([1 - r - s, r, s])

    def shape_grad(self, xi: np.ndarray) -> np.ndarray:
        """Reference gradients, (npts, n_nodes, 2)."""
        xi = np.atleast_2d(xi)
        r, s = xi[:, 0], xi[:, 1]
        if self.name == "quad4":
            dr = 0.25 * np.column_stack([-(1 - s), (1 - s), (1 + s), -(1 + s)])
            ds = 0.25 * np.column_stack([-(1 - r), -(1 + r), (1 + r), (1 - r)])
            return np.stack([dr, ds], axis=-1)
        g = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        return np.broadcast_to(g, (len(xi), 3, 2)).copy()


QUAD4 = ElementType(
    "quad4",
    4,
    np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]]),
    np.ones(4),
)
TRI3 = ElementType("tri3", 3, np.array([[1.0 / 3.0, 1.0 / 3.0]]), np.array([0.5]))

ELEMENT_TYPES = {"quad4": QUAD4, "tri3": TRI3}


def element_jacobians(ctype: str, xy: np.ndarray) -> np.ndarray:
    """Jacobian determinants at the Gauss points, (ne, ngp)."""
    et = ELEMENT_TYPES[ctype]
    dn = et.shape_grad(et.gauss_points)  # (ngp, nen, 2)
    jac = np.einsum("ean,gak->egnk", xy, dn)
    return jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]


@dataclass(frozen=True)
class ElementGeometry:
    """Precomputed quadrature data for one block of same-type elements."""

    ctype: str
    conn: np.ndarray  # (ne, nen)
    N: np.ndarray  # (ngp, nen)
    dNdx: np.ndarray  # (ne, ngp, nen, 2)
    wdet: np.ndarray  # (ne, ngp) quadrature weight times |J|
    lumped: np.ndarray  # (ne, nen) row-sum lumped mass, integral of N_a over the element

    @property
    def n_elements(self) -> int:
        return len(self.conn)

    @classmethod
    def build(cls, ctype: str, conn: np.ndarray, nodes: np.ndarray) -> "ElementGeometry":
        et = ELEMENT_TYPES[ctype]
        xy = nodes[conn]
        N = et.shape(et.gauss_points)
        dn = et.shape_grad(et.gauss_points)
        jac = np.einsum("ean,gak->egnk", xy, dn)  # d x_n / d xi_k
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        if np.any(det <= 0.0):
            bad = int(np.flatnonzero((det <= 0).any(axis=1))[0])
            raise ValueError(f"{ctype} element {bad} has a non-positive Jacobian")
        inv = np.empty_like(jac)
        inv[..., 0, 0] = jac[..., 1, 1] / det
        inv[..., 1, 1] = jac[..., 0, 0] / det
        inv[..., 0, 1] = -jac[..., 0, 1] / det
        inv[..., 1, 0] = -jac[..., 1, 0] / det
        dNdx = np.einsum("gak,egkn->egan", dn, inv)
        wdet = det * et.gauss_weights
        lumped = np.einsum("ga,eg->ea", N, wdet)
        return cls(ctype, np.asarray(conn), N, dNdx, wdet, lumped)
