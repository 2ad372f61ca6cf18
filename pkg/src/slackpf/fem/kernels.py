"""Element residuals and consistent tangents, vectorised over element blocks.

Each kernel returns an :class:`ElementContrib` holding residual pieces per
field and tangent blocks per field pair. Dense blocks have shape
``(ne, n_f, n_g)``; blocks that couple node-local unknowns only are stored by
their diagonal, shape ``(ne, nen)``.

Terms of the phi and u equations are integrated with the element Gauss rule.
The zero-order terms involving the slack ``theta`` and the multiplier ``lam``
(the constraint, the multiplier coupling and the penalty) use row-sum lumped
(nodal) integration, which makes the irreversibility constraint hold node by
node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..material_models import FractureParams, PhaseFieldModel, degradation, local_fracture_energy
from ..tensor_kernels import LameParams, material_tangent, psi_split, stress_split
from .shape import ElementGeometry


@dataclass(frozen=True)
class Constitutive:
    model: PhaseFieldModel
    lame: LameParams
    fracture: FractureParams

    @property
    def crack_density(self) -> float:
        """``Gc / (c_w l)``, the factor on w'(phi)."""
        return self.fracture.Gc / (self.model.c_w * self.fracture.length_scale)

    @property
    def gradient_coeff(self) -> float:
        """``2 Gc l / c_w``, the factor on grad(phi) . grad(dphi)."""
        return 2.0 * self.fracture.Gc * self.fracture.length_scale / self.model.c_w


@dataclass
class ElementContrib:
    res: dict[str, np.ndarray] = field(default_factory=dict)
    jac: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)

    def __iadd__(self, other: "ElementContrib") -> "ElementContrib":
        for k, v in other.res.items():
            self.res[k] = self.res[k] + v if k in self.res else v
        for k, v in other.jac.items():
            if k in self.jac:
                a = self.jac[k]
                if a.ndim == v.ndim:
                    self.jac[k] = a + v
                else:
                    dense, diag = (a, v) if a.ndim == 3 else (v, a)
                    out = dense.copy()
                    idx = np.arange(diag.shape[1])
                    out[:, idx, idx] += diag
                    self.jac[k] = out
            else:
                self.jac[k] = v
        return self


def b_matrix(dNdx: np.ndarray) -> np.ndarray:
    """Strain-displacement matrix for engineering strain, (ne, ngp, 3, 2*nen)."""
    ne, ngp, nen, _ = dNdx.shape
    B = np.zeros((ne, ngp, 3, 2 * nen))
    B[..., 0, 0::2] = dNdx[..., 0]
    B[..., 1, 1::2] = dNdx[..., 1]
    B[..., 2, 0::2] = dNdx[..., 1]
    B[..., 2, 1::2] = dNdx[..., 0]
    return B


def strains(geo: ElementGeometry, ue: np.ndarray):
    """Engineering-strain B matrices and tensorial strains at the Gauss points."""
    B = b_matrix(geo.dNdx)
    eps_eng = np.einsum("egij,ej->egi", B, ue.reshape(len(ue), -1))
    return B, eps_eng * np.array([1.0, 1.0, 0.5])


def _check_finite(arr: np.ndarray, geo: ElementGeometry, what: str) -> None:
    bad = ~np.isfinite(arr.reshape(len(arr), -1)).all(axis=1)
    if bad.any():
        raise FloatingPointError(f"non-finite {what} in {geo.ctype} element {int(np.flatnonzero(bad)[0])}")


def element_residual_u(geo: ElementGeometry, ue, phie, mat: Constitutive, tangent: bool = True) -> ElementContrib:
    """Internal force ``int (g sigma+ + sigma-) : eps[du]`` with K_uu and K_uphi."""
    B, eps = strains(geo, ue)
    phi = np.einsum("ga,ea->eg", geo.N, phie)
    g, dg, _ = degradation(mat.model, phi)
    sp, sm = stress_split(eps, mat.lame)
    w = geo.wdet
    stress = g[..., None] * sp + sm
    r = np.einsum("eg,egij,egi->ej", w, B, stress)
    _check_finite(r, geo, "displacement residual")
    if not tangent:
        return ElementContrib({"u": r})
    cp, cm, _ = material_tangent(eps, mat.lame)
    D = g[..., None, None] * cp + cm
    k_uu = np.einsum("eg,egki,egkl,eglj->eij", w, B, D, B)
    k_up = np.einsum("eg,egki,egk,ga->eia", w * dg, B, sp, geo.N)
    return ElementContrib({"u": r}, {("u", "u"): k_uu, ("u", "phi"): k_up})


def element_residual_phi(geo: ElementGeometry, ue, phie, mat: Constitutive, tangent: bool = True) -> ElementContrib:
    """Phase-field residual shared by both formulations (no constraint term)."""
    B, eps = strains(geo, ue)
    phi = np.einsum("ga,ea->eg", geo.N, phie)
    grad = np.einsum("egak,ea->egk", geo.dNdx, phie)
    g, dg, ddg = degradation(mat.model, phi)
    _, dw, ddw = local_fracture_energy(mat.model, phi)
    psi_p, _ = psi_split(eps, mat.lame)
    sp, _ = stress_split(eps, mat.lame)
    w = geo.wdet
    gc = mat.gradient_coeff
    local = mat.crack_density * dw + dg * psi_p
    r = np.einsum("eg,eg,ga->ea", w, local, geo.N) + gc * np.einsum("eg,egak,egk->ea", w, geo.dNdx, grad)
    _check_finite(r, geo, "phase-field residual")
    if not tangent:
        return ElementContrib({"phi": r})
    stiff = mat.crack_density * ddw + ddg * psi_p
    k_pp = np.einsum("eg,eg,ga,gb->eab", w, stiff, geo.N, geo.N) + gc * np.einsum(
        "eg,egak,egbk->eab", w, geo.dNdx, geo.dNdx
    )
    k_pu = np.einsum("eg,ga,egk,egkj->eaj", w * dg, geo.N, sp, B)
    return ElementContrib({"phi": r}, {("phi", "phi"): k_pp, ("phi", "u"): k_pu})


def element_residual_phi_lmm(geo: ElementGeometry, ue, phie, lame_e, mat: Constitutive, tangent: bool = True) -> ElementContrib:
    """Phase-field residual of the multiplier formulation: adds ``-int lam dphi``."""
    out = element_residual_phi(geo, ue, phie, mat, tangent)
    m = geo.lumped
    out += ElementContrib({"phi": -m * lame_e}, {("phi", "lam"): -m})
    return out


def element_residual_theta_lambda_lmm(geo: ElementGeometry, phie, phin_e, thetae, lame_e) -> ElementContrib:
    """Slack and constraint equations ``int 2 lam theta dtheta`` and ``-int (h - theta^2) dlam``."""
    m = geo.lumped
    h = phie - phin_e
    res = {"theta": 2.0 * m * lame_e * thetae, "lam": -m * (h - thetae**2)}
    jac = {
        ("theta", "theta"): 2.0 * m * lame_e,
        ("theta", "lam"): 2.0 * m * thetae,
        ("lam", "phi"): -m,
        ("lam", "theta"): 2.0 * m * thetae,
    }
    return ElementContrib(res, jac)


def element_residual_pen(geo: ElementGeometry, phie, phin_e, thetae, eta: float) -> ElementContrib:
    """Penalty terms: ``+eta (h - theta^2)`` in the phi equation and the slack equation."""
    m = geo.lumped
    c = phie - phin_e - thetae**2
    res = {"phi": eta * m * c, "theta": -2.0 * eta * m * thetae * c}
    jac = {
        ("phi", "phi"): eta * m,
        ("phi", "theta"): -2.0 * eta * m * thetae,
        ("theta", "phi"): -2.0 * eta * m * thetae,
        ("theta", "theta"): m * (-2.0 * eta * c + 4.0 * eta * thetae**2),
    }
    return ElementContrib(res, jac)
