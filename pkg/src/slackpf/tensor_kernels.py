"""Small-strain tensor algebra for the 2D spectral tension/compression split.

Symmetric 2x2 tensors are stored as arrays with trailing dimension 3 holding
the tensorial components ``[xx, yy, xy]``. All functions broadcast over any
number of leading (batch) dimensions. Fourth-order tangents are returned as
3x3 Voigt matrices that map *engineering* strain ``[exx, eyy, 2*exy]`` to
tensorial stress ``[sxx, syy, sxy]``, which is what the FE B-matrix expects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Relative gap below which two eigenvalues are treated as coalesced when
# building the tangent.
DEGENERACY_TOL = 1.0e-9

_IDENTITY = np.array([1.0, 1.0, 0.0])


@dataclass(frozen=True)
class LameParams:
    """Lame constants in N/mm^2."""

    lambda1: float
    mu: float

    def __post_init__(self):
        if not self.mu > 0.0:
            raise ValueError(f"shear modulus mu must be positive, got {self.mu}")
        if not self.lambda1 + 2.0 * self.mu / 3.0 > 0.0:
            raise ValueError("lambda1 + 2*mu/3 must be positive (bulk modulus)")

    def plane_stress(self) -> "LameParams":
        """Effective constants for a plane-stress 2D model."""
        lam = 2.0 * self.lambda1 * self.mu / (self.lambda1 + 2.0 * self.mu)
        return LameParams(lam, self.mu)


class SpectralSplit(NamedTuple):
    eigenvalues: np.ndarray  # (..., 2), descending
    eigenvectors: np.ndarray  # (..., 2, 2), column i is p_i
    eps_plus: np.ndarray  # (..., 3)
    eps_minus: np.ndarray  # (..., 3)


def tensor(xx, yy, xy) -> np.ndarray:
    """Pack components into the ``[xx, yy, xy]`` storage."""
    return np.stack(np.broadcast_arrays(*map(np.asarray, (xx, yy, xy))), axis=-1).astype(float)


def to_matrix(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape[:-1] + (2, 2))
    out[..., 0, 0] = t[..., 0]
    out[..., 1, 1] = t[..., 1]
    out[..., 0, 1] = out[..., 1, 0] = t[..., 2]
    return out


def from_matrix(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return np.stack([m[..., 0, 0], m[..., 1, 1], 0.5 * (m[..., 0, 1] + m[..., 1, 0])], axis=-1)


def engineering(t: np.ndarray) -> np.ndarray:
    """Tensorial ``[xx, yy, xy]`` to engineering ``[xx, yy, 2xy]``."""
    return np.asarray(t, dtype=float) * np.array([1.0, 1.0, 2.0])


def from_engineering(v: np.ndarray) -> np.ndarray:
    return np.asarray(v, dtype=float) * np.array([1.0, 1.0, 0.5])


def ddot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Double contraction ``a : b`` of two symmetric tensors."""
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + 2.0 * a[..., 2] * b[..., 2]


def trace(t: np.ndarray) -> np.ndarray:
    return t[..., 0] + t[..., 1]


def macaulay(x, sign: str = "plus"):
    """Macaulay bracket ``(x +- |x|) / 2``."""
    x = np.asarray(x, dtype=float)
    if sign == "plus":
        out = 0.5 * (x + np.abs(x))
    elif sign == "minus":
        out = 0.5 * (x - np.abs(x))
    else:
        raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")
    return out[()] if out.ndim == 0 else out


def heaviside(x) -> np.ndarray:
    """Derivative of the plus-bracket; ties at zero go to the tensile branch."""
    return (np.asarray(x) >= 0.0).astype(float)


def _eigen(eps: np.ndarray):
    a, b, c = eps[..., 0], eps[..., 1], eps[..., 2]
    mean = 0.5 * (a + b)
    half_diff = 0.5 * (a - b)
    radius = np.hypot(half_diff, c)
    angle = 0.5 * np.arctan2(c, half_diff)
    cs, sn = np.cos(angle), np.sin(angle)
    return mean + radius, mean - radius, cs, sn


def _projectors(cs, sn):
    """Eigenprojections M1, M2 and the normalised shear mode N in Voigt storage."""
    m1 = np.stack([cs * cs, sn * sn, cs * sn], axis=-1)
    m2 = np.stack([sn * sn, cs * cs, -cs * sn], axis=-1)
    # N = (p1 (x) p2 + p2 (x) p1) / sqrt(2) with p1 = (c, s), p2 = (-s, c)
    r2 = np.sqrt(2.0)
    n = np.stack([-r2 * cs * sn, r2 * cs * sn, (cs * cs - sn * sn) / r2], axis=-1)
    return m1, m2, n


def spectral_split(eps) -> SpectralSplit:
    eps = np.asarray(eps, dtype=float)
    if not np.all(np.isfinite(eps)):
        raise ValueError("strain tensor contains non-finite entries")
    e1, e2, cs, sn = _eigen(eps)
    m1, m2, _ = _projectors(cs, sn)
    p1, p2 = macaulay(e1, "plus"), macaulay(e2, "plus")
    n1, n2 = macaulay(e1, "minus"), macaulay(e2, "minus")
    eps_plus = p1[..., None] * m1 + p2[..., None] * m2
    eps_minus = n1[..., None] * m1 + n2[..., None] * m2
    vecs = np.empty(eps.shape[:-1] + (2, 2))
    vecs[..., 0, 0], vecs[..., 1, 0] = cs, sn
    vecs[..., 0, 1], vecs[..., 1, 1] = -sn, cs
    return SpectralSplit(np.stack([e1, e2], axis=-1), vecs, eps_plus, eps_minus)


def psi_split(eps, lame: LameParams):
    """Tensile and compressive strain energy densities (N/mm^2)."""
    eps = np.asarray(eps, dtype=float)
    sp = spectral_split(eps)
    tr = trace(eps)
    psi_p = 0.5 * lame.lambda1 * macaulay(tr, "plus") ** 2 + lame.mu * ddot(sp.eps_plus, sp.eps_plus)
    psi_m = 0.5 * lame.lambda1 * macaulay(tr, "minus") ** 2 + lame.mu * ddot(sp.eps_minus, sp.eps_minus)
    return psi_p, psi_m


def stress_split(eps, lame: LameParams):
    """Tensile and compressive stresses, tensorial storage."""
    eps = np.asarray(eps, dtype=float)
    sp = spectral_split(eps)
    tr = trace(eps)
    sig_p = lame.lambda1 * np.asarray(macaulay(tr, "plus"))[..., None] * _IDENTITY + 2.0 * lame.mu * sp.eps_plus
    sig_m = lame.lambda1 * np.asarray(macaulay(tr, "minus"))[..., None] * _IDENTITY + 2.0 * lame.mu * sp.eps_minus
    return sig_p, sig_m


class SplitTangent(NamedTuple):
    c_plus: np.ndarray  # (..., 3, 3)
    c_minus: np.ndarray  # (..., 3, 3)
    degenerate: np.ndarray  # (...,) bool, regularised branch used


def material_tangent(eps, lame: LameParams) -> SplitTangent:
    """Consistent tangents d(sigma+-)/d(eps) in Voigt form.

    Away from eigenvalue coalescence the shear-mode coefficient is the divided
    difference of the ramp function; when ``|e1 - e2|`` drops below
    ``DEGENERACY_TOL * max(1, |e1| + |e2|)`` its limiting value (the slope of
    the ramp at the shared eigenvalue) is used instead.
    """
    eps = np.asarray(eps, dtype=float)
    e1, e2, cs, sn = _eigen(eps)
    m1, m2, n = _projectors(cs, sn)
    h1, h2, htr = heaviside(e1), heaviside(e2), heaviside(trace(eps))

    gap = e1 - e2
    degenerate = np.abs(gap) < DEGENERACY_TOL * np.maximum(1.0, np.abs(e1) + np.abs(e2))
    safe_gap = np.where(degenerate, 1.0, gap)
    c_shear = np.where(degenerate, h1, (macaulay(e1, "plus") - macaulay(e2, "plus")) / safe_gap)

    outer = lambda a, b: a[..., :, None] * b[..., None, :]  # noqa: E731
    m1m1, m2m2, nn = outer(m1, m1), outer(m2, m2), outer(n, n)
    ii = np.outer(_IDENTITY, _IDENTITY)

    lam, mu = lame.lambda1, lame.mu
    proj_p = h1[..., None, None] * m1m1 + h2[..., None, None] * m2m2 + c_shear[..., None, None] * nn
    proj_m = (1 - h1)[..., None, None] * m1m1 + (1 - h2)[..., None, None] * m2m2 + (1 - c_shear)[..., None, None] * nn
    c_plus = lam * htr[..., None, None] * ii + 2.0 * mu * proj_p
    c_minus = lam * (1 - htr)[..., None, None] * ii + 2.0 * mu * proj_m
    return SplitTangent(c_plus, c_minus, degenerate)


def isotropic_tangent(lame: LameParams) -> np.ndarray:
    """Undamaged plane elasticity matrix (engineering strain -> stress)."""
    lam, mu = lame.lambda1, lame.mu
    return np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]])
