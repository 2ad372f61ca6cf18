"""Degradation and local fracture energy functions of the phase-field models.

Three model families are supported: the brittle AT1 and AT2 models and the
quasi-brittle model whose rational degradation function mimics cohesive
softening laws. All evaluators return the value together with its first and
second derivative so the Newton tangent is exact.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .tensor_kernels import LameParams

# Overshoot outside [0, 1] that is counted as a clip event.
CLIP_REPORT_TOL = 1.0e-8


class ModelKind(str, enum.Enum):
    AT1 = "at1"
    AT2 = "at2"
    QUASI_BRITTLE = "quasi-brittle"


class Softening(str, enum.Enum):
    LINEAR = "linear"
    EXPONENTIAL = "exponential"
    CORNELISSEN = "cornelissen"


_C_W = {ModelKind.AT1: 8.0 / 3.0, ModelKind.AT2: 2.0, ModelKind.QUASI_BRITTLE: math.pi}


def softening_constants(softening: Softening | str) -> tuple[float, float, float]:
    """Exponent ``p`` and polynomial coefficients ``a2, a3`` of a softening law."""
    softening = Softening(softening)
    if softening is Softening.LINEAR:
        return 2.0, -0.5, 0.0
    if softening is Softening.EXPONENTIAL:
        return 2.5, 2.0 ** (5.0 / 3.0) - 3.0, 0.0
    return 2.0, 1.3868, 0.6567


@dataclass(frozen=True)
class FractureParams:
    """Fracture energy ``Gc`` (N/mm), length scale ``l`` (mm) and, for the
    quasi-brittle model, Young's modulus ``E0`` and tensile strength ``ft``
    (N/mm^2)."""

    Gc: float
    length_scale: float
    E0: float | None = None
    ft: float | None = None
    nu: float | None = None

    def __post_init__(self):
        if not self.Gc > 0.0:
            raise ValueError(f"Gc must be positive, got {self.Gc}")
        if not self.length_scale > 0.0:
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")
        if self.E0 is not None and not self.E0 > 0.0:
            raise ValueError(f"E0 must be positive, got {self.E0}")
        if self.ft is not None and not self.ft > 0.0:
            raise ValueError(f"ft must be positive, got {self.ft}")


def compute_a1(params: FractureParams) -> float:
    """``a1 = 4 E0 Gc / (pi l ft^2)``."""
    if params.E0 is None or params.ft is None:
        raise ValueError("quasi-brittle a1 needs E0 and ft")
    if params.length_scale <= 0.0 or params.ft <= 0.0:
        raise ValueError("length_scale and ft must be positive")
    return 4.0 * params.E0 * params.Gc / (math.pi * params.length_scale * params.ft**2)


@dataclass(frozen=True)
class PhaseFieldModel:
    kind: ModelKind
    softening: Softening | None = None
    p: float = 2.0
    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    c_w: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        object.__setattr__(self, "c_w", _C_W[self.kind])
        if self.kind is ModelKind.QUASI_BRITTLE:
            if self.softening is None:
                raise ValueError("quasi-brittle model needs a softening law")
            object.__setattr__(self, "softening", Softening(self.softening))
            if not self.a1 > 0.0:
                raise ValueError("quasi-brittle model needs a1 > 0")

    @classmethod
    def brittle(cls, kind: ModelKind | str) -> "PhaseFieldModel":
        kind = ModelKind(kind)
        if kind is ModelKind.QUASI_BRITTLE:
            raise ValueError("use PhaseFieldModel.quasi_brittle for the quasi-brittle model")
        return cls(kind)

    @classmethod
    def quasi_brittle(cls, softening: Softening | str, params: FractureParams) -> "PhaseFieldModel":
        p, a2, a3 = softening_constants(softening)
        return cls(ModelKind.QUASI_BRITTLE, Softening(softening), p, compute_a1(params), a2, a3)


def _check(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if np.any(np.isnan(phi)):
        raise ValueError("phase field contains NaN")
    return phi


def count_overshoot(phi) -> int:
    """Number of entries farther than ``CLIP_REPORT_TOL`` outside [0, 1]."""
    phi = np.asarray(phi)
    return int(np.count_nonzero((phi < -CLIP_REPORT_TOL) | (phi > 1.0 + CLIP_REPORT_TOL)))


def degradation(model: PhaseFieldModel, phi):
    """Return ``(g, g', g'')`` at ``phi``.

    Outside [0, 1] the function is continued with matching slope: linearly
    below 0 (the rational forms have a pole just below zero) and as the
    constant 0 above 1, where g and g' both vanish.
    """
    raw = _check(phi)
    g, dg, ddg = _degradation_unit(model, np.clip(raw, 0.0, 1.0))
    below, above = raw < 0.0, raw > 1.0
    g = np.where(below, g + dg * raw, np.where(above, 0.0, g))
    dg = np.where(above, 0.0, dg)
    ddg = np.where(below | above, 0.0, ddg)
    return g, dg, ddg


def _degradation_unit(model: PhaseFieldModel, phi):
    one = 1.0 - phi
    if model.kind is not ModelKind.QUASI_BRITTLE:
        return one**2, -2.0 * one, np.full_like(phi, 2.0)

    p, a1, a2, a3 = model.p, model.a1, model.a2, model.a3
    num = one**p
    dnum = -p * one ** (p - 1.0)
    ddnum = p * (p - 1.0) * one ** (p - 2.0) if p != 2.0 else np.full_like(phi, 2.0)
    q = a1 * phi * (1.0 + a2 * phi + a2 * a3 * phi**2)
    dq = a1 * (1.0 + 2.0 * a2 * phi + 3.0 * a2 * a3 * phi**2)
    ddq = a1 * (2.0 * a2 + 6.0 * a2 * a3 * phi)

    den = num + q
    dden = dnum + dq
    ddden = ddnum + ddq
    g = num / den
    top = dnum * den - num * dden
    dg = top / den**2
    # d(top)/dphi = ddnum*den - num*ddden (the dnum*dden terms cancel)
    ddg = (ddnum * den - num * ddden) / den**2 - 2.0 * top * dden / den**3
    return g, dg, ddg


def local_fracture_energy(model: PhaseFieldModel, phi):
    """Return ``(w, w', w'')`` at ``phi``."""
    phi = _check(phi)
    if model.kind is ModelKind.AT1:
        return phi.copy(), np.ones_like(phi), np.zeros_like(phi)
    if model.kind is ModelKind.AT2:
        return phi**2, 2.0 * phi, np.full_like(phi, 2.0)
    # held at its maximum above 1; the parabola would push overshoots further out
    over = phi > 1.0
    top = np.minimum(phi, 1.0)
    return 2.0 * top - top**2, 2.0 - 2.0 * top, np.where(over, 0.0, -2.0)


def lame_from_engineering(E0: float, nu: float, plane: str = "strain") -> LameParams:
    """Lame constants from Young's modulus and Poisson's ratio."""
    if not -1.0 < nu < 0.5:
        raise ValueError(f"Poisson ratio must lie in (-1, 0.5), got {nu}")
    lam = E0 * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E0 / (2.0 * (1.0 + nu))
    lame = LameParams(lam, mu)
    if plane == "stress":
        return lame.plane_stress()
    if plane != "strain":
        raise ValueError(f"plane must be 'strain' or 'stress', got {plane!r}")
    return lame
