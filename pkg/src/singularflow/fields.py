"""Self-similar vector fields with one non-Lipschitz point at the origin.

A field has the form f(x) = r^alpha * F(y) with r = |x|, y = x/r, alpha < 1,
and F a continuously differentiable map on the unit sphere.  The radial part
F_r = F.y decides whether trajectories collapse into the origin or escape;
the tangential part F_s = F - F_r*y drives the direction dynamics on the
sphere.  Sphere maps are stored as functions of the unit vector itself (not
of an angle) so that d = 1, d = 2 and d = 3 share one interface.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import NotUnitVector, OriginEvaluation, UnknownField

# Guard for r**alpha overflow at negative alpha; the ideal field is singular
# at the origin regardless.
R_FLOOR_DEFAULT = 1e-300

UNIT_TOL = 1e-9

BUILTIN_NAMES = ("power1d", "saddle2d", "spiral2d", "sphere3d")


@dataclass(frozen=True)
class SingularField:
    """Ideal singular field r^alpha * F(x/r).

    sphere_map must accept unit vectors (|y| = 1 within 1e-12); evaluation
    helpers project defensively and reject |y| off by more than 1e-9.
    jacobian_on_sphere, when given, is the ambient Jacobian dF_i/dy_j of the
    same formula; a central finite-difference fallback is used otherwise.
    """

    dimension: int
    alpha: float
    sphere_map: Callable[[np.ndarray], np.ndarray]
    jacobian_on_sphere: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "custom"

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if not self.alpha < 1.0:
            raise ValueError(f"alpha must be < 1, got {self.alpha}")


@dataclass(frozen=True)
class SphericalDecomposition:
    """Radial scalar and tangential vector of F at a point on the sphere."""

    radial: float
    tangential: np.ndarray


def _checked_unit(y, d):
    y = np.asarray(y, dtype=float)
    if y.shape != (d,):
        raise ValueError(f"expected a vector of length {d}, got shape {y.shape}")
    n = np.sqrt(y @ y)
    if abs(n - 1.0) > UNIT_TOL:
        raise NotUnitVector(f"|y| = {n!r} deviates from 1 beyond {UNIT_TOL}")
    return y / n


def eval_sphere_map(field: SingularField, y) -> np.ndarray:
    """Evaluate F at a unit vector, projecting defensively onto the sphere."""
    yu = _checked_unit(y, field.dimension)
    return np.asarray(field.sphere_map(yu), dtype=float)


def eval_field(field: SingularField, x, r_floor: float = R_FLOOR_DEFAULT) -> np.ndarray:
    """Evaluate the ideal field r^alpha * F(x/r); the origin is out of domain."""
    x = np.asarray(x, dtype=float)
    r = np.sqrt(x @ x)
    if r < r_floor or not np.isfinite(r):
        raise OriginEvaluation(
            f"|x| = {r!r} below r_floor = {r_floor!r}; switch to a regularized "
            "or renormalized representation"
        )
    return r**field.alpha * np.asarray(field.sphere_map(x / r), dtype=float)


def decompose(field: SingularField, y) -> SphericalDecomposition:
    """Split F(y) into radial and tangential parts at a unit vector y."""
    yu = _checked_unit(y, field.dimension)
    F = np.asarray(field.sphere_map(yu), dtype=float)
    fr = float(F @ yu)
    if field.dimension == 1:
        # S^0 is two points; there is no tangential direction.
        return SphericalDecomposition(fr, np.zeros(1))
    return SphericalDecomposition(fr, F - fr * yu)


def sphere_jacobian(field: SingularField, y, h: float = 1e-6) -> np.ndarray:
    """Ambient Jacobian of the sphere-map formula at y.

    Uses the analytic Jacobian when available, otherwise central differences
    of the raw formula (no projection, so it stays consistent with the
    analytic ambient derivative).
    """
    y = np.asarray(y, dtype=float)
    if field.jacobian_on_sphere is not None:
        return np.asarray(field.jacobian_on_sphere(y), dtype=float)
    d = field.dimension
    J = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        J[:, j] = (
            np.asarray(field.sphere_map(y + e), dtype=float)
            - np.asarray(field.sphere_map(y - e), dtype=float)
        ) / (2 * h)
    return J


def exponent_normalize(field: SingularField) -> SingularField:
    """Return the equivalent field with alpha reduced to zero.

    The new sphere map is (1-alpha)*F_r(y)*y + F_s(y); fixed points of the
    spherical flow and the signs of their radial values are preserved.
    """
    a = field.alpha
    if a == 0.0:
        return field
    base_map = field.sphere_map
    base_jac = field.jacobian_on_sphere

    def new_map(y, _f=base_map, _a=a):
        F = np.asarray(_f(y), dtype=float)
        return F - _a * (F @ y) * y

    new_jac = None
    if base_jac is not None:

        def new_jac(y, _f=base_map, _j=base_jac, _a=a):
            F = np.asarray(_f(y), dtype=float)
            J = np.asarray(_j(y), dtype=float)
            grad_fr = J.T @ y + F
            return J - _a * (np.outer(y, grad_fr) + (F @ y) * np.eye(len(y)))

    return replace(
        field,
        alpha=0.0,
        sphere_map=new_map,
        jacobian_on_sphere=new_jac,
        name=field.name + "_normalized",
    )


# ---------------------------------------------------------------------------
# Built-in example fields
# ---------------------------------------------------------------------------

def _power1d_map(y):
    return np.array([y[0]])


def _power1d_jac(y):
    return np.array([[1.0]])


def _saddle2d_map(y):
    y1, y2 = y
    return np.array([
        y1 * y1 + y1 * y2 + y1 * y2 * y2,
        y1 * y2 + y2 * y2 - y1 * y1 * y2,
    ])


def _saddle2d_jac(y):
    y1, y2 = y
    return np.array([
        [2 * y1 + y2 + y2 * y2, y1 + 2 * y1 * y2],
        [y2 - 2 * y1 * y2, y1 + 2 * y2 - y1 * y1],
    ])


def _spiral2d_map(y):
    y1, y2 = y
    return np.array([y1 - y2, y1 + y2])


def _spiral2d_jac(y):
    return np.array([[1.0, -1.0], [1.0, 1.0]])


def _sphere3d_map(y):
    y1, y2, y3 = y
    w = y3 * y3 - 0.25
    # rotation part + radial part y3/2 * y + w * (rot x y)
    return np.array([
        -y2 + 0.5 * y3 * y1 + w * y1 * y3,
        y1 + 0.5 * y3 * y2 + w * y2 * y3,
        0.5 * y3 * y3 - w * (y1 * y1 + y2 * y2),
    ])


def _sphere3d_jac(y):
    y1, y2, y3 = y
    w = y3 * y3 - 0.25
    return np.array([
        [0.5 * y3 + w * y3, -1.0, y1 * (3 * y3 * y3 + 0.25)],
        [1.0, 0.5 * y3 + w * y3, y2 * (3 * y3 * y3 + 0.25)],
        [-2 * y1 * w, -2 * y2 * w, y3 - 2 * y3 * (y1 * y1 + y2 * y2)],
    ])


def builtin_field(name: str, alpha: Optional[float] = None) -> SingularField:
    """Construct one of the four example fields.

    power1d   : d=1, sgn(x)|x|^alpha.
    saddle2d  : d=2, two attracting directions (one collapsing, one escaping).
    spiral2d  : d=2, uniform rotation with uniform radial escape.
    sphere3d  : d=3, polar fixed points plus latitude limit cycles; the
                exponent is pinned to 1/3 for this one.
    """
    if name == "power1d":
        if alpha is None:
            raise UnknownField("power1d requires an exponent alpha < 1")
        return SingularField(1, alpha, _power1d_map, _power1d_jac, name="power1d")
    if name == "saddle2d":
        if alpha is None:
            raise UnknownField("saddle2d requires an exponent alpha < 1")
        return SingularField(2, alpha, _saddle2d_map, _saddle2d_jac, name="saddle2d")
    if name == "spiral2d":
        if alpha is None:
            raise UnknownField("spiral2d requires an exponent alpha < 1")
        return SingularField(2, alpha, _spiral2d_map, _spiral2d_jac, name="spiral2d")
    if name == "sphere3d":
        if alpha is not None and abs(alpha - 1.0 / 3.0) > 1e-12:
            raise UnknownField("sphere3d pins alpha = 1/3")
        return SingularField(3, 1.0 / 3.0, _sphere3d_map, _sphere3d_jac, name="sphere3d")
    raise UnknownField(f"unknown built-in field {name!r}; choose from {BUILTIN_NAMES}")
