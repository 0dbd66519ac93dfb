"""Potential functions, the shifted potential V^a and the discretized loop potential."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .modes import FrequencySpectrum, LoopTransform, ModeCoordinates

__all__ = [
    "PotentialSpec",
    "LoopPotentialContext",
    "BUILTIN_POTENTIALS",
    "builtin_potential",
    "shifted_value",
    "shifted_gradient",
    "loop_potential",
    "loop_force",
    "gradient_error",
    "hessian_bounds",
]

SPHERE_SOFTENING = 0.2**2


@dataclass(frozen=True)
class PotentialSpec:
    """A potential ``V`` on ``R^d`` together with its preconditioning shift.

    ``value`` and ``gradient`` must be vectorized over leading axes: for an
    input of shape ``(..., d)`` they return shapes ``(...)`` and ``(..., d)``.
    They are called concurrently by independent trajectories and must not
    keep state.

    ``m1`` and ``m2`` are optional constants for the convergence-rate theory:
    ``V^a`` splits as convex plus a part bounded by ``m1``, and the Hessian of
    ``V^a`` lies between ``-m2`` and ``m2``. Leave them as ``None`` when they
    are not known to hold.
    """

    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    a: float = 1.0
    m1: Optional[float] = None
    m2: Optional[float] = None
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if not self.a > 0:
            raise ValueError(f"preconditioning shift a must be positive, got {self.a}")
        for label in ("m1", "m2"):
            v = getattr(self, label)
            if v is not None and v < 0:
                raise ValueError(f"{label} must be nonnegative, got {v}")


def shifted_value(p, q, a=None):
    """``V^a(q) = V(q) - a |q|^2 / 2`` with ``a = p.a`` unless given."""
    a = p.a if a is None else a
    q = np.asarray(q, dtype=float)
    return p.value(q) - 0.5 * a * np.sum(q * q, axis=-1)


def shifted_gradient(p, q, a=None):
    a = p.a if a is None else a
    q = np.asarray(q, dtype=float)
    return p.gradient(q) - a * q


# -- built-ins ---------------------------------------------------------------


def _harmonic(a, dim=1):
    shift = 1.0 - a
    return PotentialSpec(
        dim=dim,
        value=lambda q: 0.5 * np.sum(q * q, axis=-1),
        gradient=lambda q: np.array(q, dtype=float),
        a=a,
        # V^a = (1 - a)|q|^2 / 2 is convex with no bounded remainder iff a <= 1.
        m1=0.0 if shift >= 0 else None,
        m2=abs(shift),
        name="harmonic",
    )


def _model1d_value(q):
    x = q[..., 0]
    return 0.5 * x * x + x * np.cos(x)


def _model1d_gradient(q):
    x = q[..., 0]
    return (x + np.cos(x) - x * np.sin(x))[..., None]


def _model1d(a, dim=1):
    if dim != 1:
        raise ValueError("model1d is one-dimensional")
    # q cos q is neither bounded nor of bounded curvature: no m1, m2.
    return PotentialSpec(1, _model1d_value, _model1d_gradient, a=a, name="model1d")


def _sphere_value(q):
    r2 = np.sum(q * q, axis=-1)
    return 0.5 * r2 + 1.0 / np.sqrt(r2 + SPHERE_SOFTENING)


def _sphere_gradient(q):
    r2 = np.sum(q * q, axis=-1, keepdims=True)
    return q * (1.0 - (r2 + SPHERE_SOFTENING) ** -1.5)


def _spherical3d(a, dim=3):
    if dim != 3:
        raise ValueError("spherical3d is three-dimensional")
    eps3 = SPHERE_SOFTENING**1.5
    m1 = m2 = None
    if a <= 1.0:
        # V^c = (1 - a)|q|^2/2 + 1/(2 eps), V^b = 1/sqrt(r^2 + eps^2) - 1/(2 eps).
        m1 = 0.5 / np.sqrt(SPHERE_SOFTENING)
        # Softened Coulomb Hessian spans [-1/eps^3, 0.2024/eps^3].
        m2 = 1.0 / eps3 + (1.0 - a)
    return PotentialSpec(3, _sphere_value, _sphere_gradient, a=a, m1=m1, m2=m2,
                         name="spherical3d")


BUILTIN_POTENTIALS = {
    "harmonic": _harmonic,
    "model1d": _model1d,
    "spherical3d": _spherical3d,
}


def builtin_potential(name, a=1.0, dim=None):
    """Return one of the built-in potentials.

    Parameters
    ----------
    name : {"harmonic", "model1d", "spherical3d"}
    a : float
        Preconditioning shift, must be positive.
    dim : int, optional
        Only meaningful for ``harmonic`` (default 1).
    """
    try:
        factory = BUILTIN_POTENTIALS[name]
    except KeyError:
        raise ValueError(
            f"unknown potential {name!r}; choose from {sorted(BUILTIN_POTENTIALS)}"
        ) from None
    if not a > 0:
        raise ValueError(f"preconditioning shift a must be positive, got {a}")
    return factory(a) if dim is None else factory(a, dim)


# -- loop potential ----------------------------------------------------------


class LoopPotentialContext:
    """Everything needed to evaluate the grid-quadrature loop potential.

    The quadrature is the left-endpoint rule on ``D`` equally spaced points;
    ``spectrum`` fixes ``N`` and ``beta``.
    """

    def __init__(self, potential, spectrum, d_grid, method="auto"):
        if not isinstance(spectrum, FrequencySpectrum):
            raise TypeError("spectrum must be a FrequencySpectrum")
        self.potential = potential
        self.spectrum = spectrum
        self.n_modes = spectrum.n_modes
        self.beta = spectrum.beta
        self.d_grid = int(d_grid)
        self.transform = LoopTransform(self.n_modes, self.d_grid, self.beta, method)

    def value(self, xi):
        x = self.transform.to_grid(xi)
        return self.transform.beta_d * float(np.sum(shifted_value(self.potential, x)))

    def force(self, xi):
        x = self.transform.to_grid(xi)
        return self.transform.to_modes(shifted_gradient(self.potential, x))

    def _check(self, xi):
        if xi.n_modes != self.n_modes or xi.dim != self.potential.dim:
            raise ValueError(
                f"mode array of shape {xi.xi.shape} does not match "
                f"(N={self.n_modes}, d={self.potential.dim})"
            )
        if not np.isclose(xi.beta, self.beta):
            raise ValueError("beta of coordinates and context differ")


def loop_potential(ctx, xi):
    """``beta_D * sum_j V^a(x_N(tau_j))`` for mode coordinates ``xi``."""
    ctx._check(xi)
    return ctx.value(xi.xi)


def loop_force(ctx, xi):
    """Gradient of :func:`loop_potential` with respect to every mode, ``(N, d)``."""
    ctx._check(xi)
    return ctx.force(xi.xi)


# -- sanity checks -----------------------------------------------------------


def gradient_error(p, points, step=1e-5):
    """Largest relative deviation of ``p.gradient`` from centered differences.

    The error at each point is normalized by ``max(1, |grad V|)`` so that
    points near a stationary point do not blow up the ratio.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    g = p.gradient(points)
    fd = np.empty_like(points)
    for i in range(p.dim):
        e = np.zeros(p.dim)
        e[i] = step
        fd[:, i] = (p.value(points + e) - p.value(points - e)) / (2 * step)
    scale = np.maximum(1.0, np.linalg.norm(g, axis=-1))
    return float(np.max(np.linalg.norm(g - fd, axis=-1) / scale))


def hessian_bounds(p, points, step=1e-5):
    """Extreme eigenvalues of the finite-difference Hessian of ``V^a`` at ``points``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lo, hi = np.inf, -np.inf
    for q in points:
        h = np.empty((p.dim, p.dim))
        for i in range(p.dim):
            e = np.zeros(p.dim)
            e[i] = step
            h[i] = (shifted_gradient(p, q + e) - shifted_gradient(p, q - e)) / (2 * step)
        ev = np.linalg.eigvalsh(0.5 * (h + h.T))
        lo, hi = min(lo, ev[0]), max(hi, ev[-1])
    return lo, hi
