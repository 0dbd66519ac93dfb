"""Reference values: exact 1D quantum thermal averages and classical averages."""

from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, linalg, special

from .errors import ConvergenceError

__all__ = [
    "SpectralConfig",
    "hermite_quadrature",
    "default_spectral_config",
    "quantum_average_1d",
    "quantum_spectrum_1d",
    "classical_average",
    "classical_radial_density",
    "classical_radial_bin_masses",
]


@dataclass(frozen=True)
class SpectralConfig:
    """Hermite-function basis for the spectral oracle.

    ``scale`` is the basis length ``s``: basis functions are
    ``s**-0.5 * h_n(q / s)``. ``None`` means fit it to the potential.
    ``quad_points`` defaults to twice the basis size.
    """

    basis_size: int = 48
    quad_points: int = None
    scale: float = None

    def __post_init__(self):
        if self.basis_size < 2:
            raise ValueError("basis_size must be >= 2")
        if self.quad_points is None:
            object.__setattr__(self, "quad_points", 2 * self.basis_size)
        if self.quad_points < self.basis_size:
            raise ValueError("quad_points must be >= basis_size")
        if self.scale is not None and not self.scale > 0:
            raise ValueError("scale must be positive")

    def doubled(self):
        return replace(self, basis_size=2 * self.basis_size,
                       quad_points=2 * self.quad_points)


def hermite_quadrature(n_points, n_basis):
    """Nodes ``y`` and weighted Hermite functions ``A`` of shape ``(Q, M)``.

    ``A[i, n] = sqrt(W_i) h_n(y_i)`` where ``W_i`` are Gauss-Hermite weights
    for unweighted integrals, so that ``A.T @ diag(f(y)) @ A`` approximates
    ``integral h_m h_n f dy``. Uses ``W_i = 1 / sum_n h_n(y_i)**2`` which makes
    every row a unit vector; the recurrence runs unnormalized to avoid the
    underflow of ``exp(-y**2 / 2)`` at the outer nodes.
    """
    y, _ = special.roots_hermite(n_points)
    h = np.empty((n_points, n_points))
    h[:, 0] = 1.0
    if n_points > 1:
        h[:, 1] = np.sqrt(2.0) * y
    for n in range(1, n_points - 1):
        h[:, n + 1] = np.sqrt(2.0 / (n + 1)) * y * h[:, n] - np.sqrt(n / (n + 1)) * h[:, n - 1]
        big = np.abs(h[:, n + 1]) > 1e100
        if np.any(big):
            h[big, : n + 2] *= 1e-100
    h /= np.linalg.norm(h, axis=1, keepdims=True)
    return y, h[:, :n_basis]


def _fit_scale(potential):
    q = np.linspace(-4.0, 4.0, 161)
    v = potential.value(q[:, None])
    c2 = np.polyfit(q, v, 2)[0]
    return 1.0 / (2.0 * c2) ** 0.25 if c2 > 0 else 1.0


def _hamiltonian(potential, cfg):
    s = cfg.scale if cfg.scale is not None else _fit_scale(potential)
    m = cfg.basis_size
    y, a = hermite_quadrature(cfg.quad_points, m)
    q = s * y
    n = np.arange(m)
    kin = np.diag(n + 0.5)
    off = -0.5 * np.sqrt((n[:-2] + 1.0) * (n[:-2] + 2.0))
    kin[n[:-2], n[:-2] + 2] = off
    kin[n[:-2] + 2, n[:-2]] = off
    h = 0.5 * kin / s**2 + a.T @ (potential.value(q[:, None])[:, None] * a)
    return h, a, q


def quantum_spectrum_1d(potential, cfg=SpectralConfig()):
    """Energies and eigenvectors of ``p^2/2 + V`` in the Hermite basis."""
    if potential.dim != 1:
        raise ValueError("the spectral oracle is one-dimensional")
    h, _, _ = _hamiltonian(potential, cfg)
    return linalg.eigh(h)


def _thermal(potential, obs, beta, cfg):
    h, a, q = _hamiltonian(potential, cfg)
    e, u = linalg.eigh(h)
    o = a.T @ (np.asarray(obs(q[:, None]), dtype=float)[:, None] * a)
    diag = np.einsum("in,ij,jn->n", u, o, u)
    w = np.exp(-beta * (e - e[0]))
    return float(np.sum(w * diag) / np.sum(w))


def default_spectral_config(beta):
    """Starting basis large enough that ``exp(-beta E)`` is negligible at its edge."""
    size = 48
    while size * beta < 30.0:
        size *= 2
    return SpectralConfig(basis_size=size)


def quantum_average_1d(potential, obs, beta, cfg=None, tol=1e-8, max_doublings=4):
    """Quantum thermal average ``Tr[exp(-beta H) O] / Tr[exp(-beta H)]``.

    The basis and quadrature are doubled until two successive estimates
    differ by less than ``tol``.

    Parameters
    ----------
    potential : PotentialSpec
        One-dimensional and confining.
    obs : callable
        Vectorized observable; receives points of shape ``(Q, 1)``.
    beta : float
    cfg : SpectralConfig, optional
        Starting basis; see :func:`default_spectral_config`.

    Raises
    ------
    ConvergenceError
        If ``max_doublings`` doublings do not reach ``tol``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if potential.dim != 1:
        raise ValueError("the spectral oracle is one-dimensional")
    if cfg is None:
        cfg = default_spectral_config(beta)
    history = [_thermal(potential, obs, beta, cfg)]
    for _ in range(max_doublings):
        cfg = cfg.doubled()
        history.append(_thermal(potential, obs, beta, cfg))
        if abs(history[-1] - history[-2]) < tol:
            return history[-1]
    raise ConvergenceError(
        f"spectral average not converged to {tol} with basis_size={cfg.basis_size}",
        history,
    )


def _vmin(f, lo, hi):
    grid = np.linspace(lo, hi, 2001)
    return float(np.min(f(grid)))


def classical_average(potential, obs, beta, radial=None, limit=200):
    """Classical Boltzmann average ``int O exp(-beta V) / int exp(-beta V)``.

    One-dimensional potentials are integrated over the real line. For
    ``dim == 3`` the potential and observable must be radial and are
    evaluated along the first axis with the ``r**2`` weight. ``obs`` is
    vectorized like the potentials and receives points of shape ``(1, d)``.
    """
    if radial is None:
        radial = potential.dim == 3
    if potential.dim == 1 and not radial:
        def v(x):
            return potential.value(np.atleast_1d(x)[:, None])
        shift = _vmin(v, -20.0, 20.0)
        def weight(x):
            return np.exp(-beta * (v(x)[0] - shift))
        def numer(x):
            return float(np.asarray(obs(np.array([[x]]))).ravel()[0]) * weight(x)
        lo, hi = -np.inf, np.inf
    elif radial:
        def v(r):
            r = np.atleast_1d(r)
            pts = np.zeros((len(r), potential.dim))
            pts[:, 0] = r
            return potential.value(pts)
        shift = _vmin(v, 0.0, 20.0)
        def weight(r):
            return r * r * np.exp(-beta * (v(r)[0] - shift))
        def numer(r):
            pt = np.zeros((1, potential.dim))
            pt[0, 0] = r
            return float(np.asarray(obs(pt)).ravel()[0]) * weight(r)
        lo, hi = 0.0, np.inf
    else:
        raise ValueError("classical_average supports 1D or radial potentials only")
    z, _ = integrate.quad(weight, lo, hi, limit=limit, epsabs=0, epsrel=1e-12)
    if not np.isfinite(z) or z <= 0:
        raise ValueError("Boltzmann normalizer diverges or vanishes")
    num, _ = integrate.quad(numer, lo, hi, limit=limit, epsabs=0, epsrel=1e-12)
    return num / z


def _radial_weight(potential, beta):
    def v(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        pts = np.zeros((len(r), potential.dim))
        pts[:, 0] = r
        return potential.value(pts)
    shift = _vmin(v, 0.0, 20.0)
    return lambda r: np.asarray(r, dtype=float) ** 2 * np.exp(-beta * (v(r) - shift))


def classical_radial_density(potential, beta, r):
    """Normalized classical density of ``|q|`` at radii ``r``."""
    w = _radial_weight(potential, beta)
    z, _ = integrate.quad(lambda s: w(s)[0], 0.0, np.inf, limit=200, epsrel=1e-12)
    if not np.isfinite(z) or z <= 0:
        raise ValueError("Boltzmann normalizer diverges or vanishes")
    return w(r) / z


def classical_radial_bin_masses(potential, beta, edges):
    """Classical probability of ``|q|`` falling in each bin ``[edges[i], edges[i+1])``."""
    w = _radial_weight(potential, beta)
    z, _ = integrate.quad(lambda s: w(s)[0], 0.0, np.inf, limit=200, epsrel=1e-12)
    masses = [
        integrate.quad(lambda s: w(s)[0], lo, hi, epsrel=1e-12)[0]
        for lo, hi in zip(edges[:-1], edges[1:])
    ]
    return np.array(masses) / z
