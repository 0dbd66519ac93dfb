"""Fourier (Matsubara) basis of imaginary-time loops and the mode/grid transforms.

Mode index ordering is fixed throughout the package: index 0 is the
centroid, then for every harmonic ``m = 1, 2, ...`` a (sin, cos) pair at
indices ``2m - 1`` and ``2m``.

Loops are sampled on the left-endpoint grid ``tau_j = j * beta / D`` for
``j = 0 .. D - 1``. Arrays of mode coordinates have shape ``(N, d)`` and
arrays of bead positions shape ``(D, d)``; every transform acts column-wise
over the physical dimension ``d``.
"""

from dataclasses import dataclass
import warnings

import numpy as np

__all__ = [
    "MATSUBARA",
    "NORMAL_MODE",
    "FrequencySpectrum",
    "ModeCoordinates",
    "GridLoop",
    "LoopTransform",
    "harmonic_index",
    "matsubara_frequencies",
    "normal_mode_frequencies",
    "basis_value",
    "basis_matrix",
    "mode_to_grid",
    "grid_to_modes",
    "project_force",
]

MATSUBARA = "matsubara"
NORMAL_MODE = "normal_mode"

# Below this grid size a dense product beats the FFT round trip in numpy.
_FFT_MIN_GRID = 512


def _check_beta(beta):
    if not np.isfinite(beta) or beta <= 0:
        raise ValueError(f"beta must be a positive real, got {beta!r}")


def _check_count(value, name):
    if int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")


def harmonic_index(n_modes):
    """Return ``ceil(k / 2)`` for ``k = 0 .. n_modes - 1``."""
    return (np.arange(n_modes) + 1) // 2


@dataclass(frozen=True)
class FrequencySpectrum:
    """Angular frequencies of the free loop, one per mode.

    Attributes
    ----------
    family : str
        ``"matsubara"`` or ``"normal_mode"``.
    beta : float
        Inverse temperature.
    omegas : np.ndarray
        Frequencies in mode order, shape ``(N,)``.
    """

    family: str
    beta: float
    omegas: np.ndarray

    @property
    def n_modes(self):
        return len(self.omegas)

    def preconditioner(self, a):
        """Per-mode stiffness ``omega_k**2 + a``."""
        return self.omegas**2 + a


def matsubara_frequencies(n_modes, beta):
    """Matsubara frequencies ``2 pi ceil(k/2) / beta``."""
    _check_count(n_modes, "n_modes")
    _check_beta(beta)
    omegas = 2.0 * np.pi * harmonic_index(int(n_modes)) / beta
    return FrequencySpectrum(MATSUBARA, float(beta), omegas)


def normal_mode_frequencies(n_modes, beta):
    """Free ring-polymer frequencies ``(2 / beta_N) sin(ceil(k/2) pi / N)``.

    Only odd bead counts are supported.
    """
    _check_count(n_modes, "n_modes")
    _check_beta(beta)
    n = int(n_modes)
    if n % 2 == 0:
        raise NotImplementedError(
            f"normal-mode frequencies are only defined here for odd N, got {n}"
        )
    beta_n = beta / n
    omegas = 2.0 / beta_n * np.sin(harmonic_index(n) * np.pi / n)
    omegas[0] = 0.0
    return FrequencySpectrum(NORMAL_MODE, float(beta), omegas)


def basis_value(k, tau, beta):
    """Evaluate the orthonormal basis function ``c_k`` at ``tau``."""
    _check_beta(beta)
    if k < 0 or int(k) != k:
        raise ValueError(f"mode index must be a nonnegative integer, got {k!r}")
    if not 0.0 <= tau <= beta:
        raise ValueError(f"tau={tau!r} lies outside [0, {beta!r}]")
    return float(_basis(np.array([int(k)]), np.array([float(tau)]), beta)[0, 0])


def _basis(ks, taus, beta):
    """Basis values, shape ``(len(taus), len(ks))``."""
    m = (ks + 1) // 2
    phase = 2.0 * np.pi * np.outer(taus, m) / beta
    out = np.where(ks % 2 == 1, np.sin(phase), np.cos(phase)) * np.sqrt(2.0 / beta)
    out[:, ks == 0] = np.sqrt(1.0 / beta)
    return out


def basis_matrix(n_modes, d_grid, beta):
    """Grid values ``B[j, k] = c_k(j * beta / D)``, shape ``(D, N)``."""
    _check_count(n_modes, "n_modes")
    _check_count(d_grid, "d_grid")
    _check_beta(beta)
    taus = np.arange(int(d_grid)) * (beta / d_grid)
    return _basis(np.arange(int(n_modes)), taus, beta)


class LoopTransform:
    """Cached mode/grid transforms for a fixed ``(N, D, beta)``.

    Parameters
    ----------
    n_modes, d_grid : int
        Number of modes ``N`` and grid points ``D``.
    beta : float
        Inverse temperature.
    method : {"auto", "direct", "fft"}
        ``"direct"`` multiplies by the dense basis matrix, ``"fft"`` uses a
        real FFT of length ``D`` (requires ``N <= D``). ``"auto"`` picks the
        FFT for large grids only.
    """

    def __init__(self, n_modes, d_grid, beta, method="auto"):
        _check_count(n_modes, "n_modes")
        _check_count(d_grid, "d_grid")
        _check_beta(beta)
        self.n_modes = int(n_modes)
        self.d_grid = int(d_grid)
        self.beta = float(beta)
        self.beta_d = self.beta / self.d_grid
        fft_ok = self.n_modes <= self.d_grid
        if method == "auto":
            method = "fft" if fft_ok and self.d_grid >= _FFT_MIN_GRID else "direct"
        elif method == "fft" and not fft_ok:
            raise ValueError("the FFT path requires n_modes <= d_grid")
        elif method not in ("direct", "fft"):
            raise ValueError(f"unknown transform method {method!r}")
        self.method = method
        self.basis = basis_matrix(self.n_modes, self.d_grid, self.beta)
        # Rows of the projection; the transpose is scaled once here.
        self._project = self.beta_d * self.basis.T
        self._n_harm = self.n_modes // 2

    def to_grid(self, xi):
        """Bead positions ``x_j = sum_k xi_k c_k(tau_j)``; ``(N, d) -> (D, d)``."""
        if self.method == "direct":
            return self.basis @ xi
        return self._to_grid_fft(xi)

    def to_modes(self, x):
        """Discrete projection ``beta_D sum_j x_j c_k(tau_j)``; ``(D, d) -> (N, d)``."""
        if self.method == "direct":
            return self._project @ x
        return self._to_modes_fft(x)

    def _to_grid_fft(self, xi):
        n, dgrid, beta = self.n_modes, self.d_grid, self.beta
        coef = np.zeros((dgrid // 2 + 1, xi.shape[1]), dtype=complex)
        coef[0] = dgrid * xi[0] / np.sqrt(beta)
        half = 0.5 * dgrid * np.sqrt(2.0 / beta)
        coef[1 : self._n_harm + 1] -= 1j * half * xi[1:n:2]
        n_cos = (n - 1) // 2
        coef[1 : n_cos + 1] += half * xi[2:n:2]
        if dgrid % 2 == 0 and n_cos == dgrid // 2:
            # Nyquist: the sine vanishes on the grid and irfft keeps only the
            # real part, without the factor of two.
            coef[-1] = 2.0 * coef[-1].real
        return np.fft.irfft(coef, n=dgrid, axis=0)

    def _to_modes_fft(self, x):
        n, beta = self.n_modes, self.beta
        spec = np.fft.rfft(x, axis=0)
        out = np.empty((n, x.shape[1]))
        out[0] = self.beta_d * spec[0].real / np.sqrt(beta)
        scale = self.beta_d * np.sqrt(2.0 / beta)
        m = harmonic_index(n)[1:]
        k = np.arange(1, n)
        sel = spec[m]
        out[1:] = np.where((k % 2 == 1)[:, None], -sel.imag, sel.real) * scale
        return out

    def gram(self):
        """Discrete Gram matrix ``beta_D sum_j c_k c_l``, shape ``(N, N)``."""
        return self._project @ self.basis


@dataclass
class ModeCoordinates:
    """Mode coordinates of a truncated loop.

    ``xi`` is coerced to shape ``(N, d)``; a 1-D input is read as ``d = 1``.
    """

    xi: np.ndarray
    beta: float

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if xi.ndim == 1:
            xi = xi[:, None]
        if xi.ndim != 2 or xi.shape[0] < 1 or xi.shape[1] < 1:
            raise ValueError(f"xi must have shape (N, d), got {xi.shape}")
        if not np.all(np.isfinite(xi)):
            raise ValueError("xi contains non-finite entries")
        _check_beta(self.beta)
        self.xi = xi

    @property
    def n_modes(self):
        return self.xi.shape[0]

    @property
    def dim(self):
        return self.xi.shape[1]


@dataclass
class GridLoop:
    """Bead positions of a loop on the uniform left-endpoint grid."""

    x: np.ndarray
    beta: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError(f"x must have shape (D, d), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("x contains non-finite entries")
        _check_beta(self.beta)
        self.x = x

    @property
    def d_grid(self):
        return self.x.shape[0]

    @property
    def taus(self):
        return np.arange(self.d_grid) * (self.beta / self.d_grid)


def mode_to_grid(xi, d_grid, method="auto"):
    """Evaluate the truncated loop of ``xi`` on a grid of ``d_grid`` points."""
    tr = LoopTransform(xi.n_modes, d_grid, xi.beta, method)
    return GridLoop(tr.to_grid(xi.xi), xi.beta)


def grid_to_modes(grid, n_modes, method="auto"):
    """Recover ``n_modes`` mode coordinates from grid values.

    Exact inverse of :func:`mode_to_grid` on its range whenever the discrete
    Gram matrix is the identity, which holds for ``N <= D`` except for the
    sine at the Nyquist harmonic when ``N = D`` is even.
    """
    if n_modes > grid.d_grid:
        raise ValueError(
            f"n_modes={n_modes} exceeds d_grid={grid.d_grid}; "
            "the grid projection is not orthogonal"
        )
    if n_modes == grid.d_grid and n_modes % 2 == 0:
        warnings.warn(
            "the Nyquist sine mode vanishes on an even grid; "
            "its coordinate is not recoverable",
            stacklevel=2,
        )
    tr = LoopTransform(n_modes, grid.d_grid, grid.beta, method)
    return ModeCoordinates(tr.to_modes(grid.x), grid.beta)


def project_force(grid_force, n_modes, beta=None, spectrum=None, method="auto"):
    """Project a per-bead force onto the modes.

    Returns ``beta_D sum_j g_j c_k(tau_j)`` with shape ``(N, d)``. ``beta`` may
    be taken from ``spectrum``; when both are given they must agree.
    """
    g = np.asarray(grid_force, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    if g.ndim != 2:
        raise ValueError(f"grid_force must have shape (D, d), got {g.shape}")
    if spectrum is not None:
        if spectrum.n_modes != n_modes:
            raise ValueError("spectrum size does not match n_modes")
        if beta is not None and not np.isclose(beta, spectrum.beta):
            raise ValueError("beta disagrees with spectrum.beta")
        beta = spectrum.beta
    if beta is None:
        raise ValueError("beta is required when no spectrum is given")
    method = method if n_modes <= g.shape[0] else "direct"
    return LoopTransform(n_modes, g.shape[0], beta, method).to_modes(g)
