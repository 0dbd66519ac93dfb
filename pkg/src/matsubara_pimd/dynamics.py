"""Preconditioned Langevin samplers in mode coordinates.

Three variants share one implementation and differ only in the free-loop
frequencies and in the stepper:

``matsubara_underdamped``
    Matsubara frequencies, BAOAB splitting.
``matsubara_overdamped``
    Matsubara frequencies, exact Ornstein-Uhlenbeck half steps around an
    explicit kick by the nonlinear force.
``standard_underdamped``
    Ring-polymer normal-mode frequencies (odd ``N``, ``D = N``), BAOAB.

Every mode ``k`` is preconditioned by its stiffness ``omega_k**2 + a``, so
the free part of each mode is a unit-frequency oscillator and an O(1) time
step is stable for all ``N``.
"""

from dataclasses import dataclass, field, replace
import math
import time as _time
import warnings

import numpy as np

from .errors import WrongVariantError
from .modes import matsubara_frequencies, normal_mode_frequencies
from .potentials import LoopPotentialContext, PotentialSpec

__all__ = [
    "MATSUBARA_UNDERDAMPED",
    "MATSUBARA_OVERDAMPED",
    "STANDARD_UNDERDAMPED",
    "VARIANTS",
    "SamplerConfig",
    "PhaseState",
    "Sampler",
    "RateBounds",
    "make_rng",
    "initial_state",
    "baoab_step",
    "overdamped_step",
    "run_trajectory",
    "rate_bounds",
]

MATSUBARA_UNDERDAMPED = "matsubara_underdamped"
MATSUBARA_OVERDAMPED = "matsubara_overdamped"
STANDARD_UNDERDAMPED = "standard_underdamped"
VARIANTS = (MATSUBARA_UNDERDAMPED, MATSUBARA_OVERDAMPED, STANDARD_UNDERDAMPED)

# Steps of noise drawn per generator call inside run().
_NOISE_BLOCK = 4096


@dataclass(frozen=True)
class SamplerConfig:
    """Parameters of one trajectory.

    ``d_grid`` defaults to ``n_modes``. The preconditioning shift ``a`` lives
    on the potential. ``gamma`` is ignored by the overdamped variant.
    """

    variant: str
    n_modes: int
    beta: float
    potential: PotentialSpec
    d_grid: int = None
    gamma: float = 1.0
    dt: float = 1.0 / 16
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.d_grid is None:
            object.__setattr__(self, "d_grid", self.n_modes)
        if self.n_modes < 1 or self.d_grid < 1:
            raise ValueError("n_modes and d_grid must be positive")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if self.variant == STANDARD_UNDERDAMPED:
            if self.n_modes % 2 == 0:
                raise NotImplementedError("standard PIMD needs an odd number of beads")
            if self.d_grid != self.n_modes:
                raise ValueError("standard PIMD requires d_grid == n_modes")
        elif self.n_modes > self.d_grid:
            warnings.warn(
                f"n_modes={self.n_modes} > d_grid={self.d_grid}: the grid "
                "quadrature cannot resolve every mode",
                stacklevel=3,
            )

    @property
    def a(self):
        return self.potential.a

    @property
    def underdamped(self):
        return self.variant != MATSUBARA_OVERDAMPED

    def spectrum(self):
        if self.variant == STANDARD_UNDERDAMPED:
            return normal_mode_frequencies(self.n_modes, self.beta)
        return matsubara_frequencies(self.n_modes, self.beta)

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass
class PhaseState:
    """Mode positions ``xi`` and velocities ``eta``, both ``(N, d)``."""

    xi: np.ndarray
    eta: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if self.xi.shape != self.eta.shape:
            raise ValueError("xi and eta must have equal shapes")

    def copy(self):
        return PhaseState(self.xi.copy(), self.eta.copy(), self.time)


def make_rng(seed):
    """The per-trajectory generator: counter-based Philox keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(seed))


class Sampler:
    """Stepper for one :class:`SamplerConfig`.

    Parameters
    ----------
    config : SamplerConfig
    spectrum : FrequencySpectrum, optional
        Override of the variant's frequencies. Only meant for tests that
        compare variants with identical frequencies.
    noise : bool
        When false the stochastic terms are dropped, which turns the
        dynamics into a deterministic flow.
    """

    def __init__(self, config, spectrum=None, noise=True):
        self.config = config
        self.spectrum = config.spectrum() if spectrum is None else spectrum
        if self.spectrum.n_modes != config.n_modes:
            raise ValueError("spectrum size does not match config.n_modes")
        self.noise = noise
        self.ctx = LoopPotentialContext(config.potential, self.spectrum, config.d_grid)
        tr = self.ctx.transform
        pot = config.potential
        stiff = self.spectrum.preconditioner(pot.a)[:, None]
        self.stiffness = stiff
        self.dim = pot.dim
        self.shape = (config.n_modes, pot.dim)

        # F(xi) = -xi - P grad V^a(B xi) / stiff
        #       = L xi - (P / stiff) grad V(B xi),  L = -I + a P B / stiff
        self._basis = tr.basis
        self._proj = tr._project / stiff
        self._linear = -np.eye(config.n_modes) + pot.a * (tr._project @ tr.basis) / stiff
        self._grad = pot.gradient

        h = config.dt
        self._half = 0.5 * h
        if config.underdamped:
            c = math.exp(-config.gamma * h)
            self._ou_decay = c
            self._ou_noise = np.sqrt((1.0 - c * c) / stiff)
        else:
            c = math.exp(-0.5 * h)
            self._ou_decay = c
            self._ou_noise = np.sqrt((1.0 - c * c) / stiff)
            self._kick = h / stiff
        if not noise:
            self._ou_noise = np.zeros_like(self._ou_noise)

    # -- forces ---------------------------------------------------------

    def force(self, xi):
        """Preconditioned force ``-xi_k - dV/dxi_k / (omega_k**2 + a)``."""
        return self._linear @ xi - self._proj @ self._grad(self._basis @ xi)

    def nonlinear_force(self, xi):
        """Preconditioned loop-potential force ``-dV^a/dxi_k / (omega_k**2 + a)``."""
        return self.force(xi) + xi

    def grid(self, xi):
        return self._basis @ xi

    # -- single steps on raw arrays --------------------------------------

    def initial_arrays(self, rng):
        scale = 1.0 / np.sqrt(self.stiffness)
        xi = rng.standard_normal(self.shape) * scale
        eta = rng.standard_normal(self.shape) * scale
        return xi, eta

    def noise_shape(self, n_steps):
        if self.config.underdamped:
            return (n_steps,) + self.shape
        return (n_steps, 2) + self.shape

    def _baoab(self, xi, eta, f, g):
        half = self._half
        eta = eta + half * f
        xi = xi + half * eta
        eta = self._ou_decay * eta + self._ou_noise * g
        xi = xi + half * eta
        f = self.force(xi)
        eta = eta + half * f
        return xi, eta, f

    def _overdamped(self, xi, g):
        c, s = self._ou_decay, self._ou_noise
        xi = c * xi + s * g[0]
        xi = xi + self._kick * self.nonlinear_force(xi)
        xi = c * xi + s * g[1]
        return xi

    def step(self, state, rng):
        """Advance ``state`` by one time step, returning a new state."""
        g = rng.standard_normal(self.noise_shape(1))[0]
        if self.config.underdamped:
            xi, eta, _ = self._baoab(state.xi, state.eta, self.force(state.xi), g)
        else:
            xi, eta = self._overdamped(state.xi, g), state.eta
        return PhaseState(xi, eta, state.time + self.config.dt)

    # -- trajectories -----------------------------------------------------

    def run(self, n_steps, burn_in=0, observers=(), stride=1, rng=None, state=None):
        """Integrate ``n_steps`` steps and feed states to ``observers``.

        After ``burn_in`` steps, every ``stride``-th state is passed to each
        observer's ``observe(time, xi, eta, x)`` where ``x`` holds the bead
        positions. Returns the final :class:`PhaseState`.
        """
        if rng is None:
            rng = make_rng(self.config.seed)
        if state is None:
            xi, eta = self.initial_arrays(rng)
            t0 = 0.0
        else:
            xi, eta, t0 = state.xi.copy(), state.eta.copy(), state.time
        dt = self.config.dt
        under = self.config.underdamped
        f = self.force(xi) if under else None
        done = 0
        while done < n_steps:
            block = min(_NOISE_BLOCK, n_steps - done)
            noise = rng.standard_normal(self.noise_shape(block))
            for i in range(block):
                if under:
                    xi, eta, f = self._baoab(xi, eta, f, noise[i])
                else:
                    xi = self._overdamped(xi, noise[i])
                n = done + i + 1
                if n > burn_in and (n - burn_in) % stride == 0 and observers:
                    t = t0 + n * dt
                    x = self._basis @ xi
                    for obs in observers:
                        try:
                            obs.observe(t, xi, eta, x)
                        except Exception as exc:
                            raise RuntimeError(
                                f"observer {obs!r} failed at step {n} (t={t})"
                            ) from exc
            done += block
        return PhaseState(xi, eta, t0 + n_steps * dt)


def initial_state(config, rng):
    """Draw ``xi`` and ``eta`` from the free preconditioned Gaussian."""
    xi, eta = Sampler(config).initial_arrays(rng)
    return PhaseState(xi, eta, 0.0)


def baoab_step(state, config, rng):
    """One BAOAB step of an underdamped variant."""
    if not config.underdamped:
        raise WrongVariantError(f"baoab_step cannot integrate {config.variant}")
    return Sampler(config).step(state, rng)


def overdamped_step(state, config, rng):
    """One splitting step of the overdamped variant."""
    if config.underdamped:
        raise WrongVariantError(f"overdamped_step cannot integrate {config.variant}")
    return Sampler(config).step(state, rng)


@dataclass
class TrajectorySummary:
    config: SamplerConfig
    n_steps: int
    burn_in: int
    final_state: PhaseState
    outputs: dict = field(default_factory=dict)
    wall_time: float = 0.0


def run_trajectory(config, n_steps, burn_in=None, observers=(), stride=1):
    """Run one trajectory from :func:`initial_state` and finalize observers.

    ``burn_in`` defaults to 10% of ``n_steps``. Observers expose ``name``,
    ``observe(time, xi, eta, x)`` and ``result()``; the summary maps each
    name to its result. Same config and seed give bit-identical results.
    """
    if burn_in is None:
        burn_in = n_steps // 10
    if not n_steps > burn_in >= 0:
        raise ValueError(f"need n_steps > burn_in >= 0, got {n_steps}, {burn_in}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    start = _time.perf_counter()
    sampler = Sampler(config)
    final = sampler.run(n_steps, burn_in, observers, stride)
    outputs = {}
    for obs in observers:
        if obs.name in outputs:
            raise ValueError(f"duplicate observer name {obs.name!r}")
        outputs[obs.name] = obs.result()
    return TrajectorySummary(
        config, n_steps, burn_in, final, outputs, _time.perf_counter() - start
    )


# -- theoretical rates -----------------------------------------------------


@dataclass(frozen=True)
class RateBounds:
    """Dimension-free convergence rates and the assumptions behind them.

    ``lambda1`` bounds the overdamped entropy decay, ``lambda2`` the
    underdamped one. A rate is ``None`` when its assumptions are not known to
    hold; ``reasons`` says why.
    """

    lambda1: float = None
    lambda2: float = None
    assumption_i: bool = False
    assumption_ii: bool = False
    assumption_iii: bool = False
    reasons: tuple = ()


def rate_bounds(m1, m2, a, beta, assumption_iii):
    """Evaluate ``exp(-4 beta m1)`` and ``a^2 / (3 m2^2 + 5 a^2) exp(-4 beta m1)``."""
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    for label, v in (("m1", m1), ("m2", m2)):
        if v is not None and v < 0:
            raise ValueError(f"{label} must be nonnegative, got {v}")
    reasons = []
    lam1 = lam2 = None
    if m1 is None:
        reasons.append("assumption (i) unverified: no bounded-perturbation constant m1")
    else:
        lam1 = math.exp(-4.0 * beta * m1)
    if m2 is None:
        reasons.append("assumption (ii) unverified: no Hessian bound m2")
    if not assumption_iii:
        reasons.append("assumption (iii) violated: n_modes > d_grid")
    if lam1 is not None and m2 is not None and assumption_iii:
        lam2 = a * a / (3.0 * m2 * m2 + 5.0 * a * a) * lam1
    return RateBounds(
        lam1, lam2, m1 is not None, m2 is not None, bool(assumption_iii), tuple(reasons)
    )
