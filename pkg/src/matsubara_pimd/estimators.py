"""Loop observables, time averages, correlation functions and radial densities.

Observables follow the same convention as potentials: a callable taking
points of shape ``(..., d)`` and returning values of shape ``(...)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, UndefinedCorrelationError
from .modes import LoopTransform

__all__ = [
    "OBSERVABLES",
    "get_observable",
    "ObservableSeries",
    "CorrelationCurve",
    "RadialDensity",
    "loop_observable",
    "time_average",
    "batch_means_stderr",
    "autocorrelation",
    "decay_rate_fit",
    "radial_histogram",
    "LoopAverage",
    "ModeRecorder",
    "RadialHistogram",
    "MomentAccumulator",
]


def _one(q):
    return np.ones(q.shape[:-1])


def _position(q):
    return q[..., 0]


def _q2(q):
    return np.sum(q * q, axis=-1)


def _sinhalfpi(q):
    return np.sin(0.5 * np.pi * q[..., 0])


def _radius(q):
    return np.sqrt(np.sum(q * q, axis=-1))


# Named functions rather than lambdas so observers pickle across processes.
OBSERVABLES = {
    "one": _one,
    "position": _position,
    "q2": _q2,
    "sinhalfpi": _sinhalfpi,
    "radius": _radius,
}


def get_observable(name):
    try:
        return OBSERVABLES[name]
    except KeyError:
        raise ValueError(
            f"unknown observable {name!r}; choose from {sorted(OBSERVABLES)}"
        ) from None


@dataclass
class ObservableSeries:
    """Time-ordered samples of a scalar observable taken every ``dt``."""

    values: np.ndarray
    dt: float = 1.0
    label: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("series contains non-finite values")


@dataclass
class CorrelationCurve:
    mode_index: int
    lags: np.ndarray
    c: np.ndarray
    n_samples: int


@dataclass
class RadialDensity:
    """Histogram estimate of the density of ``|q|``.

    ``density`` integrates to one over ``[0, r_max]``; ``stderr`` is a
    batch-means standard error per bin, or ``None`` when it was not
    estimated. ``n_outside`` counts samples beyond ``r_max``.
    """

    edges: np.ndarray
    density: np.ndarray
    counts: np.ndarray
    n_outside: int = 0
    stderr: np.ndarray = None

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self):
        return np.diff(self.edges)


def loop_observable(xi, d_grid, obs):
    """Imaginary-time average ``(1/D) sum_j O(x_N(tau_j))`` of a loop."""
    x = LoopTransform(xi.n_modes, d_grid, xi.beta).to_grid(xi.xi)
    return float(np.mean(obs(x)))


def time_average(series):
    """Arithmetic mean of a nonempty series."""
    values = series.values if isinstance(series, ObservableSeries) else np.asarray(series)
    if values.size == 0:
        raise ValueError("cannot average an empty series")
    return float(np.mean(values))


def batch_means_stderr(values, n_batches=32):
    """Standard error of the mean of a correlated series by non-overlapping batches.

    Trailing samples that do not fill a batch are dropped from the error
    estimate.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    size = len(values) // n_batches
    if n_batches < 2 or size < 1:
        raise InsufficientDataError(
            f"{len(values)} samples cannot form {n_batches} batches"
        )
    means = values[: size * n_batches].reshape(n_batches, size, -1).mean(axis=1)
    err = means.std(axis=0, ddof=1) / np.sqrt(n_batches)
    return err if err.size > 1 else float(err[0])


def autocorrelation(series, max_lag, center=False, mode_index=0, dt=1.0):
    """Normalized time autocorrelation of a mode coordinate.

    ``C(l) = <x(t) . x(t + l)>_t / <x(t) . x(t)>_t`` with raw time averages
    over the available pairs. With ``center=True`` the sample mean is
    subtracted first. ``series`` has shape ``(T,)`` or ``(T, d)``; lags are
    reported in units of ``dt``.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = len(x)
    if not 0 <= max_lag < n:
        raise InsufficientDataError(f"need more than max_lag={max_lag} samples, got {n}")
    if center:
        x = x - x.mean(axis=0)
    size = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, n=size, axis=0)
    acov = np.fft.irfft(spec * spec.conj(), n=size, axis=0)[: max_lag + 1].sum(axis=1)
    acov /= n - np.arange(max_lag + 1)
    zero = float(np.sum(x * x)) / n
    if zero == 0.0:
        raise UndefinedCorrelationError("series is identically zero")
    c = acov / zero
    c[0] = 1.0
    return CorrelationCurve(mode_index, dt * np.arange(max_lag + 1), c, n)


def decay_rate_fit(curve, threshold=0.1, min_points=3):
    """Exponential decay rate of a correlation curve.

    Fits ``log C`` against lag by least squares over the leading run of lags
    with ``C > threshold`` and returns minus the slope.
    """
    above = curve.c > threshold
    stop = len(above) if np.all(above) else int(np.argmin(above))
    if stop < min_points:
        raise InsufficientDataError(
            f"only {stop} lags above threshold {threshold}; need {min_points}"
        )
    slope = np.polyfit(curve.lags[:stop], np.log(curve.c[:stop]), 1)[0]
    return float(-slope)


def radial_histogram(samples, bins=100, r_max=4.0):
    """Density of ``|q|`` over ``[0, r_max]`` from points of shape ``(M, d)``."""
    if bins < 1 or not r_max > 0:
        raise ValueError("need bins >= 1 and r_max > 0")
    r = np.sqrt(np.sum(np.asarray(samples, dtype=float) ** 2, axis=-1)).ravel()
    edges = np.linspace(0.0, r_max, bins + 1)
    counts, _ = np.histogram(r, bins=edges)
    inside = counts.sum()
    n_out = int(r.size - inside)
    density = counts / (inside * np.diff(edges)) if inside else np.zeros(bins)
    return RadialDensity(edges, density, counts, n_out)


# -- observers ----------------------------------------------------------------
#
# Observers receive (time, xi, eta, x) from Sampler.run, with xi and eta of
# shape (N, d) and bead positions x of shape (D, d). They are single-writer
# per trajectory; merge() combines replicas in any order.


@dataclass
class LoopAverage:
    """Running record of the loop observable along a trajectory."""

    obs: object
    name: str = "loop_average"
    n_batches: int = 32
    values: list = field(default_factory=list)

    def observe(self, t, xi, eta, x):
        self.values.append(float(np.mean(self.obs(x))))

    def merge(self, other):
        self.values.extend(other.values)
        return self

    def result(self):
        v = np.asarray(self.values)
        if v.size == 0:
            raise InsufficientDataError("no samples were recorded")
        try:
            err = batch_means_stderr(v, self.n_batches)
        except InsufficientDataError:
            err = float("nan")
        return {"mean": float(v.mean()), "stderr": err, "n_samples": int(v.size)}


@dataclass
class ModeRecorder:
    """Keeps the time series of selected mode coordinates.

    Requested modes beyond the trajectory's ``N`` are skipped;
    ``active_modes`` lists the ones actually recorded.
    """

    modes: tuple = (0, 1, 2, 3, 4)
    name: str = "modes"
    times: list = field(default_factory=list)
    samples: list = field(default_factory=list)
    active_modes: list = None

    def observe(self, t, xi, eta, x):
        if self.active_modes is None:
            self.active_modes = [k for k in self.modes if k < len(xi)]
        self.times.append(t)
        self.samples.append(xi[self.active_modes].copy())

    def result(self):
        """``{"times": (T,), "xi": (T, len(modes), d)}``."""
        return {"times": np.asarray(self.times), "xi": np.asarray(self.samples)}


@dataclass
class RadialHistogram:
    """Histogram of ``|x_j|`` over every bead of every recorded state.

    Counts are kept per batch of ``batch_size`` states so that a batch-means
    error bar can be attached to each bin.
    """

    bins: int = 100
    r_max: float = 4.0
    batch_size: int = 1000
    name: str = "radial"
    batches: list = field(default_factory=list)
    _current: np.ndarray = None
    _filled: int = 0
    n_outside: int = 0

    def __post_init__(self):
        self.edges = np.linspace(0.0, self.r_max, self.bins + 1)
        self._scale = self.bins / self.r_max
        self._current = np.zeros(self.bins, dtype=np.int64)

    def observe(self, t, xi, eta, x):
        r = np.sqrt(np.sum(x * x, axis=-1))
        idx = (r * self._scale).astype(np.int64)
        inside = idx < self.bins
        self.n_outside += int(np.count_nonzero(~inside))
        self._current += np.bincount(idx[inside], minlength=self.bins)
        self._filled += 1
        if self._filled == self.batch_size:
            self.batches.append(self._current)
            self._current = np.zeros(self.bins, dtype=np.int64)
            self._filled = 0

    def merge(self, other):
        self.batches.extend(other.batches)
        self._current = self._current + other._current
        self._filled += other._filled
        self.n_outside += other.n_outside
        return self

    def result(self):
        per_batch = np.array(self.batches + ([self._current] if self._filled else []))
        if per_batch.size == 0:
            raise InsufficientDataError("no samples were recorded")
        counts = per_batch.sum(axis=0)
        width = np.diff(self.edges)
        total = counts.sum()
        density = counts / (total * width)
        stderr = None
        full = np.array(self.batches)
        if len(full) >= 2:
            dens = full / (full.sum(axis=1, keepdims=True) * width)
            stderr = dens.std(axis=0, ddof=1) / np.sqrt(len(full))
        return RadialDensity(self.edges, density, counts, self.n_outside, stderr)


@dataclass
class MomentAccumulator:
    """Per-mode first and second moments of ``xi`` and ``eta``.

    Sums are kept per batch of ``batch_size`` states; :meth:`result` reports
    per-coordinate variances with batch-means standard errors.
    """

    batch_size: int = 10000
    name: str = "moments"
    batches: list = field(default_factory=list)
    _sum: np.ndarray = None
    _filled: int = 0

    def observe(self, t, xi, eta, x):
        z = np.stack([xi, eta])
        if self._sum is None or self._filled == 0:
            self._sum = np.zeros((2,) + z.shape)
        self._sum[0] += z
        self._sum[1] += z * z
        self._filled += 1
        if self._filled == self.batch_size:
            self.batches.append(self._sum / self.batch_size)
            self._filled = 0

    def result(self):
        """Arrays of shape ``(2, N, d)`` indexed ``[xi/eta, mode, dim]``."""
        if len(self.batches) < 2:
            raise InsufficientDataError("need at least two full batches")
        b = np.array(self.batches)
        mean = b[:, 0].mean(axis=0)
        second = b[:, 1].mean(axis=0)
        var_b = b[:, 1] - b[:, 0] ** 2
        return {
            "mean": mean,
            "var": second - mean**2,
            "var_stderr": var_b.std(axis=0, ddof=1) / np.sqrt(len(b)),
            "n_samples": len(b) * self.batch_size,
        }
