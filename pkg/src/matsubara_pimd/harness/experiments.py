"""Experiment presets: time-average error, mode correlations, radial densities."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import json
import math
import os
import time

import numpy as np

from ..dynamics import VARIANTS, SamplerConfig, run_trajectory
from ..errors import InsufficientDataError
from ..estimators import (
    CorrelationCurve,
    LoopAverage,
    ModeRecorder,
    RadialHistogram,
    autocorrelation,
    decay_rate_fit,
    get_observable,
)
from ..oracle import classical_average, classical_radial_bin_masses, quantum_average_1d
from ..potentials import builtin_potential
from .config import ConfigError, canonical_json, config_hash, total_steps


@dataclass
class ResultRecord:
    experiment: str
    config: dict
    config_hash: str
    files: dict = field(default_factory=dict)
    wall_time: float = 0.0
    summary: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(
            {
                "experiment": self.experiment,
                "config": self.config,
                "config_hash": self.config_hash,
                "files": self.files,
                "wall_time": self.wall_time,
                "summary": self.summary,
            },
            indent=2,
            sort_keys=True,
            default=_jsonable,
        )


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def hashed_part(cfg):
    """The part of a config that determines results (not output or workers)."""
    exp = {k: v for k, v in cfg["experiment"].items() if k != "workers"}
    return {"sampler": cfg["sampler"], "experiment": exp}


# -- csv ----------------------------------------------------------------------


def format_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def write_csv(path, columns, rows, comments=()):
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(columns))
    lines.extend(",".join(format_cell(row[c]) for c in columns) for row in rows)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path):
    """Parse a CSV written by :func:`write_csv`: ``(comments, columns, rows)``."""
    comments, body = [], []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                comments.append(line[1:].strip())
            elif line:
                body.append(line.split(","))
    return comments, body[0], [dict(zip(body[0], r)) for r in body[1:]]


# -- jobs -----------------------------------------------------------------------


def point_seed(seed, variant, beta, n_modes, replica):
    """Seed of one sweep point, independent of the rest of the sweep."""
    key = [int(seed), VARIANTS.index(variant), int(n_modes), int(replica),
           int(round(float(beta) * 1e6))]
    return int(np.random.SeedSequence(key).generate_state(1, dtype=np.uint64)[0])


def make_job(cfg, variant, beta, n_modes, replica=0, **observer):
    s = cfg["sampler"]
    e = cfg["experiment"]
    d_grid = s["d_grid"] if s["d_grid"] is not None else n_modes
    return {
        "potential": s["potential"],
        "a": float(s["a"]),
        "variant": variant,
        "n_modes": int(n_modes),
        "d_grid": int(d_grid),
        "beta": float(beta),
        "gamma": float(s["gamma"]),
        "dt": float(s["dt"]),
        "seed": point_seed(s["seed"], variant, beta, n_modes, replica),
        "n_steps": total_steps(cfg),
        "burn_in": int(e["burn_in"]),
        "stride": int(e["record_stride"]),
        "observer": observer,
    }


def _observer(spec):
    kind = spec["kind"]
    if kind == "loop_average":
        return LoopAverage(get_observable(spec["observable"]))
    if kind == "modes":
        return ModeRecorder(modes=tuple(spec["modes"]))
    if kind == "radial":
        return RadialHistogram(spec["bins"], spec["r_max"], spec["batch_size"])
    raise ValueError(f"unknown observer kind {kind!r}")


def run_job(job):
    """Run one trajectory described by a plain dict; safe in a worker process."""
    pot = builtin_potential(job["potential"], a=job["a"])
    config = SamplerConfig(
        variant=job["variant"],
        n_modes=job["n_modes"],
        beta=job["beta"],
        potential=pot,
        d_grid=job["d_grid"],
        gamma=job["gamma"],
        dt=job["dt"],
        seed=job["seed"],
    )
    obs = _observer(job["observer"])
    summary = run_trajectory(config, job["n_steps"], job["burn_in"], [obs], job["stride"])
    return obs, summary.wall_time


def run_jobs(jobs, workers=1):
    """Run jobs, in parallel when ``workers > 1``; results keep job order."""
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_job, jobs))
    return [run_job(j) for j in jobs]


def _replicas(cfg, points, **observer):
    """Run every point for every replica; one list of observers per point."""
    reps = int(cfg["experiment"]["replicas"])
    jobs = [make_job(cfg, *p, replica=r, **observer) for p in points for r in range(reps)]
    results = run_jobs(jobs, int(cfg["experiment"].get("workers", 1)))
    return [[obs for obs, _ in results[i * reps:(i + 1) * reps]] for i in range(len(points))]


def _merged(cfg, points, **observer):
    merged = []
    for chunk in _replicas(cfg, points, **observer):
        head = chunk[0]
        for other in chunk[1:]:
            head.merge(other)
        merged.append(head)
    return merged


def _simulation_time(cfg):
    return total_steps(cfg) * float(cfg["sampler"]["dt"])


# -- experiments -----------------------------------------------------------------


def experiment_sample(cfg):
    s, e = cfg["sampler"], cfg["experiment"]
    point = (s["variant"], s["beta"], s["n_modes"])
    (obs,) = _merged(cfg, [point], kind="loop_average", observable=e["observable"])
    res = obs.result()
    row = {
        "variant": s["variant"],
        "beta": float(s["beta"]),
        "N": int(s["n_modes"]),
        "T": _simulation_time(cfg),
        "A": res["mean"],
        "stderr": res["stderr"],
    }
    return ["variant", "beta", "N", "T", "A", "stderr"], [row], {"A": res["mean"],
                                                               "stderr": res["stderr"]}


def _reference_1d(cfg, beta):
    pot = builtin_potential(cfg["sampler"]["potential"], a=float(cfg["sampler"]["a"]))
    if pot.dim != 1:
        raise ConfigError("the time-average error needs a one-dimensional potential")
    return quantum_average_1d(pot, get_observable(cfg["experiment"]["observable"]), beta)


def experiment_timeavg_error(cfg):
    """Time average ``A`` against the exact quantum value over a (beta, N) sweep."""
    e = cfg["experiment"]
    refs = {float(b): _reference_1d(cfg, float(b)) for b in e["betas"]}
    points = [(v, float(b), int(n)) for v in e["variants"] for b in e["betas"]
              for n in e["n_values"]]
    observers = _merged(cfg, points, kind="loop_average", observable=e["observable"])
    rows = []
    for (v, b, n), obs in zip(points, observers):
        res = obs.result()
        rows.append({
            "variant": v, "beta": b, "N": n, "T": _simulation_time(cfg),
            "A": res["mean"], "stderr": res["stderr"], "reference": refs[b],
            "error": res["mean"] - refs[b],
        })
    columns = ["variant", "beta", "N", "T", "A", "stderr", "reference", "error"]
    summary = {"max_abs_error": max(abs(r["error"]) for r in rows)}
    return columns, rows, summary


def experiment_correlation(cfg):
    """Autocorrelation of the first mode coordinates over a (beta, N) sweep."""
    e, s = cfg["experiment"], cfg["sampler"]
    lag_dt = float(s["dt"]) * int(e["record_stride"])
    max_lag = int(round(float(e["max_lag_time"]) / lag_dt))
    points = [(v, float(b), int(n)) for v in e["variants"] for b in e["betas"]
              for n in e["n_values"]]
    rows, rates = [], []
    per_point = _replicas(cfg, points, kind="modes", modes=list(e["modes"]))
    for (v, b, n), chunk in zip(points, per_point):
        series = [obs.result()["xi"] for obs in chunk]
        if len(series[0]) <= max_lag:
            raise InsufficientDataError(
                f"{len(series[0])} recorded samples cannot resolve {max_lag} lags"
            )
        for j, k in enumerate(chunk[0].active_modes):
            # Replicas are independent trajectories: average their curves.
            c = np.mean([autocorrelation(xi[:, j], max_lag, center=bool(e["center"])).c
                         for xi in series], axis=0)
            curve = CorrelationCurve(k, lag_dt * np.arange(max_lag + 1), c,
                                     sum(len(xi) for xi in series))
            for lag, value in zip(curve.lags, curve.c):
                rows.append({"variant": v, "beta": b, "N": n, "mode": k,
                             "lag": float(lag), "C": float(value)})
            try:
                rate = decay_rate_fit(curve, float(e["fit_threshold"]))
            except InsufficientDataError:
                rate = None
            rates.append({"variant": v, "beta": b, "N": n, "mode": k, "rate": rate})
    return ["variant", "beta", "N", "mode", "lag", "C"], rows, {"rates": rates}


def experiment_radial_density(cfg):
    """Histogram of ``|q|`` over all beads for each (variant, N)."""
    e, s = cfg["experiment"], cfg["sampler"]
    beta = float(s["beta"])
    pot = builtin_potential(s["potential"], a=float(s["a"]))
    n_records = (total_steps(cfg) - int(e["burn_in"])) // int(e["record_stride"])
    batch = max(1, math.ceil(n_records / int(e["n_batches"])))
    points = [(v, beta, int(n)) for v in e["variants"] for n in e["n_values"]]
    observers = _merged(cfg, points, kind="radial", bins=int(e["bins"]),
                         r_max=float(e["r_max"]), batch_size=batch)
    edges = np.linspace(0.0, float(e["r_max"]), int(e["bins"]) + 1)
    classical = classical_radial_bin_masses(pot, beta, edges) / np.diff(edges)
    rows = []
    for (v, _, n), obs in zip(points, observers):
        dens = obs.result()
        err = dens.stderr if dens.stderr is not None else np.full(len(edges) - 1, np.nan)
        for r, rho, se, cl in zip(dens.centers, dens.density, err, classical):
            rows.append({"variant": v, "N": n, "r": r, "density": rho,
                         "stderr": se, "classical": cl})
    columns = ["variant", "N", "r", "density", "stderr", "classical"]
    return columns, rows, {"n_curves": len(points)}


def experiment_reference(cfg):
    """Exact quantum (1D only) and classical thermal averages."""
    s, e = cfg["sampler"], cfg["experiment"]
    pot = builtin_potential(s["potential"], a=float(s["a"]))
    obs = get_observable(e["observable"])
    rows = []
    for b in e["betas"]:
        quantum = quantum_average_1d(pot, obs, float(b)) if pot.dim == 1 else None
        rows.append({
            "potential": s["potential"], "beta": float(b), "observable": e["observable"],
            "quantum": quantum, "classical": classical_average(pot, obs, float(b)),
        })
    return ["potential", "beta", "observable", "quantum", "classical"], rows, {"rows": rows}


RUNNERS = {
    "sample": experiment_sample,
    "timeavg_error": experiment_timeavg_error,
    "correlation": experiment_correlation,
    "radial_density": experiment_radial_density,
    "reference": experiment_reference,
}


def run_experiment(cfg, output_dir=None):
    """Execute ``cfg``, write ``<experiment>.csv`` and ``<experiment>.json``."""
    name = cfg["experiment"]["name"]
    out = output_dir or cfg["output"]["dir"]
    os.makedirs(out, exist_ok=True)
    digest = config_hash(hashed_part(cfg))
    start = time.perf_counter()
    columns, rows, summary = RUNNERS[name](cfg)
    csv_path = os.path.join(out, f"{name}.csv")
    write_csv(csv_path, columns, rows, comments=[
        f"experiment={name}",
        f"config_hash={digest}",
        f"config={canonical_json(hashed_part(cfg))}",
    ])
    record = ResultRecord(name, cfg, digest, {"csv": csv_path},
                          time.perf_counter() - start, summary)
    json_path = os.path.join(out, f"{name}.json")
    record.files["record"] = json_path
    with open(json_path, "w") as fh:
        fh.write(record.to_json() + "\n")
    return record
