"""Multi-run experiments, trace averaging and CSV export."""

import csv
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from rkm import rng as rng_mod
from rkm.analysis import BandErrorRecord
from rkm.errors import ConfigError
from rkm.linalg import band_slices
from rkm.problems import KINDS, add_noise, make_circle, make_problem, random_solution
from rkm.solvers import METHODS, StoppingRule, run_batch

CSV_HEADER = ("k", "cost_units", "e_total", "e_low", "e_high", "residual_sq")
PROBLEMS = (*KINDS, "circle")


@dataclass
class ExperimentConfig:
    problem: str = "phillips"
    n: int = 200
    delta: float = 0.0
    method: str = "rkm"
    iters: int = 2000
    runs: int = 100
    seed: int = 0
    level: int | None = None
    bands: tuple | None = None
    epoch: int | None = None
    tau: float = 1.1
    stride: int | None = None
    dp: bool = False
    solution: str = "smooth"
    x0: tuple | None = None
    out: str | None = None

    def __post_init__(self):
        if self.bands is not None:
            self.bands = tuple(int(b) for b in self.bands)
        if self.x0 is not None:
            self.x0 = tuple(float(v) for v in self.x0)

    @classmethod
    def from_mapping(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}", field=unknown[0])
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict) or any(isinstance(v, dict) for v in data.values()):
            raise ConfigError("config file must be a flat JSON object", field="config")
        return cls.from_mapping(data)

    def to_dict(self):
        return asdict(self)

    def effective_level(self, m):
        """Truncation level; defaults to 5, capped at ``m``."""
        return min(5, m) if self.level is None else self.level

    @property
    def effective_epoch(self):
        return self.n if self.epoch is None else self.epoch

    @property
    def effective_stride(self):
        return max(1, self.iters // 2000) if self.stride is None else self.stride

    @property
    def effective_runs(self):
        return 1 if self.method in ("km", "lm") else self.runs

    def validate(self, m=None):
        def bad(name, why):
            raise ConfigError(f"invalid {name}: {why}", field=name)

        if self.problem not in PROBLEMS:
            bad("problem", f"{self.problem!r} not in {PROBLEMS}")
        if self.method not in METHODS:
            bad("method", f"{self.method!r} not in {METHODS}")
        if self.problem == "circle" and self.n < 3:
            bad("n", "circle needs n >= 3")
        if self.problem != "circle" and self.n < 10:
            bad("n", "test problems need n >= 10")
        if not self.delta >= 0:
            bad("delta", "must be >= 0")
        if self.iters < 1:
            bad("iters", "must be >= 1")
        if self.runs < 1:
            bad("runs", "must be >= 1")
        if self.seed < 0:
            bad("seed", "must be >= 0")
        if self.epoch is not None and self.epoch < 1:
            bad("epoch", "must be >= 1")
        if self.stride is not None and self.stride < 1:
            bad("stride", "must be >= 1")
        if not self.tau > 1:
            bad("tau", "must exceed 1")
        if self.solution not in ("smooth", "random"):
            bad("solution", "must be 'smooth' or 'random'")
        m = m if m is not None else (2 if self.problem == "circle" else self.n)
        if not 1 <= self.effective_level(m) <= m:
            bad("level", f"must lie in [1, {m}]")
        if self.bands is not None:
            band_slices(self.bands, m)
        if self.x0 is not None and len(self.x0) != m:
            bad("x0", f"needs {m} entries")


def build_system(config):
    """Problem instance and its noisy data for ``config``.

    The noise (and a random solution, if requested) depends only on
    ``(problem, n, delta, seed)``, so different methods see identical data.
    """
    if config.problem == "circle":
        system = make_circle(config.n)
    else:
        system = make_problem(config.problem, config.n)
    if config.solution == "random":
        x = random_solution(system.m, rng_mod.make_rng(config.seed, rng_mod.SOLUTION))
        system = system.with_solution(x, name=f"{system.name}-random")
    noise = add_noise(system.b, config.delta, rng_mod.make_rng(config.seed, rng_mod.NOISE))
    return system, noise


@dataclass
class RunTrace:
    """Recorded band errors of one run (or of the run average)."""

    k: np.ndarray
    cost_units: np.ndarray
    e_total: np.ndarray
    e_low: np.ndarray
    e_high: np.ndarray
    residual_sq: np.ndarray
    bands: np.ndarray | None = None
    stop_iteration: int | None = None
    stop_reason: str = "cap"
    stop_cost: float | None = None

    def __len__(self):
        return len(self.k)

    @property
    def records(self):
        out = []
        for j in range(len(self.k)):
            out.append(
                BandErrorRecord(
                    k=int(self.k[j]),
                    e_low=float(self.e_low[j]),
                    e_high=float(self.e_high[j]),
                    e_total=float(self.e_total[j]),
                    residual_sq=float(self.residual_sq[j]),
                    bands=None if self.bands is None else tuple(self.bands[j]),
                )
            )
        return out

    @classmethod
    def empty(cls):
        z = np.zeros(0)
        return cls(np.zeros(0, dtype=np.int64), z, z, z, z, z)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    mean: RunTrace
    runs: list = field(default_factory=list)
    delta_abs: float = 0.0

    @property
    def stop_costs(self):
        return np.array([r.stop_cost for r in self.runs])


class _Recorder:
    def __init__(self, system, b_used, level, slices):
        self.A = system.A
        self.x_true = system.x_true
        self.V = system.basis.V
        self.b_used = b_used
        self.level = level
        self.slices = slices
        self.rows = []

    def __call__(self, k, X, cost):
        D = X - self.x_true
        C2 = (D @ self.V) ** 2
        R = X @ self.A.T - self.b_used
        entry = {
            "k": k,
            "cost": cost,
            "e_total": np.einsum("rj,rj->r", D, D),
            "e_low": C2[:, : self.level].sum(axis=1),
            "e_high": C2[:, self.level :].sum(axis=1),
            "residual_sq": np.einsum("ri,ri->r", R, R),
        }
        if self.slices is not None:
            entry["bands"] = np.stack([C2[:, sl].sum(axis=1) for sl in self.slices], axis=1)
        self.rows.append(entry)


def _trace_for(rows, r, stop):
    def col(name):
        return np.array([row[name][r] for row in rows])

    return RunTrace(
        k=np.array([row["k"] for row in rows], dtype=np.int64),
        cost_units=col("cost"),
        e_total=col("e_total"),
        e_low=col("e_low"),
        e_high=col("e_high"),
        residual_sq=col("residual_sq"),
        bands=col("bands") if "bands" in rows[0] else None,
        **stop,
    )


def average_traces(traces):
    """Arithmetic mean of run traces, accumulated in ascending run order."""
    if not traces:
        raise ValueError("no traces to average")
    first = traces[0]
    names = ("cost_units", "e_total", "e_low", "e_high", "residual_sq")
    acc = {name: np.array(getattr(first, name), dtype=float) for name in names}
    bands = None if first.bands is None else np.array(first.bands, dtype=float)
    for tr in traces[1:]:
        if not np.array_equal(tr.k, first.k):
            raise ValueError("traces are recorded on different iteration grids")
        for name in names:
            acc[name] += getattr(tr, name)
        if bands is not None:
            bands += tr.bands
    R = len(traces)
    return RunTrace(
        k=first.k.copy(),
        bands=None if bands is None else bands / R,
        stop_iteration=None,
        stop_reason="mean",
        **{name: value / R for name, value in acc.items()},
    )


def run_experiment(config, keep_runs=True):
    """Run ``config`` and return the averaged trace plus the per-run traces.

    Run ``j`` samples rows from the stream ``(seed, RUNS, j)``; the noise
    realization is shared by all runs. KM and LM are deterministic and always
    produce a single run.
    """
    config.validate()
    system, noise = build_system(config)
    config.validate(m=system.m)
    R = config.effective_runs
    x0 = np.zeros(system.m) if config.x0 is None else np.asarray(config.x0, dtype=float)
    rngs = None
    if config.method in ("rkm", "rkmvr"):
        rngs = [rng_mod.make_rng(config.seed, rng_mod.RUNS, j) for j in range(R)]
    rule = StoppingRule(config.tau, noise.delta_abs) if config.dp else None
    slices = band_slices(config.bands, system.m) if config.bands else None
    recorder = _Recorder(system, noise.b_delta, config.effective_level(system.m), slices)
    result = run_batch(
        config.method,
        system,
        noise.b_delta,
        x0,
        config.iters,
        rngs=rngs,
        epoch=config.effective_epoch,
        rule=rule,
        record=recorder,
        record_every=config.effective_stride,
    )
    traces = []
    for r in range(R):
        stop = {
            "stop_iteration": int(result.k[r]),
            "stop_reason": "discrepancy" if result.stopped[r] else "cap",
            "stop_cost": float(result.cost[r]),
        }
        traces.append(_trace_for(recorder.rows, r, stop))
    mean = average_traces(traces)
    return ExperimentResult(config=config, mean=mean, runs=traces if keep_runs else [], delta_abs=noise.delta_abs)


def _fmt(v):
    return f"{float(v):.17g}"


def export_csv(trace, path):
    """Write ``trace`` as CSV; extra band columns follow the fixed header."""
    path = Path(path)
    header = list(CSV_HEADER)
    nb = 0 if trace.bands is None else trace.bands.shape[1]
    header += [f"e_band{j + 1}" for j in range(nb)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for j in range(len(trace)):
            row = [
                str(int(trace.k[j])),
                _fmt(trace.cost_units[j]),
                _fmt(trace.e_total[j]),
                _fmt(trace.e_low[j]),
                _fmt(trace.e_high[j]),
                _fmt(trace.residual_sq[j]),
            ]
            row += [_fmt(v) for v in (trace.bands[j] if nb else ())]
            writer.writerow(row)
    return path


def read_csv(path):
    """Load a trace written by :func:`export_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if tuple(header[:6]) != CSV_HEADER:
        raise ValueError(f"unexpected header {header}")
    if not rows:
        return RunTrace.empty()
    cols = list(zip(*rows))
    band_cols = cols[6:]
    return RunTrace(
        k=np.array([int(v) for v in cols[0]], dtype=np.int64),
        cost_units=np.array([float(v) for v in cols[1]]),
        e_total=np.array([float(v) for v in cols[2]]),
        e_low=np.array([float(v) for v in cols[3]]),
        e_high=np.array([float(v) for v in cols[4]]),
        residual_sq=np.array([float(v) for v in cols[5]]),
        bands=np.array([[float(v) for v in c] for c in band_cols]).T if band_cols else None,
    )


def _sample_at_cost(trace, grid):
    """Index of the last record whose cost does not exceed each grid value."""
    idx = np.searchsorted(trace.cost_units, grid, side="right") - 1
    return np.clip(idx, 0, len(trace) - 1)


def compare(configs):
    """Run several configurations on a common problem and align them on cost.

    Returns ``(header, rows, results)``. The grid holds multiples of ``n``
    unit row operations up to the smallest final cost among the methods.
    """
    if not configs:
        raise ConfigError("compare needs at least one configuration", field="method")
    shared = ("problem", "n", "delta", "seed", "solution")
    ref = configs[0]
    for cfg in configs[1:]:
        for name in shared:
            if getattr(cfg, name) != getattr(ref, name):
                raise ConfigError(f"configurations differ in {name}", field=name)
    results = [run_experiment(cfg) for cfg in configs]
    labels = []
    for cfg in configs:
        label = cfg.method
        while label in labels:
            label += "'"
        labels.append(label)
    n = ref.n
    top = min(res.mean.cost_units[-1] for res in results)
    grid = np.arange(0, top + 0.5, n, dtype=float)
    header = ["cost_units"]
    for label in labels:
        header += [f"{label}_{col}" for col in ("k", "e_total", "e_low", "e_high", "residual_sq")]
    rows = []
    picks = [_sample_at_cost(res.mean, grid) for res in results]
    for g, c in enumerate(grid):
        row = [_fmt(c)]
        for res, idx in zip(results, picks):
            tr, j = res.mean, idx[g]
            row += [
                str(int(tr.k[j])),
                _fmt(tr.e_total[j]),
                _fmt(tr.e_low[j]),
                _fmt(tr.e_high[j]),
                _fmt(tr.residual_sq[j]),
            ]
        rows.append(row)
    return header, rows, results


def write_compare_csv(header, rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return Path(path)
