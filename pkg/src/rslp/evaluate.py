"""Monte-Carlo sweeps, latency and memory reports, CSV and plot-data output.

Every method is evaluated on the same test slots (channels and symbol
phases fixed by the sweep seed).  Failed samples (the interior-point solver
finds no strictly feasible start, or a network returns a non-finite
precoder) are left out of ``mean_power`` and counted in ``failures``;
``feasibility_rate`` is the fraction of all samples whose largest robust
constraint margin is at most ``FEASIBILITY_TOL``.
"""

import csv
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from rslp.channel import generate_channels, random_phases
from rslp.checkpoint import load_checkpoint
from rslp.engine import benchmark_inference, compile_model
from rslp.errors import ParameterError
from rslp.geometry import QPSK_HALF_ANGLE, SlotBatch
from rslp.ipm import solve_batch
from rslp.quant import memory_estimate

METHODS = ("ipm", "dnet_fp32", "dnet_binary", "dnet_ternary")
FEASIBILITY_TOL = 1e-3
DEFAULT_SNR = tuple(float(x) for x in range(0, 40, 5))
DEFAULT_BOUNDS = (0.0, 1e-5, 1e-4, 1e-3)


@dataclass(frozen=True)
class SweepSpec:
    """Axes and test set of an evaluation run.

    ``error_bounds`` are squared bounds (delta^2).  The SINR sweep runs at
    ``fixed_delta_sq``, the error-bound sweep at ``fixed_snr_db``.
    ``models`` maps a ``dnet_*`` method to a checkpoint path.
    """

    snr_points: tuple = DEFAULT_SNR
    error_bounds: tuple = DEFAULT_BOUNDS
    methods: tuple = ("ipm",)
    samples: int = 2000
    seed: int = 0
    antennas: int = 4
    users: int = 4
    fixed_snr_db: float = 30.0
    fixed_delta_sq: float = 2e-4
    phi: float = QPSK_HALF_ANGLE
    models: dict = field(default_factory=dict)
    warmup: int = 10
    runs: int = 15

    def __post_init__(self):
        object.__setattr__(self, "snr_points", tuple(float(x) for x in self.snr_points))
        object.__setattr__(self, "error_bounds", tuple(float(x) for x in self.error_bounds))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.snr_points or not self.error_bounds or not self.methods:
            raise ParameterError("snr_points, error_bounds and methods must be nonempty")
        if self.samples < 1:
            raise ParameterError("samples must be >= 1")
        if any(d < 0 for d in self.error_bounds) or self.fixed_delta_sq < 0:
            raise ParameterError("error bounds must be >= 0")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ParameterError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        missing = [m for m in self.methods if m != "ipm" and m not in self.models]
        if missing:
            raise ParameterError(f"no model file given for {missing}")

    @classmethod
    def from_dict(cls, data, base=None):
        """Build from a mapping (e.g. parsed TOML); model paths are taken
        relative to ``base``."""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown sweep keys {sorted(unknown)}")
        data = dict(data)
        base = Path(base) if base is not None else Path(".")
        data["models"] = {k: str(base / v) for k, v in data.get("models", {}).items()}
        return cls(**data)

    def test_set(self):
        """Channels (N, K, M) and phases (N, K) shared by every method."""
        H = generate_channels(self.antennas, self.users, self.samples, self.seed).samples
        phases = random_phases(self.samples, self.users, np.random.default_rng(self.seed + 1))
        return H, phases


@dataclass(frozen=True)
class ResultRow:
    method: str
    snr_db: float
    delta_sq: float
    mean_power: float
    feasibility_rate: float
    mean_time_us: float
    sample_count: int
    failures: int
    g1_max: float
    g2_max: float


def load_models(spec):
    """Checkpoints named in ``spec.models`` (a missing file raises OSError)."""
    return {m: load_checkpoint(spec.models[m]) for m in spec.methods if m != "ipm"}


def _summarize(method, snr_db, delta_sq, batch, w, ok, seconds):
    S = len(batch)
    margins = batch.margins(np.where(ok[:, None], w, 0.0))
    worst = margins.reshape(S, -1).max(axis=1)
    feasible = ok & (worst <= FEASIBILITY_TOL)
    power = np.einsum("sn,sn->s", w[ok], w[ok])
    g = margins[ok]
    return ResultRow(
        method=method,
        snr_db=float(snr_db),
        delta_sq=float(delta_sq),
        mean_power=float(power.mean()) if power.size else float("nan"),
        feasibility_rate=float(feasible.mean()),
        mean_time_us=seconds / S * 1e6,
        sample_count=S,
        failures=int(S - ok.sum()),
        g1_max=float(g[..., 0].max()) if g.size else float("nan"),
        g2_max=float(g[..., 1].max()) if g.size else float("nan"),
    )


def evaluate_point(method, H, phases, snr_db, delta_sq, model=None, phi=QPSK_HALF_ANGLE):
    """One ResultRow: ``method`` on the test slots at one (SINR, delta^2) point."""
    if method == "ipm":
        batch = SlotBatch.from_channels(H, phases, snr_db, np.sqrt(delta_sq), phi)
        t0 = time.perf_counter()
        sol = solve_batch(batch)
        seconds = time.perf_counter() - t0
        w = np.where(sol.ok[:, None], sol.w, 0.0)
        return _summarize(method, snr_db, delta_sq, batch, w, sol.ok, seconds)
    batch = SlotBatch.from_channels(H, phases, snr_db, np.sqrt(delta_sq), model.phi, model.n0)
    compiled = compile_model(model)
    compiled.run(batch.subset(slice(0, 1)))  # keep compilation out of the timing
    t0 = time.perf_counter()
    w, _ = compiled.run(batch)
    seconds = time.perf_counter() - t0
    ok = np.all(np.isfinite(w), axis=1)
    return _summarize(method, snr_db, delta_sq, batch, np.where(ok[:, None], w, 0.0), ok, seconds)


def _sweep(spec, models, points):
    H, phases = spec.test_set()
    rows = []
    for snr_db, delta_sq in points:
        for method in spec.methods:
            rows.append(evaluate_point(method, H, phases, snr_db, delta_sq, models.get(method), spec.phi))
    return rows


def sweep_power_vs_sinr(spec, models=None):
    """Rows for every (SINR point, method) at ``spec.fixed_delta_sq``."""
    models = load_models(spec) if models is None else models
    return _sweep(spec, models, [(x, spec.fixed_delta_sq) for x in spec.snr_points])


def sweep_power_vs_errorbound(spec, models=None):
    """Rows for every (delta^2, method) at ``spec.fixed_snr_db``."""
    models = load_models(spec) if models is None else models
    return _sweep(spec, models, [(spec.fixed_snr_db, d) for d in spec.error_bounds])


def timing_table(spec, models):
    """Per-sample engine latency of the network models on the test slots."""
    if not models:
        return []
    H, phases = spec.test_set()
    any_model = next(iter(models.values()))
    batch = SlotBatch.from_channels(
        H, phases, spec.fixed_snr_db, np.sqrt(spec.fixed_delta_sq), any_model.phi, any_model.n0
    )
    return benchmark_inference(models, batch, spec.warmup, spec.runs)


@dataclass(frozen=True)
class MemoryRow:
    method: str
    fp_params: int
    binary_params: int
    megabytes: float
    ratio_vs_fp32: float


def memory_table(models):
    rows = []
    for name, model in models.items():
        rep = memory_estimate(model)
        rows.append(MemoryRow(name, rep.fp_params, rep.binary_params, rep.megabytes, rep.ratio_vs_fp32))
    return rows


def write_csv(rows, path):
    """Write dataclass rows (header from the first row's fields)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        if not rows:
            return path
        writer = csv.DictWriter(fh, fieldnames=list(asdict(rows[0])))
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))
    return path


def write_plot_data(rows, out_dir, prefix, x):
    """One two-column ``<prefix>_<method>.dat`` file (x, mean power) per method."""
    out_dir = Path(out_dir)
    paths = []
    for method in dict.fromkeys(r.method for r in rows):
        path = out_dir / f"{prefix}_{method}.dat"
        lines = [f"# {x} mean_power_w"]
        lines += [f"{getattr(r, x):.10g} {r.mean_power:.10g}" for r in rows if r.method == method]
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    return paths


def write_plot_data_timing(rows, out_dir):
    """``timing.dat``: method index, median latency (us), method name."""
    path = Path(out_dir) / "timing.dat"
    lines = ["# index median_us method"]
    lines += [f"{i} {r.median_us:.6g} {r.method}" for i, r in enumerate(rows)]
    path.write_text("\n".join(lines) + "\n")
    return path


def run_evaluation(spec, out_dir, models=None):
    """Run both sweeps, the latency benchmark and the memory report into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    models = load_models(spec) if models is None else models
    sinr = sweep_power_vs_sinr(spec, models)
    bound = sweep_power_vs_errorbound(spec, models)
    write_csv(sinr, out_dir / "power_vs_sinr.csv")
    write_csv(bound, out_dir / "power_vs_bound.csv")
    write_plot_data(sinr, out_dir, "power_vs_sinr", "snr_db")
    write_plot_data(bound, out_dir, "power_vs_bound", "delta_sq")
    timing = timing_table(spec, models)
    write_csv(timing, out_dir / "timing.csv")
    write_plot_data_timing(timing, out_dir)
    memory = memory_table(models)
    write_csv(memory, out_dir / "memory.csv")
    return {"power_vs_sinr": sinr, "power_vs_bound": bound, "timing": timing, "memory": memory}
