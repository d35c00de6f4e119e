"""Wall-clock scaling benchmarks for the linear, quadratic and softmax forms."""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
import time
import warnings
from dataclasses import asdict, dataclass, fields
from typing import Callable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .caf import CafConfig, caf_linear, caf_reference, multi_head, softmax_attention
from .numeric import ConfigError, KernelKind, rng_from_seed

__all__ = [
    "METHODS",
    "BenchRecord",
    "SlopeSummary",
    "time_call",
    "fit_loglog_slope",
    "run_bench",
    "write_csv",
    "read_csv",
    "write_json",
    "read_json",
    "quadratic_bytes",
    "MEMORY_BUDGET",
]

METHODS: dict[str, Callable] = {
    "linear": caf_linear,
    "quadratic": caf_reference,
    "softmax-baseline": softmax_attention,
}
_ALIASES = {"softmax": "softmax-baseline", "reference": "quadratic"}
_QUADRATIC = {"quadratic", "softmax-baseline"}

MEMORY_BUDGET = 2 * 1024**3


def canonical_method(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in METHODS:
        raise ConfigError(f"unknown method {name!r}; expected one of {', '.join(METHODS)}")
    return name


@dataclass
class BenchRecord:
    method: str
    n_keys: int
    n_queries: int
    dim: int
    heads: int
    repeats: int
    median_wall_time: float | None
    checksum: float | None
    status: str = "ok"


@dataclass
class SlopeSummary:
    method: str
    slope: float
    n_points: int


FIELDS = [f.name for f in fields(BenchRecord)]


def quadratic_bytes(n_queries: int, n_keys: int) -> int:
    return 8 * n_queries * n_keys


def time_call(fn: Callable[[], np.ndarray], repeats: int = 5, warmup: int = 1):
    """Median wall time of ``fn`` over ``repeats`` calls after ``warmup`` discarded calls.

    Returns ``(median_seconds, result_of_last_call)``.
    """
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    out = None
    for _ in range(warmup):
        out = fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def fit_loglog_slope(ns: Sequence[float], times: Sequence[float]) -> float:
    """Least-squares slope of ``log t`` against ``log n``."""
    if len(ns) < 2:
        raise ValueError("need at least two points to fit a slope")
    slope, _ = np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(times, float)), 1)
    return float(slope)


def _projections(dim: int, seed: int) -> list[np.ndarray]:
    rng = rng_from_seed(seed)
    return [rng.standard_normal((dim, dim)) / math.sqrt(dim) for _ in range(3)]


def run_bench(
    seq_lens: Sequence[int],
    dim: int = 64,
    heads: int = 8,
    methods: Sequence[str] = ("linear", "quadratic", "softmax-baseline"),
    kernel: KernelKind | str = KernelKind.IDENTITY,
    seed: int = 0,
    repeats: int = 5,
    n_queries: int | None = None,
    projection: bool = False,
    memory_budget: int = MEMORY_BUDGET,
) -> tuple[list[BenchRecord], list[SlopeSummary]]:
    """Time each method at each key count.

    Queries default to ``n_queries = N`` so that the quadratic forms see
    ``N x N`` weight matrices. Quadratic runs whose weight matrix would
    exceed ``memory_budget`` bytes are skipped and recorded with status
    ``"skipped-memory"``. Timings use a single BLAS thread.
    """
    if not seq_lens:
        raise ConfigError("seq_lens must be non-empty")
    if list(seq_lens) != sorted(seq_lens) or len(set(seq_lens)) != len(seq_lens):
        raise ConfigError("seq_lens must be strictly ascending")
    if repeats < 3:
        raise ConfigError("repeats must be >= 3")
    cfg = CafConfig(dim, heads, kernel)
    methods = [canonical_method(m) for m in methods]
    proj = _projections(dim, seed + 1) if projection else None

    records: list[BenchRecord] = []
    for n in seq_lens:
        nq = n if n_queries is None else n_queries
        rng = rng_from_seed(seed + n)
        Q = rng.standard_normal((nq, dim))
        K = rng.standard_normal((n, dim))
        V = rng.standard_normal((n, dim))
        if proj is not None:
            Q, K, V = Q @ proj[0], K @ proj[1], V @ proj[2]
        for m in methods:
            if m in _QUADRATIC and quadratic_bytes(nq, n) > memory_budget:
                warnings.warn(f"{m} at N={n} exceeds the memory budget; skipped", RuntimeWarning,
                              stacklevel=2)
                records.append(BenchRecord(m, n, nq, dim, heads, repeats, None, None,
                                           "skipped-memory"))
                continue
            fn = METHODS[m]
            with threadpool_limits(limits=1):
                t, out = time_call(lambda: multi_head(fn, Q, K, V, cfg), repeats)
            records.append(BenchRecord(m, n, nq, dim, heads, repeats, t, float(out.sum())))
    return records, summarize_slopes(records)


def summarize_slopes(records: Sequence[BenchRecord]) -> list[SlopeSummary]:
    out = []
    for m in METHODS:
        pts = [(r.n_keys, r.median_wall_time) for r in records
               if r.method == m and r.status == "ok"]
        if len(pts) >= 2:
            ns, ts = zip(*pts)
            out.append(SlopeSummary(m, fit_loglog_slope(ns, ts), len(pts)))
    return out


# --- serialisation --------------------------------------------------------
# Floats are written with repr() so that parsing gives back the same value.

def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def write_csv(records: Sequence[BenchRecord], slopes: Sequence[SlopeSummary] = ()) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELDS)
    for r in records:
        w.writerow([_fmt(getattr(r, f)) for f in FIELDS])
    for s in slopes:
        buf.write(f"# slope,{s.method},{s.slope!r},{s.n_points}\n")
    return buf.getvalue()


def read_csv(text: str) -> tuple[list[BenchRecord], list[SlopeSummary]]:
    records, slopes = [], []
    data_lines = []
    for line in text.splitlines():
        if line.startswith("# slope,"):
            _, method, slope, n = line.split(",")
            slopes.append(SlopeSummary(method, float(slope), int(n)))
        elif line:
            data_lines.append(line)
    reader = csv.DictReader(data_lines)
    if reader.fieldnames != FIELDS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    for row in reader:
        records.append(BenchRecord(
            method=row["method"],
            n_keys=int(row["n_keys"]),
            n_queries=int(row["n_queries"]),
            dim=int(row["dim"]),
            heads=int(row["heads"]),
            repeats=int(row["repeats"]),
            median_wall_time=float(row["median_wall_time"]) if row["median_wall_time"] else None,
            checksum=float(row["checksum"]) if row["checksum"] else None,
            status=row["status"],
        ))
    return records, slopes


def write_json(records: Sequence[BenchRecord], slopes: Sequence[SlopeSummary] = ()) -> str:
    doc = {
        "records": [{f: getattr(r, f) for f in FIELDS} for r in records],
        "slopes": [asdict(s) for s in slopes],
    }
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def read_json(text: str) -> tuple[list[BenchRecord], list[SlopeSummary]]:
    doc = json.loads(text)
    records = [BenchRecord(**{f: r[f] for f in FIELDS}) for r in doc["records"]]
    slopes = [SlopeSummary(**s) for s in doc["slopes"]]
    return records, slopes
