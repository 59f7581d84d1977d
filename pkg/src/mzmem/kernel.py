"""Memory-kernel estimation by directional finite differences.

For a resolved snapshot ``xhat`` the kernel at lag ``s`` is estimated as
``|R(xhat)| * F_j(xhat + eps * R(xhat)/|R(xhat)|, s) / eps`` where ``F`` is
the RHS of the pseudo orthogonal ODE; the unperturbed term vanishes
because a resolved state is a fixed point of that ODE.

Row ``n`` of a table holds the kernel at snapshot ``t_n`` for lags
``0, dt, ..., H_n dt``. Rows are marched in fixed-size chunks so the
result does not depend on how many workers share the chunks.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .integrators import DivergenceError, StepCounter, StepperConfig
from .orthodyn import march_pseudo

__all__ = [
    "DegenerateDirectionError",
    "HorizonPolicy",
    "PerturbedIC",
    "KernelTable",
    "perturbed_ic",
    "kernel_row",
    "row_lag_counts",
    "build_kernel_table",
]

log = logging.getLogger(__name__)

# tables with more stored values than this keep only the streamed statistics
KEEP_ROWS_LIMIT = 4_000_000


class DegenerateDirectionError(ValueError):
    """The snapshot is an equilibrium: ``R(xhat) = 0`` gives no direction."""


@dataclass(frozen=True)
class HorizonPolicy:
    kind: str = "full"
    tau: float | None = None

    def __post_init__(self):
        if self.kind not in ("full", "truncated"):
            raise ValueError(f"unknown horizon policy {self.kind!r}")
        if self.kind == "truncated" and (self.tau is None or self.tau < 0):
            raise ValueError("truncated policy needs tau >= 0")

    @classmethod
    def parse(cls, text):
        if isinstance(text, HorizonPolicy):
            return text
        text = str(text).strip()
        if text == "full":
            return cls()
        kind, _, tau = text.partition(":")
        if kind != "truncated" or not tau:
            raise ValueError(f"cannot parse policy {text!r}; use 'full' or 'truncated:<tau>'")
        return cls("truncated", float(tau))

    def __str__(self):
        return "full" if self.kind == "full" else f"truncated:{self.tau!r}"


def row_lag_counts(n_t, dt, policy=HorizonPolicy()):
    """Steps ``H_n`` for rows ``n = 1..n_t``; row ``n`` has ``H_n + 1`` lags."""
    full = n_t - np.arange(1, n_t + 1)
    if policy.kind == "full":
        return full
    cap = int(math.floor(policy.tau / dt + 1e-9))
    return np.minimum(full, cap)


@dataclass
class PerturbedIC:
    base: np.ndarray
    direction: np.ndarray
    epsilon: float
    norm_R: float

    @property
    def x0(self):
        return self.base + self.epsilon * self.direction


def _embed(system, snapshot):
    snapshot = np.asarray(snapshot, dtype=system.dtype)
    width = snapshot.shape[-1]
    if width == system.N:
        return system.truncate(snapshot)
    if width == system.m:
        out = np.zeros(snapshot.shape[:-1] + (system.N,), dtype=system.dtype)
        out[..., : system.m] = snapshot
        return out
    raise ValueError(f"snapshot width {width} matches neither m={system.m} nor N={system.N}")


def _norms(values):
    # Euclidean norm over the real embedding
    return np.sqrt(np.sum(np.abs(values) ** 2, axis=-1))


def perturbed_ic(system, snapshot, epsilon):
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    base = _embed(system, snapshot)
    r = system.rhs(base)
    norm_r = float(_norms(r))
    if norm_r == 0.0:
        raise DegenerateDirectionError("R(xhat) = 0; the sensitivity direction is undefined")
    return PerturbedIC(base, r / norm_r, float(epsilon), norm_r)


def _perturbed_stack(system, bases, epsilon):
    r = system.rhs(bases)
    norm_r = _norms(r)
    degenerate = norm_r == 0.0
    safe = np.where(degenerate, 1.0, norm_r)
    x0 = bases + epsilon * (r / safe[:, None])
    x0[degenerate] = bases[degenerate]
    return x0, np.where(degenerate, 0.0, norm_r), degenerate


def kernel_row(system, snapshot, horizon, epsilon, cfg: StepperConfig):
    """Kernel values ``K_j(xhat, s)`` for ``s = 0, dt, ..., horizon``; shape ``(H + 1, m)``."""
    n = int(round(horizon / cfg.dt))
    if n < 0 or abs(n * cfg.dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon={horizon} is not a non-negative multiple of dt={cfg.dt}")
    pic = perturbed_ic(system, snapshot, epsilon)
    out = np.empty((n + 1, system.m), dtype=system.dtype)
    scale = pic.norm_R / pic.epsilon

    def keep(s, n_active, F):
        out[s] = scale * F[0, : system.m]

    _, failures = march_pseudo(system, pic.x0[None, :], [n], cfg, keep)
    if failures:
        step = failures[0]
        raise DivergenceError(f"kernel row diverged at lag index {step}", step=step, time=step * cfg.dt)
    return out


@dataclass
class KernelTable:
    """Triangular kernel estimates plus statistics streamed while building them.

    ``memory_sum[i]`` is ``sum_k K(t_k, t_{i+1} - t_k)`` over rows ``k <= i + 1``;
    ``abs_sum[l]`` and ``abs_count[l]`` accumulate ``|K|`` at lag index ``l``
    over all rows holding that lag. ``rows`` (row ``n`` at position ``n - 1``)
    is kept only for small tables.
    """

    dt: float
    epsilon: float
    policy: HorizonPolicy
    n_lags: np.ndarray
    memory_sum: np.ndarray
    abs_sum: np.ndarray
    abs_count: np.ndarray
    rows: list | None = None
    snapshots: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    degenerate: list = field(default_factory=list)
    counter: StepCounter = field(default_factory=StepCounter)

    @property
    def n_t(self):
        return len(self.n_lags)

    @property
    def m(self):
        return self.memory_sum.shape[1]

    @property
    def lag_counts(self):
        return [int(h) + 1 for h in self.n_lags]

    @property
    def total_entries(self):
        return int(np.sum(self.n_lags + 1))

    @property
    def partial(self):
        return bool(self.failures)

    @classmethod
    def from_rows(cls, rows, dt, epsilon=1e-8, policy=HorizonPolicy(), snapshot_indices=()):
        """Assemble a table from explicit rows (row ``n`` is ``rows[n - 1]``, shape ``(H_n + 1, m)``)."""
        rows = [np.asarray(r) if np.ndim(r) == 2 else np.asarray(r).reshape(-1, 1) for r in rows]
        n_t = len(rows)
        m = rows[0].shape[1]
        dtype = np.result_type(*rows)
        n_lags = np.array([len(r) - 1 for r in rows])
        n_l = int(n_lags.max()) + 1
        acc = _Accumulator(n_t, m, n_l, dtype, snapshot_indices)
        for n, r in enumerate(rows, start=1):
            acc.add_row(n, r)
        return cls(dt, epsilon, HorizonPolicy.parse(policy), n_lags, acc.memory_sum, acc.abs_sum,
                   acc.abs_count, rows=rows, snapshots=acc.snapshots)


class _Accumulator:
    def __init__(self, n_t, m, n_l, dtype, snapshot_indices):
        self.memory_sum = np.zeros((n_t, m), dtype=dtype)
        self.abs_sum = np.zeros((n_l, m))
        self.abs_count = np.zeros(n_l, dtype=np.int64)
        self.snapshots = {int(i): np.zeros((int(i), m), dtype=dtype) for i in snapshot_indices}

    def add_row(self, n, row):
        h = len(row)
        self.memory_sum[n - 1 : n - 1 + h] += row
        self.abs_sum[:h] += np.abs(row)
        self.abs_count[:h] += 1
        for t_idx, snap in self.snapshots.items():
            lag = t_idx - n
            if 0 <= lag < h:
                snap[n - 1] = row[lag]

    def add_step(self, s, first_row, K):
        # K[b] is row first_row + b at lag index s
        na = K.shape[0]
        start = first_row - 1 + s
        self.memory_sum[start : start + na] += K
        self.abs_sum[s] += np.abs(K).sum(axis=0)
        self.abs_count[s] += na
        for t_idx, snap in self.snapshots.items():
            b = t_idx - s - first_row
            if 0 <= b < na:
                snap[first_row + b - 1] = K[b]


@dataclass
class _ChunkResult:
    acc: _Accumulator
    counter: StepCounter
    failures: dict
    degenerate: list
    rows: list | None


def _run_chunk(system, bases, first_row, n_lags, n_t, n_l, epsilon, cfg, snapshot_indices, keep_rows):
    m = system.m
    x0, norm_r, degenerate = _perturbed_stack(system, bases, epsilon)
    scale = (norm_r / epsilon)[:, None]
    acc = _Accumulator(n_t, m, n_l, system.dtype, snapshot_indices)
    rows = [np.empty((h + 1, m), dtype=system.dtype) for h in n_lags] if keep_rows else None

    def on_step(s, n_active, F):
        K = F[:, :m] * scale[:n_active]
        acc.add_step(s, first_row, K)
        if rows is not None:
            for b in range(n_active):
                rows[b][s] = K[b]

    counter, fails = march_pseudo(system, x0, n_lags, cfg, on_step)
    failures = {first_row + b: step for b, step in fails.items()}
    degenerate_rows = [first_row + int(b) for b in np.flatnonzero(degenerate)]
    return _ChunkResult(acc, counter, failures, degenerate_rows, rows)


def _run_chunk_args(args):
    return _run_chunk(*args)


def build_kernel_table(system, resolved_traj, epsilon=1e-8, policy=HorizonPolicy(), cfg=None,
                       workers=1, row_chunk=128, snapshot_indices=(), keep_rows=None):
    """Estimate every kernel row needed to rebuild the memory at ``t_1..t_{N_t}``.

    ``resolved_traj`` holds snapshots at ``t_0..t_{N_t}`` (width ``m`` or ``N``);
    row ``n`` starts from ``states[n]``. Failed rows are recorded in
    ``table.failures`` instead of raising.
    """
    policy = HorizonPolicy.parse(policy)
    cfg = cfg or StepperConfig(dt=resolved_traj.dt)
    if abs(cfg.dt - resolved_traj.dt) > 1e-12 * cfg.dt:
        raise ValueError("stepper dt must equal the trajectory step")
    n_t = resolved_traj.n_steps
    if n_t < 1:
        raise ValueError("trajectory needs at least one step")
    bases = _embed(system, resolved_traj.states[1:])
    n_lags = row_lag_counts(n_t, cfg.dt, policy)
    n_l = int(n_lags.max()) + 1
    if keep_rows is None:
        keep_rows = int(np.sum(n_lags + 1)) * system.m <= KEEP_ROWS_LIMIT
    snapshot_indices = tuple(sorted({int(i) for i in snapshot_indices if 1 <= int(i) <= n_t}))

    jobs = []
    for start in range(0, n_t, row_chunk):
        stop = min(start + row_chunk, n_t)
        jobs.append((system, bases[start:stop], start + 1, n_lags[start:stop], n_t, n_l, epsilon,
                     cfg, snapshot_indices, keep_rows))
    log.info("kernel table: %d rows, %d kernel evaluations, %d chunks, %d workers",
             n_t, int(np.sum(n_lags + 1)), len(jobs), workers)

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk_args, jobs))
    else:
        results = [_run_chunk_args(job) for job in jobs]

    acc = _Accumulator(n_t, system.m, n_l, system.dtype, snapshot_indices)
    counter = StepCounter()
    failures, degenerate, rows = {}, [], [] if keep_rows else None
    for res in results:
        acc.memory_sum += res.acc.memory_sum
        acc.abs_sum += res.acc.abs_sum
        acc.abs_count += res.acc.abs_count
        for t_idx, snap in res.acc.snapshots.items():
            acc.snapshots[t_idx] += snap
        counter = counter.merge(res.counter)
        failures.update(res.failures)
        degenerate.extend(res.degenerate)
        if rows is not None:
            rows.extend(res.rows)
    if failures:
        log.warning("kernel table partial: %d rows diverged", len(failures))
    if degenerate:
        log.warning("%d rows had R(xhat) = 0 and were set to zero", len(degenerate))
    return KernelTable(cfg.dt, float(epsilon), policy, n_lags, acc.memory_sum, acc.abs_sum,
                       acc.abs_count, rows=rows, snapshots=acc.snapshots, failures=failures,
                       degenerate=degenerate, counter=counter)
