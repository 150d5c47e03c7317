"""Orbit simulation and frequency estimators for hitting and non-hitting events.

Every system is reduced to a per-time level l(n): the largest target index
l with T^n x in B_l (targets are nested, so T^n x lies in B_m exactly when
m <= l(n)). Then

* h[m] = 1 iff max_{n <= m} l(n) >= m            (O_m(x) meets B_m)
* x in E_{n,m} iff max_{i <= n} l(i) < m.

Levels per system:

* product: one uniform u_n per step, l(n) = #{l : u_n < mu(B_l)};
* bernoulli: z(n) = length of the zero block starting at coordinate n,
  l(n) = #{l : r_l <= z(n)};
* gauss: l(n) = #{l : k_l <= a_{n+1}(x)}, because T^n x <= 1/k iff a_{n+1} >= k.

Seeding: orbit ``i`` draws from ``Generator(PCG64(SeedSequence(seed,
spawn_key=(i,))))`` and nothing else, so results do not depend on how orbits
are split between workers. Orbits are processed in groups whose size depends
only on the horizon.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceeded, ConfigError
from .gauss import chain_digits, float_digits
from .product import levels_from_uniforms
from .schedules import Kind, TargetSchedule

log = logging.getLogger(__name__)

DEFAULT_CAP = 10**7
GROUP_ELEMENTS = 1 << 23
#: horizons above this use the digit chain instead of float iteration of T
GAUSS_ITERATION_LIMIT = 10**4
SYSTEMS = ("product", "bernoulli", "gauss")


def orbit_rng(seed: int, orbit: int) -> np.random.Generator:
    """The substream of orbit ``orbit`` under master seed ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(orbit,))))


# -- system resolution -----------------------------------------------------------------

@dataclass(frozen=True)
class SystemSpec:
    """A system with its target table resolved for m = 1..len(table).

    ``table`` holds mu(B_m) for product, r_m for bernoulli, k_m for gauss.
    """

    system: str
    table: np.ndarray
    gauss_method: str = "auto"

    def method_for(self, length: int) -> str:
        if self.system != "gauss":
            return "direct"
        if self.gauss_method != "auto":
            return self.gauss_method
        return "iterate" if length <= GAUSS_ITERATION_LIMIT else "chain"


def resolve_system(system: str, schedule: TargetSchedule, m_max: int, gauss_method: str = "auto") -> SystemSpec:
    if system not in SYSTEMS:
        raise ConfigError(f"unknown system {system!r}")
    if gauss_method not in ("auto", "iterate", "chain"):
        raise ConfigError(f"unknown gauss method {gauss_method!r}")
    if system == "product":
        table = schedule.measures(m_max)
        if np.any(np.diff(table) > 0):
            raise ConfigError("product targets must have non-increasing measure")
    elif system == "bernoulli":
        if schedule.kind is not Kind.BERNOULLI:
            raise ConfigError("bernoulli system needs a run-length schedule")
        table = schedule.params(m_max)
    else:
        if schedule.kind is not Kind.GAUSS:
            raise ConfigError("gauss system needs a digit schedule")
        table = schedule.params(m_max)
    return SystemSpec(system, np.asarray(table), gauss_method)


# -- per-orbit raw draws and levels ----------------------------------------------------------

def _forward_zero_runs(bits: np.ndarray) -> np.ndarray:
    """z[..., i] = number of consecutive zeros starting at i (truncated at the end)."""
    n = bits.shape[-1]
    idx = np.arange(n)
    next_one = np.where(bits != 0, idx, n)
    next_one = np.minimum.accumulate(next_one[..., ::-1], axis=-1)[..., ::-1]
    return next_one - idx


def _group_levels(spec: SystemSpec, rngs: list[np.random.Generator], length: int,
                  x0=None) -> tuple[np.ndarray, int]:
    """Levels l(1..length) for each orbit in the group; returns (levels, escapes)."""
    table = spec.table
    if spec.system == "product":
        u = np.stack([g.random(length) for g in rngs]) if x0 is None else np.atleast_2d(np.asarray(x0, float))[:, :length]
        return levels_from_uniforms(u, table).astype(np.int32), 0
    if spec.system == "bernoulli":
        extra = int(table[-1])
        need = length + extra
        if x0 is None:
            bits = np.stack([g.integers(0, 2, size=need, dtype=np.uint8) for g in rngs])
        else:
            bits = _pad_word(x0, need)
        # coordinate 0 is x[0]; T^n x starts at coordinate n
        z = _forward_zero_runs(bits)[:, 1:length + 1]
        return np.searchsorted(table, z, side="right").astype(np.int32), 0
    method = spec.method_for(length)
    steps = length + 1
    if method == "iterate":
        if x0 is None:
            x = np.array([2.0 ** g.random() - 1.0 for g in rngs])
        else:
            x = np.atleast_1d(np.asarray(x0, dtype=float))
        digits, escapes = float_digits(x, steps)
    else:
        if x0 is not None:
            raise ConfigError("the digit chain cannot start from a given point; use gauss method 'iterate'")
        y = np.array([2.0 ** g.random() - 1.0 for g in rngs])
        u = np.stack([g.random(steps) for g in rngs])
        digits, escapes = chain_digits(y, u)[0], 0
    return np.searchsorted(table, digits[:, 1:], side="right").astype(np.int32), escapes


def _pad_word(x0, need: int) -> np.ndarray:
    if isinstance(x0, str):
        w = np.frombuffer(x0.encode(), dtype=np.uint8) - ord("0")
    else:
        w = np.asarray(x0, dtype=np.uint8)
    if w.size < need:
        raise ConfigError(f"given word has {w.size} symbols, need {need}")
    return w[None, :need]


# -- hit records ----------------------------------------------------------------------------------

@dataclass
class OrbitHitRecord:
    horizon: int
    bits: np.ndarray
    escapes: int = 0

    @property
    def last_failure(self) -> int:
        fails = np.flatnonzero(~self.bits)
        return int(fails[-1]) + 1 if fails.size else 0

    def window_status(self, m0: int, m: int) -> bool:
        return bool(self.bits[m0 - 1:m].all())


def simulate_hit_record(
    system: str,
    schedule: TargetSchedule,
    M: int,
    rng: np.random.Generator | None = None,
    x0=None,
    cap: int = DEFAULT_CAP,
    gauss_method: str = "auto",
) -> OrbitHitRecord:
    """Hit record of one orbit: from ``x0`` if given (uniform draws for
    product, a 0/1 word with coordinate 0 first for bernoulli, a float for
    gauss), else a start drawn from the invariant measure with ``rng``."""
    if M > cap:
        raise CapExceeded(f"horizon {M} exceeds cap {cap}")
    if M < 1:
        raise ValueError("M must be >= 1")
    spec = resolve_system(system, schedule, M, gauss_method)
    rng = np.random.default_rng() if rng is None and x0 is None else rng
    levels, esc = _group_levels(spec, [rng], M, x0)
    best = np.maximum.accumulate(levels[0])
    return OrbitHitRecord(M, best >= np.arange(1, M + 1), esc)


# -- batched simulation -------------------------------------------------------------------------

@dataclass(frozen=True)
class Query:
    """What to extract from each orbit of length ``horizon``.

    windows: (M0, M) pairs; an orbit passes when h[m] = 1 for all m in [M0, M].
    shifted: also evaluate the windows on Tx.
    pairs: (n, m) pairs; records whether x lies in E_{n,m}.
    """

    horizon: int
    windows: tuple[tuple[int, int], ...] = ()
    shifted: bool = False
    pairs: tuple[tuple[int, int], ...] = ()
    fail_counts: bool = False
    #: if > 0, record per orbit the first m >= this value with h[m] = 0 (horizon + 1 if none)
    first_failure_from: int = 0


@dataclass
class BatchResult:
    window_pass: np.ndarray
    window_pass_shifted: np.ndarray
    nonhit: np.ndarray
    fail_counts: np.ndarray
    escapes: int
    first_failure: np.ndarray


def _run_group(spec: SystemSpec, query: Query, seed: int, start: int, stop: int) -> BatchResult:
    length = query.horizon + (1 if query.shifted else 0)
    rngs = [orbit_rng(seed, i) for i in range(start, stop)]
    levels, esc = _group_levels(spec, rngs, length)
    ms = np.arange(1, query.horizon + 1)
    best = np.maximum.accumulate(levels[:, : query.horizon], axis=1)
    fail = best < ms

    def windows(f):
        return np.stack([~f[:, a - 1:b].any(axis=1) for a, b in query.windows], axis=1) \
            if query.windows else np.zeros((f.shape[0], 0), bool)

    wp = windows(fail)
    if query.shifted:
        best_t = np.maximum.accumulate(levels[:, 1:], axis=1)
        wps = windows(best_t < ms)
    else:
        wps = np.zeros_like(wp)
    if query.pairs:
        nonhit = np.stack([best[:, n - 1] < m if n > 0 else np.ones(len(rngs), bool)
                           for n, m in query.pairs], axis=1)
    else:
        nonhit = np.zeros((len(rngs), 0), bool)
    counts = fail.sum(axis=0) if query.fail_counts else np.zeros(0, np.int64)
    if query.first_failure_from > 0:
        tail = fail[:, query.first_failure_from - 1:]
        first = np.where(tail.any(axis=1), tail.argmax(axis=1) + query.first_failure_from, query.horizon + 1)
    else:
        first = np.zeros(0, np.int64)
    return BatchResult(wp, wps, nonhit, counts, esc, first)


def _run_group_star(args):
    return _run_group(*args)


def resolve_workers(workers: int | None) -> int:
    env = os.environ.get("SHRINKLAB_WORKERS")
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise ConfigError(f"SHRINKLAB_WORKERS must be an integer, got {env!r}") from None
    workers = 1 if workers is None else workers
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    return workers


def run_batch(spec: SystemSpec, query: Query, samples: int, seed: int, workers: int | None = 1,
              cap: int = DEFAULT_CAP) -> BatchResult:
    length = query.horizon + (1 if query.shifted else 0)
    if length > cap:
        raise CapExceeded(f"horizon {length} exceeds cap {cap}")
    if len(spec.table) < query.horizon:
        raise ConfigError("target table shorter than the horizon")
    for n, m in query.pairs:
        if not (0 <= n <= query.horizon and 1 <= m <= len(spec.table)):
            raise ConfigError(f"pair (n={n}, m={m}) outside the simulated range")
    if query.first_failure_from > query.horizon:
        raise ConfigError("first_failure_from beyond the horizon")
    for a, b in query.windows:
        if not 1 <= a <= b <= query.horizon:
            raise ConfigError(f"window [{a}, {b}] outside [1, {query.horizon}]")
    group = max(1, GROUP_ELEMENTS // max(1, length))
    tasks = [(spec, query, seed, s, min(samples, s + group)) for s in range(0, samples, group)]
    workers = resolve_workers(workers)
    if workers == 1 or len(tasks) == 1:
        parts = [_run_group(*t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_group_star, tasks))
    return BatchResult(
        np.concatenate([p.window_pass for p in parts]),
        np.concatenate([p.window_pass_shifted for p in parts]),
        np.concatenate([p.nonhit for p in parts]),
        sum(p.fail_counts for p in parts) if query.fail_counts else np.zeros(0, np.int64),
        sum(p.escapes for p in parts),
        np.concatenate([p.first_failure for p in parts]),
    )


# -- estimators ------------------------------------------------------------------------------------

@dataclass
class EstimatorReport:
    estimate: float
    stderr: float
    samples: int
    seed: int
    system: str
    extras: dict = field(default_factory=dict)

    @classmethod
    def frequency(cls, hits: int, samples: int, seed: int, system: str, **extras) -> "EstimatorReport":
        p = hits / samples
        return cls(p, math.sqrt(p * (1.0 - p) / samples), samples, seed, system, dict(extras))

    def agrees_with(self, exact: float, n_se: float = 4.0) -> bool:
        """|estimate - exact| <= n_se standard errors, using the binomial
        standard error at the exact value so that p = 0 or 1 cells are not
        judged with a zero error bar."""
        se = math.sqrt(max(exact * (1.0 - exact), 0.0) / self.samples)
        return abs(self.estimate - exact) <= n_se * se + 1e-15


def _check_samples(S: int):
    if S < 100:
        raise ConfigError("at least 100 samples are required")


def estimate_nonhit(system: str, schedule: TargetSchedule, n: int, m: int, S: int, seed: int,
                    workers: int | None = 1, gauss_method: str = "auto") -> EstimatorReport:
    """Frequency of E_{n,m} over S starts drawn from the invariant measure."""
    _check_samples(S)
    if n == 0:
        return EstimatorReport(1.0, 0.0, S, seed, system, {"n": 0, "m": m})
    spec = resolve_system(system, schedule, m, gauss_method)
    # the table only has to reach m; the horizon has to reach n
    spec = _extend_table(spec, n)
    res = run_batch(spec, Query(horizon=n, pairs=((n, m),)), S, seed, workers)
    return EstimatorReport.frequency(int(res.nonhit.sum()), S, seed, system, n=n, m=m,
                                     escapes=res.escapes)


def _extend_table(spec: SystemSpec, horizon: int) -> SystemSpec:
    """Pad the table to the horizon with its last entry; padded indices are never queried."""
    if len(spec.table) >= horizon:
        return spec
    pad = np.full(horizon - len(spec.table), spec.table[-1], dtype=spec.table.dtype)
    return SystemSpec(spec.system, np.concatenate([spec.table, pad]), spec.gauss_method)


def estimate_nonhit_many(system: str, schedule: TargetSchedule, pairs, S: int, seed: int,
                         workers: int | None = 1, gauss_method: str = "auto") -> list[EstimatorReport]:
    """Several E_{n,m} frequencies from the same orbits."""
    _check_samples(S)
    pairs = tuple((int(n), int(m)) for n, m in pairs)
    horizon = max(max(n for n, _ in pairs), 1)
    spec = _extend_table(resolve_system(system, schedule, max(m for _, m in pairs), gauss_method), horizon)
    res = run_batch(spec, Query(horizon=horizon, pairs=pairs), S, seed, workers)
    return [EstimatorReport.frequency(int(res.nonhit[:, i].sum()), S, seed, system, n=n, m=m)
            for i, (n, m) in enumerate(pairs)]


def ea_fractions(system: str, schedule: TargetSchedule, windows, S: int, seed: int,
                 workers: int | None = 1, gauss_method: str = "auto") -> list[EstimatorReport]:
    """Windowed eventually-always fractions for several windows from one set of orbits.

    Each report carries ``union_lower_bound = 1 - sum_{m in window} freq(h[m] = 0)``
    and ``limsup_proxy``, the fraction of orbits with some failure in the window
    (the finite trace of limsup E_m).
    """
    _check_samples(S)
    windows = tuple((int(a), int(b)) for a, b in windows)
    for a, b in windows:
        if not 1 <= a <= b:
            raise ConfigError(f"bad window [{a}, {b}]")
    horizon = max(b for _, b in windows)
    spec = resolve_system(system, schedule, horizon, gauss_method)
    res = run_batch(spec, Query(horizon=horizon, windows=windows, fail_counts=True), S, seed, workers)
    out = []
    for i, (a, b) in enumerate(windows):
        passed = int(res.window_pass[:, i].sum())
        union = 1.0 - float(res.fail_counts[a - 1:b].sum()) / S
        rep = EstimatorReport.frequency(passed, S, seed, system, m0=a, m=b,
                                        union_lower_bound=union, limsup_proxy=1.0 - passed / S,
                                        escapes=res.escapes)
        out.append(rep)
    return out


def ea_fraction(system: str, schedule: TargetSchedule, M0: int, M: int, S: int, seed: int,
                workers: int | None = 1, gauss_method: str = "auto") -> EstimatorReport:
    """Fraction of orbits with h[m] = 1 for all m in [M0, M]."""
    if M0 > M:
        raise ConfigError("M0 must be <= M")
    return ea_fractions(system, schedule, [(M0, M)], S, seed, workers, gauss_method)[0]


def invariance_check(system: str, schedule: TargetSchedule, M0: int, M: int, S: int, seed: int,
                     workers: int | None = 1, gauss_method: str = "auto") -> EstimatorReport:
    """Frequency with which the windowed status of x and of Tx disagree."""
    _check_samples(S)
    if not 1 <= M0 <= M:
        raise ConfigError("need 1 <= M0 <= M")
    spec = resolve_system(system, schedule, M + 1, gauss_method)
    res = run_batch(spec, Query(horizon=M, windows=((M0, M),), shifted=True), S, seed, workers)
    x, tx = res.window_pass[:, 0], res.window_pass_shifted[:, 0]
    return EstimatorReport.frequency(int(np.count_nonzero(x != tx)), S, seed, system, m0=M0, m=M,
                                     status_x=float(x.mean()), status_tx=float(tx.mean()))


# -- Lebesgue-measure check of the exact Gauss engine ------------------------------------------------

def lebesgue_digit_prefix_max(S: int, seed: int, depth: int) -> np.ndarray:
    """Running max of the first ``depth`` digits of S Lebesgue-uniform points.

    Under Lebesgue measure the digits follow the same chain as under the
    Gauss measure, started from y = 0 (T^n x given a_1..a_n has CDF
    (1+y)t/(1+yt) with y = q_{n-1}/q_n), so no float iteration of T is needed.
    Column j (0-based) is max(a_1, ..., a_{j+1}); a point lies in Etilde_n for
    the target [0, 1/k] exactly when column n-1 is < k.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    u = rng.random((S, depth))
    digits, _ = chain_digits(np.zeros(S), u)
    return np.maximum.accumulate(digits, axis=1)


def etilde_lebesgue_frequencies(prefix_max: np.ndarray, cells) -> dict[tuple[int, int], float]:
    """Frequency of Etilde_{n,k} for every (n, k) in ``cells``, from common random numbers."""
    out = {}
    by_n: dict[int, list[int]] = {}
    for n, k in cells:
        by_n.setdefault(n, []).append(k)
    S = prefix_max.shape[0]
    for n, ks in by_n.items():
        col = np.sort(prefix_max[:, n - 1])
        counts = np.searchsorted(col, np.asarray(ks, dtype=float), side="left")
        for k, c in zip(ks, counts):
            out[(n, k)] = int(c) / S
    return out
