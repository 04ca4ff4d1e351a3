"""Event-driven continuous-time branching random walk.

One particle sits at the origin; with k particles alive the next split
arrives after an Exponential(k) holding time, the splitting particle is
uniform among the k, and it is replaced by N children displaced by the
log-weights of a fresh reproduction draw.  Equivalent in law to independent
Exponential(1) lifetimes per particle, but O(1) per event.

Positions are kept in the log domain throughout.  Snapshots are emitted at
requested checkpoints (the population is constant between splits, so
checkpoints are exact).  Batch runs process replicates in fixed chunks of
``streams.CHUNK`` with one deterministic stream per chunk, which makes every
statistic independent of the worker count.

Large times are reached with ``ReadoutPool``: population observables at age
t+s decompose over the time-t ancestors into independent age-s copies, so a
pool of age-s readouts can be pushed forward by simulating only the short
root segment and resampling the pool for the subtrees.  Resampling with
replacement is the only approximation, the same one the fixed-point pool
iteration makes.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from numba import njit
from scipy import special

from . import initial_laws, streams
from .errors import CapExceededError, ConfigError, DomainError
from .spectral import SpectralProfile, WeightModel, kernel_spec, n_children, phi_value, sample_weight_matrix, validate_model

__all__ = [
    "DEFAULT_CAP",
    "BranchingConfig",
    "PopulationState",
    "MartingaleReadout",
    "ReplicateStats",
    "ReadoutPool",
    "simulate_population",
    "population_pgf",
    "split_count_pmf",
    "additive_martingale",
    "derivative_martingale",
    "centered_second_moment",
    "max_normalized_weight",
    "readout",
    "run_replicates",
    "base_readout_pool",
    "extend_readout_pool",
    "readout_pool_chain",
    "plan_segments",
]

DEFAULT_CAP = 10**7

_TWO_PI = 6.283185307179586


@dataclass(frozen=True)
class BranchingConfig:
    """Trajectory request: model, horizon, checkpoint times, cap."""

    model: WeightModel
    horizon: float
    checkpoints: tuple[float, ...]
    particle_cap: int = DEFAULT_CAP
    seed: int | None = None

    def __post_init__(self):
        validate_model(self.model)
        cps = tuple(float(c) for c in self.checkpoints)
        if any(c < 0.0 for c in cps):
            raise ConfigError("checkpoints must be nonnegative")
        if list(cps) != sorted(cps):
            raise ConfigError("checkpoints must be sorted ascending")
        if cps and cps[-1] > self.horizon:
            raise ConfigError("checkpoints must not exceed the horizon")
        if self.particle_cap < 1:
            raise ConfigError("particle cap must be at least 1")
        object.__setattr__(self, "checkpoints", cps)


@dataclass(frozen=True)
class PopulationState:
    """Snapshot of particle log-positions at one time point."""

    time: float
    log_weights: np.ndarray
    split_count: int

    @property
    def size(self) -> int:
        return self.log_weights.shape[0]


@dataclass(frozen=True)
class MartingaleReadout:
    """Scalar observables of one snapshot at the spectral minimizer."""

    time: float
    additive: float
    derivative: float
    max_norm_weight: float
    second_moment: float


# ---------------------------------------------------------------------------
# Event loop.  The jit kernel and the python mirror below must stay in
# lockstep: they consume identical uniform sequences for model codes 0-2
# (verified by tests).  Only ``gen.random()`` draws are used.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _sim_chunk(gen, n_reps, checkpoints, cap, model_code, kids, params,
               buf, offsets, counts, splits, status, abort_times):
    n_cp = checkpoints.shape[0]
    pos = 0
    z = np.empty(256, np.float64)
    for r in range(n_reps):
        m = 1
        nu = 0
        z[0] = 0.0
        t_split = -np.log1p(-gen.random())
        ci = 0
        while ci < n_cp:
            if checkpoints[ci] < t_split:
                if pos + m > buf.shape[0]:
                    status[r] = 2
                    return pos
                offsets[r, ci] = pos
                counts[r, ci] = m
                splits[r, ci] = nu
                buf[pos:pos + m] = z[:m]
                pos += m
                ci += 1
                continue
            j = int(gen.random() * m)
            if j >= m:
                j = m - 1
            parent = z[j]
            if m + kids - 1 > z.shape[0]:
                zn = np.empty(2 * z.shape[0] + kids, np.float64)
                zn[:m] = z[:m]
                z = zn
            if model_code == 0:
                z[j] = parent + params[0]
                for c in range(1, kids):
                    z[m + c - 1] = parent + params[c]
            elif model_code == 1:
                z[j] = parent + params[0] * np.log(1.0 - gen.random())
                for c in range(1, kids):
                    z[m + c - 1] = parent + params[0] * np.log(1.0 - gen.random())
            else:
                th = _TWO_PI * gen.random()
                z[j] = parent + np.log(np.abs(np.cos(th)))
                z[m] = parent + np.log(np.abs(np.sin(th)))
            m += kids - 1
            nu += 1
            if m > cap:
                status[r] = 1
                abort_times[r] = t_split
                while ci < n_cp:
                    counts[r, ci] = -1
                    ci += 1
                break
            t_split += -np.log1p(-gen.random()) / m
    return pos


def _sim_chunk_py(gen, n_reps, checkpoints, cap, sample_log_weights, kids,
                  buf, offsets, counts, splits, status, abort_times):
    """Python twin of ``_sim_chunk`` for weight models without a jit code."""
    n_cp = checkpoints.shape[0]
    pos = 0
    z = np.empty(256, np.float64)
    for r in range(n_reps):
        m = 1
        nu = 0
        z[0] = 0.0
        t_split = -math.log1p(-gen.random())
        ci = 0
        while ci < n_cp:
            if checkpoints[ci] < t_split:
                if pos + m > buf.shape[0]:
                    status[r] = 2
                    return pos
                offsets[r, ci] = pos
                counts[r, ci] = m
                splits[r, ci] = nu
                buf[pos:pos + m] = z[:m]
                pos += m
                ci += 1
                continue
            j = min(int(gen.random() * m), m - 1)
            parent = z[j]
            if m + kids - 1 > z.shape[0]:
                zn = np.empty(2 * z.shape[0] + kids, np.float64)
                zn[:m] = z[:m]
                z = zn
            lw = sample_log_weights(gen)
            z[j] = parent + lw[0]
            z[m:m + kids - 1] = parent + lw[1:]
            m += kids - 1
            nu += 1
            if m > cap:
                status[r] = 1
                abort_times[r] = t_split
                counts[r, ci:] = -1
                break
            t_split += -math.log1p(-gen.random()) / m
    return pos


def _log_weight_sampler(model: WeightModel) -> tuple[Callable, int]:
    """Mirror-path sampler consuming the same uniforms as the jit kernel."""
    spec = kernel_spec(model)
    kids = n_children(model)
    if spec is None:
        def custom(gen):
            return np.log(sample_weight_matrix(model, gen, 1)[0])
        return custom, kids
    code, _, params = spec
    if code == 0:
        def det(gen):
            return params
        return det, kids
    if code == 1:
        p = params[0]
        def power(gen):
            return p * np.log(1.0 - gen.random(kids))
        return power, kids
    def kac(gen):
        th = _TWO_PI * gen.random()
        return np.array([math.log(abs(math.cos(th))), math.log(abs(math.sin(th)))])
    return kac, kids


def _run_event_loop(gen, n_reps, checkpoints, cap, model, buf, offsets, counts, splits, status, abort_times):
    spec = kernel_spec(model)
    if spec is not None:
        code, kids, params = spec
        return _sim_chunk(gen, n_reps, checkpoints, cap, code, kids, params,
                          buf, offsets, counts, splits, status, abort_times)
    sampler, kids = _log_weight_sampler(model)
    return _sim_chunk_py(gen, n_reps, checkpoints, cap, sampler, kids,
                         buf, offsets, counts, splits, status, abort_times)


def _buffer_guess(n_reps: int, checkpoints: np.ndarray, kids: int, cap: int) -> int:
    per_rep = 0.0
    for t in checkpoints:
        per_rep += min(math.exp((kids - 1) * t), float(cap))
    # Start modest; _simulate_chunk doubles on overflow, so a low guess only
    # costs a rerun of the chunk.
    return int(min(n_reps * (2.0 * per_rep + 16.0), max(8_000_000.0, 4.0 * per_rep + 64.0)))


def _simulate_chunk(model, checkpoints, n_reps, cap, make_gen):
    """Run one chunk, growing the snapshot buffer until it fits.

    The generator state is restored before a retry so the trajectories do not
    depend on the buffer sizing.
    """
    kids = n_children(model)
    cps = np.asarray(checkpoints, dtype=float)
    size = _buffer_guess(n_reps, cps, kids, cap)
    gen = make_gen()
    start_state = gen.bit_generator.state
    while True:
        buf = np.empty(size, dtype=np.float64)
        offsets = np.zeros((n_reps, cps.size), dtype=np.int64)
        counts = np.full((n_reps, cps.size), -1, dtype=np.int64)
        splits = np.zeros((n_reps, cps.size), dtype=np.int64)
        status = np.zeros(n_reps, dtype=np.int8)
        abort_times = np.full(n_reps, np.nan)
        gen.bit_generator.state = start_state
        used = _run_event_loop(gen, n_reps, cps, cap, model, buf, offsets, counts, splits, status, abort_times)
        if not (status == 2).any():
            return buf[:used], offsets, counts, splits, status, abort_times, gen
        size *= 2


def simulate_population(config: BranchingConfig, rng: np.random.Generator) -> list[PopulationState]:
    """One trajectory observed at the configured checkpoints."""
    if not config.checkpoints:
        return []
    buf, offsets, counts, splits, status, abort_times, _ = _simulate_chunk(
        config.model, config.checkpoints, 1, config.particle_cap, lambda: rng)
    if status[0] == 1:
        raise CapExceededError(float(abort_times[0]), config.particle_cap)
    out = []
    for ci, t in enumerate(config.checkpoints):
        m = counts[0, ci]
        w = buf[offsets[0, ci]:offsets[0, ci] + m].copy()
        w.flags.writeable = False
        out.append(PopulationState(time=float(t), log_weights=w, split_count=int(splits[0, ci])))
    return out


# ---------------------------------------------------------------------------
# Closed-form Yule laws.
# ---------------------------------------------------------------------------


def population_pgf(n: int, t: float, s):
    """E s^{Y_t} for the pure-birth population with N=n children per split."""
    if n < 2:
        raise ConfigError("need at least 2 children")
    if t < 0.0:
        raise DomainError("time must be nonnegative")
    sv = np.asarray(s, dtype=complex)
    if (np.abs(sv) > 1.0 + 1e-12).any():
        raise DomainError("pgf argument must satisfy |s| <= 1")
    lam = n - 1
    decay = math.exp(-lam * t)
    out = sv * (decay / (1.0 - sv**lam * (1.0 - decay))) ** (1.0 / lam)
    return complex(out) if np.ndim(s) == 0 else out


def split_count_pmf(n: int, t: float, k):
    """P{nu_t = k}: number of splits by time t; log-gamma evaluation."""
    if n < 2:
        raise ConfigError("need at least 2 children")
    if t < 0.0:
        raise DomainError("time must be nonnegative")
    kv = np.asarray(k, dtype=np.int64)
    if (kv < 0).any():
        raise DomainError("split count must be nonnegative")
    lam = n - 1
    a = 1.0 / lam
    if t == 0.0:
        out = np.where(kv == 0, 1.0, 0.0)
        return float(out) if np.ndim(k) == 0 else out
    log_q = math.log1p(-math.exp(-lam * t))
    logp = special.gammaln(a + kv) - special.gammaln(kv + 1.0) - special.gammaln(a) - t + kv * log_q
    out = np.exp(logp)
    return float(out) if np.ndim(k) == 0 else out


# ---------------------------------------------------------------------------
# Snapshot observables.
# ---------------------------------------------------------------------------


def additive_martingale(state: PopulationState, s: float, phi_s: float) -> float:
    """exp(-phi(s) t) * sum_k exp(s z_k), evaluated through logsumexp."""
    return math.exp(special.logsumexp(s * state.log_weights) - phi_s * state.time)


def _centered(state: PopulationState, profile: SpectralProfile) -> np.ndarray:
    return state.log_weights - state.time * profile.mu_at


def derivative_martingale(state: PopulationState, profile: SpectralProfile) -> float:
    """sum_k exp(gamma* zc_k) zc_k with zc the drift-centered positions.

    Signed sum with wide dynamic range, hence exact (fsum) accumulation.
    """
    zc = _centered(state, profile)
    return math.fsum(np.exp(profile.gamma_star * zc) * zc)


def centered_second_moment(state: PopulationState, profile: SpectralProfile) -> float:
    """sum_k exp(gamma* zc_k) zc_k^2."""
    zc = _centered(state, profile)
    return math.fsum(np.exp(profile.gamma_star * zc) * zc * zc)


def max_normalized_weight(state: PopulationState, profile: SpectralProfile) -> float:
    """max_k exp(gamma* zc_k)."""
    zc = _centered(state, profile)
    return math.exp(profile.gamma_star * float(zc.max()))


def readout(state: PopulationState, profile: SpectralProfile) -> MartingaleReadout:
    return MartingaleReadout(
        time=state.time,
        additive=additive_martingale(state, profile.gamma_star, profile.phi_at),
        derivative=derivative_martingale(state, profile),
        max_norm_weight=max_normalized_weight(state, profile),
        second_moment=centered_second_moment(state, profile),
    )


# ---------------------------------------------------------------------------
# Batched replicates.
# ---------------------------------------------------------------------------


@dataclass
class ReplicateStats:
    """Per-replicate, per-checkpoint observables of a batch run.

    Aborted replicates carry NaN observables and population -1 from the
    abort time onward; they are excluded by consumers via ``aborted``.
    ``smoothing`` is the raw weighted sum  sum_k exp(z_k) X_k  (no rescaling).
    """

    checkpoints: np.ndarray
    gammas: np.ndarray
    additive: np.ndarray          # (R, C, G)
    derivative: np.ndarray | None  # (R, C)
    second_moment: np.ndarray | None
    max_norm: np.ndarray | None
    population: np.ndarray        # (R, C) int64
    split_count: np.ndarray       # (R, C) int64
    smoothing: np.ndarray | None  # (R, C)
    aborted: np.ndarray           # (R,) bool
    abort_time: np.ndarray        # (R,)

    def ok(self) -> np.ndarray:
        return ~self.aborted

    def n_aborted(self) -> int:
        return int(self.aborted.sum())


def _segment_table(offsets, counts, checkpoints):
    """Emitted segments in buffer order: (starts, lens, cp_index)."""
    flat_counts = counts.ravel()
    mask = flat_counts >= 0
    starts = offsets.ravel()[mask]
    lens = flat_counts[mask]
    cp_idx = np.tile(np.arange(counts.shape[1]), counts.shape[0])[mask]
    return starts, lens, cp_idx


def _segment_logsumexp(x, starts, lens):
    if starts.size == 0:
        return np.empty(0)
    mx = np.maximum.reduceat(x, starts)
    sums = np.add.reduceat(np.exp(x - np.repeat(mx, lens)), starts)
    return mx + np.log(sums)


def _chunk_stats(model, checkpoints, n_reps, cap, master_seed, domain, chunk_index,
                 phis, gammas, profile, law):
    cps = np.asarray(checkpoints, dtype=float)
    buf, offsets, counts, splits, status, abort_times, gen = _simulate_chunk(
        model, cps, n_reps, cap, lambda: streams.stream(master_seed, domain, chunk_index))
    starts, lens, cp_idx = _segment_table(offsets, counts, cps)
    seg_t = cps[cp_idx]

    n_cp = cps.size
    n_g = len(gammas)
    additive = np.full((n_reps, n_cp, n_g), np.nan)
    rep_idx = np.repeat(np.arange(n_reps), n_cp)[counts.ravel() >= 0]
    for gi, (g, ph) in enumerate(zip(gammas, phis)):
        lse = _segment_logsumexp(g * buf, starts, lens)
        additive[rep_idx, cp_idx, gi] = np.exp(lse - ph * seg_t)

    derivative = second = maxn = None
    if profile is not None:
        gs, mu = profile.gamma_star, profile.mu_at
        zc = buf - mu * np.repeat(seg_t, lens)
        w = np.exp(gs * zc)
        derivative = np.full((n_reps, n_cp), np.nan)
        second = np.full((n_reps, n_cp), np.nan)
        maxn = np.full((n_reps, n_cp), np.nan)
        wz = w * zc
        wz2 = wz * zc
        dvals = np.empty(starts.size)
        svals = np.empty(starts.size)
        for i in range(starts.size):
            sl = slice(starts[i], starts[i] + lens[i])
            dvals[i] = math.fsum(wz[sl])
            svals[i] = math.fsum(wz2[sl])
        derivative[rep_idx, cp_idx] = dvals
        second[rep_idx, cp_idx] = svals
        maxn[rep_idx, cp_idx] = np.exp(gs * (np.maximum.reduceat(zc, starts) if starts.size else np.empty(0)))

    smoothing = None
    if law is not None:
        x = initial_laws.sample(law, gen, int(lens.sum())) if lens.size else np.empty(0)
        ez = np.exp(buf)
        smoothing = np.full((n_reps, n_cp), np.nan)
        svals = np.empty(starts.size)
        xpos = 0
        for i in range(starts.size):
            sl = slice(starts[i], starts[i] + lens[i])
            svals[i] = math.fsum(ez[sl] * x[xpos:xpos + lens[i]])
            xpos += lens[i]
        smoothing[rep_idx, cp_idx] = svals

    # counts carries the directly observed population size, so the
    # size = (N-1)*splits + 1 identity stays independently testable.
    return dict(additive=additive, derivative=derivative, second=second, maxn=maxn,
                population=counts.copy(), splits=np.where(counts >= 0, splits, -1),
                smoothing=smoothing, aborted=status == 1, abort_time=abort_times)


def _stats_job(args):
    return _chunk_stats(*args)


def run_replicates(model: WeightModel, checkpoints: Sequence[float], n_replicates: int,
                   master_seed: int, *, profile: SpectralProfile | None = None,
                   gammas: Sequence[float] = (), law=None,
                   particle_cap: int = DEFAULT_CAP, workers: int = 1,
                   domain: int = streams.POPULATION) -> ReplicateStats:
    """Simulate independent replicates and reduce snapshots to observables.

    Results are bit-identical for any ``workers`` value: replicate chunk k
    always uses stream (master_seed, domain, k) and chunks are merged in
    index order.
    """
    validate_model(model)
    cps = tuple(float(c) for c in checkpoints)
    if list(cps) != sorted(cps):
        raise ConfigError("checkpoints must be sorted ascending")
    gam = np.asarray(tuple(gammas), dtype=float)
    phis = tuple(phi_value(model, g) for g in gam)
    jobs = [(model, cps, size, particle_cap, master_seed, domain, ci, phis, tuple(gam), profile, law)
            for ci, start, size in streams.chunk_ranges(n_replicates)]
    results = _map_jobs(_stats_job, jobs, workers)

    n_cp = len(cps)
    r_tot = n_replicates
    stats = ReplicateStats(
        checkpoints=np.asarray(cps),
        gammas=gam,
        additive=np.full((r_tot, n_cp, gam.size), np.nan),
        derivative=None if profile is None else np.full((r_tot, n_cp), np.nan),
        second_moment=None if profile is None else np.full((r_tot, n_cp), np.nan),
        max_norm=None if profile is None else np.full((r_tot, n_cp), np.nan),
        population=np.full((r_tot, n_cp), -1, dtype=np.int64),
        split_count=np.full((r_tot, n_cp), -1, dtype=np.int64),
        smoothing=None if law is None else np.full((r_tot, n_cp), np.nan),
        aborted=np.zeros(r_tot, dtype=bool),
        abort_time=np.full(r_tot, np.nan),
    )
    for (ci, start, size), res in zip(streams.chunk_ranges(n_replicates), results):
        sl = slice(start, start + size)
        stats.additive[sl] = res["additive"]
        if profile is not None:
            stats.derivative[sl] = res["derivative"]
            stats.second_moment[sl] = res["second"]
            stats.max_norm[sl] = res["maxn"]
        stats.population[sl] = res["population"]
        stats.split_count[sl] = res["splits"]
        if law is not None:
            stats.smoothing[sl] = res["smoothing"]
        stats.aborted[sl] = res["aborted"]
        stats.abort_time[sl] = res["abort_time"]
    return stats


def _map_jobs(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


# ---------------------------------------------------------------------------
# Readout pools: observables at large times via the branching decomposition.
# ---------------------------------------------------------------------------


@dataclass
class ReadoutPool:
    """Pool of per-subtree observables at a common age.

    ``additive``/``derivative``/``max_norm`` are the drift-centered readouts
    at gamma_star.  ``smoothing`` is the centered weighted sum
    exp(-mu t) sum_k exp(z_k) X_k when an initial law is attached.
    """

    time: float
    additive: np.ndarray
    derivative: np.ndarray
    max_norm: np.ndarray
    smoothing: np.ndarray | None

    @property
    def size(self) -> int:
        return self.additive.shape[0]


def base_readout_pool(model: WeightModel, profile: SpectralProfile, segment_time: float,
                      size: int, master_seed: int, *, law=None, workers: int = 1,
                      particle_cap: int = DEFAULT_CAP,
                      domain: int = streams.POOL_BASE) -> ReadoutPool:
    """Exact (directly simulated) readout pool at age ``segment_time``."""
    stats = run_replicates(model, (segment_time,), size, master_seed, profile=profile,
                           gammas=(profile.gamma_star,), law=law, particle_cap=particle_cap,
                           workers=workers, domain=domain)
    if stats.aborted.any():
        raise CapExceededError(float(np.nanmin(stats.abort_time)), particle_cap)
    smoothing = None
    if law is not None:
        smoothing = math.exp(-profile.mu_at * segment_time) * stats.smoothing[:, 0]
    return ReadoutPool(
        time=segment_time,
        additive=stats.additive[:, 0, 0],
        derivative=stats.derivative[:, 0],
        max_norm=stats.max_norm[:, 0],
        smoothing=smoothing,
    )


def _extend_chunk(model, profile, segment_time, cap, master_seed, domain, level, chunk_index,
                  size, pool_additive, pool_derivative, pool_max, pool_smoothing):
    buf, offsets, counts, splits, status, abort_times, gen = _simulate_chunk(
        model, (segment_time,), size, cap,
        lambda: streams.stream(master_seed, domain, level, chunk_index))
    if (status == 1).any():
        raise CapExceededError(float(np.nanmin(abort_times)), cap)
    starts, lens, _ = _segment_table(offsets, counts, np.asarray([segment_time]))
    pool_n = pool_additive.shape[0]
    idx = gen.integers(0, pool_n, int(lens.sum()))

    zc = buf - profile.mu_at * segment_time
    w = np.exp(profile.gamma_star * zc)
    u = np.exp(zc) if pool_smoothing is not None else None

    m_new = np.empty(size)
    d_new = np.empty(size)
    x_new = np.empty(size)
    s_new = np.empty(size) if pool_smoothing is not None else None
    for i in range(size):
        sl = slice(starts[i], starts[i] + lens[i])
        pick = idx[sl]
        wm = w[sl] * pool_additive[pick]
        m_new[i] = math.fsum(wm)
        d_new[i] = math.fsum(w[sl] * (zc[sl] * pool_additive[pick] + pool_derivative[pick]))
        x_new[i] = float(np.max(w[sl] * pool_max[pick]))
        if s_new is not None:
            s_new[i] = math.fsum(u[sl] * pool_smoothing[pick])
    return m_new, d_new, x_new, s_new


def _extend_job(args):
    return _extend_chunk(*args)


def extend_readout_pool(pool: ReadoutPool, model: WeightModel, profile: SpectralProfile,
                        segment_time: float, master_seed: int, level: int, *,
                        workers: int = 1, particle_cap: int = DEFAULT_CAP,
                        domain: int = streams.POOL_BASE) -> ReadoutPool:
    """Push a readout pool forward by one root segment of age ``segment_time``.

    Stream paths are (domain, level, chunk), disjoint from the base pool's
    (domain, chunk) paths, so a whole chain can share one domain tag.
    """
    jobs = [(model, profile, segment_time, particle_cap, master_seed, domain, level, ci,
             size, pool.additive, pool.derivative, pool.max_norm, pool.smoothing)
            for ci, start, size in streams.chunk_ranges(pool.size)]
    parts = _map_jobs(_extend_job, jobs, workers)
    m_new = np.concatenate([p[0] for p in parts])
    d_new = np.concatenate([p[1] for p in parts])
    x_new = np.concatenate([p[2] for p in parts])
    s_new = np.concatenate([p[3] for p in parts]) if pool.smoothing is not None else None
    return ReadoutPool(time=pool.time + segment_time, additive=m_new, derivative=d_new,
                       max_norm=x_new, smoothing=s_new)


def plan_segments(times: Sequence[float], kids: int, target: float | None = None) -> float:
    """Segment length that puts all requested times on one lattice.

    Aims for a mean segment population of a few hundred particles
    (exp((N-1)*dt) ~ 400) so root segments stay cheap.
    """
    ts = sorted(float(t) for t in times)
    if not ts or ts[0] <= 0.0:
        raise ConfigError("pool chain times must be positive")
    if target is None:
        target = math.log(400.0) / (kids - 1)
    fracs = [Fraction(t).limit_denominator(10**6) for t in ts]
    g = fracs[0]
    for f in fracs[1:]:
        g = Fraction(math.gcd(g.numerator, f.numerator), math.lcm(g.denominator, f.denominator))
    base = float(g)
    k = max(1, math.ceil(base / target - 1e-9))
    dt = base / k
    if ts[-1] / dt > 2000:
        raise ConfigError("checkpoint times need too many pool segments; use a coarser common grid")
    return dt


def readout_pool_chain(model: WeightModel, profile: SpectralProfile, times: Sequence[float],
                       size: int, master_seed: int, *, law=None, segment_time: float | None = None,
                       workers: int = 1, particle_cap: int = DEFAULT_CAP,
                       domain: int = streams.POOL_BASE) -> dict[float, ReadoutPool]:
    """Readout pools at every requested time, sharing one segment chain."""
    ts = sorted(float(t) for t in times)
    dt = segment_time if segment_time is not None else plan_segments(ts, n_children(model))
    for t in ts:
        if abs(t / dt - round(t / dt)) > 1e-9:
            raise ConfigError(f"time {t} is not a multiple of the segment length {dt}")
    n_levels = round(ts[-1] / dt)
    pool = base_readout_pool(model, profile, dt, size, master_seed, law=law,
                             workers=workers, particle_cap=particle_cap, domain=domain)
    wanted = {round(t / dt): t for t in ts}
    out: dict[float, ReadoutPool] = {}
    if 1 in wanted:
        out[wanted[1]] = pool
    for level in range(2, n_levels + 1):
        pool = extend_readout_pool(pool, model, profile, dt, master_seed, level,
                                   workers=workers, particle_cap=particle_cap,
                                   domain=domain)
        if level in wanted:
            out[wanted[level]] = pool
    return out
