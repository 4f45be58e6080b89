"""Monte Carlo simulation of the branching random walk.

Replicates are simulated in blocks: all particles of a block live in one
flat position array with a parallel array of replicate ids.  Ids stay
sorted through ``np.repeat``, so per-replicate reductions are cheap.

Every block draws from its own Philox stream keyed by (seed, block index),
so results depend only on the seed and the block layout, which is itself a
deterministic function of the model and horizon.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .deviation import Strategy, cstar, forced_prefix_weight
from .errors import PopulationCapExceeded, ZeroProbability
from .model import CheckedModel
from .rate import biggins_growth

DEFAULT_MAX_PARTICLES = 10**7
BLOCK_BUDGET = 2_000_000  # expected particles per block
CAP_WARN_FRACTION = 1e-3


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(block,))))


def level_for(x: float, n: int) -> float:
    """Level x*n, rounded so lattice positions compare consistently."""
    return round(x * n, 9)


def threshold_for(a: float, n: int) -> int:
    """ceil(e^{an}), robust to e^{an} landing a hair above an integer."""
    v = math.exp(a * n)
    r = round(v)
    if abs(v - r) <= 1e-9 * max(1.0, v):
        return max(int(r), 0)
    return math.ceil(v)


def block_size(model: CheckedModel, n: int, replicates: int) -> int:
    growth = model.m**n
    return int(max(1, min(replicates, BLOCK_BUDGET // max(1, math.ceil(growth)))))


@dataclass
class GenerationSnapshot:
    index: int
    positions: np.ndarray

    @property
    def size(self) -> int:
        return int(self.positions.size)

    @property
    def maximum(self) -> float:
        return float(self.positions.max())


def level_count(snapshot: GenerationSnapshot, y: float) -> int:
    """Number of particles at positions >= y."""
    return int(np.count_nonzero(snapshot.positions >= y))


@dataclass
class _Block:
    counts: np.ndarray  # Z_n[level, inf) per replicate
    sizes: np.ndarray  # |Z_n| per replicate
    maxima: np.ndarray  # M_n per replicate (-inf if capped)
    capped: np.ndarray  # bool per replicate
    mid_max: np.ndarray | None = None  # M_{t} for a requested intermediate t


def _segment_max(pos: np.ndarray, rep: np.ndarray, reps: int) -> np.ndarray:
    out = np.full(reps, -np.inf)
    if pos.size:
        starts = np.flatnonzero(np.r_[True, rep[1:] != rep[:-1]])
        out[rep[starts]] = np.maximum.reduceat(pos, starts)
    return out


def _simulate_block(
    model: CheckedModel,
    n: int,
    reps: int,
    rng: np.random.Generator,
    level: float,
    max_particles: int,
    *,
    start: float = 0.0,
    forced: tuple[int, int, float] | None = None,
    record_max_at: int | None = None,
) -> _Block:
    """Run ``reps`` independent walks for ``n`` generations.

    ``forced = (k, t, lower)`` makes generations 1..t split into exactly k
    children with steps drawn from X | X >= lower.
    """
    off, step = model.offspring, model.step
    pos = np.full(reps, float(start))
    rep = np.arange(reps)
    capped = np.zeros(reps, dtype=bool)
    mid_max = None
    for gen in range(1, n + 1):
        if forced is not None and gen <= forced[1]:
            k = forced[0]
            rep = np.repeat(rep, k)
            pos = np.repeat(pos, k) + step.sample_at_least(rng, rep.size, forced[2])
        else:
            kids = off.sample(rng, pos.size)
            rep = np.repeat(rep, kids)
            pos = np.repeat(pos, kids) + step.sample(rng, rep.size)
        sizes = np.bincount(rep, minlength=reps)
        over = sizes > max_particles
        if over.any():
            capped |= over
            keep = ~over[rep]
            rep, pos = rep[keep], pos[keep]
        if record_max_at is not None and gen == record_max_at:
            mid_max = _segment_max(pos, rep, reps)
    if record_max_at == 0:
        mid_max = np.full(reps, float(start))
    counts = np.bincount(rep[pos >= level], minlength=reps)
    sizes = np.bincount(rep, minlength=reps)
    return _Block(counts, sizes, _segment_max(pos, rep, reps), capped, mid_max)


def evolve(
    model: CheckedModel,
    rng_seed: int,
    n: int,
    max_particles: int = DEFAULT_MAX_PARTICLES,
    history: list | None = None,
) -> GenerationSnapshot:
    """Simulate one walk to generation n.

    When ``history`` is a list, (generation, |Z_k|, M_k) tuples are appended
    for every generation.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = block_rng(rng_seed, 0)
    pos = np.zeros(1)
    if history is not None:
        history.append((0, 1, 0.0))
    for gen in range(1, n + 1):
        kids = model.offspring.sample(rng, pos.size)
        total = int(kids.sum())
        if total > max_particles:
            raise PopulationCapExceeded(f"generation {gen} has {total} > {max_particles} particles")
        pos = np.repeat(pos, kids) + model.step.sample(rng, total)
        if history is not None:
            history.append((gen, total, float(pos.max())))
    return GenerationSnapshot(n, pos)


# ---------------------------------------------------------------------------
# estimates
# ---------------------------------------------------------------------------


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    if trials == 0:
        return (0.0, 1.0)
    ci = stats.binomtest(successes, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return (float(ci.low), float(ci.high))


@dataclass
class SimEstimate:
    p_hat: float
    replicates: int
    successes: int
    ci95: tuple[float, float]
    seed: int
    n: int
    threshold: int
    level: float
    a: float | None = None
    x: float | None = None
    capped: int = 0
    cap_warning: bool = False
    per_replicate: dict | None = field(default=None, repr=False)

    @property
    def stderr(self) -> float:
        return math.sqrt(max(self.p_hat * (1 - self.p_hat), 0.0) / max(self.replicates, 1))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("per_replicate")
        d["ci95"] = list(self.ci95)
        d["stderr"] = self.stderr
        return d


def _run_blocks(model, n, replicates, seed, level, max_particles, **kw):
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    bs = block_size(model, n, replicates)
    out = []
    done = 0
    block = 0
    while done < replicates:
        reps = min(bs, replicates - done)
        out.append(_simulate_block(model, n, reps, block_rng(seed, block), level, max_particles, **kw))
        done += reps
        block += 1
    merged = {}
    for name in ("counts", "sizes", "maxima", "capped"):
        merged[name] = np.concatenate([getattr(b, name) for b in out])
    if out[0].mid_max is not None:
        merged["mid_max"] = np.concatenate([b.mid_max for b in out])
    return merged


def estimate_level_tail(
    model: CheckedModel,
    level: float,
    threshold: int,
    n: int,
    replicates: int,
    rng_seed: int,
    max_particles: int = DEFAULT_MAX_PARTICLES,
    keep_replicates: bool = False,
) -> SimEstimate:
    """Monte Carlo estimate of P(Z_n[level, inf) >= threshold).

    Capped replicates are excluded from the denominator and reported.
    """
    r = _run_blocks(model, n, replicates, rng_seed, level, max_particles)
    ok = ~r["capped"]
    used = int(ok.sum())
    succ = int(np.count_nonzero((r["counts"] >= threshold) & ok))
    capped = replicates - used
    est = SimEstimate(
        p_hat=succ / used if used else float("nan"),
        replicates=used,
        successes=succ,
        ci95=wilson_interval(succ, used),
        seed=rng_seed,
        n=n,
        threshold=int(threshold),
        level=level,
        capped=capped,
        cap_warning=capped > CAP_WARN_FRACTION * replicates,
    )
    if keep_replicates:
        est.per_replicate = {
            "replicate": np.arange(replicates),
            "n": np.full(replicates, n),
            "count_at_level": r["counts"],
            "max_position": r["maxima"],
            "capped_flag": r["capped"].astype(int),
        }
    return est


def estimate_upper_dev(
    model: CheckedModel,
    a: float,
    x: float,
    n: int,
    replicates: int,
    rng_seed: int,
    max_particles: int = DEFAULT_MAX_PARTICLES,
    keep_replicates: bool = False,
) -> SimEstimate:
    """Estimate P(Z_n[xn, inf) >= e^{an}) with threshold ceil(e^{an})."""
    est = estimate_level_tail(
        model, level_for(x, n), threshold_for(a, n), n, replicates, rng_seed, max_particles, keep_replicates
    )
    est.a, est.x = a, x
    return est


@dataclass
class GrowthSummary:
    mean: float
    std: float
    stderr: float
    replicates: int
    zero_count: int
    capped: int
    n: int
    x: float
    limit: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def empirical_growth(
    model: CheckedModel,
    x: float,
    n: int,
    replicates: int,
    rng_seed: int,
    max_particles: int = DEFAULT_MAX_PARTICLES,
) -> GrowthSummary:
    """Summary of (1/n) log Z_n[xn, inf) over replicates with a nonzero count."""
    r = _run_blocks(model, n, replicates, rng_seed, level_for(x, n), max_particles)
    ok = ~r["capped"]
    counts = r["counts"][ok]
    nz = counts > 0
    vals = np.log(counts[nz]) / n
    try:
        limit = biggins_growth(model, x)
    except Exception:
        limit = None
    k = int(vals.size)
    return GrowthSummary(
        mean=float(vals.mean()) if k else float("nan"),
        std=float(vals.std(ddof=1)) if k > 1 else float("nan"),
        stderr=float(vals.std(ddof=1) / math.sqrt(k)) if k > 1 else float("nan"),
        replicates=k,
        zero_count=int((~nz).sum()),
        capped=int((~ok).sum()),
        n=n,
        x=x,
        limit=limit,
    )


def martingale_sample(model: CheckedModel, n: int, replicates: int, rng_seed: int) -> np.ndarray:
    """Samples of W_n = |Z_n| m^{-n}."""
    r = _run_blocks(model, n, replicates, rng_seed, math.inf, DEFAULT_MAX_PARTICLES)
    return r["sizes"][~r["capped"]] / model.m**n


# ---------------------------------------------------------------------------
# strategy samplers
# ---------------------------------------------------------------------------


@dataclass
class StrategyEstimate:
    """Outcome of a conditioned strategy run.

    ``log_lower_bound`` = forced_log_weight + log(success frequency) estimates
    the log of a lower bound on the target probability.
    """

    strategy: str
    successes: int
    replicates: int
    forced_log_weight: float
    forced_log_neg_log: float
    t_n: int
    n: int
    threshold: int
    level: float
    extra: dict = field(default_factory=dict)

    @property
    def frequency(self) -> float:
        return self.successes / self.replicates

    @property
    def log_lower_bound(self) -> float:
        if self.successes == 0:
            return -math.inf
        return self.forced_log_weight + math.log(self.frequency)

    @property
    def log_neg_log_lower_bound(self) -> float:
        """log(-log of the lower-bound estimate), finite even when the weight underflows."""
        if self.successes == 0:
            return math.inf
        lf = -math.log(self.frequency)
        if math.isfinite(self.forced_log_weight):
            return math.log(-self.forced_log_weight + lf)
        return self.forced_log_neg_log

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(
            frequency=self.frequency,
            log_lower_bound=self.log_lower_bound,
            log_neg_log_lower_bound=self.log_neg_log_lower_bound,
        )
        return d


def estimate_strategy(
    model: CheckedModel,
    strategy: Strategy,
    a: float,
    x: float,
    n: int,
    replicates: int,
    rng_seed: int,
    *,
    eta: float | None = None,
    eps: float = 0.05,
    s: float | None = None,
    y: float | None = None,
    t_n: int | None = None,
    max_particles: int = DEFAULT_MAX_PARTICLES,
) -> StrategyEstimate:
    """Run a lower-bound strategy over many replicates.

    B_ARY: t_n = floor((c* + eps) n) forced generations of b-ary splitting
    with steps conditioned on X >= L - eta, then free evolution.
    MAX_BOOST: t_n = ceil(s n); free evolution, success needs
    M_{t_n} >= (1 + eps) y n as well as the final level-set event.
    """
    strategy = Strategy(strategy)
    level, thr = level_for(x, n), threshold_for(a, n)
    if strategy is Strategy.B_ARY:
        if eta is None:
            raise ValueError("B_ARY needs eta")
        if t_n is None:
            t_n = math.floor((cstar(model, a, x) + eps) * n)
        b = model.b
        lower = model.L - eta
        p_b, p_step = model.offspring.pmf(b), model.step.sf(lower)
        if p_b <= 0 or p_step <= 0:
            raise ZeroProbability(f"p_b={p_b}, P(X >= L - eta)={p_step}")
        w = forced_prefix_weight(b, t_n, p_b, p_step)
        r = _run_blocks(model, n, replicates, rng_seed, level, max_particles, forced=(b, t_n, lower))
        ok = ~r["capped"]
        succ = int(np.count_nonzero((r["counts"] >= thr) & ok))
        return StrategyEstimate(
            strategy.value, succ, int(ok.sum()), w.log_prob, w.log_neg_log_prob, t_n, n, thr, level,
            extra={"eta": eta, "eps": eps, "b": b, "capped": int((~ok).sum())},
        )
    if strategy is Strategy.MAX_BOOST:
        if s is None or y is None:
            raise ValueError("MAX_BOOST needs s and y")
        if t_n is None:
            t_n = math.ceil(s * n)
        target = (1 + eps) * y * n
        r = _run_blocks(model, n, replicates, rng_seed, level, max_particles, record_max_at=t_n)
        ok = ~r["capped"]
        boosted = (r["mid_max"] >= target) & ok
        succ = int(np.count_nonzero(boosted & (r["counts"] >= thr)))
        return StrategyEstimate(
            strategy.value, succ, int(ok.sum()), 0.0, -math.inf, t_n, n, thr, level,
            extra={"boost_hits": int(boosted.sum()), "target": target, "s": s, "y": y, "eps": eps},
        )
    raise ValueError(f"no sampler for {strategy.value}")


def conditioned_run(
    model: CheckedModel,
    strategy: Strategy,
    a: float,
    x: float,
    n: int,
    rng_seed: int,
    **params,
) -> dict:
    """One replicate of a strategy: {'success': bool, 'forced_log_weight': float}."""
    est = estimate_strategy(model, strategy, a, x, n, 1, rng_seed, **params)
    return {"success": est.successes == 1, "forced_log_weight": est.forced_log_weight, "t_n": est.t_n}


def post_boost_success(
    model: CheckedModel,
    a: float,
    x: float,
    n: int,
    s: float,
    y: float,
    eps: float,
    replicates: int,
    rng_seed: int,
) -> SimEstimate:
    """Second stage of MAX_BOOST alone.

    A walk started at (1 + eps) y n runs for n - ceil(s n) generations; the
    estimate is P(count at xn >= e^{an}), which tends to 1 for feasible (s, y).
    """
    t_n = math.ceil(s * n)
    start = (1 + eps) * y * n
    level, thr = level_for(x, n), threshold_for(a, n)
    m_left = n - t_n
    bs = block_size(model, m_left, replicates)
    counts, done, block = [], 0, 0
    while done < replicates:
        reps = min(bs, replicates - done)
        blk = _simulate_block(model, m_left, reps, block_rng(rng_seed, block), level, DEFAULT_MAX_PARTICLES, start=start)
        counts.append(blk.counts[~blk.capped])
        done += reps
        block += 1
    c = np.concatenate(counts)
    succ = int(np.count_nonzero(c >= thr))
    return SimEstimate(
        p_hat=succ / c.size, replicates=int(c.size), successes=succ, ci95=wilson_interval(succ, int(c.size)),
        seed=rng_seed, n=n, threshold=thr, level=level, a=a, x=x,
    )
