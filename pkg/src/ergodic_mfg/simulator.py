"""Event-driven simulation of the n-player jump game.

Time-homogeneous profiles are simulated exactly with the Gillespie scheme:
between jumps the configuration, hence every rate, is constant.  Profiles
that depend on time use Ogata thinning against the global bound
``n (d - 1) a_hi``.

Players are tracked through per-state member lists.  Symmetric players in
the same state pay the same cost rate, so per-player cost integrals are
obtained from cumulative per-state integrals in O(1) per jump.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidInputError
from .model import FREE_RATE, ModelParams
from .strategies import DeviationProfile, StrategyProfile, counts_of
from .systems import MeasurePath

_CHUNK = 1 << 14


def replication_rng(seed: int, rep: int = 0) -> np.random.Generator:
    """Independent counter-based stream for replication ``rep``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(rep)])))


def deterministic_configuration(n: int, mu) -> np.ndarray:
    """Configuration whose empirical measure is ``mu`` (``n * mu`` must be integral)."""
    mu = np.asarray(mu, dtype=float)
    counts = np.rint(n * mu).astype(int)
    if counts.sum() != n or not np.allclose(counts, n * mu, atol=1e-9):
        raise InvalidInputError(f"n * mu is not an integer vector: {n * mu}")
    return np.repeat(np.arange(mu.size), counts)


def initial_configuration(n: int, init, d: int, rng) -> np.ndarray:
    """Resolve ``init`` into a configuration.

    An integer array of length ``n`` is taken as the configuration itself; a
    float array of length ``d`` is a law from which players are drawn i.i.d.
    """
    if init is None:
        init = np.full(d, 1.0 / d)
    init = np.asarray(init)
    if np.issubdtype(init.dtype, np.integer):
        if init.shape != (n,):
            raise InvalidInputError(f"configuration must have length n={n}")
        counts_of(init, d)
        return init.astype(np.int64).copy()
    law = np.asarray(init, dtype=float)
    if law.shape != (d,) or np.any(law < 0) or abs(law.sum() - 1) > 1e-12:
        raise InvalidInputError("initial law must be a probability vector of length d")
    return rng.choice(d, size=n, p=law).astype(np.int64)


@dataclass
class SimResult:
    """Output of :func:`simulate`.

    Attributes
    ----------
    n, T, burn_in : run geometry; costs are integrated over ``[burn_in, T]``.
    jump_times : ndarray or None
        Times of the recorded configurations (starting with 0).
    jump_counts : ndarray or None
        Count vectors right after each recorded jump.
    grid, grid_counts : ndarray
        Uniform output grid and the count vector at each grid time.
    cost_integrals : ndarray
        ``int_{burn_in}^T (f + F) dt`` per player.
    occupation : ndarray
        Time spent (after burn-in) with ``k`` players in state 0, ``k = 0..n``.
    jumps : int
        Number of accepted jumps.
    """

    n: int
    d: int
    T: float
    burn_in: float
    grid: np.ndarray
    grid_counts: np.ndarray
    cost_integrals: np.ndarray
    occupation: np.ndarray
    jumps: int
    jump_times: np.ndarray | None = None
    jump_counts: np.ndarray | None = None
    deviator: int | None = None
    final_config: np.ndarray | None = field(default=None, repr=False)

    @property
    def costs(self) -> np.ndarray:
        """Time-averaged cost per player."""
        return self.cost_integrals / (self.T - self.burn_in)

    def occupation_distribution(self) -> np.ndarray:
        return self.occupation / self.occupation.sum()

    def empirical_path(self) -> MeasurePath:
        """Empirical measure at the uniform output grid."""
        return MeasurePath(self.grid, self.grid_counts / self.n)

    def jump_path(self) -> MeasurePath:
        """Empirical measure after every jump (requires ``record_jumps``)."""
        if self.jump_times is None:
            raise DomainError("jumps were not recorded; rerun with record_jumps=True")
        return MeasurePath(self.jump_times, self.jump_counts / self.n)

    def path_csv(self) -> str:
        return self.empirical_path().to_csv()

    def cost_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["player", "cost"])
        for i, c in enumerate(self.costs):
            w.writerow([i, repr(float(c))])
        return buf.getvalue()


class _EventTables:
    """Jump buckets and cost rates for a count vector, cached when time-homogeneous.

    An entry is ``(events, lam, cost, dev_cost)``: ``events`` lists
    ``(cumulative weight, x, y, group size)`` over symmetric groups and then
    the deviator's moves (group size 0); ``cost[x]`` is the cost rate of a
    symmetric player in ``x``.
    """

    def __init__(self, profile: StrategyProfile, n: int, deviator):
        self.profile = profile
        self.params = profile.params
        self.n = n
        self.deviator = deviator
        self.store = {}
        d = self.params.d
        self.off = ~np.eye(d, dtype=bool)
        self.bias = np.zeros(d)
        self.bias[0] = self.params.delta
        if deviator is not None:
            self.dev_table = profile.table
            self.dev_running = self._running(self.dev_table)

    def _running(self, A):
        return self.bias + self.params.b * np.where(self.off, (A - FREE_RATE) ** 2, 0.0).sum(axis=1)

    def get(self, cnt, xd):
        key = (tuple(cnt), xd)
        hit = self.store.get(key)
        if hit is None:
            hit = self.build(0.0, cnt, xd)
            self.store[key] = hit
        return hit

    def build(self, t, cnt, xd):
        d = self.params.d
        counts = np.array(cnt, dtype=float)
        A = self.profile.state_rates(t, counts)
        mean_field = (counts - 1.0) / (self.n - 1.0)
        cost = (self._running(A) + mean_field).tolist()
        sym = counts.copy()
        if xd >= 0:
            sym[xd] -= 1
        events, total = [], 0.0
        for x in range(d):
            m = int(sym[x])
            if m == 0:
                continue
            for y in range(d):
                if y != x:
                    total += m * float(A[x, y])
                    events.append((total, x, y, m))
        dev_cost = 0.0
        if xd >= 0:
            for y in range(d):
                if y != xd:
                    total += float(self.dev_table[xd, y])
                    events.append((total, xd, y, 0))
            dev_cost = float(self.dev_running[xd] + mean_field[xd])
        return events, total, cost, dev_cost


class _Uniforms:
    def __init__(self, rng):
        self.rng = rng
        self.buf = []
        self.pos = 0

    def next(self):
        if self.pos == len(self.buf):
            self.buf = self.rng.random(_CHUNK).tolist()
            self.pos = 0
        u = self.buf[self.pos]
        self.pos += 1
        return u


def simulate(
    n: int,
    profile: StrategyProfile,
    T: float,
    init=None,
    seed: int = 0,
    rep: int = 0,
    *,
    burn_in: float = 0.0,
    grid_points: int = 101,
    record_jumps: bool = True,
) -> SimResult:
    """Simulate ``n`` players on ``[0, T]``.

    Parameters
    ----------
    n : int
        Number of players.
    profile : StrategyProfile
        Strategy profile (a :class:`DeviationProfile` marks one deviator).
    T : float
        Horizon.
    init : array, optional
        Integer configuration of length ``n`` or a law on the states from
        which initial states are drawn i.i.d.  Uniform law by default.
    seed, rep : int
        The stream is determined by ``(seed, rep)``.
    burn_in : float
        Costs and occupation times are accumulated on ``[burn_in, T]`` only.
    grid_points : int
        Size of the uniform output grid on ``[0, T]``.
    record_jumps : bool
        Keep the configuration after every jump (memory grows with jumps).
    """
    params = profile.params
    d = params.d
    if not T > 0 or not 0 <= burn_in < T:
        raise InvalidInputError(f"need T > 0 and 0 <= burn_in < T, got T={T}, burn_in={burn_in}")
    if n < 2:
        # the mean-field cost of player i is evaluated on the other n - 1 players
        raise DomainError("simulation needs n >= 2")
    rng = replication_rng(seed, rep)
    config = initial_configuration(n, init, d, rng)
    counts = np.bincount(config, minlength=d).astype(np.int64)
    uniforms = _Uniforms(rng)

    deviator = profile.deviator if isinstance(profile, DeviationProfile) else None
    if deviator is not None and not 0 <= deviator < n:
        raise InvalidInputError(f"deviator index {deviator} out of range for n={n}")

    # member lists of symmetric players, with positions for O(1) removal
    members = [[] for _ in range(d)]
    config = config.tolist()
    pos = [0] * n
    for i in range(n):
        if i == deviator:
            continue
        pos[i] = len(members[config[i]])
        members[config[i]].append(i)

    cache = _EventTables(profile, n, deviator)
    cum = [0.0] * d  # cumulative cost integral of a symmetric player in each state
    offset = [0.0] * n
    acc = [0.0] * n
    dev_acc = 0.0
    occupation = [0.0] * (n + 1)

    grid = np.linspace(0.0, T, grid_points)
    grid_list = grid.tolist()
    grid_counts = np.empty((grid_points, d), dtype=np.int64)
    g = 0
    cnt = counts.tolist()
    jump_times = [0.0] if record_jumps else None
    jump_counts = [list(cnt)] if record_jumps else None

    homogeneous = profile.time_homogeneous
    bound = n * (d - 1) * params.a_hi
    xd = int(config[deviator]) if deviator is not None else -1
    t = 0.0
    jumps = 0
    entry = cache.get(cnt, xd) if homogeneous else cache.build(0.0, cnt, xd)
    log = math.log
    nxt = uniforms.next

    while True:
        events, lam, cost, dev_cost = entry
        step = -log(1.0 - nxt()) / (lam if homogeneous else bound)
        end = t + step
        t_next = end if end < T else T

        while g < grid_points and (grid_list[g] < t_next or (t_next == T and grid_list[g] <= T)):
            grid_counts[g] = cnt
            g += 1
        lo = t if t > burn_in else burn_in
        if t_next > lo:
            dt = t_next - lo
            for x in range(d):
                cum[x] += dt * cost[x]
            occupation[cnt[0]] += dt
            dev_acc += dt * dev_cost
        if end >= T:
            break
        t = t_next

        if not homogeneous:
            entry = cache.build(t, cnt, xd)
            events, lam, cost, dev_cost = entry
            if lam > bound * (1 + 1e-12):
                raise DomainError(f"rate {lam} exceeds thinning bound {bound}")
            if nxt() * bound >= lam:
                continue
        pick = nxt() * lam

        # linear scan over the few (x, y) buckets; the deviator's come last
        prev = 0.0
        for c, x, y, m in events:
            if pick < c:
                break
            prev = c
        if m:
            k = int((pick - prev) / (c - prev) * m)
            j = members[x][k if k < m else m - 1]
            last = members[x].pop()
            if last != j:
                members[x][pos[j]] = last
                pos[last] = pos[j]
            acc[j] += cum[x] - offset[j]
            offset[j] = cum[y]
            pos[j] = len(members[y])
            members[y].append(j)
        else:
            j = deviator
            xd = y
        config[j] = y
        cnt[x] -= 1
        cnt[y] += 1
        jumps += 1
        entry = cache.get(cnt, xd) if homogeneous else cache.build(t, cnt, xd)
        if record_jumps:
            jump_times.append(t)
            jump_counts.append(list(cnt))

    while g < grid_points:
        grid_counts[g] = cnt
        g += 1
    for i in range(n):
        if i != deviator:
            acc[i] += cum[config[i]] - offset[i]
    if deviator is not None:
        acc[deviator] = dev_acc
    occupation = np.array(occupation)
    acc = np.array(acc)
    config = np.array(config, dtype=np.int64)

    return SimResult(
        n=n,
        d=d,
        T=float(T),
        burn_in=float(burn_in),
        grid=grid,
        grid_counts=grid_counts,
        cost_integrals=acc,
        occupation=occupation,
        jumps=jumps,
        jump_times=np.array(jump_times) if record_jumps else None,
        jump_counts=np.array(jump_counts) if record_jumps else None,
        deviator=deviator,
        final_config=config,
    )


# ---------------------------------------------------------------------------
# estimators


@dataclass(frozen=True)
class CostEstimate:
    """Mean of replication averages with its standard error."""

    mean: float
    stderr: float
    samples: np.ndarray

    def interval(self, z: float = 1.96):
        return self.mean - z * self.stderr, self.mean + z * self.stderr


def _summarize(samples) -> CostEstimate:
    samples = np.asarray(samples, dtype=float)
    se = samples.std(ddof=1) / math.sqrt(samples.size) if samples.size > 1 else float("nan")
    return CostEstimate(float(samples.mean()), float(se), samples)


def estimate_cost(
    n: int,
    profile: StrategyProfile,
    T: float,
    burn_in: float = 0.0,
    reps: int = 20,
    seed: int = 0,
    init=None,
    player: int | None = None,
) -> CostEstimate:
    """Ergodic cost estimate from ``reps`` independent replications.

    Each replication contributes the time average over ``[burn_in, T]`` of
    the cost of ``player``; with ``player=None`` the average over all players
    is used (they are exchangeable under a symmetric profile).
    """
    if reps < 1:
        raise InvalidInputError("reps must be >= 1")
    values = []
    for r in range(reps):
        res = simulate(n, profile, T, init, seed, r, burn_in=burn_in, grid_points=2, record_jumps=False)
        c = res.costs
        values.append(c.mean() if player is None else c[player])
    return _summarize(values)


@dataclass(frozen=True)
class DeviationReport:
    """Benefit of single-player constant-rate deviations over a rate grid."""

    rates: np.ndarray
    base: CostEstimate
    deviations: tuple
    benefits: np.ndarray
    stderrs: np.ndarray

    @property
    def best_benefit(self) -> float:
        return float(self.benefits.max())

    def best_index(self) -> int:
        return int(np.argmax(self.benefits))


def deviation_benefit(
    n: int,
    profile: StrategyProfile,
    T: float,
    burn_in: float = 0.0,
    reps: int = 20,
    seed: int = 0,
    rates=(1.0, 1.5, 2.0, 2.5, 3.0),
    player: int = 0,
    init=None,
) -> DeviationReport:
    """Cost reduction a single player obtains with a constant-rate deviation.

    The benefit of rate ``a`` is ``J(base) - J(player deviates to a)``; the
    same seeds are used for every candidate (common random numbers).
    Positive values mean the deviation pays off.
    """
    base = estimate_cost(n, profile, T, burn_in, reps, seed, init, player)
    devs, benefits, ses = [], [], []
    for a in rates:
        dev = estimate_cost(n, DeviationProfile(profile, player, a), T, burn_in, reps, seed, init, player)
        diff = base.samples - dev.samples
        devs.append(dev)
        benefits.append(diff.mean())
        ses.append(diff.std(ddof=1) / math.sqrt(diff.size) if diff.size > 1 else float("nan"))
    return DeviationReport(np.asarray(rates, float), base, tuple(devs), np.array(benefits), np.array(ses))


@dataclass(frozen=True)
class ChaosReport:
    """Propagation-of-chaos errors per population size.

    ``errors[k, j]`` is the Monte Carlo mean of ``|mu_t - target(t)|`` at grid
    time ``grid[j]`` for ``ns[k]`` players; ``sup_errors`` takes the maximum
    over the grid.  ``slope`` is the OLS slope of ``log sup_errors`` against
    ``log n`` (``None`` for a single size).
    """

    ns: np.ndarray
    grid: np.ndarray
    errors: np.ndarray
    stderrs: np.ndarray
    sup_errors: np.ndarray
    slope: float | None
    intercept: float | None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "sup_error"])
        for n, e in zip(self.ns, self.sup_errors):
            w.writerow([int(n), repr(float(e))])
        return buf.getvalue()


def propagation_error(
    ns,
    profile: StrategyProfile,
    target,
    T: float = 2.0,
    reps: int = 200,
    seed: int = 0,
    grid_points: int = 11,
    init: str = "iid",
) -> ChaosReport:
    """Estimate ``sup_t E|mu_t - target(t)|`` for several population sizes.

    Parameters
    ----------
    ns : sequence of int
        Population sizes, each at least 2.
    profile : StrategyProfile
        Used for every population size.
    target : array or MeasurePath
        Limit measure (constant) or measure flow.
    init : {"iid", "exact"}
        ``"iid"`` draws players independently from the initial target;
        ``"exact"`` starts from a configuration whose empirical measure equals
        it (needs ``n * target(0)`` integral).
    """
    ns = np.asarray(list(ns), dtype=int)
    if np.any(ns < 2):
        raise InvalidInputError("all population sizes must be >= 2")
    grid = np.linspace(0.0, T, grid_points)
    if isinstance(target, MeasurePath):
        targets = np.array([target.at(t) for t in grid])
    else:
        targets = np.broadcast_to(np.asarray(target, dtype=float), (grid_points, profile.params.d))
    mu0 = targets[0]
    errors = np.empty((ns.size, grid_points))
    stderrs = np.empty_like(errors)
    for k, n in enumerate(ns):
        start = deterministic_configuration(int(n), mu0) if init == "exact" else mu0
        samples = np.empty((reps, grid_points))
        for r in range(reps):
            res = simulate(int(n), profile, T, start, seed + int(n), r,
                           grid_points=grid_points, record_jumps=False)
            samples[r] = np.linalg.norm(res.grid_counts / n - targets, axis=1)
        errors[k] = samples.mean(axis=0)
        stderrs[k] = samples.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.nan
    sup = errors.max(axis=1)
    slope = intercept = None
    if ns.size >= 2:
        slope, intercept = (float(v) for v in np.polyfit(np.log(ns), np.log(sup), 1))
    return ChaosReport(ns, grid, errors, stderrs, sup, slope, intercept)


def occupation_tv(result: SimResult, probs) -> float:
    """Total-variation distance between the count occupation and ``probs``."""
    return 0.5 * float(np.abs(result.occupation_distribution() - np.asarray(probs)).sum())
