"""Exact event-driven simulation of a K-pool stochastic SIR model.

Each pool mixes homogeneously inside and is weakly coupled to the others
through traveling infecteds. Three kinds of reaction channels drive the
continuous-time Markov jump dynamics:

  infection     S(k) + I(k)  -> 2 I(k)        rate  beta * I(k) * S(k) / M(k)
  transmission  S(k) + I(k') -> I(k) + I(k')  rate  alpha * beta * I(k') * S(k) / M(k)
  recovery      I(k)         -> (removed)     rate  gamma * I(k)

Recovered counts are implicit: R(k) = M(k) - S(k) - I(k). Simulation is
the exact stochastic simulation algorithm (Gillespie direct method) with
exponential holding times; rates are recomputed after every event.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

from .rng import RngStream


@dataclass(frozen=True)
class EpidemicParams:
    """Outbreak parameters shared by the full and reduced models.

    Attributes:
        beta: within-pool contact rate per unit time.
        gamma: recovery rate per unit time.
        alpha: traveler fraction; cross-pool contacts happen at alpha * beta.
        pool_sizes: fixed population of each pool.
        sigma_delta: standard deviation of the pseudo-posterior noise used
            by the reduced detection model.
    """

    beta: float
    gamma: float
    alpha: float
    pool_sizes: tuple[int, ...]
    sigma_delta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pool_sizes", tuple(int(m) for m in self.pool_sizes))
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if len(self.pool_sizes) < 1 or any(m < 1 for m in self.pool_sizes):
            raise ValueError(f"pool_sizes must be positive integers, got {self.pool_sizes}")
        if self.sigma_delta < 0:
            raise ValueError(f"sigma_delta must be nonnegative, got {self.sigma_delta}")

    @property
    def n_pools(self) -> int:
        return len(self.pool_sizes)


@dataclass(frozen=True)
class PoolState:
    """Counts of one pool; recovered is implicit (M - S - I)."""

    susceptible: int
    infected: int

    def __post_init__(self):
        if self.susceptible < 0 or self.infected < 0:
            raise ValueError(f"negative compartment count: {self}")

    def recovered(self, pool_size: int) -> int:
        r = pool_size - self.susceptible - self.infected
        if r < 0:
            raise ValueError(f"S + I exceeds pool size {pool_size}: {self}")
        return r


@dataclass(frozen=True)
class MultiPoolState:
    """Joint epidemic state of all pools at a point in continuous time."""

    pools: tuple[PoolState, ...]
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pools", tuple(self.pools))
        if self.time < 0:
            raise ValueError(f"time must be nonnegative, got {self.time}")

    def validate(self, params: EpidemicParams) -> None:
        if len(self.pools) != params.n_pools:
            raise ValueError(
                f"state has {len(self.pools)} pools, params expect {params.n_pools}"
            )
        for pool, m in zip(self.pools, params.pool_sizes):
            pool.recovered(m)  # raises if S + I > M


class Channel(NamedTuple):
    """Identifier of one reaction channel."""

    kind: str  # "infection" | "transmission" | "recovery"
    pool: int  # pool whose compartments change
    source: Optional[int] = None  # infecting pool, transmission only


def transition_rates(
    state: MultiPoolState, params: EpidemicParams
) -> list[tuple[Channel, float]]:
    """All 2K + K(K-1) channel rates at `state`.

    Order: infections for k = 0..K-1, transmissions for ordered pairs
    (k, k') with k' != k, recoveries for k = 0..K-1. All rates are
    nonnegative; every rate is zero once no pool has infecteds.
    """
    state.validate(params)
    beta, gamma, alpha = params.beta, params.gamma, params.alpha
    sizes = params.pool_sizes
    K = params.n_pools
    s = [p.susceptible for p in state.pools]
    i = [p.infected for p in state.pools]

    rates: list[tuple[Channel, float]] = []
    for k in range(K):
        rates.append((Channel("infection", k), beta * i[k] * s[k] / sizes[k]))
    for k in range(K):
        for kp in range(K):
            if kp != k:
                rates.append(
                    (Channel("transmission", k, kp), alpha * beta * i[kp] * s[k] / sizes[k])
                )
    for k in range(K):
        rates.append((Channel("recovery", k), gamma * i[k]))
    return rates


def single_pool_interval(
    s: int, i: int, m: int, beta: float, gamma: float, duration: float,
    gen,
) -> tuple[int, int]:
    """Advance one isolated SIR pool by `duration` time units.

    Tight kernel used both by `simulate_interval` for K = 1 and by the
    reduced detection model for Pool-1 dynamics. Draw protocol per event:
    one standard exponential for the holding time, one uniform for channel
    selection (infection scanned before recovery).
    """
    t = 0.0
    next_exp = gen.standard_exponential
    next_u = gen.random
    while i > 0:
        r_inf = beta * i * s / m
        total = r_inf + gamma * i
        t += next_exp() / total
        if t > duration:
            break
        if next_u() * total < r_inf:
            s -= 1
            i += 1
        else:
            i -= 1
        assert s >= 0 and i >= 0 and s + i <= m
    return s, i


def first_event(
    state: MultiPoolState, params: EpidemicParams, rng: RngStream
) -> Optional[tuple[Channel, float, MultiPoolState]]:
    """Draw the next reaction: (channel, waiting time, new state).

    Returns None when the total rate is zero (frozen state). Uses the same
    draw protocol as `simulate_interval`: one standard exponential for the
    holding time, one uniform scanned against the `transition_rates` order.
    """
    pairs = transition_rates(state, params)
    total = 0.0
    for _, r in pairs:
        total += r
    if total <= 0.0:
        return None
    gen = rng.generator
    dt = gen.standard_exponential() / total
    u = gen.random() * total
    acc = 0.0
    chosen = pairs[-1][0]
    for ch, r in pairs:
        acc += r
        if u < acc:
            chosen = ch
            break
    s = [p.susceptible for p in state.pools]
    i = [p.infected for p in state.pools]
    if chosen.kind == "recovery":
        i[chosen.pool] -= 1
    else:  # infection or transmission both move one susceptible to infected
        s[chosen.pool] -= 1
        i[chosen.pool] += 1
    pools = tuple(PoolState(sk, ik) for sk, ik in zip(s, i))
    return chosen, dt, MultiPoolState(pools, state.time + dt)


def simulate_interval(
    state: MultiPoolState,
    params: EpidemicParams,
    duration: float,
    rng: RngStream,
) -> MultiPoolState:
    """Exact SSA evolution of `state` over `duration` time units.

    Waiting times are exponential with the total rate; channels fire with
    probability proportional to their rates, each moving one individual.
    If the total rate hits zero the remaining interval passes without
    events. The returned state has `time` advanced by `duration`.
    """
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    state.validate(params)
    gen = rng.generator
    K = params.n_pools
    sizes = params.pool_sizes
    beta, gamma, alpha = params.beta, params.gamma, params.alpha

    if K == 1:
        s0, i0 = single_pool_interval(
            state.pools[0].susceptible, state.pools[0].infected,
            sizes[0], beta, gamma, duration, gen,
        )
        return MultiPoolState((PoolState(s0, i0),), state.time + duration)

    s = [p.susceptible for p in state.pools]
    i = [p.infected for p in state.pools]
    pairs = [(k, kp) for k in range(K) for kp in range(K) if kp != k]
    n_inf = K
    n_trans = len(pairs)

    next_exp = gen.standard_exponential
    next_u = gen.random
    t = 0.0
    rates = [0.0] * (2 * K + n_trans)
    while True:
        total = 0.0
        for k in range(K):
            r = beta * i[k] * s[k] / sizes[k]
            rates[k] = r
            total += r
        for j, (k, kp) in enumerate(pairs):
            r = alpha * beta * i[kp] * s[k] / sizes[k]
            rates[n_inf + j] = r
            total += r
        for k in range(K):
            r = gamma * i[k]
            rates[n_inf + n_trans + k] = r
            total += r
        if total <= 0.0:
            break
        t += next_exp() / total
        if t > duration:
            break
        u = next_u() * total
        acc = 0.0
        idx = 0
        for idx in range(len(rates)):
            acc += rates[idx]
            if u < acc:
                break
        if idx < n_inf:  # within-pool infection
            s[idx] -= 1
            i[idx] += 1
        elif idx < n_inf + n_trans:  # cross-pool transmission
            k = pairs[idx - n_inf][0]
            s[k] -= 1
            i[k] += 1
        else:  # recovery
            i[idx - n_inf - n_trans] -= 1
        for k in range(K):
            assert s[k] >= 0 and i[k] >= 0 and s[k] + i[k] <= sizes[k]

    pools = tuple(PoolState(s[k], i[k]) for k in range(K))
    return MultiPoolState(pools, state.time + duration)


def outbreak_time(trajectory: Sequence[MultiPoolState]) -> Optional[int]:
    """First integer epoch at which Pool 2 acquires infecteds.

    `trajectory` must be sampled at integer epochs t = 0, 1, 2, ... .
    Returns the smallest t with I2[t-1] = 0 and I2[t] > 0; by convention 0
    if Pool 2 is already infected at the start; None if Pool 2 never gets
    infected within the trajectory.
    """
    i2 = []
    for st in trajectory:
        if len(st.pools) < 2:
            raise ValueError("outbreak_time needs at least two pools per state")
        i2.append(st.pools[1].infected)
    if not i2:
        return None
    if i2[0] > 0:
        return 0
    for t in range(1, len(i2)):
        if i2[t - 1] == 0 and i2[t] > 0:
            return t
    return None
