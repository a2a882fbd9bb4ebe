"""Reduced Markov detection state: Pool-1 counts plus an outbreak pseudo-posterior.

The detection problem runs on the 3-D state (S1, I1, P) observed at integer
stages. S1 and I1 follow the one-pool stochastic SIR dynamics; P tracks the
probability that the outbreak has reached the unobserved second pool. Per
stage, P gains the cross-infection drift alpha * beta * I1 * (1 - P) plus
i.i.d. noise and is clamped to [0, 1]; P = 1 is absorbing.

A 2-D large-population variant drops S1 and advances I1 as a linear
birth-death (branching) process with birth rate beta * I1 and death rate
gamma * I1, which is accurate while S1 / M1 is close to one.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

from .rng import RngStream
from .sir import EpidemicParams, single_pool_interval

NoiseSampler = Callable[[object], float]
"""Draws one pseudo-posterior noise increment from a numpy Generator."""


class ModelVariant(str, Enum):
    """Which Pool-1 dynamics drive the detection state."""

    FULL3D = "full3d"  # (S1, I1, P) with exact single-pool SIR
    LP2D = "lp2d"      # (I1, P) branching approximation; S1 is frozen


@dataclass(frozen=True)
class ReducedState:
    """Detection state at one integer stage."""

    s1: int
    i1: int
    p: float

    def __post_init__(self):
        if self.s1 < 0 or self.i1 < 0:
            raise ValueError(f"negative count in reduced state: {self}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"outbreak probability must lie in [0, 1], got {self.p}")


def gaussian_noise(sigma_delta: float) -> NoiseSampler:
    """Centered Gaussian noise sampler (the default pseudo-posterior noise)."""
    if sigma_delta < 0:
        raise ValueError(f"sigma_delta must be nonnegative, got {sigma_delta}")

    def sample(gen) -> float:
        return gen.normal(0.0, sigma_delta)

    return sample


def drift(x: ReducedState, params: EpidemicParams) -> float:
    """One-stage upward drift of P: alpha * beta * I1 * (1 - P)."""
    return params.alpha * params.beta * x.i1 * (1.0 - x.p)


def _branching_unit(i: int, beta: float, gamma: float, duration: float, gen) -> int:
    """Linear birth-death process over `duration`; same draw protocol as the SIR kernel."""
    t = 0.0
    next_exp = gen.standard_exponential
    next_u = gen.random
    while i > 0:
        r_birth = beta * i
        total = r_birth + gamma * i
        t += next_exp() / total
        if t > duration:
            break
        if next_u() * total < r_birth:
            i += 1
        else:
            i -= 1
    return i


def step(
    x: ReducedState,
    params: EpidemicParams,
    variant: ModelVariant,
    rng: RngStream,
    noise: Optional[NoiseSampler] = None,
) -> ReducedState:
    """Advance the detection state by one stage (one time unit).

    Pool-1 counts move first (SIR kernel or branching, by variant), then P
    is updated with the drift evaluated at the incoming state:
    P' = clamp(P + alpha*beta*I1*(1-P) + delta, 0, 1), delta drawn from
    `noise` (default: centered Gaussian with params.sigma_delta). P = 1 is
    absorbing and consumes no noise draw.
    """
    gen = rng.generator
    if variant is ModelVariant.FULL3D:
        s1, i1 = single_pool_interval(
            x.s1, x.i1, params.pool_sizes[0], params.beta, params.gamma, 1.0, gen
        )
    elif variant is ModelVariant.LP2D:
        s1 = x.s1
        i1 = _branching_unit(x.i1, params.beta, params.gamma, 1.0, gen)
    else:
        raise ValueError(f"unknown model variant: {variant!r}")

    if x.p == 1.0:
        p_next = 1.0
    else:
        if noise is None:
            delta = gen.normal(0.0, params.sigma_delta)
        else:
            delta = noise(gen)
        p_next = x.p + drift(x, params) + delta
        if p_next <= 0.0:
            p_next = 0.0
        elif p_next >= 1.0:
            p_next = 1.0
    return ReducedState(s1, i1, p_next)


def simulate_reduced(
    x0: ReducedState,
    horizon: int,
    params: EpidemicParams,
    variant: ModelVariant,
    rng: RngStream,
    noise: Optional[NoiseSampler] = None,
) -> list[ReducedState]:
    """Trajectory of length `horizon` + 1 starting at `x0` (stage 0)."""
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    path = [x0]
    x = x0
    for _ in range(horizon):
        x = step(x, params, variant, rng, noise=noise)
        path.append(x)
    return path
