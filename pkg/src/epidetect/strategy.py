"""Detection policies and the frozen-path Monte Carlo evaluation harness.

Policies decide, at each integer stage, whether to announce the outbreak.
Because every policy here is a functional of the trajectory (none alters
the dynamics), all policies are scored against the same frozen set of
full-horizon trajectories: common random numbers make scenario-by-scenario
comparisons meaningful.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import parallel
from .costs import CostParams, pathwise_cost
from .reduced import ModelVariant, NoiseSampler, ReducedState, step
from .rng import RngStream
from .sir import EpidemicParams
from .solver import DetectionMap

DEFAULT_HORIZON = 50


@dataclass(frozen=True)
class ThresholdP:
    """Announce as soon as the outbreak probability reaches `p_bar`."""

    p_bar: float

    def __post_init__(self):
        if not 0.0 < self.p_bar < 1.0:
            raise ValueError(f"p_bar must lie in (0, 1), got {self.p_bar}")

    @property
    def name(self) -> str:
        return f"threshold_p_{self.p_bar:g}"

    def decide(self, x: ReducedState, t: int) -> bool:
        return x.p >= self.p_bar


@dataclass(frozen=True)
class ThresholdT:
    """Announce at the fixed stage `t_bar` regardless of the state."""

    t_bar: int

    def __post_init__(self):
        if self.t_bar < 1:
            raise ValueError(f"t_bar must be at least 1, got {self.t_bar}")

    @property
    def name(self) -> str:
        return f"threshold_t_{self.t_bar}"

    def decide(self, x: ReducedState, t: int) -> bool:
        return t >= self.t_bar


@dataclass(frozen=True)
class MapPolicy:
    """Stationary detection-map policy: announce where qhat - d > 0.

    A 2-D map (built on the large-population variant) reads only (I1, P)
    and therefore also applies to full 3-D states.
    """

    dmap: DetectionMap
    label: Optional[str] = None

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        tag = "optimal_map" if self.dmap.variant is ModelVariant.FULL3D else "lp_map"
        return tag

    def decide(self, x: ReducedState, t: int) -> bool:
        return self.dmap.announce(x)


Policy = Union[ThresholdP, ThresholdT, MapPolicy]


def decide(policy: Policy, x: ReducedState, t: int) -> bool:
    """Announce decision of `policy` in state `x` at stage `t`."""
    return policy.decide(x, t)


@dataclass
class FrozenPaths:
    """A reusable batch of full-horizon detection-state trajectories."""

    paths: list[list[ReducedState]]
    x0: ReducedState
    horizon: int
    variant: ModelVariant
    params: EpidemicParams
    master_seed: int
    stream_path: tuple[int, ...]

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    def fingerprint(self) -> tuple:
        """Identity of the scenario set; evaluations are only comparable
        when their fingerprints agree."""
        return (
            self.master_seed,
            self.stream_path,
            self.n_paths,
            self.horizon,
            (self.x0.s1, self.x0.i1, self.x0.p),
            self.variant.value,
            (self.params.beta, self.params.gamma, self.params.alpha,
             self.params.pool_sizes, self.params.sigma_delta),
        )


def simulate_paths(
    x0: ReducedState,
    n_paths: int,
    horizon: int,
    params: EpidemicParams,
    variant: ModelVariant,
    rng: RngStream,
    *,
    noise: Optional[NoiseSampler] = None,
    workers: int = 1,
) -> FrozenPaths:
    """Simulate `n_paths` trajectories of `horizon` stages from `x0`.

    Path n draws from `rng.derive(n)`, so the set is reproducible for any
    worker count and paths can be regenerated individually.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be positive, got {n_paths}")
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    variant = ModelVariant(variant)

    def run(n: int) -> list[ReducedState]:
        stream = rng.derive(n)
        path = [x0]
        x = x0
        for _ in range(horizon):
            x = step(x, params, variant, stream, noise=noise)
            path.append(x)
        return path

    paths = parallel.indexed_map(run, n_paths, workers)
    return FrozenPaths(
        paths=paths,
        x0=x0,
        horizon=horizon,
        variant=variant,
        params=params,
        master_seed=rng.master_seed,
        stream_path=rng.path,
    )


@dataclass
class StrategyReport:
    """Summary statistics of one policy over a frozen scenario set."""

    policy_name: str
    n_paths: int
    mean_tau: float
    sd_tau: float
    mean_cost: float
    sd_cost: float
    pfa: float                      # mean of 1 - P_tau
    cap_hits: int                   # paths force-announced at the horizon
    horizon: int
    taus: np.ndarray = field(repr=False)
    costs: np.ndarray = field(repr=False)
    p_taus: np.ndarray = field(repr=False)
    fingerprint: tuple = field(default=(), repr=False)

    def summary_dict(self) -> dict:
        return {
            "policy": self.policy_name,
            "n_paths": self.n_paths,
            "mean_tau": self.mean_tau,
            "sd_tau": self.sd_tau,
            "mean_cost": self.mean_cost,
            "sd_cost": self.sd_cost,
            "pfa": self.pfa,
            "cap_hits": self.cap_hits,
            "horizon": self.horizon,
        }


def evaluate_on(policy: Policy, paths: FrozenPaths, costs: CostParams) -> StrategyReport:
    """Apply `policy` to every frozen path and aggregate the outcomes.

    The stopping stage is the first t >= 1 where the policy announces,
    force-announcing at the horizon (counted as a cap hit) if it never
    does.
    """
    horizon = paths.horizon
    taus = np.empty(paths.n_paths)
    costs_out = np.empty(paths.n_paths)
    p_taus = np.empty(paths.n_paths)
    cap_hits = 0
    for n, path in enumerate(paths.paths):
        tau = horizon
        announced = False
        for t in range(1, horizon + 1):
            if policy.decide(path[t], t):
                tau = t
                announced = True
                break
        if not announced:
            cap_hits += 1
        p_path = [st.p for st in path[: tau + 1]]
        taus[n] = tau
        costs_out[n] = pathwise_cost(p_path, tau, costs)
        p_taus[n] = path[tau].p

    sd = float(np.std(taus, ddof=1)) if paths.n_paths > 1 else 0.0
    sd_cost = float(np.std(costs_out, ddof=1)) if paths.n_paths > 1 else 0.0
    return StrategyReport(
        policy_name=policy.name,
        n_paths=paths.n_paths,
        mean_tau=float(np.mean(taus)),
        sd_tau=sd,
        mean_cost=float(np.mean(costs_out)),
        sd_cost=sd_cost,
        pfa=float(np.mean(1.0 - p_taus)),
        cap_hits=cap_hits,
        horizon=horizon,
        taus=taus,
        costs=costs_out,
        p_taus=p_taus,
        fingerprint=paths.fingerprint(),
    )


def evaluate(
    policy: Policy,
    x0: ReducedState,
    n_paths: int,
    params: EpidemicParams,
    costs: CostParams,
    variant: ModelVariant,
    rng: RngStream,
    *,
    horizon: int = DEFAULT_HORIZON,
    noise: Optional[NoiseSampler] = None,
) -> StrategyReport:
    """Simulate a fresh frozen scenario set and evaluate `policy` on it."""
    paths = simulate_paths(x0, n_paths, horizon, params, variant, rng, noise=noise)
    return evaluate_on(policy, paths, costs)


@dataclass
class PairedComparison:
    """Scenario-by-scenario cost differences between two policies."""

    name_a: str
    name_b: str
    diffs: np.ndarray            # cost_a - cost_b per scenario
    frac_a_better: float         # strict wins of a
    frac_b_better: float
    mean_diff: float

    @property
    def n_paths(self) -> int:
        return len(self.diffs)


def paired_compare(report_a: StrategyReport, report_b: StrategyReport) -> PairedComparison:
    """Compare two reports computed on the same frozen scenario set."""
    if report_a.fingerprint != report_b.fingerprint:
        raise ValueError(
            "reports were not evaluated on the same frozen scenarios: "
            f"{report_a.fingerprint} vs {report_b.fingerprint}"
        )
    diffs = report_a.costs - report_b.costs
    return PairedComparison(
        name_a=report_a.policy_name,
        name_b=report_b.policy_name,
        diffs=diffs,
        frac_a_better=float(np.mean(diffs < 0)),
        frac_b_better=float(np.mean(diffs > 0)),
        mean_diff=float(np.mean(diffs)),
    )


def sweep_threshold_t(
    paths: FrozenPaths, costs: CostParams, t_values: Sequence[int]
) -> list[tuple[int, float]]:
    """Mean realized cost of fixed-stage announcement per candidate stage."""
    out = []
    for t_bar in t_values:
        report = evaluate_on(ThresholdT(t_bar), paths, costs)
        out.append((int(t_bar), report.mean_cost))
    return out
