"""Sequential regression Monte Carlo solver for the detection problem.

The solver builds one detection map per forward-time iteration t. A map is
a loess surrogate qhat(t, .) for the costs-to-go of waiting one more stage;
announcing is optimal wherever qhat exceeds the immediate false-alarm cost.
Iteration t simulates scenarios that stop at the first stage s whose state
falls in the iteration-(t-s) announce region (with the convention that the
iteration-0 region covers everything, so every scenario stops by stage t).
Past a configurable switch the scenario stopping rule freezes to the most
recent map (receding horizon), and the iteration loop terminates once the
surrogate stops changing in sup-norm on a fixed audit grid.

Designs grow sequentially: an initial Latin hypercube design is augmented
in batches drawn toward the current announce/wait boundary, where the sign
of qhat - d is still statistically ambiguous.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import parallel
from .costs import CostParams, immediate_cost, pathwise_cost
from .design import (
    AcquisitionKind,
    StateBox,
    acquisition_weight,
    boundary_probability,
    lhs,
    sample_indices,
)
from .loess import LoessConfig, LoessModel
from .loess import fit as loess_fit
from .reduced import ModelVariant, NoiseSampler, ReducedState, step
from .rng import RngStream
from .sir import EpidemicParams

# Stream-address labels under (master_seed, t, label, index).
LABEL_SCENARIO = 0
LABEL_DESIGN = 1
LABEL_BATCH = 2

MAP_FORMAT = "epidetect-map/1"


@dataclass(frozen=True)
class SrmcConfig:
    """Solver knobs: design sizes, acquisition, iteration control, seed."""

    master_seed: int
    n0: int = 200
    n_batch: int = 200
    n_end: int = 2000
    d_candidates: int = 2500
    acquisition: AcquisitionKind = AcquisitionKind.MIN
    t_max: int = 20
    mpc_switch: int = 5
    tol: Optional[float] = None  # None: 0.05 * c_delay; 0: run to t_max
    loess: LoessConfig = field(default_factory=LoessConfig)
    trace_s1: Optional[int] = None  # S1 slice for 3-D boundary traces

    def __post_init__(self):
        if self.n0 < 1 or self.n_end < self.n0:
            raise ValueError(f"need 1 <= n0 <= n_end, got n0={self.n0}, n_end={self.n_end}")
        if self.n_batch < 1:
            raise ValueError(f"n_batch must be positive, got {self.n_batch}")
        if (self.n_end - self.n0) % self.n_batch != 0:
            raise ValueError(
                f"n_end - n0 = {self.n_end - self.n0} not divisible by n_batch = {self.n_batch}"
            )
        if self.d_candidates < 1:
            raise ValueError(f"d_candidates must be positive, got {self.d_candidates}")
        if self.t_max < 1:
            raise ValueError(f"t_max must be at least 1, got {self.t_max}")
        if self.mpc_switch < 1:
            raise ValueError(f"mpc_switch must be at least 1, got {self.mpc_switch}")
        if self.tol is not None and not (self.tol >= 0 or math.isinf(self.tol)):
            raise ValueError(f"tol must be nonnegative, got {self.tol}")
        object.__setattr__(self, "acquisition", AcquisitionKind(self.acquisition))

    @property
    def sequential(self) -> bool:
        return self.n_end > self.n0


def default_box(params: EpidemicParams, variant: ModelVariant) -> StateBox:
    """Regression domain: detection happens while I1 is small.

    I1 spans up to a fifth of the pool; S1 (3-D variant) spans the upper
    half of the pool; P spans [0, 0.999] since P = 1 forces announcement.
    """
    m1 = params.pool_sizes[0]
    i_hi = max(1, m1 // 5)
    p_bounds = (0.0, 0.999)
    if variant is ModelVariant.FULL3D:
        return StateBox(
            lower=(m1 // 2, 0.0, p_bounds[0]),
            upper=(m1, i_hi, p_bounds[1]),
            integer=(True, True, False),
        )
    return StateBox(
        lower=(0.0, p_bounds[0]),
        upper=(i_hi, p_bounds[1]),
        integer=(True, False),
    )


def state_from_location(
    loc: np.ndarray, variant: ModelVariant, params: EpidemicParams
) -> ReducedState:
    """Initial detection state at a design location."""
    m1 = params.pool_sizes[0]
    if variant is ModelVariant.FULL3D:
        i1 = int(round(loc[1]))
        s1 = min(int(round(loc[0])), m1 - i1)
        return ReducedState(s1, i1, float(loc[2]))
    i1 = int(round(loc[0]))
    return ReducedState(max(m1 - i1, 0), i1, float(loc[1]))


def draw_design(
    box: StateBox,
    count: int,
    rng: RngStream,
    params: EpidemicParams,
    variant: ModelVariant,
) -> np.ndarray:
    """LHS locations in `box`, repaired so S1 + I1 never exceeds the pool."""
    locs = lhs(box, count, rng)
    if variant is ModelVariant.FULL3D:
        m1 = params.pool_sizes[0]
        np.minimum(locs[:, 0], m1 - locs[:, 1], out=locs[:, 0])
    return locs


class DetectionMap:
    """Announce/wait partition induced by a fitted surrogate at one iteration."""

    def __init__(
        self,
        surrogate: LoessModel,
        costs: CostParams,
        variant: ModelVariant,
        iteration: int,
        domain: StateBox,
        epidemic: EpidemicParams,
        master_seed: int,
        build_info: Optional[dict] = None,
    ):
        self.surrogate = surrogate
        self.costs = costs
        self.variant = ModelVariant(variant)
        self.iteration = int(iteration)
        self.domain = domain
        self.epidemic = epidemic
        self.master_seed = int(master_seed)
        self.build_info = build_info or {}

    def location(self, x: ReducedState) -> np.ndarray:
        if self.variant is ModelVariant.FULL3D:
            return np.array([x.s1, x.i1, x.p], dtype=float)
        return np.array([x.i1, x.p], dtype=float)

    def score_location(self, loc) -> float:
        """qhat(loc) - d(loc); positive means announce."""
        loc = np.asarray(loc, dtype=float)
        return self.surrogate.predict_mean(loc) - immediate_cost(float(loc[-1]), self.costs)

    def score_locations(self, locs) -> np.ndarray:
        locs = np.asarray(locs, dtype=float)
        return self.surrogate.predict_mean_many(locs) - immediate_cost(locs[:, -1], self.costs)

    def announce_location(self, loc) -> bool:
        return self.score_location(loc) > 0.0

    def announce(self, x: ReducedState) -> bool:
        return self.announce_location(self.location(x))

    # -- persistence ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": MAP_FORMAT,
            "iteration": self.iteration,
            "variant": self.variant.value,
            "master_seed": self.master_seed,
            "epidemic": {
                "beta": self.epidemic.beta,
                "gamma": self.epidemic.gamma,
                "alpha": self.epidemic.alpha,
                "pool_sizes": list(self.epidemic.pool_sizes),
                "sigma_delta": self.epidemic.sigma_delta,
            },
            "costs": {"c_fa": self.costs.c_fa, "c_delay": self.costs.c_delay},
            "loess": asdict(self.surrogate.config),
            "domain": {
                "lower": list(self.domain.lower),
                "upper": list(self.domain.upper),
                "integer": list(self.domain.integer),
            },
            "design": {
                "locations": self.surrogate.inputs.tolist(),
                "responses": self.surrogate.responses.tolist(),
            },
            "build_info": self.build_info,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DetectionMap":
        if doc.get("format") != MAP_FORMAT:
            raise ValueError(f"unsupported map document format: {doc.get('format')!r}")
        epidemic = EpidemicParams(
            beta=doc["epidemic"]["beta"],
            gamma=doc["epidemic"]["gamma"],
            alpha=doc["epidemic"]["alpha"],
            pool_sizes=tuple(doc["epidemic"]["pool_sizes"]),
            sigma_delta=doc["epidemic"]["sigma_delta"],
        )
        costs = CostParams(**doc["costs"])
        loess_cfg = LoessConfig(**doc["loess"])
        domain = StateBox(
            lower=tuple(doc["domain"]["lower"]),
            upper=tuple(doc["domain"]["upper"]),
            integer=tuple(doc["domain"]["integer"]),
        )
        surrogate = loess_fit(
            np.array(doc["design"]["locations"], dtype=float),
            np.array(doc["design"]["responses"], dtype=float),
            loess_cfg,
        )
        return cls(
            surrogate=surrogate,
            costs=costs,
            variant=ModelVariant(doc["variant"]),
            iteration=doc["iteration"],
            domain=domain,
            epidemic=epidemic,
            master_seed=doc["master_seed"],
            build_info=doc.get("build_info", {}),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "DetectionMap":
        return cls.from_dict(json.loads(Path(path).read_text()))


def path_and_cost(
    x0: ReducedState,
    t: int,
    maps: Sequence[DetectionMap],
    params: EpidemicParams,
    costs: CostParams,
    variant: ModelVariant,
    rng: RngStream,
    *,
    mpc_switch: Optional[int] = None,
    noise: Optional[NoiseSampler] = None,
    stepper=None,
) -> tuple[int, float]:
    """Simulate one scenario from `x0` under the iteration-t stopping rule.

    The scenario stops at the first stage s in 1..t whose state lies in the
    announce region of map t - s (map 0 announces everywhere, so s = t is a
    guaranteed stop). With `mpc_switch` set and t beyond it, membership is
    instead tested against the single latest map while the stage cap s <= t
    is kept. Returns (tau, realized pathwise cost).

    `stepper(state, rng) -> state` overrides the one-stage dynamics (used
    by tests with deterministic dynamics).
    """
    if t < 1:
        raise ValueError(f"iteration t must be at least 1, got {t}")
    if len(maps) < t - 1:
        raise ValueError(f"iteration {t} needs {t - 1} earlier maps, got {len(maps)}")
    mpc = mpc_switch is not None and t > mpc_switch

    p_path = [x0.p]
    x = x0
    tau = t
    for s in range(1, t + 1):
        if stepper is None:
            x = step(x, params, variant, rng, noise=noise)
        else:
            x = stepper(x, rng)
        p_path.append(x.p)
        if s == t:
            tau = s  # map 0 announces everywhere
            break
        dmap = maps[t - 2] if mpc else maps[t - s - 1]
        if dmap.announce(x):
            tau = s
            break
    return tau, pathwise_cost(p_path, tau, costs)


def build_map(
    t: int,
    maps: Sequence[DetectionMap],
    config: SrmcConfig,
    params: EpidemicParams,
    costs: CostParams,
    variant: ModelVariant,
    *,
    box: Optional[StateBox] = None,
    workers: int = 1,
    noise: Optional[NoiseSampler] = None,
) -> DetectionMap:
    """One sequential-design iteration: simulate, fit, augment toward the boundary.

    Starts from an LHS design of n0 scenario launch points, simulates their
    stopping costs under the maps built so far, fits the loess surrogate,
    then repeatedly scores a fresh LHS candidate set by the probability of
    sign error in qhat - d, draws n_batch new points multinomially by the
    acquisition weight, simulates and refits, until the design holds n_end
    points. Scenario n of iteration t always consumes the random stream
    derived from (master_seed, t, n), so results do not depend on batch
    scheduling or worker count.
    """
    variant = ModelVariant(variant)
    if box is None:
        box = default_box(params, variant)
    root = RngStream(config.master_seed)

    def simulate_block(locs: np.ndarray, start: int) -> np.ndarray:
        def run(j: int) -> float:
            stream = root.derive(t, LABEL_SCENARIO, start + j)
            x0 = state_from_location(locs[j], variant, params)
            _tau, q = path_and_cost(
                x0, t, maps, params, costs, variant, stream,
                mpc_switch=config.mpc_switch, noise=noise,
            )
            return q

        return np.array(parallel.indexed_map(run, locs.shape[0], workers))

    design = draw_design(box, config.n0, root.derive(t, LABEL_DESIGN, 0), params, variant)
    responses = simulate_block(design, 0)
    model = loess_fit(design, responses, config.loess)

    rounds: list[dict] = []
    n = config.n0
    rnd = 1
    while n < config.n_end:
        cands = draw_design(
            box, config.d_candidates, root.derive(t, LABEL_DESIGN, rnd), params, variant
        )
        mu, se = model.predict_many(cands)
        pb = boundary_probability(mu, se, immediate_cost(cands[:, -1], costs))
        weights = acquisition_weight(pb, config.acquisition)
        idx, fallback = sample_indices(
            weights, config.n_batch, root.derive(t, LABEL_BATCH, rnd)
        )
        new_locs = cands[idx]
        new_resp = simulate_block(new_locs, n)
        design = np.vstack([design, new_locs])
        responses = np.concatenate([responses, new_resp])
        model = loess_fit(design, responses, config.loess)
        rounds.append({
            "round": rnd,
            "added": int(config.n_batch),
            "uniform_fallback": bool(fallback),
            # fraction of the batch inside the p >= 0.1 ambiguity band of
            # the fit that guided the draw (design-concentration audit)
            "frac_band_p10": float(np.mean(pb[idx] >= 0.1)),
        })
        n += config.n_batch
        rnd += 1

    return DetectionMap(
        surrogate=model,
        costs=costs,
        variant=variant,
        iteration=t,
        domain=box,
        epidemic=params,
        master_seed=config.master_seed,
        build_info={"rounds": rounds, "n_design": int(design.shape[0]),
                    "sequential": config.sequential},
    )


def audit_grid(box: StateBox, variant: ModelVariant) -> np.ndarray:
    """Fixed lattice on which surrogate convergence is measured."""
    per_axis = 20 if variant is ModelVariant.FULL3D else 50
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(box.lower, box.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def boundary_in_p(
    dmap: DetectionMap,
    prefix: Sequence[float],
    p_lo: float = 0.0,
    p_hi: float = 0.999,
    resolution: float = 1e-3,
) -> float:
    """Announce-boundary crossing in P along one fixed lattice line.

    `prefix` fixes the leading coordinates (S1, I1 or just I1). Bisects the
    sign of qhat - d. Returns `p_lo` when announcing holds on the whole
    line and NaN when waiting holds everywhere below `p_hi`.
    """
    prefix = list(prefix)

    def score(p: float) -> float:
        return dmap.score_location(np.array(prefix + [p]))

    lo, hi = p_lo, p_hi
    if score(lo) > 0:
        return lo
    if score(hi) <= 0:
        return math.nan
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if score(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def boundary_trace(
    dmap: DetectionMap,
    i_values: Sequence[float],
    s_value: Optional[float] = None,
) -> np.ndarray:
    """Boundary crossing in P per I1 lattice value (fixed S1 slice in 3-D)."""
    out = np.empty(len(i_values))
    for j, i1 in enumerate(i_values):
        prefix = [i1] if s_value is None else [s_value, i1]
        out[j] = boundary_in_p(dmap, prefix, dmap.domain.lower[-1], dmap.domain.upper[-1])
    return out


def trace_distance(trace_a: np.ndarray, trace_b: np.ndarray) -> float:
    """Sup distance in P between two boundary traces.

    Lines where waiting holds everywhere (NaN) count as a boundary at 1.
    """
    a = np.where(np.isnan(trace_a), 1.0, trace_a)
    b = np.where(np.isnan(trace_b), 1.0, trace_b)
    return float(np.max(np.abs(a - b)))


@dataclass
class MapSequence:
    """Solve result: one map per iteration plus the convergence record."""

    maps: list[DetectionMap]
    params: EpidemicParams
    costs: CostParams
    variant: ModelVariant
    config: SrmcConfig
    box: StateBox
    sup_diffs: list[float]            # |qhat_t - qhat_{t-1}|_sup on the audit grid
    traces: list[np.ndarray]          # boundary trace per iteration
    trace_i_values: np.ndarray
    trace_s_value: Optional[float]
    converged: bool
    warning: Optional[str] = None

    @property
    def iterations(self) -> int:
        return len(self.maps)

    def final(self) -> DetectionMap:
        return self.maps[-1]

    def announce(self, iteration: int, x: ReducedState) -> bool:
        """Announce decision of map `iteration`; iteration <= 0 announces everywhere."""
        if iteration <= 0:
            return True
        return self.maps[iteration - 1].announce(x)


def solve(
    config: SrmcConfig,
    params: EpidemicParams,
    costs: CostParams,
    variant: ModelVariant,
    *,
    box: Optional[StateBox] = None,
    workers: int = 1,
    noise: Optional[NoiseSampler] = None,
    progress=None,
) -> MapSequence:
    """Iterate map building until the surrogate stabilizes or t_max is hit.

    Convergence is declared when the sup-norm difference of consecutive
    surrogates over the fixed audit grid drops below the tolerance
    (default 0.05 * c_delay; 0 disables the check). Boundary traces are
    recorded per iteration for convergence reporting.
    """
    variant = ModelVariant(variant)
    if box is None:
        box = default_box(params, variant)
    tol = config.tol if config.tol is not None else 0.05 * costs.c_delay
    grid = audit_grid(box, variant)

    if variant is ModelVariant.FULL3D:
        s_value = float(config.trace_s1) if config.trace_s1 is not None \
            else float(box.upper[0] - 10)
        i_axis = np.unique(grid[:, 1])
    else:
        s_value = None
        i_axis = np.unique(grid[:, 0])

    maps: list[DetectionMap] = []
    traces: list[np.ndarray] = []
    sup_diffs: list[float] = []
    q_prev: Optional[np.ndarray] = None
    converged = False

    for t in range(1, config.t_max + 1):
        dmap = build_map(
            t, maps, config, params, costs, variant,
            box=box, workers=workers, noise=noise,
        )
        maps.append(dmap)
        q_grid = dmap.surrogate.predict_mean_many(grid)
        traces.append(boundary_trace(dmap, i_axis, s_value))
        if q_prev is not None:
            sup = float(np.max(np.abs(q_grid - q_prev)))
            sup_diffs.append(sup)
            if progress is not None:
                progress(t, sup)
            if tol > 0 and sup < tol:
                converged = True
                break
            q_prev = q_grid
        else:
            if progress is not None:
                progress(t, math.nan)
            q_prev = q_grid

    warning = None
    if not converged and tol > 0:
        warning = (
            f"surrogate not converged after {len(maps)} iterations "
            f"(last sup diff {sup_diffs[-1]:.4g} vs tol {tol:.4g})"
        )
    return MapSequence(
        maps=maps,
        params=params,
        costs=costs,
        variant=variant,
        config=config,
        box=box,
        sup_diffs=sup_diffs,
        traces=traces,
        trace_i_values=np.asarray(i_axis, dtype=float),
        trace_s_value=s_value,
        converged=converged,
        warning=warning,
    )
