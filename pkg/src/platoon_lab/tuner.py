"""Genetic-algorithm gain estimation.

Searches (k_d, k_v, k_c) for either model kind (the asymmetric model ties
k_d1 = k_d2 = k_d; the symmetric one fixes k_d2 = 0), minimizing a weighted
sum of the speed-tracking and time-gap objectives on a short design run with
a trapezoidal leader profile. Candidates whose design run collides or
diverges, or that fail the analytic screens, receive a large penalty plus a
distance-to-feasibility term so the search can climb back out.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .domain import ControlGains, PlatoonScenario, PowertrainParams, TimeGapPolicy, TruckParams
from .simulator import gain_design_profile, run_platoon
from .stability import local_conditions, string_stability_check

PENALTY = 1e6
GENE_NAMES = ("k_d", "k_v", "k_c")


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 50
    generations: int = 100
    tournament_size: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float = 0.2
    mutation_scale: float = 0.1          # fraction of each gene's bound width
    elitism_count: int = 2
    gain_bounds: tuple[tuple[float, float], ...] = (
        (1e-4, 5.0),   # k_d
        (1e-4, 5.0),   # k_v
        (1e-4, 5.0),   # k_c
    )
    w1: float = 0.5                      # weight on the speed objective
    w2: float = 0.5                      # weight on the time-gap objective
    seed: int | None = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError(f"population_size must be >= 2 (got {self.population_size})")
        if any(lo >= hi for lo, hi in self.gain_bounds):
            raise ValueError(f"bounds must be ordered (got {self.gain_bounds})")
        if self.w1 < 0 or self.w2 < 0 or abs(self.w1 + self.w2 - 1.0) > 1e-12:
            raise ValueError(f"weights must be >= 0 and sum to 1 (got {self.w1}, {self.w2})")


@dataclass
class Candidate:
    gains: ControlGains
    fitness: float
    feasible: bool
    y1: float = float("nan")
    y2: float = float("nan")


@dataclass
class GAResult:
    best: Candidate
    best_history: list[float] = field(default_factory=list)
    mean_history: list[float] = field(default_factory=list)
    config: GAConfig | None = None
    model_kind: str = "asymmetric"


def genes_to_gains(genes, model_kind: str) -> ControlGains:
    k_d, k_v, k_c = (float(g) for g in genes)
    if model_kind == "asymmetric":
        return ControlGains(k_d1=k_d, k_d2=k_d, k_v=k_v, k_c=k_c,
                            model_kind="asymmetric")
    return ControlGains(k_d1=k_d, k_d2=0.0, k_v=k_v, k_c=k_c,
                        model_kind="symmetric")


def design_scenario(model_kind: str, lag: float = 0.1, delay: float = 0.1,
                    tg_des: float = 0.8, follower_count: int = 5,
                    step: float = 0.001) -> PlatoonScenario:
    """Short tuning scenario on the trapezoidal design profile.

    The most conservative achievable time gap (0.8 s) is used so gains that
    behave here also behave at larger gaps.
    """
    profile = gain_design_profile()
    return PlatoonScenario(
        follower_count=follower_count,
        truck_params=TruckParams(),
        powertrain=PowertrainParams(lag=lag, delay=delay),
        gains=genes_to_gains((1.0, 1.0, 0.01), model_kind),  # placeholder, replaced per candidate
        policy=TimeGapPolicy(T_g_des=tg_des, v_des=31.44),
        leader_profile=profile,
        duration=profile.t_end,
        step=step,
    )


def evaluate_candidate(gains: ControlGains, scenario: PlatoonScenario,
                       w1: float = 0.5, w2: float = 0.5) -> Candidate:
    """Simulate one gain set on the design scenario and score it.

    Feasibility requires a completed run, a non-degenerate local-stability
    report, and (for the asymmetric model) the string-stability sup below
    one at the design time gap. Infeasible candidates get PENALTY plus a
    distance term: the unfinished fraction of the run, or the sup excess.
    """
    scenario = replace(scenario, gains=gains)
    trace = run_platoon(scenario, record_stride=10_000, warmup_s=0.0)
    y1 = trace.summary["y1_mean"]
    y2 = trace.summary["y2_mean"]

    if trace.status != "completed":
        unfinished = 1.0 - trace.term_step / max(1, scenario.n_steps)
        return Candidate(gains, PENALTY + unfinished, False, y1, y2)

    local = local_conditions(gains, scenario.powertrain.lag, scenario.policy.T_g_des)
    if local.degenerate:
        return Candidate(gains, PENALTY + 1.0, False, y1, y2)

    if gains.model_kind == "asymmetric":
        string = string_stability_check(gains, scenario.powertrain.lag,
                                        scenario.powertrain.delay,
                                        scenario.policy.T_g_des)
        if not string.stable:
            return Candidate(gains, PENALTY + (string.sup_magnitude - 1.0), False, y1, y2)

    return Candidate(gains, w1 * y1 + w2 * y2, True, y1, y2)


def ga_optimize(config: GAConfig, model_kind: str = "asymmetric", *,
                evaluate=None, scenario: PlatoonScenario | None = None,
                map_fn=map) -> GAResult:
    """Generational GA: tournament selection, blend crossover, Gaussian
    mutation, elitism.

    ``evaluate(genes) -> Candidate`` may be injected (surrogate objectives in
    tests); the default simulates on the design scenario. ``map_fn`` lets
    callers evaluate a generation concurrently; results are consumed in
    candidate order so the run stays deterministic for a given seed.
    """
    if model_kind not in ("asymmetric", "symmetric"):
        raise ValueError(f"model_kind must be asymmetric or symmetric (got {model_kind!r})")
    rng = np.random.default_rng(config.seed)
    bounds = np.asarray(config.gain_bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    width = hi - lo
    n_genes = len(bounds)

    if evaluate is None:
        base = scenario if scenario is not None else design_scenario(model_kind)

        def evaluate(genes):
            return evaluate_candidate(genes_to_gains(genes, model_kind), base,
                                      config.w1, config.w2)

    population = rng.uniform(lo, hi, size=(config.population_size, n_genes))
    scored = list(map_fn(evaluate, [population[i] for i in range(len(population))]))
    best_history, mean_history = [], []

    def record(generation_scored):
        fits = np.array([c.fitness for c in generation_scored])
        best_history.append(float(fits.min()))
        mean_history.append(float(fits.mean()))

    record(scored)

    def tournament():
        picks = rng.integers(0, config.population_size, size=config.tournament_size)
        return min(picks, key=lambda i: scored[i].fitness)

    for _ in range(config.generations):
        order = np.argsort([c.fitness for c in scored], kind="stable")
        elites = [population[i].copy() for i in order[:config.elitism_count]]

        children = []
        while len(children) < config.population_size - config.elitism_count:
            a, b = population[tournament()], population[tournament()]
            if rng.random() < config.crossover_rate:
                low = np.minimum(a, b)
                high = np.maximum(a, b)
                span = high - low
                child = rng.uniform(low - 0.1 * span, high + 0.1 * span)
            else:
                child = (a if rng.random() < 0.5 else b).copy()
            mutate = rng.random(n_genes) < config.mutation_rate
            child = child + mutate * rng.normal(0.0, config.mutation_scale * width)
            children.append(np.clip(child, lo, hi))

        population = np.vstack([np.array(elites), np.array(children)])
        elite_scored = [scored[i] for i in order[:config.elitism_count]]
        new_scored = list(map_fn(evaluate, [population[i] for i in
                                            range(config.elitism_count, len(population))]))
        scored = elite_scored + new_scored
        record(scored)

    feasible = [c for c in scored if c.feasible]
    pool = feasible if feasible else scored
    best = min(pool, key=lambda c: c.fitness)
    return GAResult(best=best, best_history=best_history,
                    mean_history=mean_history, config=config,
                    model_kind=model_kind)
