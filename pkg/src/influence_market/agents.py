"""
Agent populations for the mechanism: synthetic linear worlds, truthful and
heuristic reporting strategies, population simulations, and the Monte-Carlo
best-response probe.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .mechanism import MechanismConfig, PaymentLedger, run_mechanism
from .mixture import MixtureParams
from .regression import DataPoint, Dataset, Parameters, fit, risk

STRATEGIES = ("truthful", "heuristic", "perturbed")


@dataclass
class AgentProfile:
    """One agent: strategy, effort spent, and participation flag.

    Truthful (and perturbed) agents pay the observation effort; heuristic
    agents spend nothing. ``deviation`` only applies to perturbed agents, who
    observe truthfully and then shift the reported target.
    """

    agent_id: object
    strategy: str
    effort: float = 0.0
    opt_in: bool = True
    deviation: float = 0.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise DomainError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.strategy == "heuristic" and self.effort != 0.0:
            raise DomainError("heuristic agents exert zero effort")
        if self.effort < 0:
            raise DomainError("effort must be non-negative")


@dataclass(frozen=True)
class WorldModel:
    """Ground truth generating truthful observations.

    noise_std may be zero only for degenerate checks; generated worlds always
    use unit noise.
    """

    true_params: Parameters
    noise_std: float = 1.0
    x_bounds: tuple = (-1.0, 1.0)
    heuristic_y_bounds: tuple = (-3.0, 3.0)

    def __post_init__(self):
        if self.noise_std < 0:
            raise DomainError("noise_std must be non-negative")
        if not self.x_bounds[1] > self.x_bounds[0]:
            raise DomainError("x_bounds must be a non-degenerate interval")
        if not self.heuristic_y_bounds[1] > self.heuristic_y_bounds[0]:
            raise DomainError("heuristic_y_bounds must be a non-degenerate interval")

    @property
    def dimension(self) -> int:
        return self.true_params.dimension


def generate_world(seed: int) -> WorldModel:
    """Random 1-D linear world: slope = tan(angle) for an angle uniform in
    (-pi/2, pi/2), intercept standard normal, unit observation noise,
    features uniform in [-1, 1]."""
    rng = np.random.default_rng(seed)
    angle = rng.uniform(-np.pi / 2, np.pi / 2)
    bias = rng.normal()
    return WorldModel(
        true_params=Parameters(np.array([np.tan(angle)]), bias),
        noise_std=1.0,
        x_bounds=(-1.0, 1.0),
    )


def truthful_report(world: WorldModel, seed, agent_id=None, arrival_index=0) -> DataPoint:
    """Observe the world: x uniform in its bounds, y on the true line plus
    Gaussian noise."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(world.x_bounds[0], world.x_bounds[1], size=world.dimension)
    y = float(world.true_params.weights @ x + world.true_params.bias)
    if world.noise_std > 0:
        y += rng.normal(0.0, world.noise_std)
    return DataPoint(x, y, agent_id=agent_id, arrival_index=arrival_index)


def heuristic_report(world: WorldModel, seed, agent_id=None, arrival_index=0) -> DataPoint:
    """Uninformed report: the truthful feature marginal, but y uniform in the
    heuristic bounds and independent of x."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(world.x_bounds[0], world.x_bounds[1], size=world.dimension)
    y = rng.uniform(world.heuristic_y_bounds[0], world.heuristic_y_bounds[1])
    return DataPoint(x, float(y), agent_id=agent_id, arrival_index=arrival_index)


def _report_for(profile: AgentProfile, world: WorldModel, rng, arrival_index: int) -> DataPoint:
    if profile.strategy == "heuristic":
        return heuristic_report(world, rng, profile.agent_id, arrival_index)
    point = truthful_report(world, rng, profile.agent_id, arrival_index)
    if profile.strategy == "perturbed" and profile.deviation:
        return DataPoint(point.x, point.y + profile.deviation, profile.agent_id, arrival_index)
    return point


def build_population(n_agents: int, p_truthful: float, effort: float = 0.0) -> list:
    """Exact-count population: round(p * n) truthful agents, rest heuristic."""
    if not 0.0 <= p_truthful <= 1.0:
        raise DomainError("p_truthful must lie in [0, 1]")
    n_truthful = int(round(p_truthful * n_agents))
    profiles = [AgentProfile(f"T{i}", "truthful", effort=effort) for i in range(n_truthful)]
    profiles += [AgentProfile(f"H{i}", "heuristic") for i in range(n_agents - n_truthful)]
    return profiles


def report_stream(profiles: Sequence[AgentProfile], world: WorldModel, seed: int) -> Dataset:
    """One report per opted-in agent, arrival order uniformly shuffled."""
    rng = np.random.default_rng(seed)
    active = [p for p in profiles if p.opt_in]
    order = rng.permutation(len(active))
    points = []
    for arrival, idx in enumerate(order):
        points.append(_report_for(active[idx], world, rng, arrival))
    return Dataset.from_points(points)


def independent_test_set(world: WorldModel, n_test: int, seed: int) -> Dataset:
    rng = np.random.default_rng(seed)
    points = [truthful_report(world, rng, None, i) for i in range(n_test)]
    return Dataset.from_points(points)


@dataclass
class SimulationResult:
    ledger: PaymentLedger
    profiles: list
    mean_payments: dict
    utilities: dict
    empirical_truthful_fraction: float
    test_mode: str

    @property
    def risk_trace(self) -> list:
        return self.ledger.risk_trace


def simulate_population(
    n_agents: int,
    p_truthful: float,
    world: WorldModel,
    mechanism_config: MechanismConfig,
    test_mode: str = "independent",
    seed: int = 0,
    n_test: int = 200,
    profiles: Optional[list] = None,
) -> SimulationResult:
    """Run a truthful/heuristic population through the mechanism.

    ``test_mode="independent"`` draws the test set fresh from the truthful
    distribution; ``"from-reports"`` withholds a without-replacement sample
    of the reports as the test set (those reports are not trained on or
    paid). Deterministic under ``seed``.
    """
    if test_mode not in ("independent", "from-reports"):
        raise DomainError(f"unknown test_mode {test_mode!r}")
    if profiles is None:
        profiles = build_population(n_agents, p_truthful, effort=mechanism_config.effort_cost)
    stream = report_stream(profiles, world, seed)
    if test_mode == "independent":
        test = independent_test_set(world, n_test, seed + 1)
    else:
        rng = np.random.default_rng(seed + 1)
        if n_test >= len(stream):
            raise DomainError("from-reports test mode needs n_test < number of reports")
        held = rng.choice(len(stream), size=n_test, replace=False)
        keep = np.setdiff1d(np.arange(len(stream)), held)
        test = stream.subset(held)
        stream = stream.subset(keep)
    ledger = run_mechanism(stream, test, mechanism_config, seed=seed + 2)

    by_agent = ledger.payments_by_agent()
    strategy_of = {p.agent_id: p.strategy for p in profiles}
    effort_of = {p.agent_id: p.effort for p in profiles}
    sums: dict = {}
    counts: dict = {}
    utilities: dict = {}
    for agent_id, payment in by_agent.items():
        strat = strategy_of[agent_id]
        sums[strat] = sums.get(strat, 0.0) + payment
        counts[strat] = counts.get(strat, 0) + 1
        utilities[agent_id] = payment - effort_of[agent_id]
    mean_payments = {s: sums[s] / counts[s] for s in sums}
    n_truthful_reports = sum(
        1 for aid in by_agent if strategy_of[aid] in ("truthful", "perturbed")
    )
    empirical_p = n_truthful_reports / len(by_agent) if by_agent else 0.0
    return SimulationResult(
        ledger=ledger,
        profiles=list(profiles),
        mean_payments=mean_payments,
        utilities=utilities,
        empirical_truthful_fraction=empirical_p,
        test_mode=test_mode,
    )


def opt_out_followup(
    result: SimulationResult,
    world: WorldModel,
    mechanism_config: MechanismConfig,
    seed: int = 0,
    n_test: int = 200,
) -> SimulationResult:
    """Re-run with agents whose payment minus effort was negative opted out."""
    updated = []
    for p in result.profiles:
        utility = result.utilities.get(p.agent_id)
        opted = p.opt_in and not (utility is not None and utility < 0)
        updated.append(replace(p, opt_in=opted))
    if not any(p.opt_in for p in updated):
        raise DomainError("every agent opted out; no follow-up round to run")
    return simulate_population(
        n_agents=len(updated),
        p_truthful=0.0,  # ignored when profiles are given
        world=world,
        mechanism_config=mechanism_config,
        test_mode=result.test_mode,
        seed=seed,
        n_test=n_test,
        profiles=updated,
    )


def best_response_check(
    world: WorldModel,
    n_others: int,
    deviation_grid: Sequence[float],
    seed: int = 0,
    n_trials: int = 1000,
    n_test: int = 100,
) -> list:
    """Mean influence of reporting the observed target plus each deviation.

    For each trial, n_others truthful reports train the model; the probed
    agent observes truthfully and reports y + c for every c on the grid. The
    influence is the drop in independent-test risk from adding the report
    (exactly Theorem-style scoring: the leave-one-out model is the others'
    model). Returns rows of (deviation, mean_influence).

    Raises
    ------
    DomainError
        If n_others < d + 1: the others' model is underdetermined and the
        best-response question is not well posed.
    """
    d = world.dimension
    if n_others < d + 1:
        raise DomainError(
            f"best_response_check needs n_others >= d + 1 = {d + 1}, got {n_others}"
        )
    grid = [float(c) for c in deviation_grid]
    rng = np.random.default_rng(seed)
    sums = np.zeros(len(grid))
    for _ in range(n_trials):
        others = Dataset.from_points(
            [truthful_report(world, rng, None, i) for i in range(n_others)]
        )
        test = Dataset.from_points(
            [truthful_report(world, rng, None, i) for i in range(n_test)]
        )
        observed = truthful_report(world, rng)
        model = fit(others)
        base = risk(test, model.params)
        x_aug = np.concatenate([observed.x, [1.0]])
        u = model.gram_inverse @ x_aug
        h = float(x_aug @ u)
        theta = model.params.as_vector()
        test_aug = test.augmented()
        for i, c in enumerate(grid):
            resid = (observed.y + c) - float(x_aug @ theta)
            theta_new = theta + u * (resid / (1.0 + h))
            res = test.y - test_aug @ theta_new
            sums[i] += base - float(np.mean(res * res))
    return [
        {"deviation": grid[i], "mean_influence": sums[i] / n_trials}
        for i in range(len(grid))
    ]


def quadratic_peak(rows: Sequence[dict]) -> float:
    """Location of the peak of a quadratic fitted to (deviation, mean_influence)."""
    c = np.array([r["deviation"] for r in rows])
    v = np.array([r["mean_influence"] for r in rows])
    coeffs = np.polyfit(c, v, 2)
    if coeffs[0] >= 0:
        raise DomainError("fitted quadratic is not concave; no interior peak")
    return float(-coeffs[1] / (2.0 * coeffs[0]))


def closed_form_mixture(
    world: WorldModel,
    init_count: int,
    n_collected: int,
    batch_size: int = 1,
    truthful_fraction: float = 1.0,
) -> MixtureParams:
    """Closed-form mixture inputs for a linear world with uniform features.

    The heuristic distribution shares the truthful feature marginal with an
    independent uniform target, so its best model is the flat line at the
    target mean: inherent risk = uniform variance, and the squared model gap
    integrates (mean_y - bias - slope . x)^2 over the feature box.
    """
    lo, hi = world.x_bounds
    mean_x = (lo + hi) / 2.0
    var_x = (hi - lo) ** 2 / 12.0
    y_lo, y_hi = world.heuristic_y_bounds
    mean_heuristic = (y_lo + y_hi) / 2.0
    w = world.true_params.weights
    delta = mean_heuristic - world.true_params.bias - float(np.sum(w)) * mean_x
    gap = delta * delta + var_x * float(w @ w)
    return MixtureParams(
        init_count=init_count,
        n_collected=n_collected,
        batch_size=batch_size,
        model_gap=gap,
        inherent_risk_heuristic=(y_hi - y_lo) ** 2 / 12.0,
        inherent_risk_truthful=world.noise_std**2,
        truthful_fraction=truthful_fraction,
    )
