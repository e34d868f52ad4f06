"""
Sequential data-acquisition mechanism: uniform initialization, batched
influence scoring (inclusive or exclusive of the current batch), optional
closed-form score normalization, and the resulting payment ledger.

The batch loop is inherently sequential; scoring inside one batch is
independent across points and reuses a single fitted model per batch, so the
Hessian inverse is computed once per batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, EmptyStream, InsufficientInitialization
from .influence import (
    _mean_test_gradient,
    exact_influences,
    first_order_influences,
    second_order_influences,
)
from .mixture import MixtureParams, correction_exclusive, correction_inclusive
from .regression import Dataset, FittedModel, fit, residuals, risk

MODES = ("inclusive", "exclusive")
NORMALIZATIONS = ("none", "closed-form-D")
INFLUENCE_METHODS = ("exact", "first-order", "second-order")


@dataclass(frozen=True)
class MechanismConfig:
    """Knobs of one mechanism run.

    batch_size points are scored per batch; ``mode`` picks whether the
    current batch is included in the scoring model (scored as-if-removed) or
    excluded (scored as-if-added). ``init_count`` uniform points inside
    ``init_x_bounds`` x ``init_y_bounds`` seed the model. Payments are
    payment_scale times the (optionally normalized) score and may be
    negative.
    """

    batch_size: int = 1
    mode: str = "inclusive"
    init_count: int = 0
    init_x_bounds: tuple = (-1.0, 1.0)
    init_y_bounds: tuple = (-3.0, 3.0)
    effort_cost: float = 0.0
    payment_scale: float = 1.0
    normalization: str = "none"
    influence_method: str = "exact"
    ridge: float = 0.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.normalization not in NORMALIZATIONS:
            raise DomainError(
                f"normalization must be one of {NORMALIZATIONS}, got {self.normalization!r}"
            )
        if self.influence_method not in INFLUENCE_METHODS:
            raise DomainError(
                f"influence_method must be one of {INFLUENCE_METHODS}, "
                f"got {self.influence_method!r}"
            )
        for name in ("init_x_bounds", "init_y_bounds"):
            lo, hi = getattr(self, name)
            if not (hi > lo):
                raise DomainError(f"{name} must be a non-degenerate interval")
        if self.payment_scale <= 0:
            raise DomainError("payment_scale must be positive")
        if self.effort_cost < 0 or self.init_count < 0 or self.ridge < 0:
            raise DomainError("effort_cost, init_count and ridge must be non-negative")


@dataclass(frozen=True)
class LedgerEntry:
    agent_id: object
    batch_index: int
    raw_influence: float
    corrected_score: float
    payment: float


@dataclass
class PaymentLedger:
    """Ordered per-point payment records plus the per-batch risk trace.

    ``risk_trace[0]`` is the test risk of the initialization model;
    ``risk_trace[k]`` the risk after batch k has been absorbed. Totals are
    computed from the entry columns, so they match them exactly.
    """

    entries: list = field(default_factory=list)
    risk_trace: list = field(default_factory=list)
    config: Optional[MechanismConfig] = None

    @property
    def sum_raw(self) -> float:
        return math.fsum(e.raw_influence for e in self.entries)

    @property
    def sum_corrected(self) -> float:
        return math.fsum(e.corrected_score for e in self.entries)

    @property
    def sum_payments(self) -> float:
        return math.fsum(e.payment for e in self.entries)

    @property
    def initial_risk(self) -> float:
        return self.risk_trace[0]

    @property
    def final_risk(self) -> float:
        return self.risk_trace[-1]

    def payments_by_agent(self) -> dict:
        out: dict = {}
        for e in self.entries:
            out[e.agent_id] = out.get(e.agent_id, 0.0) + e.payment
        return out

    def batch_mean_influences(self) -> list:
        """Mean raw influence per batch index, in batch order."""
        sums: dict = {}
        counts: dict = {}
        for e in self.entries:
            sums[e.batch_index] = sums.get(e.batch_index, 0.0) + e.raw_influence
            counts[e.batch_index] = counts.get(e.batch_index, 0) + 1
        return [sums[k] / counts[k] for k in sorted(sums)]

    def rows(self) -> list:
        return [
            {
                "agent_id": e.agent_id,
                "batch_index": e.batch_index,
                "raw_influence": e.raw_influence,
                "corrected_score": e.corrected_score,
                "payment": e.payment,
            }
            for e in self.entries
        ]

    def summary(self) -> dict:
        """Run summary as a flat mapping, ready for key-value serialization."""
        out = {
            "initial_risk": self.initial_risk,
            "final_risk": self.final_risk,
            "sum_raw": self.sum_raw,
            "sum_corrected": self.sum_corrected,
            "sum_payments": self.sum_payments,
            "n_entries": len(self.entries),
            "n_batches": len(self.risk_trace) - 1,
        }
        if self.config is not None:
            for key, value in vars(self.config).items():
                out[f"config.{key}"] = value
        return out

    def to_csv(self, path) -> None:
        from .dataio import write_results

        write_results(self.rows(), path, fmt="csv")


def initialize_model(
    init_count: int,
    x_bounds: tuple,
    y_bounds: tuple,
    seed: int,
    dimension: int = 1,
) -> Dataset:
    """Knowledge-less initialization: uniform points in the given bounds.

    Draws ``init_count`` points with features uniform in x_bounds^dimension
    and targets uniform in y_bounds, deterministically under ``seed``.

    Raises
    ------
    InsufficientInitialization
        If init_count < dimension + 1, too few points to define a model.
    """
    if init_count < dimension + 1:
        raise InsufficientInitialization(
            f"initialization needs at least d + 1 = {dimension + 1} points, got {init_count}"
        )
    rng = np.random.default_rng(seed)
    X = rng.uniform(x_bounds[0], x_bounds[1], size=(init_count, dimension))
    y = rng.uniform(y_bounds[0], y_bounds[1], size=init_count)
    ids = ["__init__"] * init_count
    arrival = -np.arange(1, init_count + 1, dtype=np.int64)  # before any report
    return Dataset(X, y, ids, arrival)


def _addition_influences(model: FittedModel, batch: Dataset, test: Dataset) -> np.ndarray:
    """Exact as-if-added influence of each batch point against ``model``.

    risk(test, current) - risk(test, current + point), via rank-one update of
    the Gram inverse. Positive means adding the point lowers test risk.
    """
    aug = batch.augmented()
    res = residuals(batch, model.params)
    U = aug @ model.gram_inverse
    hat = np.einsum("ij,ij->i", U, aug)
    shifts = U.T * (res / (1.0 + hat))
    gbar = _mean_test_gradient(model, test)
    proj = test.augmented() @ shifts
    return -(gbar @ shifts + np.mean(proj * proj, axis=0))


def _approx_addition_influences(
    model: FittedModel, batch: Dataset, test: Dataset, order: str
) -> np.ndarray:
    """As-if-added influence approximated by negating the removal formulas
    evaluated against the pre-batch model."""
    if order == "first-order":
        return first_order_influences(model, batch, test)
    # Addition is removal with the up-weight sign flipped: the linear shift
    # term negates while the quadratic term keeps its sign. Expand the test
    # loss at that shift and negate the change.
    aug = batch.augmented()
    res = residuals(batch, model.params)
    grads = -2.0 * aug * res[:, None]
    # 0.5 * Ginv @ g is (1/n) H^{-1} g, the first removal-shift term.
    first = 0.5 * (grads @ model.gram_inverse)
    dots = np.einsum("ij,ij->i", aug, first)
    second = 0.5 * ((2.0 * aug * dots[:, None]) @ model.gram_inverse)
    shifts = -first + second
    gbar = _mean_test_gradient(model, test)
    proj = test.augmented() @ shifts.T
    return -(shifts @ gbar + np.mean(proj * proj, axis=0))


def _score_batch(
    accumulated: Dataset,
    batch: Dataset,
    test: Dataset,
    config: MechanismConfig,
):
    """Score one batch; returns (raw influences, post-batch model)."""
    if config.mode == "inclusive":
        combined = accumulated.extended(batch)
        model = fit(combined, ridge=config.ridge)
        idx = np.arange(len(accumulated), len(combined))
        if config.influence_method == "exact":
            raw = exact_influences(combined, test, model=model, indices=idx)
        elif config.influence_method == "first-order":
            raw = first_order_influences(model, batch, test)
        else:
            raw = second_order_influences(model, batch, test)
        return raw, model
    # exclusive: score against the pre-batch model, as if each point were added
    model_prev = fit(accumulated, ridge=config.ridge)
    if config.influence_method == "exact":
        raw = _addition_influences(model_prev, batch, test)
    else:
        raw = _approx_addition_influences(model_prev, batch, test, config.influence_method)
    post_model = fit(accumulated.extended(batch), ridge=config.ridge)
    return raw, post_model


def run_mechanism(
    stream: Dataset,
    test: Dataset,
    config: MechanismConfig,
    seed: int = 0,
    init: Optional[Dataset] = None,
) -> PaymentLedger:
    """Run the sequential mechanism over a report stream.

    The stream is processed in arrival order in batches of
    ``config.batch_size`` (the final batch may be smaller and is scored with
    its actual size). Inclusive mode refits on accumulated + batch and scores
    each batch point as-if-removed; exclusive mode fits on accumulated only
    and scores as-if-added. With closed-form normalization each raw score is
    divided by the correction ratio for this run's counts and the batch's
    actual size. Deterministic given (stream, config, seed).

    Parameters
    ----------
    stream : Dataset
        Reports in arrival order; must be non-empty.
    test : Dataset
        Test set defining the risk being paid for; non-empty.
    config : MechanismConfig
    seed : int
        Seeds the uniform initialization (ignored when ``init`` is given).
    init : Dataset, optional
        Pre-built initialization set; defaults to uniform sampling per config.
    """
    if len(stream) == 0:
        raise EmptyStream("the report stream is empty")
    if len(test) == 0:
        raise EmptyStream("the test set is empty")
    if init is None:
        init = initialize_model(
            config.init_count,
            config.init_x_bounds,
            config.init_y_bounds,
            seed=seed,
            dimension=stream.dimension,
        )
    ledger = PaymentLedger(config=config)
    model0 = fit(init, ridge=config.ridge)
    ledger.risk_trace.append(risk(test, model0.params))

    n_total = len(stream)
    accumulated = init
    b = config.batch_size
    n_batches = (n_total + b - 1) // b
    for k in range(1, n_batches + 1):
        batch = stream.subset(np.arange((k - 1) * b, min(k * b, n_total)))
        raw, post_model = _score_batch(accumulated, batch, test, config)
        if config.normalization == "closed-form-D":
            mp = MixtureParams(
                init_count=config.init_count,
                n_collected=n_total,
                batch_size=len(batch),
            )
            factor = (
                correction_inclusive(mp)
                if config.mode == "inclusive"
                else correction_exclusive(mp)
            )
        else:
            factor = 1.0
        for i in range(len(batch)):
            corrected = float(raw[i]) / factor
            ledger.entries.append(
                LedgerEntry(
                    agent_id=batch.agent_ids[i],
                    batch_index=k,
                    raw_influence=float(raw[i]),
                    corrected_score=corrected,
                    payment=config.payment_scale * corrected,
                )
            )
        accumulated = accumulated.extended(batch)
        ledger.risk_trace.append(risk(test, post_model.params))
    return ledger


def budget_estimate(init_count: int, n: int, r_estimate: float, alpha: float) -> float:
    """Expected total payout of a run, before running it.

    alpha times the closed-form total risk change for ``n`` collected points
    on top of ``init_count`` initialization points, with ``r_estimate`` the
    assumed squared model gap between initialization and reports.
    """
    if n == 0:
        return 0.0
    return alpha * r_estimate * n * (2.0 * init_count + n) / (init_count + n) ** 2
