"""
Closed-form expectations for models trained on mixtures of report
distributions, and the batch correction ratios built from them.

The setting: a knowledge-less model is seeded with ``init_count`` uniform
points, then ``n_collected`` points arrive from the report distribution.
Because the least-squares solution is linear in the targets and both
distributions share the same feature marginal, the expected model is the
count-weighted mixture of the per-distribution models, which gives closed
forms for the expected risk curve, the per-batch influence sums, and the
ratio between summed influences and total risk change under inclusive and
exclusive batch scoring. That ratio is what the mechanism divides scores by
when normalization is enabled.

The same machinery yields the expected influences of informed (truthful) and
uninformed (heuristic) reports, and the fraction of truthful reports above
which truth-telling pays more even when the test set is drawn from the
reports themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError


@dataclass(frozen=True)
class MixtureParams:
    """Inputs to the closed-form theory.

    Parameters
    ----------
    init_count : int
        Number of uniform initialization points seeding the model.
    n_collected : int
        Number of collected report points.
    batch_size : int
        Points per scoring batch.
    model_gap : float
        Expected squared gap between the models induced by the two report
        distributions (same feature marginal).
    inherent_risk_heuristic : float
        Risk of the heuristic distribution's own best model on itself.
    inherent_risk_truthful : float
        Risk of the truthful distribution's own best model on itself.
    truthful_fraction : float
        Fraction of reports that are truthful, in [0, 1].
    """

    init_count: int
    n_collected: int
    batch_size: int = 1
    model_gap: float = 0.0
    inherent_risk_heuristic: float = 0.0
    inherent_risk_truthful: float = 0.0
    truthful_fraction: float = 1.0

    def __post_init__(self):
        if self.init_count < 0 or self.n_collected < 0 or self.batch_size < 1:
            raise DomainError("counts must be non-negative and batch_size >= 1")
        if self.model_gap < 0:
            raise DomainError("model_gap must be non-negative")
        if self.inherent_risk_heuristic < 0 or self.inherent_risk_truthful < 0:
            raise DomainError("inherent risks must be non-negative")
        if not 0.0 <= self.truthful_fraction <= 1.0:
            raise DomainError("truthful_fraction must lie in [0, 1]")


def expected_risk(params: MixtureParams, x: float) -> float:
    """Expected test risk after collecting x points.

    init_count^2 * model_gap / (init_count + x)^2 plus the truthful
    distribution's inherent risk.
    """
    q = params.init_count
    if q + x <= 0:
        raise DomainError("init_count + x must be positive")
    return q * q * params.model_gap / (q + x) ** 2 + params.inherent_risk_truthful


def marginal_influence(params: MixtureParams, x: float) -> float:
    """Negative derivative of the expected risk: the value of the next point."""
    q = params.init_count
    if q + x <= 0:
        raise DomainError("init_count + x must be positive")
    return 2.0 * q * q * params.model_gap / (q + x) ** 3


def total_risk_change(params: MixtureParams) -> float:
    """Expected overall drop in risk from the whole collection run.

    Equals expected_risk(0) - expected_risk(n_collected):
    model_gap * n (2 init_count + n) / (init_count + n)^2.
    """
    q = params.init_count
    n = params.n_collected
    if n == 0:
        return 0.0
    return params.model_gap * n * (2.0 * q + n) / (q + n) ** 2


def batch_influence_sum(params: MixtureParams, k: int) -> float:
    """Expected sum of influences in batch k (1-based).

    2 b init_count^2 model_gap / (init_count + k b)^3, the continuum
    approximation of scoring a whole batch at collection size k b.
    """
    if k < 1:
        raise DomainError("batch index k must be >= 1")
    q = params.init_count
    b = params.batch_size
    return 2.0 * b * q * q * params.model_gap / (q + k * b) ** 3


# --- tetragamma --------------------------------------------------------------

# -(2k+1) B_{2k} coefficients of x^{-(2k+2)} in the asymptotic expansion of
# tetragamma, k = 1..7 (B_2 = 1/6, B_4 = -1/30, B_6 = 1/42, B_8 = -1/30,
# B_10 = 5/66, B_12 = -691/2730, B_14 = 7/6).
_ASYMPTOTIC_COEFFS = (
    -1.0 / 2.0,
    1.0 / 6.0,
    -1.0 / 6.0,
    3.0 / 10.0,
    -5.0 / 6.0,
    691.0 / 210.0,
    -35.0 / 2.0,
)

_ASYMPTOTIC_MIN = 16.0


def tetragamma(x: float) -> float:
    """Second derivative of the digamma function, for x > 0.

    Uses the recurrence tetragamma(x) = tetragamma(x + 1) - 2 / x^3 to shift
    the argument into the asymptotic region, then evaluates the asymptotic
    series -1/x^2 - 1/x^3 - 1/(2 x^4) + Bernoulli corrections. Accurate to a
    few ulps for arguments above ~1e-3 once the recurrence has been applied.

    Raises
    ------
    DomainError
        If x <= 0 or x is not finite.
    """
    x = float(x)
    if not x > 0.0 or x != x or x == float("inf"):
        raise DomainError(f"tetragamma requires a positive finite argument, got {x}")
    shift = 0.0
    while x < _ASYMPTOTIC_MIN:
        shift += 2.0 / (x * x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    for coeff in reversed(_ASYMPTOTIC_COEFFS):
        series = series * inv2 + coeff
    value = -inv2 - inv2 * inv + inv2 * inv2 * series
    return value - shift


def correction_inclusive(params: MixtureParams) -> float:
    """Ratio of summed batch influences to total risk change, inclusive mode.

    init_count^2 (init_count + n)^2 [psi''((init_count+n)/b + 1) -
    psi''(init_count/b + 1)] / (n (2 init_count + n) b^2). The model-gap
    factor cancels, so the ratio depends only on the counts and batch size.
    """
    q, n, b = params.init_count, params.n_collected, params.batch_size
    if q <= 0 or n <= 0:
        raise DomainError("init_count and n_collected must be positive")
    bracket = tetragamma((q + n) / b + 1.0) - tetragamma(q / b + 1.0)
    return q * q * (q + n) ** 2 * bracket / (n * (2.0 * q + n) * b * b)


def correction_exclusive(params: MixtureParams) -> float:
    """Exclusive-mode counterpart: psi'' evaluated at (init_count+n)/b and
    init_count/b, without the +1 offset. Always at least the inclusive value
    because the exclusive sum keeps the larger first-batch term.
    """
    q, n, b = params.init_count, params.n_collected, params.batch_size
    if q <= 0 or n <= 0:
        raise DomainError("init_count and n_collected must be positive")
    bracket = tetragamma((q + n) / b) - tetragamma(q / b)
    return q * q * (q + n) ** 2 * bracket / (n * (2.0 * q + n) * b * b)


# --- heuristic-robustness expectations ---------------------------------------


def heuristic_influences_independent(params: MixtureParams) -> tuple:
    """Expected influence of (heuristic, truthful) points on an independent
    test set drawn from the truthful distribution.

    (-2 r p (1-p) / n, 2 r (1-p)^2 / n) with r the model gap and p the
    truthful fraction: negative for heuristic reports and positive for
    truthful ones whenever 0 < p < 1.
    """
    n = params.n_collected
    if n <= 0:
        raise DomainError("n_collected must be positive")
    r = params.model_gap
    p = params.truthful_fraction
    heuristic = -2.0 * r * p * (1.0 - p) / n
    truthful = 2.0 * r * (1.0 - p) ** 2 / n
    return heuristic, truthful


def heuristic_influences_mixed(params: MixtureParams) -> tuple:
    """Expected influence of (heuristic, truthful) points when the test set
    is drawn from the report mixture itself.

    Differentiates the mixture risk R(model mix on distribution mix) in the
    two report counts. Adding a heuristic point both drags the model toward
    the uninformed one and tilts the test mixture toward the uninformed
    distribution, so the inherent risks enter with opposite signs for the two
    strategies.
    """
    n = params.n_collected
    if n <= 0:
        raise DomainError("n_collected must be positive")
    r = params.model_gap
    p = params.truthful_fraction
    r11 = params.inherent_risk_heuristic
    r22 = params.inherent_risk_truthful
    heuristic = p * (r22 - r11) / n - p * (2.0 * p - 1.0) * r / n
    truthful = (1.0 - p) * (r11 - r22) / n + (1.0 - p) * (2.0 * p - 1.0) * r / n
    return heuristic, truthful


def truthful_threshold(params: MixtureParams) -> float:
    """Truthful fraction above which truthful reports out-earn heuristic ones
    under a from-reports test set.

    1/2 + (inherent_risk_truthful - inherent_risk_heuristic) / (2 model_gap).
    Values above 1 mean truthful reporting is never strictly better; below 0,
    always better.

    Raises
    ------
    DomainError
        If the model gap is zero (the threshold is undefined).
    """
    if params.model_gap <= 0:
        raise DomainError("truthful_threshold requires a positive model_gap")
    gap = params.inherent_risk_truthful - params.inherent_risk_heuristic
    return 0.5 + gap / (2.0 * params.model_gap)
