"""Comparison statistics: t-tests, improvements, experiment summaries.

Two-sample comparisons default to Welch's unequal-variance t-test,

    t = (mean_a - mean_b) / sqrt(s2_a/n_a + s2_b/n_b)

with Welch-Satterthwaite degrees of freedom; a pooled-variance variant
is available for exact replication against tools that assume equal
variances. Two-sided p-values come from the Student-t CDF evaluated
through the regularized incomplete beta function, computed here with
the standard continued-fraction expansion (modified Lentz), accurate to
well under 1e-10 absolute.

Degenerate inputs follow fixed rules: two zero-variance samples with
equal means give t = 0, p = 1; with unequal means the difference is
certain, reported as p = 0 with the ``zero_variance`` flag set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError, UndefinedBaselineError

_LENTZ_TINY = 1e-300
_LENTZ_EPS = 1e-15
_LENTZ_MAX_ITER = 300


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _LENTZ_TINY:
        d = _LENTZ_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _LENTZ_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _LENTZ_TINY:
            d = _LENTZ_TINY
        c = 1.0 + aa / c
        if abs(c) < _LENTZ_TINY:
            c = _LENTZ_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _LENTZ_TINY:
            d = _LENTZ_TINY
        c = 1.0 + aa / c
        if abs(c) < _LENTZ_TINY:
            c = _LENTZ_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _LENTZ_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction failed to converge")


def regularized_incomplete_beta(a: float, b: float, x: float, *,
                                complement: float | None = None) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1].

    Callers that know ``1 - x`` to full precision (e.g. from the formula
    that produced ``x``) can pass it as ``complement``; recomputing it
    from ``x`` loses all significance when x is within an ulp of 1.
    """
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    xc = (1.0 - x) if complement is None else complement
    if x == 0.0 or xc == 0.0:
        return x if complement is None else (0.0 if x == 0.0 else 1.0)
    log_x = math.log1p(-xc) if x > 0.5 else math.log(x)
    log_xc = math.log1p(-x) if xc > 0.5 else math.log(xc)
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * log_x + b * log_xc)
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, xc) / b


def student_t_two_sided_p(t: float, dof: float) -> float:
    """Two-sided p-value of a Student-t statistic with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0.0:
        return 1.0
    if math.isinf(t):
        return 0.0
    t2 = t * t
    x = dof / (dof + t2)
    xc = t2 / (dof + t2)
    return regularized_incomplete_beta(dof / 2.0, 0.5, x, complement=xc)


@dataclass(frozen=True)
class TTestResult:
    t: float
    dof: float
    p_value: float
    zero_variance: bool = False


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _sample_variance(values: Sequence[float], mean: float) -> float:
    return sum((v - mean) ** 2 for v in values) / (len(values) - 1)


def _validate_sample(values: Sequence[float], label: str) -> None:
    if len(values) < 2:
        raise ValueError(f"{label} needs at least 2 values, got {len(values)}")
    if any(not math.isfinite(v) for v in values):
        raise ValueError(f"{label} contains non-finite values")


def welch_t(a: Sequence[float], b: Sequence[float], *, pooled: bool = False) -> TTestResult:
    """Independent two-sample t-test; Welch by default, pooled on request."""
    _validate_sample(a, "sample a")
    _validate_sample(b, "sample b")
    na, nb = len(a), len(b)
    ma, mb = _mean(a), _mean(b)
    va, vb = _sample_variance(a, ma), _sample_variance(b, mb)

    if va == 0.0 and vb == 0.0:
        if ma == mb:
            return TTestResult(t=0.0, dof=float(na + nb - 2), p_value=1.0,
                               zero_variance=True)
        t = math.inf if ma > mb else -math.inf
        return TTestResult(t=t, dof=float(na + nb - 2), p_value=0.0,
                           zero_variance=True)

    if pooled:
        pooled_var = ((na - 1) * va + (nb - 1) * vb) / (na + nb - 2)
        se = math.sqrt(pooled_var * (1.0 / na + 1.0 / nb))
        dof = float(na + nb - 2)
    else:
        qa, qb = va / na, vb / nb
        se = math.sqrt(qa + qb)
        # Welch-Satterthwaite, normalized by the larger term so the ratio
        # arithmetic cannot underflow for denormal-scale variances.
        qmax = max(qa, qb)
        ra, rb = qa / qmax, qb / qmax
        dof = (ra + rb) ** 2 / (ra ** 2 / (na - 1) + rb ** 2 / (nb - 1))
    t = (ma - mb) / se
    return TTestResult(t=t, dof=dof, p_value=student_t_two_sided_p(t, dof))


@dataclass(frozen=True)
class Comparison:
    """A variant measured against its baseline."""

    baseline_mean: float
    variant_mean: float
    improvement_pct: float
    t_stat: float
    dof: float
    p_value: float
    significant: bool
    zero_variance: bool = False

    def to_dict(self) -> dict:
        return {
            "baseline_mean": self.baseline_mean,
            "variant_mean": self.variant_mean,
            "improvement_pct": self.improvement_pct,
            "t_stat": self.t_stat,
            "dof": self.dof,
            "p_value": self.p_value,
            "significant": self.significant,
            "zero_variance": self.zero_variance,
        }


def compare(baseline: Sequence[float], variant: Sequence[float],
            alpha: float = 0.05, *, pooled: bool = False) -> Comparison:
    """Improvement of ``variant`` over ``baseline`` with significance at ``alpha``.

    Improvement is 100 * (baseline - variant) / baseline, so negative
    values mean the variant regressed.
    """
    result = welch_t(baseline, variant, pooled=pooled)
    baseline_mean = _mean(baseline)
    variant_mean = _mean(variant)
    if baseline_mean == 0.0:
        raise UndefinedBaselineError("improvement undefined for zero baseline mean")
    improvement = 100.0 * (baseline_mean - variant_mean) / baseline_mean
    return Comparison(
        baseline_mean=baseline_mean,
        variant_mean=variant_mean,
        improvement_pct=improvement,
        t_stat=result.t,
        dof=result.dof,
        p_value=result.p_value,
        significant=result.p_value < alpha,
        zero_variance=result.zero_variance,
    )


@dataclass(frozen=True)
class ConditionSamples:
    """Per-session measurements for one (policy, mode) condition."""

    policy: str
    mode: str
    costs: tuple[float, ...]
    ttfts: tuple[float, ...]


@dataclass(frozen=True)
class ModeSummary:
    mode: str
    cost: Comparison
    ttft: Comparison
    cost_normalized_pct: float
    ttft_normalized_pct: float

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "cost": self.cost.to_dict(),
            "ttft": self.ttft.to_dict(),
            "cost_normalized_pct": self.cost_normalized_pct,
            "ttft_normalized_pct": self.ttft_normalized_pct,
        }


@dataclass(frozen=True)
class PolicySummary:
    policy: str
    baseline_mode: str
    baseline_cost_mean: float
    baseline_ttft_mean: float
    modes: tuple[ModeSummary, ...]
    best_cost_mode: str | None
    best_ttft_mode: str | None

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "baseline_mode": self.baseline_mode,
            "baseline_cost_mean": self.baseline_cost_mean,
            "baseline_ttft_mean": self.baseline_ttft_mean,
            "modes": [m.to_dict() for m in self.modes],
            "best_cost_mode": self.best_cost_mode,
            "best_ttft_mode": self.best_ttft_mode,
        }


@dataclass(frozen=True)
class ExperimentReport:
    alpha: float
    policies: tuple[PolicySummary, ...]

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "policies": [p.to_dict() for p in self.policies],
        }

    def rows(self) -> list[dict]:
        """Long-format rows: one per policy, mode, and metric."""
        out = []
        for policy in self.policies:
            for mode in policy.modes:
                for metric, comp, normalized in (
                        ("cost", mode.cost, mode.cost_normalized_pct),
                        ("ttft", mode.ttft, mode.ttft_normalized_pct)):
                    out.append({
                        "policy": policy.policy,
                        "mode": mode.mode,
                        "metric": metric,
                        "baseline_mean": comp.baseline_mean,
                        "variant_mean": comp.variant_mean,
                        "improvement_pct": comp.improvement_pct,
                        "normalized_pct": normalized,
                        "p_value": comp.p_value,
                        "significant": comp.significant,
                    })
        return out


BASELINE_MODE = "no-cache"


def summarize_experiment(samples: Sequence[ConditionSamples],
                         alpha: float = 0.05, *,
                         pooled: bool = False) -> ExperimentReport:
    """Build the per-policy comparison report against the no-cache baseline.

    Every policy present must include a no-cache condition; policies
    whose only condition is the baseline are reported with means and no
    comparisons.
    """
    by_policy: dict[str, list[ConditionSamples]] = {}
    for cond in samples:
        by_policy.setdefault(cond.policy, []).append(cond)

    summaries = []
    for policy, conditions in by_policy.items():
        baseline = next((c for c in conditions if c.mode == BASELINE_MODE), None)
        if baseline is None:
            raise ConfigError(
                f"policy {policy!r} has no {BASELINE_MODE!r} condition to compare against")
        base_cost_mean = _mean(baseline.costs)
        base_ttft_mean = _mean(baseline.ttfts)
        modes = []
        for cond in conditions:
            if cond.mode == BASELINE_MODE:
                continue
            cost_cmp = compare(baseline.costs, cond.costs, alpha, pooled=pooled)
            ttft_cmp = compare(baseline.ttfts, cond.ttfts, alpha, pooled=pooled)
            modes.append(ModeSummary(
                mode=cond.mode,
                cost=cost_cmp,
                ttft=ttft_cmp,
                cost_normalized_pct=100.0 * cost_cmp.variant_mean / base_cost_mean,
                ttft_normalized_pct=100.0 * ttft_cmp.variant_mean / base_ttft_mean,
            ))
        best_cost = max(modes, key=lambda m: m.cost.improvement_pct, default=None)
        best_ttft = max(modes, key=lambda m: m.ttft.improvement_pct, default=None)
        summaries.append(PolicySummary(
            policy=policy,
            baseline_mode=BASELINE_MODE,
            baseline_cost_mean=base_cost_mean,
            baseline_ttft_mean=base_ttft_mean,
            modes=tuple(modes),
            best_cost_mode=best_cost.mode if best_cost else None,
            best_ttft_mode=best_ttft.mode if best_ttft else None,
        ))
    return ExperimentReport(alpha=alpha, policies=tuple(summaries))
