"""Frequency checks, chi-square tests and plug-in mutual information."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as _st

# Equality slack for float comparisons of frequencies against targets.
_EPS = 1e-12


@dataclass(frozen=True)
class MonteCarloResult:
    """A Bernoulli frequency checked against a target at ``z`` sigma.

    ``ci_low``/``ci_high`` is the normal-approximation interval around the
    estimate; the pass rule uses the target's own standard error, so a
    degenerate target (0 or 1) demands an exact match.
    """

    label: str
    trials: int
    successes: int
    point_estimate: float
    ci_low: float
    ci_high: float
    target: float
    z: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def check_frequency(successes: int, trials: int, target: float, z: float = 3.0,
                    label: str = "") -> MonteCarloResult:
    if trials < 1:
        raise ValueError("need at least one trial")
    p = successes / trials
    half = z * math.sqrt(p * (1 - p) / trials)
    tolerance = z * math.sqrt(target * (1 - target) / trials)
    return MonteCarloResult(
        label=label, trials=int(trials), successes=int(successes), point_estimate=p,
        ci_low=max(0.0, p - half), ci_high=min(1.0, p + half), target=float(target),
        z=float(z), tolerance=tolerance, passed=abs(p - target) <= tolerance + _EPS)


def chi_square_uniform(counts) -> float:
    """p-value of the counts under a uniform distribution."""
    counts = np.asarray(counts, dtype=float)
    if counts.sum() == 0:
        raise ValueError("no observations")
    return float(_st.chisquare(counts).pvalue)


def chi_square_two_sample(counts_a, counts_b) -> float:
    """p-value that two count vectors over the same categories share a law."""
    table = np.array([counts_a, counts_b], dtype=float)
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 1.0
    return float(_st.chi2_contingency(table, correction=False).pvalue)


def mutual_information(outcomes, labels=None) -> float:
    """Plug-in estimate of I(outcome; label) in bits.

    Accepts either two equal-length sequences or one sequence of
    (outcome, label) pairs. Clamped at zero.
    """
    if labels is None:
        pairs = list(outcomes)
        if not pairs:
            raise ValueError("mutual information of an empty sample")
        outcomes = [p[0] for p in pairs]
        labels = [p[1] for p in pairs]
    o = np.asarray(outcomes)
    l = np.asarray(labels)
    if o.shape[0] == 0:
        raise ValueError("mutual information of an empty sample")
    if o.shape != l.shape:
        raise ValueError("outcomes and labels differ in length")
    _, oi = np.unique(o, return_inverse=True)
    _, li = np.unique(l, return_inverse=True)
    n_o, n_l = oi.max() + 1, li.max() + 1
    return mutual_information_from_counts(
        np.bincount(oi * n_l + li, minlength=n_o * n_l).reshape(n_o, n_l))


def mutual_information_from_counts(table) -> float:
    """Plug-in I(row; column) in bits from a contingency table of counts."""
    counts = np.asarray(table, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise ValueError("mutual information of an empty table")
    joint = counts / total
    po = joint.sum(axis=1, keepdims=True)
    pl = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log2(joint[nz] / (po @ pl)[nz])))
    return max(0.0, mi)


def plugin_bias_bits(n: int, n_outcomes: int, n_labels: int) -> float:
    """Leading-order upward bias of the plug-in estimator under independence."""
    return (n_outcomes - 1) * (n_labels - 1) / (2 * n * math.log(2))


def distribution_mutual_information(distributions) -> float:
    """Exact I(outcome; label) for a uniform label and known conditionals."""
    p = np.asarray(distributions, dtype=float)
    mean = p.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(p / mean), 0.0)
    return max(0.0, float(terms.sum(axis=1).mean()))
