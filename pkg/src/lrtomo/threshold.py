"""Confidence cutoffs for the loglikelihood-ratio statistic.

Three state-independent tail functions F(lambda) are supported, each a
bound (or approximation) on the probability that the statistic exceeds
lambda, and each inverted to the smallest cutoff with F <= 1 - alpha:

* ``chi2_ccdf``      -- the chi-squared CCDF Q(k/2, lambda/2), the Gaussian
                        -limit approximation.  Exact for Gaussian data, a
                        lower reference line for multinomial data.
* ``eq9_bound``      -- chi2 plus an exponential correction term valid for
                        independent measurements on identically prepared
                        copies; always dominates the chi-squared curve.
* ``lemma1_bound``   -- min(1, N^(d^2-1) e^(-lambda/2)), valid for any
                        measurement (including collective ones) on N
                        copies of a d-dimensional system.

The chi-squared CCDF is the regularized *upper* incomplete gamma function
(it must be non-increasing with F(0) = 1), computed by a power series for
small arguments and a continued fraction otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ValidationError
from .states import TomographyDataset

THRESHOLD_ATOL = 1e-9
RANK_SV_CUTOFF = 1e-9


# --------------------------------------------------------------------------
# Regularized incomplete gamma.

def regularized_upper_gamma(a: float, x: float) -> float:
    """Q(a, x) = Gamma(a, x) / Gamma(a) for a > 0, x >= 0.

    Series for x < a + 1, modified-Lentz continued fraction otherwise;
    either route converges to ~1e-15 relative accuracy in double
    precision for the argument ranges used here.
    """
    if a <= 0:
        raise ValidationError(f"gamma shape must be positive, got {a}")
    if x < 0:
        raise ValidationError(f"gamma argument must be nonnegative, got {x}")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _lower_gamma_series(a, x)))
    return min(1.0, max(0.0, _upper_gamma_contfrac(a, x)))


def _gamma_prefactor(a: float, x: float) -> float:
    # x^a e^-x / Gamma(a), computed in log space.
    return math.exp(a * math.log(x) - x - math.lgamma(a))


def _lower_gamma_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(1000):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * 1e-17:
            return total * _gamma_prefactor(a, x)
    raise ConvergenceError(f"incomplete-gamma series stalled at a={a}, x={x}")


def _upper_gamma_contfrac(a: float, x: float) -> float:
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0 else 1.0 / tiny
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-17:
            return h * _gamma_prefactor(a, x)
    raise ConvergenceError(f"incomplete-gamma continued fraction stalled at a={a}, x={x}")


# --------------------------------------------------------------------------
# Tail functions.

def _check_k(k: int) -> int:
    if int(k) != k or k < 1:
        raise ValidationError(f"degrees of freedom must be an integer >= 1, got {k}")
    return int(k)


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not lam >= 0:
        raise ValidationError(f"cutoff argument must be >= 0, got {lam}")
    return lam


def chi2_ccdf(k: int, lam: float) -> float:
    """P(X > lam) for X ~ chi-squared with k degrees of freedom."""
    k = _check_k(k)
    lam = _check_lambda(lam)
    return regularized_upper_gamma(k / 2.0, lam / 2.0)


def eq9_bound(k: int, lam: float) -> float:
    """Multinomial tail bound chi2 + e^(-lam/2) [(1 + r)^k - r^k], clamped.

    Here r = sqrt(3 e lam) / pi.  The bracket is a difference of k-th
    powers, nonnegative, and the whole expression is clamped to [0, 1]
    before use as a probability bound (at lam = 0 the raw value is 2).
    """
    k = _check_k(k)
    lam = _check_lambda(lam)
    r = math.sqrt(3.0 * math.e * lam) / math.pi
    if r < 1.0:
        bracket = (1.0 + r) ** k - r**k
        term = math.exp(-lam / 2.0) * bracket
    else:
        # log-space form, stable for large lam where e^(-lam/2) underflows
        log_bracket = k * math.log(r) + math.log(math.expm1(k * math.log1p(1.0 / r)))
        term = math.exp(-lam / 2.0 + log_bracket)
    return min(1.0, chi2_ccdf(k, lam) + term)


def lemma1_bound(copies: int, dim: int, lam: float) -> float:
    """min(1, N^(d^2 - 1) e^(-lam/2)), evaluated in log space."""
    if int(copies) != copies or copies < 1:
        raise ValidationError(f"copies must be an integer >= 1, got {copies}")
    if int(dim) != dim or dim < 2:
        raise ValidationError(f"dimension must be an integer >= 2, got {dim}")
    lam = _check_lambda(lam)
    log_value = (dim * dim - 1) * math.log(copies) - lam / 2.0
    return math.exp(min(0.0, log_value))


# --------------------------------------------------------------------------
# Threshold rules.

@dataclass(frozen=True)
class ChiSquare:
    """Chi-squared cutoff rule with k degrees of freedom."""

    k: int

    def __post_init__(self):
        _check_k(self.k)

    label = "chi2"

    def tail(self, lam: float) -> float:
        return chi2_ccdf(self.k, lam)


@dataclass(frozen=True)
class Eq9Bound:
    """Multinomial tail-bound cutoff rule with k degrees of freedom."""

    k: int

    def __post_init__(self):
        _check_k(self.k)

    label = "eq9"

    def tail(self, lam: float) -> float:
        return eq9_bound(self.k, lam)


@dataclass(frozen=True)
class Lemma1:
    """Copy-count cutoff rule for N copies in dimension d."""

    copies: int
    dim: int

    def __post_init__(self):
        if int(self.copies) != self.copies or self.copies < 1:
            raise ValidationError(f"copies must be >= 1, got {self.copies}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValidationError(f"dim must be >= 2, got {self.dim}")

    label = "lemma1"

    def tail(self, lam: float) -> float:
        return lemma1_bound(self.copies, self.dim, lam)


@dataclass(frozen=True)
class FixedCutoff:
    """A caller-supplied cutoff (finite or +inf); used as a study sentinel."""

    value: float

    def __post_init__(self):
        if not (self.value >= 0):
            raise ValidationError(f"fixed cutoff must be >= 0, got {self.value}")

    label = "fixed"

    def tail(self, lam: float) -> float:
        return 1.0 if lam < self.value else 0.0


ThresholdRule = ChiSquare | Eq9Bound | Lemma1 | FixedCutoff


def solve_threshold(rule: ThresholdRule, alpha: float) -> float:
    """Smallest lambda with rule.tail(lambda) <= 1 - alpha, to 1e-9.

    Bracketing bisection; every supported tail is non-increasing in
    lambda, so the result is monotone in alpha.
    """
    if not (0.0 < alpha < 1.0):
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    if isinstance(rule, FixedCutoff):
        return float(rule.value)
    target = 1.0 - alpha
    lo = 0.0
    if rule.tail(0.0) <= target:
        return 0.0
    hi = 1.0
    while rule.tail(hi) > target:
        hi *= 2.0
        if hi > 1e12:
            raise ConvergenceError("threshold bracket exceeded 1e12")
    while hi - lo > THRESHOLD_ATOL:
        mid = 0.5 * (lo + hi)
        if rule.tail(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def degrees_of_freedom(dataset: TomographyDataset) -> int:
    """Number of linearly independent observables measured.

    The rank of the real span of all effects (identity included via
    completeness) minus one for trace normalization; d^2 - 1 for an
    informationally complete set.  Singular values below 1e-9 are
    treated as zero.
    """
    rows = []
    for s in dataset.settings:
        for e in s.effects:
            m = e.matrix.reshape(-1)
            rows.append(np.concatenate([m.real, m.imag]))
    stacked = np.array(rows)
    sv = np.linalg.svd(stacked, compute_uv=False)
    rank = int(np.sum(sv > RANK_SV_CUTOFF))
    return rank - 1


def rule_from_name(name: str, dataset: TomographyDataset) -> ThresholdRule:
    """Build the named rule with parameters inferred from the dataset."""
    if name == "chi2":
        return ChiSquare(degrees_of_freedom(dataset))
    if name == "eq9":
        return Eq9Bound(degrees_of_freedom(dataset))
    if name == "lemma1":
        return Lemma1(dataset.total_copies, dataset.dim)
    raise ValidationError(f"unknown threshold rule {name!r}")


# --------------------------------------------------------------------------
# Tabulated curves.

@dataclass(frozen=True, eq=False)
class CcdfCurve:
    """Tabulated (lambda, F) pairs with their provenance.

    For enumeration curves the lambdas are the atoms of the statistic's
    distribution and F_i = P(statistic >= lambda_i); ``evaluate`` then
    returns the exact left-continuous CCDF.  For analytic bounds the
    table is a plain grid sample.
    """

    lambdas: np.ndarray
    values: np.ndarray
    provenance: str

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        val = np.asarray(self.values, dtype=float)
        if lam.shape != val.shape or lam.ndim != 1 or lam.size == 0:
            raise ValidationError("curve needs matching 1-d lambda/value arrays")
        if np.any(np.diff(lam) <= 0):
            raise ValidationError("curve lambdas must be strictly increasing")
        if np.any(np.diff(val) > 1e-12):
            raise ValidationError("curve values must be non-increasing")
        if lam[0] < 0 or val.max() > 1 + 1e-12 or val.min() < -1e-12:
            raise ValidationError("curve values must be probabilities at lambdas >= 0")
        for arr in (lam, val):
            arr.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "values", val)

    def evaluate(self, lam) -> np.ndarray:
        """P(statistic >= lam) from the step representation."""
        lam = np.asarray(lam, dtype=float)
        idx = np.searchsorted(self.lambdas, lam, side="left")
        padded = np.concatenate([self.values, [0.0]])
        return padded[idx]

    def rows(self):
        return list(zip(self.lambdas.tolist(), self.values.tolist()))


@dataclass(frozen=True)
class InnerOuterReport:
    """Side-by-side comparison of a guaranteed and a chi-squared region."""

    alpha: float
    inner_rule: ThresholdRule
    outer_rule: ThresholdRule
    inner_cutoff: float
    outer_cutoff: float
    intervals: dict
    volume_ratio: float
    inner_hits: int
    outer_hits: int
    samples: int

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "inner_rule": self.inner_rule.label,
            "outer_rule": self.outer_rule.label,
            "inner_cutoff": self.inner_cutoff,
            "outer_cutoff": self.outer_cutoff,
            "support_intervals": {
                name: {"inner": list(pair[0]), "outer": list(pair[1])}
                for name, pair in self.intervals.items()
            },
            "volume_ratio": self.volume_ratio,
            "inner_hits": self.inner_hits,
            "outer_hits": self.outer_hits,
            "samples": self.samples,
        }


def inner_outer_test(
    dataset: TomographyDataset,
    alpha: float,
    outer_rule: ThresholdRule | None = None,
    observables: dict | None = None,
    volume_samples: int = 100_000,
    seed: int = 0,
) -> InnerOuterReport:
    """Compare the region from a valid bound with its chi-squared inner bound.

    The chi-squared cutoff is a lower reference for any valid
    state-independent cutoff, so the inner region is contained in the
    outer one; if the two lead to similar conclusions, a tighter bound
    has nothing left to buy.  Returns both cutoffs, support intervals
    for the supplied observables under both regions, and the Monte Carlo
    estimate of the volume ratio outer/inner.
    """
    from . import region as region_mod
    from .studies import region_volume_mc

    k = degrees_of_freedom(dataset)
    inner_rule = ChiSquare(k)
    if outer_rule is None:
        outer_rule = Eq9Bound(k)
    inner = region_mod.build_region(dataset, alpha, inner_rule)
    outer = region_mod.build_region(dataset, alpha, outer_rule, mle_result=inner.mle)

    if observables is None:
        observables = {}
        if dataset.dim == 2:
            from .states import pauli_settings

            for povm in pauli_settings():
                name = povm.name
                obs = povm.effects[0].matrix - povm.effects[1].matrix
                observables[name] = obs
    intervals = {}
    for name, obs in observables.items():
        intervals[name] = (
            region_mod.support_interval(inner, obs),
            region_mod.support_interval(outer, obs),
        )

    inner_vol = region_volume_mc(inner, n_samples=volume_samples, seed=seed)
    outer_vol = region_volume_mc(outer, n_samples=volume_samples, seed=seed)
    ratio = outer_vol.volume / inner_vol.volume if inner_vol.volume > 0 else np.inf
    return InnerOuterReport(
        alpha=alpha,
        inner_rule=inner_rule,
        outer_rule=outer_rule,
        inner_cutoff=inner.lambda_alpha,
        outer_cutoff=outer.lambda_alpha,
        intervals=intervals,
        volume_ratio=float(ratio),
        inner_hits=inner_vol.hits,
        outer_hits=outer_vol.hits,
        samples=volume_samples,
    )
