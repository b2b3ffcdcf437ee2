"""Verification laboratory: exact CCDFs, coverage Monte Carlo, the
probability-ratio estimator, and the traditional-error-bar baseline.

Everything here runs at desk scale: exhaustive enumerations are capped,
Monte Carlo loops are seeded and vectorized, and all MLE solves go
through one batched engine memoized on the count vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bloch import bloch_to_state, gell_mann_basis, state_to_bloch
from .errors import EnumerationCapError, ValidationError
from .likelihood import solve_mle_counts
from .geometry import ball_points
from .states import DensityMatrix, born_probabilities
from .threshold import CcdfCurve, ThresholdRule, solve_threshold

DEFAULT_ENUMERATION_CAP = 1_000_000
COVERAGE_SLACK = 1e-12
WILSON_Z = 1.959963984540054


# --------------------------------------------------------------------------
# Shared plumbing.

def _normalize_settings(settings, shots) -> list[tuple]:
    settings = list(settings)
    if np.isscalar(shots):
        shots = [int(shots)] * len(settings)
    shots = [int(s) for s in shots]
    if len(shots) != len(settings):
        raise ValidationError("need one shot count per setting")
    if any(s < 0 for s in shots):
        raise ValidationError("shot counts must be nonnegative")
    return list(zip(settings, shots))


def _stack_template(pairs) -> tuple[np.ndarray, list[int]]:
    effects = []
    sizes = []
    for povm, _ in pairs:
        for e in povm.effects:
            effects.append(e.matrix)
        sizes.append(len(povm.effects))
    return np.stack(effects), sizes


def _log_factorials(n: int) -> np.ndarray:
    out = np.zeros(n + 1)
    out[1:] = np.cumsum(np.log(np.arange(1, n + 1)))
    return out


def wilson_interval(hits: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials < 1:
        return (0.0, 1.0)
    phat = hits / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


class MleCache:
    """Batched MLE results memoized by count vector for one effect set."""

    def __init__(self, effects: np.ndarray):
        self.effects = effects
        self._loglik: dict[tuple, float] = {}
        self._converged: dict[tuple, bool] = {}

    def loglik_max(self, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        counts = np.asarray(counts, dtype=float)
        keys = [tuple(row) for row in counts]
        missing = [k for k in dict.fromkeys(keys) if k not in self._loglik]
        if missing:
            batch = np.array(missing, dtype=float)
            _, logliks, _, converged, _ = solve_mle_counts(self.effects, batch)
            for key, val, ok in zip(missing, logliks, converged):
                self._loglik[key] = float(val)
                self._converged[key] = bool(ok)
        vals = np.array([self._loglik[k] for k in keys])
        conv = np.array([self._converged[k] for k in keys])
        return vals, conv


def _log_prob_terms(rho: DensityMatrix, pairs) -> np.ndarray:
    """ln p_k for every stacked outcome, with ln 0 -> -inf."""
    probs = []
    for povm, _ in pairs:
        probs.extend(born_probabilities(rho, povm))
    p = np.array(probs)
    with np.errstate(divide="ignore"):
        return np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)


def _counts_loglik(counts: np.ndarray, log_p: np.ndarray) -> np.ndarray:
    """sum n_k ln p_k rows with the 0 * ln 0 = 0 convention."""
    contrib = np.where(counts > 0, counts * np.where(np.isfinite(log_p), log_p, 0.0), 0.0)
    vals = contrib.sum(axis=1)
    bad = ((counts > 0) & ~np.isfinite(log_p)).any(axis=1)
    return np.where(bad, -np.inf, vals)


# --------------------------------------------------------------------------
# Exhaustive enumeration.

def _compositions(total: int, parts: int) -> list[tuple[int, ...]]:
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            out.append((first,) + rest)
    return out


class DatasetEnumeration:
    """Every dataset producible by the given settings and shot counts.

    Holds the full count table, the multinomial log-coefficients, and a
    lazily computed per-dataset maximum log-likelihood (one batched solve
    shared by every true state queried against this enumeration).
    """

    def __init__(self, settings, shots, cap: int = DEFAULT_ENUMERATION_CAP):
        self.pairs = _normalize_settings(settings, shots)
        total = 1
        for povm, n in self.pairs:
            total *= math.comb(n + len(povm.effects) - 1, len(povm.effects) - 1)
        if total > cap:
            raise EnumerationCapError(
                f"enumeration would produce {total} datasets, cap is {cap}",
                count=total,
                cap=cap,
            )
        self.n_datasets = total
        self.effects, self._sizes = _stack_template(self.pairs)

        max_shots = max((n for _, n in self.pairs), default=0)
        logfact = _log_factorials(max_shots)
        per_setting_counts = []
        per_setting_coefs = []
        for povm, n in self.pairs:
            rows = np.array(_compositions(n, len(povm.effects)), dtype=float)
            per_setting_counts.append(rows)
            per_setting_coefs.append(logfact[n] - logfact[rows.astype(int)].sum(axis=1))

        grids = np.meshgrid(
            *[np.arange(len(c)) for c in per_setting_counts], indexing="ij"
        )
        idx = [g.reshape(-1) for g in grids]
        self.counts = np.hstack(
            [per_setting_counts[s][idx[s]] for s in range(len(self.pairs))]
        )
        self.log_coefs = sum(per_setting_coefs[s][idx[s]] for s in range(len(self.pairs)))
        self._loglik_max = None
        self._converged = None

    def loglik_max(self) -> np.ndarray:
        if self._loglik_max is None:
            _, logliks, _, converged, _ = solve_mle_counts(self.effects, self.counts)
            if not converged.all():
                raise ValidationError("enumeration MLE failed to converge")
            self._loglik_max = logliks
            self._converged = converged
        return self._loglik_max

    def log_prob(self, rho: DensityMatrix) -> np.ndarray:
        log_p = _log_prob_terms(rho, self.pairs)
        return self.log_coefs + _counts_loglik(self.counts, log_p)

    def lr_values(self, rho: DensityMatrix) -> np.ndarray:
        log_p = _log_prob_terms(rho, self.pairs)
        loglik = _counts_loglik(self.counts, log_p)
        lam = -2.0 * (loglik - self.loglik_max())
        return np.where(np.isfinite(loglik), np.maximum(lam, 0.0), np.inf)


def exhaustive_ccdf(
    true_state: DensityMatrix,
    settings,
    shots,
    cap: int = DEFAULT_ENUMERATION_CAP,
    enumeration: DatasetEnumeration | None = None,
) -> CcdfCurve:
    """Exact CCDF of the ratio statistic at ``true_state``.

    Enumerates all datasets, evaluates the statistic and its probability
    for each, and tabulates F(lambda_i) = P(statistic >= lambda_i) at the
    atoms of the distribution.
    """
    enum = enumeration or DatasetEnumeration(settings, shots, cap)
    prob = np.exp(enum.log_prob(true_state))
    lam = enum.lr_values(true_state)
    keep = prob > 0
    lam = np.round(lam[keep], 9)
    prob = prob[keep]
    atoms, inverse = np.unique(lam, return_inverse=True)
    masses = np.bincount(inverse, weights=prob)
    tail = np.cumsum(masses[::-1])[::-1]
    return CcdfCurve(atoms, tail, provenance="exhaustive")


def state_dependent_cutoff(
    true_state: DensityMatrix,
    settings,
    shots,
    alpha: float,
    cap: int = DEFAULT_ENUMERATION_CAP,
    enumeration: DatasetEnumeration | None = None,
) -> float:
    """Smallest cutoff c with P(statistic > c | true_state) <= 1 - alpha."""
    if not (0.0 < alpha < 1.0):
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    curve = exhaustive_ccdf(true_state, settings, shots, cap, enumeration)
    beyond = np.concatenate([curve.values[1:], [0.0]])
    idx = np.flatnonzero(beyond <= (1.0 - alpha) + COVERAGE_SLACK)
    return float(curve.lambdas[idx[0]])


# --------------------------------------------------------------------------
# Monte Carlo coverage.

@dataclass(frozen=True, eq=False)
class CoverageReport:
    """Result of a coverage Monte Carlo run."""

    true_state: DensityMatrix
    trials: int
    hits: int
    coverage: float
    wilson_interval: tuple[float, float]
    rule: ThresholdRule | None
    alpha: float
    cutoff: float
    solver_failures: int
    seed: int


def lr_samples(
    true_state: DensityMatrix,
    settings,
    shots,
    trials: int,
    seed: int,
    cache: MleCache | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Ratio-statistic samples lambda(true_state) over simulated datasets.

    Returns (lambda values, converged flags); each trial's dataset is a
    fresh multinomial draw, and duplicate count vectors share one MLE
    solve via the cache.
    """
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    pairs = _normalize_settings(settings, shots)
    effects, _ = _stack_template(pairs)
    cache = cache or MleCache(effects)
    streams = np.random.SeedSequence(seed).spawn(len(pairs))
    blocks = []
    for (povm, n), stream in zip(pairs, streams):
        p = born_probabilities(true_state, povm)
        rng = np.random.Generator(np.random.Philox(stream))
        blocks.append(rng.multinomial(n, p / p.sum(), size=trials))
    counts = np.hstack(blocks).astype(float)

    lmax, converged = cache.loglik_max(counts)
    log_p = _log_prob_terms(true_state, pairs)
    ltrue = _counts_loglik(counts, log_p)
    lam = np.where(np.isfinite(ltrue), np.maximum(-2.0 * (ltrue - lmax), 0.0), np.inf)
    return lam, converged


def coverage_mc(
    true_state: DensityMatrix,
    settings,
    shots,
    rule: ThresholdRule,
    alpha: float,
    trials: int,
    seed: int,
    cache: MleCache | None = None,
) -> CoverageReport:
    """Empirical coverage of the region estimator at one true state.

    A trial is a hit when the statistic of the true state is at most the
    cutoff.  Solver failures are counted separately and never counted as
    hits.  Deterministic given (seed, trials, rule).
    """
    cutoff = solve_threshold(rule, alpha)
    lam, converged = lr_samples(true_state, settings, shots, trials, seed, cache)
    hits = int(np.sum(converged & (lam <= cutoff)))
    failures = int(np.sum(~converged))
    return CoverageReport(
        true_state=true_state,
        trials=trials,
        hits=hits,
        coverage=hits / trials,
        wilson_interval=wilson_interval(hits, trials),
        rule=rule,
        alpha=alpha,
        cutoff=float(cutoff),
        solver_failures=failures,
        seed=seed,
    )


def qubit_state_grid(n_ball: int = 20) -> list[DensityMatrix]:
    """Canonical qubit test states: the six Pauli eigenstates, the
    maximally mixed state, and ``n_ball`` low-discrepancy interior points."""
    states = []
    for axis in range(3):
        for sign in (1.0, -1.0):
            v = np.zeros(3)
            v[axis] = sign
            states.append(bloch_to_state(v, 2))
    states.append(DensityMatrix.maximally_mixed(2))
    if n_ball > 0:
        for v in ball_points(n_ball, 3):
            states.append(bloch_to_state(v, 2))
    return states


# --------------------------------------------------------------------------
# Discrete models and the probability-ratio estimator.

@dataclass(frozen=True, eq=False)
class DiscreteModel:
    """A finite family of states, a finite dataset space, and weights.

    ``likelihoods[i, j]`` is P(dataset j | state i); rows sum to one.
    ``dataset_weights`` plays the role of the unconditional P(D) derived
    from the averaging measure; ``volume_weights`` define region volume.
    """

    states: np.ndarray
    likelihoods: np.ndarray
    prior: np.ndarray
    dataset_weights: np.ndarray
    volume_weights: np.ndarray

    def __post_init__(self):
        lik = np.asarray(self.likelihoods, dtype=float)
        if lik.ndim != 2:
            raise ValidationError("likelihood table must be 2-d")
        s, d = lik.shape
        if np.any(lik < 0):
            raise ValidationError("likelihoods must be nonnegative")
        rowsums = lik.sum(axis=1)
        if np.max(np.abs(rowsums - 1.0)) > 1e-12:
            raise ValidationError("each likelihood row must sum to 1 within 1e-12")
        prior = np.asarray(self.prior, dtype=float)
        weights = np.asarray(self.dataset_weights, dtype=float)
        vol = np.asarray(self.volume_weights, dtype=float)
        if prior.shape != (s,) or vol.shape != (s,) or weights.shape != (d,):
            raise ValidationError("weight vector shapes do not match the table")
        if np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-12:
            raise ValidationError("prior must be nonnegative and sum to 1")
        if np.any(vol <= 0):
            raise ValidationError("volume weights must be positive")
        if np.any(weights < 0):
            raise ValidationError("dataset weights must be nonnegative")
        zero = weights <= 0
        if np.any(zero):
            producible = (lik[prior > 0][:, zero] > 0).any()
            if producible:
                raise ValidationError(
                    "a dataset with zero unconditional weight is producible by a "
                    "state with nonzero prior mass"
                )
        for arr in (lik, prior, weights, vol):
            arr.setflags(write=False)
        object.__setattr__(self, "likelihoods", lik)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "dataset_weights", weights)
        object.__setattr__(self, "volume_weights", vol)
        object.__setattr__(self, "states", np.asarray(self.states))

    @property
    def n_states(self) -> int:
        return self.likelihoods.shape[0]

    @property
    def n_datasets(self) -> int:
        return self.likelihoods.shape[1]


def make_discrete_model(
    states,
    likelihoods,
    prior=None,
    dataset_weights=None,
    volume_weights=None,
) -> DiscreteModel:
    lik = np.asarray(likelihoods, dtype=float)
    s, d = lik.shape
    if prior is None:
        prior = np.full(s, 1.0 / s)
    prior = np.asarray(prior, dtype=float)
    if dataset_weights is None:
        dataset_weights = prior @ lik
    elif isinstance(dataset_weights, str):
        if dataset_weights != "max_likelihood":
            raise ValidationError(f"unknown weight scheme {dataset_weights!r}")
        w = lik.max(axis=0)
        dataset_weights = w / w.sum()
    if volume_weights is None:
        volume_weights = np.full(s, 1.0 / s)
    return DiscreteModel(
        states=np.asarray(states),
        likelihoods=lik,
        prior=prior,
        dataset_weights=np.asarray(dataset_weights, dtype=float),
        volume_weights=np.asarray(volume_weights, dtype=float),
    )


def coin_model(
    p_values,
    shots: int,
    prior=None,
    dataset_weights=None,
    volume_weights=None,
) -> DiscreteModel:
    """Binomial model: states are heads-probabilities, datasets are
    heads counts 0..shots."""
    p_values = np.asarray(p_values, dtype=float)
    if np.any((p_values < 0) | (p_values > 1)):
        raise ValidationError("coin probabilities must lie in [0, 1]")
    heads = np.arange(shots + 1)
    logfact = _log_factorials(shots)
    logcoef = logfact[shots] - logfact[heads] - logfact[shots - heads]
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.log(p_values)[:, None] * heads[None, :]
        logq = np.log(1.0 - p_values)[:, None] * (shots - heads)[None, :]
    logp = np.where(heads[None, :] == 0, 0.0, logp)
    logq = np.where((shots - heads)[None, :] == 0, 0.0, logq)
    lik = np.exp(logcoef[None, :] + logp + logq)
    lik = np.where(np.isfinite(lik), lik, 0.0)
    lik = lik / lik.sum(axis=1, keepdims=True)
    return make_discrete_model(p_values, lik, prior, dataset_weights, volume_weights)


def _ratio_table(model: DiscreteModel) -> np.ndarray:
    lik = model.likelihoods
    w = model.dataset_weights
    with np.errstate(divide="ignore", invalid="ignore"):
        r = lik / w[None, :]
    r = np.where(w[None, :] > 0, r, np.where(lik > 0, np.inf, 0.0))
    return r


def pr_assignment(model: DiscreteModel, alpha: float) -> np.ndarray:
    """Boolean (state, dataset) connection table of the PR estimator.

    Each state is connected to datasets in descending order of the
    probability ratio (ties broken by ascending dataset index) until its
    conditional probability mass reaches alpha.
    """
    if not (0.0 < alpha < 1.0):
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    r = _ratio_table(model)
    lik = model.likelihoods
    s, d = lik.shape
    assign = np.zeros((s, d), dtype=bool)
    for i in range(s):
        order = np.lexsort((np.arange(d), -r[i]))
        csum = np.cumsum(lik[i, order])
        npick = int(np.searchsorted(csum, alpha - COVERAGE_SLACK, side="left")) + 1
        assign[i, order[: min(npick, d)]] = True
    return assign


def pr_region(model: DiscreteModel, dataset_index: int, alpha: float) -> np.ndarray:
    """State indices connected to one dataset by the PR estimator."""
    if not (0 <= dataset_index < model.n_datasets):
        raise ValidationError(f"dataset index {dataset_index} out of range")
    return np.flatnonzero(pr_assignment(model, alpha)[:, dataset_index])


def assignment_coverage(model: DiscreteModel, assignment: np.ndarray) -> np.ndarray:
    return (model.likelihoods * assignment).sum(axis=1)


def averaged_volume(model: DiscreteModel, assignment: np.ndarray) -> float:
    """Expected region volume sum_D P(D) V(region(D))."""
    vols = assignment.T.astype(float) @ model.volume_weights
    return float(model.dataset_weights @ vols)


def random_challenger(model: DiscreteModel, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """A valid region assignment built from random dataset orderings."""
    lik = model.likelihoods
    s, d = lik.shape
    assign = np.zeros((s, d), dtype=bool)
    for i in range(s):
        order = rng.permutation(d)
        csum = np.cumsum(lik[i, order])
        npick = int(np.searchsorted(csum, alpha - COVERAGE_SLACK, side="left")) + 1
        assign[i, order[: min(npick, d)]] = True
    return assign


def lr_assignment(model: DiscreteModel, alpha: float) -> np.ndarray:
    """The discretized constant-cutoff likelihood-ratio estimator.

    The statistic is -2 log of the likelihood over its column maximum;
    the cutoff is the smallest constant making every state's coverage
    reach alpha.
    """
    lik = model.likelihoods
    col_max = lik.max(axis=0)
    with np.errstate(divide="ignore"):
        lam = -2.0 * (np.log(np.where(lik > 0, lik, 1.0)) - np.log(col_max)[None, :])
    lam = np.where(lik > 0, lam, np.inf)
    cutoffs = []
    for i in range(lik.shape[0]):
        order = np.argsort(lam[i], kind="stable")
        csum = np.cumsum(lik[i, order])
        npick = int(np.searchsorted(csum, alpha - COVERAGE_SLACK, side="left"))
        cutoffs.append(lam[i, order[min(npick, lik.shape[1] - 1)]])
    cutoff = max(cutoffs)
    return lam <= cutoff + 1e-12


@dataclass(frozen=True)
class PrComparison:
    pr_volume: float
    challenger_volume: float
    margin: float


def pr_study(
    p_grid,
    shots: int,
    alpha: float,
    n_challengers: int = 50,
    seed: int = 0,
) -> dict:
    """A full optimality exercise on a coin model, as a JSON-ready dict.

    Builds the model with unconditional weights proportional to the
    column-maximum likelihood, forms the PR assignment, and compares its
    average volume against seeded random challengers and the discretized
    constant-cutoff ratio estimator, for a uniform and a randomized
    volume-weight vector (the construction itself never depends on the
    volume weights).
    """
    p_grid = np.asarray(p_grid, dtype=float)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    random_vol = rng.uniform(0.5, 1.5, size=len(p_grid))
    random_vol = random_vol / random_vol.sum()
    results = {"p_grid": p_grid.tolist(), "shots": shots, "alpha": alpha, "seed": seed}
    comparisons = {}
    for vol_name, vol in (("uniform", None), ("randomized", random_vol)):
        model = coin_model(p_grid, shots, dataset_weights="max_likelihood",
                           volume_weights=vol)
        assign = pr_assignment(model, alpha)
        cov = assignment_coverage(model, assign)
        pr_vol = averaged_volume(model, assign)
        lr = lr_assignment(model, alpha)
        lr_check = pr_optimality_check(model, alpha, lr)
        ch_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed + 1)))
        margins = []
        for _ in range(n_challengers):
            ch = random_challenger(model, alpha, ch_rng)
            margins.append(pr_optimality_check(model, alpha, ch).margin)
        comparisons[vol_name] = {
            "pr_average_volume": pr_vol,
            "lr_average_volume": lr_check.challenger_volume,
            "challenger_min_margin": float(min(margins)) if margins else None,
            "challenger_max_margin": float(max(margins)) if margins else None,
            "min_coverage": float(cov.min()),
        }
        if vol_name == "uniform":
            results["pr_regions"] = [
                np.flatnonzero(assign[:, j]).tolist() for j in range(model.n_datasets)
            ]
            results["coverage"] = cov.tolist()
    results["comparisons"] = comparisons
    results["challengers"] = n_challengers
    return results


def pr_optimality_check(
    model: DiscreteModel, alpha: float, challenger: np.ndarray
) -> PrComparison:
    """Verify the PR estimator's average volume against a challenger.

    The challenger must satisfy the coverage constraint for every state
    (checked first, with the violating state reported); the PR estimator
    is then asserted to have average volume no larger than the
    challenger's, up to 1e-12.
    """
    challenger = np.asarray(challenger, dtype=bool)
    if challenger.shape != model.likelihoods.shape:
        raise ValidationError("challenger assignment has the wrong shape")
    cov = assignment_coverage(model, challenger)
    bad = np.flatnonzero(cov < alpha - 1e-9)
    if bad.size:
        i = int(bad[0])
        raise ValidationError(
            f"challenger coverage {cov[i]:.6f} < alpha at state index {i} "
            f"(state {model.states[i]!r})"
        )
    pr_vol = averaged_volume(model, pr_assignment(model, alpha))
    ch_vol = averaged_volume(model, challenger)
    if pr_vol > ch_vol + 1e-12:
        raise RuntimeError(
            f"PR estimator average volume {pr_vol} exceeds challenger's {ch_vol}"
        )
    return PrComparison(pr_volume=pr_vol, challenger_volume=ch_vol, margin=ch_vol - pr_vol)


# --------------------------------------------------------------------------
# Monte Carlo region volume (qubit) and the naive-error-bar baseline.

@dataclass(frozen=True)
class VolumeEstimate:
    volume: float
    fraction: float
    hits: int
    samples: int


def _uniform_ball(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((n, 3))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    radius = rng.random(n) ** (1.0 / 3.0)
    return z * radius[:, None]


def _bloch_batch_matrices(vectors: np.ndarray) -> np.ndarray:
    basis = gell_mann_basis(2)
    return np.eye(2, dtype=complex) / 2 + 0.5 * np.einsum("bi,ijk->bjk", vectors, basis)


def region_volume_mc(region, n_samples: int = 100_000, seed: int = 0) -> VolumeEstimate:
    """Rejection-sampling estimate of a qubit region's Bloch-ball volume."""
    from .likelihood import LogLikelihood

    if region.dataset.dim != 2:
        raise ValidationError("Monte Carlo volume estimation is qubit-only")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    pts = _uniform_ball(int(n_samples), rng)
    ll = LogLikelihood(region.dataset)
    vals = ll.value_many(_bloch_batch_matrices(pts))
    lam = np.where(np.isfinite(vals), -2.0 * (vals - region.mle.loglik_max), np.inf)
    hits = int(np.sum(lam <= region.lambda_alpha))
    fraction = hits / n_samples
    ball_volume = 4.0 * math.pi / 3.0
    return VolumeEstimate(fraction * ball_volume, fraction, hits, int(n_samples))


@dataclass(frozen=True, eq=False)
class BaselineReport:
    """Calibrated axis-aligned error-bar ellipsoid vs the ratio region."""

    scale: float
    axes: np.ndarray
    base_radii: np.ndarray
    radii: np.ndarray
    center: np.ndarray
    baseline_volume: float
    lr_volume: float
    lr_cutoff: float
    rule: ThresholdRule
    alpha: float
    min_calibrated_coverage: float
    calibration_trials: int
    seed: int


def naive_ellipsoid_baseline(
    dataset,
    alpha: float,
    calibration_trials: int = 2000,
    seed: int = 0,
    state_grid=None,
    rule: ThresholdRule | None = None,
    volume_samples: int = 100_000,
) -> BaselineReport:
    """Smallest traditional error bars with guaranteed grid coverage.

    The baseline is an ellipsoid centered at the MLE with axes along the
    measured observables and per-axis radii proportional to 1/sqrt(shots),
    scaled by one global factor calibrated so that, for every state on
    the calibration grid, the Monte Carlo coverage is at least alpha.
    Its Bloch-ball-clipped volume is compared against the ratio region's.
    """
    from .likelihood import LogLikelihood, mle as solve_mle
    from .region import build_region
    from .threshold import rule_from_name

    if dataset.dim != 2:
        raise ValidationError("the error-bar baseline is defined for qubits")
    pairs = []
    for s in dataset.settings:
        if len(s.effects) != 2:
            raise ValidationError("baseline needs two-outcome settings")
        pairs.append((s, s.total_shots))
    axes = []
    for s, _ in pairs:
        v = state_to_bloch_of_effect(s)
        norm = np.linalg.norm(v)
        if norm <= 1e-10:
            raise ValidationError(f"setting {s.name!r} has no Bloch direction")
        axes.append(v / norm)
    axes = np.array(axes)
    if axes.shape[0] != 3 or np.max(np.abs(axes @ axes.T - np.eye(3))) > 1e-8:
        raise ValidationError("baseline needs three mutually orthogonal settings")
    shots = np.array([n for _, n in pairs], dtype=float)
    base_radii = 1.0 / np.sqrt(shots)

    if state_grid is None:
        state_grid = qubit_state_grid(20)
    effects, _ = _stack_template(pairs)
    cache = _BlochMleCache(effects)

    streams = np.random.SeedSequence(seed).spawn(len(state_grid))
    scales = []
    coverage_at = []
    trial_scales = []
    for true_state, stream in zip(state_grid, streams):
        rng = np.random.Generator(np.random.Philox(stream))
        blocks = []
        for s, n in pairs:
            p = born_probabilities(true_state, s)
            blocks.append(rng.multinomial(n, p / p.sum(), size=calibration_trials))
        counts = np.hstack(blocks).astype(float)
        mle_bloch = cache.bloch(counts)
        delta = state_to_bloch(true_state)[None, :] - mle_bloch
        proj = delta @ axes.T
        s_trial = np.sqrt(np.sum((proj / base_radii[None, :]) ** 2, axis=1))
        k = int(math.ceil(alpha * calibration_trials))
        scales.append(float(np.partition(s_trial, k - 1)[k - 1]))
        trial_scales.append(s_trial)
    scale = max(scales)
    for s_trial in trial_scales:
        coverage_at.append(float(np.mean(s_trial <= scale)))

    mle_result = solve_mle(dataset)
    center = state_to_bloch(mle_result.rho_mle)
    radii = scale * base_radii

    if rule is None:
        rule = rule_from_name("chi2", dataset)
    region = build_region(dataset, alpha, rule, mle_result=mle_result)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed + 1)))
    pts = _uniform_ball(int(volume_samples), rng)
    ll = LogLikelihood(dataset)
    vals = ll.value_many(_bloch_batch_matrices(pts))
    lam = np.where(np.isfinite(vals), -2.0 * (vals - mle_result.loglik_max), np.inf)
    lr_hits = int(np.sum(lam <= region.lambda_alpha))
    proj = (pts - center[None, :]) @ axes.T
    inside = np.sum((proj / radii[None, :]) ** 2, axis=1) <= 1.0
    ball_volume = 4.0 * math.pi / 3.0
    return BaselineReport(
        scale=scale,
        axes=axes,
        base_radii=base_radii,
        radii=radii,
        center=center,
        baseline_volume=float(inside.mean() * ball_volume),
        lr_volume=float(lr_hits / volume_samples * ball_volume),
        lr_cutoff=region.lambda_alpha,
        rule=rule,
        alpha=alpha,
        min_calibrated_coverage=min(coverage_at),
        calibration_trials=calibration_trials,
        seed=seed,
    )


def state_to_bloch_of_effect(setting) -> np.ndarray:
    """Bloch direction of a two-outcome setting, from E_plus - E_minus."""
    from .bloch import matrix_to_bloch

    diff = setting.effects[0].matrix - setting.effects[1].matrix
    return matrix_to_bloch(diff)


class _BlochMleCache:
    """Like MleCache but memoizes the MLE Bloch vector per count row."""

    def __init__(self, effects: np.ndarray):
        self.effects = effects
        self._bloch: dict[tuple, np.ndarray] = {}

    def bloch(self, counts: np.ndarray) -> np.ndarray:
        keys = [tuple(row) for row in counts]
        missing = [k for k in dict.fromkeys(keys) if k not in self._bloch]
        if missing:
            batch = np.array(missing, dtype=float)
            states, _, _, converged, _ = solve_mle_counts(self.effects, batch)
            if not converged.all():
                raise ValidationError("baseline calibration MLE failed to converge")
            basis = gell_mann_basis(2)
            vecs = np.real(np.einsum("kij,bji->bk", basis, states))
            for key, v in zip(missing, vecs):
                self._bloch[key] = v
        return np.array([self._bloch[k] for k in keys])
