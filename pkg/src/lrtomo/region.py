"""The loglikelihood-ratio confidence region and its geometric queries.

A region is defined implicitly: rho belongs iff the ratio statistic
lambda(rho) is at most the cutoff (closure convention, so the MLE is
always a member).  Membership is a single likelihood comparison; richer
queries -- support intervals, boundary points, explicit enclosures --
exploit convexity of the statistic for standard tomographic data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bloch import bloch_to_matrix, gell_mann_basis, matrix_to_bloch, state_to_bloch
from .errors import ConvergenceError, ValidationError
from .geometry import minimum_enclosing_ball, minimum_volume_ellipsoid, sphere_directions
from .likelihood import (
    LogLikelihood,
    MleResult,
    loglikelihood_ratio,
    mle,
)
from .states import DensityMatrix, TomographyDataset
from .threshold import FixedCutoff, ThresholdRule, solve_threshold

LAMBDA_MATCH_ATOL = 1e-9
BOUNDARY_LAMBDA_ATOL = 1e-8
SUPPORT_T_ATOL = 1e-6
HULL_SV_CUTOFF = 1e-9


@dataclass(frozen=True, eq=False)
class RegionSpec:
    """A dataset, a confidence level, a cutoff rule and the resolved cutoff."""

    dataset: TomographyDataset
    alpha: float
    rule: ThresholdRule
    lambda_alpha: float
    mle: MleResult

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValidationError(f"alpha must be in (0, 1), got {self.alpha}")
        expected = solve_threshold(self.rule, self.alpha)
        if np.isinf(expected) or np.isinf(self.lambda_alpha):
            if expected != self.lambda_alpha:
                raise ValidationError("cutoff does not match its rule")
        elif abs(expected - self.lambda_alpha) > LAMBDA_MATCH_ATOL:
            raise ValidationError(
                f"cutoff {self.lambda_alpha} does not match rule value {expected}"
            )
        check = LogLikelihood(self.dataset).value(self.mle.rho_mle)
        if not self.mle.converged:
            raise ConvergenceError("cannot build a region from a non-converged MLE")
        if abs(check - self.mle.loglik_max) > 1e-7:
            raise ValidationError("MLE result does not correspond to the dataset")


def build_region(
    dataset: TomographyDataset,
    alpha: float,
    rule: ThresholdRule,
    mle_result: MleResult | None = None,
) -> RegionSpec:
    if mle_result is None:
        mle_result = mle(dataset)
    if not mle_result.converged:
        raise ConvergenceError("MLE did not converge within the iteration cap")
    cutoff = solve_threshold(rule, alpha)
    return RegionSpec(dataset, alpha, rule, cutoff, mle_result)


def contains(region: RegionSpec, rho: DensityMatrix) -> bool:
    """Membership test: lambda(rho) <= cutoff."""
    lam = loglikelihood_ratio(region.dataset, rho, region.mle)
    return bool(lam <= region.lambda_alpha)


# --------------------------------------------------------------------------
# Slice solver: minimize the ratio statistic over {Tr(X rho) = t}.

def _project_slice_qubit(mat: np.ndarray, x_vec: np.ndarray, c: float) -> np.ndarray:
    """Exact projection onto {PSD, tr 1, <X,.> = t} for d = 2.

    In Bloch coordinates the set is the disk {v . n = c, |v| <= 1} and the
    Frobenius metric is Euclidean, so the projection is closed-form.
    """
    v = matrix_to_bloch(mat)
    norm = np.linalg.norm(x_vec)
    n_hat = x_vec / norm
    v = v + (c - v @ n_hat) * n_hat
    disk_center = c * n_hat
    radial = v - disk_center
    disk_r2 = max(0.0, 1.0 - c * c)
    r = np.linalg.norm(radial)
    if r * r > disk_r2:
        v = disk_center + radial * (np.sqrt(disk_r2) / r)
    return bloch_to_matrix(v, 2)


def _project_psd_single(mat: np.ndarray) -> np.ndarray:
    mat = (mat + mat.conj().T) / 2
    w, v = np.linalg.eigh(mat)
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


def _project_slice_dykstra(
    mat: np.ndarray, x_mat: np.ndarray, t: float, tol: float = 1e-12, max_iter: int = 5000
) -> np.ndarray:
    """Dykstra alternation between the PSD cone and {tr=1, <X,.>=t}."""
    d = mat.shape[0]
    eye = np.eye(d, dtype=complex)
    gram = np.array(
        [
            [d, np.trace(x_mat).real],
            [np.trace(x_mat).real, np.real(np.vdot(x_mat, x_mat))],
        ]
    )
    gram_inv = np.linalg.inv(gram)

    def affine(h):
        resid = np.array([np.trace(h).real - 1.0, np.real(np.vdot(x_mat, h)) - t])
        a, b = gram_inv @ resid
        return h - a * eye - b * x_mat

    y = mat
    p = np.zeros_like(mat)
    q = np.zeros_like(mat)
    for _ in range(max_iter):
        u = _project_psd_single(y + p)
        p = y + p - u
        v = affine(u + q)
        q = u + q - v
        y = v
        tr_res = abs(np.trace(u).real - 1.0)
        x_res = abs(np.real(np.vdot(x_mat, u)) - t)
        if tr_res <= tol and x_res <= tol and np.max(np.abs(u - v)) <= 10 * tol:
            return u
    raise ConvergenceError("slice projection did not converge")


def _slice_projector(dim: int, x_mat: np.ndarray, t: float):
    if dim == 2:
        x_vec = matrix_to_bloch(x_mat)
        c = 2.0 * t - np.trace(x_mat).real
        norm = np.linalg.norm(x_vec)
        c = c / norm
        c = min(1.0, max(-1.0, c))
        return lambda m: _project_slice_qubit(m, x_vec, c)
    return lambda m: _project_slice_dykstra(m, x_mat, t)


def _slice_min_lr(
    ll: LogLikelihood,
    loglik_max: float,
    x_mat: np.ndarray,
    t: float,
    cutoff: float,
    start: np.ndarray,
    lr_tol: float = 1e-8,
    max_iter: int = 20_000,
):
    """Minimize lambda over the slice; stops early once below ``cutoff``.

    Returns (lambda_min, minimizer).  Projected gradient ascent of the
    log-likelihood restricted to the slice, with Armijo backtracking and
    momentum restarts, mirroring the unconstrained MLE engine.
    """
    project = _slice_projector(ll.dim, x_mat, t)
    candidates = [project(start), project(np.eye(ll.dim, dtype=complex) / ll.dim)]
    x = None
    fx = -np.inf
    for cand in candidates:
        val = ll.value(cand)
        if val > fx:
            fx, x = val, cand
    if x is None or fx == -np.inf:
        return np.inf, candidates[0]

    lam = lambda f: -2.0 * (f - loglik_max)
    best_f = fx
    best_x = x
    if lam(best_f) <= cutoff:
        return max(lam(best_f), 0.0), best_x

    step = 1.0 / max(1.0, ll.counts.sum())
    y = x
    x_prev = x
    t_mom = 1.0
    noise = 4 * np.finfo(float).eps
    plateau = 0
    for _ in range(max_iter):
        fy = ll.value(y)
        if not np.isfinite(fy):
            y = x
            fy = fx
        g = ll.gradient(y)
        accepted = False
        for _ in range(60):
            z = project(y + step * g)
            fz = ll.value(z)
            deriv = np.real(np.vdot(g, z - y))
            if fz >= fy + 1e-4 * deriv - noise * (1 + abs(fy)):
                accepted = True
                break
            step /= 2
        if not accepted:
            z, fz = x, fx
        else:
            step *= 1.25

        t_new = (1 + np.sqrt(1 + 4 * t_mom * t_mom)) / 2
        y = z + ((t_mom - 1) / t_new) * (z - x_prev)
        if fz < fx:
            y = z
            t_new = 1.0
        x_prev, x, fx, t_mom = x, z, fz, t_new

        if fz > best_f + 1e-14 * (1 + abs(best_f)):
            improvement = fz - best_f
            best_f, best_x = fz, z
            plateau = 0 if improvement > 1e-12 * (1 + abs(best_f)) else plateau + 1
        else:
            plateau += 1
        if lam(best_f) <= cutoff:
            return max(lam(best_f), 0.0), best_x
        if plateau >= 25:
            break
    return max(lam(best_f), 0.0), best_x


def _max_expectation(region: RegionSpec, x_mat: np.ndarray) -> float:
    ll = LogLikelihood(region.dataset)
    lmax = region.mle.loglik_max
    cutoff = region.lambda_alpha
    mle_m = region.mle.rho_mle.matrix
    t_mle = float(np.real(np.vdot(x_mat, mle_m)))
    t_hi = float(np.linalg.eigvalsh(x_mat)[-1])
    if t_hi - t_mle <= SUPPORT_T_ATOL:
        return t_hi
    lr_hi, _ = _slice_min_lr(ll, lmax, x_mat, t_hi, cutoff, mle_m)
    if lr_hi <= cutoff:
        return t_hi
    lo, hi = t_mle, t_hi
    warm = mle_m
    while hi - lo > SUPPORT_T_ATOL:
        mid = 0.5 * (lo + hi)
        lr_mid, x_mid = _slice_min_lr(ll, lmax, x_mat, mid, cutoff, warm)
        if lr_mid <= cutoff:
            lo = mid
            warm = x_mid
        else:
            hi = mid
    return lo


def support_interval(region: RegionSpec, observable) -> tuple[float, float]:
    """Range of Tr(X rho) over the region, to 1e-6 in the endpoint.

    Each endpoint solves a convex program: the statistic is minimized on
    slices Tr(X rho) = t and the largest feasible t is found by
    bisection.  For informationally incomplete data the region may touch
    the physicality boundary, in which case the physical extremes are
    returned.
    """
    x_mat = np.asarray(observable, dtype=complex)
    if x_mat.shape != (region.dataset.dim,) * 2:
        raise ValidationError(
            f"observable shape {x_mat.shape} does not match dimension {region.dataset.dim}"
        )
    if np.max(np.abs(x_mat - x_mat.conj().T)) > 1e-10:
        raise ValidationError("observable must be Hermitian")
    d = region.dataset.dim
    traceless = x_mat - (np.trace(x_mat) / d) * np.eye(d)
    if np.max(np.abs(traceless)) <= 1e-12:
        c = float(np.trace(x_mat).real / d)
        return (c, c)
    hi = _max_expectation(region, x_mat)
    lo = -_max_expectation(region, -x_mat)
    t_mle = float(np.real(np.vdot(x_mat, region.mle.rho_mle.matrix)))
    return (min(lo, t_mle), max(hi, t_mle))


# --------------------------------------------------------------------------
# Boundary sampling.

@dataclass(frozen=True, eq=False)
class BoundaryPoint:
    """A point where the ray from the MLE leaves the region (or the ball)."""

    bloch: np.ndarray
    lambda_value: float
    clipped: bool


def _physical_exit(v0: np.ndarray, unit: np.ndarray, dim: int) -> float:
    """Largest step along ``unit`` keeping the state physical."""
    if dim == 2:
        b = 2.0 * float(v0 @ unit)
        c = float(v0 @ v0) - 1.0
        disc = max(0.0, b * b - 4.0 * c)
        return max(0.0, (-b + np.sqrt(disc)) / 2.0)

    def eigmin(t):
        return float(np.linalg.eigvalsh(bloch_to_matrix(v0 + t * unit, dim))[0])

    hi = 0.25
    while eigmin(hi) >= -1e-13 and hi < 8.0:
        hi *= 2.0
    if eigmin(hi) >= -1e-13:
        return hi
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if eigmin(mid) >= -1e-13:
            lo = mid
        else:
            hi = mid
    return lo


def boundary_sample(region: RegionSpec, direction) -> BoundaryPoint:
    """Point on the ray from the MLE where lambda equals the cutoff.

    The statistic is convex with its minimum at the MLE, so it is
    non-decreasing along the ray and the bracket is always valid.  When
    lambda stays below the cutoff all the way to the physicality
    boundary, the exit point is returned flagged ``clipped``.
    """
    direction = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(direction)
    if norm <= 0:
        raise ValidationError("direction must be nonzero")
    unit = direction / norm
    dim = region.dataset.dim
    v0 = state_to_bloch(region.mle.rho_mle)
    ll = LogLikelihood(region.dataset)
    lmax = region.mle.loglik_max

    def lr_at(t: float) -> float:
        val = ll.value(bloch_to_matrix(v0 + t * unit, dim))
        return np.inf if val == -np.inf else max(0.0, -2.0 * (val - lmax))

    t_exit = _physical_exit(v0, unit, dim)
    lam_exit = lr_at(t_exit)
    if lam_exit <= region.lambda_alpha:
        return BoundaryPoint(v0 + t_exit * unit, lam_exit, True)

    lo, hi = 0.0, t_exit
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        lam = lr_at(mid)
        if abs(lam - region.lambda_alpha) <= BOUNDARY_LAMBDA_ATOL:
            return BoundaryPoint(v0 + mid * unit, lam, False)
        if lam > region.lambda_alpha:
            hi = mid
        else:
            lo = mid
    raise ConvergenceError("boundary bisection did not reach the lambda tolerance")


def boundary_cloud(
    region: RegionSpec, n_samples: int, extra_directions=None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic boundary samples: (points, directions, clipped flags)."""
    m = region.dataset.dim ** 2 - 1
    dirs = sphere_directions(n_samples, m)
    if extra_directions is not None:
        extra = np.asarray(extra_directions, dtype=float)
        dirs = np.vstack([dirs, extra / np.linalg.norm(extra, axis=1, keepdims=True)])
    pts = np.empty_like(dirs)
    clipped = np.zeros(len(dirs), dtype=bool)
    for i, u in enumerate(dirs):
        b = boundary_sample(region, u)
        pts[i] = b.bloch
        clipped[i] = b.clipped
    return pts, dirs, clipped


# --------------------------------------------------------------------------
# Explicit enclosures.

@dataclass(frozen=True, eq=False)
class Enclosure:
    """An explicit ellipsoid or ball covering boundary samples.

    ``basis`` spans the affine hull of the samples around ``center``; for
    full-rank sample sets it is the identity.  Ellipsoids store an SPD
    shape matrix in hull coordinates: x is inside iff its hull residual
    is negligible and (coords - c)^T shape (coords - c) <= 1.
    """

    kind: str
    center: np.ndarray
    shape: np.ndarray | None
    radius: float | None
    basis: np.ndarray
    rank: int
    sample_count: int

    def contains(self, point, tol: float = 1e-8) -> bool:
        point = np.asarray(point, dtype=float)
        delta = point - self.center
        coords = self.basis.T @ delta
        resid = delta - self.basis @ coords
        if np.linalg.norm(resid) > tol:
            return False
        if self.kind == "ball":
            return bool(np.linalg.norm(coords) <= self.radius + tol)
        return bool(coords @ self.shape @ coords <= 1.0 + tol)


def _hull(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    center = points.mean(axis=0)
    resid = points - center
    _, sv, vt = np.linalg.svd(resid, full_matrices=False)
    rank = int(np.sum(sv > HULL_SV_CUTOFF))
    return center, vt[:rank].T, rank


def bounding_ellipsoid(
    region: RegionSpec, n_samples: int = 64, epsilon: float = 1e-5, extra_directions=None
) -> Enclosure:
    """Near-minimum-volume ellipsoid around boundary samples.

    Khachiyan iteration with tolerance ``epsilon``; rank-deficient sample
    sets produce an ellipsoid (or point) within their affine hull, with
    the rank reported.
    """
    m = region.dataset.dim ** 2 - 1
    if n_samples < region.dataset.dim ** 2:
        raise ValidationError(f"need at least {region.dataset.dim ** 2} samples")
    pts, _, _ = boundary_cloud(region, n_samples, extra_directions)
    return ellipsoid_from_points(pts, m, epsilon)


def ellipsoid_from_points(pts: np.ndarray, full_dim: int, epsilon: float = 1e-5) -> Enclosure:
    hull_center, basis, rank = _hull(pts)
    if rank == 0:
        return Enclosure(
            kind="ball",
            center=hull_center,
            shape=None,
            radius=0.0,
            basis=np.zeros((full_dim, 0)),
            rank=0,
            sample_count=len(pts),
        )
    coords = (pts - hull_center) @ basis
    center_r, shape = minimum_volume_ellipsoid(coords, epsilon=epsilon)
    return Enclosure(
        kind="ellipsoid",
        center=hull_center + basis @ center_r,
        shape=shape,
        radius=None,
        basis=basis,
        rank=rank,
        sample_count=len(pts),
    )


def bounding_ball(region: RegionSpec, n_samples: int = 64, extra_directions=None) -> Enclosure:
    """Minimum enclosing ball of boundary samples (exact, Welzl)."""
    m = region.dataset.dim ** 2 - 1
    pts, _, _ = boundary_cloud(region, n_samples, extra_directions)
    return ball_from_points(pts, m)


def ball_from_points(pts: np.ndarray, full_dim: int) -> Enclosure:
    hull_center, basis, rank = _hull(pts)
    if rank == 0:
        return Enclosure(
            kind="ball",
            center=pts[0].copy(),
            shape=None,
            radius=0.0,
            basis=np.zeros((full_dim, 0)),
            rank=0,
            sample_count=len(pts),
        )
    coords = (pts - hull_center) @ basis
    center_r, radius = minimum_enclosing_ball(coords)
    return Enclosure(
        kind="ball",
        center=hull_center + basis @ center_r,
        shape=None,
        radius=float(radius),
        basis=basis,
        rank=rank,
        sample_count=len(pts),
    )


# --------------------------------------------------------------------------
# Reporting.

def rule_params(rule: ThresholdRule) -> dict:
    out = {"rule": rule.label}
    for field in ("k", "copies", "dim", "value"):
        if hasattr(rule, field):
            val = getattr(rule, field)
            out[field] = float(val) if field == "value" else int(val)
    return out


def region_report(
    region: RegionSpec,
    observables: dict | None = None,
    n_boundary: int = 64,
    enclosure_epsilon: float = 1e-5,
) -> tuple[dict, list]:
    """JSON-ready report plus (for d = 2) plot-ready boundary CSV rows.

    The CSV rows are ``(direction_x, direction_y, direction_z, bx, by,
    bz, clipped)`` -- the probe direction and the boundary point it
    produced, suitable for drawing region cross sections.
    """
    mle_bloch = state_to_bloch(region.mle.rho_mle)
    report = {
        "alpha": region.alpha,
        "rule": rule_params(region.rule),
        "lambda_alpha": region.lambda_alpha,
        "mle_bloch": mle_bloch.tolist(),
        "mle_loglik": region.mle.loglik_max,
        "mle_iterations": region.mle.iterations,
    }
    if observables:
        report["support_intervals"] = {
            name: list(support_interval(region, obs)) for name, obs in observables.items()
        }
    pts, dirs, clipped = boundary_cloud(region, n_boundary)
    ell = ellipsoid_from_points(pts, region.dataset.dim ** 2 - 1, enclosure_epsilon)
    ball = ball_from_points(pts, region.dataset.dim ** 2 - 1)
    report["enclosure"] = {
        "ellipsoid": {
            "center": ell.center.tolist(),
            "shape": None if ell.shape is None else ell.shape.tolist(),
            "rank": ell.rank,
        },
        "ball": {"center": ball.center.tolist(), "radius": ball.radius, "rank": ball.rank},
        "sample_count": int(len(pts)),
    }
    rows = []
    if region.dataset.dim == 2:
        for u, p, c in zip(dirs, pts, clipped):
            rows.append(
                (
                    float(u[0]),
                    float(u[1]),
                    float(u[2]),
                    float(p[0]),
                    float(p[1]),
                    float(p[2]),
                    int(c),
                )
            )
    return report, rows
