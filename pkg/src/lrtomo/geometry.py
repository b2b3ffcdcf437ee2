"""Point-set geometry: enclosing ellipsoids and balls, direction sets.

These are generic numerical routines on real point clouds; the region
module applies them to Bloch coordinates.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError, ValidationError

_HALTON_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53)


def halton_sequence(n: int, dim: int, skip: int = 1) -> np.ndarray:
    """First n points of the (unscrambled) Halton sequence in [0, 1)^dim."""
    if dim > len(_HALTON_PRIMES):
        raise ValidationError(f"Halton sequence limited to {len(_HALTON_PRIMES)} dims")
    out = np.empty((n, dim))
    for j in range(dim):
        base = _HALTON_PRIMES[j]
        for i in range(n):
            k = i + skip
            f = 1.0
            r = 0.0
            while k > 0:
                f /= base
                r += f * (k % base)
                k //= base
            out[i, j] = r
    return out


def _inverse_normal_cdf(p: np.ndarray) -> np.ndarray:
    """Acklam's rational approximation of the standard normal quantile.

    Absolute error ~1e-9, ample for generating direction sets.
    """
    a = (-3.969683028665376e1, 2.209460984245205e2, -2.759285104469687e2,
         1.383577518672690e2, -3.066479806614716e1, 2.506628277459239e0)
    b = (-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2,
         6.680131188771972e1, -1.328068155288572e1)
    c = (-7.784894002430293e-3, -3.223964580411365e-1, -2.400758277161838e0,
         -2.549732539343734e0, 4.374664141464968e0, 2.938163982698783e0)
    d = (7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996e0,
         3.754408661907416e0)
    p = np.asarray(p, dtype=float)
    out = np.empty_like(p)
    plow, phigh = 0.02425, 1 - 0.02425

    low = p < plow
    high = p > phigh
    mid = ~(low | high)

    q = np.sqrt(-2 * np.log(p[low])) if low.any() else np.array([])
    if low.any():
        out[low] = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1
        )
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        out[mid] = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
            ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1
        )
    if high.any():
        q = np.sqrt(-2 * np.log(1 - p[high]))
        out[high] = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1
        )
    return out


def sphere_directions(n: int, dim: int) -> np.ndarray:
    """Deterministic low-discrepancy unit vectors in R^dim.

    Halton points mapped through the normal quantile and normalized;
    the same (n, dim) always yields the same set.
    """
    if dim < 1:
        raise ValidationError("dimension must be >= 1")
    raw = halton_sequence(n + 8, dim, skip=1)
    z = _inverse_normal_cdf(np.clip(raw, 1e-12, 1 - 1e-12))
    norms = np.linalg.norm(z, axis=1)
    keep = norms > 1e-12
    z = z[keep][:n]
    if z.shape[0] < n:
        raise ConvergenceError("failed to generate requested directions")
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def ball_points(n: int, dim: int) -> np.ndarray:
    """Deterministic low-discrepancy points in the unit ball of R^dim."""
    pts = []
    skip = 1
    while len(pts) < n:
        raw = halton_sequence(2 * (n + 8), dim, skip=skip) * 2.0 - 1.0
        inside = raw[np.linalg.norm(raw, axis=1) <= 1.0]
        pts.extend(inside.tolist())
        skip += 2 * (n + 8)
    return np.array(pts[:n])


# --------------------------------------------------------------------------
# Minimum-volume enclosing ellipsoid (Khachiyan's algorithm).

def minimum_volume_ellipsoid(
    points: np.ndarray, epsilon: float = 1e-6, max_iterations: int = 200_000
) -> tuple[np.ndarray, np.ndarray]:
    """Center c and shape A with {x : (x-c)^T A (x-c) <= 1} covering points.

    Khachiyan's barycentric-coordinate ascent on the lifted points; stops
    when the worst lifted leverage is within (1 + epsilon) of its target,
    which bounds the volume within (1 + epsilon)^m of the true MVEE.  The
    returned shape is rescaled so every input point satisfies the
    inequality exactly (<= 1).  Points must affinely span R^m; callers
    handle degenerate sets by reducing to the affine hull first.
    """
    pts = np.asarray(points, dtype=float)
    n, m = pts.shape
    if n < m + 1:
        raise ValidationError(f"need at least {m + 1} points in R^{m}, got {n}")
    q = np.hstack([pts, np.ones((n, 1))])
    u = np.full(n, 1.0 / n)
    target = m + 1.0
    for _ in range(max_iterations):
        x = q.T @ (u[:, None] * q)
        try:
            inv = np.linalg.inv(x)
        except np.linalg.LinAlgError as exc:
            raise ValidationError("points do not affinely span the space") from exc
        lev = np.einsum("ij,jk,ik->i", q, inv, q)
        j_add = int(np.argmax(lev))
        excess = lev[j_add] / target - 1.0
        if excess <= epsilon:
            break
        # Wolfe-Atwood away step: dropping overweighted interior points
        # restores linear convergence where the plain ascent crawls.
        active = u > 1e-12
        lev_active = np.where(active, lev, np.inf)
        j_drop = int(np.argmin(lev_active))
        deficit = 1.0 - lev_active[j_drop] / target
        if excess >= deficit:
            j = j_add
            step = (lev[j] - target) / (target * (lev[j] - 1.0))
        else:
            j = j_drop
            step = max(
                (lev[j] - target) / (target * (lev[j] - 1.0)),
                -u[j] / (1.0 - u[j]),
            )
        u *= 1.0 - step
        u[j] += step
        u[u < 0] = 0.0
    else:
        raise ConvergenceError("ellipsoid iteration did not reach tolerance")
    center = pts.T @ u
    cov = pts.T @ (u[:, None] * pts) - np.outer(center, center)
    shape = np.linalg.inv(cov) / m
    shape = (shape + shape.T) / 2
    # Guarantee containment of every sample.
    resid = pts - center
    scale = float(np.max(np.einsum("ij,jk,ik->i", resid, shape, resid)))
    if scale > 1.0:
        shape = shape / scale
    return center, shape


# --------------------------------------------------------------------------
# Minimum enclosing ball (Welzl's algorithm, iterative).

def _circumsphere(support: np.ndarray) -> tuple[np.ndarray, float]:
    """Smallest sphere with all support points on its boundary."""
    if len(support) == 0:
        return None, -1.0
    if len(support) == 1:
        return support[0].copy(), 0.0
    u = support[1:] - support[0]
    gram = u @ u.T
    rhs = 0.5 * np.einsum("ij,ij->i", u, u)
    coef, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
    offset = coef @ u
    return support[0] + offset, float(offset @ offset)


def _in_ball(center, r2, p, slack) -> bool:
    if center is None:
        return False
    d2 = float(np.dot(p - center, p - center))
    return d2 <= r2 + slack


def minimum_enclosing_ball(points: np.ndarray, seed: int = 0) -> tuple[np.ndarray, float]:
    """Exact smallest enclosing ball (center, radius) of a point set.

    Welzl's randomized incremental algorithm with the recursion unrolled
    onto an explicit stack; expected linear time at fixed dimension.  The
    returned radius is inflated (if needed) so every point is inside.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValidationError("need a non-empty (n, dim) point array")
    n, m = pts.shape
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    p = pts[order]
    scale = max(1.0, float(np.max(np.abs(p))))
    slack = 1e-12 * scale * scale

    center, r2 = None, -1.0
    # Frames: (i, support, stage); stage 0 = solve prefix p[:i], stage 1 =
    # re-test point i-1 against the ball just computed.
    stack: list[tuple[int, tuple, int]] = [(n, (), 0)]
    while stack:
        i, support, stage = stack.pop()
        if stage == 0:
            if i == 0 or len(support) == m + 1:
                center, r2 = _circumsphere(np.array(support).reshape(-1, m))
            else:
                stack.append((i, support, 1))
                stack.append((i - 1, support, 0))
        else:
            point = p[i - 1]
            if not _in_ball(center, r2, point, slack):
                stack.append((i - 1, support + (tuple(point),), 0))
    radius = math.sqrt(max(r2, 0.0))
    dmax = float(np.max(np.linalg.norm(pts - center, axis=1)))
    return center, max(radius, dmax)
