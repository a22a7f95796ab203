"""Projective transform estimation: normalized DLT plus a RANSAC loop."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from vtforge.geometry import GeometryError, Homography, Point2


class EstimationError(ValueError):
    """Estimation failed (degenerate input or rank-deficient system)."""


class NoConsensusError(EstimationError):
    """RANSAC could not find a consensus reaching the inlier fraction."""


@dataclass(frozen=True)
class PointPair:
    """A (source, destination) correspondence."""

    src: Point2
    dst: Point2


@dataclass(frozen=True)
class RansacParams:
    iterations: int = 2000
    inlier_threshold: float = 2.0
    min_inlier_fraction: float = 0.5
    seed: int = 0
    # early-exit confidence for the adaptive iteration count; 1.0 runs the
    # full budget
    confidence: float = 0.999

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be > 0")
        if not 0.0 < self.min_inlier_fraction <= 1.0:
            raise ValueError("min_inlier_fraction must be in (0, 1]")
        if not 0.0 < self.confidence <= 1.0:
            raise ValueError("confidence must be in (0, 1]")


def _pairs_to_arrays(pairs: Sequence[PointPair]):
    src = np.array([(p.src.x, p.src.y) for p in pairs], dtype=np.float64)
    dst = np.array([(p.dst.x, p.dst.y) for p in pairs], dtype=np.float64)
    return src, dst


def _normalize(pts: np.ndarray):
    """Hartley isotropic normalization: centroid at origin, mean norm sqrt(2)."""
    centroid = pts.mean(axis=0)
    d = np.sqrt(((pts - centroid) ** 2).sum(axis=1)).mean()
    if d < 1e-12:
        raise EstimationError("degenerate point set (all points coincide)")
    s = math.sqrt(2.0) / d
    t = np.array([[s, 0.0, -s * centroid[0]],
                  [0.0, s, -s * centroid[1]],
                  [0.0, 0.0, 1.0]])
    normed = (pts - centroid) * s
    return normed, t


def _dlt_arrays(src: np.ndarray, dst: np.ndarray) -> Homography:
    n = src.shape[0]
    src_n, t_src = _normalize(src)
    dst_n, t_dst = _normalize(dst)

    a = np.zeros((2 * n, 9))
    x, y = src_n[:, 0], src_n[:, 1]
    u, v = dst_n[:, 0], dst_n[:, 1]
    a[0::2, 0] = x
    a[0::2, 1] = y
    a[0::2, 2] = 1.0
    a[0::2, 6] = -u * x
    a[0::2, 7] = -u * y
    a[0::2, 8] = -u
    a[1::2, 3] = x
    a[1::2, 4] = y
    a[1::2, 5] = 1.0
    a[1::2, 6] = -v * x
    a[1::2, 7] = -v * y
    a[1::2, 8] = -v

    _, sing, vt = np.linalg.svd(a)
    # nullity >= 2 means >= n-1 collinear sources or an otherwise
    # underdetermined system
    if sing[7] <= 1e-9 * sing[0]:
        raise EstimationError("degenerate correspondence configuration")
    h_n = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ h_n @ t_src
    try:
        return Homography(h)
    except GeometryError as exc:
        raise EstimationError(f"DLT produced a singular matrix: {exc}") from exc


def dlt(pairs: Sequence[PointPair]) -> Homography:
    """Least-squares homography from >= 4 correspondences.

    Minimizes the algebraic residual after isotropic normalization of both
    point sets; exact (to float precision) for 4 non-degenerate pairs.
    """
    if len(pairs) < 4:
        raise EstimationError(f"DLT needs >= 4 pairs, got {len(pairs)}")
    src, dst = _pairs_to_arrays(pairs)
    return _dlt_arrays(src, dst)


def _project(m: np.ndarray, pts: np.ndarray) -> np.ndarray:
    q = np.hstack([pts, np.ones((pts.shape[0], 1))]) @ m.T
    w = q[:, 2]
    out = np.full_like(pts, np.inf)
    ok = np.abs(w) >= 1e-12
    out[ok] = q[ok, :2] / w[ok, None]
    return out


def symmetric_transfer_error(h: Homography, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Per-pair sqrt(|H s - d|^2 + |H^-1 d - s|^2), in pixels."""
    m = h.matrix
    m_inv = np.linalg.inv(m)
    fwd = _project(m, src)
    bwd = _project(m_inv, dst)
    e2 = ((fwd - dst) ** 2).sum(axis=1) + ((bwd - src) ** 2).sum(axis=1)
    return np.sqrt(e2)


def _any3_collinear(pts: np.ndarray, tol: float = 1e-9) -> bool:
    span = max(float(np.ptp(pts[:, 0])), float(np.ptp(pts[:, 1])), 1.0)
    for i in range(4):
        sub = np.delete(pts, i, axis=0)
        area2 = abs((sub[1, 0] - sub[0, 0]) * (sub[2, 1] - sub[0, 1])
                    - (sub[1, 1] - sub[0, 1]) * (sub[2, 0] - sub[0, 0]))
        if area2 <= tol * span * span:
            return True
    return False


def _minimal_fit(src4: np.ndarray, dst4: np.ndarray):
    """Exact 4-point homography; None when the system is singular."""
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for k in range(4):
        x, y = src4[k]
        u, v = dst4[k]
        a[2 * k] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]
        a[2 * k + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]
        b[2 * k] = u
        b[2 * k + 1] = v
    try:
        h8 = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return None
    m = np.array([[h8[0], h8[1], h8[2]],
                  [h8[3], h8[4], h8[5]],
                  [h8[6], h8[7], 1.0]])
    try:
        return Homography(m)
    except GeometryError:
        return None


def ransac_homography(pairs: Sequence[PointPair], params: RansacParams | None = None):
    """Robust homography fit; returns (Homography, inlier flag array).

    A pair is an inlier when its symmetric transfer error is at most
    ``inlier_threshold``. The best-consensus minimal model is re-fitted by
    DLT on its inliers and the flags recomputed under the refit. Raises
    NoConsensusError when the final inlier fraction falls below
    ``min_inlier_fraction``. Deterministic for a fixed seed: the sample for
    iteration i is drawn from a generator seeded with (seed, i).
    """
    params = params or RansacParams()
    n = len(pairs)
    if n < 4:
        raise EstimationError(f"RANSAC needs >= 4 pairs, got {n}")
    src, dst = _pairs_to_arrays(pairs)

    best_count = 0
    best_flags = None
    max_iter = params.iterations
    needed = max_iter

    for it in range(max_iter):
        if it >= needed:
            break
        rng = np.random.default_rng(np.random.SeedSequence((params.seed, it)))
        model = None
        for _ in range(10):
            idx = rng.choice(n, size=4, replace=False)
            if _any3_collinear(src[idx]) or _any3_collinear(dst[idx]):
                continue
            model = _minimal_fit(src[idx], dst[idx])
            if model is not None:
                break
        if model is None:
            continue
        err = symmetric_transfer_error(model, src, dst)
        flags = err <= params.inlier_threshold
        count = int(flags.sum())
        if count > best_count:
            best_count = count
            best_flags = flags
            if params.confidence < 1.0 and count >= 4:
                w = count / n
                if w >= 1.0:
                    needed = it + 1
                else:
                    denom = math.log1p(-min(w ** 4, 1.0 - 1e-12))
                    needed = min(max_iter, math.ceil(math.log(1.0 - params.confidence) / denom))

    if best_flags is None or best_count < 4:
        raise NoConsensusError("no minimal sample produced a usable consensus")

    # refit on the consensus set; one expansion round recovers inliers the
    # noisy 4-point model misses
    flags = best_flags
    refit = None
    for _ in range(2):
        try:
            candidate = _dlt_arrays(src[flags], dst[flags])
        except EstimationError:
            break
        refit = candidate
        new_flags = symmetric_transfer_error(refit, src, dst) <= params.inlier_threshold
        if int(new_flags.sum()) < 4 or np.array_equal(new_flags, flags):
            flags = new_flags if int(new_flags.sum()) >= 4 else flags
            break
        flags = new_flags
    if refit is None:
        raise NoConsensusError("consensus set was degenerate under refit")
    final_flags = symmetric_transfer_error(refit, src, dst) <= params.inlier_threshold
    if int(final_flags.sum()) / n < params.min_inlier_fraction:
        raise NoConsensusError(
            f"final inlier fraction {int(final_flags.sum()) / n:.3f} below "
            f"minimum {params.min_inlier_fraction}")
    return refit, final_flags
