"""Set-prediction matching: per-pair costs, cost matrix, optimal assignment,
and the composite loss score. Pure numerics, no gradients.

Box costs expect boxes in normalized [0, 1] image coordinates with a
(center-x, center-y, width, height) L1 parameterization.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from vtforge import _kernels
from vtforge.geometry import AABox, Polygon, giou

MAX_TEXT_LEN = 25
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class MatchWeights:
    """Matching-cost and loss weights.

    The alpha/l1/giou/focal values are fixed constants of the formulation;
    the lambda values mirror them since no separate values are published.
    """

    lambda_c: float = 2.0
    lambda_l1: float = 5.0
    lambda_giou: float = 2.0
    alpha_c: float = 2.0
    l1_weight: float = 5.0
    giou_weight: float = 2.0
    alpha_p: float = 1.0
    alpha_r: float = 1.0
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ValueError(f"weight {name} must be non-negative")


@dataclass
class PredictionRecord:
    """One prediction: text-class probability, box, optional polygon and
    per-position character distributions."""

    class_prob: float
    box: AABox
    polygon: Optional[Polygon] = None
    char_distributions: Optional[Sequence[np.ndarray]] = None

    def __post_init__(self):
        if not 0.0 <= self.class_prob <= 1.0:
            raise ValueError(f"class_prob outside [0, 1]: {self.class_prob}")
        if self.char_distributions is not None:
            dists = [np.asarray(d, dtype=np.float64) for d in self.char_distributions]
            for d in dists:
                if abs(float(d.sum()) - 1.0) > 1e-6:
                    raise ValueError("character distribution does not sum to 1")
            self.char_distributions = dists


@dataclass
class GroundTruthRecord:
    """One ground-truth record; ``no_object()`` builds the empty-class row."""

    box: Optional[AABox] = None
    polygon: Optional[Polygon] = None
    transcription: Optional[str] = None

    @classmethod
    def no_object(cls) -> "GroundTruthRecord":
        return cls()

    @property
    def is_no_object(self) -> bool:
        return self.box is None

    def __post_init__(self):
        if self.box is None and (self.polygon is not None or self.transcription is not None):
            raise ValueError("no-object records carry no polygon/transcription")


def focal_term(p: float, positive: bool, alpha: float = 0.25, gamma: float = 2.0) -> float:
    """Focal classification cost for one probability.

    Positive branch -alpha(1-p)^gamma log(p); negative branch
    -(1-alpha) p^gamma log(1-p). Returns inf at the singular endpoints.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability outside [0, 1]: {p}")
    if positive:
        if p == 0.0:
            return math.inf
        return -alpha * (1.0 - p) ** gamma * math.log(p)
    if p == 1.0:
        return math.inf
    return -(1.0 - alpha) * p ** gamma * math.log(1.0 - p)


def _box_l1(a: AABox, b: AABox) -> float:
    return (abs(a.center.x - b.center.x) + abs(a.center.y - b.center.y)
            + abs(a.width - b.width) + abs(a.height - b.height))


def box_cost(b_pred: AABox, b_gt: AABox, w: MatchWeights | None = None) -> float:
    """lambda_l1 * |cx,cy,w,h| L1 + lambda_giou * (1 - GIoU), normalized coords."""
    w = w or MatchWeights()
    return w.lambda_l1 * _box_l1(b_pred, b_gt) + w.lambda_giou * (1.0 - giou(b_pred, b_gt))


def recognition_ce(char_distributions, transcription: str, alphabet,
                   pad_symbol: str | None = None) -> float:
    """Mean cross entropy of a character sequence against per-position
    distributions over ``alphabet``.

    Targets are padded with ``pad_symbol`` (default: last alphabet entry) to
    the fixed maximum length of 25, and the mean runs over the evaluated
    positions, min(25, len(char_distributions)). Zero target probability is
    clamped at 1e-12 with a warning.
    """
    symbols = list(alphabet)
    if not symbols:
        raise ValueError("empty alphabet")
    index = {s: k for k, s in enumerate(symbols)}
    pad = pad_symbol if pad_symbol is not None else symbols[-1]
    if pad not in index:
        raise ValueError(f"pad symbol {pad!r} not in alphabet")
    dists = [np.asarray(d, dtype=np.float64) for d in char_distributions]
    text = transcription[:MAX_TEXT_LEN]
    if len(dists) < len(text):
        raise ValueError(
            f"need >= {len(text)} distributions, got {len(dists)}")
    for ch in text:
        if ch not in index:
            raise ValueError(f"transcription character {ch!r} not in alphabet")

    n_eval = min(MAX_TEXT_LEN, len(dists))
    terms = []
    clamped = False
    for pos in range(n_eval):
        target = text[pos] if pos < len(text) else pad
        d = dists[pos]
        if d.shape[0] != len(symbols):
            raise ValueError(
                f"distribution length {d.shape[0]} != alphabet size {len(symbols)}")
        prob = float(d[index[target]])
        if prob < PROB_FLOOR:
            prob = PROB_FLOOR
            clamped = True
        terms.append(-math.log(prob))
    if clamped:
        warnings.warn("zero target probability clamped at 1e-12", RuntimeWarning,
                      stacklevel=2)
    return math.fsum(terms) / n_eval


def polygon_l1(p_pred: Polygon, p_gt: Polygon) -> float:
    """Mean absolute vertex-coordinate difference, fixed correspondence."""
    a = p_pred.as_array()
    b = p_gt.as_array()
    if a.shape != b.shape:
        raise ValueError(f"vertex count mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(np.abs(a - b).mean())


def cost_matrix(preds: Sequence[PredictionRecord], gts: Sequence[GroundTruthRecord],
                w: MatchWeights | None = None) -> np.ndarray:
    """Matching cost matrix, rows = ground truths, columns = predictions.

    Text rows get lambda_c * focal(p) plus the box cost; no-object rows get
    only the classification term (negative focal branch).
    """
    w = w or MatchWeights()
    if not preds and not gts:
        raise ValueError("cost matrix needs at least one side nonempty")
    m = np.zeros((len(gts), len(preds)))
    for i, gt in enumerate(gts):
        for j, pred in enumerate(preds):
            if gt.is_no_object:
                m[i, j] = w.lambda_c * focal_term(
                    pred.class_prob, False, w.focal_alpha, w.focal_gamma)
            else:
                m[i, j] = (w.lambda_c * focal_term(
                    pred.class_prob, True, w.focal_alpha, w.focal_gamma)
                    + box_cost(pred.box, gt.box, w))
    return m


def _kuhn_feasible(adj, n_rows, start_row, banned):
    """Can rows [start_row, n_rows) be matched into columns not in banned?"""
    match_col = {}

    def try_row(r, visited):
        for j in adj[r]:
            if j in banned or j in visited:
                continue
            visited.add(j)
            owner = match_col.get(j)
            if owner is None or try_row(owner, visited):
                match_col[j] = r
                return True
        return False

    for r in range(start_row, n_rows):
        if not try_row(r, set()):
            return False
    return True


def _lex_refine_tight(cost, u, v, base_total):
    """Lexicographically smallest assignment over the tight-edge subgraph.

    Valid when its total (fsum) equals the optimal total exactly; the
    caller verifies and falls back otherwise.
    """
    n_rows, n_cols = cost.shape
    scale = max(1.0, float(np.abs(cost).max()))
    eps = 1e-9 * scale
    reduced = cost - u[:, None] - v[None, :]
    adj = [np.nonzero(reduced[i] <= eps)[0].tolist() for i in range(n_rows)]

    chosen = []
    banned = set()
    for i in range(n_rows):
        fixed = None
        for j in adj[i]:
            if j in banned:
                continue
            if _kuhn_feasible(adj, n_rows, i + 1, banned | {j}):
                fixed = j
                break
        if fixed is None:
            return None
        chosen.append(fixed)
        banned.add(fixed)
    total = math.fsum(cost[i, chosen[i]] for i in range(n_rows))
    if total != base_total:
        return None
    return chosen


def _lex_exact(cost, base_total):
    """Exact lexicographic tie-break by certify-and-fix with sub-solves."""
    n_rows, n_cols = cost.shape
    chosen = []
    used = set()
    for i in range(n_rows):
        avail = [j for j in range(n_cols) if j not in used]
        fixed = None
        for j in avail:
            rest_cols = [k for k in avail if k != j]
            if i + 1 < n_rows:
                sub = cost[np.ix_(range(i + 1, n_rows), rest_cols)]
                sub_assign, _, _ = _kernels.lsap(sub)
                rest = [cost[i + 1 + r, rest_cols[c]] for r, c in enumerate(sub_assign)]
            else:
                rest = []
            entries = [cost[r, chosen[r]] for r in range(i)] + [cost[i, j]] + rest
            if math.fsum(entries) == base_total:
                fixed = j
                break
        if fixed is None:
            return None
        chosen.append(fixed)
        used.add(fixed)
    return chosen


def hungarian(matrix) -> tuple[list[int], float]:
    """Minimum-cost injective row-to-column assignment.

    Requires rows <= cols and finite entries. Ties are broken by the
    lexicographically smallest assignment vector. Returns (assignment,
    total cost).
    """
    cost = np.asarray(matrix, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost matrix must be 2D")
    n_rows, n_cols = cost.shape
    if n_rows == 0:
        return [], 0.0
    if n_rows > n_cols:
        raise ValueError(
            f"more rows than columns ({n_rows} > {n_cols}); pad with "
            "no-object rows first")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite entries")

    assign, u, v = _kernels.lsap(cost)
    base = [int(j) for j in assign]
    base_total = math.fsum(cost[i, base[i]] for i in range(n_rows))

    refined = _lex_refine_tight(cost, u, v, base_total)
    if refined is None and n_cols <= 64:
        refined = _lex_exact(cost, base_total)
    final = refined if refined is not None else base
    total = math.fsum(cost[i, final[i]] for i in range(n_rows))
    return final, total


def set_loss(pairs: Sequence[tuple], w: MatchWeights | None = None,
             alphabet=None, pad_symbol: str | None = None):
    """Composite loss over matched (ground truth, prediction) pairs.

    Returns (total, breakdown) where breakdown holds the summed
    classification / box / polygon / recognition terms. Polygon and
    recognition terms are computed when the records carry the data
    (polygons on both sides; distributions plus an alphabet).
    """
    w = w or MatchWeights()
    cls_terms = []
    box_terms = []
    poly_terms = []
    rec_terms = []
    for gt, pred in pairs:
        if gt.is_no_object:
            cls_terms.append(w.alpha_c * focal_term(
                pred.class_prob, False, w.focal_alpha, w.focal_gamma))
            continue
        cls_terms.append(w.alpha_c * focal_term(
            pred.class_prob, True, w.focal_alpha, w.focal_gamma))
        box_terms.append(w.l1_weight * _box_l1(pred.box, gt.box)
                         + w.giou_weight * (1.0 - giou(pred.box, gt.box)))
        if pred.polygon is not None and gt.polygon is not None:
            poly_terms.append(w.alpha_p * polygon_l1(pred.polygon, gt.polygon))
        if pred.char_distributions is not None and alphabet is not None \
                and gt.transcription is not None:
            rec_terms.append(w.alpha_r * recognition_ce(
                pred.char_distributions, gt.transcription, alphabet, pad_symbol))
    breakdown = {
        "classification": math.fsum(cls_terms),
        "box": math.fsum(box_terms),
        "polygon": math.fsum(poly_terms),
        "recognition": math.fsum(rec_terms),
    }
    total = math.fsum(breakdown.values())
    return total, breakdown
