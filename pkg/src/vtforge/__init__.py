"""vtforge: video scene-text annotation synthesis and evaluation toolkit.

Synthesizes video text annotations by propagating geometry through
deformation fields or frame-to-frame optical flow with RANSAC projective
restoration, and evaluates video text spotting with detection/end-to-end
P-R-F, CLEAR-MOT, IDF1, and Mostly-Tracked/Lost.
"""

__version__ = "0.1.0"

from vtforge._kernels import BACKEND as KERNEL_BACKEND
from vtforge.geometry import (AABox, FlowField, GeometryError, Homography,
                              Point2, Polygon)
from vtforge.homest import PointPair, RansacParams, dlt, ransac_homography
from vtforge.matching import (GroundTruthRecord, MatchWeights, PredictionRecord,
                              cost_matrix, hungarian, set_loss)
from vtforge.metrics import EvalConfig, MetricReport, evaluate
from vtforge.placement import CanonicalAssets, PlacementConfig, place_text
from vtforge.propagation import (DeformationField, FlowSequence,
                                 PropagationConfig, propagate_deformation,
                                 propagate_flow)
from vtforge.scenes import MotionSpec, gen_layout, gen_motion
from vtforge.tracker import AssocConfig, Tracker, run_sequence

__all__ = [
    "KERNEL_BACKEND", "__version__",
    "AABox", "FlowField", "GeometryError", "Homography", "Point2", "Polygon",
    "PointPair", "RansacParams", "dlt", "ransac_homography",
    "GroundTruthRecord", "MatchWeights", "PredictionRecord", "cost_matrix",
    "hungarian", "set_loss",
    "EvalConfig", "MetricReport", "evaluate",
    "CanonicalAssets", "PlacementConfig", "place_text",
    "DeformationField", "FlowSequence", "PropagationConfig",
    "propagate_deformation", "propagate_flow",
    "MotionSpec", "gen_layout", "gen_motion",
    "AssocConfig", "Tracker", "run_sequence",
]
