import numpy as np
import pytest

from vtforge.dataio import FrameRecord, TextInstance, VideoAnnotation
from vtforge.geometry import Homography, Polygon


def quad(x, y, w, h):
    """Axis-aligned quad, clockwise from the top-left corner."""
    return Polygon([(x, y), (x + w, y), (x + w, y + h), (x, y + h)])


def planted_homography(rng=None, scale=1.0):
    """A well-conditioned random projective matrix near the identity."""
    rng = rng or np.random.default_rng(0)
    m = np.eye(3)
    m[:2, :2] += rng.uniform(-0.1, 0.1, (2, 2)) * scale
    m[:2, 2] = rng.uniform(-20, 20, 2) * scale
    m[2, :2] = rng.uniform(-1e-4, 1e-4, 2) * scale
    return Homography(m)


def annotation(video_id, frame_instances):
    """Build a VideoAnnotation from {frame: [(id, polygon, text), ...]}."""
    frames = []
    for k in sorted(frame_instances):
        instances = [TextInstance(id=i, polygon=p, transcription=t)
                     for i, p, t in frame_instances[k]]
        frames.append(FrameRecord(frame_index=k, instances=instances))
    return VideoAnnotation(video_id=video_id, frames=frames)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
