"""Long-term multi-object tracking with geometric re-identification.

An engine for tracking multiple people through a room over long sessions:
online frame-to-frame association of 3D boxes and multi-view geometric
descriptors, offline recovery of complete per-identity trajectories via a
trained descriptor gallery, a full tracking-metric suite (HOTA, CLEAR,
IDF1, counting), a deterministic scenario simulator, and temporal pathway
imprints rendered to SVG.
"""

from .association import (
    AssignmentResult,
    AssociationConfig,
    Track,
    TrackEvent,
    Tracker,
    build_cost_matrix,
    gate,
    run_sequence,
    solve_assignment,
)
from .features import (
    cosine_distance,
    descriptors_to_array,
    ema_update,
    multiview_distance,
    multiview_distance_matrix,
    temporal_max_pool,
)
from .geometry import (
    giou3d,
    giou3d_matrix,
    iou3d,
    iou3d_matrix,
    spatial_cost,
    spatial_cost_matrix,
)
from .imprints import (
    Imprint,
    ImprintStyle,
    ProximityEvent,
    RegionOfInterest,
    build_imprint,
    distance_to_polygon,
    point_in_polygon,
    proximity_events,
    render_svg,
)
from .metrics import (
    DEFAULT_ALPHAS,
    ClearResult,
    EvalSequence,
    HotaResult,
    clear_mot,
    counting,
    evaluate,
    hota,
    idf1,
    predictions_from_tracklets,
    predictions_from_trajectories,
)
from .model import (
    NUM_VIEWS,
    BoundingBox3D,
    Detection,
    MultiViewDescriptor,
    Tracklet,
    Trajectory,
    normalize_descriptor,
)
from .recovery import (
    ClassificationResult,
    ConflictRecord,
    GalleryModel,
    GalleryTrainingConfig,
    RecoveryResult,
    classify_descriptor,
    recover_trajectories,
    train_gallery,
)
from .simulator import (
    AgentSpec,
    GroundTruthRecord,
    Scenario,
    ScenarioConfig,
    SimulatedSequence,
    generate_scenario,
    render_frames,
    scenario_ground_truth,
)

__version__ = "0.1.0"

__all__ = [
    "AgentSpec",
    "AssignmentResult",
    "AssociationConfig",
    "BoundingBox3D",
    "ClassificationResult",
    "ClearResult",
    "ConflictRecord",
    "DEFAULT_ALPHAS",
    "Detection",
    "EvalSequence",
    "GalleryModel",
    "GalleryTrainingConfig",
    "GroundTruthRecord",
    "HotaResult",
    "Imprint",
    "ImprintStyle",
    "MultiViewDescriptor",
    "NUM_VIEWS",
    "ProximityEvent",
    "RecoveryResult",
    "RegionOfInterest",
    "Scenario",
    "ScenarioConfig",
    "SimulatedSequence",
    "Track",
    "TrackEvent",
    "Tracker",
    "Tracklet",
    "Trajectory",
    "build_cost_matrix",
    "build_imprint",
    "classify_descriptor",
    "clear_mot",
    "cosine_distance",
    "counting",
    "descriptors_to_array",
    "distance_to_polygon",
    "ema_update",
    "evaluate",
    "gate",
    "generate_scenario",
    "giou3d",
    "giou3d_matrix",
    "hota",
    "idf1",
    "iou3d",
    "iou3d_matrix",
    "multiview_distance",
    "multiview_distance_matrix",
    "normalize_descriptor",
    "point_in_polygon",
    "predictions_from_tracklets",
    "predictions_from_trajectories",
    "proximity_events",
    "recover_trajectories",
    "render_frames",
    "render_svg",
    "run_sequence",
    "scenario_ground_truth",
    "solve_assignment",
    "spatial_cost",
    "spatial_cost_matrix",
    "temporal_max_pool",
    "train_gallery",
]
