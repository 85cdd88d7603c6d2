"""patchgraph: learn normal traffic behavior over an intersection patch
graph and detect anomalous trajectories with explainable rules."""

from ._accel import NUMBA_ENABLED
from .behavior import (BehaviorModel, LearningState, NodeModel, finalize,
                       init_model, load_model, observe, save_model)
from .errors import (ChecksumMismatch, DegenerateInput, EmptyModel,
                     HorizonPoint, InfeasibleInjection, NoEligibleRoute,
                     OutOfOrderFrame, ParseError, PatchGraphError,
                     UnknownNode, ValidationError)
from .geometry import (ConvexPolygon, Homography, OrientedBox, Point2,
                       intersection_area, iou, project_box, project_point)
from .harness import (EvalReport, MatchResult, compute_report, match_events,
                      render_svg)
from .ingest import (AgentClass, Detection, NodeVisit, Track, TrackSample,
                     group_tracks, pipeline_visits, read_detections,
                     smooth_orientation, stitch_tracks, to_visits)
from .rules import (AnomalyEvent, AnomalyKind, check_stop, check_turn,
                    check_zone, detect_stream)
from .sim import (LabeledTrack, NoiseConfig, Route, ScenarioConfig,
                  SimulationResult, TruthRecord, generate_normal,
                  inject_anomalies, run_scenario)
from .topology import (IntersectionMap, Patch, PatchClass, associate,
                       compute_adjacency, load_map)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
