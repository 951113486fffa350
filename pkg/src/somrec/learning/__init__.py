from .buffer import EXPLORATION, MATCHING, Buffer, BufferEntry
from .config import LMConfig
from .evidence import (
    EmptySpaceError,
    Hypothesis,
    HypothesisSpace,
    ObjectHypotheses,
    TerminalResult,
    UnknownFeatureError,
    check_terminal,
    feature_evidence,
    feature_evidence_nodes,
    init_hypotheses,
    lm_output,
    morphology_evidence,
    most_likely_hypothesis,
    object_pose_from_hypothesis,
    possible_matches,
    possible_poses,
    update_evidence,
)
from .graph_build import EmptyBufferError, build_graph, update_graph
from .model import GraphNode, ObjectModel
from .module import LearningModule

__all__ = [name for name in dir() if not name.startswith("_")]
