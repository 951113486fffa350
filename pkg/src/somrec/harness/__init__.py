from .config import ExperimentConfig, SensorSpec
from .metrics import Metrics, compute_metrics, write_results_csv, write_traces_jsonl
from .persistence import StateFormatError, load_state, save_state, state_to_dict
from .runner import EpisodeResult, MontySystem, run_episode, run_epoch, run_experiment
from .suite import (
    BENCHMARK_OBJECTS,
    benchmark_lm_config,
    build_object,
    eval_config,
    held_out_rotations,
    train_config,
    two_lm_sensors,
    two_lm_wiring,
)

__all__ = [name for name in dir() if not name.startswith("_")]
