"""Episode and epoch execution.

One episode: place a single object, position the agent, then loop
action -> sense -> gate -> evidence update -> vote round -> terminal check
until enough learning modules reach a terminal state or the step budget
runs out. In training mode a terminal match/no-match is followed by an
exploration phase whose observations extend or seed the graph memory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import cmp
from ..environment.agent import AgentState, JumpToPose, apply_action
from ..environment.scene import ObjectInstance, Scene, load_scene, sense_patch
from ..geometry import Pose, Rotation, rotation_angle_between
from ..learning.buffer import EXPLORATION, MATCHING
from ..learning.module import LearningModule
from ..policies import MotorSystem, hypothesis_test_goal, scan_spiral_step, utility_positioning
from ..sensor import SensorModule
from ..voting import emit_vote, integrate_votes, transform_votes
from .config import ExperimentConfig
from .suite import build_object


@dataclass
class EpisodeResult:
    episode: int
    object_label: str
    gt_rotation: np.ndarray
    terminal: str
    steps: int  # whole-system steps, including gated ones
    lm_steps: int
    detected_object: str | None
    detected_label: str | None
    detected_rotation: np.ndarray | None
    rotation_error_deg: float | None  # defined only on match
    evidence_trace: list = field(default_factory=list)

    def csv_row(self) -> dict:
        return {
            "episode": self.episode,
            "object": self.object_label,
            "terminal": self.terminal,
            "steps": self.steps,
            "lm_steps": self.lm_steps,
            "detected_object": self.detected_object or "",
            "detected_label": self.detected_label or "",
            "rotation_error_deg": (
                "" if self.rotation_error_deg is None else f"{self.rotation_error_deg:.6f}"
            ),
        }


class MontySystem:
    """Sensor modules, learning modules, and the motor system, wired per config."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.sms = {
            spec.sensor_id: SensorModule(spec.sensor_id, config.sm_config)
            for spec in config.sensors
        }
        self.lms = {
            lm_id: LearningModule(lm_id, config.lm_config) for lm_id in config.lm_ids()
        }
        self.sensor_to_lm = dict(zip([s.sensor_id for s in config.sensors], config.lm_ids()))

    def primary_lm(self) -> LearningModule:
        return self.lms[sorted(self.lms)[0]]


def _initial_agent(config: ExperimentConfig) -> AgentState:
    from ..environment.agent import look_at

    el = np.radians(config.agent_elevation_deg)
    location = config.agent_distance * np.array([0.0, np.sin(el), np.cos(el)])
    sensors = {
        spec.sensor_id: Pose(np.asarray(spec.offset, dtype=np.float64), Rotation.identity())
        for spec in config.sensors
    }
    sensors["viewfinder"] = Pose.identity()
    return AgentState(
        kind=config.agent_kind,
        pose=Pose(location, look_at(location, np.zeros(3))),
        sensors=sensors,
    )


def _episode_scene(config: ExperimentConfig, label: str, rotation) -> Scene:
    rot = Rotation.from_matrix(np.asarray(rotation, dtype=np.float64))
    if config.scene_file:
        base = load_scene(config.scene_file).single()
        obj, lbl = base.object, base.ground_truth_label
    else:
        obj, lbl = build_object(label), label
    return Scene(
        objects=(ObjectInstance(object=obj, pose=Pose(np.zeros(3), rot), ground_truth_label=lbl),)
    )


class _CmpLog:
    def __init__(self, path):
        self.fh = open(path, "ab") if path else None

    def write(self, msg):
        if self.fh is not None:
            self.fh.write(cmp.encode(msg))

    def close(self):
        if self.fh is not None:
            self.fh.close()


def _sense_all(scene, agent: AgentState, system: MontySystem, rng, log) -> dict:
    """One patch per sensor, through its sensor module."""
    out = {}
    for spec in system.config.sensors:
        patch = sense_patch(
            scene,
            agent.sensor_pose(spec.sensor_id),
            resolution=spec.resolution,
            zoom=spec.zoom,
            fov_deg=spec.fov_deg,
            depth_noise_sigma=spec.depth_noise_sigma,
            rng=rng if spec.depth_noise_sigma > 0 else None,
        )
        msg = system.sms[spec.sensor_id].to_cmp(patch)
        log.write(msg)
        out[spec.sensor_id] = msg
    return out


def _vote_round(system: MontySystem, stepped: set, log) -> None:
    """Emit after the individual updates, integrate behind a barrier."""
    wiring = system.config.vote_wiring
    if not wiring:
        return
    packets = {}
    for lm_id in sorted(system.lms):
        lm = system.lms[lm_id]
        if lm_id in stepped and lm.space is not None and len(lm.space) > 0:
            packets[lm_id] = emit_vote(
                lm.space,
                lm._prev_used_location,
                system.config.lm_config.vote_top_fraction,
                sender_id=lm_id,
            )
            log.write(packets[lm_id])
    for lm_id, peers in wiring.items():
        lm = system.lms[lm_id]
        if lm.space is None or lm._prev_used_location is None:
            continue
        for peer in peers:
            packet = packets.get(peer)
            if packet is None:
                continue
            votes = transform_votes(packet, lm._prev_used_location)
            integrate_votes(lm.space, votes, lm.config)


def _exploration_phase(scene, agent, system: MontySystem, rng, log) -> None:
    """Scan the object from several stations to feed the graph memory."""
    config = system.config
    center = scene.single().pose.location
    distance = float(np.linalg.norm(agent.pose.location - center))
    stations = max(1, config.scan_stations)
    per_station = max(1, config.exploration_steps // stations)
    azimuths = np.linspace(0.0, 2 * np.pi, stations, endpoint=False)
    elevations = [0.0 if k < stations - 2 else (np.radians(65) if k == stations - 2 else -np.radians(65))
                  for k in range(stations)] if stations > 2 else [0.0] * stations

    from ..environment.agent import look_at

    for az, el in zip(azimuths, elevations):
        loc = center + distance * np.array(
            [np.cos(el) * np.sin(az), np.sin(el), np.cos(el) * np.cos(az)]
        )
        agent = apply_action(scene, agent, JumpToPose(Pose(loc, look_at(loc, center))))
        for k in range(per_station):
            action = scan_spiral_step(k, config.policy_config)
            agent = apply_action(scene, agent, action)
            msgs = _sense_all(scene, agent, system, rng, log)
            for sensor_id, msg in msgs.items():
                system.lms[system.sensor_to_lm[sensor_id]].observe(
                    msg, action, phase=EXPLORATION
                )


def run_episode(
    system: MontySystem,
    label: str,
    rotation,
    episode_index: int,
    seed_seq: np.random.SeedSequence,
    log: _CmpLog | None = None,
) -> EpisodeResult:
    config = system.config
    log = log or _CmpLog(None)
    rng_policy, rng_noise = [np.random.default_rng(s) for s in seed_seq.spawn(2)]
    scene = _episode_scene(config, label, rotation)
    gt_label = scene.single().ground_truth_label
    gt_rotation = scene.single().pose.orientation.matrix

    agent = _initial_agent(config)
    mode = "get_good_view" if config.agent_kind == "distant" else "touch_object"
    agent, _ = utility_positioning(scene, agent, mode, config.policy_config)

    for sm in system.sms.values():
        sm.reset()
    for lm in system.lms.values():
        lm.reset_episode()
    motor = MotorSystem(config.policy_config, agent, seed=rng_policy.integers(2**31))

    primary_sensor = config.sensors[0].sensor_id
    primary_lm_id = system.sensor_to_lm[primary_sensor]
    required = config.required_lms()
    trace = []
    monty_steps = 0
    last_primary_msg = None

    # step 0: observe without moving
    msgs = _sense_all(scene, agent, system, rng_noise, log)
    stepped = set()
    for sensor_id, msg in msgs.items():
        lm_id = system.sensor_to_lm[sensor_id]
        if system.lms[lm_id].observe(msg, None, phase=MATCHING):
            stepped.add(lm_id)
    last_primary_msg = msgs[primary_sensor]
    _vote_round(system, stepped, log)
    terminal_count = sum(
        1 for lm in system.lms.values() if lm.check_terminal().is_terminal
    )
    trace.append(
        {lm_id: (lm.space.object_evidence() if lm.space else {}) for lm_id, lm in system.lms.items()}[
            primary_lm_id
        ]
    )

    while terminal_count < required and monty_steps < config.lm_config.max_steps:
        monty_steps += 1
        if config.policy_config.use_hypothesis_testing:
            _maybe_jump(system, motor, agent, scene, monty_steps)
        action = motor.next_action(last_primary_msg, agent)
        agent = apply_action(scene, agent, action)
        msgs = _sense_all(scene, agent, system, rng_noise, log)
        stepped = set()
        for sensor_id, msg in msgs.items():
            lm_id = system.sensor_to_lm[sensor_id]
            if system.lms[lm_id].observe(msg, action, phase=MATCHING):
                stepped.add(lm_id)
        last_primary_msg = msgs[primary_sensor]
        _vote_round(system, stepped, log)
        terminal_count = 0
        for lm in system.lms.values():
            if lm.terminal.is_terminal or lm.check_terminal().is_terminal:
                terminal_count += 1
        primary = system.lms[primary_lm_id]
        trace.append(primary.space.object_evidence() if primary.space else {})
        if primary.space is not None and len(primary.space) > 0:
            log.write(primary.output(last_primary_msg))

    primary = system.lms[primary_lm_id]
    if terminal_count < required:
        for lm in system.lms.values():
            if not lm.terminal.is_terminal:
                lm.force_time_out()

    # prefer a matched LM's verdict; fall back to the primary's best guess
    decided = None
    for lm_id in sorted(system.lms):
        if system.lms[lm_id].terminal.kind == "match":
            decided = system.lms[lm_id]
            break
    reporter = decided or primary
    terminal_kind = reporter.terminal.kind

    detected_object = detected_label = None
    detected_rotation = None
    rotation_error = None
    if terminal_kind == "match":
        hyp = reporter.terminal.hypothesis
        detected_object = hyp.object_id
        detected_rotation = hyp.rotation
    elif reporter.space is not None and len(reporter.space) > 0:
        from ..learning.evidence import most_likely_hypothesis

        hyp = most_likely_hypothesis(reporter.space)
        detected_object = hyp.object_id
        detected_rotation = hyp.rotation
    if detected_object is not None:
        detected_label = reporter.majority_label(detected_object) or detected_object
    if terminal_kind == "match" and detected_rotation is not None:
        rotation_error = float(
            np.degrees(rotation_angle_between(detected_rotation, gt_rotation))
        )

    if config.mode == "train" and any(
        lm.terminal.kind in ("match", "no_match") for lm in system.lms.values()
    ):
        _exploration_phase(scene, agent, system, rng_noise, log)
        for lm in system.lms.values():
            lm.finalize_training(gt_label)
        if detected_object is not None:
            detected_label = reporter.majority_label(detected_object) or detected_object

    return EpisodeResult(
        episode=episode_index,
        object_label=gt_label,
        gt_rotation=gt_rotation,
        terminal=terminal_kind,
        steps=monty_steps,
        lm_steps=reporter.lm_steps,
        detected_object=detected_object,
        detected_label=detected_label,
        detected_rotation=detected_rotation,
        rotation_error_deg=rotation_error,
        evidence_trace=trace,
    )


def _maybe_jump(system: MontySystem, motor: MotorSystem, agent, scene, step: int) -> None:
    """Let the first LM with an ambiguous space propose a disambiguating jump."""
    if motor.pending:
        return
    config = system.config
    for lm_id in sorted(system.lms):
        lm = system.lms[lm_id]
        if lm.space is None or len(lm.space) == 0 or lm._prev_used_location is None:
            continue
        for swap in (False, True):
            goal = hypothesis_test_goal(
                lm.space,
                lm.memory,
                config.policy_config.ht_mode,
                lm.config,
                sensed_location=lm._prev_used_location,
                step=step,
                last_goal_step=(lm.last_goal_step if lm.last_goal_step >= 0 else None),
                trigger_ratio=config.policy_config.ht_trigger_ratio,
                cooldown=config.policy_config.ht_cooldown,
                sender_id=lm_id,
                swap=swap,
            )
            if goal is None:
                break
            # an unreachable goal means the proposer was wrong about that
            # point; retry from the rival hypothesis's perspective
            if motor.submit_goal(goal, agent, scene):
                lm.last_goal_step = step
                return


def run_epoch(
    config: ExperimentConfig, system: MontySystem | None = None, epoch_index: int = 0
) -> tuple[MontySystem, list]:
    """One episode per configured (object, rotation), in config order."""
    system = system or MontySystem(config)
    log = _CmpLog(config.log_cmp)
    labels = config.objects or [None]
    results = []
    episode_index = 0
    root = np.random.SeedSequence([config.seed, epoch_index])
    seeds = root.spawn(len(labels) * len(config.rotations))
    try:
        for label in labels:
            for rotation in config.rotations:
                results.append(
                    run_episode(
                        system, label, rotation, episode_index, seeds[episode_index], log
                    )
                )
                episode_index += 1
    finally:
        log.close()
    return system, results


def run_experiment(config: ExperimentConfig, system: MontySystem | None = None):
    system = system or MontySystem(config)
    all_results = []
    for epoch in range(config.epochs):
        system, results = run_epoch(config, system, epoch_index=epoch)
        all_results.extend(results)
    return system, all_results
