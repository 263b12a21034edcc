"""Deterministic fixed-step 3-D swarm simulator.

Agents are double-integrator point masses driven by weighted steering terms
(cohesion spring toward the group centroid, pairwise repulsion, velocity
alignment, commanded setpoint, goal seeking) and integrated with
semi-implicit Euler. All command semantics funnel through
:func:`apply_command`; :func:`step` is the only thing that advances time.
Both are pure: they return fresh states and never mutate their input.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .recording import PARADIGM_LABELS


class SwarmError(ValueError):
    pass


class SimulationDiverged(RuntimeError):
    def __init__(self, tick: int):
        super().__init__(f"non-finite state at tick {tick}")
        self.tick = tick


class IllegalCommand(ValueError):
    pass


class MissionMode(str, Enum):
    IDLE = "IDLE"
    EXECUTING = "EXECUTING"
    PAUSED = "PAUSED"
    FOLLOW = "FOLLOW"
    RETURN = "RETURN"
    AT_BASE = "AT_BASE"


@dataclass(frozen=True)
class SwarmParams:
    n_agents: int = 8
    w_coh: float = 1.0
    w_sep: float = 2.5
    w_align: float = 0.8
    w_goal: float = 1.2
    w_cmd: float = 1.0
    r_sep: float = 2.0
    d_star: float = 6.0
    v_max: float = 5.0
    v_cmd: float = 2.0
    dt: float = 0.05
    arrival_radius: float = 1.0

    def __post_init__(self):
        for name in ("w_coh", "w_sep", "w_align", "w_goal", "w_cmd",
                     "r_sep", "d_star", "v_max", "v_cmd", "dt", "arrival_radius"):
            if getattr(self, name) <= 0:
                raise SwarmError(f"{name} must be positive")
        if self.n_agents < 1:
            raise SwarmError("n_agents must be >= 1")
        if self.dt > 0.1:
            raise SwarmError("dt must be <= 0.1 s")


_DAMP_FACTOR = 0.5  # per-tick velocity decay in PAUSED / AT_BASE

# Agents hold ~ this * d_star_current from their group centroid; 0.7 makes
# the settled 8-agent formation's mean pairwise distance track d_star.
REST_RADIUS_FACTOR = 0.7


@dataclass
class SwarmState:
    positions: np.ndarray        # (n, 3) meters
    velocities: np.ndarray       # (n, 3) m/s
    groups: np.ndarray           # (n,) int8, 0 = A, 1 = B
    mode: MissionMode = MissionMode.IDLE
    velocity_setpoint: np.ndarray = field(default_factory=lambda: np.zeros(3))
    d_star_current: float = 6.0
    split_active: bool = False
    base_point: np.ndarray = field(default_factory=lambda: np.zeros(3))
    operator_point: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tick: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        self.groups = np.asarray(self.groups, dtype=np.int8)
        self.velocity_setpoint = np.asarray(self.velocity_setpoint, dtype=np.float64)
        self.base_point = np.asarray(self.base_point, dtype=np.float64)
        self.operator_point = np.asarray(self.operator_point, dtype=np.float64)

    @property
    def n_agents(self) -> int:
        return self.positions.shape[0]

    def copy(self) -> "SwarmState":
        return SwarmState(
            positions=self.positions.copy(),
            velocities=self.velocities.copy(),
            groups=self.groups.copy(),
            mode=self.mode,
            velocity_setpoint=self.velocity_setpoint.copy(),
            d_star_current=self.d_star_current,
            split_active=self.split_active,
            base_point=self.base_point.copy(),
            operator_point=self.operator_point.copy(),
            tick=self.tick,
            rng_seed=self.rng_seed,
        )


def initial_state(params: SwarmParams, seed: int = 0, box: float = 20.0,
                  base_point=(0.0, 0.0, 0.0), operator_point=(0.0, 0.0, 0.0),
                  positions=None, velocities=None) -> SwarmState:
    """Seeded random placement in a [0, box]^3 cube (or explicit positions)."""
    n = params.n_agents
    if positions is not None:
        positions = np.asarray(positions, dtype=np.float64)
        if positions.shape != (n, 3):
            raise SwarmError(f"positions must be ({n}, 3)")
        if (positions[:, 2] < 0).any():
            raise SwarmError("initial z must be >= 0")
    else:
        rng = np.random.default_rng(seed)
        positions = rng.uniform(0.0, box, size=(n, 3))
    if velocities is not None:
        velocities = np.asarray(velocities, dtype=np.float64)
        if velocities.shape != (n, 3):
            raise SwarmError(f"velocities must be ({n}, 3)")
    else:
        velocities = np.zeros((n, 3))
    return SwarmState(
        positions=positions,
        velocities=velocities,
        groups=np.zeros(n, dtype=np.int8),
        d_star_current=params.d_star,
        base_point=np.asarray(base_point, dtype=np.float64),
        operator_point=np.asarray(operator_point, dtype=np.float64),
        rng_seed=seed,
    )


def step(state: SwarmState, params: SwarmParams) -> SwarmState:
    """Advance one tick of length ``params.dt``. Pure."""
    new = state.copy()
    new.tick = state.tick + 1

    if state.mode in (MissionMode.PAUSED, MissionMode.AT_BASE):
        new.velocities = state.velocities * _DAMP_FACTOR
        new.positions = state.positions + new.velocities * params.dt
        _clamp_ground(new)
        _check_finite(new)
        return new

    if state.mode == MissionMode.RETURN:
        goal, goal_active = state.base_point, True
    elif state.mode == MissionMode.FOLLOW:
        goal, goal_active = state.operator_point, True
    else:
        goal, goal_active = np.zeros(3), False

    # rest radius calibrated so the default 8-agent swarm settles with mean
    # pairwise distance ~ d_star; split halves each group's footprint and
    # extends cross-group separation range to d_star so the groups part
    rest_radius = REST_RADIUS_FACTOR * state.d_star_current
    cross_range = params.r_sep
    if state.split_active:
        rest_radius *= 0.5
        cross_range = max(params.r_sep, state.d_star_current)

    acc = _kernels.swarm_accel(
        state.positions, state.velocities, state.groups,
        bool(state.split_active), float(rest_radius), float(cross_range),
        params.w_coh, params.w_sep, params.w_align, params.w_cmd, params.w_goal,
        params.r_sep, params.v_cmd,
        np.ascontiguousarray(state.velocity_setpoint),
        np.ascontiguousarray(goal, dtype=np.float64),
        goal_active,
    )

    vel = state.velocities + acc * params.dt
    if not np.isfinite(vel).all():
        raise SimulationDiverged(new.tick)
    _clamp_speed(vel, params.v_max)
    new.velocities = vel
    new.positions = state.positions + vel * params.dt
    _clamp_ground(new)

    if new.mode == MissionMode.RETURN:
        centroid = new.positions.mean(axis=0)
        if np.linalg.norm(centroid - new.base_point) < params.arrival_radius:
            new.mode = MissionMode.AT_BASE

    _check_finite(new)
    return new


def _clamp_speed(vel: np.ndarray, v_max: float) -> None:
    # two rescale passes so rounding cannot leave a norm above v_max
    for _ in range(2):
        norms = np.sqrt((vel * vel).sum(axis=1))
        over = norms > v_max
        if not over.any():
            break
        vel[over] *= (v_max / norms[over])[:, None]


def _clamp_ground(state: SwarmState) -> None:
    below = state.positions[:, 2] < 0.0
    if below.any():
        state.positions[below, 2] = 0.0
        state.velocities[below, 2] = np.maximum(state.velocities[below, 2], 0.0)


def _check_finite(state: SwarmState) -> None:
    if not (np.isfinite(state.positions).all() and np.isfinite(state.velocities).all()):
        raise SimulationDiverged(state.tick)


_D_STAR_CLAMP = (0.25, 4.0)  # bounds as multiples of params.d_star


def apply_command(state: SwarmState, paradigm: str, label: str,
                  params: SwarmParams) -> SwarmState:
    """Apply one decoded command. Illegal (paradigm, label) pairs raise
    IllegalCommand before any state is touched."""
    if paradigm not in PARADIGM_LABELS or label not in PARADIGM_LABELS[paradigm]:
        raise IllegalCommand(f"illegal command {paradigm}/{label}")

    new = state.copy()
    v = params.v_cmd
    if paradigm == "MI":
        direction = {
            "left": (-v, 0.0, 0.0),
            "right": (v, 0.0, 0.0),
            "up": (0.0, 0.0, v),
            "down": (0.0, 0.0, -v),
        }[label]
        new.velocity_setpoint = np.array(direction)
    elif paradigm == "VI":
        lo = _D_STAR_CLAMP[0] * params.d_star
        hi = _D_STAR_CLAMP[1] * params.d_star
        if label == "fall_in":
            new.d_star_current = max(state.d_star_current * 0.5, lo)
            new.split_active = False
            new.groups = np.zeros(state.n_agents, dtype=np.int8)
        elif label == "spread_out":
            new.d_star_current = min(state.d_star_current * 2.0, hi)
        else:  # split
            new.groups = split_partition(state)
            new.split_active = True
    else:  # SI
        if label == "go":
            new.mode = MissionMode.EXECUTING
        elif label == "stop":
            new.mode = MissionMode.PAUSED
            new.velocity_setpoint = np.zeros(3)
        elif label == "follow_me":
            new.mode = MissionMode.FOLLOW
        else:  # return
            new.mode = MissionMode.RETURN
    return new


def split_partition(state: SwarmState) -> np.ndarray:
    """Group assignment for the split command.

    Agents are ranked by signed distance from the centroid along the
    horizontal axis orthogonal to the mean heading (ties by agent id); the
    lower half becomes group A, the rest group B, sizes within one.
    """
    n = state.n_agents
    if n < 2:
        raise SwarmError("split needs at least 2 agents")
    heading = state.velocities.mean(axis=0)
    hx, hy = heading[0], heading[1]
    norm = np.hypot(hx, hy)
    if norm < 1e-9:
        axis = np.array([1.0, 0.0, 0.0])
    else:
        axis = np.array([-hy / norm, hx / norm, 0.0])
    centroid = state.positions.mean(axis=0)
    proj = (state.positions - centroid) @ axis
    order = np.lexsort((np.arange(n), proj))
    groups = np.empty(n, dtype=np.int8)
    half = (n + 1) // 2
    groups[order[:half]] = 0
    groups[order[half:]] = 1
    return groups


@dataclass(frozen=True)
class SwarmMetrics:
    mean_pairwise: float
    min_pairwise: float
    centroid: tuple
    group_centroids: dict
    cluster_count: int
    mean_speed: float


def metrics(state: SwarmState, params: SwarmParams) -> SwarmMetrics:
    """Instrumentation snapshot; cluster count is single-linkage components
    at threshold 2 * r_sep."""
    pos = state.positions
    n = state.n_agents
    if n >= 2:
        diff = pos[:, None, :] - pos[None, :, :]
        d = np.sqrt((diff * diff).sum(axis=2))
        iu = np.triu_indices(n, k=1)
        pairs = d[iu]
        mean_pw = float(pairs.mean())
        min_pw = float(pairs.min())
        adjacency = d <= 2.0 * params.r_sep
        cluster_count = _component_count(adjacency)
    else:
        mean_pw = 0.0
        min_pw = 0.0
        cluster_count = 1
    centroid = tuple(pos.mean(axis=0))
    group_centroids = {}
    for gid, name in ((0, "A"), (1, "B")):
        mask = state.groups == gid
        if mask.any():
            group_centroids[name] = tuple(pos[mask].mean(axis=0))
    speeds = np.sqrt((state.velocities**2).sum(axis=1))
    return SwarmMetrics(
        mean_pairwise=mean_pw,
        min_pairwise=min_pw,
        centroid=centroid,
        group_centroids=group_centroids,
        cluster_count=cluster_count,
        mean_speed=float(speeds.mean()),
    )


def _component_count(adjacency: np.ndarray) -> int:
    n = adjacency.shape[0]
    seen = np.zeros(n, dtype=bool)
    count = 0
    for start in range(n):
        if seen[start]:
            continue
        count += 1
        stack = [start]
        seen[start] = True
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(adjacency[u]):
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
    return count


# --- scripted scenario runner ------------------------------------------------


class ScenarioError(ValueError):
    pass


CSV_COLUMNS = ("tick", "time", "mean_pairwise", "min_pairwise", "clusters",
               "mode", "mean_speed")


def load_scenario(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    return doc


def run_scenario(doc: dict, metrics_every: int = 1):
    """Run a scripted scenario dict; returns (final_state, csv_text).

    Schema: seed, duration_s, params {overrides}, init {box | positions},
    base_point, operator_point, script [[t_seconds, paradigm, label], ...].
    Command times are quantized to ticks and applied before that tick's step.
    """
    try:
        overrides = doc.get("params", {})
        params = SwarmParams(**overrides)
        duration = float(doc.get("duration_s", 30.0))
        seed = int(doc.get("seed", 0))
        init = doc.get("init", {})
        state = initial_state(
            params,
            seed=seed,
            box=float(init.get("box", 20.0)),
            positions=init.get("positions"),
            velocities=init.get("velocities"),
            base_point=tuple(doc.get("base_point", (0.0, 0.0, 0.0))),
            operator_point=tuple(doc.get("operator_point", (0.0, 0.0, 0.0))),
        )
        script = []
        for entry in doc.get("script", []):
            t, paradigm, label = entry
            script.append((int(round(float(t) / params.dt)), str(paradigm), str(label)))
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"malformed scenario: {exc}") from exc
    script.sort(key=lambda item: item[0])

    n_ticks = int(round(duration / params.dt))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)

    cursor = 0
    for tick in range(n_ticks):
        while cursor < len(script) and script[cursor][0] <= tick:
            _, paradigm, label = script[cursor]
            state = apply_command(state, paradigm, label, params)
            cursor += 1
        state = step(state, params)
        if state.tick % metrics_every == 0:
            m = metrics(state, params)
            writer.writerow([
                state.tick,
                repr(state.tick * params.dt),
                repr(m.mean_pairwise),
                repr(m.min_pairwise),
                m.cluster_count,
                state.mode.value,
                repr(m.mean_speed),
            ])
    return state, buf.getvalue()


def snapshot_dict(state: SwarmState, params: SwarmParams) -> dict:
    """JSON-ready snapshot for telemetry broadcast."""
    m = metrics(state, params)
    return {
        "tick": state.tick,
        "mode": state.mode.value,
        "d_star": state.d_star_current,
        "split_active": bool(state.split_active),
        "agents": [
            {
                "id": i,
                "p": [round(float(c), 4) for c in state.positions[i]],
                "v": [round(float(c), 4) for c in state.velocities[i]],
                "group": int(state.groups[i]),
            }
            for i in range(state.n_agents)
        ],
        "metrics": {
            "mean_pairwise": round(m.mean_pairwise, 4),
            "min_pairwise": round(m.min_pairwise, 4),
            "clusters": m.cluster_count,
            "mean_speed": round(m.mean_speed, 4),
        },
    }


__all__ = [
    "MissionMode", "SwarmParams", "SwarmState", "SwarmMetrics",
    "SwarmError", "SimulationDiverged", "IllegalCommand", "ScenarioError",
    "initial_state", "step", "apply_command", "split_partition", "metrics",
    "load_scenario", "run_scenario", "snapshot_dict", "CSV_COLUMNS",
]
