"""Collision-aware reactive navigation simulator and benchmark harness."""

from .corfilter import CorConfig, SelectionResult, cor, select, set_distance, trajectory_to_action
from .datagen import (
    EXPERT,
    NEGATIVE,
    FollowResult,
    PlannedPath,
    PlannerConfig,
    PlannerContext,
    TrajectoryFrame,
    TrajectoryRecord,
    follow_path,
    generate_expert,
    generate_negative,
    load_record,
    negative_window,
    plan_path,
    replay_record,
    save_record,
)
from .episode import (
    FAIL_COLLISION,
    FAIL_TIMEOUT,
    RUNNING,
    SUCCESS,
    Episode,
    EpisodeConfig,
    EpisodeState,
    StepResult,
)
from .errors import RvnError
from .evalharness import (
    EvalReport,
    GreedyAgent,
    OracleAgent,
    ScenarioSet,
    build_benchmark,
    build_scenarios,
    compute_metrics,
    greedy_agent,
    load_scenarios,
    oracle_agent,
    run_eval,
    save_scenarios,
)
from .envserver import EnvServer, Session, serve, serve_stdio, start_server
from .kinematics import (
    ACTIONS,
    MOVE_FORWARD,
    STOP,
    TURN_LEFT,
    TURN_RIGHT,
    AgentSpec,
    MoveOutcome,
    Pose,
    execute_action,
    normalize_yaw,
    relative_goal,
)
from .sensing import ObservationFrame, ObservationHistory, SensorSpec, history_stack, render
from .world import (
    DistanceField,
    InflatedGrid,
    OccupancyGrid,
    SceneParams,
    generate_scene,
    geodesic_field,
    inflate,
    load_scene,
    octile_meters,
    sample_navigable_point,
    save_scene,
)

__version__ = "0.1.0"
