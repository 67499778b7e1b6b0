"""Two-link manipulator compartment: dynamics, reaching environment, policy
evaluation, derivative-free training, and the success-rate-to-sorter
coupling."""

from .cem import GenerationStats, TrainerConfig, desk_scale_setup, train_cem  # noqa: F401
from .dynamics import (  # noqa: F401
    ManipulatorParams,
    fingertip,
    forward_dynamics,
    gravity_torque,
    integrate_dynamics,
    coriolis_matrix,
    mass_matrix,
    passivity_residual,
    total_energy,
)
from .evaluation import (  # noqa: F401
    SorterCoupling,
    SuccessReport,
    evaluate_policy,
    success_to_sorter,
)
from .policies import (  # noqa: F401
    MLPPolicy,
    PDReachPolicy,
    Policy,
    ZeroPolicy,
    load_policy,
    save_policy,
)
from .reach_env import EpisodeCriterion, ManipulatorState, ReachEnv, observe  # noqa: F401
from .reference import BASELINE_EVALUATION, BASELINE_SUCCESS_RATES  # noqa: F401
