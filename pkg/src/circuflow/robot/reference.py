"""External baseline results for the two-link reaching task.

Published success rates of four deep reinforcement-learning agents on the
same reach-and-stop criterion (4 cm distance, 0.005 N*m torque, measured
over 10,000 episodes in a different physics stack).  Kept as comparison
metadata only; nothing in this package asserts these numbers.
"""

BASELINE_SUCCESS_RATES = {
    "a2c": 0.6091,
    "ddpg": 0.9337,
    "ppo": 0.4183,
    "sac": 0.9597,
}

BASELINE_EVALUATION = {
    "episodes": 10_000,
    "distance_threshold_m": 0.04,
    "torque_threshold_nm": 0.005,
}

# Reported post-training returns and wall-clock training times of the same
# baseline agents, for context when reading training logs.
BASELINE_TRAINING = {
    "a2c": {"reward_after_training": -10.99, "training_time": "4:56"},
    "ddpg": {"reward_after_training": -4.73, "training_time": "14:21"},
    "ppo": {"reward_after_training": -43.79, "training_time": "4:15"},
    "sac": {"reward_after_training": -5.23, "training_time": "24:49"},
}
