from .config import AlgorithmConfig, BNMConfig, CoralConfig, DANConfig, DANNConfig, DEFAULT_OPTIMIZERS, DSANConfig, MethodConfig, OptimizerConfig, SSRTConfig, SourceOnlyConfig, parse_algorithm
from .optim import TrainerSnapshot, TrainerState, lr_at, sgd_step
from .safe import SafeTrainingState, diversity, init_safe_training, r_schedule, safe_training_tick
from .methods import ALGORITHMS, Algorithm, LossRecord, Objective, build_objective, get_algorithm_class, train_step
