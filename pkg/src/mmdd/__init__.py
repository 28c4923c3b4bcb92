"""Toy-scale generative dataset distillation with a min-max conditional diffusion model."""
from ._backend import active_backend, use_backend
from .diffusion import NoiseSchedule, StepPlan, forward_noise, make_step_plan, predict_clean, reverse_sample
from .dsr_generator import GenBudget, SurrogateDataset, SweepRow, compute_ipc, generate, sweep_steps
from .evaluator import EvalConfig, EvalResult, accuracy_gain, evaluate, run_evaluation, train_classifier
from .minmax import FeatureBuffer, LossBreakdown, combined_loss, cosine_similarity, diversity_term, representativeness_term
from .numeric_model import ConditionEmbedding, DenoiserModel, LatentCodec, time_embedding
from .trainer import Adam, TrainConfig, train, train_step

__version__ = "0.1.0"
