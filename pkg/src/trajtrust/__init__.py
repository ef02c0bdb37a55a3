"""Interaction priors, feasible kinematic rollouts, and trust metrics
for multi-agent trajectory prediction."""

from .attention import (AttentionRecord, GateLayer, attn_loss, delta_alpha,
                        gate_forward, gnl_combine, mnr_combine)
from .errors import (DegenerateProduct, DegenerateVariance, DimensionMismatch,
                     HorizonMismatch, InvariantViolation, IoError,
                     NonFiniteInput, NonFiniteLoss, ParseError, SpecError,
                     TooShort, TrajtrustError, UnknownAgent)
from .feasibility import (AuditReport, AuditTrajectory, audit,
                          estimate_derivatives)
from .kinematics import (ControlSequence, KinematicLimits, KinModel, KinState,
                         default_limits, rollout, rollout_jacobian,
                         squash_controls)
from .metrics import (MultiModalPrediction, PredictionMode, brier_min_fde,
                      interpretability_report, min_ade, min_fde, miss_rate,
                      pearson)
from .priors import (PriorConfig, ScoreVector, dgsfm_scores, l2_scores,
                     skgacn_scores, v_egg)
from .reproduction import (ReproductionReport, invert_controls,
                           reproduction_report)
from .scene import (AgentClass, AgentSpec, AgentState, AgentTrack, NeighborSet,
                    Scene, SyntheticSpec, generate_synthetic, knn_neighbors,
                    load_scenes, save_scenes)

__version__ = "0.1.0"
