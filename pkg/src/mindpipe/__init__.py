"""mindpipe: brain-signal-to-command pipeline.

Shuffled dimension transform, reinforcement-learning focal-zone search,
dimension-sequence LSTM classification, and a streaming intent-consensus
service.
"""

from .classifier import (ClassifierModel, TrainConfig, forward, predict,
                         predict_batch, train_classifier)
from .data import (CsvSchema, Dataset, Metrics, Sample, compute_metrics,
                   generate_synthetic, load_dataset, save_dataset, split)
from .errors import (ModelFormatError, NumericError, ParseError, ShapeError,
                     ValidationError)
from .intent import (CommandMap, ConsensusState, command_map, consensus_update,
                     map_command, window_decide)
from .modelfile import load_model, save_model
from .reward import (RewardBreakdown, evaluate_reward, fit_autoregressive,
                     make_reward_fn, reward_from_silhouette, silhouette_score)
from .rs import ShuffleMap, apply_shuffle, apply_shuffle_batch, make_shuffle_map
from .server import StreamServer, replay_stream
from .zonesearch import (FocalZone, QNetwork, ReplayMemory, ZoneAction,
                         ZoneSearchConfig, apply_action, initial_zone,
                         optimize_focal_zone, q_values, select_action)

__version__ = "0.1.0"
