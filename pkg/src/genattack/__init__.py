"""Genetic black-box adversarial attacks on text classifiers."""

from .corpus import Document, LabeledExample, detokenize, tokenize
from .embedding import EmbeddingSpace, load_embeddings, nearest_neighbors, neighbor_counts
from .errors import (
    AttackError,
    CampaignError,
    ContractViolation,
    EmptyCandidates,
    LoadError,
    NoReplaceablePositions,
    ParseError,
    TrainError,
    VictimUnavailable,
    WordNotFound,
)
from .genetic import AttackConfig, AttackResult, attack_genetic, attack_greedy, crossover, normalize_fitness
from .language_model import NGramModel, filter_top_k, score_candidate_in_context, train_ngram
from .perturb import PerturbContext, load_stopwords, perturb, propose_candidates, select_position
from .victim import BuiltinVictim, QueryLedger, RemoteVictim, TrainConfig, train_builtin

__version__ = "0.1.0"
