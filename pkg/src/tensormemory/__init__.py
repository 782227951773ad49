"""Episodic and semantic memory as Tucker tensor decompositions."""

from .consolidation import (
    KnowledgeGraphStore,
    absorb_time,
    copy_engrams,
    distill_explicit,
    marginalize_time,
    replay_teach,
    semantic_like,
)
from .memory_model import (
    EmbeddingTable,
    Engram,
    EpisodicModel,
    ModelConfig,
    SemanticModel,
    SymbolRegistry,
    bind_engram,
    register_symbol,
    rescal_contract,
    score_episodic,
    score_semantic,
    triple_probability,
)
from .perception import Encoder, encode, perceive, read_sensory
from .persistence import ingest, load_checkpoint, save_checkpoint
from .query_engine import (
    FREE,
    LINEAR,
    MARGINALIZED,
    Clamped,
    Fixed,
    SlotPattern,
    associate,
    conditional_distribution,
    decode,
    entity_profile,
    joint_distribution,
    marginal_distribution,
    recall,
    sample,
    sample_joint,
    sample_recall,
)
from .tensor_core import CoreTensor, contract3, contract4, contract4_leave_one, contract_leave_one
from .trainer import FactStore, TrainConfig, evaluate_materialization, fit, loss_and_gradients

__version__ = "0.1.0"
