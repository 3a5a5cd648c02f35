from .network import (
    InjectionState,
    KnowledgeInjection,
    ModelConfig,
    Seq2SeqTransformer,
    build_joint_mask,
    masked_lm_loss,
)
from .vocab import Vocab

__all__ = [
    "InjectionState",
    "KnowledgeInjection",
    "ModelConfig",
    "Seq2SeqTransformer",
    "build_joint_mask",
    "masked_lm_loss",
    "Vocab",
]
