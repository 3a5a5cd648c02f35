from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import torch

from .batching import Batch, Example, collate
from .network import Mode, ModelConfig, Seq2SeqTransformer, masked_lm_loss
from .vocab import Vocab

logger = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 2e-3
    clip_norm: float = 1.0
    mode: Mode = "inject"
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: Seq2SeqTransformer
    vocab: Vocab
    losses: list[float] = field(default_factory=list)

    def write_loss_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss"])
            for epoch, loss in enumerate(self.losses, 1):
                writer.writerow([epoch, f"{loss:.10g}"])


def mask_targets(batch: Batch, vocab: Vocab, prob: float, generator: torch.Generator):
    """Replace a random subset of real target tokens with ``[MASK]``.

    Every row gets at least one masked position. Returns the masked input
    ids and the boolean mask of positions to predict.
    """
    real = ~batch.tgt_pad
    draws = torch.rand(batch.tgt_ids.shape, generator=generator)
    chosen = (draws < prob) & real
    for row in torch.nonzero(~chosen.any(dim=1) & real.any(dim=1)).flatten().tolist():
        candidates = torch.nonzero(real[row]).flatten()
        pick = candidates[torch.randint(len(candidates), (1,), generator=generator)]
        chosen[row, pick] = True
    return batch.tgt_ids.masked_fill(chosen, vocab.mask_id), chosen


def train(
    examples: Sequence[Example],
    vocab: Vocab,
    model_config: ModelConfig,
    config: TrainConfig = TrainConfig(),
    model: Optional[Seq2SeqTransformer] = None,
) -> TrainResult:
    """Fit the model with the masked-LM objective; deterministic for a fixed seed."""
    if not examples:
        raise ValueError("no training examples")
    threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        model = model or Seq2SeqTransformer(model_config)
        model.train()
        gen = torch.Generator().manual_seed(config.seed)
        opt = torch.optim.Adam(model.parameters(), lr=config.lr)
        losses = []
        for epoch in range(1, config.epochs + 1):
            order = torch.randperm(len(examples), generator=gen).tolist()
            total, count = 0.0, 0
            for start in range(0, len(order), config.batch_size):
                batch = collate([examples[i] for i in order[start : start + config.batch_size]], vocab, model_config)
                masked_ids, positions = mask_targets(batch, vocab, model_config.mask_lm_prob, gen)
                logits = model(batch.with_target(masked_ids, batch.tgt_pad), config.mode)
                loss = masked_lm_loss(logits, batch.tgt_ids, positions)
                if not torch.isfinite(loss):
                    raise TrainingDiverged(
                        f"non-finite loss {loss.item()} at epoch {epoch}, batch starting {start}; "
                        f"lr={config.lr}, mode={config.mode}"
                    )
                opt.zero_grad()
                loss.backward()
                if config.clip_norm:
                    torch.nn.utils.clip_grad_norm_(model.parameters(), config.clip_norm)
                opt.step()
                total += loss.item() * batch.size
                count += batch.size
            losses.append(total / count)
            logger.info("epoch %d loss %.4f", epoch, losses[-1])
            if not math.isfinite(losses[-1]):
                raise TrainingDiverged(f"non-finite epoch loss at epoch {epoch}")
        model.eval()
        return TrainResult(model, vocab, losses)
    finally:
        torch.set_num_threads(threads)
