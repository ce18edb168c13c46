"""Fine-tuning: MSE regression on gold relevance grades.

Adam with linear warm-up then linear decay; per-step losses are logged so
callers can verify training actually moved.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch.optim.lr_scheduler import LambdaLR

from .config import ServiceConfig, TrainSettings
from .model import BertRegressor, batch_tensors, save_checkpoint

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """Non-finite loss; a partial checkpoint has been kept."""


@dataclass
class TrainLog:
    step_losses: list[float] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)
    checkpoint: str | None = None

    @property
    def first_step_loss(self) -> float:
        return self.step_losses[0]

    @property
    def final_step_loss(self) -> float:
        return self.step_losses[-1]


def _schedule(total_steps: int, warmup: float):
    warmup_steps = int(warmup * total_steps)

    def factor(step: int) -> float:
        if warmup_steps > 0 and step < warmup_steps:
            return (step + 1) / warmup_steps
        remaining = max(total_steps - warmup_steps, 1)
        return max((total_steps - step) / remaining, 0.0)

    return factor


def finetune(
    model: BertRegressor,
    pairs: list[dict],
    settings: TrainSettings,
    config: ServiceConfig,
    checkpoint_dir: str | Path | None = None,
) -> TrainLog:
    """Train in place on wire records carrying a ``grade``; returns the log.

    Fixed epoch count, no early stopping. On divergence the current weights
    are saved as a partial checkpoint before the error is raised.
    """
    if not pairs:
        raise ValueError("training needs at least one pair")
    torch.manual_seed(settings.seed)
    generator = torch.Generator().manual_seed(settings.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=settings.learning_rate)
    steps_per_epoch = math.ceil(len(pairs) / settings.batch_size)
    total_steps = settings.epochs * steps_per_epoch
    scheduler = LambdaLR(optimizer, _schedule(total_steps, settings.warmup))
    criterion = torch.nn.MSELoss()

    directory = Path(checkpoint_dir or config.checkpoint_dir)
    log = TrainLog()
    model.train()
    try:
        for epoch in range(settings.epochs):
            order = torch.randperm(len(pairs), generator=generator).tolist()
            epoch_total = 0.0
            for start in range(0, len(pairs), settings.batch_size):
                chunk = [pairs[i] for i in order[start : start + settings.batch_size]]
                ids, segments, mask, _ = batch_tensors(chunk, config.pad_token_id)
                grades = torch.tensor([float(p["grade"]) for p in chunk])
                optimizer.zero_grad()
                scores, _, _ = model(ids, segments, mask)
                loss = criterion(scores, grades)
                value = float(loss.item())
                if not math.isfinite(value):
                    partial = save_checkpoint(model, config, directory, tag="partial")
                    raise TrainingDiverged(
                        f"non-finite loss at step {len(log.step_losses)}; "
                        f"partial checkpoint kept at {partial}"
                    )
                log.step_losses.append(value)
                epoch_total += value * len(chunk)
                loss.backward()
                optimizer.step()
                scheduler.step()
            log.epoch_losses.append(epoch_total / len(pairs))
            logger.info("epoch %d: mean loss %.6f", epoch, log.epoch_losses[-1])
    finally:
        model.eval()
    path = save_checkpoint(model, config, directory, tag="model")
    log.checkpoint = str(path)
    return log


def evaluate_loss(model: BertRegressor, pairs: list[dict], config: ServiceConfig) -> float:
    """Full-set MSE in eval mode."""
    criterion = torch.nn.MSELoss()
    model.eval()
    with torch.no_grad():
        ids, segments, mask, _ = batch_tensors(pairs, config.pad_token_id)
        grades = torch.tensor([float(p["grade"]) for p in pairs])
        scores, _, _ = model(ids, segments, mask)
        return float(criterion(scores, grades).item())
