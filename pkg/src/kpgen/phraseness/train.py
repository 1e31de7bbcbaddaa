from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch

from .inputs import TrainingInstance
from .model import PhrasenessModel

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainSchedule:
    epochs: int = 15
    lr: float = 1e-4
    lr_decay: float = 0.9
    decay_every: int = 3
    clip_norm: float = 0.1
    batch_size: int = 64
    seed: int = 0

    def lr_at(self, epoch: int) -> float:
        """Learning rate for a 0-indexed epoch: cut by ``1 - lr_decay`` every ``decay_every`` epochs."""
        return self.lr * self.lr_decay ** (epoch // self.decay_every)


@dataclass
class TrainResult:
    epoch_losses: list[float] = field(default_factory=list)
    seconds: float = 0.0


def make_batches(instances: Sequence[TrainingInstance], batch_size: int, rng: np.random.Generator) -> list[list[TrainingInstance]]:
    """Shuffle groups of instances sharing one source, then pack groups into batches.

    Keeping a group together lets the batch encode that source once.
    """
    groups: dict[int, list[TrainingInstance]] = {}
    for inst in instances:
        groups.setdefault(id(inst.source), []).append(inst)
    order = list(groups.values())
    rng.shuffle(order)
    batches, current = [], []
    for group in order:
        for inst in group:
            current.append(inst)
            if len(current) == batch_size:
                batches.append(current)
                current = []
    if current:
        batches.append(current)
    return batches


def train(
    model: PhrasenessModel,
    instances: Sequence[TrainingInstance],
    schedule: TrainSchedule = TrainSchedule(),
    on_epoch: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Minimize mean -log P_pn(z | x~) with Adam, step-decayed lr and gradient-norm clipping."""
    if not instances:
        raise ValueError("no training instances")
    torch.manual_seed(schedule.seed)
    rng = np.random.default_rng(schedule.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=schedule.lr)
    result = TrainResult()
    start = time.perf_counter()
    model.train()
    for epoch in range(schedule.epochs):
        for group in optimizer.param_groups:
            group["lr"] = schedule.lr_at(epoch)
        total, count = 0.0, 0
        for b, batch in enumerate(make_batches(instances, schedule.batch_size, rng)):
            loss = model.nll(batch).mean()
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss.item()} at epoch {epoch}, batch {b} "
                    f"(lr={schedule.lr_at(epoch):g})"
                )
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), schedule.clip_norm)
            optimizer.step()
            total += loss.item() * len(batch)
            count += len(batch)
        mean = total / count
        result.epoch_losses.append(mean)
        logger.info("epoch %d lr %.3g loss %.4f", epoch, schedule.lr_at(epoch), mean)
        if on_epoch is not None:
            on_epoch(epoch, mean)
    model.eval()
    result.seconds = time.perf_counter() - start
    return result
