"""Service configuration.

The model is either a pretrained checkpoint (name or local path, e.g. a
large cased model with hidden size 1024) or a randomly initialized small
transformer described by explicit dimensions — the latter keeps tests and
smoke runs self-contained.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path


@dataclass
class ServiceConfig:
    pretrained: str | None = None
    vocab_size: int = 128
    hidden_size: int = 32
    num_layers: int = 2
    num_heads: int = 2
    intermediate_size: int = 64
    max_len: int = 128
    pad_token_id: int = 0
    model_tag: str = "random-tiny"
    seed: int = 0
    checkpoint_dir: str = "checkpoints"
    attention_export: bool = True
    vocab_path: str | None = None

    def __post_init__(self):
        if self.max_len < 128:
            raise ValueError("max_len must be at least 128")
        if self.vocab_path:
            self.vocab_size = _count_vocab_lines(self.vocab_path)

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        record = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**record)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")


def _count_vocab_lines(path: str | Path) -> int:
    with open(path, encoding="utf-8") as fh:
        return sum(1 for line in fh if line.rstrip("\r\n"))


@dataclass
class TrainSettings:
    """Fine-tuning hyperparameters; defaults follow the training recipe
    (MSE regression, 5 epochs, batch 16, Adam at 1e-5 with 0.1 warm-up and
    linear decay)."""

    epochs: int = 5
    batch_size: int = 16
    learning_rate: float = 1e-5
    warmup: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.warmup < 1.0:
            raise ValueError("warmup must lie in [0, 1)")
