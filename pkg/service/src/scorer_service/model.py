"""The scorer model: a pretrained transformer encoder with a linear
regression head on the last layer's [CLS] embedding.

The service consumes pre-packed token ids and segment labels from the
retrieval toolkit and never re-tokenizes; one tokenization authority avoids
drift between the two components.
"""

from __future__ import annotations

from pathlib import Path

import torch
from torch import nn
from transformers import BertConfig, BertModel

from .config import ServiceConfig


class BertRegressor(nn.Module):
    def __init__(self, encoder: BertModel):
        super().__init__()
        self.encoder = encoder
        self.head = nn.Linear(encoder.config.hidden_size, 1)

    @property
    def hidden_size(self) -> int:
        return self.encoder.config.hidden_size

    def forward(self, ids, segments, mask, output_attentions: bool = False):
        out = self.encoder(
            input_ids=ids,
            token_type_ids=segments,
            attention_mask=mask,
            output_attentions=output_attentions,
        )
        cls = out.last_hidden_state[:, 0]  # [CLS] from the last block
        scores = self.head(cls).squeeze(-1)
        return scores, cls, out.attentions if output_attentions else None


def build_model(config: ServiceConfig) -> BertRegressor:
    """Load a pretrained encoder or build a seeded random one."""
    torch.manual_seed(config.seed)
    if config.pretrained:
        encoder = BertModel.from_pretrained(config.pretrained, attn_implementation="eager")
    else:
        bert_config = BertConfig(
            vocab_size=config.vocab_size,
            hidden_size=config.hidden_size,
            num_hidden_layers=config.num_layers,
            num_attention_heads=config.num_heads,
            intermediate_size=config.intermediate_size,
            max_position_embeddings=config.max_len,
            pad_token_id=config.pad_token_id,
            attn_implementation="eager",
        )
        encoder = BertModel(bert_config)
    model = BertRegressor(encoder)
    model.eval()
    return model


def batch_tensors(
    pairs: list[dict], pad_token_id: int
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, list[int]]:
    """Pad a batch of wire records to a common length.

    Returns (ids, segments, mask, true lengths); padded positions are
    masked out so scores are independent of batch composition.
    """
    lengths = [len(p["ids"]) for p in pairs]
    width = max(lengths)
    ids = torch.full((len(pairs), width), pad_token_id, dtype=torch.long)
    segments = torch.zeros((len(pairs), width), dtype=torch.long)
    mask = torch.zeros((len(pairs), width), dtype=torch.long)
    for i, pair in enumerate(pairs):
        n = lengths[i]
        ids[i, :n] = torch.tensor(pair["ids"], dtype=torch.long)
        segments[i, :n] = torch.tensor(pair["segments"], dtype=torch.long)
        mask[i, :n] = 1
    return ids, segments, mask, lengths


def save_checkpoint(model: BertRegressor, config: ServiceConfig, directory: str | Path,
                    tag: str = "model") -> Path:
    """Checkpoint layout: ``<dir>/<tag>.pt`` (state dict) + ``<dir>/config.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{tag}.pt"
    torch.save(model.state_dict(), path)
    config.save(directory / "config.json")
    return path


def load_checkpoint(directory: str | Path, tag: str = "model") -> tuple[BertRegressor, ServiceConfig]:
    directory = Path(directory)
    config = ServiceConfig.from_file(directory / "config.json")
    model = build_model(config)
    state = torch.load(directory / f"{tag}.pt", map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model, config
