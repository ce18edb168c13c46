"""Fixtures: a tiny randomly initialized service and hand-built wire pairs."""

from __future__ import annotations

import numpy as np
import pytest
from fastapi.testclient import TestClient

from scorer_service.app import create_app
from scorer_service.config import ServiceConfig

VOCAB_SIZE = 128
CLS_ID = 2
SEP_ID = 3


def tiny_config(**overrides) -> ServiceConfig:
    defaults = dict(
        vocab_size=VOCAB_SIZE,
        hidden_size=32,
        num_layers=2,
        num_heads=2,
        intermediate_size=64,
        max_len=128,
        pad_token_id=0,
        model_tag="tiny-test",
        seed=0,
    )
    defaults.update(overrides)
    return ServiceConfig(**defaults)


def wire_pair(key: str, length: int = 12, seed: int = 0, grade: float | None = None) -> dict:
    """A plausible packed input: [CLS] body [SEP] with A/B segments."""
    rng = np.random.default_rng(seed)
    body = rng.integers(4, VOCAB_SIZE, size=length - 2).tolist()
    ids = [CLS_ID] + body + [SEP_ID]
    cut = max(2, length // 3)
    segments = [0] * cut + [1] * (length - cut)
    record = {"key": key, "ids": ids, "segments": segments}
    if grade is not None:
        record["grade"] = grade
    return record


@pytest.fixture(scope="session")
def config() -> ServiceConfig:
    return tiny_config()


@pytest.fixture(scope="session")
def app(config, tmp_path_factory):
    config.checkpoint_dir = str(tmp_path_factory.mktemp("ckpt"))
    return create_app(config)


@pytest.fixture(scope="session")
def client(app) -> TestClient:
    return TestClient(app)
