"""HTTP surface of the scorer service.

Endpoints (field names are part of the wire contract: pairs, key, tokens,
ids, segments, score, f_bert):

- ``GET  /info``      handshake: hidden_size, model_tag, max_len
- ``POST /score``     scores for a batch of packed inputs
- ``POST /features``  scores plus the [CLS] feature vector per pair
- ``POST /train``     fine-tune on graded pairs (exclusive; scoring
                      requests are refused with 409 while training)
- ``POST /attention`` per-layer attention maps, when enabled
"""

from __future__ import annotations

import threading

import torch
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .config import ServiceConfig, TrainSettings
from .model import BertRegressor, batch_tensors, build_model
from .training import TrainingDiverged, finetune


class WirePair(BaseModel):
    key: str
    tokens: list[str] | None = None
    ids: list[int]
    segments: list[int]


class ScoreRequest(BaseModel):
    pairs: list[WirePair] = Field(min_length=1)


class TrainPair(WirePair):
    grade: float


class TrainSettingsModel(BaseModel):
    epochs: int = 5
    batch_size: int = 16
    learning_rate: float = 1e-5
    warmup: float = 0.1
    seed: int = 0


class TrainRequest(BaseModel):
    pairs: list[TrainPair] = Field(min_length=1)
    config: TrainSettingsModel | None = None


def _validate_pairs(pairs: list[WirePair], config: ServiceConfig) -> None:
    for pair in pairs:
        if len(pair.ids) != len(pair.segments):
            raise HTTPException(
                status_code=400,
                detail=f"pair {pair.key!r}: ids and segments lengths differ",
            )
        if not pair.ids:
            raise HTTPException(status_code=400, detail=f"pair {pair.key!r}: empty input")
        if len(pair.ids) > config.max_len:
            raise HTTPException(
                status_code=400,
                detail=f"pair {pair.key!r}: length {len(pair.ids)} exceeds max_len {config.max_len}",
            )
        if any(i < 0 or i >= config.vocab_size for i in pair.ids):
            raise HTTPException(
                status_code=400, detail=f"pair {pair.key!r}: token id out of vocabulary range"
            )
        if any(s not in (0, 1) for s in pair.segments):
            raise HTTPException(
                status_code=400, detail=f"pair {pair.key!r}: segments must be 0 or 1"
            )


def create_app(config: ServiceConfig, model: BertRegressor | None = None) -> FastAPI:
    app = FastAPI(title="scorer-service")
    state = {"model": model or build_model(config)}
    train_lock = threading.Lock()
    app.state.train_lock = train_lock

    def scoring_model() -> BertRegressor:
        if train_lock.locked():
            raise HTTPException(status_code=409, detail="training in progress")
        return state["model"]

    def run_batches(pairs: list[WirePair], want_features: bool, want_attentions: bool = False):
        model = scoring_model()
        records = [p.model_dump() for p in pairs]
        scores, features, attentions = [], [], []
        with torch.no_grad():
            ids, segments, mask, lengths = batch_tensors(records, config.pad_token_id)
            batch_scores, cls, attn = model(
                ids, segments, mask, output_attentions=want_attentions
            )
            scores = [float(s) for s in batch_scores]
            if want_features:
                features = [row.tolist() for row in cls]
            if want_attentions:
                # layers x heads x len x len per pair, trimmed to true length
                stacked = torch.stack(attn, dim=0)  # layers, batch, heads, len, len
                for i, n in enumerate(lengths):
                    attentions.append(stacked[:, i, :, :n, :n].tolist())
        return scores, features, attentions

    @app.get("/info")
    def info():
        return {
            "hidden_size": state["model"].hidden_size,
            "model_tag": config.model_tag,
            "max_len": config.max_len,
        }

    @app.post("/score")
    def score(request: ScoreRequest):
        _validate_pairs(request.pairs, config)
        scores, _, _ = run_batches(request.pairs, want_features=False)
        return {
            "pairs": [
                {"key": pair.key, "score": value}
                for pair, value in zip(request.pairs, scores)
            ]
        }

    @app.post("/features")
    def features(request: ScoreRequest):
        _validate_pairs(request.pairs, config)
        scores, vectors, _ = run_batches(request.pairs, want_features=True)
        return {
            "pairs": [
                {"key": pair.key, "score": value, "f_bert": vector}
                for pair, value, vector in zip(request.pairs, scores, vectors)
            ]
        }

    @app.post("/attention")
    def attention(request: ScoreRequest):
        if not config.attention_export:
            raise HTTPException(status_code=403, detail="attention export is disabled")
        _validate_pairs(request.pairs, config)
        _, _, maps = run_batches(request.pairs, want_features=False, want_attentions=True)
        return {
            "pairs": [
                {"key": pair.key, "attentions": layer_maps}
                for pair, layer_maps in zip(request.pairs, maps)
            ]
        }

    @app.post("/train")
    def train(request: TrainRequest):
        _validate_pairs(request.pairs, config)
        if not train_lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="training already in progress")
        try:
            raw = request.config.model_dump() if request.config else {}
            settings = TrainSettings(**raw)
            records = [p.model_dump() for p in request.pairs]
            log = finetune(state["model"], records, settings, config)
        except TrainingDiverged as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        finally:
            train_lock.release()
        return {
            "model_tag": config.model_tag,
            "steps": len(log.step_losses),
            "step_losses": log.step_losses,
            "epoch_losses": log.epoch_losses,
            "checkpoint": log.checkpoint,
        }

    return app
