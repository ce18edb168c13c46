"""Relevance scorers: a native embedding scorer and a remote neural client.

The native scorer is a desk-scale stand-in (cosine of query and packed-text
mean vectors). The remote client speaks the scorer-service wire protocol:
``GET /info`` for the handshake, ``POST /score`` for scores, and
``POST /features`` for scores plus [CLS] feature vectors.
"""

from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests

from .corpus import Query
from .embed import VectorStore, cosine, mean_vector
from .encoder import PackedInput
from .textproc import SPECIAL_TOKENS, simple_tokenize

logger = logging.getLogger(__name__)


class ScorerError(RuntimeError):
    """Base class for remote-scorer failures."""


class ScorerConnectionError(ScorerError):
    """Service unreachable after retries."""


class ScorerProtocolError(ScorerError):
    """Service reachable but the response violates the wire protocol."""


class HiddenSizeMismatch(ScorerError):
    """Feature vectors disagree with the handshake's hidden size."""


class FeatureCacheError(RuntimeError):
    """Corrupt or incompatible feature cache file."""


def packed_text(packed: PackedInput) -> str:
    """Reassemble the packed input's non-special tokens into plain words."""
    words: list[str] = []
    for token in packed.tokens.tokens:
        if token in SPECIAL_TOKENS:
            continue
        if token.startswith("##") and words:
            words[-1] += token[2:]
        else:
            words.append(token)
    return " ".join(words)


def score_native(packed: PackedInput, query: Query, store: VectorStore) -> float:
    """Cosine between the query's and the packed text's mean word vectors."""
    query_mean = mean_vector(simple_tokenize(query.text), store)
    text_mean = mean_vector(simple_tokenize(packed_text(packed)), store)
    return cosine(query_mean, text_mean)


@dataclass(frozen=True)
class ServiceInfo:
    hidden_size: int
    model_tag: str
    max_len: int


class RemoteScorer:
    """HTTP client for the neural scorer service.

    Requests are split into sub-batches of ``batch_size`` pairs; responses
    are validated (key alignment, finiteness, feature width) and merged back
    in request order. Transport failures are retried with exponential
    backoff; protocol violations are raised immediately.
    """

    def __init__(
        self,
        endpoint: str,
        batch_size: int = 32,
        timeout: float = 30.0,
        retries: int = 3,
        backoff: float = 0.25,
        session: requests.Session | None = None,
    ):
        if batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        self.endpoint = endpoint.rstrip("/")
        self.batch_size = batch_size
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.session = session or requests.Session()
        self._info: ServiceInfo | None = None

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        url = self.endpoint + path
        last_exc: Exception | None = None
        for attempt in range(self.retries):
            try:
                if method == "GET":
                    resp = self.session.get(url, timeout=self.timeout)
                else:
                    resp = self.session.post(url, json=payload, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_exc = exc
                time.sleep(self.backoff * (2**attempt))
                continue
            if resp.status_code >= 500:
                last_exc = ScorerConnectionError(f"{url}: server error {resp.status_code}")
                time.sleep(self.backoff * (2**attempt))
                continue
            if resp.status_code != 200:
                raise ScorerProtocolError(f"{url}: unexpected status {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise ScorerProtocolError(f"{url}: response is not JSON") from exc
        raise ScorerConnectionError(f"{url}: unreachable after {self.retries} attempts") from last_exc

    def info(self) -> ServiceInfo:
        """Handshake; cached for the client's lifetime."""
        if self._info is None:
            body = self._request("GET", "/info")
            try:
                self._info = ServiceInfo(
                    hidden_size=int(body["hidden_size"]),
                    model_tag=str(body["model_tag"]),
                    max_len=int(body["max_len"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ScorerProtocolError(f"malformed /info response: {body!r}") from exc
        return self._info

    def _post_pairs(self, path: str, pairs: list[tuple[str, dict]]) -> list[dict]:
        """POST pairs in sub-batches; return per-pair records in request order."""
        if not pairs:
            raise ValueError("score request batch must be nonempty")
        merged: dict[str, dict] = {}
        for start in range(0, len(pairs), self.batch_size):
            chunk = pairs[start : start + self.batch_size]
            payload = {
                "pairs": [
                    {"key": key, "tokens": rec["tokens"], "ids": rec["ids"], "segments": rec["segments"]}
                    for key, rec in chunk
                ]
            }
            body = self._request("POST", path, payload)
            replies = body.get("pairs")
            if not isinstance(replies, list):
                raise ScorerProtocolError(f"{path}: response missing 'pairs' list")
            got = {r.get("key") for r in replies}
            want = {key for key, _ in chunk}
            if got != want:
                raise ScorerProtocolError(f"{path}: response keys {got} != request keys {want}")
            for reply in replies:
                merged[reply["key"]] = reply
        return [merged[key] for key, _ in pairs]

    def score(self, pairs: list[tuple[str, dict]]) -> dict[str, float]:
        """Scores for (key, wire record) pairs, keyed and ordered by request."""
        out: dict[str, float] = {}
        for reply in self._post_pairs("/score", pairs):
            try:
                value = float(reply["score"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ScorerProtocolError(f"malformed score record: {reply!r}") from exc
            if not np.isfinite(value):
                raise ScorerProtocolError(f"non-finite score for {reply['key']!r}")
            out[reply["key"]] = value
        return out

    def features(self, pairs: list[tuple[str, dict]]) -> dict[str, tuple[float, np.ndarray]]:
        """Scores plus f_bert vectors; every vector must match the handshake width."""
        hidden = self.info().hidden_size
        out: dict[str, tuple[float, np.ndarray]] = {}
        for reply in self._post_pairs("/features", pairs):
            try:
                value = float(reply["score"])
                vector = np.array(reply["f_bert"], dtype=float)
            except (KeyError, TypeError, ValueError) as exc:
                raise ScorerProtocolError(f"malformed feature record: {reply!r}") from exc
            if vector.ndim != 1 or vector.shape[0] != hidden:
                raise HiddenSizeMismatch(
                    f"f_bert for {reply['key']!r} has {vector.shape} components, handshake says {hidden}"
                )
            if not (np.isfinite(value) and np.all(np.isfinite(vector))):
                raise ScorerProtocolError(f"non-finite values for {reply['key']!r}")
            out[reply["key"]] = (value, vector)
        return out


class FeatureCache:
    """In-memory f_bert vectors keyed by (query_id, table_id)."""

    def __init__(self, vectors: dict[tuple[str, str], np.ndarray], hidden_size: int):
        self._vectors = vectors
        self.hidden_size = hidden_size

    def __len__(self) -> int:
        return len(self._vectors)

    def get(self, query_id: str, table_id: str) -> np.ndarray | None:
        return self._vectors.get((query_id, table_id))

    def missing(self, pairs: list[tuple[str, str]]) -> list[tuple[str, str]]:
        """Keys that need re-requesting from the service."""
        return [p for p in pairs if p not in self._vectors]

    def items(self):
        return self._vectors.items()


def cache_features(vectors: dict[tuple[str, str], np.ndarray], path: str | Path) -> None:
    """Persist f_bert vectors losslessly (float64 npz with a checksum)."""
    if not vectors:
        raise ValueError("nothing to cache")
    keys = sorted(vectors)
    matrix = np.stack([np.asarray(vectors[k], dtype=np.float64) for k in keys])
    checksum = hashlib.sha256(matrix.tobytes()).hexdigest()
    np.savez(
        path,
        version=np.array(1),
        qids=np.array([k[0] for k in keys]),
        tids=np.array([k[1] for k in keys]),
        vectors=matrix,
        checksum=np.array(checksum),
    )


def load_cached_features(path: str | Path, expected_hidden: int | None = None) -> FeatureCache:
    """Load a feature cache, verifying the checksum and optional width."""
    try:
        data = np.load(path, allow_pickle=False)
        matrix = data["vectors"]
        qids = data["qids"]
        tids = data["tids"]
        checksum = str(data["checksum"])
    except KeyError as exc:
        raise FeatureCacheError(f"{path}: missing cache field {exc}") from exc
    except Exception as exc:
        # np.load reads arrays lazily, so zip-level corruption surfaces here.
        raise FeatureCacheError(f"{path}: unreadable cache") from exc
    if hashlib.sha256(matrix.tobytes()).hexdigest() != checksum:
        raise FeatureCacheError(f"{path}: checksum mismatch, cache is corrupt")
    if expected_hidden is not None and matrix.shape[1] != expected_hidden:
        raise FeatureCacheError(
            f"{path}: cached width {matrix.shape[1]} != expected {expected_hidden}"
        )
    vectors = {
        (str(q), str(t)): matrix[i] for i, (q, t) in enumerate(zip(qids, tids))
    }
    return FeatureCache(vectors, hidden_size=int(matrix.shape[1]))
