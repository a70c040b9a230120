"""Pluggable model backends: embedder, inpainter, captioner, instruction writer, denoiser.

Two implementations ship here: deterministic stubs (content-hash driven, no
network) and HTTP clients for remote inference services. Every pipeline stage
runs to completion against the stubs.
"""

from __future__ import annotations

import base64
import hashlib
import os
import re
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import BackendProtocolError, BackendUnavailableError
from .rasters import decode_png, encode_png
from .records import EmbeddingVector

DEFAULT_EMBED_DIM = 512


def content_digest(*parts) -> str:
    """Stable hash over rasters, strings, and scalars."""
    h = hashlib.sha256()
    for part in parts:
        if part is None:
            h.update(b"\x00null")
        elif isinstance(part, np.ndarray):
            arr = np.ascontiguousarray(part)
            h.update(arr.dtype.str.encode())
            h.update(str(arr.shape).encode())
            h.update(arr.tobytes())
        elif isinstance(part, bytes):
            h.update(part)
        else:
            h.update(str(part).encode())
        h.update(b"\x1f")
    return h.hexdigest()


def _rng_from_digest(digest: str) -> np.random.Generator:
    return np.random.default_rng(int(digest[:16], 16))


@dataclass
class BackendBundle:
    embedder: object
    inpainter: object
    captioner: object
    writer: object
    denoiser: object


# ---------------------------------------------------------------------------
# Deterministic stubs
# ---------------------------------------------------------------------------


class StubEmbedder:
    """Maps any raster or string to a pseudo-random unit vector via its content hash."""

    def __init__(self, seed: int = 0, dimension: int = DEFAULT_EMBED_DIM):
        self.name = "stub-embedder"
        self.dimension = dimension
        self._seed = seed

    def _embed(self, kind: str, content) -> EmbeddingVector:
        digest = content_digest(kind, self._seed, content)
        values = _rng_from_digest(digest).standard_normal(self.dimension)
        return EmbeddingVector(values / np.linalg.norm(values), normalized=True)

    def embed_image(self, raster: np.ndarray) -> EmbeddingVector:
        return self._embed("image", raster)

    def embed_text(self, text: str) -> EmbeddingVector:
        return self._embed("text", text)


class StubInpainter:
    """Fills the masked region with a seeded pseudo-random texture; copies the rest."""

    def __init__(self, seed: int = 0):
        self.name = "stub-inpainter"
        self._seed = seed

    def inpaint(self, raster, mask, positive_prompt, negative_prompt, steps, seed) -> np.ndarray:
        out = raster.copy()
        region = mask > 0
        if not region.any():
            return out
        digest = content_digest("inpaint", self._seed, raster, mask, positive_prompt, negative_prompt, steps, seed)
        texture = _rng_from_digest(digest).integers(0, 256, size=raster.shape, dtype=np.int64).astype(raster.dtype)
        out[region] = texture[region]
        return out


_ADJECTIVES = (
    "striped", "glossy", "weathered", "compact", "angular", "faded",
    "vivid", "rounded", "textured", "slender", "bulky", "patterned",
)

_LABEL_IN_PROMPT = re.compile(r"characteristics of the (.+?)\.")
_LABEL_IN_TRANSCRIPT = re.compile(r"describe only the (.+?)\.")


class StubCaptioner:
    """Returns a deterministic templated description derived from content hashes."""

    def __init__(self, seed: int = 0):
        self.name = "stub-captioner"
        self._seed = seed

    def describe(self, raster, prompt: str) -> str:
        digest = content_digest("describe", self._seed, raster, prompt)
        match = _LABEL_IN_PROMPT.search(prompt)
        subject = match.group(1) if match else "object"
        adjective = _ADJECTIVES[int(digest[:8], 16) % len(_ADJECTIVES)]
        return f"a {adjective} {subject} seen against a plain background"


class StubWriter:
    """Deterministic instruction writer; echoes the transcript's final subject."""

    def __init__(self, seed: int = 0):
        self.name = "stub-writer"
        self._seed = seed

    def complete(self, chat_transcript) -> str:
        last_user = ""
        for role, text in chat_transcript:
            if role == "user":
                last_user = text
        match = _LABEL_IN_TRANSCRIPT.search(last_user)
        if match:
            subject = match.group(1)
            article = "an" if subject[:1].lower() in "aeiou" else "a"
            return f"add {article} {subject}"
        digest = content_digest("complete", self._seed, repr(chat_transcript))
        return f"add an object ({digest[:8]})"


class StubDenoiser:
    """Fixed affine map: 0.5 * latent plus condition-digest-derived offsets."""

    LATENT_COEFF = 0.5
    CONDITION_SCALE = 0.1

    def __init__(self, seed: int = 0):
        self.name = "stub-denoiser"
        self._seed = seed

    def _offset(self, tag: str, condition, shape) -> np.ndarray:
        digest = content_digest(tag, self._seed, condition, str(shape))
        return self.CONDITION_SCALE * _rng_from_digest(digest).standard_normal(shape)

    def score(self, latent, c_T=None, c_I=None) -> np.ndarray:
        z = np.asarray(latent.z_t, dtype=np.float64)
        return self.LATENT_COEFF * z + self._offset("cond-T", c_T, z.shape) + self._offset("cond-I", c_I, z.shape)


def make_stub_backends(seed: int = 0, embed_dim: int = DEFAULT_EMBED_DIM) -> BackendBundle:
    return BackendBundle(
        embedder=StubEmbedder(seed, embed_dim),
        inpainter=StubInpainter(seed),
        captioner=StubCaptioner(seed),
        writer=StubWriter(seed),
        denoiser=StubDenoiser(seed),
    )


# ---------------------------------------------------------------------------
# Remote service clients
# ---------------------------------------------------------------------------


@dataclass
class EndpointConfig:
    base_url: str
    token_env: str = ""
    timeout_s: float = 30.0
    retries: int = 3
    backoff_s: float = 0.5
    max_in_flight: int = 4
    embed_dim: int = DEFAULT_EMBED_DIM


class RequestsTransport:
    """Default HTTP transport; swap out for record/replay in tests."""

    def __init__(self):
        import requests

        self._session = requests.Session()
        self._requests = requests

    def post(self, url: str, body: dict, headers: dict, timeout: float):
        try:
            response = self._session.post(url, json=body, headers=headers, timeout=timeout)
        except self._requests.RequestException as exc:
            raise ConnectionError(str(exc)) from exc
        return response.status_code, response.json() if response.content else {}


class RecordingTransport:
    """Wraps a transport and records (request, response) exchanges for replay."""

    def __init__(self, inner):
        self.inner = inner
        self.records: list[dict] = []

    def post(self, url, body, headers, timeout):
        status, payload = self.inner.post(url, body, headers, timeout)
        self.records.append({"url": url, "body": body, "status": status, "response": payload})
        return status, payload


class ReplayTransport:
    """Serves previously recorded responses keyed by (url, body)."""

    def __init__(self, records: list[dict]):
        self._records = {content_digest(r["url"], canonical_body(r["body"])): r for r in records}

    def post(self, url, body, headers, timeout):
        key = content_digest(url, canonical_body(body))
        record = self._records.get(key)
        if record is None:
            raise ConnectionError(f"no recorded response for {url}")
        return record["status"], record["response"]


def canonical_body(body: dict) -> str:
    import json

    return json.dumps(body, sort_keys=True, separators=(",", ":"))


class _RemoteService:
    def __init__(self, service: str, cfg: EndpointConfig, transport):
        self.service = service
        self.cfg = cfg
        self.transport = transport or RequestsTransport()
        self._gate = threading.BoundedSemaphore(cfg.max_in_flight)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.cfg.token_env, "") if self.cfg.token_env else ""
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def call(self, route: str, body: dict) -> dict:
        url = self.cfg.base_url.rstrip("/") + route
        delay = self.cfg.backoff_s
        last_error = ""
        for attempt in range(self.cfg.retries + 1):
            try:
                with self._gate:
                    status, payload = self.transport.post(url, body, self._headers(), self.cfg.timeout_s)
            except (ConnectionError, TimeoutError) as exc:
                last_error = str(exc)
            else:
                if status == 200:
                    return payload
                if status < 500:
                    raise BackendProtocolError(self.service, f"HTTP {status} from {route}")
                last_error = f"HTTP {status}"
            if attempt < self.cfg.retries:
                time.sleep(delay)
                delay *= 2
        raise BackendUnavailableError(self.service, last_error)


def _png_b64(array: np.ndarray) -> str:
    return base64.b64encode(encode_png(array)).decode("ascii")


class RemoteEmbedder(_RemoteService):
    def __init__(self, cfg: EndpointConfig, transport=None):
        super().__init__("embedder", cfg, transport)
        self.name = f"remote-embedder@{cfg.base_url}"
        self.dimension = cfg.embed_dim

    def _validate(self, payload: dict) -> EmbeddingVector:
        values = payload.get("embedding")
        if not isinstance(values, list) or len(values) != self.dimension:
            got = len(values) if isinstance(values, list) else type(values).__name__
            raise BackendProtocolError(self.service, f"expected {self.dimension}-dim embedding, got {got}")
        vector = EmbeddingVector(np.asarray(values, dtype=np.float64))
        return vector.unit()

    def embed_image(self, raster: np.ndarray) -> EmbeddingVector:
        raster = raster if raster.dtype == np.uint8 else np.clip(np.rint(raster), 0, 255).astype(np.uint8)
        return self._validate(self.call("/embed/image", {"image_png_b64": _png_b64(raster)}))

    def embed_text(self, text: str) -> EmbeddingVector:
        return self._validate(self.call("/embed/text", {"text": text}))


class RemoteInpainter(_RemoteService):
    def __init__(self, cfg: EndpointConfig, transport=None):
        super().__init__("inpainter", cfg, transport)
        self.name = f"remote-inpainter@{cfg.base_url}"

    def inpaint(self, raster, mask, positive_prompt, negative_prompt, steps, seed) -> np.ndarray:
        payload = self.call(
            "/inpaint",
            {
                "image_png_b64": _png_b64(raster),
                "mask_png_b64": _png_b64(mask),
                "positive_prompt": positive_prompt,
                "negative_prompt": negative_prompt,
                "steps": steps,
                "seed": seed,
            },
        )
        data = payload.get("image_png_b64")
        if not isinstance(data, str):
            raise BackendProtocolError(self.service, "response lacks image_png_b64")
        out = decode_png(base64.b64decode(data))
        if out.shape != raster.shape:
            raise BackendProtocolError(self.service, f"output shape {out.shape} != input {raster.shape}")
        return out


class RemoteCaptioner(_RemoteService):
    def __init__(self, cfg: EndpointConfig, transport=None):
        super().__init__("captioner", cfg, transport)
        self.name = f"remote-captioner@{cfg.base_url}"

    def describe(self, raster, prompt: str) -> str:
        raster = raster if raster.dtype == np.uint8 else np.clip(np.rint(raster), 0, 255).astype(np.uint8)
        payload = self.call("/describe", {"image_png_b64": _png_b64(raster), "prompt": prompt})
        text = payload.get("text")
        if not isinstance(text, str) or not text:
            raise BackendProtocolError(self.service, "empty caption")
        return text


class RemoteWriter(_RemoteService):
    def __init__(self, cfg: EndpointConfig, transport=None):
        super().__init__("writer", cfg, transport)
        self.name = f"remote-writer@{cfg.base_url}"

    def complete(self, chat_transcript) -> str:
        body = {"transcript": [{"role": role, "content": text} for role, text in chat_transcript]}
        payload = self.call("/complete", body)
        text = payload.get("text")
        if not isinstance(text, str) or not text:
            raise BackendProtocolError(self.service, "empty completion")
        return text


class RemoteDenoiser(_RemoteService):
    """Client for the optional /score endpoint (an extension beyond the core five routes)."""

    def __init__(self, cfg: EndpointConfig, transport=None):
        super().__init__("denoiser", cfg, transport)
        self.name = f"remote-denoiser@{cfg.base_url}"

    def score(self, latent, c_T=None, c_I=None) -> np.ndarray:
        z = np.asarray(latent.z_t, dtype=np.float64)
        body = {
            "latent": z.tolist(),
            "timestep": latent.t,
            "c_text": None if c_T is None else np.asarray(c_T, dtype=np.float64).tolist(),
            "c_image": None if c_I is None else np.asarray(c_I, dtype=np.float64).tolist(),
        }
        payload = self.call("/score", body)
        score = np.asarray(payload.get("score"), dtype=np.float64)
        if score.shape != z.shape:
            raise BackendProtocolError(self.service, f"score shape {score.shape} != latent {z.shape}")
        return score


def make_remote_backends(cfg: EndpointConfig, transport=None) -> BackendBundle:
    return BackendBundle(
        embedder=RemoteEmbedder(cfg, transport),
        inpainter=RemoteInpainter(cfg, transport),
        captioner=RemoteCaptioner(cfg, transport),
        writer=RemoteWriter(cfg, transport),
        denoiser=RemoteDenoiser(cfg, transport),
    )
