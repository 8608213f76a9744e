"""Region scorers: a region-image encoder paired with a text encoder.

Both sides return unit vectors so their dot product is a cosine score.
"""
from __future__ import annotations

import hashlib
import io
import json
import re
from typing import Protocol, runtime_checkable

import httpx
import numpy as np
import torch
import torch.nn.functional as F

from ..dictionary.providers import HashingProvider
from ..errors import ProviderError

_PROMPT = re.compile(r"^a photo of an? (.+)\.$")


def category_of(prompt: str) -> str:
    m = _PROMPT.match(prompt.strip())
    return m.group(1) if m else prompt.strip()


def unit(vec, what: str = "vector") -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64).ravel()
    norm = np.linalg.norm(vec)
    if not np.isfinite(norm) or norm == 0.0:
        raise ProviderError(f"cannot normalize {what}")
    return vec / norm


def foreground_color(crop: np.ndarray, threshold: float = 0.3) -> np.ndarray:
    pixels = np.asarray(crop, dtype=np.float64).reshape(-1, crop.shape[-1])
    fg = pixels[pixels.max(axis=1) > threshold]
    return (fg if len(fg) else pixels).mean(axis=0)


def region_descriptor(crop: np.ndarray, threshold: float = 0.3) -> np.ndarray:
    """[r, g, b, fill, hole] of the foreground blob in a crop.

    ``fill`` is foreground share of the blob's bounding box; ``hole`` is the
    background share of the box's central ninth.
    """
    crop = np.asarray(crop, dtype=np.float64)
    fg = crop.max(axis=-1) > threshold
    ys, xs = np.nonzero(fg)
    if len(xs) == 0:
        return np.concatenate([crop.reshape(-1, crop.shape[-1]).mean(axis=0), [0.0, 1.0]])
    y1, y2, x1, x2 = ys.min(), ys.max() + 1, xs.min(), xs.max() + 1
    box = fg[y1:y2, x1:x2]
    h, w = box.shape
    center = box[h // 3: max(h // 3 + 1, 2 * h // 3), w // 3: max(w // 3 + 1, 2 * w // 3)]
    return np.concatenate([crop[fg].mean(axis=0), [box.mean(), 1.0 - center.mean()]])


@runtime_checkable
class RegionScorer(Protocol):
    scorer_id: str

    def embed_image_region(self, crop: np.ndarray) -> np.ndarray: ...

    def embed_text(self, prompt: str) -> np.ndarray: ...


class StubScorer:
    """Hash-based stand-in: text by character trigrams, regions by quantized color."""

    def __init__(self, dim: int = 64):
        self.dim = dim
        self._text = HashingProvider(dim)
        self.scorer_id = f"stub-{dim}"

    def embed_text(self, prompt: str) -> np.ndarray:
        return self._text.embed(prompt)

    def embed_image_region(self, crop: np.ndarray) -> np.ndarray:
        q = tuple(int(v) for v in np.clip(np.round(foreground_color(crop) * 3), 0, 3))
        rng = np.random.default_rng(q[0] * 16 + q[1] * 4 + q[2])
        return unit(rng.normal(size=self.dim))


class TableScorer:
    """Fixture scorer backed by a JSON Lines table.

    Rows ``{"name": concept, "vector": [...]}`` give text vectors (looked up by
    the category inside the prompt). Rows ``{"rgb": [r, g, b], "vector": [...]}``
    are region prototypes: a crop takes the vector of the prototype nearest to
    its mean foreground color. Rows with ``"descriptor": [r, g, b, fill, hole]``
    are matched on the full ``region_descriptor`` instead.
    """

    def __init__(self, texts: dict[str, np.ndarray], prototypes: list[tuple[np.ndarray, np.ndarray]], scorer_id="table"):
        self.texts = {k.strip().lower(): unit(v, k) for k, v in texts.items()}
        self.prototypes = [(np.asarray(c, dtype=np.float64), unit(v)) for c, v in prototypes]
        self.scorer_id = scorer_id

    @classmethod
    def from_file(cls, path) -> "TableScorer":
        texts, protos = {}, []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                row = json.loads(line)
                if "name" in row:
                    texts[row["name"]] = row["vector"]
                elif "rgb" in row:
                    protos.append((row["rgb"], row["vector"]))
                elif "descriptor" in row:
                    protos.append((row["descriptor"], row["vector"]))
                else:
                    raise ProviderError(f"{path}:{lineno}: row needs 'name', 'rgb' or 'descriptor'")
        digest = hashlib.sha256(open(path, "rb").read()).hexdigest()[:12]
        return cls(texts, protos, scorer_id=f"table-{digest}")

    def embed_text(self, prompt: str) -> np.ndarray:
        key = category_of(prompt).lower()
        if key not in self.texts:
            raise ProviderError(f"no text vector for {key!r}")
        return self.texts[key].copy()

    def embed_image_region(self, crop: np.ndarray) -> np.ndarray:
        if not self.prototypes:
            raise ProviderError("table has no region prototypes")
        desc = region_descriptor(crop)
        dists = [float(np.sum((desc[:len(c)] - c) ** 2)) for c, _ in self.prototypes]
        return self.prototypes[int(np.argmin(dists))][1].copy()


class HttpScorer:
    """Remote scorer: ``POST {base}/embed`` with ``{"texts": [...]}`` and
    ``POST {base}/embed_image`` with an ``.npy`` body; both answer ``{"vectors": [...]}``."""

    def __init__(self, base_url: str, timeout: float = 30.0, client: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._client = client or httpx.Client(timeout=timeout)
        self.scorer_id = f"http-{self.base_url}"

    def _post(self, path: str, **kwargs) -> list:
        try:
            resp = self._client.post(self.base_url + path, timeout=self.timeout, **kwargs)
        except httpx.HTTPError as exc:
            raise ProviderError(f"request to {self.base_url}{path} failed: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderError(f"{self.base_url}{path} returned HTTP {resp.status_code}")
        try:
            return resp.json()["vectors"]
        except (ValueError, KeyError) as exc:
            raise ProviderError(f"malformed response from {path}") from exc

    def embed_text(self, prompt: str) -> np.ndarray:
        return unit(self._post("/embed", json={"texts": [prompt]})[0], prompt)

    def embed_image_region(self, crop: np.ndarray) -> np.ndarray:
        buf = io.BytesIO()
        np.save(buf, np.asarray(crop, dtype=np.float32))
        vectors = self._post("/embed_image", content=buf.getvalue(),
                             headers={"content-type": "application/octet-stream"})
        return unit(vectors[0], "region")


class ModelScorer:
    """Uses a trained detector: the most central region's feature and the concept's text embedding."""

    def __init__(self, model, input_size: int = 64, scorer_id: str = "model"):
        self.model = model.eval()
        self.input_size = input_size
        self.scorer_id = scorer_id

    @torch.no_grad()
    def embed_text(self, prompt: str) -> np.ndarray:
        return unit(self.model.encode_texts([category_of(prompt)])[0].numpy(), prompt)

    @torch.no_grad()
    def embed_image_region(self, crop: np.ndarray) -> np.ndarray:
        x = torch.from_numpy(np.asarray(crop, dtype=np.float32)).permute(2, 0, 1)[None]
        x = F.interpolate(x, size=(self.input_size, self.input_size), mode="bilinear", align_corners=False)
        out = self.model.encode_images(x)
        best = int(out.centerness_logits[0].argmax())
        return unit(out.region_features[0, best].numpy(), "region")


def scorer_from_spec(spec: str, dim: int = 64) -> RegionScorer:
    """``stub`` | ``file:PATH`` | ``http:URL`` | ``model:CHECKPOINT``"""
    if spec == "stub":
        return StubScorer(dim)
    if spec.startswith("file:"):
        return TableScorer.from_file(spec[len("file:"):])
    if spec.startswith("http:"):
        url = spec[len("http:"):]
        return HttpScorer(url if "://" in url else "http:" + url)
    if spec.startswith("model:"):
        from ..model import load_checkpoint

        path = spec[len("model:"):]
        return ModelScorer(load_checkpoint(path).model, scorer_id=f"model-{path}")
    raise ValueError(f"unknown scorer {spec!r}")
