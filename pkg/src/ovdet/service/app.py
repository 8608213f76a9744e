"""FastAPI application exposing embedding, enrichment, retrieval and detection.

``/embed`` and ``/embed_image`` speak the wire format of the HTTP embedding
provider and region scorer clients, so a running service can back them.
"""
from __future__ import annotations

import io
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Request

from ..data import UnifiedRecord
from ..dictionary import ConceptDictionary, load_dictionary, provider_from_spec, retrieve_nearest
from ..errors import OvdetError
from ..model import load_checkpoint
from ..pseudo_label import scorer_from_spec
from ..training.evaluate import concept_list_input, predict
from .schemas import (
    DetectRequest,
    DetectResponse,
    EmbedRequest,
    EmbedResponse,
    EnrichRequest,
    EnrichResponse,
    RetrieveRequest,
    RetrieveResponse,
)


def create_app(dictionary=None, provider="stub", scorer="stub", checkpoint: Optional[str] = None) -> FastAPI:
    """Build the app. Arguments are objects or spec strings/paths."""
    if isinstance(dictionary, (str, bytes)) or hasattr(dictionary, "__fspath__"):
        dictionary = load_dictionary(dictionary)
    dictionary = dictionary if dictionary is not None else ConceptDictionary()
    provider = provider_from_spec(provider) if isinstance(provider, str) else provider
    scorer = scorer_from_spec(scorer) if isinstance(scorer, str) else scorer
    model = load_checkpoint(checkpoint).model if isinstance(checkpoint, str) else checkpoint

    app = FastAPI(title="ovdet")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "concepts": len(dictionary), "model": model is not None}

    @app.post("/embed", response_model=EmbedResponse)
    def embed(req: EmbedRequest) -> EmbedResponse:
        try:
            return EmbedResponse(vectors=[provider.embed(t).tolist() for t in req.texts])
        except OvdetError as exc:
            raise HTTPException(422, str(exc)) from exc

    @app.post("/embed_image", response_model=EmbedResponse)
    async def embed_image(request: Request) -> EmbedResponse:
        try:
            crop = np.load(io.BytesIO(await request.body()), allow_pickle=False)
        except ValueError as exc:
            raise HTTPException(400, f"body is not an npy array: {exc}") from exc
        if crop.ndim != 3:
            raise HTTPException(400, "expected an H x W x C array")
        return EmbedResponse(vectors=[scorer.embed_image_region(crop).tolist()])

    @app.post("/enrich", response_model=EnrichResponse)
    def enrich(req: EnrichRequest) -> EnrichResponse:
        pin = concept_list_input(req.names, dictionary, True, provider)
        return EnrichResponse(texts=list(pin.concepts))

    @app.post("/retrieve", response_model=RetrieveResponse)
    def retrieve(req: RetrieveRequest) -> RetrieveResponse:
        try:
            hit = retrieve_nearest(dictionary, req.name, provider)
        except OvdetError as exc:
            raise HTTPException(409, str(exc)) from exc
        return RetrieveResponse(name=hit.matched_name, definition=hit.definition, similarity=hit.similarity,
                                exact=hit.exact)

    @app.post("/detect", response_model=DetectResponse)
    def detect(req: DetectRequest) -> DetectResponse:
        if model is None:
            raise HTTPException(503, "no checkpoint loaded")
        image = np.asarray(req.image, dtype=np.float32)
        if image.ndim != 3 or image.shape[-1] != 3:
            raise HTTPException(400, "image must be H x W x 3")
        texts = concept_list_input(req.concepts, dictionary, req.enrich, provider).concepts
        try:
            dets = predict(model, [UnifiedRecord("request", image, [], "detection")], texts, req.concepts,
                           req.score_thresh)[0]
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from exc
        return DetectResponse(detections=[{"box": d.box.as_list(), "concept": d.concept, "score": d.score}
                                          for d in dets])

    return app
