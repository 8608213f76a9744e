"""Request and response bodies of the HTTP service."""
from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class EmbedRequest(BaseModel):
    texts: list[str]


class EmbedResponse(BaseModel):
    vectors: list[list[float]]


class EnrichRequest(BaseModel):
    names: list[str] = Field(min_length=1)


class EnrichResponse(BaseModel):
    texts: list[str]


class RetrieveRequest(BaseModel):
    name: str = Field(min_length=1)


class RetrieveResponse(BaseModel):
    name: str
    definition: Optional[str]
    similarity: float
    exact: bool


class DetectRequest(BaseModel):
    image: list[list[list[float]]]  # H x W x 3, values in [0, 1]
    concepts: list[str] = Field(min_length=1)
    enrich: bool = True
    score_thresh: float = 0.05


class DetectionOut(BaseModel):
    box: list[float]
    concept: str
    score: float


class DetectResponse(BaseModel):
    detections: list[DetectionOut]
