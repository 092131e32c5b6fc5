"""Request and response models for the HTTP service."""
from __future__ import annotations

from datetime import date
from typing import Optional

from pydantic import BaseModel, Field, model_validator

from ..experiment import ExperimentConfig


class StageRequest(BaseModel):
    """Common payload for stage endpoints.

    Exactly one of config_path (a JSON file on the server's filesystem)
    or config (the same document inline) must be provided; inline paths
    are taken as-is, so they should be absolute. Overrides replace the
    corresponding config fields.
    """

    config_path: Optional[str] = None
    config: Optional[ExperimentConfig] = None
    out_dir: Optional[str] = None
    seed: Optional[int] = None
    runs: Optional[int] = Field(default=None, ge=1)
    dry_run: bool = False

    @model_validator(mode="after")
    def _exactly_one_config(self) -> "StageRequest":
        if (self.config_path is None) == (self.config is None):
            raise ValueError("provide exactly one of config_path or config")
        return self


class IngestResponse(BaseModel):
    companies: int
    articles: int
    prices: int
    quarters: int
    diagnostics: list[str]


class SkippedSample(BaseModel):
    company: str
    as_of: str
    horizon: int
    kind: str
    reason: str


class BuildResponse(BaseModel):
    built: int
    unbuildable: list[SkippedSample]
    unlabeled: list[SkippedSample]
    prompts_path: str
    skipped_path: str


class ComboSummary(BaseModel):
    model: str
    shots: int
    bundles: int
    exemplar_skipped: int
    records: Optional[int] = None
    failures: Optional[int] = None
    invalid_rate: Optional[float] = None
    over_budget: Optional[int] = None
    total_tokens: Optional[int] = None
    est_requests: Optional[int] = None


class PredictResponse(BaseModel):
    dry_run: bool
    records: int
    failures: int
    combos: list[ComboSummary]
    predictions_path: Optional[str] = None
    failures_path: Optional[str] = None


class EvaluateResponse(BaseModel):
    rows: int
    report_paths: dict[str, str]


class RunResponse(BaseModel):
    ingest: IngestResponse
    build: BuildResponse
    predict: PredictResponse
    evaluate: Optional[EvaluateResponse] = None


class RetrieveRequest(StageRequest):
    """Ad-hoc retrieval: the k most query-similar chunks for one company."""

    ticker: str
    as_of: date
    k: Optional[int] = Field(default=None, ge=1)


class RetrievedChunk(BaseModel):
    article_id: str
    ordinal: int
    article_title: str
    text: str
    similarity: float


class RetrieveResponse(BaseModel):
    query_text: str
    chunks: list[RetrievedChunk]


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str
