"""FastAPI service wrapping the pipeline stages.

Pipeline failures surface as HTTP 400 with a body of
{"detail": {"message": ..., "exit_code": ...}} so thin clients can
reproduce the stage's process exit code.
"""
from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ConfigError, PipelineError, StockragError
from ..experiment import (
    EXIT_FATAL_INGEST,
    ExperimentConfig,
    load_config,
    make_embedder,
    run_pipeline,
    stage_build_prompts,
    stage_evaluate,
    stage_ingest,
    stage_predict,
)
from ..retrieval.summarize import make_query, summarize_extractive
from .schemas import (
    BuildResponse,
    ComboSummary,
    EvaluateResponse,
    HealthResponse,
    IngestResponse,
    PredictResponse,
    RetrieveRequest,
    RetrieveResponse,
    RetrievedChunk,
    RunResponse,
    SkippedSample,
    StageRequest,
)


def _resolve_config(payload: StageRequest) -> ExperimentConfig:
    if payload.config_path is not None:
        config = load_config(payload.config_path)
    else:
        assert payload.config is not None
        config = payload.config
    overrides: dict = {}
    if payload.out_dir is not None:
        overrides["out_dir"] = payload.out_dir
    if payload.seed is not None:
        overrides["seed"] = payload.seed
    if payload.runs is not None:
        overrides["runs"] = payload.runs
    return config.model_copy(update=overrides) if overrides else config


def _build_response(summary) -> BuildResponse:
    return BuildResponse(
        built=summary.built,
        unbuildable=[SkippedSample(**entry) for entry in summary.unbuildable],
        unlabeled=[SkippedSample(**entry) for entry in summary.unlabeled],
        prompts_path=summary.prompts_path,
        skipped_path=summary.skipped_path,
    )


def _predict_response(summary) -> PredictResponse:
    return PredictResponse(
        dry_run=summary.dry_run,
        records=summary.records,
        failures=summary.failures,
        combos=[ComboSummary(**combo) for combo in summary.combos],
        predictions_path=summary.predictions_path,
        failures_path=summary.failures_path,
    )


def create_app() -> FastAPI:
    app = FastAPI(
        title="stockrag",
        version=__version__,
        description=(
            "Retrieval-augmented stock movement prediction: anonymized "
            "news+financials prompts for chat models, scored with an "
            "imbalance-aware metric suite."
        ),
    )

    @app.exception_handler(PipelineError)
    async def pipeline_error(_: Request, exc: PipelineError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"detail": {"message": str(exc), "exit_code": exc.exit_code}},
        )

    @app.exception_handler(ConfigError)
    async def config_error(_: Request, exc: ConfigError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"detail": {"message": str(exc), "exit_code": EXIT_FATAL_INGEST}},
        )

    @app.get("/health", response_model=HealthResponse)
    async def health() -> HealthResponse:
        return HealthResponse(version=__version__)

    @app.post("/ingest", response_model=IngestResponse)
    def ingest(payload: StageRequest) -> IngestResponse:
        summary = stage_ingest(_resolve_config(payload))
        return IngestResponse(**summary.__dict__)

    @app.post("/build-prompts", response_model=BuildResponse)
    def build_prompts(payload: StageRequest) -> BuildResponse:
        return _build_response(stage_build_prompts(_resolve_config(payload)))

    @app.post("/predict", response_model=PredictResponse)
    def predict(payload: StageRequest) -> PredictResponse:
        config = _resolve_config(payload)
        return _predict_response(stage_predict(config, dry_run=payload.dry_run))

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(payload: StageRequest) -> EvaluateResponse:
        summary = stage_evaluate(_resolve_config(payload))
        return EvaluateResponse(rows=summary.rows, report_paths=summary.report_paths)

    @app.post("/run", response_model=RunResponse)
    def run(payload: StageRequest) -> RunResponse:
        config = _resolve_config(payload)
        summary = run_pipeline(config, dry_run=payload.dry_run)
        return RunResponse(
            ingest=IngestResponse(**summary.ingest.__dict__),
            build=_build_response(summary.build),
            predict=_predict_response(summary.predict),
            evaluate=EvaluateResponse(
                rows=summary.evaluate.rows,
                report_paths=summary.evaluate.report_paths,
            )
            if summary.evaluate is not None
            else None,
        )

    @app.post("/retrieve", response_model=RetrieveResponse)
    def retrieve(payload: RetrieveRequest) -> RetrieveResponse:
        config = _resolve_config(payload)
        from ..experiment import _load  # shared corpus loading with exit-code mapping

        corpus, _diags = _load(config)
        if payload.ticker not in corpus.companies:
            raise PipelineError(
                EXIT_FATAL_INGEST, f"company {payload.ticker} is not in the registry"
            )
        query = make_query(
            corpus.company(payload.ticker), payload.as_of, config.query_template
        )
        ranked = summarize_extractive(
            corpus,
            query,
            make_embedder(config.embedding),
            k=payload.k or config.k_chunks,
            window_months=config.window_months,
        )
        return RetrieveResponse(
            query_text=query.text,
            chunks=[
                RetrievedChunk(
                    article_id=item.chunk.article_id,
                    ordinal=item.chunk.ordinal,
                    article_title=item.article_title,
                    text=item.chunk.text,
                    similarity=item.similarity,
                )
                for item in ranked
            ],
        )

    return app
