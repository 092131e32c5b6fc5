"""Experiment configuration and the four pipeline stages.

Stages communicate through files under out_dir (prompt bundles, then
prediction records, then reports), so each one can be run alone and a
combined run is byte-identical to running them in sequence. Every
random choice derives from config.seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from .corpus.ingest import load_corpus
from .corpus.types import Corpus, Diagnostic
from .errors import (
    BudgetExceededError,
    ConfigError,
    ExemplarPoolError,
    IngestError,
    PipelineError,
    UnbuildablePromptError,
)
from .evaluation import AggregateMetrics, aggregate, emit_report, run_metrics
from .inference import ModelConfig, PredictionRecord, predict_batch
from .prompting import (
    PromptBundle,
    assemble_final,
    build_prompt,
    estimate_tokens,
    exemplar_pairs,
    select_exemplars,
)
from .retrieval.embedding import (
    CachedEmbedder,
    EmbeddingCache,
    EmbeddingProvider,
    HashingEmbedder,
    RemoteEmbedder,
)
from .retrieval.summarize import QUERY_TEMPLATES, make_query, summarize_extractive

PROMPTS_FILENAME = "prompts.jsonl"
SKIPPED_FILENAME = "skipped.jsonl"
PREDICTIONS_FILENAME = "predictions.jsonl"
FAILURES_FILENAME = "prediction_failures.jsonl"
INGEST_SUMMARY_FILENAME = "ingest_summary.json"

EXIT_FATAL_INGEST = 2
EXIT_NO_BUNDLES = 3
EXIT_ALL_REQUESTS_FAILED = 4
EXIT_NOTHING_SCORABLE = 5


class EmbeddingSettings(BaseModel):
    provider: Literal["local", "remote"] = "local"
    model: str = "feature-hash-v1"
    dimension: int = Field(default=256, ge=1)
    endpoint: Optional[str] = None
    api_key_env: str = "STOCKRAG_API_KEY"
    cache_path: Optional[str] = None


class ModelSettings(BaseModel):
    provider: Literal["remote_chat", "scripted_mock"]
    model_name: str
    endpoint: Optional[str] = None
    temperature: float = 0.7
    context_limit: int = Field(default=8192, ge=1)
    max_retries: int = Field(default=3, ge=0)
    requests_per_minute: int = Field(default=60, ge=1)
    max_concurrency: int = Field(default=1, ge=1)
    script_path: Optional[str] = None
    api_key_env: str = "STOCKRAG_API_KEY"

    def to_model_config(self) -> ModelConfig:
        return ModelConfig(
            provider=self.provider,
            model_name=self.model_name,
            endpoint=self.endpoint,
            temperature=self.temperature,
            context_limit=self.context_limit,
            max_retries=self.max_retries,
            requests_per_minute=self.requests_per_minute,
            max_concurrency=self.max_concurrency,
            script_path=self.script_path,
            api_key_env=self.api_key_env,
        )


class DateSchedule(BaseModel):
    """Monthly as-of dates from start to end inclusive, same day of month."""

    start: date
    end: date

    @model_validator(mode="after")
    def _ordered(self) -> "DateSchedule":
        if self.end < self.start:
            raise ValueError("schedule end precedes start")
        return self


class ExperimentConfig(BaseModel):
    registry_path: str
    news_path: str
    prices_path: str
    financials_path: str
    companies: list[str]
    as_of_dates: Optional[list[date]] = None
    as_of_schedule: Optional[DateSchedule] = None
    horizons: list[int] = Field(default_factory=lambda: [3, 6])
    shots: list[int] = Field(default_factory=lambda: [0, 2, 4])
    models: list[ModelSettings]
    runs: int = Field(default=10, ge=1)
    k_chunks: int = Field(default=6, ge=1)
    window_months: int = Field(default=2, ge=1)
    quarters: int = Field(default=4, ge=1)
    seed: int = 0
    query_template: str = "invest_in"
    include_momentum: bool = False
    placeholder: str = "COMPANYX"
    embedding: EmbeddingSettings = Field(default_factory=EmbeddingSettings)
    out_dir: str = "out"

    @field_validator("companies")
    @classmethod
    def _companies_nonempty(cls, value: list[str]) -> list[str]:
        if not value:
            raise ValueError("companies must not be empty")
        return value

    @field_validator("horizons")
    @classmethod
    def _horizons_allowed(cls, value: list[int]) -> list[int]:
        if not value or not set(value) <= {3, 6}:
            raise ValueError("horizons must be a non-empty subset of {3, 6}")
        return value

    @field_validator("shots")
    @classmethod
    def _shots_allowed(cls, value: list[int]) -> list[int]:
        if not value or not set(value) <= {0, 2, 4}:
            raise ValueError("shots must be a non-empty subset of {0, 2, 4}")
        return value

    @field_validator("models")
    @classmethod
    def _models_nonempty(cls, value: list[ModelSettings]) -> list[ModelSettings]:
        if not value:
            raise ValueError("models must not be empty")
        return value

    @field_validator("query_template")
    @classmethod
    def _template_known(cls, value: str) -> str:
        if value not in QUERY_TEMPLATES:
            raise ValueError(f"unknown query template {value!r}")
        return value

    @model_validator(mode="after")
    def _one_date_source(self) -> "ExperimentConfig":
        if (self.as_of_dates is None) == (self.as_of_schedule is None):
            raise ValueError("provide exactly one of as_of_dates or as_of_schedule")
        if self.as_of_dates is not None and not self.as_of_dates:
            raise ValueError("as_of_dates must not be empty")
        return self

    def resolved_dates(self) -> list[date]:
        """The explicit as-of list, or the schedule expanded monthly."""
        if self.as_of_dates is not None:
            return list(self.as_of_dates)
        assert self.as_of_schedule is not None
        from .dates import shift_months

        out: list[date] = []
        current = self.as_of_schedule.start
        while current <= self.as_of_schedule.end:
            out.append(current)
            current = shift_months(self.as_of_schedule.start, len(out))
        return out

    def input_paths(self) -> dict[str, str]:
        return {
            "registry": self.registry_path,
            "news": self.news_path,
            "prices": self.prices_path,
            "financials": self.financials_path,
        }


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a JSON config file, resolving relative paths against its parent.

    Missing input files are a ConfigError here so a bad path fails at
    load rather than somewhere mid-pipeline. Secrets never live in the
    file; only the *_env names of environment variables do.
    """
    config_path = Path(path)
    try:
        raw = json.loads(config_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"config {path} failed validation: {exc}") from exc

    base = config_path.parent

    def resolve(value: str) -> str:
        return str((base / value).resolve()) if not Path(value).is_absolute() else value

    models = [
        m.model_copy(
            update={"script_path": resolve(m.script_path)} if m.script_path else {}
        )
        for m in config.models
    ]
    embedding = config.embedding
    if embedding.cache_path:
        embedding = embedding.model_copy(
            update={"cache_path": resolve(embedding.cache_path)}
        )
    config = config.model_copy(
        update={
            "registry_path": resolve(config.registry_path),
            "news_path": resolve(config.news_path),
            "prices_path": resolve(config.prices_path),
            "financials_path": resolve(config.financials_path),
            "out_dir": resolve(config.out_dir),
            "models": models,
            "embedding": embedding,
        }
    )
    missing = [p for p in config.input_paths().values() if not Path(p).exists()]
    if missing:
        raise ConfigError(f"missing input files: {', '.join(missing)}")
    return config


def make_embedder(settings: EmbeddingSettings) -> EmbeddingProvider:
    """Build the configured embedding provider, cache-wrapped if asked."""
    if settings.provider == "local":
        inner: EmbeddingProvider = HashingEmbedder(
            dimension=settings.dimension, model=settings.model
        )
    else:
        if not settings.endpoint:
            raise ConfigError("remote embedding provider requires an endpoint")
        inner = RemoteEmbedder(
            endpoint=settings.endpoint,
            model=settings.model,
            dimension=settings.dimension,
            api_key_env=settings.api_key_env,
        )
    if settings.cache_path:
        return CachedEmbedder(inner, EmbeddingCache(settings.cache_path))
    return inner


@dataclass
class IngestSummary:
    companies: int
    articles: int
    prices: int
    quarters: int
    diagnostics: list[str]


@dataclass
class BuildSummary:
    built: int
    unbuildable: list[dict]
    unlabeled: list[dict]
    prompts_path: str
    skipped_path: str


@dataclass
class PredictSummary:
    dry_run: bool
    records: int
    failures: int
    combos: list[dict]
    predictions_path: str | None
    failures_path: str | None


@dataclass
class EvaluateSummary:
    rows: int
    report_paths: dict[str, str]


@dataclass
class RunSummary:
    ingest: IngestSummary
    build: BuildSummary
    predict: PredictSummary
    evaluate: EvaluateSummary | None


def _require_inputs(config: ExperimentConfig) -> None:
    for name, path in config.input_paths().items():
        if not Path(path).exists():
            raise PipelineError(
                EXIT_FATAL_INGEST, f"missing {name} input file: {path}"
            )


def _load(config: ExperimentConfig) -> tuple[Corpus, list[Diagnostic]]:
    _require_inputs(config)
    try:
        return load_corpus(
            config.registry_path,
            config.news_path,
            config.prices_path,
            config.financials_path,
        )
    except IngestError as exc:
        raise PipelineError(EXIT_FATAL_INGEST, str(exc)) from exc


def stage_ingest(config: ExperimentConfig) -> IngestSummary:
    """Load and validate the corpus; write a summary with diagnostics."""
    corpus, diagnostics = _load(config)
    summary = IngestSummary(
        companies=len(corpus.companies),
        articles=len(corpus.articles),
        prices=sum(len(series) for series in corpus.prices.values()),
        quarters=sum(len(series) for series in corpus.financials.values()),
        diagnostics=[str(d) for d in diagnostics],
    )
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / INGEST_SUMMARY_FILENAME).write_text(
        json.dumps(summary.__dict__, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return summary


def stage_build_prompts(config: ExperimentConfig) -> BuildSummary:
    """Build one bundle per (company, as-of date, horizon).

    Combinations that cannot produce a prompt are listed with reasons;
    bundles whose forward price is unresolvable stay in the output but
    are flagged unlabeled. Exits with code 3 when nothing is buildable.
    """
    corpus, _ = _load(config)
    for ticker in config.companies:
        if ticker not in corpus.companies:
            raise PipelineError(
                EXIT_FATAL_INGEST, f"company {ticker} is not in the registry"
            )
    provider = make_embedder(config.embedding)

    bundles: list[PromptBundle] = []
    unbuildable: list[dict] = []
    unlabeled: list[dict] = []
    for ticker in config.companies:
        company = corpus.company(ticker)
        for as_of in config.resolved_dates():
            query = make_query(company, as_of, config.query_template)
            retrieved = summarize_extractive(
                corpus,
                query,
                provider,
                k=config.k_chunks,
                window_months=config.window_months,
            )
            for horizon in config.horizons:
                try:
                    bundle = build_prompt(
                        corpus,
                        query,
                        horizon,
                        retrieved,
                        quarters=config.quarters,
                        placeholder=config.placeholder,
                        include_momentum=config.include_momentum,
                    )
                except UnbuildablePromptError as exc:
                    unbuildable.append(
                        {
                            "company": ticker,
                            "as_of": as_of.isoformat(),
                            "horizon": horizon,
                            "kind": "unbuildable",
                            "reason": str(exc),
                        }
                    )
                    continue
                bundles.append(bundle)
                if bundle.label is None:
                    unlabeled.append(
                        {
                            "company": ticker,
                            "as_of": as_of.isoformat(),
                            "horizon": horizon,
                            "kind": "unlabeled",
                            "reason": "no resolvable forward price",
                        }
                    )
    if not bundles:
        raise PipelineError(EXIT_NO_BUNDLES, "no buildable prompt bundles")

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prompts_path = out / PROMPTS_FILENAME
    with prompts_path.open("w", encoding="utf-8") as handle:
        for bundle in bundles:
            handle.write(json.dumps(bundle.to_json_dict(), sort_keys=True) + "\n")
    skipped_path = out / SKIPPED_FILENAME
    with skipped_path.open("w", encoding="utf-8") as handle:
        for entry in (*unbuildable, *unlabeled):
            handle.write(json.dumps(entry, sort_keys=True) + "\n")
    return BuildSummary(
        built=len(bundles),
        unbuildable=unbuildable,
        unlabeled=unlabeled,
        prompts_path=str(prompts_path),
        skipped_path=str(skipped_path),
    )


def _read_bundles(config: ExperimentConfig) -> list[PromptBundle]:
    path = Path(config.out_dir) / PROMPTS_FILENAME
    if not path.exists():
        raise PipelineError(
            EXIT_FATAL_INGEST, f"missing prompt bundles (run build-prompts first): {path}"
        )
    bundles = []
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                bundles.append(PromptBundle.from_json_dict(json.loads(line)))
    return bundles


def _attach_exemplars(
    targets: list[PromptBundle],
    pool: list[PromptBundle],
    shots: int,
    seed: int,
) -> tuple[list[PromptBundle], list[dict]]:
    prepared: list[PromptBundle] = []
    skipped: list[dict] = []
    for target in targets:
        if shots == 0:
            prepared.append(target.with_exemplars(()))
            continue
        try:
            chosen = select_exemplars(pool, shots, target, seed)
        except ExemplarPoolError as exc:
            skipped.append({"bundle_id": target.bundle_id, "reason": str(exc)})
            continue
        prepared.append(target.with_exemplars(exemplar_pairs(chosen)))
    return prepared, skipped


def stage_predict(config: ExperimentConfig, *, dry_run: bool = False) -> PredictSummary:
    """Predict every labeled bundle for each model and shot setting.

    With dry_run, assembles everything and reports token totals without
    constructing a client. Exits 4 when some model produced nothing but
    transport failures.
    """
    bundles = _read_bundles(config)
    labeled = [b for b in bundles if b.label is not None]
    if not labeled:
        raise PipelineError(EXIT_NO_BUNDLES, "no labeled prompt bundles to predict")

    all_records: list[PredictionRecord] = []
    all_failures: list[dict] = []
    combos: list[dict] = []
    for model_settings in config.models:
        model_config = model_settings.to_model_config()
        model_records = 0
        model_transport_failures = 0
        for shots in config.shots:
            prepared, exemplar_skips = _attach_exemplars(
                labeled, labeled, shots, config.seed
            )
            if dry_run:
                total_tokens = 0
                over_budget = 0
                for bundle in prepared:
                    try:
                        final = assemble_final(
                            bundle, bundle.exemplars, model_config.context_limit
                        )
                        total_tokens += estimate_tokens(final)
                    except BudgetExceededError:
                        over_budget += 1
                sendable = len(prepared) - over_budget
                combos.append(
                    {
                        "model": model_config.model_name,
                        "shots": shots,
                        "bundles": len(prepared),
                        "exemplar_skipped": len(exemplar_skips),
                        "over_budget": over_budget,
                        "total_tokens": total_tokens,
                        "est_requests": sendable * config.runs,
                    }
                )
                continue
            batch = predict_batch(
                model_config,
                prepared,
                config.runs,
                seed=f"{config.seed}:{model_config.model_name}:{shots}",
                shots=shots,
            )
            all_records.extend(batch.records)
            all_failures.extend(f.to_json_dict() for f in batch.failures)
            model_records += len(batch.records)
            model_transport_failures += sum(
                1 for f in batch.failures if f.kind == "transport"
            )
            invalid = sum(1 for r in batch.records if r.invalid)
            combos.append(
                {
                    "model": model_config.model_name,
                    "shots": shots,
                    "bundles": len(prepared),
                    "exemplar_skipped": len(exemplar_skips),
                    "records": len(batch.records),
                    "failures": len(batch.failures),
                    "invalid_rate": round(invalid / len(batch.records), 4)
                    if batch.records
                    else None,
                }
            )
        if not dry_run and model_records == 0 and model_transport_failures > 0:
            raise PipelineError(
                EXIT_ALL_REQUESTS_FAILED,
                f"every request failed for model {model_config.model_name}",
            )

    if dry_run:
        return PredictSummary(
            dry_run=True,
            records=0,
            failures=0,
            combos=combos,
            predictions_path=None,
            failures_path=None,
        )

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    predictions_path = out / PREDICTIONS_FILENAME
    with predictions_path.open("w", encoding="utf-8") as handle:
        for record in all_records:
            handle.write(json.dumps(record.to_json_dict(), sort_keys=True) + "\n")
    failures_path = out / FAILURES_FILENAME
    with failures_path.open("w", encoding="utf-8") as handle:
        for failure in all_failures:
            handle.write(json.dumps(failure, sort_keys=True) + "\n")
    return PredictSummary(
        dry_run=False,
        records=len(all_records),
        failures=len(all_failures),
        combos=combos,
        predictions_path=str(predictions_path),
        failures_path=str(failures_path),
    )


def _read_records(config: ExperimentConfig) -> list[PredictionRecord]:
    path = Path(config.out_dir) / PREDICTIONS_FILENAME
    if not path.exists():
        raise PipelineError(
            EXIT_FATAL_INGEST, f"missing predictions (run predict first): {path}"
        )
    records = []
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                records.append(PredictionRecord.from_json_dict(json.loads(line)))
    return records


def stage_evaluate(config: ExperimentConfig) -> EvaluateSummary:
    """Score prediction records and emit the three report formats."""
    records = _read_records(config)
    if not records:
        raise PipelineError(EXIT_NOTHING_SCORABLE, "no scorable prediction records")

    grouped: dict[tuple[str, int, int], dict[int, list[PredictionRecord]]] = {}
    for record in records:
        key = (record.model_name, record.shots, record.horizon_months)
        grouped.setdefault(key, {}).setdefault(record.run_index, []).append(record)

    aggregates: dict[tuple[str, int, int], AggregateMetrics] = {}
    for key, runs in grouped.items():
        per_run = [run_metrics(runs[index]) for index in sorted(runs)]
        aggregates[key] = aggregate(per_run)

    out = Path(config.out_dir)
    report_paths = {
        "markdown": str(emit_report(aggregates, "markdown", out / "report.md")),
        "csv": str(emit_report(aggregates, "csv", out / "report.csv")),
        "json": str(emit_report(aggregates, "json", out / "report.json")),
    }
    return EvaluateSummary(
        rows=len({(k[0], k[1]) for k in aggregates}), report_paths=report_paths
    )


def run_pipeline(config: ExperimentConfig, *, dry_run: bool = False) -> RunSummary:
    """Ingest, build, predict, evaluate — the same code path as the
    individual stages, executed back to back."""
    ingest = stage_ingest(config)
    build = stage_build_prompts(config)
    predict = stage_predict(config, dry_run=dry_run)
    evaluate = None if dry_run else stage_evaluate(config)
    return RunSummary(ingest=ingest, build=build, predict=predict, evaluate=evaluate)
