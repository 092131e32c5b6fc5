"""Anonymized prompt assembly and few-shot exemplar selection.

A prompt bundle carries four ordered sections: a general company
description, retrieved news chunks, recent quarterly financials, and
the binary UP/DOWN question. Every alias of the target company is
replaced by a neutral placeholder so the model cannot answer from
memorized ticker history.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from datetime import date
from typing import Sequence

from .corpus.types import Company, Corpus
from .dates import month_year, parse_date
from .errors import (
    BudgetExceededError,
    ExemplarPoolError,
    MissingPriceError,
    UnbuildablePromptError,
)
from .labeling import Label, forward_return, momentum
from .matching import term_pattern
from .money import format_money
from .retrieval.summarize import Query, RankedChunk

DEFAULT_PLACEHOLDER = "COMPANYX"

SECTION_ORDER = ("general_info", "news", "financials", "question")

_QUESTION_TEMPLATE = (
    "Question: Is the price for {placeholder} going UP or DOWN, binary classify "
    "on [UP] or [DOWN]. [UP] if news and financials are predicting increase in "
    "price and bullish market, [DOWN] if news and financials are predicting "
    "decrease in price and bearish in next {months} months if [UP] percentage "
    "should be positive, if [DOWN], percentage should be negative."
)

_COUNT_WORDS = {1: "one", 2: "two", 3: "three", 4: "four"}

VERDICT_TOKENS = {1: "[UP]", 0: "[DOWN]"}


def estimate_tokens(text: str) -> int:
    """Cheap token estimate: ceil(len(text) / 4). Empty text is 0."""
    return math.ceil(len(text) / 4)


def render_question(horizon_months: int, placeholder: str = DEFAULT_PLACEHOLDER) -> str:
    """The classification question with the horizon substituted in."""
    if horizon_months < 1:
        raise ValueError("horizon_months must be at least 1")
    return _QUESTION_TEMPLATE.format(placeholder=placeholder, months=horizon_months)


def anonymize(text: str, company: Company, placeholder: str = DEFAULT_PLACEHOLDER) -> str:
    """Replace every whole-word alias or ticker of company with placeholder.

    Matching is case-insensitive; overlapping aliases resolve longest
    first. Raises ValueError when the placeholder itself matches one of
    the company's terms.
    """
    terms = company.match_terms()
    if not terms:
        return text
    pattern = term_pattern(terms, ignore_case=True)
    if pattern.search(placeholder):
        raise ValueError(
            f"placeholder {placeholder!r} collides with an alias of {company.ticker}"
        )
    return pattern.sub(placeholder, text)


@dataclass(frozen=True)
class PromptBundle:
    """One fully rendered prediction sample.

    `sections` is an in-memory build artifact (name, text) in
    SECTION_ORDER; it is not serialized. `exemplars` holds
    (prompt text, answer token) pairs once few-shot selection has run.
    """

    query: Query
    horizon_months: int
    rendered: str
    token_estimate: int
    placeholder: str
    label: Label | None
    sections: tuple[tuple[str, str], ...] = ()
    exemplars: tuple[tuple[str, str], ...] = ()

    @property
    def bundle_id(self) -> str:
        return f"{self.query.company_ticker}:{self.query.as_of.isoformat()}:h{self.horizon_months}"

    def with_exemplars(self, exemplars: Sequence[tuple[str, str]]) -> "PromptBundle":
        return replace(self, exemplars=tuple((p, a) for p, a in exemplars))

    def to_json_dict(self) -> dict:
        label = None
        if self.label is not None:
            label = {
                "value": self.label.value,
                "forward_return": self.label.forward_return,
                "base_date": self.label.base_date.isoformat(),
                "resolve_date": self.label.resolve_date.isoformat(),
            }
        return {
            "bundle_id": self.bundle_id,
            "query": {
                "company_ticker": self.query.company_ticker,
                "as_of": self.query.as_of.isoformat(),
                "text": self.query.text,
                "template_id": self.query.template_id,
            },
            "horizon": self.horizon_months,
            "rendered": self.rendered,
            "exemplars": [list(pair) for pair in self.exemplars],
            "label": label,
            "token_estimate": self.token_estimate,
            "placeholder": self.placeholder,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PromptBundle":
        query = Query(
            company_ticker=data["query"]["company_ticker"],
            as_of=parse_date(data["query"]["as_of"]),
            text=data["query"]["text"],
            template_id=data["query"].get("template_id", "invest_in"),
        )
        label = None
        if data.get("label") is not None:
            raw = data["label"]
            label = Label(
                value=int(raw["value"]),
                forward_return=float(raw["forward_return"]),
                base_date=parse_date(raw["base_date"]),
                resolve_date=parse_date(raw["resolve_date"]),
            )
        return cls(
            query=query,
            horizon_months=int(data["horizon"]),
            rendered=data["rendered"],
            token_estimate=int(data["token_estimate"]),
            placeholder=data["placeholder"],
            label=label,
            exemplars=tuple((p, a) for p, a in data.get("exemplars", [])),
        )


def _news_section(company: Company, retrieved: Sequence[RankedChunk]) -> str:
    header = f"Recent news about {company.name}:"
    if not retrieved:
        return f"{header}\nNo recent news retrieved."
    blocks = [
        f"Title: {item.article_title}\nSummary: {item.chunk.text}" for item in retrieved
    ]
    return header + "\n\n" + "\n\n".join(blocks)


def _quarter_line(quarter) -> str:
    return (
        f"Date: {month_year(quarter.quarter_end)}, "
        f"Total Revenue: {format_money(quarter.total_revenue)}, "
        f"Net Income: {format_money(quarter.net_income)}, "
        f"EPS: {quarter.eps:g}, "
        f"Free Cash Flow: {format_money(quarter.free_cash_flow)}, "
        f"Total Assets: {format_money(quarter.total_assets)}, "
        f"Close Price: {format_money(quarter.close_price)}"
    )


def _financials_section(
    corpus: Corpus,
    company: Company,
    as_of: date,
    quarters: int,
    include_momentum: bool,
) -> str:
    usable = [
        q for q in corpus.financials_for(company.ticker) if q.quarter_end < as_of
    ]
    if not usable:
        raise UnbuildablePromptError(
            f"no financial quarters before {as_of} for {company.ticker}"
        )
    recent = usable[-quarters:][::-1]  # newest first
    count_word = _COUNT_WORDS.get(len(recent), str(len(recent)))
    lines = [f"Last {count_word} quarters financial information for {company.name}:"]
    lines.extend(_quarter_line(q) for q in recent)
    if include_momentum:
        trail = momentum(corpus.prices_for(company.ticker), as_of)

        def show(value: float | None) -> str:
            return f"{value:+.2%}" if value is not None else "n/a"

        lines.append(
            f"Price Momentum: 6-month {show(trail.six_month)}, "
            f"12-month {show(trail.twelve_month)}"
        )
    return "\n".join(lines)


def build_prompt(
    corpus: Corpus,
    query: Query,
    horizon_months: int,
    retrieval_output: Sequence[RankedChunk],
    *,
    quarters: int = 4,
    placeholder: str = DEFAULT_PLACEHOLDER,
    include_momentum: bool = False,
) -> PromptBundle:
    """Assemble and anonymize one prompt bundle.

    Requires at least one financial quarter ending before query.as_of;
    otherwise raises UnbuildablePromptError. A bundle whose forward
    price cannot be resolved is returned unlabeled rather than dropped.
    """
    if quarters < 1:
        raise ValueError("quarters must be at least 1")
    company = corpus.company(query.company_ticker)
    for other in corpus.companies.values():
        terms = other.match_terms()
        if terms and term_pattern(terms, ignore_case=True).search(placeholder):
            raise ValueError(
                f"placeholder {placeholder!r} collides with an alias of {other.ticker}"
            )

    raw_sections = (
        ("general_info", f"General info on company and industry:\n{company.description}"),
        ("news", _news_section(company, retrieval_output)),
        (
            "financials",
            _financials_section(corpus, company, query.as_of, quarters, include_momentum),
        ),
        ("question", render_question(horizon_months, placeholder)),
    )
    sections = tuple(
        (name, anonymize(text, company, placeholder)) for name, text in raw_sections
    )
    rendered = "\n\n".join(text for _, text in sections)

    label: Label | None = None
    series = corpus.prices_for(query.company_ticker)
    if series:
        try:
            label = forward_return(series, query.as_of, horizon_months)
        except MissingPriceError:
            label = None

    return PromptBundle(
        query=query,
        horizon_months=horizon_months,
        rendered=rendered,
        token_estimate=estimate_tokens(rendered),
        placeholder=placeholder,
        label=label,
        sections=sections,
    )


def select_exemplars(
    pool: Sequence[PromptBundle],
    shots: int,
    target: PromptBundle,
    seed: int | str,
) -> list[PromptBundle]:
    """Pick a class-balanced, earlier-dated, cross-company exemplar set.

    Eligible pool members are labeled, dated strictly before the
    target, and belong to a different company. The result alternates
    DOWN, UP (, DOWN, UP) and is a deterministic function of (seed,
    target). Raises ExemplarPoolError naming the class that ran short.
    """
    if shots == 0:
        return []
    if shots not in (2, 4):
        raise ValueError("shots must be 0, 2, or 4")
    per_class = shots // 2

    eligible = [
        b
        for b in pool
        if b.label is not None
        and b.query.as_of < target.query.as_of
        and b.query.company_ticker != target.query.company_ticker
    ]
    downs = sorted(
        (b for b in eligible if b.label.value == 0), key=lambda b: b.bundle_id
    )
    ups = sorted((b for b in eligible if b.label.value == 1), key=lambda b: b.bundle_id)
    if len(downs) < per_class:
        raise ExemplarPoolError("DOWN", per_class, len(downs))
    if len(ups) < per_class:
        raise ExemplarPoolError("UP", per_class, len(ups))

    rng = random.Random(f"{seed}:{target.bundle_id}:exemplars")
    chosen_downs = rng.sample(downs, per_class)
    chosen_ups = rng.sample(ups, per_class)
    ordered: list[PromptBundle] = []
    for down, up in zip(chosen_downs, chosen_ups):
        ordered.extend((down, up))
    return ordered


def exemplar_pairs(exemplars: Sequence[PromptBundle]) -> tuple[tuple[str, str], ...]:
    """Convert exemplar bundles to (prompt text, answer token) pairs."""
    pairs = []
    for bundle in exemplars:
        if bundle.label is None:
            raise ValueError(f"exemplar {bundle.bundle_id} is unlabeled")
        pairs.append((bundle.rendered, VERDICT_TOKENS[bundle.label.value]))
    return tuple(pairs)


def assemble_final(
    target: PromptBundle,
    exemplars: Sequence[tuple[str, str]],
    context_limit: int,
) -> str:
    """Join answered exemplar blocks and the target prompt, budget-checked.

    Raises BudgetExceededError naming both the estimate and the limit
    when the assembled text does not fit context_limit.
    """
    if context_limit < 1:
        raise ValueError("context_limit must be at least 1")
    blocks = [f"{prompt}\nAnswer: {answer}" for prompt, answer in exemplars]
    blocks.append(target.rendered)
    final = "\n\n".join(blocks)
    estimate = estimate_tokens(final)
    if estimate > context_limit:
        raise BudgetExceededError(estimate=estimate, limit=context_limit)
    return final
