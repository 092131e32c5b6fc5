"""Dates, money parsing, term matching, and the four ingest loaders."""
from __future__ import annotations

import json
from datetime import date, datetime

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stockrag.corpus.ingest import (
    build_corpus,
    ingest_financials,
    ingest_news,
    ingest_prices,
    load_corpus,
    load_registry,
    tag_article,
)
from stockrag.corpus.types import article_id
from stockrag.dates import month_year, parse_date, parse_timestamp, shift_months
from stockrag.errors import IngestError
from stockrag.matching import contains_term, term_pattern
from stockrag.money import format_money, parse_money

from conftest import FIXTURES, make_company


class TestTimestamps:
    def test_iso(self):
        assert parse_timestamp("2022-05-10T08:30:00") == datetime(2022, 5, 10, 8, 30)

    def test_iso_z_suffix_normalized_to_naive_utc(self):
        assert parse_timestamp("2022-05-10T08:30:00Z") == datetime(2022, 5, 10, 8, 30)

    def test_iso_offset_converted_to_utc(self):
        assert parse_timestamp("2022-05-10T08:30:00+02:00") == datetime(2022, 5, 10, 6, 30)

    def test_prose_full_month(self):
        assert parse_timestamp("June 8, 2022 at 6:30 AM") == datetime(2022, 6, 8, 6, 30)

    def test_prose_abbreviated_month(self):
        assert parse_timestamp("Sep 20, 2022 at 4:20 PM") == datetime(2022, 9, 20, 16, 20)

    def test_garbage_rejected(self):
        with pytest.raises(ValueError):
            parse_timestamp("soonish")

    def test_parse_date(self):
        assert parse_date("2022-07-01") == date(2022, 7, 1)
        with pytest.raises(ValueError):
            parse_date("07/01/2022")


class TestShiftMonths:
    def test_plain_shift(self):
        assert shift_months(date(2022, 7, 1), 3) == date(2022, 10, 1)

    def test_clamps_to_short_month(self):
        assert shift_months(date(2022, 1, 31), 1) == date(2022, 2, 28)

    def test_clamps_to_leap_february(self):
        assert shift_months(date(2020, 1, 31), 1) == date(2020, 2, 29)

    def test_negative_shift(self):
        assert shift_months(date(2022, 3, 31), -1) == date(2022, 2, 28)

    def test_year_rollover(self):
        assert shift_months(date(2022, 10, 1), 6) == date(2023, 4, 1)

    @given(
        st.dates(min_value=date(1990, 1, 1), max_value=date(2090, 1, 1)),
        st.integers(min_value=-48, max_value=48),
    )
    def test_month_index_moves_exactly_and_day_never_grows(self, day, months):
        shifted = shift_months(day, months)
        base_index = day.year * 12 + day.month - 1
        assert shifted.year * 12 + shifted.month - 1 == base_index + months
        assert shifted.day <= day.day

    def test_month_year(self):
        assert month_year(date(2022, 6, 30)) == "June 2022"


class TestMoney:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("$121.23B", 121.23e9),
            ("-$2.03B", -2.03e9),
            ("$-6.76B", -6.76e9),
            ("$419.73B", 419.73e9),
            ("12K", 12_000.0),
            ("3.5T", 3.5e12),
            ("1,234.5", 1234.5),
            ("$106.21", 106.21),
            ("164.251", 164.251),
        ],
    )
    def test_parse_strings(self, raw, expected):
        assert parse_money(raw) == pytest.approx(expected)

    def test_parse_numbers_pass_through(self):
        assert parse_money(106.21) == 106.21
        assert parse_money(-5) == -5.0

    @pytest.mark.parametrize("bad", [True, False, None, "", "about 5", "$", "5X", []])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValueError):
            parse_money(bad)

    @pytest.mark.parametrize(
        "value,expected",
        [
            (121.23e9, "$121.23B"),
            (-2.03e9, "-$2.03B"),
            (-6.76e9, "-$6.76B"),
            (3.15e9, "$3.15B"),
            (106.21, "$106.21"),
            (0.0, "$0.00"),
            (999.99, "$999.99"),
            (1234.0, "$1.23K"),
            (2.5e12, "$2.50T"),
            (14.32e9, "$14.32B"),
        ],
    )
    def test_format(self, value, expected):
        assert format_money(value) == expected

    @given(st.floats(min_value=1.0, max_value=9e13))
    @settings(max_examples=150)
    def test_format_parse_roundtrip_within_rounding(self, value):
        recovered = parse_money(format_money(value))
        assert recovered == pytest.approx(value, rel=6e-3)


class TestMatching:
    def test_whole_word_only(self):
        assert contains_term("Amazon rallies", ("Amazon",))
        assert not contains_term("Amazonia rallies", ("Amazon",))
        assert not contains_term("AMZN2 model", ("AMZN",))

    def test_punctuation_is_a_boundary(self):
        assert contains_term("(AMZN -1.14%)", ("AMZN",))
        assert contains_term("Visa's network", ("Visa",))

    def test_longest_alias_wins(self):
        pattern = term_pattern(("Amazon", "Amazon.com"), ignore_case=True)
        assert pattern.search("shop at Amazon.com today").group(0) == "Amazon.com"

    def test_case_sensitivity_toggle(self):
        assert contains_term("visa fees", ("Visa",), ignore_case=True)
        assert not contains_term("visa fees", ("Visa",), ignore_case=False)

    def test_empty_terms(self):
        assert not contains_term("anything", ())


class TestArticleId:
    def test_stable_hex(self):
        a = article_id("Title", datetime(2022, 5, 10, 8, 30), "https://x/y")
        b = article_id("Title", datetime(2022, 5, 10, 8, 30), "https://x/y")
        assert a == b
        assert len(a) == 16
        assert int(a, 16) >= 0

    def test_distinct_inputs_distinct_ids(self):
        a = article_id("Title", datetime(2022, 5, 10), "https://x/y")
        b = article_id("Other", datetime(2022, 5, 10), "https://x/y")
        assert a != b


class TestRegistry:
    def test_fixture_registry(self):
        companies = load_registry(FIXTURES / "registry.json")
        assert set(companies) == {"AMZN", "V"}
        assert companies["AMZN"].name == "Amazon"
        assert "Amazon.com" in companies["AMZN"].aliases

    def test_name_inserted_into_aliases(self, tmp_path):
        path = tmp_path / "registry.json"
        path.write_text(
            json.dumps(
                [
                    {
                        "name": "Visa",
                        "ticker": "V",
                        "description": "payments",
                        "aliases": ["Visa Inc."],
                    }
                ]
            )
        )
        companies = load_registry(path)
        assert companies["V"].aliases == ("Visa", "Visa Inc.")
        assert set(companies["V"].match_terms()) == {"Visa", "Visa Inc.", "V"}

    @pytest.mark.parametrize(
        "payload",
        [
            "not json",
            json.dumps({"name": "x"}),
            json.dumps([{"ticker": "A", "description": "d"}]),
            json.dumps([{"name": "", "ticker": "A", "description": "d"}]),
            json.dumps(
                [
                    {"name": "A", "ticker": "T", "description": "d"},
                    {"name": "B", "ticker": "T", "description": "d"},
                ]
            ),
            json.dumps([]),
        ],
    )
    def test_defects_are_fatal(self, tmp_path, payload):
        path = tmp_path / "registry.json"
        path.write_text(payload)
        with pytest.raises(IngestError):
            load_registry(path)


class TestTagging:
    def setup_method(self):
        self.companies = {
            "AMZN": make_company(),
            "V": make_company(
                name="Visa", ticker="V", description="payments",
                aliases=("Visa", "Visa Inc.", "V"),
            ),
        }

    def test_long_alias_case_insensitive(self):
        assert tag_article("visa posts record volume", "", (), self.companies) == ("V",)

    def test_short_ticker_exact_case_only(self):
        assert tag_article("V shares jump", "", (), self.companies) == ("V",)
        assert tag_article("v shares jump", "", (), self.companies) == ()

    def test_keywords_participate(self):
        assert tag_article("Market wrap", "", ("Visa Inc.",), self.companies) == ("V",)

    def test_multiple_companies_sorted(self):
        tickers = tag_article("Amazon and Visa team up", "", (), self.companies)
        assert tickers == ("AMZN", "V")

    def test_substring_does_not_tag(self):
        assert tag_article("Avisa Partners expands", "", (), self.companies) == ()


class TestNewsIngest:
    def test_fixture_file_fully_valid(self):
        companies = load_registry(FIXTURES / "registry.json")
        articles, diagnostics = ingest_news(FIXTURES / "news.jsonl", companies)
        assert len(articles) == 12
        assert diagnostics == []

    def test_prose_dates_parsed(self):
        companies = load_registry(FIXTURES / "registry.json")
        articles, _ = ingest_news(FIXTURES / "news.jsonl", companies)
        by_title = {a.title: a for a in articles}
        aws = by_title["AWS Growth Keeps Amazon's Profit Engine Running"]
        assert aws.published_at == datetime(2022, 6, 8, 6, 30)
        delivery = by_title["Amazon Expands Same-Day Delivery Network"]
        assert delivery.published_at == datetime(2022, 9, 20, 16, 20)

    def test_cross_tagged_article(self):
        companies = load_registry(FIXTURES / "registry.json")
        articles, _ = ingest_news(FIXTURES / "news.jsonl", companies)
        dual = next(a for a in articles if a.title.startswith("Big Tech and Payments"))
        assert dual.tickers == ("AMZN", "V")

    def test_bad_lines_become_diagnostics(self, tmp_path):
        companies = {"AMZN": make_company()}
        ok = {
            "title": "Amazon rises",
            "description": "",
            "datetime": "2022-05-10T08:30:00",
            "keywords": [],
            "content": "Amazon gained.",
            "url": "https://x/1",
        }
        lines = [
            json.dumps(ok),
            "{ not json",
            json.dumps(["array"]),
            json.dumps({**ok, "title": ""}),
            json.dumps({**ok, "datetime": "whenever", "url": "https://x/2"}),
            json.dumps({**ok, "keywords": [3], "url": "https://x/3"}),
            "",
            json.dumps(ok),
        ]
        path = tmp_path / "news.jsonl"
        path.write_text("\n".join(lines))
        articles, diagnostics = ingest_news(path, companies)
        assert len(articles) == 1
        non_blank = sum(1 for line in lines if line.strip())
        assert len(articles) + len(diagnostics) == non_blank
        assert any("duplicate" in d.message for d in diagnostics)
        for diagnostic in diagnostics:
            assert str(path) == diagnostic.source
            assert diagnostic.line >= 1


class TestPriceIngest:
    def test_fixture_counts_and_order(self):
        prices, diagnostics = ingest_prices(FIXTURES / "prices.csv")
        assert diagnostics == []
        assert set(prices) == {"AMZN", "V"}
        assert len(prices["AMZN"]) == len(prices["V"]) == 605
        series = prices["AMZN"]
        assert all(series[i].date < series[i + 1].date for i in range(len(series) - 1))
        assert all(bar.close > 0 for bar in series)

    def test_header_is_mandatory(self, tmp_path):
        path = tmp_path / "prices.csv"
        path.write_text("symbol,day,price\nAMZN,2022-01-03,150\n")
        with pytest.raises(IngestError):
            ingest_prices(path)

    def test_bad_rows_and_duplicates(self, tmp_path):
        path = tmp_path / "prices.csv"
        path.write_text(
            "ticker,date,close\n"
            "AMZN,2022-01-03,150\n"
            "AMZN,2022-01-04,not-a-number\n"
            "AMZN,2022-01-05,-4\n"
            "AMZN,,101\n"
            "AMZN,2022-01-03,151\n"
        )
        prices, diagnostics = ingest_prices(path)
        assert len(prices["AMZN"]) == 1
        assert prices["AMZN"][0].close == 151.0
        assert len(diagnostics) == 4


class TestFinancialIngest:
    def test_fixture_values(self):
        financials, diagnostics = ingest_financials(FIXTURES / "financials.json")
        assert diagnostics == []
        assert len(financials["AMZN"]) == 4
        assert len(financials["V"]) == 4
        q2 = next(q for q in financials["AMZN"] if q.quarter_end == date(2022, 6, 30))
        assert q2.total_revenue == pytest.approx(121.23e9)
        assert q2.net_income == pytest.approx(-2.03e9)
        assert q2.eps == pytest.approx(-0.2)
        assert q2.free_cash_flow == pytest.approx(-6.76e9)
        assert q2.total_assets == pytest.approx(419.73e9)
        assert q2.close_price == pytest.approx(106.21)

    def test_bad_records_become_diagnostics(self, tmp_path):
        good = {
            "ticker": "AMZN",
            "quarter_end": "2022-06-30",
            "total_revenue": "$121.23B",
            "net_income": "-$2.03B",
            "eps": -0.2,
            "free_cash_flow": "-$6.76B",
            "total_assets": "$419.73B",
            "close_price": "$106.21",
        }
        records = [
            good,
            {**good, "total_revenue": "-$1B"},
            {**good, "close_price": 0},
            {**good, "eps": "soft"},
            {**good, "quarter_end": "Q2"},
            "not an object",
            {**good, "net_income": "$9.99B"},
        ]
        path = tmp_path / "financials.json"
        path.write_text(json.dumps(records))
        financials, diagnostics = ingest_financials(path)
        assert len(diagnostics) == 6
        assert any("duplicate" in d.message for d in diagnostics)
        assert len(financials["AMZN"]) == 1
        assert financials["AMZN"][0].net_income == pytest.approx(9.99e9)


class TestBuildCorpus:
    def test_unknown_ticker_series_dropped(self, tmp_path):
        companies = {"AMZN": make_company()}
        path = tmp_path / "prices.csv"
        path.write_text("ticker,date,close\nAMZN,2022-01-03,150\nMSFT,2022-01-03,310\n")
        prices, _ = ingest_prices(path)
        corpus, diagnostics = build_corpus(companies, [], prices, {})
        assert "MSFT" not in corpus.prices
        assert any("MSFT" in d.message for d in diagnostics)

    def test_load_corpus_fixture(self):
        corpus, diagnostics = load_corpus(
            FIXTURES / "registry.json",
            FIXTURES / "news.jsonl",
            FIXTURES / "prices.csv",
            FIXTURES / "financials.json",
        )
        assert diagnostics == []
        assert len(corpus.companies) == 2
        assert len(corpus.articles) == 12
        ordered = corpus.articles
        assert all(
            (ordered[i].published_at, ordered[i].id)
            <= (ordered[i + 1].published_at, ordered[i + 1].id)
            for i in range(len(ordered) - 1)
        )
        assert len(corpus.articles_for("AMZN")) == 7
        assert len(corpus.articles_for("V")) == 6
        assert len(corpus.prices_for("AMZN")) == 605
        assert len(corpus.financials_for("V")) == 4
        assert corpus.articles_for("ZZZ") == ()
