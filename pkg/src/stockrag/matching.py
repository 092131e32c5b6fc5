"""Whole-word term matching shared by article tagging and anonymization.

Word boundaries are non-alphanumeric characters, so 'MAI' never matches
the ticker 'MA' but 'Visa vs. Mastercard' matches both names.
"""
from __future__ import annotations

import functools
import re

_LEFT = r"(?<![0-9A-Za-z])"
_RIGHT = r"(?![0-9A-Za-z])"


@functools.lru_cache(maxsize=1024)
def term_pattern(terms: tuple[str, ...], ignore_case: bool = True) -> re.Pattern[str]:
    """Compile a whole-word alternation over terms, longest first.

    Longest-first ordering makes overlapping aliases ('Amazon.com Inc.'
    vs 'Amazon') prefer the longer match.
    """
    if not terms:
        raise ValueError("term_pattern requires at least one term")
    ordered = sorted(set(terms), key=lambda t: (-len(t), t))
    body = "|".join(re.escape(term) for term in ordered)
    flags = re.IGNORECASE if ignore_case else 0
    return re.compile(f"{_LEFT}(?:{body}){_RIGHT}", flags)


def contains_term(text: str, terms: tuple[str, ...], ignore_case: bool = True) -> bool:
    """True when any term occurs in text as a whole word."""
    if not terms:
        return False
    return term_pattern(terms, ignore_case).search(text) is not None
