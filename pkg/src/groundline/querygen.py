"""Query debiasing: ask a chat model to correct and rephrase a query ``n_q`` ways."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from groundline._io import JsonlError, atomic_write_text, dumps_jsonl, iter_jsonl
from groundline.core import Query, ValidationError
from groundline.gateway import ChatRequest, Gateway, Message

logger = logging.getLogger(__name__)

DEFAULT_DEBIAS_MODEL = "baichuan2-7b-chat"
DEBIAS_TEMPERATURE = 0.2

CORRECT_INSTRUCTION = "Please correct spelling and grammatical errors in the original query."
REPHRASE_INSTRUCTION = (
    "Please rephrase the corrected query using different wording while maintaining "
    "the same intent and information."
)
RETRY_SUFFIX = "Answer with the numbered list only, one rephrasing per line."

_NUMBER_WORDS = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"]

_ITEM_RE = re.compile(r"^\s*(?:[-*]\s*)?(?:\*\*)?\(?(\d{1,2})\s*[.):\]](?:\*\*)?\s+(.*\S)\s*$")
_QUOTES = "\"'“”‘’`"


class ParseError(ValueError):
    """The model output did not contain the requested number of list items."""


def count_phrase(n_q: int) -> str:
    word = _NUMBER_WORDS[n_q] if n_q < len(_NUMBER_WORDS) else str(n_q)
    return f"Provide {word} rephrasing." if n_q == 1 else f"Provide {word} different rephrasings."


@dataclass(frozen=True)
class DebiasedQuerySet:
    original: Query
    rephrasings: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rephrasings", tuple(self.rephrasings))
        if not self.rephrasings:
            raise ValidationError("a debiased query set needs at least one rephrasing")
        if any(not r.strip() for r in self.rephrasings):
            raise ValidationError("rephrasings must be non-empty")

    @property
    def n_q(self) -> int:
        return len(self.rephrasings)

    def to_record(self) -> dict:
        return {"qid": self.original.query_id, "original": self.original.text, "rephrasings": list(self.rephrasings)}

    @classmethod
    def from_record(cls, record: dict) -> DebiasedQuerySet:
        return cls(Query(record["qid"], record["original"]), tuple(record["rephrasings"]))


def build_debias_prompt(
    original: Query,
    n_q: int = 5,
    model_id: str = DEFAULT_DEBIAS_MODEL,
    temperature: float = DEBIAS_TEMPERATURE,
    retry: bool = False,
) -> ChatRequest:
    """All three debiasing instructions aggregated into a single user message."""
    if n_q < 1:
        raise ValueError("n_q must be >= 1")
    lines = [
        CORRECT_INSTRUCTION,
        REPHRASE_INSTRUCTION,
        count_phrase(n_q),
        f"Format the answer as a numbered list from 1. to {n_q}., one rephrasing per line.",
        f'Original query: "{original.text.strip()}"',
    ]
    if retry:
        lines.append(RETRY_SUFFIX)
    return ChatRequest(
        model_id=model_id,
        messages=(Message("user", "\n".join(lines)),),
        temperature=temperature,
        meta={"query": original.text, "n_q": n_q},
    )


def _clean(item: str) -> str:
    item = item.strip()
    while len(item) >= 2 and item[0] in _QUOTES and item[-1] in _QUOTES:
        item = item[1:-1].strip()
    if item.endswith("**") and item.startswith("**"):
        item = item[2:-2].strip()
    return item


def parse_rephrasings(response: str, n_q: int) -> list[str]:
    """Extract the first ``n_q`` numbered-list items from a model response.

    Accepts ``1.``, ``1)``, ``1:``, ``(1)`` and markdown-bold numbering; strips
    surrounding quotes. Byte-identical duplicates are skipped while enough
    distinct items remain.
    """
    items = []
    for line in response.splitlines():
        m = _ITEM_RE.match(line)
        if m:
            text = _clean(m.group(2))
            if text:
                items.append(text)
    if len(items) < n_q:
        raise ParseError(f"expected {n_q} numbered items, found {len(items)}")
    distinct = list(dict.fromkeys(items))
    return distinct[:n_q] if len(distinct) >= n_q else items[:n_q]


def debias(
    original: Query,
    gateway: Gateway,
    n_q: int = 5,
    model_id: str = DEFAULT_DEBIAS_MODEL,
    temperature: float = DEBIAS_TEMPERATURE,
) -> DebiasedQuerySet:
    """Debias one query; never fails on malformed output.

    A response that cannot be parsed is re-prompted once with a stricter format
    reminder; if that also fails the set degrades to ``n_q`` copies of the
    original text.
    """
    for retry in (False, True):
        request = build_debias_prompt(original, n_q, model_id, temperature, retry=retry)
        response = gateway.chat(request, stage="debias")
        try:
            return DebiasedQuerySet(original, tuple(parse_rephrasings(response, n_q)))
        except ParseError as exc:
            logger.info("query %s: %s%s", original.query_id, exc, " (giving up)" if retry else "; re-prompting")
    logger.warning("query %s: falling back to %d copies of the original query", original.query_id, n_q)
    return DebiasedQuerySet(original, (original.text,) * n_q)


def write_debiased_jsonl(sets: Iterable[DebiasedQuerySet], path: str | Path) -> None:
    atomic_write_text(path, dumps_jsonl(s.to_record() for s in sets))


def read_debiased_jsonl(path: str | Path) -> Iterator[DebiasedQuerySet]:
    for lineno, record in iter_jsonl(path):
        try:
            yield DebiasedQuerySet.from_record(record)
        except (ValueError, KeyError, TypeError) as exc:
            raise JsonlError(path, lineno, f"bad debiased-query record: {exc}") from exc
