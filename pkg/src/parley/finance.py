"""Finance advisory domain: return-on-investment math for the two investment
options, result comparison, and the local definition/news corpora.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence


@dataclass(frozen=True)
class SavingsParams:
    """Savings-account rates, as fractions per investment period."""

    rate: float        # interest rate
    base_rate: float   # rate base paid regardless of bonus conditions

    def __post_init__(self):
        if self.rate < 0 or self.base_rate < 0:
            raise ValueError("savings rates must be non-negative")


@dataclass(frozen=True)
class CdbParams:
    """Certificate-of-deposit parameters.

    ``paid_fraction`` is the share of the interbank deposit rate the bank
    pays (typically 0.90 to 1.20), ``days`` the investment length and
    ``income_tax`` a flat tax amount on the earnings.
    """

    interbank_rate: float
    paid_fraction: float
    days: int
    income_tax: float = 0.0

    def __post_init__(self):
        if self.paid_fraction <= 0:
            raise ValueError("paid_fraction must be positive")
        if self.days < 1:
            raise ValueError("days must be at least 1")
        if self.income_tax < 0:
            raise ValueError("income_tax must be non-negative")


def roi_savings(initial_value: float, params: SavingsParams) -> float:
    """Final amount in the savings account: IV + IV*(rate + base rate)."""
    if initial_value <= 0:
        raise ValueError("initial value must be positive")
    return initial_value + initial_value * (params.rate + params.base_rate)


def roi_cdb(initial_value: float, params: CdbParams, mode: str = "verbatim") -> float:
    """Final amount in the certificate of deposit.

    The default mode computes IV + IV*ID*P^d - IT exactly as that expression
    is written. The optional "compound" mode uses business-daily compounding
    IV*(1 + ID*P)^(d/252) - IT instead.
    """
    if initial_value <= 0:
        raise ValueError("initial value must be positive")
    if mode == "verbatim":
        return (
            initial_value
            + initial_value * params.interbank_rate * params.paid_fraction ** params.days
            - params.income_tax
        )
    if mode == "compound":
        return (
            initial_value
            * (1.0 + params.interbank_rate * params.paid_fraction) ** (params.days / 252.0)
            - params.income_tax
        )
    raise ValueError(f"unknown roi mode {mode!r}")


@dataclass(frozen=True)
class SimulationResult:
    option: str
    final_amount: float
    inputs: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.final_amount == self.final_amount and abs(self.final_amount) != float("inf")):
            raise ValueError("final amount must be finite")


@dataclass
class Comparison:
    kind: str  # "recommend" | "no_significant_difference" | "report_only"
    best: SimulationResult
    results: list[SimulationResult]


def compare_results(results: Sequence[SimulationResult], epsilon: float = 0.01) -> Comparison:
    """Pick the option with the largest final amount.

    When the relative gap between best and runner-up is within epsilon the
    difference is not significant; a single result is only reported.
    """
    if not results:
        raise ValueError("compare_results needs at least one result")
    ordered = sorted(results, key=lambda r: (-r.final_amount, r.option))
    best = ordered[0]
    if len(ordered) == 1:
        return Comparison("report_only", best, list(results))
    runner_up = ordered[1]
    scale = max(abs(best.final_amount), abs(runner_up.final_amount))
    gap = abs(best.final_amount - runner_up.final_amount) / scale if scale else 0.0
    if gap <= epsilon:
        return Comparison("no_significant_difference", best, list(results))
    return Comparison("recommend", best, list(results))


# ---------------------------------------------------------------------------
# Corpora
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DefinitionEntry:
    term: str
    aliases: tuple[str, ...]
    text: str

    def keywords(self) -> tuple[str, ...]:
        return (self.term.lower(),) + tuple(a.lower() for a in self.aliases)


class DefinitionCorpus:
    def __init__(self, entries: Sequence[DefinitionEntry]):
        self.entries = list(entries)

    @staticmethod
    def load(path: str) -> "DefinitionCorpus":
        entries = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                entries.append(
                    DefinitionEntry(obj["term"], tuple(obj.get("aliases", ())), obj["text"])
                )
        return DefinitionCorpus(entries)


def lookup_definition(query: str, corpus: DefinitionCorpus) -> Optional[DefinitionEntry]:
    """Case-insensitive keyword match; longest matching keyword wins."""
    low = f" {' '.join(re.findall(r'[a-z0-9]+', query.lower()))} "
    best: Optional[DefinitionEntry] = None
    best_len = 0
    for entry in corpus.entries:
        for keyword in entry.keywords():
            normalized = " ".join(re.findall(r"[a-z0-9]+", keyword))
            if f" {normalized} " in low and len(normalized) > best_len:
                best, best_len = entry, len(normalized)
    return best


@dataclass(frozen=True)
class NewsDocument:
    id: str
    text: str
    source: str = ""


class NewsCorpus:
    def __init__(self, documents: Sequence[NewsDocument]):
        self.documents = list(documents)

    @staticmethod
    def load(path: str) -> "NewsCorpus":
        docs = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                docs.append(NewsDocument(str(obj["id"]), obj["text"], obj.get("source", "")))
        return NewsCorpus(docs)


_STOPWORDS = {"the", "a", "an", "is", "are", "or", "and", "to", "in", "of", "for", "it", "on", "which", "what"}


def search_news(query: str, corpus: NewsCorpus) -> Optional[NewsDocument]:
    """Highest token-overlap document; ties go to the smallest document id."""
    tokens = {t for t in re.findall(r"\w+", query.lower()) if t not in _STOPWORDS}
    if not corpus.documents or not tokens:
        return None
    scored: list[tuple[int, str, NewsDocument]] = []
    for doc in corpus.documents:
        doc_tokens = set(re.findall(r"\w+", doc.text.lower()))
        scored.append((len(tokens & doc_tokens), doc.id, doc))
    score, _, best = min(scored, key=lambda row: (-row[0], row[1]))
    if score == 0:
        return None
    return best


@dataclass
class RatesProfile:
    """Deployment rate configuration for both investment options."""

    savings: SavingsParams
    interbank_rate: float
    paid_fraction: float
    income_tax: float = 0.0
    mode: str = "verbatim"
    epsilon: float = 0.01
    currency: str = "BRL"

    @staticmethod
    def from_json(obj: Mapping) -> "RatesProfile":
        return RatesProfile(
            savings=SavingsParams(obj["savings_rate"], obj.get("savings_base_rate", 0.0)),
            interbank_rate=obj["interbank_rate"],
            paid_fraction=obj.get("paid_fraction", 1.0),
            income_tax=obj.get("income_tax", 0.0),
            mode=obj.get("mode", "verbatim"),
            epsilon=obj.get("epsilon", 0.01),
            currency=obj.get("currency", "BRL"),
        )

    @staticmethod
    def load(path: str) -> "RatesProfile":
        with open(path, "r", encoding="utf-8") as fh:
            return RatesProfile.from_json(json.load(fh))

    def cdb_params(self, days: int) -> CdbParams:
        return CdbParams(
            interbank_rate=self.interbank_rate,
            paid_fraction=self.paid_fraction,
            days=days,
            income_tax=self.income_tax,
        )
