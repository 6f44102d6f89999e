"""Causal task similarity: requirement TF-IDF plus award/date/type/technology distance vectors."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .domain import DomainError, Task

_TOKEN_RE = re.compile(r"[a-z0-9]+")

NUMERIC_COMPONENTS = ("award", "reg_start", "sub_deadline", "requirement")
TEMPORAL_COMPONENTS = ("reg_start", "sub_deadline")


@lru_cache(maxsize=None)
def _bundled_stopwords() -> frozenset[str]:
    text = resources.files("crowdsim").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a one-word-per-line stop list; ``None`` gives the bundled English list."""
    if path is None:
        return _bundled_stopwords()
    text = Path(path).read_text(encoding="utf-8")
    return frozenset(line.strip().lower() for line in text.splitlines() if line.strip())


def tokenize(text: str, stopwords: frozenset[str] | None = None) -> list[str]:
    stop = _bundled_stopwords() if stopwords is None else stopwords
    return [tok for tok in _TOKEN_RE.findall(text.lower()) if tok not in stop]


@dataclass(frozen=True)
class Corpus:
    """Tokenized requirement documents keyed by task id."""

    documents: Mapping[str, tuple[str, ...]]
    doc_frequencies: Mapping[str, int]

    @classmethod
    def from_texts(cls, texts: Mapping[str, str], stopwords: frozenset[str] | None = None) -> "Corpus":
        docs = {key: tuple(tokenize(text, stopwords)) for key, text in texts.items()}
        return cls.from_tokens(docs)

    @classmethod
    def from_tokens(cls, docs: Mapping[str, Sequence[str]]) -> "Corpus":
        frozen = {key: tuple(tokens) for key, tokens in docs.items()}
        df: Counter[str] = Counter()
        for tokens in frozen.values():
            df.update(set(tokens))
        return cls(documents=frozen, doc_frequencies=dict(df))

    @property
    def size(self) -> int:
        return len(self.documents)


def idf(term: str, corpus: Corpus) -> float:
    """``M / Y``: corpus size over the number of documents containing ``term``."""
    y = corpus.doc_frequencies.get(term, 0)
    if y == 0:
        raise DomainError(f"term {term!r} does not occur in the corpus")
    return corpus.size / y


def tf(term: str, doc: Sequence[str]) -> float:
    """``Z / W``: occurrences of ``term`` over the count of the most frequent term."""
    if not doc:
        raise DomainError("term frequency of an empty document is undefined")
    counts = Counter(doc)
    return counts.get(term, 0) / max(counts.values())


def tfidf_from_parts(
    idf_value: float,
    tf_value: float,
    *,
    base: float = 10.0,
    offset: float = 12.0,
    tf_multiplier: float = 12.0,
) -> float:
    """``log(IDF) / (offset + log(tf_multiplier * TF))``, zero when TF is zero."""
    if tf_value <= 0.0:
        return 0.0
    numerator = math.log(idf_value, base)
    if numerator == 0.0:
        return 0.0
    return numerator / (offset + math.log(tf_multiplier * tf_value, base))


def tfidf_weight(term: str, doc: Sequence[str], corpus: Corpus, **params: float) -> float:
    tf_value = tf(term, doc)
    if tf_value == 0.0:
        return 0.0
    return tfidf_from_parts(idf(term, corpus), tf_value, **params)


@dataclass(frozen=True)
class RequirementVector:
    task_id: str
    term_weights: Mapping[str, float]
    corpus_size: int
    doc_frequencies: Mapping[str, int]
    raw_counts: Mapping[str, int]
    max_count: int

    @property
    def total_weight(self) -> float:
        return sum(self.term_weights[t] for t in sorted(self.term_weights))


def requirement_vector(task_id: str, corpus: Corpus, **params: float) -> RequirementVector:
    doc = corpus.documents[task_id]
    counts = Counter(doc)
    weights = {term: tfidf_weight(term, doc, corpus, **params) for term in sorted(counts)}
    return RequirementVector(
        task_id=task_id,
        term_weights=weights,
        corpus_size=corpus.size,
        doc_frequencies={t: corpus.doc_frequencies[t] for t in counts},
        raw_counts=dict(counts),
        max_count=max(counts.values()) if counts else 0,
    )


@dataclass(frozen=True)
class Normalizer:
    """Corpus-wide min/max per numeric component for min-max scaling."""

    lows: Mapping[str, float]
    highs: Mapping[str, float]

    @classmethod
    def fit(cls, rows: Iterable[Mapping[str, float]]) -> "Normalizer":
        lows: dict[str, float] = {}
        highs: dict[str, float] = {}
        for row in rows:
            for key in NUMERIC_COMPONENTS:
                value = row[key]
                lows[key] = min(lows.get(key, value), value)
                highs[key] = max(highs.get(key, value), value)
        return cls(lows, highs)

    def scale(self, key: str, value: float) -> float:
        lo, hi = self.lows[key], self.highs[key]
        if hi <= lo:
            return 0.0
        return min(1.0, max(0.0, (value - lo) / (hi - lo)))


@dataclass(frozen=True)
class DistanceVector:
    """Normalized numeric components plus the attributes matched pairwise."""

    task_id: str
    award: float
    reg_start: float
    sub_deadline: float
    requirement: float
    task_type: str = ""
    technologies: frozenset[str] = frozenset()
    raw: Mapping[str, float] = field(default_factory=dict)

    def components(self, type_match: float, tech_match: float, *, temporal: bool = True) -> tuple[float, ...]:
        if temporal:
            return (self.award, self.reg_start, self.sub_deadline, type_match, tech_match, self.requirement)
        return (self.award, type_match, tech_match, self.requirement)


def repost_groups(tasks: Iterable[Task]) -> dict[str, list[Task]]:
    """Group tasks by the root of their repost lineage."""
    by_id = {t.id: t for t in tasks}

    def root(task: Task) -> str:
        seen = set()
        while task.repost_of and task.repost_of in by_id and task.id not in seen:
            seen.add(task.id)
            task = by_id[task.repost_of]
        return task.id

    groups: dict[str, list[Task]] = {}
    for task in by_id.values():
        groups.setdefault(root(task), []).append(task)
    return groups


def raw_components(task: Task, repost_group: Sequence[Task], requirement_score: float) -> dict[str, float]:
    if not repost_group:
        raise DomainError(f"empty repost group for task {task.id}")
    return {
        "award": max(t.award for t in repost_group),
        "reg_start": max(t.reg_start for t in repost_group),
        "sub_deadline": max(t.sub_deadline for t in repost_group),
        "requirement": requirement_score,
    }


def distance_vector(
    task: Task,
    repost_group: Sequence[Task],
    normalizer: Normalizer,
    requirement_score: float = 0.0,
) -> DistanceVector:
    raw = raw_components(task, repost_group, requirement_score)
    return DistanceVector(
        task_id=task.id,
        award=normalizer.scale("award", raw["award"]),
        reg_start=normalizer.scale("reg_start", raw["reg_start"]),
        sub_deadline=normalizer.scale("sub_deadline", raw["sub_deadline"]),
        requirement=normalizer.scale("requirement", raw["requirement"]),
        task_type=task.task_type,
        technologies=task.technologies,
        raw=raw,
    )


def tech_match(a: frozenset[str], b: frozenset[str], mode: str = "jaccard") -> float:
    if mode == "binary":
        return 1.0 if a == b else 0.0
    if mode != "jaccard":
        raise ValueError(f"unknown technology match mode {mode!r}")
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    if len(u) != len(v):
        raise DomainError(f"dimension mismatch: {len(u)} vs {len(v)}")
    nu = math.sqrt(sum(x * x for x in u))
    nv = math.sqrt(sum(x * x for x in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    dot = sum(x * y for x, y in zip(u, v))
    # rounding can push identical vectors a hair above 1
    return min(1.0, dot / (nu * nv))


def task_similarity(
    a: DistanceVector,
    b: DistanceVector,
    *,
    tech_mode: str = "jaccard",
    temporal: bool = True,
) -> float:
    """Cosine of the two distance vectors with the pairwise match terms filled in.

    The type and technology match values describe the pair, so both vectors
    carry the same value in those coordinates; this keeps the score symmetric.
    """
    type_match = 1.0 if a.task_type == b.task_type else 0.0
    tm = tech_match(a.technologies, b.technologies, tech_mode)
    return cosine(
        a.components(type_match, tm, temporal=temporal),
        b.components(type_match, tm, temporal=temporal),
    )


def pool_similarity(open_vectors: Iterable[DistanceVector], target: DistanceVector, **kwargs) -> float:
    """Mean similarity of ``target`` against every other vector in the pool."""
    sims = [task_similarity(target, v, **kwargs) for v in open_vectors if v.task_id != target.task_id]
    if not sims:
        return 0.0
    return sum(sims) / len(sims)


@dataclass(frozen=True)
class SimilarityParams:
    log_base: float = 10.0
    offset: float = 12.0
    tf_multiplier: float = 12.0
    tech_mode: str = "jaccard"
    temporal: bool = True

    def tfidf_kwargs(self) -> dict[str, float]:
        return {"base": self.log_base, "offset": self.offset, "tf_multiplier": self.tf_multiplier}


class SimilarityIndex:
    """Distance vectors for a task corpus, ready for pairwise or pooled scoring."""

    def __init__(
        self,
        tasks: Iterable[Task],
        *,
        params: SimilarityParams | None = None,
        stopwords: frozenset[str] | None = None,
    ) -> None:
        self.params = params or SimilarityParams()
        self.tasks = {t.id: t for t in tasks}
        self.corpus = Corpus.from_texts({k: t.requirement_text for k, t in self.tasks.items()}, stopwords)
        kw = self.params.tfidf_kwargs()
        self.requirements = {k: requirement_vector(k, self.corpus, **kw) for k in self.tasks}
        groups = repost_groups(self.tasks.values())
        self.group_of = {t.id: members for members in groups.values() for t in members}
        raws = {
            k: raw_components(t, self.group_of[k], self.requirements[k].total_weight)
            for k, t in self.tasks.items()
        }
        self.normalizer = Normalizer.fit(raws.values()) if raws else Normalizer({}, {})
        self.vectors = {
            k: distance_vector(t, self.group_of[k], self.normalizer, self.requirements[k].total_weight)
            for k, t in self.tasks.items()
        }

    def similarity(self, a: str, b: str) -> float:
        return task_similarity(
            self.vectors[a],
            self.vectors[b],
            tech_mode=self.params.tech_mode,
            temporal=self.params.temporal,
        )

    def matrix(self) -> tuple[list[str], list[list[float]]]:
        ids = sorted(self.vectors)
        return ids, [[self.similarity(a, b) for b in ids] for a in ids]

    def pool(self, target: str, open_ids: Iterable[str]) -> float:
        return pool_similarity(
            (self.vectors[i] for i in open_ids),
            self.vectors[target],
            tech_mode=self.params.tech_mode,
            temporal=self.params.temporal,
        )

    def similar_to(self, target: str, threshold: float) -> list[str]:
        return [k for k in sorted(self.vectors) if k != target and self.similarity(target, k) >= threshold]
