"""Seeded toy corpus generator used by the demo, the sweep, and the test suite.

Documents are built around topics, with a pool of filler tokens that appear in
nearly every document. Fillers are the low-IDF population: queries include
them on purpose so a trainer has something worth suppressing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distill.training import TrainingPair


@dataclass(frozen=True)
class ToyFixture:
    docs: tuple[tuple[str, tuple[str, ...]], ...]
    pairs: tuple[TrainingPair, ...]

    def qrels(self) -> dict[str, dict[str, int]]:
        return {p.query_id: {p.positive_id: 1} for p in self.pairs}


def generate_toy_fixture(
    seed: int = 0,
    n_docs: int = 40,
    n_queries: int = 16,
    n_topics: int = 12,
    n_fillers: int = 10,
    n_noise: int = 4,
) -> ToyFixture:
    """Topic-structured corpus with shared fillers and rare noise tokens.

    Each document commits to one topic and carries a couple of its tokens at
    small counts, most of the filler pool, and occasionally a noise token.
    Each query asks for one topic and drags in fillers, and its positive is a
    document of that topic.
    """
    rng = np.random.default_rng(seed)
    topic_tokens = [
        [f"topic{t:02d}{suffix}" for suffix in ("a", "b", "c")] for t in range(n_topics)
    ]
    fillers = [f"common{i:02d}" for i in range(n_fillers)]
    noise = [f"rare{i:02d}" for i in range(n_noise)]

    docs = []
    doc_topics = []
    for d in range(n_docs):
        topic = int(rng.integers(0, n_topics))
        doc_topics.append(topic)
        tokens: list[str] = []
        for token in topic_tokens[topic]:
            tokens.extend([token] * int(rng.integers(1, 4)))
        for filler in fillers:
            if rng.random() < 0.9:
                tokens.append(filler)
        if rng.random() < 0.25:
            tokens.append(noise[int(rng.integers(0, n_noise))])
        docs.append((f"d{d:03d}", tuple(tokens)))

    by_topic: dict[int, list[str]] = {}
    for (doc_id, _), topic in zip(docs, doc_topics):
        by_topic.setdefault(topic, []).append(doc_id)
    covered = sorted(by_topic)

    pairs = []
    for q in range(n_queries):
        topic = covered[int(rng.integers(0, len(covered)))]
        n_topic_tokens = int(rng.integers(1, 3))
        chosen = rng.choice(3, size=n_topic_tokens, replace=False)
        query_tokens = [topic_tokens[topic][i] for i in sorted(chosen)]
        n_filler = int(rng.integers(1, 3))
        for i in sorted(rng.choice(n_fillers, size=n_filler, replace=False)):
            query_tokens.append(fillers[i])
        positive = by_topic[topic][int(rng.integers(0, len(by_topic[topic])))]
        pairs.append(TrainingPair(f"q{q:03d}", tuple(query_tokens), positive))

    return ToyFixture(tuple(docs), tuple(pairs))
