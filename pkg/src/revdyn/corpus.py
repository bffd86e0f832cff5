"""Corpus construction: raw review ingestion, day-granular user/item
sequences, vocabularies, and temporal splits.

The pipeline is::

    ingest -> build_sequences -> build_vocab / temporal_split -> CorpusBundle

A review is one dataset element; it appears once in its user's sequence and
once in its item's sequence.  Creation time ``tau`` is the whole-day offset
from the earliest review in the dataset, so reviews by one entity on the same
day share one ``tau`` and get ``delta = 0`` between them.  Entities whose
reviews span fewer than ``min_days`` distinct days are removed; removal is
iterated to a fixed point because dropping an entity also drops its reviews
from every counterpart sequence.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hashing import hash_matrix

SECONDS_PER_DAY = 86400

PAD, UNK, BOS, EOS = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<unk>", "<bos>", "<eos>")

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class CorpusError(Exception):
    pass


@dataclass
class RawReview:
    user_id: str
    item_id: str
    rating: float
    timestamp: int
    text: str


@dataclass
class ProcessedReview:
    """One kept review with its whole-day creation time and truncated tokens."""

    rid: int
    user_id: str
    item_id: str
    rating: float
    day: int
    tokens: list[str]


@dataclass
class ReviewEvent:
    """One event of an entity sequence, with tokens indexed against a vocabulary."""

    tokens: list[int]
    tau: float
    delta: float
    rating: float
    counterpart_id: str


@dataclass
class ReviewSequence:
    kind: str  # "user" | "item"
    entity_id: str
    events: list[ReviewEvent]


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace plus punctuation (runs of [a-z0-9])."""
    return _TOKEN_RE.findall(text.lower())


def ingest(path: str | Path) -> tuple[list[RawReview], int]:
    """Parse JSON-lines reviews; returns (records, skipped_line_count).

    Expected fields per line: reviewerID, asin, overall, unixReviewTime,
    reviewText.  Text is lowercased here.  Malformed lines (bad JSON, missing
    fields, rating outside [1, 5], negative timestamp, empty ids) are skipped
    and counted; an input yielding zero records is a hard error.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"input file not found: {path}")
    if path.suffix == ".gz":
        import gzip

        fh = gzip.open(path, "rt", encoding="utf-8")
    else:
        fh = open(path, "r", encoding="utf-8")

    records: list[RawReview] = []
    skipped = 0
    with fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                user = str(obj["reviewerID"])
                item = str(obj["asin"])
                rating = float(obj["overall"])
                ts = int(obj["unixReviewTime"])
                text = str(obj.get("reviewText", ""))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                skipped += 1
                continue
            if not user or not item or not (1.0 <= rating <= 5.0) or ts < 0:
                skipped += 1
                continue
            records.append(RawReview(user, item, rating, ts, text.lower()))
    if not records:
        raise CorpusError(f"no records parsed from {path}")
    return records, skipped


@dataclass
class SequenceSet:
    """Kept reviews plus per-entity event orderings (lists of review ids)."""

    reviews: list[ProcessedReview]
    user_events: dict[str, list[int]]
    item_events: dict[str, list[int]]

    def days_of(self, rids: list[int]) -> list[int]:
        return [self.reviews[r].day for r in rids]


def _order_events(reviews: list[ProcessedReview], key: str) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {}
    for r in reviews:
        out.setdefault(getattr(r, key), []).append(r.rid)
    # input order is file order; a stable sort by day keeps intra-day file order
    for rids in out.values():
        rids.sort(key=lambda rid: reviews[rid].day)
    return out


def build_sequences(
    raw: list[RawReview], min_days: int = 5, max_tokens: int = 150
) -> SequenceSet:
    """Day-granular sequences with iterated short-entity filtering.

    ``tau`` is the whole-day difference between a review's timestamp and the
    earliest timestamp in the input.  Users and items spanning fewer than
    ``min_days`` distinct days are removed, and removal repeats until stable
    since dropped reviews can shorten counterpart sequences.
    """
    if not raw:
        raise CorpusError("build_sequences: empty input")
    t0 = min(r.timestamp for r in raw)
    entries = [
        (r.user_id, r.item_id, r.rating, (r.timestamp - t0) // SECONDS_PER_DAY, r.text)
        for r in raw
    ]

    alive = list(range(len(entries)))
    while True:
        user_days: dict[str, set[int]] = {}
        item_days: dict[str, set[int]] = {}
        for i in alive:
            u, v, _, day, _ = entries[i]
            user_days.setdefault(u, set()).add(day)
            item_days.setdefault(v, set()).add(day)
        bad_users = {u for u, days in user_days.items() if len(days) < min_days}
        bad_items = {v for v, days in item_days.items() if len(days) < min_days}
        if not bad_users and not bad_items:
            break
        alive = [
            i
            for i in alive
            if entries[i][0] not in bad_users and entries[i][1] not in bad_items
        ]
        if not alive:
            raise CorpusError(
                f"all reviews removed by the {min_days}-distinct-day filter"
            )

    reviews = []
    for rid, i in enumerate(alive):
        u, v, rating, day, text = entries[i]
        reviews.append(
            ProcessedReview(rid, u, v, rating, int(day), tokenize(text)[:max_tokens])
        )
    return SequenceSet(
        reviews=reviews,
        user_events=_order_events(reviews, "user_id"),
        item_events=_order_events(reviews, "item_id"),
    )


def deltas_from_days(days: list[int]) -> list[float]:
    """Inter-event gaps; the first gap is the time since dataset start."""
    out = []
    prev = 0
    for t, day in enumerate(days):
        out.append(float(day - prev) if t > 0 else float(day))
        prev = day
    return out


@dataclass
class Vocabulary:
    token_to_index: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.token_to_index)

    def index(self, token: str) -> int:
        return self.token_to_index.get(token, UNK)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.token_to_index.get(t, UNK) for t in tokens]

    def to_json(self) -> dict:
        return dict(self.token_to_index)

    @classmethod
    def from_json(cls, obj: dict) -> "Vocabulary":
        return cls(token_to_index={str(k): int(v) for k, v in obj.items()})


def build_vocab(token_streams, size: int) -> Vocabulary:
    """Keep the ``size - 4`` most frequent tokens after the reserved slots.

    Ties are broken lexicographically.  Reserved slots: pad, unk, bos, eos.
    """
    n_reserved = len(RESERVED_TOKENS)
    if size <= n_reserved:
        raise CorpusError(f"vocabulary size must exceed {n_reserved}, got {size}")
    counts: Counter[str] = Counter()
    for stream in token_streams:
        counts.update(stream)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    mapping = {tok: i for i, tok in enumerate(RESERVED_TOKENS)}
    for tok, _ in ranked[: size - n_reserved]:
        mapping[tok] = len(mapping)
    return Vocabulary(token_to_index=mapping)


def bow_vector(tokens: list[int], vocab_size: int) -> np.ndarray:
    """Raw count vector over the vocabulary; unknown tokens count in the unk slot."""
    out = np.zeros(vocab_size, dtype=np.float64)
    for t in tokens:
        if not 0 <= t < vocab_size:
            raise CorpusError(f"token index {t} outside vocabulary of size {vocab_size}")
        out[t] += 1.0
    return out


@dataclass
class SplitThresholds:
    train_end_day: int
    val_end_day: int

    def split_of(self, day: int) -> str:
        if day <= self.train_end_day:
            return "train"
        if day <= self.val_end_day:
            return "val"
        return "test"


def temporal_split(days: list[int], fractions=(0.8, 0.1, 0.1)) -> SplitThresholds:
    """Day thresholds so the three splits hold ~fractions of reviews in time order.

    A review's split is decided only by its day; reviews on a boundary day go
    to the earlier split.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise CorpusError(f"split fractions must sum to 1, got {fractions}")
    if not days:
        raise CorpusError("temporal_split: no events")
    ordered = sorted(days)
    n = len(ordered)
    i_train = max(1, math.floor(fractions[0] * n))
    i_val = max(i_train, math.floor((fractions[0] + fractions[1]) * n))
    return SplitThresholds(
        train_end_day=int(ordered[i_train - 1]),
        val_end_day=int(ordered[i_val - 1]),
    )


@dataclass
class CorpusBundle:
    """Serializable corpus: reviews, sequence orderings, vocabularies, hashing
    parameters, and split thresholds.  Schema documented in the README."""

    reviews: list[ProcessedReview]
    user_events: dict[str, list[int]]
    item_events: dict[str, list[int]]
    vocab_bow: Vocabulary
    vocab_lm: Vocabulary
    hash_seed: int
    hash_dim: int
    splits: SplitThresholds
    max_tokens: int
    min_days: int
    meta: dict = field(default_factory=dict)

    @property
    def user_index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(sorted(self.user_events))}

    @property
    def item_index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(sorted(self.item_events))}

    def split_of_review(self, rid: int) -> str:
        return self.splits.split_of(self.reviews[rid].day)

    def sequences(self, kind: str, vocab: Vocabulary | None = None) -> list[ReviewSequence]:
        """Per-entity view: ordered ReviewEvents with indexed tokens."""
        vocab = vocab or self.vocab_bow
        events_map = self.user_events if kind == "user" else self.item_events
        out = []
        for entity_id in sorted(events_map):
            rids = events_map[entity_id]
            days = [self.reviews[r].day for r in rids]
            deltas = deltas_from_days(days)
            events = []
            for pos, rid in enumerate(rids):
                r = self.reviews[rid]
                counterpart = r.item_id if kind == "user" else r.user_id
                events.append(
                    ReviewEvent(
                        tokens=vocab.encode(r.tokens),
                        tau=float(r.day),
                        delta=deltas[pos],
                        rating=r.rating,
                        counterpart_id=counterpart,
                    )
                )
            out.append(ReviewSequence(kind=kind, entity_id=entity_id, events=events))
        return out

    def to_json(self) -> dict:
        return {
            "format": "revdyn-corpus-v1",
            "reviews": [
                [r.user_id, r.item_id, r.rating, r.day, " ".join(r.tokens)]
                for r in self.reviews
            ],
            "user_events": self.user_events,
            "item_events": self.item_events,
            "vocab_bow": self.vocab_bow.to_json(),
            "vocab_lm": self.vocab_lm.to_json(),
            "hash_seed": self.hash_seed,
            "hash_dim": self.hash_dim,
            "split_train_end_day": self.splits.train_end_day,
            "split_val_end_day": self.splits.val_end_day,
            "max_tokens": self.max_tokens,
            "min_days": self.min_days,
            "meta": self.meta,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def from_json(cls, obj: dict) -> "CorpusBundle":
        if obj.get("format") != "revdyn-corpus-v1":
            raise CorpusError(f"unrecognized corpus format: {obj.get('format')!r}")
        reviews = [
            ProcessedReview(
                rid, str(u), str(v), float(rating), int(day),
                text.split() if text else [],
            )
            for rid, (u, v, rating, day, text) in enumerate(obj["reviews"])
        ]
        return cls(
            reviews=reviews,
            user_events={k: list(map(int, v)) for k, v in obj["user_events"].items()},
            item_events={k: list(map(int, v)) for k, v in obj["item_events"].items()},
            vocab_bow=Vocabulary.from_json(obj["vocab_bow"]),
            vocab_lm=Vocabulary.from_json(obj["vocab_lm"]),
            hash_seed=int(obj["hash_seed"]),
            hash_dim=int(obj["hash_dim"]),
            splits=SplitThresholds(
                int(obj["split_train_end_day"]), int(obj["split_val_end_day"])
            ),
            max_tokens=int(obj["max_tokens"]),
            min_days=int(obj["min_days"]),
            meta=obj.get("meta", {}),
        )

    @classmethod
    def load(cls, path: str | Path) -> "CorpusBundle":
        return cls.from_json(json.loads(Path(path).read_text()))


def prepare_corpus(
    raw: list[RawReview],
    v_bow: int = 2000,
    v_lm: int = 5000,
    d_hash: int = 1024,
    hash_seed: int = 13,
    max_tokens: int = 150,
    fractions=(0.8, 0.1, 0.1),
    min_days: int = 5,
    meta: dict | None = None,
) -> CorpusBundle:
    """Full pipeline from parsed reviews to a serializable bundle.

    Vocabularies are built from training-split reviews only, so no test-period
    tokens leak into the token inventory.
    """
    seqs = build_sequences(raw, min_days=min_days, max_tokens=max_tokens)
    splits = temporal_split([r.day for r in seqs.reviews], fractions)
    train_tokens = (
        r.tokens for r in seqs.reviews if splits.split_of(r.day) == "train"
    )
    train_tokens = list(train_tokens)
    vocab_bow = build_vocab(train_tokens, v_bow)
    vocab_lm = build_vocab(train_tokens, v_lm)
    bundle_meta = {
        "n_reviews": len(seqs.reviews),
        "n_users": len(seqs.user_events),
        "n_items": len(seqs.item_events),
        "v_bow_cap": v_bow,
        "v_lm_cap": v_lm,
        "fractions": list(fractions),
    }
    bundle_meta.update(meta or {})
    return CorpusBundle(
        reviews=seqs.reviews,
        user_events=seqs.user_events,
        item_events=seqs.item_events,
        vocab_bow=vocab_bow,
        vocab_lm=vocab_lm,
        hash_seed=hash_seed,
        hash_dim=d_hash,
        splits=splits,
        max_tokens=max_tokens,
        min_days=min_days,
        meta=bundle_meta,
    )


@dataclass
class EntityTimeline:
    """Model-ready arrays for one entity's full event sequence."""

    kind: str
    entity_id: str
    rids: list[int]
    tau: np.ndarray          # [T] whole days, float
    delta: np.ndarray        # [T]
    ratings: np.ndarray      # [T]
    y_hashed: np.ndarray     # [T, D] hashed one-entry centered-rating vectors
    token_ids: list          # list of list[int], per event

    def __len__(self) -> int:
        return len(self.rids)


@dataclass
class MaterializedCorpus:
    """Bundle plus precomputed per-entity arrays for a chosen vocabulary."""

    bundle: CorpusBundle
    vocab: Vocabulary
    users: dict[str, EntityTimeline]
    items: dict[str, EntityTimeline]
    # review id -> (user_id, position in user timeline, item_id, position in item timeline)
    review_pos: dict[int, tuple[str, int, str, int]]

    def timeline(self, kind: str, entity_id: str) -> EntityTimeline:
        table = self.users if kind == "user" else self.items
        return table[entity_id]


def materialize(bundle: CorpusBundle, vocab_kind: str = "bow") -> MaterializedCorpus:
    """Index tokens, hash rating vectors, and lay out per-entity arrays."""
    if vocab_kind == "bow":
        vocab = bundle.vocab_bow
    elif vocab_kind == "lm":
        vocab = bundle.vocab_lm
    elif vocab_kind == "none":
        vocab = bundle.vocab_bow  # tokens unused downstream
    else:
        raise CorpusError(f"unknown vocab kind {vocab_kind!r}")
    user_index = bundle.user_index
    item_index = bundle.item_index
    review_pos: dict[int, list] = {r.rid: [None, None, None, None] for r in bundle.reviews}
    # center hashed ratings so the event input carries deviation, not offset;
    # the centering constant comes from train-split ratings only
    train_ratings = [
        r.rating for r in bundle.reviews if bundle.split_of_review(r.rid) == "train"
    ]
    if train_ratings:
        rating_center = float(np.mean(train_ratings))
    elif bundle.reviews:
        rating_center = float(np.mean([r.rating for r in bundle.reviews]))
    else:
        rating_center = 0.0

    def build(kind: str, events_map: dict[str, list[int]]) -> dict[str, EntityTimeline]:
        out = {}
        counter_index = item_index if kind == "user" else user_index
        for entity_id in sorted(events_map):
            rids = events_map[entity_id]
            days = [bundle.reviews[r].day for r in rids]
            ratings = [bundle.reviews[r].rating for r in rids]
            counterparts = [
                bundle.reviews[r].item_id if kind == "user" else bundle.reviews[r].user_id
                for r in rids
            ]
            y = hash_matrix(
                [counter_index[c] for c in counterparts],
                [rr - rating_center for rr in ratings],
                bundle.hash_dim,
                bundle.hash_seed,
            )
            tl = EntityTimeline(
                kind=kind,
                entity_id=entity_id,
                rids=list(rids),
                tau=np.asarray(days, dtype=np.float64),
                delta=np.asarray(deltas_from_days(days), dtype=np.float64),
                ratings=np.asarray(ratings, dtype=np.float64),
                y_hashed=y,
                token_ids=[vocab.encode(bundle.reviews[r].tokens) for r in rids],
            )
            out[entity_id] = tl
            for pos, rid in enumerate(rids):
                if kind == "user":
                    review_pos[rid][0] = entity_id
                    review_pos[rid][1] = pos
                else:
                    review_pos[rid][2] = entity_id
                    review_pos[rid][3] = pos
        return out

    users = build("user", bundle.user_events)
    items = build("item", bundle.item_events)
    return MaterializedCorpus(
        bundle=bundle,
        vocab=vocab,
        users=users,
        items=items,
        review_pos={k: tuple(v) for k, v in review_pos.items()},
    )
