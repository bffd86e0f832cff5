"""Synthetic review corpora with planted structure.

Three generators, each emitting raw reviews that run through the standard
preparation pipeline so fixtures exercise the same code paths as real data:

  drift        user mood follows an AR(1) walk that moves both ratings and
               sentiment word choice; temporal models can track it, a static
               factorization cannot
  arrival      inter-review gaps are exponential with a known rate, so the
               fitted intensity has a known target
  topic-shift  which of two marker words carries the rating signal hands
               over from "alpha" to "beta" as the corpus ages
"""

from __future__ import annotations

import numpy as np

from .corpus import CorpusBundle, RawReview, prepare_corpus

BASE_TS = 1_400_000_000
DAY = 86400

POSITIVE = (
    "great", "excellent", "wonderful", "fantastic", "superb", "delightful",
    "amazing", "perfect", "lovely", "brilliant", "outstanding", "charming",
)
NEGATIVE = (
    "awful", "terrible", "horrible", "disappointing", "poor", "broken",
    "useless", "dreadful", "mediocre", "flimsy", "annoying", "defective",
)
NEUTRAL = (
    "the", "a", "it", "this", "box", "item", "arrived", "ordered", "bought",
    "package", "color", "size", "price", "store", "shipping", "product",
    "week", "day", "again", "today", "version", "model", "unit", "piece",
    "thing", "one", "two", "set", "kind", "sort",
)


def _clip_rating(x: float) -> float:
    return float(np.clip(x, 1.0, 5.0))


def drift_corpus(n_users=50, n_items=30, n_reviews=8, gap_mean=3.0, rho=0.92,
                 mood_scale=1.0, item_bias_scale=0.15, noise=0.1, text_len=8,
                 sentiment_prob=0.7, sentiment_slope=2.0, seed=0):
    """Reviews whose ratings ride a slowly mixing per-user mood.

    The mood also tilts word choice between the positive and negative pools,
    so review text carries a cleaner mood readout than the single rating.
    Returns (raw_reviews, truth).
    """
    rng = np.random.default_rng(seed)
    item_bias = rng.normal(0.0, item_bias_scale, n_items)
    innovation = float(np.sqrt(max(1.0 - rho * rho, 1e-12)))
    raws = []
    for u in range(n_users):
        day_pos = float(rng.uniform(0.0, 2.0))
        mood = float(rng.normal(0.0, 1.0))
        for t in range(n_reviews):
            if t > 0:
                day_pos += float(rng.exponential(gap_mean))
                mood = rho * mood + float(rng.normal(0.0, innovation))
            v = int(rng.integers(n_items))
            rating = _clip_rating(
                3.0 + mood_scale * mood + item_bias[v] + rng.normal(0.0, noise)
            )
            p_pos = 1.0 / (1.0 + np.exp(-sentiment_slope * mood))
            tokens = []
            for _ in range(text_len):
                if rng.random() < sentiment_prob:
                    pool = POSITIVE if rng.random() < p_pos else NEGATIVE
                else:
                    pool = NEUTRAL
                tokens.append(pool[int(rng.integers(len(pool)))])
            raws.append(RawReview(
                user_id=f"u{u:03d}", item_id=f"i{v:03d}", rating=rating,
                timestamp=BASE_TS + int(day_pos * DAY), text=" ".join(tokens),
            ))
    raws.sort(key=lambda r: r.timestamp)
    truth = {
        "kind": "drift", "rho": rho, "mood_scale": mood_scale,
        "item_bias_scale": item_bias_scale, "noise": noise,
    }
    return raws, truth


def arrival_corpus(n_users=40, n_items=12, n_reviews=20, rate=2.0,
                   rating_noise=0.3, seed=0):
    """Gaps drawn from an exponential with a known rate (per day).

    Whole-day rounding keeps the empirical mean gap at ~1/rate because the
    rounding errors telescope along each timeline.
    """
    rng = np.random.default_rng(seed)
    raws = []
    for u in range(n_users):
        day_pos = float(rng.uniform(0.0, 1.0))
        for t in range(n_reviews):
            if t > 0:
                day_pos += float(rng.exponential(1.0 / rate))
            v = int(rng.integers(n_items))
            rating = _clip_rating(3.0 + rng.normal(0.0, rating_noise))
            tokens = [NEUTRAL[int(rng.integers(len(NEUTRAL)))] for _ in range(3)]
            raws.append(RawReview(
                user_id=f"u{u:03d}", item_id=f"i{v:03d}", rating=rating,
                timestamp=BASE_TS + int(day_pos * DAY), text=" ".join(tokens),
            ))
    raws.sort(key=lambda r: r.timestamp)
    truth = {"kind": "arrival", "rate": rate, "mean_gap": 1.0 / rate}
    return raws, truth


def topic_shift_corpus(n_users=30, n_items=10, n_reviews=12, gap_mean=2.0,
                       signal=1.2, p_hi=0.9, p_lo=0.1, noise=0.1, n_filler=5,
                       handoff_start=0.0, handoff_end=1.0, seed=0):
    """Vocabulary hands over from the word "alpha" to the word "beta".

    "alpha" dominates early reviews and fades, "beta" mirrors it, with a
    linear handoff between ``handoff_start`` and ``handoff_end`` (fractions
    of the corpus day span).  Whichever marker currently prevails also
    carries the rating signal, so trained attention has a reason to sit on
    the marker words.
    """
    rng = np.random.default_rng(seed)
    span = n_reviews * gap_mean
    width = max(handoff_end - handoff_start, 1e-9)
    raws = []
    for u in range(n_users):
        day_pos = float(rng.uniform(0.0, 1.0))
        for t in range(n_reviews):
            if t > 0:
                day_pos += float(rng.exponential(gap_mean))
            progress = float(np.clip((day_pos / span - handoff_start) / width, 0.0, 1.0))
            has_alpha = bool(rng.random() < p_hi - (p_hi - p_lo) * progress)
            has_beta = bool(rng.random() < p_lo + (p_hi - p_lo) * progress)
            driver = has_beta if rng.random() < progress else has_alpha
            rating = _clip_rating(
                3.0 + (signal if driver else -signal) + rng.normal(0.0, noise)
            )
            v = int(rng.integers(n_items))
            tokens = [NEUTRAL[int(rng.integers(len(NEUTRAL)))]
                      for _ in range(n_filler)]
            if has_alpha:
                tokens.append("alpha")
            if has_beta:
                tokens.append("beta")
            rng.shuffle(tokens)
            raws.append(RawReview(
                user_id=f"u{u:03d}", item_id=f"i{v:03d}", rating=rating,
                timestamp=BASE_TS + int(day_pos * DAY), text=" ".join(tokens),
            ))
    raws.sort(key=lambda r: r.timestamp)
    truth = {
        "kind": "topic-shift", "word_early": "alpha", "word_late": "beta",
        "span_days": span, "signal": signal, "p_hi": p_hi, "p_lo": p_lo,
    }
    return raws, truth


GENERATORS = {
    "drift": drift_corpus,
    "arrival": arrival_corpus,
    "topic-shift": topic_shift_corpus,
}

# fixture-sized pipeline settings per kind
_PIPELINE = {
    "drift": dict(v_bow=128, v_lm=128, d_hash=64, min_days=5),
    "arrival": dict(v_bow=64, v_lm=64, d_hash=64, min_days=5),
    "topic-shift": dict(v_bow=64, v_lm=64, d_hash=64, min_days=5),
}


def synth_bundle(kind: str, seed: int = 0, pipeline: dict | None = None,
                 **gen_kwargs) -> tuple[CorpusBundle, dict]:
    """Generate a fixture and push it through the standard pipeline.

    ``pipeline`` entries override the per-kind preparation defaults
    (vocabulary sizes, hash width, split settings).
    """
    if kind not in GENERATORS:
        raise ValueError(f"unknown synthetic kind {kind!r}; choose from {sorted(GENERATORS)}")
    raw, truth = GENERATORS[kind](seed=seed, **gen_kwargs)
    pipe = dict(_PIPELINE[kind])
    if pipeline:
        pipe.update(pipeline)
    bundle = prepare_corpus(raw, meta={"synthetic": {**truth, "seed": seed}}, **pipe)
    return bundle, truth
