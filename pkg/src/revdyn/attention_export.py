"""Per-word attention weights along one item's review timeline.

For each review of an item, re-runs the recurrent content model with final
parameters and records the pooling weight mass each requested word received.
A word absent from a review scores 0 exactly; occurrences always score
strictly positive, so downstream consumers can filter on that.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import content as content_ops
from . import model as M
from .config import ModelConfig
from .corpus import CorpusBundle, materialize


@dataclass
class AttentionRecord:
    item_id: str
    review_index: int
    tau_days: float
    word: str
    alpha: float


def attention_timeline(params, cfg: ModelConfig, bundle: CorpusBundle,
                       item_id: str, words) -> list[AttentionRecord]:
    """Attention mass per (review, word) over an item's whole timeline.

    A word's score in one review is the mean pooling weight over its
    occurrences there.  Requesting a word that never occurs in any of the
    item's reviews is an error; requesting an unknown item likewise.
    """
    if cfg.variant not in M.LM_VARIANTS:
        raise ValueError(
            f"attention export needs a recurrent content variant, got {cfg.variant!r}"
        )
    words = list(words)
    if not words:
        raise ValueError("no words requested")
    mat = materialize(bundle, "lm")
    if item_id not in mat.items:
        raise ValueError(f"unknown item {item_id!r}")
    tl = mat.items[item_id]
    seen = {w: False for w in words}

    user_states = {}
    for uid in sorted(mat.users):
        _, _, Hs, _, _ = M.roll_entity(params, cfg, mat.users[uid], "user")
        user_states[uid] = Hs
    item_states = {}
    for vid in sorted(mat.items):
        _, _, Hs, _, _ = M.roll_entity(params, cfg, mat.items[vid], "item")
        item_states[vid] = Hs

    records: list[AttentionRecord] = []
    for pos, rid in enumerate(tl.rids):
        g = M.canonical_g(cfg, mat, user_states, item_states, rid)
        token_strs = bundle.reviews[rid].tokens
        alpha = None
        if len(token_strs) > 0:
            _, _, S_words, _ = content_ops.lm_forward(
                tl.token_ids[pos], g, params["shared.emb.table"],
                params["shared.lm.W_x"], params["shared.lm.W_h"],
                params["shared.lm.b"], params["shared.lm.W_out"],
            )
            _, alpha, _ = content_ops.attention_pool(
                S_words, params["shared.attn.M1"], params["shared.attn.b1"],
                params["shared.attn.M2"], params["shared.attn.b2"],
                params["shared.attn.q"],
            )
        for w in words:
            occ = [j for j, t in enumerate(token_strs) if t == w]
            if occ:
                seen[w] = True
                val = float(np.mean(alpha[occ]))
            else:
                val = 0.0
            records.append(AttentionRecord(
                item_id=item_id, review_index=pos, tau_days=float(tl.tau[pos]),
                word=w, alpha=val,
            ))
    missing = [w for w, ok in seen.items() if not ok]
    if missing:
        raise ValueError(
            f"words never occur in reviews of item {item_id!r}: {missing}"
        )
    return records


def export_csv(records: list[AttentionRecord], path) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id", "review_index", "tau_days", "word", "alpha"])
        for r in records:
            writer.writerow([r.item_id, r.review_index, repr(r.tau_days),
                             r.word, repr(r.alpha)])
