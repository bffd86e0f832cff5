"""Held-out metrics for trained models, plus a static rating baseline.

Evaluation rolls every timeline forward with final parameters, then scores
each review against the states that preceded it.  Reviews are bucketed into
train/val/test by their day, so later-period predictions legitimately
consume earlier-period events of any split.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import dynamics as dyn
from . import model as M
from .config import ModelConfig
from .corpus import CorpusBundle, MaterializedCorpus, materialize


@dataclass
class MetricsReport:
    split: str
    n_reviews: int
    mse: float | None
    mae: float | None
    arrival_nll: float | None     # mean per scored gap
    content_nll: float | None     # mean per review
    predicted_gap: float | None   # mean expected next-review gap, user side

    def to_json(self) -> dict:
        return asdict(self)


def evaluate(params, cfg: ModelConfig, bundle: CorpusBundle,
             splits=("train", "val", "test")) -> dict[str, MetricsReport]:
    mat = materialize(bundle, cfg.vocab_kind)
    rolled = M.roll_corpus(params, cfg, mat)

    errors: dict[str, list] = {s: [] for s in splits}
    content: dict[str, list] = {s: [] for s in splits}
    arrival: dict[str, list] = {s: [] for s in splits}
    gaps: dict[str, list] = {s: [] for s in splits}

    for rid in sorted(mat.review_pos):
        split = bundle.split_of_review(rid)
        if split not in errors:
            continue
        yhat = M.predict_rating(params, cfg, mat, rolled, rid)
        errors[split].append(yhat - bundle.reviews[rid].rating)
        if rolled.review_content_nll is not None:
            content[split].append(rolled.review_content_nll[rid])

    pre = "user.intensity."
    for uid in sorted(mat.users):
        tl = mat.users[uid]
        Hs = rolled.user_states[uid]
        if Hs.shape[0] == 0:
            continue
        lam, _ = dyn.intensity_forward(
            Hs, params[pre + "W1"], params[pre + "b1"],
            params[pre + "w2"], params[pre + "b2"],
        )
        for t in range(len(tl)):
            s_here = bundle.splits.split_of(int(tl.tau[t]))
            if s_here in gaps:
                gaps[s_here].append(1.0 / lam[t])
            # state after event t forecasts the gap to event t+1
            if t + 1 < len(tl):
                s_next = bundle.splits.split_of(int(tl.tau[t + 1]))
                if s_next in arrival:
                    nll = float(lam[t] * tl.delta[t + 1] - np.log(lam[t]))
                    arrival[s_next].append(nll)

    out = {}
    for s in splits:
        errs = np.asarray(errors[s])
        out[s] = MetricsReport(
            split=s,
            n_reviews=errs.size,
            mse=float((errs ** 2).mean()) if errs.size else None,
            mae=float(np.abs(errs).mean()) if errs.size else None,
            arrival_nll=float(np.mean(arrival[s])) if arrival[s] else None,
            content_nll=float(np.mean(content[s])) if content[s] else None,
            predicted_gap=float(np.mean(gaps[s])) if gaps[s] else None,
        )
    return out


def split_mse(params, cfg: ModelConfig, mat: MaterializedCorpus,
              split: str) -> float | None:
    """MSE of one split from already-materialized data (epoch-end metric)."""
    rolled = M.roll_corpus(params, cfg, mat)
    bundle = mat.bundle
    errs = []
    for rid in sorted(mat.review_pos):
        if bundle.split_of_review(rid) != split:
            continue
        yhat = M.predict_rating(params, cfg, mat, rolled, rid)
        errs.append(yhat - bundle.reviews[rid].rating)
    if not errs:
        return None
    return float(np.mean(np.square(errs)))


# ---------------------------------------------------------------------------
# Static baseline: biased matrix factorization, no temporal signal

def static_mf_baseline(bundle: CorpusBundle, rank=8, epochs=50, lr=0.02,
                       reg=0.02, seed=0) -> dict[str, float | None]:
    """Per-split MSE of a bias + low-rank model fit on train-split ratings.

    With rank 0 this degenerates to global mean plus user/item biases.
    Entities unseen in training fall back to the fitted global mean.
    """
    rng = np.random.default_rng(seed)
    train = [
        (r.user_id, r.item_id, r.rating)
        for r in bundle.reviews
        if bundle.splits.split_of(r.day) == "train"
    ]
    if not train:
        raise ValueError("static baseline needs at least one training review")
    mu = float(np.mean([r for _, _, r in train]))
    users = sorted({u for u, _, _ in train})
    items = sorted({v for _, v, _ in train})
    u_ix = {u: i for i, u in enumerate(users)}
    v_ix = {v: i for i, v in enumerate(items)}
    b_u = np.zeros(len(users))
    b_v = np.zeros(len(items))
    P = rng.normal(0.0, 0.01, (len(users), rank)) if rank > 0 else None
    Q = rng.normal(0.0, 0.01, (len(items), rank)) if rank > 0 else None

    idx = np.arange(len(train))
    for _ in range(epochs):
        rng.shuffle(idx)
        for k in idx:
            u, v, r = train[k]
            i, j = u_ix[u], v_ix[v]
            pred = mu + b_u[i] + b_v[j]
            if rank > 0:
                pred += P[i] @ Q[j]
            e = r - pred
            b_u[i] += lr * (e - reg * b_u[i])
            b_v[j] += lr * (e - reg * b_v[j])
            if rank > 0:
                pi = P[i].copy()
                P[i] += lr * (e * Q[j] - reg * P[i])
                Q[j] += lr * (e * pi - reg * Q[j])

    def predict(u, v):
        pred = mu
        i = u_ix.get(u)
        j = v_ix.get(v)
        if i is not None:
            pred += b_u[i]
        if j is not None:
            pred += b_v[j]
        if rank > 0 and i is not None and j is not None:
            pred += P[i] @ Q[j]
        return pred

    errs: dict[str, list] = {"train": [], "val": [], "test": []}
    for r in bundle.reviews:
        split = bundle.splits.split_of(r.day)
        errs[split].append(predict(r.user_id, r.item_id) - r.rating)
    return {
        s: (float(np.mean(np.square(e))) if e else None)
        for s, e in errs.items()
    }
