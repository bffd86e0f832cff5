"""Model assembly: parameters, per-timeline passes, freezing, prediction.

Holds the glue between the temporal core, the content models, and the rating
head.  Training alternates sides: while one side's timelines are being
updated, the other side is frozen into a snapshot of per-entity states (and,
for the recurrent content variants, per-review summaries) taken once at
phase start.  Gradients never flow into frozen quantities.

Variant wiring:
  dynamics-only  rating from raw states, no content term
  bow            review counts shift the event embedding on the way in;
                 content term is a unigram softmax conditioned on both states
  lm-causal      rating side mixes each state with the summary of that
                 entity's previous review
  lm-noncausal   rating side mixes in the summary of the review being
                 predicted (deliberate leak, used as a diagnostic upper line)

Pairing rule for review r at day d: the iterated side contributes its state
after its events strictly preceding r in sequence order; the counterpart
contributes its state after its last event on a day strictly before d.  The
concatenation order is always (user, item).
"""

from __future__ import annotations

from dataclasses import dataclass
import hashlib

import numpy as np

from . import content as content_ops
from . import dynamics as dyn
from . import fusion as fus
from .config import ModelConfig
from .corpus import EntityTimeline, MaterializedCorpus, bow_vector

LM_VARIANTS = ("lm-causal", "lm-noncausal")


# ---------------------------------------------------------------------------
# Parameters

def _uniform(rng, shape, fan_in):
    return rng.uniform(-1.0, 1.0, size=shape) / np.sqrt(fan_in)


def init_params(cfg: ModelConfig, rng=None) -> dict[str, np.ndarray]:
    """Fresh parameter dict; names are '<side>.<block>.<tensor>'.

    Matrices start uniform at 1/sqrt(fan_in); forget-gate biases start at 1.
    The raw day/gap weights start much smaller because those inputs are in
    days and can reach the hundreds.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    H, E = cfg.hidden_dim, cfg.event_dim
    S, A, K = cfg.summary_dim, cfg.attention_dim, cfg.fm_rank
    p: dict[str, np.ndarray] = {}
    for side in ("user", "item"):
        p[f"{side}.embed.W_tau"] = rng.uniform(-1, 1, E) * cfg.init_scale * 0.01
        p[f"{side}.embed.W_delta"] = rng.uniform(-1, 1, E) * cfg.init_scale * 0.01
        p[f"{side}.embed.W_y"] = _uniform(rng, (E, cfg.hash_dim), cfg.hash_dim)
        p[f"{side}.embed.b"] = np.zeros(E)
        p[f"{side}.lstm.W_x"] = _uniform(rng, (4 * H, E), E)
        p[f"{side}.lstm.W_h"] = _uniform(rng, (4 * H, H), H)
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0
        p[f"{side}.lstm.b"] = b
        p[f"{side}.intensity.W1"] = _uniform(rng, (H, H), H)
        p[f"{side}.intensity.b1"] = np.zeros(H)
        p[f"{side}.intensity.w2"] = _uniform(rng, (H,), H)
        p[f"{side}.intensity.b2"] = np.zeros(1)
        if cfg.variant == "bow":
            p[f"{side}.fuse.W_s"] = _uniform(rng, (E, cfg.v_bow), cfg.v_bow)
        elif cfg.variant in LM_VARIANTS:
            # start near a pass-through of the raw state
            W = np.concatenate([np.eye(H), np.zeros((H, S))], axis=1)
            W += rng.uniform(-1, 1, (H, H + S)) * cfg.init_scale
            p[f"{side}.fuse.W"] = W
            p[f"{side}.fuse.b"] = np.zeros(H)
    p["shared.fm.w0"] = np.zeros(1)
    p["shared.fm.w_linear"] = _uniform(rng, (2 * H,), 2 * H)
    p["shared.fm.v_factors"] = rng.normal(0.0, cfg.init_scale, (2 * H, K)) / np.sqrt(K)
    if cfg.variant == "bow":
        p["shared.bow.R"] = _uniform(rng, (2 * H, cfg.v_bow), 2 * H)
        p["shared.bow.b"] = np.zeros(cfg.v_bow)
    elif cfg.variant in LM_VARIANTS:
        p["shared.emb.table"] = rng.normal(0.0, cfg.init_scale, (cfg.v_lm, cfg.embed_dim))
        din = cfg.embed_dim + 2 * H
        p["shared.lm.W_x"] = _uniform(rng, (4 * S, din), din)
        p["shared.lm.W_h"] = _uniform(rng, (4 * S, S), S)
        b = np.zeros(4 * S)
        b[S:2 * S] = 1.0
        p["shared.lm.b"] = b
        p["shared.lm.W_out"] = _uniform(rng, (cfg.v_lm, S), S)
        p["shared.attn.M1"] = _uniform(rng, (A, S), S)
        p["shared.attn.b1"] = np.zeros(A)
        p["shared.attn.M2"] = _uniform(rng, (A, S), S)
        p["shared.attn.b2"] = np.zeros(A)
        p["shared.attn.q"] = _uniform(rng, (A,), A)
    return p


def active_param_names(params: dict, cfg: ModelConfig, phase: str) -> set[str]:
    """Names updated during a phase: the phase's side plus shared blocks."""
    if phase not in ("user", "item"):
        raise ValueError(f"unknown phase {phase!r}")
    active = set()
    for name in params:
        if name.startswith(phase + "."):
            active.add(name)
        elif name.startswith("shared."):
            if name == "shared.emb.table":
                if cfg.train_embeddings:
                    active.add(name)
            elif name.startswith(("shared.bow.", "shared.lm.", "shared.attn.")):
                if not cfg.freeze_content:
                    active.add(name)
            else:
                active.add(name)
    return active


def _acc(grads: dict, name: str, value) -> None:
    # only names pre-created by the caller receive gradient
    if name in grads:
        grads[name] += value


# ---------------------------------------------------------------------------
# Rolling entity states

def entity_inputs(params, cfg, tl: EntityTimeline, side: str):
    """LSTM inputs for one timeline: embedded events, count-shifted for bow."""
    pre = f"{side}.embed."
    Z = dyn.embed_events(
        tl.tau, tl.delta, tl.y_hashed,
        params[pre + "W_tau"], params[pre + "W_delta"],
        params[pre + "W_y"], params[pre + "b"],
    )
    counts = None
    if cfg.variant == "bow":
        counts = np.zeros((len(tl.token_ids), cfg.v_bow))
        for t, toks in enumerate(tl.token_ids):
            counts[t] = bow_vector(toks, cfg.v_bow)
        Z = Z + counts @ params[f"{side}.fuse.W_s"].T
    return Z, counts


def roll_entity(params, cfg, tl: EntityTimeline, side: str):
    """Full forward caches for one timeline: (Z_in, counts, Hs, Cs, G)."""
    Z, counts = entity_inputs(params, cfg, tl, side)
    Hs, Cs, G = dyn.lstm_seq_forward(
        Z, params[f"{side}.lstm.W_x"], params[f"{side}.lstm.W_h"],
        params[f"{side}.lstm.b"],
    )
    return Z, counts, Hs, Cs, G


def counterpart_cutoff(other_tl: EntityTimeline, day: float) -> int:
    """Number of the counterpart's events on days strictly before `day`."""
    return int(np.searchsorted(other_tl.tau, day, side="left"))


# ---------------------------------------------------------------------------
# Frozen-side snapshot

@dataclass
class FrozenSnapshot:
    """Constants standing in for the non-updated side during one phase."""
    frozen_side: str
    states: dict[str, np.ndarray]              # entity -> [T, H]
    summaries: dict[str, np.ndarray] | None    # entity -> [T, S], lm variants

    def digest(self) -> str:
        """Stable hash of every array byte; phase-freeze audits compare this."""
        h = hashlib.sha256()
        h.update(self.frozen_side.encode())
        for eid in sorted(self.states):
            h.update(eid.encode())
            h.update(np.ascontiguousarray(self.states[eid]).tobytes())
        if self.summaries is not None:
            for eid in sorted(self.summaries):
                h.update(eid.encode())
                h.update(np.ascontiguousarray(self.summaries[eid]).tobytes())
        return h.hexdigest()


def build_frozen_snapshot(params, cfg, mat: MaterializedCorpus,
                          frozen_side: str) -> FrozenSnapshot:
    """Roll the frozen side once with current parameters.

    For the recurrent content variants this also fixes each frozen review's
    summary, which needs both sides' states; the active side's states used
    here are phase-start constants and receive no gradient.
    """
    frozen_map = mat.users if frozen_side == "user" else mat.items
    states = {}
    for eid in sorted(frozen_map):
        _, _, Hs, _, _ = roll_entity(params, cfg, frozen_map[eid], frozen_side)
        states[eid] = Hs
    summaries = None
    if cfg.variant in LM_VARIANTS:
        active_side = "item" if frozen_side == "user" else "user"
        active_map = mat.items if frozen_side == "user" else mat.users
        active_states = {}
        for eid in sorted(active_map):
            _, _, Hs, _, _ = roll_entity(params, cfg, active_map[eid], active_side)
            active_states[eid] = Hs
        H, S = cfg.hidden_dim, cfg.summary_dim
        summaries = {
            eid: np.zeros((frozen_map[eid].tau.shape[0], S)) for eid in frozen_map
        }
        for eid in sorted(frozen_map):
            tl = frozen_map[eid]
            for pos, rid in enumerate(tl.rids):
                uid, upos, vid, ipos = mat.review_pos[rid]
                day = tl.tau[pos]
                # frozen side by sequence position, counterpart by day cutoff
                if frozen_side == "user":
                    h_f = states[uid][upos - 1] if upos > 0 else np.zeros(H)
                    cut = counterpart_cutoff(mat.items[vid], day)
                    h_a = active_states[vid][cut - 1] if cut > 0 else np.zeros(H)
                    g = np.concatenate([h_f, h_a])
                else:
                    h_f = states[vid][ipos - 1] if ipos > 0 else np.zeros(H)
                    cut = counterpart_cutoff(mat.users[uid], day)
                    h_a = active_states[uid][cut - 1] if cut > 0 else np.zeros(H)
                    g = np.concatenate([h_a, h_f])
                sb = _review_summary(params, cfg, tl.token_ids[pos], g)
                summaries[eid][pos] = sb
    return FrozenSnapshot(frozen_side=frozen_side, states=states,
                          summaries=summaries)


def _review_summary(params, cfg, token_ids, g):
    """Pooled summary of one review given the pairing context (no caches)."""
    if len(token_ids) == 0:
        return np.zeros(cfg.summary_dim)
    _, _, S_words, _ = content_ops.lm_forward(
        token_ids, g, params["shared.emb.table"], params["shared.lm.W_x"],
        params["shared.lm.W_h"], params["shared.lm.b"], params["shared.lm.W_out"],
    )
    sbar, _, _ = content_ops.attention_pool(
        S_words, params["shared.attn.M1"], params["shared.attn.b1"],
        params["shared.attn.M2"], params["shared.attn.b2"], params["shared.attn.q"],
    )
    return sbar


def frozen_lookup_for_timeline(snap: FrozenSnapshot, mat: MaterializedCorpus,
                               cfg, active_side: str, tl: EntityTimeline):
    """Per-event frozen constants for one active timeline.

    Returns (frozen_h [T, H], frozen_sbar_prev [T, S] or None): counterpart
    state after its last event strictly before each review's day, and the
    matching previous-review summary.
    """
    H, S = cfg.hidden_dim, cfg.summary_dim
    other_map = mat.items if active_side == "user" else mat.users
    T = tl.tau.shape[0]
    fh = np.zeros((T, H))
    fs = np.zeros((T, S)) if snap.summaries is not None else None
    for t, rid in enumerate(tl.rids):
        uid, _, vid, _ = mat.review_pos[rid]
        other_id = vid if active_side == "user" else uid
        cut = counterpart_cutoff(other_map[other_id], tl.tau[t])
        if cut > 0:
            fh[t] = snap.states[other_id][cut - 1]
            if fs is not None:
                fs[t] = snap.summaries[other_id][cut - 1]
    return fh, fs


# ---------------------------------------------------------------------------
# Training passes over one active timeline

@dataclass
class TimelineCache:
    side: str
    tl: EntityTimeline
    frozen_h: np.ndarray
    frozen_sbar: np.ndarray | None
    Z_in: np.ndarray
    counts: np.ndarray | None
    Hs: np.ndarray
    Cs: np.ndarray
    G: np.ndarray
    h_before: np.ndarray
    g: np.ndarray
    lam: np.ndarray | None
    int_cache: tuple | None
    arrival_nll: np.ndarray
    content_nll: np.ndarray
    bow_caches: list | None
    lm_caches: list | None
    S_words: list | None
    attn_caches: list | None
    sbar: np.ndarray | None
    sbar_used: np.ndarray | None
    x: np.ndarray
    fm_s: np.ndarray
    yhat: np.ndarray
    sq_err: np.ndarray


def forward_timeline(params, cfg, tl: EntityTimeline, side: str,
                     frozen_h, frozen_sbar) -> TimelineCache:
    T = tl.tau.shape[0]
    H, S = cfg.hidden_dim, cfg.summary_dim
    Z_in, counts = entity_inputs(params, cfg, tl, side)
    Hs, Cs, G = dyn.lstm_seq_forward(
        Z_in, params[f"{side}.lstm.W_x"], params[f"{side}.lstm.W_h"],
        params[f"{side}.lstm.b"],
    )
    h_before = np.zeros((T, H))
    if T > 1:
        h_before[1:] = Hs[:-1]
    if side == "user":
        g = np.concatenate([h_before, frozen_h], axis=1)
    else:
        g = np.concatenate([frozen_h, h_before], axis=1)

    lam, int_cache = None, None
    arrival = np.zeros(0)
    if T >= 2:
        pre = f"{side}.intensity."
        lam, int_cache = dyn.intensity_forward(
            Hs[:-1], params[pre + "W1"], params[pre + "b1"],
            params[pre + "w2"], params[pre + "b2"],
        )
        arrival = dyn.nll_exponential(lam, tl.delta[1:])

    content_nll = np.zeros(T)
    bow_caches = lm_caches = S_words = attn_caches = None
    sbar = None
    if cfg.variant == "bow":
        bow_caches = []
        R, bv = params["shared.bow.R"], params["shared.bow.b"]
        for t in range(T):
            nll, cache = content_ops.bow_nll(g[t], counts[t], R, bv)
            content_nll[t] = nll
            bow_caches.append(cache)
    elif cfg.variant in LM_VARIANTS:
        lm_caches, S_words, attn_caches = [], [], []
        sbar = np.zeros((T, S))
        for t in range(T):
            nll, _, Sw, cache = content_ops.lm_forward(
                tl.token_ids[t], g[t], params["shared.emb.table"],
                params["shared.lm.W_x"], params["shared.lm.W_h"],
                params["shared.lm.b"], params["shared.lm.W_out"],
            )
            content_nll[t] = nll
            lm_caches.append(cache)
            S_words.append(Sw)
            if Sw.shape[0] > 0:
                sb, _, ac = content_ops.attention_pool(
                    Sw, params["shared.attn.M1"], params["shared.attn.b1"],
                    params["shared.attn.M2"], params["shared.attn.b2"],
                    params["shared.attn.q"],
                )
                sbar[t] = sb
                attn_caches.append(ac)
            else:
                attn_caches.append(None)

    sbar_used = None
    if cfg.variant in ("dynamics-only", "bow"):
        h_tilde_a, h_tilde_f = h_before, frozen_h
    else:
        W_a, b_a = params[f"{side}.fuse.W"], params[f"{side}.fuse.b"]
        other = "item" if side == "user" else "user"
        W_f, b_f = params[f"{other}.fuse.W"], params[f"{other}.fuse.b"]
        if cfg.variant == "lm-causal":
            sbar_used = np.zeros((T, S))
            if T > 1:
                sbar_used[1:] = sbar[:-1]
            f_sbar = frozen_sbar
        else:
            sbar_used = sbar
            f_sbar = sbar  # the frozen side also reads the current summary
        h_tilde_a = h_before @ W_a[:, :H].T + sbar_used @ W_a[:, H:].T + b_a
        h_tilde_f = frozen_h @ W_f[:, :H].T + f_sbar @ W_f[:, H:].T + b_f
    if side == "user":
        x = np.concatenate([h_tilde_a, h_tilde_f], axis=1)
    else:
        x = np.concatenate([h_tilde_f, h_tilde_a], axis=1)
    yhat, fm_s = fus.fm_forward_batch(
        x, params["shared.fm.w0"], params["shared.fm.w_linear"],
        params["shared.fm.v_factors"],
    )
    sq_err = (yhat - tl.ratings) ** 2
    return TimelineCache(
        side=side, tl=tl, frozen_h=frozen_h, frozen_sbar=frozen_sbar,
        Z_in=Z_in, counts=counts, Hs=Hs, Cs=Cs, G=G, h_before=h_before, g=g,
        lam=lam, int_cache=int_cache, arrival_nll=arrival,
        content_nll=content_nll, bow_caches=bow_caches, lm_caches=lm_caches,
        S_words=S_words, attn_caches=attn_caches, sbar=sbar,
        sbar_used=sbar_used, x=x, fm_s=fm_s, yhat=yhat, sq_err=sq_err,
    )


def backward_timeline(params, cfg, cache: TimelineCache, d_yhat,
                      scale_arrival, scale_content, grads) -> None:
    """Accumulate gradients for one timeline into `grads` (in place).

    Only keys already present in `grads` are touched, so the caller controls
    the active set.  `d_yhat` is the loss gradient w.r.t. each prediction.
    """
    side, tl = cache.side, cache.tl
    T = tl.tau.shape[0]
    H, S = cfg.hidden_dim, cfg.summary_dim
    a_slice = slice(0, H) if side == "user" else slice(H, 2 * H)
    f_slice = slice(H, 2 * H) if side == "user" else slice(0, H)

    dX_fm, fm_grads = fus.fm_backward_batch(
        d_yhat, cache.x, params["shared.fm.w_linear"],
        params["shared.fm.v_factors"], cache.fm_s,
    )
    for k, v in fm_grads.items():
        _acc(grads, f"shared.fm.{k}", v)
    dh_t_a = dX_fm[:, a_slice]
    dh_t_f = dX_fm[:, f_slice]

    dH_ext = np.zeros((T, H))
    dsbar_buf = np.zeros((T, S)) if cfg.variant in LM_VARIANTS else None

    if cfg.variant in ("dynamics-only", "bow"):
        dh_before = dh_t_a
    else:
        W_a = params[f"{side}.fuse.W"]
        dh_before = dh_t_a @ W_a[:, :H]
        dsb_used = dh_t_a @ W_a[:, H:]
        _acc(grads, f"{side}.fuse.W",
             dh_t_a.T @ np.concatenate([cache.h_before, cache.sbar_used], axis=1))
        _acc(grads, f"{side}.fuse.b", dh_t_a.sum(axis=0))
        if cfg.variant == "lm-causal":
            if T > 1:
                dsbar_buf[:-1] += dsb_used[1:]
        else:
            dsbar_buf += dsb_used
            other = "item" if side == "user" else "user"
            W_f = params[f"{other}.fuse.W"]
            # frozen weights are constants; only the summary path is live
            dsbar_buf += dh_t_f @ W_f[:, H:]
    if T > 1:
        dH_ext[:T - 1] += dh_before[1:]

    if cfg.variant == "bow":
        R = params["shared.bow.R"]
        for t in range(T):
            dg, cgr = content_ops.bow_nll_backward(
                scale_content, cache.g[t], cache.counts[t], R, cache.bow_caches[t]
            )
            _acc(grads, "shared.bow.R", cgr["R"])
            _acc(grads, "shared.bow.b", cgr["b"])
            if t > 0:
                dH_ext[t - 1] += dg[a_slice]
    elif cfg.variant in LM_VARIANTS:
        want_emb = "shared.emb.table" in grads
        table = params["shared.emb.table"]
        for t in range(T):
            toks = tl.token_ids[t]
            if len(toks) == 0:
                continue
            dSw, agr = content_ops.attention_pool_backward(
                dsbar_buf[t], cache.S_words[t], params["shared.attn.M1"],
                params["shared.attn.M2"], params["shared.attn.q"],
                cache.attn_caches[t],
            )
            for k, v in agr.items():
                _acc(grads, f"shared.attn.{k}", v)
            dg, lgr, emb_upd = content_ops.lm_backward(
                scale_content, dSw, cache.g[t], table,
                params["shared.lm.W_x"], params["shared.lm.W_h"],
                params["shared.lm.b"], params["shared.lm.W_out"],
                toks, cache.lm_caches[t], train_embeddings=want_emb,
            )
            for k, v in lgr.items():
                _acc(grads, f"shared.lm.{k}", v)
            if want_emb and emb_upd is not None:
                ids, dE = emb_upd
                np.add.at(grads["shared.emb.table"], ids, dE)
            if t > 0:
                dH_ext[t - 1] += dg[a_slice]

    if T >= 2 and cache.lam is not None:
        dlam = scale_arrival * dyn.nll_exponential_grad(cache.lam, tl.delta[1:])
        pre = f"{side}.intensity."
        dHs_arr, igr = dyn.intensity_backward(
            dlam, cache.Hs[:-1], params[pre + "W1"], params[pre + "w2"],
            cache.int_cache,
        )
        for k, v in igr.items():
            _acc(grads, pre + k, v)
        dH_ext[:T - 1] += dHs_arr

    dZ, lstm_grads = dyn.lstm_seq_backward(
        cache.Z_in, params[f"{side}.lstm.W_x"], params[f"{side}.lstm.W_h"],
        None, None, cache.Hs, cache.Cs, cache.G, dH_ext,
        window=cfg.tbptt_window,
    )
    for k, v in lstm_grads.items():
        _acc(grads, f"{side}.lstm.{k}", v)
    if cfg.variant == "bow":
        _acc(grads, f"{side}.fuse.W_s", dZ.T @ cache.counts)
    egr = dyn.embed_events_backward(dZ, tl.tau, tl.delta, tl.y_hashed)
    for k, v in egr.items():
        _acc(grads, f"{side}.embed.{k}", v)


# ---------------------------------------------------------------------------
# Inference over the whole corpus

@dataclass
class RolledStates:
    """Final states and per-review summaries under the canonical pairing."""
    user_states: dict[str, np.ndarray]
    item_states: dict[str, np.ndarray]
    user_summaries: dict[str, np.ndarray] | None
    item_summaries: dict[str, np.ndarray] | None
    review_summary: dict[int, np.ndarray] | None
    review_content_nll: dict[int, float] | None


def roll_corpus(params, cfg, mat: MaterializedCorpus) -> RolledStates:
    H, S = cfg.hidden_dim, cfg.summary_dim
    user_states = {}
    for uid in sorted(mat.users):
        _, _, Hs, _, _ = roll_entity(params, cfg, mat.users[uid], "user")
        user_states[uid] = Hs
    item_states = {}
    for vid in sorted(mat.items):
        _, _, Hs, _, _ = roll_entity(params, cfg, mat.items[vid], "item")
        item_states[vid] = Hs

    user_sum = item_sum = review_summary = review_nll = None
    if cfg.variant == "bow":
        review_nll = {}
        R, bv = params["shared.bow.R"], params["shared.bow.b"]
        for uid in sorted(mat.users):
            tl = mat.users[uid]
            for pos, rid in enumerate(tl.rids):
                g = canonical_g(cfg, mat, user_states, item_states, rid)
                counts = bow_vector(tl.token_ids[pos], cfg.v_bow)
                nll, _ = content_ops.bow_nll(g, counts, R, bv)
                review_nll[rid] = nll
    elif cfg.variant in LM_VARIANTS:
        review_nll = {}
        review_summary = {}
        user_sum = {uid: np.zeros((mat.users[uid].tau.shape[0], S))
                    for uid in mat.users}
        item_sum = {vid: np.zeros((mat.items[vid].tau.shape[0], S))
                    for vid in mat.items}
        for uid in sorted(mat.users):
            tl = mat.users[uid]
            for pos, rid in enumerate(tl.rids):
                g = canonical_g(cfg, mat, user_states, item_states, rid)
                nll, _, S_words, _ = content_ops.lm_forward(
                    tl.token_ids[pos], g, params["shared.emb.table"],
                    params["shared.lm.W_x"], params["shared.lm.W_h"],
                    params["shared.lm.b"], params["shared.lm.W_out"],
                )
                review_nll[rid] = nll
                if S_words.shape[0] > 0:
                    sb, _, _ = content_ops.attention_pool(
                        S_words, params["shared.attn.M1"], params["shared.attn.b1"],
                        params["shared.attn.M2"], params["shared.attn.b2"],
                        params["shared.attn.q"],
                    )
                else:
                    sb = np.zeros(S)
                review_summary[rid] = sb
                _, upos, vid, ipos = mat.review_pos[rid]
                user_sum[uid][upos] = sb
                item_sum[vid][ipos] = sb
    return RolledStates(
        user_states=user_states, item_states=item_states,
        user_summaries=user_sum, item_summaries=item_sum,
        review_summary=review_summary, review_content_nll=review_nll,
    )


def canonical_g(cfg, mat, user_states, item_states, rid):
    uid, upos, vid, _ = mat.review_pos[rid]
    day = mat.users[uid].tau[upos]
    cut = counterpart_cutoff(mat.items[vid], day)
    H = cfg.hidden_dim
    h_u = user_states[uid][upos - 1] if upos > 0 else np.zeros(H)
    h_v = item_states[vid][cut - 1] if cut > 0 else np.zeros(H)
    return np.concatenate([h_u, h_v])


def predict_rating(params, cfg, mat: MaterializedCorpus,
                   rolled: RolledStates, rid: int) -> float:
    """Rating for one review from states strictly preceding it (per variant)."""
    uid, upos, vid, _ = mat.review_pos[rid]
    day = mat.users[uid].tau[upos]
    cut = counterpart_cutoff(mat.items[vid], day)
    H, S = cfg.hidden_dim, cfg.summary_dim
    h_u = rolled.user_states[uid][upos - 1] if upos > 0 else np.zeros(H)
    h_v = rolled.item_states[vid][cut - 1] if cut > 0 else np.zeros(H)
    if cfg.variant in ("dynamics-only", "bow"):
        x_u, x_v = h_u, h_v
    else:
        if cfg.variant == "lm-causal":
            sb_u = (rolled.user_summaries[uid][upos - 1] if upos > 0
                    else np.zeros(S))
            sb_v = (rolled.item_summaries[vid][cut - 1] if cut > 0
                    else np.zeros(S))
        else:
            sb_u = sb_v = rolled.review_summary[rid]
        x_u = fus.fuse_lm(h_u, sb_u, params["user.fuse.W"], params["user.fuse.b"])
        x_v = fus.fuse_lm(h_v, sb_v, params["item.fuse.W"], params["item.fuse.b"])
    x = np.concatenate([x_u, x_v])
    yhat, _ = fus.fm_forward(
        x, params["shared.fm.w0"], params["shared.fm.w_linear"],
        params["shared.fm.v_factors"],
    )
    return yhat


def predicted_gaps(params, cfg, rolled: RolledStates, side="user") -> np.ndarray:
    """Expected next-review gap 1/rate at every state of every entity."""
    states = rolled.user_states if side == "user" else rolled.item_states
    pre = f"{side}.intensity."
    out = []
    for eid in sorted(states):
        Hs = states[eid]
        if Hs.shape[0] == 0:
            continue
        lam, _ = dyn.intensity_forward(
            Hs, params[pre + "W1"], params[pre + "b1"],
            params[pre + "w2"], params[pre + "b2"],
        )
        out.append(1.0 / lam)
    if not out:
        return np.zeros(0)
    return np.concatenate(out)
