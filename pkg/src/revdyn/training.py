"""Alternating two-sided training, gradients API, and checkpoints.

Epochs alternate between a user phase and an item phase.  At each phase
boundary the non-updated side is frozen into a snapshot (states and, for the
recurrent content variants, per-review summaries); batches of active
timelines then get exact gradients and one Adam step each.  Only events in
the training split are ever touched during optimization.
"""

from __future__ import annotations

import hashlib
import io
import json
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import model as M
from .config import ModelConfig
from .content import load_embeddings
from .corpus import CorpusBundle, EntityTimeline, MaterializedCorpus, materialize
from .fusion import total_loss


class TrainingError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Optimizer

class Adam:
    """Per-tensor Adam with bias correction, state keyed by parameter name."""

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t: dict[str, int] = {}

    def step(self, params: dict, grads: dict) -> None:
        # sorted order so identical runs apply identical update sequences
        for name in sorted(grads):
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
                self.t[name] = 0
            self.t[name] += 1
            t = self.t[name]
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / (1 - self.beta1 ** t)
            v_hat = self.v[name] / (1 - self.beta2 ** t)
            if self.weight_decay > 0.0:
                # decoupled shrinkage, kept out of the gradient and the loss
                params[name] *= 1.0 - self.lr * self.weight_decay
            params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# ---------------------------------------------------------------------------
# Training-split views

def truncate_timeline(tl: EntityTimeline, max_day: float) -> EntityTimeline:
    """Prefix of a timeline with events on days <= max_day."""
    n = int(np.searchsorted(tl.tau, max_day, side="right"))
    if n == len(tl):
        return tl
    return EntityTimeline(
        kind=tl.kind, entity_id=tl.entity_id, rids=tl.rids[:n],
        tau=tl.tau[:n], delta=tl.delta[:n], ratings=tl.ratings[:n],
        y_hashed=tl.y_hashed[:n], token_ids=tl.token_ids[:n],
    )


def truncate_corpus(mat: MaterializedCorpus, max_day: float) -> MaterializedCorpus:
    """Corpus view whose timelines stop at max_day; empty timelines are kept
    so counterpart lookups still resolve (to the zero state)."""
    return MaterializedCorpus(
        bundle=mat.bundle,
        vocab=mat.vocab,
        users={k: truncate_timeline(v, max_day) for k, v in mat.users.items()},
        items={k: truncate_timeline(v, max_day) for k, v in mat.items.items()},
        review_pos=mat.review_pos,
    )


# ---------------------------------------------------------------------------
# One batch of active timelines = one optimizer step

def phase_batch_pass(params, cfg, mat, snapshot, side, entity_ids, grads):
    """Forward and backward over one batch of the active side's timelines.

    The squared-error term is averaged over the batch's events; the
    likelihood terms follow cfg.normalize_nll with batch-level counts.
    Gradients accumulate into `grads` (only for keys already present).
    Returns (loss, stats dict).
    """
    act_map = mat.users if side == "user" else mat.items
    tls = [act_map[e] for e in entity_ids if len(act_map[e]) > 0]
    stats = {"n_events": 0, "sq_sum": 0.0, "arrival_sum": 0.0, "content_sum": 0.0}
    if not tls:
        return 0.0, stats
    n_ev = sum(len(t) for t in tls)
    n_arr = sum(max(len(t) - 1, 0) for t in tls)
    caches = []
    for tl in tls:
        fh, fs = M.frozen_lookup_for_timeline(snapshot, mat, cfg, side, tl)
        caches.append(M.forward_timeline(params, cfg, tl, side, fh, fs))
    sq = np.concatenate([c.sq_err for c in caches])
    arr = (np.concatenate([c.arrival_nll for c in caches])
           if n_arr > 0 else np.zeros(0))
    con = np.concatenate([c.content_nll for c in caches])
    loss = total_loss(sq, arr, con, cfg.lambda_arrival, cfg.lambda_content,
                      normalize_nll=cfg.normalize_nll)

    scale_arr = cfg.lambda_arrival
    if cfg.normalize_nll and n_arr > 0:
        scale_arr /= n_arr
    scale_con = cfg.lambda_content if cfg.uses_text else 0.0
    if cfg.normalize_nll and n_ev > 0:
        scale_con /= n_ev
    for c in caches:
        d_yhat = 2.0 * (c.yhat - c.tl.ratings) / n_ev
        M.backward_timeline(params, cfg, c, d_yhat, scale_arr, scale_con, grads)
    stats = {
        "n_events": n_ev,
        "sq_sum": float(sq.sum()),
        "arrival_sum": float(arr.sum()),
        "content_sum": float(con.sum()),
    }
    return loss, stats


def objective_and_grads(params, cfg, mat, snapshot, side, entity_ids=None,
                        names=None):
    """Phase objective and exact gradients over a fixed set of timelines.

    Treats the whole entity set as a single batch; this is the function the
    finite-difference audits probe.
    """
    if entity_ids is None:
        act_map = mat.users if side == "user" else mat.items
        entity_ids = sorted(act_map)
    if names is None:
        names = M.active_param_names(params, cfg, side)
    grads = {n: np.zeros_like(params[n]) for n in names}
    loss, _ = phase_batch_pass(params, cfg, mat, snapshot, side, entity_ids, grads)
    return loss, grads


# ---------------------------------------------------------------------------
# Digests for freeze audits and reproducibility checks

def params_digest(params: dict, names=None) -> str:
    h = hashlib.sha256()
    for name in sorted(names if names is not None else params):
        h.update(name.encode())
        h.update(np.ascontiguousarray(params[name]).tobytes())
    return h.hexdigest()


def clone_params(params: dict) -> dict:
    return {k: v.copy() for k, v in params.items()}


# ---------------------------------------------------------------------------
# The alternating loop

@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    config: ModelConfig
    history: list[dict]


def align_config(cfg: ModelConfig, bundle: CorpusBundle) -> ModelConfig:
    """Match the config's vocabulary and hashing dims to a prepared bundle."""
    return cfg.replace(
        v_bow=bundle.vocab_bow.size,
        v_lm=bundle.vocab_lm.size,
        hash_dim=bundle.hash_dim,
    )


def _check_bundle_compat(cfg: ModelConfig, bundle: CorpusBundle) -> None:
    if cfg.hash_dim != bundle.hash_dim:
        raise TrainingError(
            f"config hash_dim {cfg.hash_dim} != corpus hash_dim {bundle.hash_dim}"
        )
    if cfg.variant == "bow" and cfg.v_bow < bundle.vocab_bow.size:
        raise TrainingError(
            f"config v_bow {cfg.v_bow} smaller than corpus vocabulary "
            f"{bundle.vocab_bow.size}"
        )
    if cfg.variant in M.LM_VARIANTS and cfg.v_lm < bundle.vocab_lm.size:
        raise TrainingError(
            f"config v_lm {cfg.v_lm} smaller than corpus vocabulary "
            f"{bundle.vocab_lm.size}"
        )


def _phase_of_epoch(cfg: ModelConfig, epoch: int) -> str:
    return ("user", "item")[(epoch // cfg.epochs_per_phase) % 2]


def train(bundle: CorpusBundle, cfg: ModelConfig, out_dir=None, log=None,
          eval_val=True) -> TrainResult:
    """Run the full alternating schedule on a prepared corpus.

    Writes metrics.jsonl, config.json and checkpoint.npz under `out_dir`
    when given.  Aborts on a non-finite loss rather than training through it.
    """
    from .evaluate import split_mse  # local import, avoids a cycle

    _check_bundle_compat(cfg, bundle)
    mat = materialize(bundle, cfg.vocab_kind)
    train_mat = truncate_corpus(mat, bundle.splits.train_end_day)
    params = M.init_params(cfg)
    if cfg.variant in M.LM_VARIANTS and cfg.embeddings_path:
        params["shared.emb.table"] = load_embeddings(
            cfg.embeddings_path, bundle.vocab_lm, cfg.embed_dim, cfg.seed,
            cfg.init_scale,
        )
    opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay)
    history: list[dict] = []
    out_dir = Path(out_dir) if out_dir is not None else None
    metrics_fh = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        cfg.save(out_dir / "config.json")
        metrics_fh = open(out_dir / "metrics.jsonl", "w", encoding="utf-8")
    try:
        snapshot = None
        prev_phase = None
        for epoch in range(cfg.epochs):
            t_start = time.perf_counter()
            phase = _phase_of_epoch(cfg, epoch)
            if phase != prev_phase:
                frozen_side = "item" if phase == "user" else "user"
                snapshot = M.build_frozen_snapshot(params, cfg, train_mat,
                                                   frozen_side)
                prev_phase = phase
            act_map = train_mat.users if phase == "user" else train_mat.items
            ids = [e for e in sorted(act_map) if len(act_map[e]) > 0]
            rng = np.random.default_rng((cfg.seed, epoch))
            order = [ids[i] for i in rng.permutation(len(ids))]
            active = M.active_param_names(params, cfg, phase)
            agg = {"n_events": 0, "sq_sum": 0.0, "arrival_sum": 0.0,
                   "content_sum": 0.0, "loss_sum": 0.0, "n_batches": 0}
            for start in range(0, len(order), cfg.batch_size):
                batch = order[start:start + cfg.batch_size]
                grads = {n: np.zeros_like(params[n]) for n in active}
                loss, stats = phase_batch_pass(
                    params, cfg, train_mat, snapshot, phase, batch, grads)
                if not np.isfinite(loss):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                    )
                opt.step(params, grads)
                agg["loss_sum"] += loss
                agg["n_batches"] += 1
                for k in ("n_events", "sq_sum", "arrival_sum", "content_sum"):
                    agg[k] += stats[k]
            record = {
                "epoch": epoch,
                "phase": phase,
                "loss": agg["loss_sum"] / max(agg["n_batches"], 1),
                "train_mse": agg["sq_sum"] / max(agg["n_events"], 1),
                "arrival_nll": agg["arrival_sum"] / max(agg["n_events"], 1),
                "content_nll": agg["content_sum"] / max(agg["n_events"], 1),
                "seconds": time.perf_counter() - t_start,
            }
            if eval_val:
                record["val_mse"] = split_mse(params, cfg, mat, "val")
            history.append(record)
            if metrics_fh is not None:
                metrics_fh.write(json.dumps(record) + "\n")
                metrics_fh.flush()
            if log is not None:
                log(json.dumps(record))
    finally:
        if metrics_fh is not None:
            metrics_fh.close()
    if out_dir is not None:
        save_checkpoint(out_dir / "checkpoint.npz", params, cfg, opt)
    return TrainResult(params=params, config=cfg, history=history)


# ---------------------------------------------------------------------------
# Checkpoints

def save_checkpoint(path, params: dict, cfg: ModelConfig, opt: Adam | None = None):
    """Single-file archive of parameters, config, and optimizer moments.

    Key order is sorted so identical states produce identical bytes.
    """
    arrays: dict[str, np.ndarray] = {}
    for k in sorted(params):
        arrays[f"param::{k}"] = params[k]
    if opt is not None:
        for k in sorted(opt.m):
            arrays[f"adam_m::{k}"] = opt.m[k]
            arrays[f"adam_v::{k}"] = opt.v[k]
            arrays[f"adam_t::{k}"] = np.asarray([opt.t[k]], dtype=np.int64)
    arrays["meta::config"] = np.asarray(json.dumps(cfg.to_json(), sort_keys=True))
    arrays["meta::config_hash"] = np.asarray(cfg.content_hash())
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path, expected_config: ModelConfig | None = None):
    """Returns (params, config, opt_or_None).

    A parameter whose shape disagrees with the stored config's layout is a
    hard error naming the tensor; a config-hash mismatch against
    `expected_config` only warns, since hyperparameters like epoch counts do
    not affect weight shapes.
    """
    with np.load(path, allow_pickle=False) as z:
        cfg = ModelConfig.from_json(json.loads(str(z["meta::config"][()])))
        stored_hash = str(z["meta::config_hash"][()])
        params = {}
        opt_m, opt_v, opt_t = {}, {}, {}
        for key in z.files:
            if key.startswith("param::"):
                params[key[len("param::"):]] = z[key]
            elif key.startswith("adam_m::"):
                opt_m[key[len("adam_m::"):]] = z[key]
            elif key.startswith("adam_v::"):
                opt_v[key[len("adam_v::"):]] = z[key]
            elif key.startswith("adam_t::"):
                opt_t[key[len("adam_t::"):]] = int(z[key][0])
    reference = M.init_params(cfg)
    for name, ref in reference.items():
        if name not in params:
            raise TrainingError(f"checkpoint missing parameter {name!r}")
        if params[name].shape != ref.shape:
            raise TrainingError(
                f"checkpoint parameter {name!r} has shape {params[name].shape}, "
                f"expected {ref.shape}"
            )
    if expected_config is not None and expected_config.content_hash() != stored_hash:
        warnings.warn(
            "checkpoint was saved under a different configuration "
            f"(stored hash {stored_hash[:12]}..)", stacklevel=2,
        )
    opt = None
    if opt_m:
        opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay)
        opt.m, opt.v, opt.t = opt_m, opt_v, opt_t
    return params, cfg, opt


def checkpoint_bytes(params: dict, cfg: ModelConfig, opt: Adam | None = None) -> bytes:
    buf = io.BytesIO()
    arrays: dict[str, np.ndarray] = {}
    for k in sorted(params):
        arrays[f"param::{k}"] = params[k]
    arrays["meta::config"] = np.asarray(json.dumps(cfg.to_json(), sort_keys=True))
    arrays["meta::config_hash"] = np.asarray(cfg.content_hash())
    np.savez(buf, **arrays)
    return buf.getvalue()
