"""Couples the two autoencoders through triple scoring.

Cluster posteriors turn into (numerically one-hot) selection vectors via a
temperature-scaled softmax; selecting rows of the live mixture-mean
matrices yields cluster-level representations, scored holographically by
circular correlation under negative sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError
from .vade import VaeParams

SCORE_HOLE = "hole"
SCORE_TRANSE = "transe"
LOSS_BCE = "bce"
LOSS_MARGIN = "margin"


@dataclass(frozen=True)
class SoftArgmaxConfig:
    tau: float = 1e5

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class NegSampleConfig:
    num_negatives: int = 20

    def __post_init__(self):
        if self.num_negatives < 1:
            raise ValueError("need at least one negative sample")


@dataclass
class ClusterRepresentations:
    """Rows are the live mixture means (shared storage, not copies)."""
    m_e: Tensor
    m_r: Tensor

    @classmethod
    def from_models(cls, vae_e: VaeParams, vae_r: VaeParams):
        return cls(vae_e.gmm.means, vae_r.gmm.means)


def soft_argmax(c: Tensor, tau: float) -> Tensor:
    """Shift-stable softmax of tau * c; large tau makes the output one-hot."""
    return ad.softmax(ad.mul(c, tau), axis=-1)


def select_representation(gamma: Tensor, means: Tensor, tau: float) -> Tensor:
    """(B, d) cluster-level vectors: soft-argmax of the posteriors times the
    stacked mean matrix."""
    return ad.matmul(soft_argmax(gamma, tau), means)


def score_logits(e_h: Tensor, e_r: Tensor, e_t: Tensor,
                 mode: str = SCORE_HOLE) -> Tensor:
    """(B,) unnormalized triple scores. hole: <e_r, corr(e_h, e_t)>;
    transe: negative squared distance ||e_h + e_r - e_t||^2."""
    if mode == SCORE_HOLE:
        return ad.tsum(ad.mul(e_r, ad.circular_correlation(e_h, e_t)), axis=1)
    if mode == SCORE_TRANSE:
        resid = ad.sub(ad.add(e_h, e_r), e_t)
        return ad.mul(ad.tsum(ad.square(resid), axis=1), -1.0)
    raise ValueError(f"unknown scoring mode {mode!r}")


def triple_score(e_h: Tensor, e_r: Tensor, e_t: Tensor,
                 mode: str = SCORE_HOLE) -> Tensor:
    """Sigmoid-squashed scores, strictly inside (0, 1)."""
    return ad.sigmoid(score_logits(e_h, e_r, e_t, mode))


def sample_negatives(heads: np.ndarray, tails: np.ndarray, num_entities: int,
                     num_negatives: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Corrupt head or tail (fair coin) with a uniform random entity mention,
    resampling while the draw equals the original. Returns (neg_heads,
    neg_tails), each (B, N)."""
    if num_entities < 2:
        raise ConfigError("cannot corrupt triples over an entity vocabulary "
                          "of size 1")
    b = heads.shape[0]
    neg_h = np.repeat(heads[:, None], num_negatives, axis=1).copy()
    neg_t = np.repeat(tails[:, None], num_negatives, axis=1).copy()
    for i in range(b):
        for k in range(num_negatives):
            corrupt_head = bool(rng.integers(2))
            original = heads[i] if corrupt_head else tails[i]
            repl = int(rng.integers(num_entities))
            while repl == original:
                repl = int(rng.integers(num_entities))
            if corrupt_head:
                neg_h[i, k] = repl
            else:
                neg_t[i, k] = repl
    return neg_h, neg_t


def triple_score_mentions(h: int, r: int, t: int, vae_e: VaeParams,
                          vae_r: VaeParams, reps: ClusterRepresentations,
                          cfg: SoftArgmaxConfig = SoftArgmaxConfig(),
                          mode: str = SCORE_HOLE) -> float:
    """Score one triple of mention ids through the live models, using the
    encoder means (no sampling)."""
    from . import vade

    def rep(vp, mention, means):
        x = Tensor(vp.lookup.data[np.array([mention])])
        fw = vade.mention_forward(vp, x, np.zeros((1, vp.d_z)))
        return select_representation(fw.gamma, means, cfg.tau)

    e_h = rep(vae_e, h, reps.m_e)
    e_t = rep(vae_e, t, reps.m_e)
    e_r = rep(vae_r, r, reps.m_r)
    return float(triple_score(e_h, e_r, e_t, mode).data[0])


def kge_loss(triples, vae_e: VaeParams, vae_r: VaeParams,
             reps: ClusterRepresentations, neg_cfg: NegSampleConfig,
             rng_seed: int, cfg: SoftArgmaxConfig = SoftArgmaxConfig(),
             mode: str = SCORE_HOLE, objective: str = LOSS_BCE) -> Tensor:
    """Negative-sampling loss of a triple batch, self-contained: encodes at
    the posterior means and draws negatives from the seed. The trainer
    shares one sampled forward pass per batch instead; this surface exists
    for scoring batches in isolation."""
    from . import vade

    heads = np.array([t.head for t in triples], dtype=np.int64)
    rels = np.array([t.rel for t in triples], dtype=np.int64)
    tails = np.array([t.tail for t in triples], dtype=np.int64)
    if heads.size == 0:
        raise ValueError("empty triple batch")
    rng = np.random.default_rng(rng_seed)
    neg_h, neg_t = sample_negatives(heads, tails, vae_e.lookup.shape[0],
                                    neg_cfg.num_negatives, rng)

    def reps_for(vp, ids, means):
        uniq, inverse = np.unique(ids, return_inverse=True)
        x = Tensor(vp.lookup.data[uniq])
        fw = vade.mention_forward(vp, x, np.zeros((uniq.size, vp.d_z)))
        return select_representation(fw.gamma, means, cfg.tau), inverse

    b, n = heads.size, neg_cfg.num_negatives
    ent_ids = np.concatenate([heads, tails, neg_h.ravel(), neg_t.ravel()])
    e_ent, inv_e = reps_for(vae_e, ent_ids, reps.m_e)
    e_rel, inv_r = reps_for(vae_r, rels, reps.m_r)
    pos = score_logits(ad.gather_rows(e_ent, inv_e[:b]),
                       ad.gather_rows(e_rel, inv_r),
                       ad.gather_rows(e_ent, inv_e[b:2 * b]), mode)
    neg = ad.reshape(
        score_logits(ad.gather_rows(e_ent, inv_e[2 * b:2 * b + b * n]),
                     ad.gather_rows(e_rel, np.repeat(inv_r, n)),
                     ad.gather_rows(e_ent, inv_e[2 * b + b * n:]), mode),
        (b, n))
    if objective == LOSS_MARGIN:
        return margin_loss(pos, neg)
    return bce_loss(pos, neg)


def bce_loss(pos_logits: Tensor, neg_logits: Tensor) -> Tensor:
    """Mean over positives of -log s(pos) - mean_neg log(1 - s(neg)),
    evaluated through softplus for stability."""
    pos_term = ad.mean(ad.softplus(ad.mul(pos_logits, -1.0)))
    neg_term = ad.mean(ad.mean(ad.softplus(neg_logits), axis=1))
    return ad.add(pos_term, neg_term)


def margin_loss(pos_logits: Tensor, neg_logits: Tensor,
                margin: float = 1.0) -> Tensor:
    """Mean over positives of mean_neg max(0, margin - pos + neg)."""
    b = pos_logits.shape[0]
    pos = ad.reshape(pos_logits, (b, 1))
    viol = ad.relu(ad.add(ad.sub(neg_logits, pos), margin))
    return ad.mean(ad.mean(viol, axis=1))
