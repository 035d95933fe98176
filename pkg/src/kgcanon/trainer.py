"""Three-stage training: moment-based Gaussian initialization from flat
clusters over phrase embeddings, encoder-only training against those weak
labels, then decoder-only training of the full objective.

Step 1 updates encoder parameters (and the lookup tables unless frozen);
step 2 updates decoders, mixture parameters, and lookups while encoders
stay fixed. The triple-scoring loss joins only in step 2.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import kge, vade
from .autodiff import AdamConfig, ParamStore, Tensor, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .cluster_init import (GaussianMixture, HacConfig, hac_cluster,
                           init_mixture, kmeans_cluster)
from .config import INIT_KMEANS, TrainConfig
from .errors import ConfigError, NumericError
from .kg import Clustering, OpenKG
from .phrases import WordVectors, embed_phrases
from .side_info import SideInfoPair, side_info_loss

# fixed spawn keys so every random stream is independent and reproducible
_STREAM_MODEL = 0
_STREAM_KMEANS = 1
_STREAM_S1_SHUFFLE = 2
_STREAM_S1_EPS = 3
_STREAM_S2_SHUFFLE = 4
_STREAM_S2_EPS = 5
_STREAM_S2_NEG = 6


def _rng(seed: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


class CanonModel:
    """Twin autoencoders plus the parameter store that trains them."""

    def __init__(self, vae_e: vade.VaeParams, vae_r: vade.VaeParams,
                 cfg: TrainConfig):
        self.vae_e = vae_e
        self.vae_r = vae_r
        self.cfg = cfg
        self.store = ParamStore()
        for prefix, vp in (("e.", vae_e), ("r.", vae_r)):
            for name, tensor in vp.named_tensors().items():
                self.store.register(prefix + name, tensor)

    def freeze_all(self) -> None:
        self.store.set_trainable(False)

    def set_step1_trainable(self) -> None:
        self.freeze_all()
        prefixes = ["e.enc.", "r.enc."]
        if not self.cfg.freeze_lookup_step1:
            prefixes += ["e.lookup", "r.lookup"]
        self.store.set_trainable(True, tuple(prefixes))

    def set_step2_trainable(self) -> None:
        self.freeze_all()
        self.store.set_trainable(
            True, ("e.dec.", "r.dec.", "e.gmm.", "r.gmm.",
                   "e.lookup", "r.lookup"))

    def state_dict(self) -> dict[str, np.ndarray]:
        return self.store.state_dict()


def initialize(kg: OpenKG, wv: WordVectors, cfg: TrainConfig):
    """Phrase embeddings, flat init clusterings, mixtures, fresh model.
    Returns (model, entity init Clustering, relation init Clustering)."""
    if wv.dim != cfg.d_z:
        raise ConfigError(
            f"latent dimension d_z={cfg.d_z} must match the word-vector "
            f"dimension {wv.dim}: mixtures are initialized from phrase-"
            f"embedding moments")
    phrase_e = embed_phrases(kg.entity_vocab, wv, cfg.embed_mode)
    phrase_r = embed_phrases(kg.relation_vocab, wv, cfg.embed_mode)

    if cfg.init == INIT_KMEANS:
        km_rng_seed = int(_rng(cfg.seed, _STREAM_KMEANS).integers(2 ** 31))
        clus_e = kmeans_cluster(phrase_e, cfg.kmeans_k_e, km_rng_seed,
                                cfg.kmeans_max_iters, "entity")
        clus_r = kmeans_cluster(phrase_r, cfg.kmeans_k_r, km_rng_seed + 1,
                                cfg.kmeans_max_iters, "relation")
    else:
        clus_e = hac_cluster(phrase_e, HacConfig(cfg.theta_e), "entity")
        clus_r = hac_cluster(phrase_r, HacConfig(cfg.theta_r), "relation")

    gm_e = init_mixture(phrase_e, clus_e, cfg.var_floor)
    gm_r = init_mixture(phrase_r, clus_r, cfg.var_floor)

    rng = _rng(cfg.seed, _STREAM_MODEL)
    vae_e = vade.VaeParams.build(len(kg.entity_vocab), cfg.d_in, cfg.d_z,
                                 cfg.hidden_widths, gm_e, rng)
    vae_r = vade.VaeParams.build(len(kg.relation_vocab), cfg.d_in, cfg.d_z,
                                 cfg.hidden_widths, gm_r, rng)
    return CanonModel(vae_e, vae_r, cfg), clus_e, clus_r


def _l1_penalty(tensors) -> ad.Tensor:
    total = ad.Tensor(0.0)
    for t in tensors:
        total = ad.add(total, ad.tsum(ad.absolute(t)))
    return total


def _encoder_tensors(vp: vade.VaeParams):
    for w, b in vp.enc_layers + [vp.enc_mu, vp.enc_lv]:
        yield w
        yield b


def _decoder_tensors(vp: vade.VaeParams):
    for w, b in vp.dec_layers + [vp.dec_mu, vp.dec_lv]:
        yield w
        yield b


def _si_term(model: CanonModel, si_e, si_r) -> ad.Tensor:
    return ad.add(side_info_loss(si_e, model.vae_e.lookup),
                  side_info_loss(si_r, model.vae_r.lookup))


def _batches(n: int, batch_size: int, perm: np.ndarray):
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def train_step1(model: CanonModel, kg: OpenKG, weak_e: Clustering,
                weak_r: Clustering, si_e: list[SideInfoPair],
                si_r: list[SideInfoPair], log=None) -> None:
    """Encoder phase: classification of mentions to their weak-label
    components plus L1 on encoder parameters and the side-information tie."""
    cfg = model.cfg
    model.set_step1_trainable()
    adam = AdamConfig(lr=cfg.lr_step1)
    shuffle_rng = _rng(cfg.seed, _STREAM_S1_SHUFFLE)
    eps_rng = _rng(cfg.seed, _STREAM_S1_EPS)
    labels_e = weak_e.labels
    labels_r = weak_r.labels

    for epoch in range(cfg.t_e):
        perm = shuffle_rng.permutation(len(kg.triples))
        epoch_loss = 0.0
        for bno, idx in enumerate(_batches(len(kg.triples),
                                           cfg.batch_size_train, perm)):
            try:
                loss = _step1_batch_loss(model, kg, idx, labels_e, labels_r,
                                         si_e, si_r, eps_rng)
                ad.backward(loss)
                model.store.fill_missing_grads()
                adam_step(model.store, adam)
            except NumericError as exc:
                raise NumericError(
                    f"step 1 diverged at epoch {epoch} batch {bno}: {exc}"
                ) from exc
            epoch_loss += loss.item()
        if log:
            log(f"step1 epoch {epoch + 1}/{cfg.t_e} loss={epoch_loss:.4f}")


def _unique_forward(vp: vade.VaeParams, ids: np.ndarray,
                    eps_rng) -> tuple[np.ndarray, np.ndarray, vade.MentionForward]:
    uniq, inverse = np.unique(ids, return_inverse=True)
    x = ad.gather_rows(vp.lookup, uniq)
    eps = eps_rng.standard_normal((uniq.size, vp.d_z))
    return uniq, inverse, vade.mention_forward(vp, x, eps)


def _step1_batch_loss(model, kg, idx, labels_e, labels_r, si_e, si_r, eps_rng):
    cfg = model.cfg
    ent_ids = np.concatenate([kg.heads[idx], kg.tails[idx]])
    uniq_e, inv_e, fw_e = _unique_forward(model.vae_e, ent_ids, eps_rng)
    counts_e = np.bincount(inv_e, minlength=uniq_e.size).astype(np.float64)
    nll_e = ad.tsum(ad.mul(vade.nll_terms(fw_e, labels_e[uniq_e]), counts_e))

    uniq_r, inv_r, fw_r = _unique_forward(model.vae_r, kg.rels[idx], eps_rng)
    counts_r = np.bincount(inv_r, minlength=uniq_r.size).astype(np.float64)
    nll_r = ad.tsum(ad.mul(vade.nll_terms(fw_r, labels_r[uniq_r]), counts_r))

    reg = _l1_penalty(list(_encoder_tensors(model.vae_e))
                      + list(_encoder_tensors(model.vae_r)))
    return ad.add(ad.add(ad.add(nll_e, nll_r), ad.mul(reg, cfg.l1_weight)),
                  _si_term(model, si_e, si_r))


def train_step2(model: CanonModel, kg: OpenKG, si_e: list[SideInfoPair],
                si_r: list[SideInfoPair], log=None) -> None:
    """Decoder phase: evidence bounds for both namespaces, the triple-scoring
    loss under negative sampling (unless ablated), the side-information tie,
    and L1 on decoder parameters. Encoders stay fixed."""
    cfg = model.cfg
    if not cfg.no_kge and len(kg.entity_vocab) < 2:
        raise ConfigError("triple corruption needs at least 2 entity mentions")
    model.set_step2_trainable()
    adam = AdamConfig(lr=cfg.lr_step2)
    shuffle_rng = _rng(cfg.seed, _STREAM_S2_SHUFFLE)
    eps_rng = _rng(cfg.seed, _STREAM_S2_EPS)
    neg_rng = _rng(cfg.seed, _STREAM_S2_NEG)

    for epoch in range(cfg.t_d):
        perm = shuffle_rng.permutation(len(kg.triples))
        epoch_loss = 0.0
        for bno, idx in enumerate(_batches(len(kg.triples),
                                           cfg.batch_size_train, perm)):
            try:
                loss = _step2_batch_loss(model, kg, idx, si_e, si_r,
                                         eps_rng, neg_rng)
                ad.backward(loss)
                model.store.fill_missing_grads()
                adam_step(model.store, adam)
            except NumericError as exc:
                raise NumericError(
                    f"step 2 diverged at epoch {epoch} batch {bno}: {exc}"
                ) from exc
            epoch_loss += loss.item()
        if log:
            log(f"step2 epoch {epoch + 1}/{cfg.t_d} loss={epoch_loss:.4f}")


def _step2_batch_loss(model, kg, idx, si_e, si_r, eps_rng, neg_rng):
    cfg = model.cfg
    b = idx.size
    heads, rels, tails = kg.heads[idx], kg.rels[idx], kg.tails[idx]

    if cfg.no_kge:
        ent_ids = np.concatenate([heads, tails])
    else:
        neg_h, neg_t = kge.sample_negatives(heads, tails,
                                            len(kg.entity_vocab),
                                            cfg.num_negatives, neg_rng)
        ent_ids = np.concatenate([heads, tails, neg_h.ravel(), neg_t.ravel()])

    uniq_e, inv_e, fw_e = _unique_forward(model.vae_e, ent_ids, eps_rng)
    elbo_w_e = np.bincount(inv_e[:2 * b], minlength=uniq_e.size).astype(np.float64)
    elbo_e = ad.tsum(ad.mul(vade.elbo_terms(model.vae_e, fw_e), elbo_w_e))

    uniq_r, inv_r, fw_r = _unique_forward(model.vae_r, rels, eps_rng)
    counts_r = np.bincount(inv_r, minlength=uniq_r.size).astype(np.float64)
    elbo_r = ad.tsum(ad.mul(vade.elbo_terms(model.vae_r, fw_r), counts_r))

    loss = ad.add(elbo_e, elbo_r)

    if not cfg.no_kge:
        mode = kge.SCORE_TRANSE if cfg.kge == "transe" else kge.SCORE_HOLE
        e_ent = kge.select_representation(fw_e.gamma, model.vae_e.gmm.means,
                                          cfg.tau)
        e_rel = kge.select_representation(fw_r.gamma, model.vae_r.gmm.means,
                                          cfg.tau)
        inv_h, inv_t = inv_e[:b], inv_e[b:2 * b]
        inv_nh = inv_e[2 * b:2 * b + b * cfg.num_negatives]
        inv_nt = inv_e[2 * b + b * cfg.num_negatives:]
        pos_logits = kge.score_logits(ad.gather_rows(e_ent, inv_h),
                                      ad.gather_rows(e_rel, inv_r),
                                      ad.gather_rows(e_ent, inv_t), mode)
        rep_r = np.repeat(inv_r, cfg.num_negatives)
        neg_logits = ad.reshape(
            kge.score_logits(ad.gather_rows(e_ent, inv_nh),
                             ad.gather_rows(e_rel, rep_r),
                             ad.gather_rows(e_ent, inv_nt), mode),
            (b, cfg.num_negatives))
        if cfg.kge == "margin" or cfg.kge == "transe":
            loss = ad.add(loss, kge.margin_loss(pos_logits, neg_logits))
        else:
            loss = ad.add(loss, kge.bce_loss(pos_logits, neg_logits))

    reg = _l1_penalty(list(_decoder_tensors(model.vae_e))
                      + list(_decoder_tensors(model.vae_r)))
    return ad.add(ad.add(loss, _si_term(model, si_e, si_r)),
                  ad.mul(reg, cfg.l1_weight))


def _dense_clustering(raw_labels: np.ndarray, namespace: str) -> Clustering:
    """Relabel to dense ids ordered by first occurrence (== smallest member)."""
    remap: dict[int, int] = {}
    out = np.empty(raw_labels.size, dtype=np.int64)
    for i, lab in enumerate(raw_labels):
        out[i] = remap.setdefault(int(lab), len(remap))
    return Clustering(out, namespace)


def infer_clusters(model: CanonModel, kg: OpenKG) -> tuple[Clustering, Clustering]:
    """Winners-take-all assignment of every mention, densely relabelled."""
    labels_e = vade.assign_all(model.vae_e, model.cfg.batch_size_eval)
    labels_r = vade.assign_all(model.vae_r, model.cfg.batch_size_eval)
    if labels_e.size != len(kg.entity_vocab) or labels_r.size != len(kg.relation_vocab):
        raise ConfigError("model lookup tables do not match the KG vocabularies")
    return (_dense_clustering(labels_e, "entity"),
            _dense_clustering(labels_r, "relation"))


def run_pipeline_ablation(model: CanonModel, kg: OpenKG) -> tuple[Clustering, Clustering]:
    """Pipeline variant: agglomerate the encoder codes with the same
    thresholds instead of reading the mixture assignment."""
    cfg = model.cfg
    codes_e = vade.latent_codes(model.vae_e, cfg.batch_size_eval)
    codes_r = vade.latent_codes(model.vae_r, cfg.batch_size_eval)
    return (hac_cluster(codes_e, HacConfig(cfg.theta_e), "entity"),
            hac_cluster(codes_r, HacConfig(cfg.theta_r), "relation"))


def train_full(kg: OpenKG, wv: WordVectors, si_e: list[SideInfoPair],
               si_r: list[SideInfoPair], cfg: TrainConfig, log=None):
    """Initialization, both training steps; returns (model, init clusterings)."""
    model, clus_e, clus_r = initialize(kg, wv, cfg)
    if cfg.t_e > 0:
        train_step1(model, kg, clus_e, clus_r, si_e, si_r, log=log)
    if cfg.t_d > 0:
        train_step2(model, kg, si_e, si_r, log=log)
    return model, clus_e, clus_r


# ---------------------------------------------------------------------------
# raw-vector clustering (no triples): initialization + decoder phase only

def fit_vade(points: np.ndarray, k: int, d_z: int | None = None,
             hidden: tuple[int, ...] = (768, 384), epochs: int = 30,
             lr: float = 1e-4, batch_size: int = 50, seed: int = 0,
             var_floor: float = 1e-4, log=None) -> np.ndarray:
    """Generative clustering of raw vectors: cluster the fresh encoder's
    codes with k-means to initialize the mixture, then train the decoder
    phase (reconstruction + KL) with the encoder fixed. Returns labels.

    Inputs are standardized per dimension so the untrained tanh encoder
    stays out of saturation."""
    points = np.asarray(points, dtype=np.float64)
    n, d_in = points.shape
    d_z = d_in if d_z is None else d_z
    scale = points.std(axis=0)
    scale[scale == 0.0] = 1.0
    points = (points - points.mean(axis=0)) / scale
    rng = _rng(seed, _STREAM_MODEL)
    placeholder = GaussianMixture(np.ones(1), np.zeros((1, d_z)),
                                  np.zeros((1, d_z)))
    vp = vade.VaeParams.build(n, d_in, d_z, hidden, placeholder, rng)
    vp.lookup.data = points.copy()

    codes = vade.latent_codes(vp)
    km_seed = int(_rng(seed, _STREAM_KMEANS).integers(2 ** 31))
    clus = kmeans_cluster(codes, k, km_seed)
    vp.gmm = vade.GmmParams.from_mixture(init_mixture(codes, clus, var_floor))

    store = ParamStore()
    for name, tensor in vp.named_tensors().items():
        store.register(name, tensor)
    store.set_trainable(False)
    store.set_trainable(True, ("dec.", "gmm."))

    adam = AdamConfig(lr=lr)
    shuffle_rng = _rng(seed, _STREAM_S2_SHUFFLE)
    eps_rng = _rng(seed, _STREAM_S2_EPS)
    for epoch in range(epochs):
        perm = shuffle_rng.permutation(n)
        total = 0.0
        for idx in _batches(n, batch_size, perm):
            x = ad.gather_rows(vp.lookup, idx)
            eps = eps_rng.standard_normal((idx.size, d_z))
            fw = vade.mention_forward(vp, x, eps)
            loss = ad.tsum(vade.elbo_terms(vp, fw))
            ad.backward(loss)
            store.fill_missing_grads()
            adam_step(store, adam)
            total += loss.item()
        if log:
            log(f"decoder epoch {epoch + 1}/{epochs} loss={total:.4f}")
    return vade.assign_all(vp)


# ---------------------------------------------------------------------------
# checkpoint round-trip

def save_model(model: CanonModel, path, extra_manifest: dict | None = None) -> None:
    manifest = {"config": model.cfg.to_dict(),
                "entity_vocab_size": model.vae_e.lookup.shape[0],
                "relation_vocab_size": model.vae_r.lookup.shape[0]}
    if extra_manifest:
        manifest.update(extra_manifest)
    save_checkpoint(path, model.state_dict(), manifest)


def load_model(path) -> CanonModel:
    tensors, manifest = load_checkpoint(path)
    raw_cfg = dict(manifest["config"])
    raw_cfg["hidden_widths"] = tuple(raw_cfg["hidden_widths"])
    cfg = TrainConfig(**raw_cfg)
    vae_e = _vae_from_named(tensors, "e.")
    vae_r = _vae_from_named(tensors, "r.")
    return CanonModel(vae_e, vae_r, cfg)


def _vae_from_named(tensors: dict[str, np.ndarray], prefix: str) -> vade.VaeParams:
    def grab(name):
        return Tensor(tensors[prefix + name])

    enc_layers, dec_layers = [], []
    i = 0
    while prefix + f"enc.{i}.w" in tensors:
        enc_layers.append((grab(f"enc.{i}.w"), grab(f"enc.{i}.b")))
        i += 1
    i = 0
    while prefix + f"dec.{i}.w" in tensors:
        dec_layers.append((grab(f"dec.{i}.w"), grab(f"dec.{i}.b")))
        i += 1
    gmm = vade.GmmParams(grab("gmm.pi_logits"), grab("gmm.means"),
                         grab("gmm.log_vars"))
    return vade.VaeParams(grab("lookup"), enc_layers,
                          (grab("enc.mu.w"), grab("enc.mu.b")),
                          (grab("enc.lv.w"), grab("enc.lv.b")),
                          dec_layers,
                          (grab("dec.mu.w"), grab("dec.mu.b")),
                          (grab("dec.lv.w"), grab("dec.lv.b")), gmm)
