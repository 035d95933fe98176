"""Variational autoencoder over a Gaussian-mixture latent space.

One instance handles one namespace (entities or relations); the two
instances of a model share no parameters. The encoder is a tanh multilayer
perceptron with parallel mean / log-variance heads; the decoder mirrors it;
log-variances are clamped to [-10, 10] wherever they are used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import LOG_2PI, Tensor
from .cluster_init import GaussianMixture

LOG_VAR_BOUND = 10.0


def _affine_init(rng, fan_in: int, fan_out: int) -> tuple[Tensor, Tensor]:
    bound = np.sqrt(6.0 / fan_in)
    w = Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
    b = Tensor(np.zeros(fan_out))
    return w, b


class GmmParams:
    """Trainable mixture: weights live as softmax logits so the simplex
    constraint survives gradient updates."""

    def __init__(self, pi_logits: Tensor, means: Tensor, log_vars: Tensor):
        self.pi_logits = pi_logits
        self.means = means
        self.log_vars = log_vars

    @classmethod
    def from_mixture(cls, gm: GaussianMixture) -> "GmmParams":
        return cls(Tensor(np.log(gm.pi)), Tensor(gm.means.copy()),
                   Tensor(gm.log_vars.copy()))

    @property
    def num_components(self) -> int:
        return self.pi_logits.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_pi(self) -> Tensor:
        logits2d = ad.reshape(self.pi_logits, (1, -1))
        lse = ad.logsumexp(logits2d, axis=1, keepdims=True)
        return ad.reshape(ad.sub(logits2d, lse), (-1,))

    def snapshot(self) -> GaussianMixture:
        logits = self.pi_logits.data
        pi = np.exp(logits - logits.max())
        return GaussianMixture(pi / pi.sum(), self.means.data.copy(),
                               self.log_vars.data.copy())

    def named_tensors(self) -> dict[str, Tensor]:
        return {"gmm.pi_logits": self.pi_logits, "gmm.means": self.means,
                "gmm.log_vars": self.log_vars}


class VaeParams:
    """Lookup table, encoder, decoder, and latent mixture of one namespace."""

    def __init__(self, lookup: Tensor, enc_layers, enc_mu, enc_lv,
                 dec_layers, dec_mu, dec_lv, gmm: GmmParams):
        self.lookup = lookup
        self.enc_layers = enc_layers  # list of (W, b), tanh after each
        self.enc_mu = enc_mu
        self.enc_lv = enc_lv
        self.dec_layers = dec_layers
        self.dec_mu = dec_mu
        self.dec_lv = dec_lv
        self.gmm = gmm

    @classmethod
    def build(cls, vocab_size: int, d_in: int, d_z: int,
              hidden: tuple[int, ...], mixture: GaussianMixture,
              rng) -> "VaeParams":
        if mixture.dim != d_z:
            raise ValueError(
                f"mixture dimension {mixture.dim} does not match d_z={d_z}")
        bound = np.sqrt(6.0 / d_in)
        lookup = Tensor(rng.uniform(-bound, bound, size=(vocab_size, d_in)))
        enc_layers = []
        prev = d_in
        for width in hidden:
            enc_layers.append(_affine_init(rng, prev, width))
            prev = width
        enc_mu = _affine_init(rng, prev, d_z)
        enc_lv = _affine_init(rng, prev, d_z)
        dec_layers = []
        prev = d_z
        for width in reversed(hidden):
            dec_layers.append(_affine_init(rng, prev, width))
            prev = width
        dec_mu = _affine_init(rng, prev, d_in)
        dec_lv = _affine_init(rng, prev, d_in)
        return cls(lookup, enc_layers, enc_mu, enc_lv,
                   dec_layers, dec_mu, dec_lv, GmmParams.from_mixture(mixture))

    @property
    def d_in(self) -> int:
        return self.lookup.shape[1]

    @property
    def d_z(self) -> int:
        return self.gmm.dim

    def named_tensors(self) -> dict[str, Tensor]:
        out = {"lookup": self.lookup}
        for i, (w, b) in enumerate(self.enc_layers):
            out[f"enc.{i}.w"] = w
            out[f"enc.{i}.b"] = b
        out["enc.mu.w"], out["enc.mu.b"] = self.enc_mu
        out["enc.lv.w"], out["enc.lv.b"] = self.enc_lv
        for i, (w, b) in enumerate(self.dec_layers):
            out[f"dec.{i}.w"] = w
            out[f"dec.{i}.b"] = b
        out["dec.mu.w"], out["dec.mu.b"] = self.dec_mu
        out["dec.lv.w"], out["dec.lv.b"] = self.dec_lv
        for name, t in self.gmm.named_tensors().items():
            out[name] = t
        return out


def _heads(trunk_layers, head_mu, head_lv, x: Tensor) -> tuple[Tensor, Tensor]:
    h = x
    for w, b in trunk_layers:
        h = ad.tanh(ad.add(ad.matmul(h, w), b))
    mu = ad.add(ad.matmul(h, head_mu[0]), head_mu[1])
    lv = ad.clamp(ad.add(ad.matmul(h, head_lv[0]), head_lv[1]),
                  -LOG_VAR_BOUND, LOG_VAR_BOUND)
    return mu, lv


def encode(params: VaeParams, x: Tensor) -> tuple[Tensor, Tensor]:
    """(mu_tilde, log_var_tilde) of shape (B, d_z) for inputs (B, d_in)."""
    return _heads(params.enc_layers, params.enc_mu, params.enc_lv, x)


def decode(params: VaeParams, z: Tensor) -> tuple[Tensor, Tensor]:
    """(mu_x, log_var_x) of shape (B, d_in) for latents (B, d_z)."""
    return _heads(params.dec_layers, params.dec_mu, params.dec_lv, z)


def reparametrize(mu: Tensor, log_var: Tensor, eps: np.ndarray) -> Tensor:
    """z = mu + exp(log_var / 2) * eps for an externally drawn eps."""
    return ad.add(mu, ad.mul(ad.exp(ad.mul(log_var, 0.5)), eps))


def log_joint(gmm: GmmParams, z: Tensor) -> Tensor:
    """(B, K) matrix of log pi_c + log N(z_b; mu_c, sigma_c^2 I)."""
    lv = ad.clamp(gmm.log_vars, -LOG_VAR_BOUND, LOG_VAR_BOUND)
    inv_var = ad.exp(ad.mul(lv, -1.0))                       # (K, d)
    sum_lv = ad.tsum(lv, axis=1)                             # (K,)
    quad = _mahalanobis_sq(z, gmm.means, inv_var)            # (B, K)
    d = gmm.dim
    log_norm = ad.mul(ad.add(ad.add(quad, sum_lv), d * LOG_2PI), -0.5)
    return ad.add(log_norm, gmm.log_pi())


def _mahalanobis_sq(x: Tensor, means: Tensor, inv_var: Tensor) -> Tensor:
    """(B, K) matrix of sum_j (x_bj - mu_cj)^2 / var_cj via the expansion
    x^2 . iv - 2 x . (mu iv) + sum mu^2 iv, which keeps everything 2-D."""
    mu_iv = ad.mul(means, inv_var)
    term1 = ad.matmul(ad.square(x), ad.transpose(inv_var))
    term2 = ad.mul(ad.matmul(x, ad.transpose(mu_iv)), -2.0)
    term3 = ad.tsum(ad.mul(means, mu_iv), axis=1)            # (K,)
    return ad.add(ad.add(term1, term2), term3)


def cluster_posterior(gmm: GmmParams, z: Tensor) -> Tensor:
    """Responsibilities q(c|x) as rows summing to one."""
    return ad.softmax(log_joint(gmm, z), axis=1)


def log_cluster_posterior(gmm: GmmParams, z: Tensor) -> Tensor:
    lj = log_joint(gmm, z)
    return ad.sub(lj, ad.logsumexp(lj, axis=1, keepdims=True))


@dataclass
class MentionForward:
    """Encoder-side activations shared by the ELBO, NLL, and KGE losses."""
    x: Tensor
    mu: Tensor
    log_var: Tensor
    z: Tensor
    log_joint: Tensor
    log_gamma: Tensor
    gamma: Tensor


def mention_forward(params: VaeParams, x: Tensor, eps: np.ndarray) -> MentionForward:
    mu, lv = encode(params, x)
    z = reparametrize(mu, lv, eps)
    lj = log_joint(params.gmm, z)
    log_gamma = ad.sub(lj, ad.logsumexp(lj, axis=1, keepdims=True))
    gamma = ad.softmax(lj, axis=1)
    return MentionForward(x, mu, lv, z, lj, log_gamma, gamma)


def elbo_terms(params: VaeParams, fw: MentionForward) -> Tensor:
    """Per-row negative evidence lower bound: reconstruction plus the two
    KL terms against the mixture prior (single Monte Carlo sample)."""
    mu_x, lv_x = decode(params, fw.z)
    resid = ad.sub(fw.x, mu_x)
    recon = ad.mul(ad.tsum(
        ad.add(ad.add(ad.mul(ad.square(resid), ad.exp(ad.mul(lv_x, -1.0))),
                      lv_x), LOG_2PI), axis=1), 0.5)

    gmm = params.gmm
    lv_c = ad.clamp(gmm.log_vars, -LOG_VAR_BOUND, LOG_VAR_BOUND)
    inv_var = ad.exp(ad.mul(lv_c, -1.0))
    sum_lv_c = ad.tsum(lv_c, axis=1)                         # (K,)
    sum_lv_t = ad.tsum(fw.log_var, axis=1, keepdims=True)    # (B, 1)
    trace = ad.matmul(ad.exp(fw.log_var), ad.transpose(inv_var))  # (B, K)
    quad_mu = _mahalanobis_sq(fw.mu, gmm.means, inv_var)     # (B, K)
    inner = ad.mul(ad.sub(ad.add(ad.add(quad_mu, trace), sum_lv_c),
                          ad.add(sum_lv_t, float(gmm.dim))), 0.5)
    kl_gauss = ad.tsum(ad.mul(fw.gamma, inner), axis=1)

    kl_cat = ad.tsum(ad.mul(fw.gamma, ad.sub(fw.log_gamma, gmm.log_pi())),
                     axis=1)
    return ad.add(ad.add(recon, kl_gauss), kl_cat)


def elbo_loss(params: VaeParams, x: np.ndarray, eps: np.ndarray) -> Tensor:
    """Negative ELBO of a single input vector."""
    fw = mention_forward(params, Tensor(np.atleast_2d(x)), np.atleast_2d(eps))
    return ad.tsum(elbo_terms(params, fw))


def nll_terms(fw: MentionForward, labels: np.ndarray) -> Tensor:
    """Per-row -log q(label | x) against weak supervision labels."""
    labels = np.asarray(labels, dtype=np.int64)
    k = fw.gamma.shape[1]
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError("cluster label out of range")
    onehot = np.zeros(fw.gamma.shape)
    onehot[np.arange(labels.size), labels] = 1.0
    return ad.mul(ad.tsum(ad.mul(fw.log_gamma, onehot), axis=1), -1.0)


def nll_loss(params: VaeParams, x: np.ndarray, eps: np.ndarray,
             label: int) -> Tensor:
    """-log q(label | x) of a single input vector."""
    fw = mention_forward(params, Tensor(np.atleast_2d(x)), np.atleast_2d(eps))
    return ad.tsum(nll_terms(fw, np.array([label])))


def assign(params: VaeParams, x: np.ndarray) -> np.ndarray:
    """Winners-take-all cluster ids using z = mu_tilde (no sampling); exact
    ties go to the smaller cluster id."""
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    fw = mention_forward(params, Tensor(x2), np.zeros((x2.shape[0], params.d_z)))
    return fw.gamma.data.argmax(axis=1)


def assign_all(params: VaeParams, batch_size: int = 512) -> np.ndarray:
    """Cluster ids for every mention in the lookup table."""
    n = params.lookup.shape[0]
    out = np.empty(n, dtype=np.int64)
    for start in range(0, n, batch_size):
        rows = params.lookup.data[start:start + batch_size]
        out[start:start + rows.shape[0]] = assign(params, rows)
    return out


def latent_codes(params: VaeParams, batch_size: int = 512) -> np.ndarray:
    """mu_tilde of every mention in the lookup table."""
    n = params.lookup.shape[0]
    out = np.empty((n, params.d_z), dtype=np.float64)
    for start in range(0, n, batch_size):
        x = Tensor(params.lookup.data[start:start + batch_size])
        mu, _ = encode(params, x)
        out[start:start + mu.shape[0]] = mu.data
    return out
