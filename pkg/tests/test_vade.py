import numpy as np
import pytest

from conftest import gradcheck
from kgcanon import autodiff as ad
from kgcanon import vade
from kgcanon.autodiff import Tensor
from kgcanon.cluster_init import GaussianMixture


def make_params(rng, vocab=10, d_in=4, d_z=2, k=3, hidden=(6, 5)):
    gm = GaussianMixture(np.full(k, 1.0 / k), rng.normal(size=(k, d_z)),
                         rng.normal(size=(k, d_z)) * 0.3)
    return vade.VaeParams.build(vocab, d_in, d_z, hidden, gm, rng)


def all_tensors(vp):
    return list(vp.named_tensors().values())


def test_encode_zero_weights(rng):
    vp = make_params(rng)
    for w, b in vp.enc_layers + [vp.enc_mu, vp.enc_lv]:
        w.data[:] = 0.0
        b.data[:] = 0.0
    mu, lv = vade.encode(vp, Tensor(rng.normal(size=(3, 4))))
    assert np.array_equal(mu.data, np.zeros((3, 2)))
    assert np.array_equal(lv.data, np.zeros((3, 2)))


def test_encoder_head_widths(rng):
    vp = make_params(rng, d_in=8, d_z=5, hidden=(16, 12))
    mu, lv = vade.encode(vp, Tensor(rng.normal(size=(2, 8))))
    assert mu.shape == (2, 5) and lv.shape == (2, 5)
    assert vp.enc_layers[0][0].shape == (8, 16)
    assert vp.dec_layers[0][0].shape == (5, 12)  # mirror


def test_log_var_clamped(rng):
    vp = make_params(rng)
    vp.enc_lv[1].data[:] = 100.0  # bias pushes the head past the bound
    _, lv = vade.encode(vp, Tensor(rng.normal(size=(2, 4))))
    assert np.all(lv.data <= 10.0)


def test_reparametrize():
    mu = Tensor(np.array([[1.0, -2.0]]))
    lv = Tensor(np.array([[0.0, np.log(4.0)]]))
    z = vade.reparametrize(mu, lv, np.zeros((1, 2)))
    assert np.array_equal(z.data, mu.data)
    z2 = vade.reparametrize(Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 2))),
                            np.array([[0.3, -0.7]]))
    assert np.allclose(z2.data, [[0.3, -0.7]])


def test_reparametrize_moments(rng):
    n = 100_000
    mu, lv = 0.8, np.log(2.5)
    eps = rng.standard_normal((n, 1))
    z = vade.reparametrize(Tensor(np.full((n, 1), mu)),
                           Tensor(np.full((n, 1), lv)), eps).data
    se_mean = np.sqrt(2.5 / n)
    assert abs(z.mean() - mu) < 3 * se_mean
    se_var = 2.5 * np.sqrt(2.0 / (n - 1))
    assert abs(z.var() - 2.5) < 3 * se_var


def test_posterior_worked_value():
    gm = GaussianMixture(np.array([0.5, 0.5]), np.array([[0.0], [2.0]]),
                         np.zeros((2, 1)))
    gamma = vade.cluster_posterior(vade.GmmParams.from_mixture(gm),
                                   Tensor(np.array([[0.0]])))
    assert abs(gamma.data[0, 0] - 0.8808) < 1e-4
    assert abs(gamma.data[0, 1] - 0.1192) < 1e-4


def test_posterior_symmetric_components(rng):
    gm = GaussianMixture(np.array([0.5, 0.5]), np.zeros((2, 3)), np.zeros((2, 3)))
    gamma = vade.cluster_posterior(vade.GmmParams.from_mixture(gm),
                                   Tensor(rng.normal(size=(6, 3))))
    assert np.allclose(gamma.data, 0.5)


def test_posterior_rows_sum_to_one(rng):
    vp = make_params(rng, k=5, d_z=3)
    gamma = vade.cluster_posterior(vp.gmm, Tensor(rng.normal(size=(8, 3)) * 5))
    assert np.all(np.abs(gamma.data.sum(axis=1) - 1.0) < 1e-9)
    assert np.all(gamma.data >= 0)


def test_posterior_shift_invariance(rng):
    # softmax of log joints is invariant to a constant shift
    x = rng.normal(size=(4, 6))
    a = ad.softmax(Tensor(x), axis=1).data
    b = ad.softmax(Tensor(x + 17.3), axis=1).data
    assert np.allclose(a, b, atol=1e-12)


def independent_elbo(vp, x, eps):
    """Term-by-term reimplementation with loops."""
    def fwd(layers, hm, hl, inp):
        h = inp
        for w, b in layers:
            h = np.tanh(h @ w.data + b.data)
        mu = h @ hm[0].data + hm[1].data
        lv = np.clip(h @ hl[0].data + hl[1].data, -10, 10)
        return mu, lv

    gm = vp.gmm.snapshot()
    k = gm.num_components
    mu, lv = fwd(vp.enc_layers, vp.enc_mu, vp.enc_lv, x)
    z = mu + np.exp(lv / 2) * eps
    mu_x, lv_x = fwd(vp.dec_layers, vp.dec_mu, vp.dec_lv, z)
    out = np.zeros(x.shape[0])
    for b in range(x.shape[0]):
        lj = np.array([np.log(gm.pi[c]) - 0.5 * np.sum(
            np.log(2 * np.pi) + gm.log_vars[c]
            + (z[b] - gm.means[c]) ** 2 / np.exp(gm.log_vars[c]))
            for c in range(k)])
        gamma = np.exp(lj - lj.max())
        gamma /= gamma.sum()
        recon = 0.5 * np.sum(np.log(2 * np.pi) + lv_x[b]
                             + (x[b] - mu_x[b]) ** 2 / np.exp(lv_x[b]))
        klg = sum(gamma[c] * 0.5 * np.sum(
            gm.log_vars[c] - lv[b] + np.exp(lv[b]) / np.exp(gm.log_vars[c])
            + (mu[b] - gm.means[c]) ** 2 / np.exp(gm.log_vars[c]) - 1.0)
            for c in range(k))
        klc = sum(gamma[c] * (np.log(gamma[c]) - np.log(gm.pi[c]))
                  for c in range(k))
        out[b] = recon + klg + klc
    return out


def test_elbo_matches_independent_reimplementation(rng):
    vp = make_params(rng)
    x = rng.normal(size=(5, 4))
    eps = rng.normal(size=(5, 2))
    fw = vade.mention_forward(vp, Tensor(x), eps)
    got = vade.elbo_terms(vp, fw).data
    want = independent_elbo(vp, x, eps)
    assert np.max(np.abs(got - want)) < 1e-10


def test_elbo_matching_prior_kills_kl(rng):
    # K=1 with component equal to the posterior: both KL terms vanish
    d_z = 2
    vp = make_params(rng, k=1, d_z=d_z)
    x = rng.normal(size=(1, 4))
    mu, lv = vade.encode(vp, Tensor(x))
    vp.gmm.means.data = mu.data.copy()
    vp.gmm.log_vars.data = lv.data.copy()
    eps = np.zeros((1, d_z))
    fw = vade.mention_forward(vp, Tensor(x), eps)
    mu_x, lv_x = vade.decode(vp, fw.z)
    recon = 0.5 * np.sum(np.log(2 * np.pi) + lv_x.data
                         + (x - mu_x.data) ** 2 / np.exp(lv_x.data))
    assert abs(vade.elbo_terms(vp, fw).item() - recon) < 1e-10


def test_elbo_perfect_reconstruction_value(rng):
    # rig the decoder so mu_x == x with unit output variance, and the prior
    # so both KL terms vanish: the bound reduces to (d_in/2) log 2pi
    d_in = 6
    vp = make_params(rng, k=1, d_in=d_in, d_z=2)
    x = rng.normal(size=(1, d_in))
    mu, lv = vade.encode(vp, Tensor(x))
    vp.gmm.means.data = mu.data.copy()
    vp.gmm.log_vars.data = lv.data.copy()
    for w, b in vp.dec_layers:
        w.data[:] = 0.0
        b.data[:] = 0.0
    vp.dec_mu[0].data[:] = 0.0
    vp.dec_mu[1].data[:] = x[0]
    vp.dec_lv[0].data[:] = 0.0
    vp.dec_lv[1].data[:] = 0.0
    fw = vade.mention_forward(vp, Tensor(x), np.zeros((1, 2)))
    want = 0.5 * d_in * np.log(2 * np.pi)
    assert abs(vade.elbo_terms(vp, fw).item() - want) < 1e-10


def test_elbo_gradient(rng):
    vp = make_params(rng)
    ids = np.array([0, 3, 7])
    eps = rng.normal(size=(3, 2))
    params = all_tensors(vp)

    def fn():
        x = ad.gather_rows(vp.lookup, ids)
        fw = vade.mention_forward(vp, x, eps)
        return ad.tsum(vade.elbo_terms(vp, fw))

    assert gradcheck(fn, params, rng, samples=2) < 1e-4


def test_nll_matches_posterior(rng):
    vp = make_params(rng)
    x = rng.normal(size=(4, 4))
    eps = rng.normal(size=(4, 2))
    fw = vade.mention_forward(vp, Tensor(x), eps)
    labels = np.array([0, 2, 1, 0])
    nll = vade.nll_terms(fw, labels).data
    gamma = fw.gamma.data
    want = -np.log(gamma[np.arange(4), labels])
    assert np.allclose(nll, want, atol=1e-12)


def test_nll_uniform_posterior(rng):
    k = 4
    gm = GaussianMixture(np.full(k, 0.25), np.zeros((k, 2)), np.zeros((k, 2)))
    vp = make_params(rng, k=1)
    vp.gmm = vade.GmmParams.from_mixture(gm)
    x = rng.normal(size=(1, 4))
    fw = vade.mention_forward(vp, Tensor(x), np.zeros((1, 2)))
    assert abs(vade.nll_terms(fw, np.array([2])).item() - np.log(k)) < 1e-12


def test_nll_label_out_of_range(rng):
    vp = make_params(rng)
    fw = vade.mention_forward(vp, Tensor(rng.normal(size=(1, 4))),
                              np.zeros((1, 2)))
    with pytest.raises(ValueError):
        vade.nll_terms(fw, np.array([99]))


def test_assign_component_mean(rng):
    k, d_z = 3, 2
    means = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    gm = GaussianMixture(np.full(k, 1 / 3), means, np.zeros((k, d_z)))
    gp = vade.GmmParams.from_mixture(gm)
    gamma = vade.cluster_posterior(gp, Tensor(means))
    assert list(gamma.data.argmax(axis=1)) == [0, 1, 2]


def test_assign_tie_smallest_id():
    gm = GaussianMixture(np.array([0.5, 0.5]), np.zeros((2, 2)), np.zeros((2, 2)))
    gp = vade.GmmParams.from_mixture(gm)
    gamma = vade.cluster_posterior(gp, Tensor(np.ones((1, 2))))
    assert gamma.data.argmax(axis=1)[0] == 0


def test_assign_matches_enumeration(rng):
    vp = make_params(rng, k=6, d_z=3)
    x = rng.normal(size=(10, 4))
    got = vade.assign(vp, x)
    fw = vade.mention_forward(vp, Tensor(x), np.zeros((10, 3)))
    want = np.array([int(np.argmax(row)) for row in fw.gamma.data])
    assert np.array_equal(got, want)


def test_vaes_share_no_parameters(rng):
    a = make_params(rng)
    b = make_params(rng)
    ids_a = {id(t) for t in all_tensors(a)}
    ids_b = {id(t) for t in all_tensors(b)}
    assert not ids_a & ids_b


def test_elbo_decreases_under_decoder_steps(rng):
    # smoke descent: 10 decoder-only Adam steps on a fixed batch
    from kgcanon.autodiff import AdamConfig, ParamStore, adam_step

    vp = make_params(rng)
    x = rng.normal(size=(8, 4))
    eps = rng.normal(size=(8, 2))
    store = ParamStore()
    for name, t in vp.named_tensors().items():
        store.register(name, t)
    store.set_trainable(False)
    store.set_trainable(True, ("dec.",))

    def loss_value():
        fw = vade.mention_forward(vp, Tensor(x), eps)
        return ad.tsum(vade.elbo_terms(vp, fw))

    history = [loss_value().item()]
    for _ in range(10):
        loss = loss_value()
        ad.backward(loss)
        store.fill_missing_grads()
        adam_step(store, AdamConfig(lr=1e-4))
        history.append(loss_value().item())
    assert all(b < a for a, b in zip(history, history[1:]))
