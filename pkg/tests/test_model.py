import math

import numpy as np
import pytest

from visuotactile.mvae.gradcheck import gradient_check, sample_coordinates
from visuotactile.mvae.model import Batch, ModelSpec, MvaeModel, nonempty_subsets
from helpers import random_batch, tiny_model


def _mlp(params, name, x):
    """Plain per-sample forward pass written without the package's MLP class."""
    i = 0
    h = np.asarray(x, dtype=np.float64)
    while f"{name}.W{i}" in params:
        a = h @ params[f"{name}.W{i}"] + params[f"{name}.b{i}"]
        last = f"{name}.W{i + 1}" not in params
        h = a if last else a / (1.0 + math.e ** (-a))
        i += 1
    return h


def reference_elbo(model, batch, subset, beta, eps):
    """Per-sample ELBO with PoE written out from precisions, averaged over samples."""
    spec, p = model.spec, model.params
    L = spec.latent_dim
    n = batch.size
    total = 0.0
    for i in range(n):
        c = [] if not spec.cond_dim else list(batch.condition[i])
        if not all(batch.available[m][i] for m in subset):
            continue
        prec = np.ones(L)
        num = np.zeros(L)
        for m in subset:
            out = _mlp(p, f"enc.{m}", np.concatenate([batch.inputs[m][i], c]))
            mu, lv = out[:L], np.clip(out[L:], -10, 10)
            prec += 1.0 / np.exp(lv)
            num += mu / np.exp(lv)
        var = 1.0 / prec
        mean = num * var
        z = mean + np.sqrt(var) * eps[i]
        loss = 0.0
        for m in spec.modalities:
            y = _mlp(p, f"dec.{m}", np.concatenate([z, c]))
            t = batch.targets[m][i]
            if m == "pose":
                r = np.sum((y - t) ** 2)
            else:
                prob = 1.0 / (1.0 + np.exp(-y))
                r = -np.sum(t * np.log(prob) + (1 - t) * np.log(1 - prob))
            if spec.recon == "mean":
                r /= len(t)
            loss += spec.lambdas[m] * r
        kl = 0.5 * np.sum(mean ** 2 + var - np.log(var) - 1.0)
        total += loss + beta * kl
    return total / n


@pytest.mark.parametrize("subset", nonempty_subsets(("visual", "tactile", "pose")))
@pytest.mark.parametrize("cond_dim", [0, 3])
def test_elbo_matches_reference(subset, cond_dim):
    model = tiny_model(cond_dim=cond_dim)
    batch = random_batch(model, n=6, tactile_avail=[1, 0, 1, 1, 0, 1])
    eps = np.random.default_rng(7).standard_normal((6, 3))
    got = model.elbo(batch, subset, 0.7, eps).loss
    want = reference_elbo(model, batch, subset, 0.7, eps)
    assert got == pytest.approx(want, rel=1e-10)


def test_elbo_mean_recon_matches_reference():
    model = tiny_model(recon="mean")
    batch = random_batch(model)
    eps = np.random.default_rng(2).standard_normal((5, 3))
    s = ("visual", "pose")
    assert model.elbo(batch, s, 1.0, eps).loss == pytest.approx(reference_elbo(model, batch, s, 1.0, eps),
                                                                 rel=1e-10)


def test_subset_counts():
    model = tiny_model()
    eps = np.zeros((5, 3))
    assert model.subset_loss(random_batch(model), 1.0, eps).terms == 7
    # with tactile never available only the three tactile-free subsets remain
    out = model.subset_loss(random_batch(model, tactile_avail=[0] * 5), 1.0, eps)
    assert out.terms == 3
    two = tiny_model(("visual", "tactile"))
    assert two.subset_loss(random_batch(two), 1.0, eps).terms == 3


def test_total_is_sum_of_subset_elbos():
    model = tiny_model()
    batch = random_batch(model, tactile_avail=[1, 0, 1, 0, 1])
    eps = np.random.default_rng(3).standard_normal((5, 3))
    total = model.subset_loss(batch, 0.4, eps).loss
    parts = sum(model.elbo(batch, s, 0.4, eps).loss for s in nonempty_subsets(model.spec.modalities))
    assert total == pytest.approx(parts, rel=1e-12)
    out = model.subset_loss(batch, 0.4, eps)
    assert out.parts.sum() == pytest.approx(out.loss, rel=1e-12)


def test_single_modality_beta_zero_is_autoencoder():
    model = tiny_model(("visual",))
    batch = random_batch(model)
    zero = np.zeros((5, 3))
    out = model.subset_loss(batch, 0.0, zero)
    assert out.terms == 1 and out.kl > 0
    mu, _ = model.posterior(batch.inputs)
    logits, _ = model.decode("visual", mu)
    t = batch.targets["visual"]
    bce = np.sum(np.logaddexp(0, logits) - t * logits, axis=1).mean()
    assert out.loss == pytest.approx(bce, rel=1e-12)


def test_empty_subset_rejected():
    model = tiny_model()
    with pytest.raises(ValueError):
        model.elbo(random_batch(model), (), 1.0, np.zeros((5, 3)))
    with pytest.raises(ValueError):
        model.predict({})


def test_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec((), {})
    with pytest.raises(ValueError):
        ModelSpec(("smell",), {"smell": 3})
    with pytest.raises(ValueError):
        ModelSpec(("visual",), {"visual": 3}, recon="max")


def test_predict_prior_and_masking():
    model = tiny_model()
    batch = random_batch(model, n=4)
    out = model.predict({}, allow_prior=True)
    assert out["visual"].shape == (1, 12)
    assert np.all((out["visual"] > 0) & (out["visual"] < 1))
    masked = model.predict(batch.inputs, available={"visual": np.zeros(4, bool), "tactile": np.zeros(4, bool),
                                                     "pose": np.zeros(4, bool)})
    assert np.allclose(masked["pose"], np.broadcast_to(out["pose"], (4, 7)))


def test_init_is_seeded():
    a, b, c = tiny_model(seed=4), tiny_model(seed=4), tiny_model(seed=5)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    assert not np.array_equal(a.params["enc.visual.W0"], c.params["enc.visual.W0"])


@pytest.mark.parametrize("cond_dim", [0, 2])
def test_gradients_match_finite_differences(cond_dim):
    model = tiny_model(cond_dim=cond_dim)
    batch = random_batch(model, n=4, tactile_avail=[1, 0, 1, 1])
    res = gradient_check(model, batch, beta=0.8, n_params=150, h=1e-5, seed=3)
    assert res["max_rel_error"] < 1e-4, res["worst"]


def test_gradcheck_catches_a_wrong_gradient(monkeypatch):
    model = tiny_model()
    batch = random_batch(model, n=3)
    real = model.loss_and_grads

    def broken(*a, **kw):
        out, grads = real(*a, **kw)
        if grads is not None:
            for g in grads.values():
                g *= 1.1
        return out, grads

    monkeypatch.setattr(model, "loss_and_grads", broken)
    assert gradient_check(model, batch, n_params=20)["max_rel_error"] > 0.05


def test_sample_coordinates_distinct():
    model = tiny_model()
    coords = sample_coordinates(model, 100, seed=0)
    assert len({(k, tuple(i)) for k, i in coords}) == 100
    assert len(sample_coordinates(model, 10 ** 6)) == model.n_params


def test_logvar_clamp_counts_and_blocks_gradient():
    model = tiny_model(("pose",))
    model.params["enc.pose.b2"][3:] = 50.0  # drives every logvar far above the clamp
    batch = random_batch(model, n=2)
    out, grads = model.loss_and_grads(batch, 1.0, np.zeros((2, 3)))
    assert model.clamp_events == 6
    assert np.all(grads["enc.pose.b2"][3:] == 0.0)
