import numpy as np
import pytest

from visuotactile.mvae.checkpoint import load_checkpoint, read_manifest, save_checkpoint
from visuotactile.mvae.optim import AdamState, adam_step
from visuotactile.mvae.train import TrainConfig, TrainingError, beta_schedule, input_dims, train
from visuotactile.mvae.model import MvaeModel
from helpers import tiny_model, tiny_pairs


def test_adam_first_step_is_lr_sign():
    params = {"w": np.array([1.0, -2.0, 0.5])}
    grads = {"w": np.array([0.3, -4.0, 0.0])}
    st = AdamState()
    assert adam_step(params, grads, st, lr=0.1)
    # bias correction makes the first update lr * g / (|g| + eps)
    assert np.allclose(params["w"], [0.9, -1.9, 0.5], atol=1e-7)
    assert st.t == 1


def test_adam_matches_reference_sequence():
    rng = np.random.default_rng(0)
    p = {"w": rng.normal(size=4)}
    ref = p["w"].copy()
    m = v = np.zeros(4)
    st = AdamState()
    for t in range(1, 6):
        g = rng.normal(size=4)
        adam_step(p, {"w": g}, st, lr=0.01)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    assert np.allclose(p["w"], ref, rtol=1e-14)


def test_adam_skips_non_finite():
    params = {"a": np.ones(2), "b": np.ones(2)}
    st = AdamState()
    assert not adam_step(params, {"a": np.zeros(2), "b": np.array([np.nan, 0.0])}, st)
    assert st.skipped == 1 and st.t == 0
    assert np.array_equal(params["a"], np.ones(2)) and not st.m


def test_beta_schedule():
    assert beta_schedule(0, 50) == 0.0
    assert beta_schedule(25, 50) == 0.5
    assert beta_schedule(80, 50) == 1.0
    with pytest.raises(ValueError):
        beta_schedule(1, 0)


def _setup(epochs=3, seed=0):
    pairs = tiny_pairs()
    cfg = TrainConfig(epochs=epochs, batch_size=7, anneal_epochs=2, hidden=(6, 5), latent_dim=3, seed=seed)
    model = MvaeModel(cfg.model_spec(input_dims(pairs)), seed)
    return model, pairs, cfg


def test_training_is_deterministic():
    a, pairs, cfg = _setup()
    b, _, _ = _setup()
    ra = train(a, pairs, cfg, pairs)
    rb = train(b, pairs, cfg, pairs)
    assert ra.curve == rb.curve
    assert [r["epoch"] for r in ra.curve] == [1, 2, 3]
    assert [r["beta"] for r in ra.curve] == [0.0, 0.5, 1.0]
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    assert {"val_loss", "val_bce_visual", "val_bce_tactile"} <= set(ra.curve[0])


def test_training_reduces_loss():
    model, pairs, cfg = _setup(epochs=40)
    cfg.anneal_epochs = 1
    curve = train(model, pairs, cfg).curve
    assert curve[-1]["train_loss"] < curve[1]["train_loss"]


def test_resume_from_checkpoint_is_exact(tmp_path):
    full, pairs, cfg = _setup(epochs=4)
    whole = train(full, pairs, cfg, pairs).curve
    half, _, cfg2 = _setup(epochs=2)
    first = train(half, pairs, cfg2, pairs)
    save_checkpoint(tmp_path / "ck", half, first.opt, 2)
    model, opt, man = load_checkpoint(tmp_path / "ck")
    assert int(man["epoch"]) == 2
    rest = train(model, pairs, cfg2, pairs, opt=opt, start_epoch=2).curve
    assert first.curve + rest == whole
    assert all(np.array_equal(model.params[k], full.params[k]) for k in full.params)


def test_checkpoint_roundtrip_and_errors(tmp_path):
    model = tiny_model(cond_dim=2)
    save_checkpoint(tmp_path / "c", model, None, 0, {"note": "x"})
    back, opt, man = load_checkpoint(tmp_path / "c")
    assert man["note"] == "x" and opt.t == 0
    assert back.spec == model.spec
    assert all(np.array_equal(back.params[k], model.params[k]) for k in model.params)
    assert read_manifest(tmp_path / "c")["param_keys"].split(",") == list(model.params)
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "missing")


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_training_raises():
    model, pairs, cfg = _setup(epochs=1)
    model.params["dec.pose.b2"][:] = np.inf
    with pytest.raises(TrainingError):
        train(model, pairs, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(mode="sometimes")
