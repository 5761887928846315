"""Small builders shared by several test modules."""
import numpy as np

from visuotactile.dataset.records import EpisodeRecord, RestState
from visuotactile.mvae.model import Batch, ModelSpec, MvaeModel


def fake_record(frames=3, size=4, perturb=False, seed=0):
    rng = np.random.default_rng(seed)
    meta = {"scenario": "perturb" if perturb else "freefall", "object": "box", "seed": seed,
            "dt": 1 / 240, "outcome": "rest", "sensor_size": 0.12}
    pose = rng.normal(size=(frames, 7))
    return EpisodeRecord(
        meta=meta,
        visual=rng.random((frames, size, size, 3)),
        tactile=rng.random((frames, size, size, 3)),
        pose=pose,
        contact_mask=rng.random((frames, size, size)) > 0.5,
        object_mask=rng.random((frames, size, size)) > 0.5,
        contact_active=np.arange(frames) > 0,
        rest=RestState(True, 12, pose[-1].astype(np.float64)),
        condition=np.array([3.0, 0.6, 0.8]) if perturb else None,
    )


def tiny_model(modalities=("visual", "tactile", "pose"), cond_dim=0, seed=0, latent=3, recon="sum",
               hidden=(6, 5), img=12):
    dims = {"visual": img, "tactile": img, "pose": 7}
    spec = ModelSpec(tuple(modalities), {m: dims[m] for m in modalities}, latent, hidden, cond_dim,
                     recon=recon)
    return MvaeModel(spec, seed)


def random_batch(model, n=5, seed=1, tactile_avail=None):
    rng = np.random.default_rng(seed)
    spec = model.spec
    inputs, targets, avail = {}, {}, {}
    for m in spec.modalities:
        d = spec.dims[m]
        if m == "pose":
            inputs[m], targets[m] = rng.normal(size=(n, d)) * 0.3, rng.normal(size=(n, d)) * 0.3
        else:
            inputs[m], targets[m] = rng.random((n, d)), rng.random((n, d))
        avail[m] = np.ones(n, dtype=bool)
    if tactile_avail is not None and "tactile" in avail:
        avail["tactile"] = np.asarray(tactile_avail, dtype=bool)
    cond = rng.normal(size=(n, spec.cond_dim)) if spec.cond_dim else None
    return Batch(inputs, avail, targets, cond)


def tiny_pairs(n_episodes=4, frames=5, perturb=False, mode="final_step", k=1, seed=0):
    from visuotactile.dataset.preprocess import build_pairs, model_frames
    eps = [model_frames(fake_record(frames, 4, perturb, seed + i), 2) for i in range(n_episodes)]
    return build_pairs(eps, mode, k, None, conditioned=perturb)
