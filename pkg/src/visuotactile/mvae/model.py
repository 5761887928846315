"""Multimodal VAE with product-of-experts fusion and hand-derived gradients.

Every modality has a dense encoder emitting ``(mean, logvar)`` and a dense
decoder.  Image decoders emit logits, the pose decoder emits values.  The
condition vector, when present, is appended to every encoder input and to
the latent code before decoding.

Batch losses are means over samples; within a sample the reconstruction of
each modality is summed over its elements (``recon="sum"``) or averaged
(``recon="mean"``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .gaussian import clamp_logvar, kl_terms, poe_logvar, poe_backward
from .losses import bce_logits_grad, bce_logits_rows, squared_error_grad, squared_error_rows
from .nn import MLP, sigmoid

IMAGE_MODALITIES = ("visual", "tactile")
ALL_MODALITIES = ("visual", "tactile", "pose")
DEFAULT_LAMBDA = {"visual": 1.0, "tactile": 1.0, "pose": 1000.0}


def nonempty_subsets(modalities) -> list[tuple]:
    mods = tuple(modalities)
    return [s for r in range(1, len(mods) + 1) for s in combinations(mods, r)]


@dataclass(frozen=True)
class ModelSpec:
    modalities: tuple
    dims: dict
    latent_dim: int = 16
    hidden: tuple = (256, 128)
    cond_dim: int = 0
    lambdas: dict = field(default_factory=lambda: dict(DEFAULT_LAMBDA))
    recon: str = "sum"

    def __post_init__(self):
        if not self.modalities:
            raise ValueError("a model needs at least one modality")
        for m in self.modalities:
            if m not in ALL_MODALITIES:
                raise ValueError(f"unknown modality {m!r}")
            if self.dims.get(m, 0) < 1:
                raise ValueError(f"missing input dimension for {m}")
            if not self.lambdas.get(m, 0) > 0:
                raise ValueError(f"lambda for {m} must be positive")
        if self.recon not in ("sum", "mean"):
            raise ValueError("recon must be 'sum' or 'mean'")

    def encoder(self, m: str) -> MLP:
        return MLP(f"enc.{m}", (self.dims[m] + self.cond_dim, *self.hidden, 2 * self.latent_dim))

    def decoder(self, m: str) -> MLP:
        return MLP(f"dec.{m}", (self.latent_dim + self.cond_dim, *self.hidden[::-1], self.dims[m]))


@dataclass
class Batch:
    inputs: dict  # modality -> (N, D)
    available: dict  # modality -> (N,) bool
    targets: dict
    condition: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(next(iter(self.targets.values())))

    @classmethod
    def from_pairs(cls, pairs, idx=None):
        p = pairs if idx is None else pairs.subset(idx)
        return cls(p.inputs, p.available, p.targets, p.condition)


@dataclass
class LossBreakdown:
    loss: float
    recon: dict
    kl: float
    terms: int
    parts: np.ndarray | None = None  # every weighted per-sample term, in a fixed order


class MvaeModel:
    def __init__(self, spec: ModelSpec, seed: int = 0):
        self.spec = spec
        self.encoders = {m: spec.encoder(m) for m in spec.modalities}
        self.decoders = {m: spec.decoder(m) for m in spec.modalities}
        rng = np.random.default_rng(seed)
        self.params = {}
        for m in spec.modalities:
            self.params.update(self.encoders[m].init(rng))
        for m in spec.modalities:
            self.params.update(self.decoders[m].init(rng))
        self.clamp_events = 0

    @property
    def n_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    @property
    def latent_dim(self) -> int:
        return self.spec.latent_dim

    def zero_grads(self) -> dict:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def _with_cond(self, x, c):
        return x if c is None or self.spec.cond_dim == 0 else np.concatenate([x, c], axis=1)

    def encode(self, m: str, x, c=None):
        out, cache = self.encoders[m].forward(self.params, self._with_cond(x, c))
        L = self.latent_dim
        lv, clamped = clamp_logvar(out[:, L:])
        return out[:, :L], lv, clamped, cache

    def decode(self, m: str, z, c=None):
        return self.decoders[m].forward(self.params, self._with_cond(z, c))

    def _recon(self, m, out, y):
        if m in IMAGE_MODALITIES:
            r, g = bce_logits_rows(out, y), bce_logits_grad(out, y)
        else:
            r, g = squared_error_rows(out, y), squared_error_grad(out, y)
        if self.spec.recon == "mean":
            d = out.shape[1]
            r, g = r / d, g / d
        return r, g

    def loss_and_grads(self, batch: Batch, beta: float, eps: np.ndarray, subsets=None,
                       need_grad: bool = True):
        """Sum of time-lagged ELBO terms over ``subsets`` (default: every non-empty subset).

        A subset contributes for a sample only if all of its modalities are
        available at that sample.  ``eps`` (N, latent) is shared by all subsets.
        """
        spec = self.spec
        n = batch.size
        c = batch.condition if spec.cond_dim else None
        subsets = nonempty_subsets(spec.modalities) if subsets is None else subsets
        grads = self.zero_grads() if need_grad else None
        enc = {}
        used = {m for s in subsets for m in s}
        for m in spec.modalities:
            if m in used:
                enc[m] = self.encode(m, batch.inputs[m], c)
                self.clamp_events += int(enc[m][2].sum())
        g_enc = {m: [np.zeros((n, self.latent_dim)), np.zeros((n, self.latent_dim))] for m in enc}
        total = 0.0
        parts = []
        recon_tot = {m: 0.0 for m in spec.modalities}
        kl_tot = 0.0
        terms = 0
        for s in subsets:
            w = np.ones(n)
            for m in s:
                w = w * batch.available[m]
            if not w.any():
                continue
            terms += 1
            w = w / n
            mu, lv, cache = poe_logvar([enc[m][0] for m in s], [enc[m][1] for m in s])
            std = np.exp(0.5 * lv)
            z = mu + std * eps
            g_z = np.zeros_like(z)
            for m in spec.modalities:
                out, dcache = self.decode(m, z, c)
                r, g = self._recon(m, out, batch.targets[m])
                lam = spec.lambdas[m]
                total += lam * float(w @ r)
                parts.append(lam * w * r)
                recon_tot[m] += float(w @ r)
                if need_grad:
                    g_in = self.decoders[m].backward(self.params, dcache, lam * w[:, None] * g, grads)
                    g_z += g_in[:, :self.latent_dim]
            kl = kl_terms(mu, lv).sum(axis=1)
            total += beta * float(w @ kl)
            parts.append(beta * w * kl)
            kl_tot += float(w @ kl)
            if need_grad:
                g_mu = g_z + beta * w[:, None] * mu
                g_lv = g_z * 0.5 * std * eps + beta * w[:, None] * 0.5 * (np.exp(lv) - 1.0)
                for m, (gm, gl) in zip(s, poe_backward(cache, g_mu, g_lv)):
                    g_enc[m][0] += gm
                    g_enc[m][1] += gl
        if need_grad:
            for m, (gm, gl) in g_enc.items():
                _, _, clamped, cache = enc[m]
                gout = np.concatenate([gm, np.where(clamped, 0.0, gl)], axis=1)
                self.encoders[m].backward(self.params, cache, gout, grads)
        parts = np.concatenate(parts) if parts else np.zeros(0)
        return LossBreakdown(total, recon_tot, kl_tot, terms, parts), grads

    def elbo(self, batch: Batch, subset, beta: float, eps) -> LossBreakdown:
        """Single ELBO term for input subset ``subset`` (all targets decoded)."""
        if not subset:
            raise ValueError("an ELBO needs at least one observed modality")
        return self.loss_and_grads(batch, beta, eps, [tuple(subset)], need_grad=False)[0]

    def subset_loss(self, batch: Batch, beta: float, eps, need_grad: bool = False):
        out, grads = self.loss_and_grads(batch, beta, eps, need_grad=need_grad)
        return (out, grads) if need_grad else out

    def posterior(self, inputs: dict, condition=None, available: dict | None = None):
        """Fused (mean, logvar) from whichever modalities appear in ``inputs``.

        ``available`` optionally masks experts per sample; a sample with no
        available expert falls back to the prior.
        """
        present = [m for m in self.spec.modalities if inputs.get(m) is not None]
        if present:
            n = len(inputs[present[0]])
        else:
            n = len(condition) if condition is not None else 1
        c = condition if self.spec.cond_dim else None
        precision = np.ones((n, self.latent_dim))
        weighted = np.zeros((n, self.latent_dim))
        for m in present:
            mu, lv, _, _ = self.encode(m, inputs[m], c)
            p = np.exp(-lv)
            if available is not None and m in available:
                p = p * np.asarray(available[m], dtype=np.float64)[:, None]
            precision += p
            weighted += mu * p
        return weighted / precision, -np.log(precision)

    def predict(self, inputs: dict, condition=None, use_mean: bool = True, rng=None,
                allow_prior: bool = False, available: dict | None = None) -> dict:
        """Decode every modality from the fused posterior.

        Image heads are squashed to [0, 1]; raw logits are returned under
        ``"<modality>_logits"``.  Without any observed modality the prior is
        used only when ``allow_prior`` is set.
        """
        present = [m for m in self.spec.modalities if inputs.get(m) is not None]
        if not present and not allow_prior:
            raise ValueError("prediction needs at least one observed modality")
        mu, lv = self.posterior(inputs, condition, available)
        z = mu
        if not use_mean:
            rng = np.random.default_rng() if rng is None else rng
            z = mu + np.exp(0.5 * lv) * rng.standard_normal(mu.shape)
        c = condition if self.spec.cond_dim else None
        out = {}
        for m in self.spec.modalities:
            y, _ = self.decode(m, z, c)
            if m in IMAGE_MODALITIES:
                out[m + "_logits"] = y
                out[m] = sigmoid(y)
            else:
                out[m] = y
        return out
