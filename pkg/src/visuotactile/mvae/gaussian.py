"""Diagonal Gaussians: product of experts, KL to the prior, sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOGVAR_MIN, LOGVAR_MAX = -10.0, 10.0


@dataclass
class GaussianBelief:
    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.var = np.asarray(self.var, dtype=np.float64)
        if self.mean.shape != self.var.shape:
            raise ValueError("mean and variance shapes differ")
        if not np.all(self.var > 0):
            raise ValueError("variances must be strictly positive")

    @classmethod
    def from_logvar(cls, mean, logvar):
        return cls(mean, np.exp(logvar))

    @property
    def logvar(self) -> np.ndarray:
        return np.log(self.var)

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]

    def pdf(self, x):
        """1-D density, for quadrature checks."""
        return np.exp(-0.5 * (x - self.mean) ** 2 / self.var) / np.sqrt(2 * np.pi * self.var)


def standard(dim: int) -> GaussianBelief:
    return GaussianBelief(np.zeros(dim), np.ones(dim))


def clamp_logvar(lv):
    """Clamp log-variances; returns (clamped, mask of clamped entries)."""
    out = np.clip(lv, LOGVAR_MIN, LOGVAR_MAX)
    return out, out != lv


def poe_fuse(beliefs, dim: int | None = None) -> GaussianBelief:
    """Product of the experts and a standard Gaussian prior.

    Precisions add: ``T = 1 + sum 1/var_i``, fused ``var = 1/T`` and
    ``mean = sum(mean_i / var_i) / T``.
    """
    beliefs = list(beliefs)
    if not beliefs:
        if dim is None:
            raise ValueError("latent dimension needed when no expert is given")
        return standard(dim)
    shape = beliefs[0].mean.shape
    for b in beliefs:
        if b.mean.shape != shape:
            raise ValueError("experts disagree on latent dimension")
    precision = np.ones(shape)
    weighted = np.zeros(shape)
    for b in beliefs:
        p = 1.0 / b.var
        precision = precision + p
        weighted = weighted + b.mean * p
    return GaussianBelief(weighted / precision, 1.0 / precision)


def poe_logvar(means, logvars):
    """Fuse from log-variances; returns (mean, logvar, cache) for ``poe_backward``."""
    precision = np.ones_like(means[0])
    weighted = np.zeros_like(means[0])
    prec = []
    for mu, lv in zip(means, logvars):
        p = np.exp(-lv)
        prec.append(p)
        precision = precision + p
        weighted = weighted + mu * p
    mean = weighted / precision
    return mean, -np.log(precision), (means, prec, precision, mean)


def poe_backward(cache, g_mean, g_logvar):
    """Gradients of the fused (mean, logvar) with respect to each expert's (mean, logvar)."""
    means, prec, precision, fused = cache
    out = []
    for mu, p in zip(means, prec):
        w = p / precision
        g_mu = g_mean * w
        g_lv = -w * (g_mean * (mu - fused) - g_logvar)
        out.append((g_mu, g_lv))
    return out


def gaussian_kl(q: GaussianBelief) -> float:
    """KL(q || N(0, I)) summed over dimensions."""
    return float(kl_terms(q.mean, q.logvar).sum())


def kl_terms(mean, logvar):
    return 0.5 * (mean ** 2 + np.exp(logvar) - logvar - 1.0)


def reparameterize(q: GaussianBelief, noise) -> np.ndarray:
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape[-1] != q.dim:
        raise ValueError("noise dimension must equal the latent dimension")
    return q.mean + np.sqrt(q.var) * noise
