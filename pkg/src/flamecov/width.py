"""Gaussian-process regression of the flame cross-section width w(l).

The GP has a zero prior mean and one of three 1D covariances:

``thinplate``
    k(r) = sf^2 (2 r^3 - 3 R r^2 + R^3) / R^3 for r <= R, zero beyond, where
    R is the support radius. This is the thin-plate covariance used for GP
    implicit surfaces (positive definite in up to three dimensions), scaled
    so that k(0) = sf^2.
``cubic``
    Cubic-spline covariance on l >= 0,
    k(s, t) = sf^2 (|s - t| m^2 / 2 + m^3 / 3) / R^3 with m = min(s, t).
``sqexp``
    Squared exponential with length scale ``R / 4``.

Unless given, the support radius is ``2 * max(l) + 0.1`` m so any query
along the flame stays inside it. With the R^3 scaling sf is a length: the
prior standard deviation of the width, 0.1 m by default.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import SingularGramError

KERNELS = ("thinplate", "cubic", "sqexp")

SIGMA_N_DEFAULT = 0.002
SIGMA_F_DEFAULT = 0.1
_JITTER_BASE = 1e-10
_JITTER_DOUBLINGS = 8


def default_support(train_l) -> float:
    lmax = float(np.max(train_l)) if len(train_l) else 0.0
    return 2.0 * lmax + 0.1


def covariance(kind: str, s, t, sigma_f: float = 1.0, support: float = 1.0) -> np.ndarray:
    """Covariance matrix between 1D input arrays ``s`` and ``t``."""
    s = np.asarray(s, dtype=float)[:, None]
    t = np.asarray(t, dtype=float)[None, :]
    if kind == "thinplate":
        R = support
        r = np.minimum(np.abs(s - t), R)
        k = (2.0 * r**3 - 3.0 * R * r**2 + R**3) / R**3
    elif kind == "cubic":
        m = np.minimum(s, t)
        k = (np.abs(s - t) * m**2 / 2.0 + m**3 / 3.0) / support**3
    elif kind == "sqexp":
        ell = support / 4.0
        k = np.exp(-0.5 * ((s - t) / ell) ** 2)
    else:
        raise ValueError(f"unknown kernel {kind!r}")
    return sigma_f**2 * k


@dataclass(frozen=True, eq=False)
class WidthModel:
    train_l: np.ndarray
    train_w: np.ndarray
    sigma_n: float = SIGMA_N_DEFAULT
    kernel: str = "thinplate"
    sigma_f: float = SIGMA_F_DEFAULT
    support: float | None = None
    _chol: tuple = field(default=None, repr=False)
    _weights: np.ndarray = field(default=None, repr=False)

    def predict(self, l):
        return width_predict(self, l)

    def mean(self, l) -> np.ndarray:
        """Posterior mean only, clamped at zero."""
        l = np.atleast_1d(np.asarray(l, dtype=float))
        ks = covariance(self.kernel, l, self.train_l, self.sigma_f, self.support)
        return np.maximum(ks @ self._weights, 0.0)

    def to_dict(self) -> dict:
        d = {
            "l": self.train_l.tolist(),
            "w": self.train_w.tolist(),
            "sigma_n": self.sigma_n,
            "kernel": self.kernel,
            "sigma_f": self.sigma_f,
        }
        if self.support != default_support(self.train_l):
            d["support"] = self.support
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WidthModel":
        return width_fit(
            list(zip(d["l"], d["w"])),
            sigma_n=float(d.get("sigma_n", SIGMA_N_DEFAULT)),
            kernel=d.get("kernel", "thinplate"),
            sigma_f=float(d.get("sigma_f", SIGMA_F_DEFAULT)),
            support=d.get("support"),
        )


def _factor(K: np.ndarray):
    try:
        return cho_factor(K, lower=True, check_finite=False)
    except LinAlgError:
        pass
    n = len(K)
    jitter = _JITTER_BASE * max(abs(np.trace(K)) / n, 1e-300)
    for _ in range(_JITTER_DOUBLINGS + 1):
        try:
            return cho_factor(K + jitter * np.eye(n), lower=True, check_finite=False)
        except LinAlgError:
            jitter *= 2.0
    raise SingularGramError("Gram matrix is not positive definite after jitter")


def width_fit(samples, sigma_n: float = SIGMA_N_DEFAULT, kernel: str = "thinplate",
              sigma_f: float = SIGMA_F_DEFAULT, support: float | None = None) -> WidthModel:
    """Fit the width GP to ``(l, w)`` pairs.

    ``samples`` is an iterable of pairs or an (N, 2) array.
    """
    arr = np.asarray(samples, dtype=float).reshape(-1, 2)
    if len(arr) < 1:
        raise ValueError("need at least one width sample")
    if (arr[:, 0] < 0).any() or (arr[:, 1] < 0).any():
        raise ValueError("arc lengths and widths must be non-negative")
    if sigma_n < 0:
        raise ValueError("sigma_n must be non-negative")
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}")
    l, w = arr[:, 0].copy(), arr[:, 1].copy()
    if support is None:
        support = default_support(l)
    K = covariance(kernel, l, l, sigma_f, support) + sigma_n**2 * np.eye(len(l))
    chol = _factor(K)
    weights = cho_solve(chol, w, check_finite=False)
    l.setflags(write=False)
    w.setflags(write=False)
    return WidthModel(l, w, float(sigma_n), kernel, float(sigma_f), float(support), chol, weights)


def _prior_variance(wm: WidthModel, l: np.ndarray) -> np.ndarray:
    if wm.kernel == "thinplate":
        k = np.ones_like(l)
    elif wm.kernel == "cubic":
        k = l**3 / 3.0 / wm.support**3
    else:
        k = np.ones_like(l)
    return wm.sigma_f**2 * k


def width_predict(wm: WidthModel, l):
    """Posterior mean (clamped at zero) and variance at arc length(s) ``l``.

    Scalars in, scalars out; arrays in, arrays out.
    """
    scalar = np.ndim(l) == 0
    la = np.atleast_1d(np.asarray(l, dtype=float))
    ks = covariance(wm.kernel, la, wm.train_l, wm.sigma_f, wm.support)
    mean = np.maximum(ks @ wm._weights, 0.0)
    kss = _prior_variance(wm, la)
    v = cho_solve(wm._chol, ks.T, check_finite=False)
    var = np.maximum(kss - np.einsum("ij,ji->i", ks, v), 0.0)
    if scalar:
        return float(mean[0]), float(var[0])
    return mean, var
