"""Discrete-time hazard network: linear step embedding -> GRU -> K logits.

Everything is plain numpy in float64 with hand-written backpropagation
through time. Batches are padded ``(B, T, d)`` arrays; since the recurrence
is causal, trailing padding never influences real steps.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit, logit

from .core import Episode

log = logging.getLogger(__name__)

TENSOR_NAMES = ("W_emb", "b_emb", "W_x", "W_h", "b_gru", "W_out", "b_out")


@dataclass(frozen=True)
class ModelDims:
    d: int
    m: int = 16
    n: int = 32
    K: int = 1

    def shapes(self) -> dict:
        d, m, n, K = self.d, self.m, self.n, self.K
        return {
            "W_emb": (m, d),
            "b_emb": (m,),
            "W_x": (3 * n, m),
            "W_h": (3 * n, n),
            "b_gru": (3 * n,),
            "W_out": (K, n),
            "b_out": (K,),
        }

    def n_params(self) -> int:
        return sum(int(np.prod(s)) for s in self.shapes().values())


class ModelParams:
    """Named float64 tensors of the network plus its dimensions."""

    def __init__(self, dims: ModelDims, tensors: dict):
        shapes = dims.shapes()
        for name in TENSOR_NAMES:
            arr = tensors[name]
            if arr.shape != shapes[name]:
                raise ValueError(f"{name}: shape {arr.shape} != {shapes[name]}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name}: non-finite entries")
        self.dims = dims
        self.tensors = {k: np.asarray(tensors[k], dtype=np.float64) for k in TENSOR_NAMES}

    def __getitem__(self, name):
        return self.tensors[name]

    def copy(self) -> "ModelParams":
        return ModelParams(self.dims, {k: v.copy() for k, v in self.tensors.items()})

    def flat_size(self) -> int:
        return self.dims.n_params()


def empirical_base_rates(targets, K: int):
    """Weighted mean hazard label per horizon, floored away from 0 and 1.

    Returns ``(rates, floored)`` where ``floored`` lists the horizons
    (1-based) that hit the floor.
    """
    num = np.zeros(K)
    den = np.zeros(K)
    n_steps = 0
    for tg in targets:
        y = tg.y[:, :K]
        w = tg.w[:, :K]
        num += np.sum(y * w, axis=0)
        den += np.sum(w, axis=0)
        n_steps += int(np.count_nonzero(np.any(w > 0, axis=1)))
    floor = 1.0 / (n_steps + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        rates = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    low = rates < floor
    high = rates > 1.0 - floor
    rates = np.where(low, floor, np.where(high, 1.0 - floor, rates))
    floored = [int(k) + 1 for k in np.flatnonzero(low | high)]
    if floored:
        log.warning("base rate floored at %.3g for horizons %s", floor, floored)
    return rates, floored


def init_params(dims: ModelDims, base_rates, seed: int) -> ModelParams:
    base_rates = np.asarray(base_rates, dtype=np.float64)
    if base_rates.shape != (dims.K,):
        raise ValueError(f"need {dims.K} base rates, got {base_rates.shape}")
    if np.any(base_rates <= 0) or np.any(base_rates >= 1):
        raise ValueError("base rates must lie strictly in (0, 1); apply the base-rate floor first")
    rng = np.random.Generator(np.random.PCG64(seed))
    fan_in = {"W_emb": dims.d, "b_emb": dims.d, "W_x": dims.m, "W_h": dims.n, "b_gru": dims.n, "W_out": dims.n}
    tensors = {}
    for name, shape in dims.shapes().items():
        if name == "b_out":
            continue
        bound = 1.0 / math.sqrt(fan_in[name])
        tensors[name] = rng.uniform(-bound, bound, size=shape)
    tensors["b_out"] = logit(base_rates)
    return ModelParams(dims, tensors)


def zero_params(dims: ModelDims) -> ModelParams:
    return ModelParams(dims, {k: np.zeros(s) for k, s in dims.shapes().items()})


# --------------------------------------------------------------------------
# network
# --------------------------------------------------------------------------


def run_network(params: ModelParams, X: np.ndarray):
    """Logits ``(B, T, K)`` for a padded batch ``X`` of shape ``(B, T, d)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    B, T, d = X.shape
    if d != params.dims.d:
        raise ValueError(f"feature width {d} does not match model input {params.dims.d}")
    n = params.dims.n
    W_h = params["W_h"]
    E = X @ params["W_emb"].T + params["b_emb"]
    A = E @ params["W_x"].T + params["b_gru"]
    H = np.empty((B, T, n))
    R = np.empty((B, T, n))
    Z = np.empty((B, T, n))
    C = np.empty((B, T, n))
    HN = np.empty((B, T, n))
    h = np.zeros((B, n))
    for t in range(T):
        hh = h @ W_h.T
        a = A[:, t]
        r = expit(a[:, :n] + hh[:, :n])
        z = expit(a[:, n:2 * n] + hh[:, n:2 * n])
        hn = hh[:, 2 * n:]
        c = np.tanh(a[:, 2 * n:] + r * hn)
        h = (1.0 - z) * c + z * h
        R[:, t], Z[:, t], C[:, t], HN[:, t], H[:, t] = r, z, c, hn, h
    logits = H @ params["W_out"].T + params["b_out"]
    cache = {"X": X, "E": E, "H": H, "R": R, "Z": Z, "C": C, "HN": HN}
    return logits, cache


def backward(params: ModelParams, cache: dict, dlogits: np.ndarray) -> dict:
    """Gradients of a scalar loss given its derivative wrt the logits."""
    X, E, H = cache["X"], cache["E"], cache["H"]
    R, Z, C, HN = cache["R"], cache["Z"], cache["C"], cache["HN"]
    B, T, n = H.shape
    W_h = params["W_h"]
    G = dlogits
    grads = {
        "W_out": np.einsum("btk,btn->kn", G, H),
        "b_out": G.sum(axis=(0, 1)),
    }
    dH = G @ params["W_out"]
    dA = np.empty((B, T, 3 * n))
    dW_h = np.zeros_like(W_h)
    dh_next = np.zeros((B, n))
    zeros = np.zeros((B, n))
    for t in range(T - 1, -1, -1):
        h_prev = H[:, t - 1] if t > 0 else zeros
        r, z, c, hn = R[:, t], Z[:, t], C[:, t], HN[:, t]
        dh = dH[:, t] + dh_next
        dc = dh * (1.0 - z)
        dz = dh * (h_prev - c)
        dac = dc * (1.0 - c * c)
        dar = dac * hn * r * (1.0 - r)
        daz = dz * z * (1.0 - z)
        dA[:, t, :n] = dar
        dA[:, t, n:2 * n] = daz
        dA[:, t, 2 * n:] = dac
        dpre_h = np.concatenate([dar, daz, dac * r], axis=1)
        dW_h += dpre_h.T @ h_prev
        dh_next = dh * z + dpre_h @ W_h
    grads["W_h"] = dW_h
    grads["W_x"] = np.einsum("btg,btm->gm", dA, E)
    grads["b_gru"] = dA.sum(axis=(0, 1))
    dE = dA @ params["W_x"]
    grads["W_emb"] = np.einsum("btm,btd->md", dE, X)
    grads["b_emb"] = dE.sum(axis=(0, 1))
    return grads


@dataclass(frozen=True)
class HazardMatrix:
    steps: np.ndarray
    hazards: np.ndarray


@dataclass(frozen=True)
class RiskMatrix:
    F: np.ndarray
    f: np.ndarray


def forward(params: ModelParams, episode: Episode) -> HazardMatrix:
    """Sigmoid outputs at every label step of ``episode``."""
    hist = episode.history[: episode.label_end + 1]
    logits, _ = run_network(params, hist)
    rows = logits[0, episode.label_start: episode.label_end + 1]
    return HazardMatrix(steps=np.arange(episode.label_start, episode.label_end + 1), hazards=expit(rows))


def predict(params: ModelParams, features: np.ndarray) -> np.ndarray:
    """Sigmoid outputs ``(T, K)`` at every step of a single feature matrix."""
    logits, _ = run_network(params, features)
    return expit(logits[0])


def cumulative_failure(hazards, h: Optional[int] = None) -> RiskMatrix:
    lam = hazards.hazards if isinstance(hazards, HazardMatrix) else np.asarray(hazards, dtype=np.float64)
    lam = np.atleast_2d(lam)
    if h is None:
        h = lam.shape[1]
    if h > lam.shape[1]:
        raise ValueError(f"horizon {h} exceeds model width {lam.shape[1]}")
    lam = lam[:, :h]
    with np.errstate(divide="ignore"):
        log_surv = np.cumsum(np.log1p(-lam), axis=1)
    F = -np.expm1(log_surv)
    prev = np.concatenate([np.zeros((lam.shape[0], 1)), log_surv[:, :-1]], axis=1)
    f = np.exp(prev) * lam
    return RiskMatrix(F=F, f=f)


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------


def checkpoint_dict(params: ModelParams, **metadata) -> dict:
    d = params.dims
    meta = {"d": d.d, "m": d.m, "n": d.n, "K": d.K}
    meta.update(metadata)
    tensors = {
        name: {"shape": list(arr.shape), "data": [float(v) for v in arr.ravel(order="C")]}
        for name, arr in params.tensors.items()
    }
    return {"metadata": meta, "tensors": tensors}


def save_checkpoint(path, params: ModelParams, **metadata) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_dict(params, **metadata), fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path):
    """Return ``(params, metadata)``."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    meta = doc["metadata"]
    dims = ModelDims(d=int(meta["d"]), m=int(meta["m"]), n=int(meta["n"]), K=int(meta["K"]))
    tensors = {
        name: np.array(t["data"], dtype=np.float64).reshape(t["shape"]) for name, t in doc["tensors"].items()
    }
    return ModelParams(dims, tensors), meta
