"""KitNET: an ensemble of small autoencoders scored by an output autoencoder.

Each ensemble member reconstructs one feature group of the instance and
reports its RMSE; the output autoencoder reconstructs the vector of
(0-1 normalized) ensemble RMSEs and its own RMSE is the anomaly score.
Training is single-pass SGD, one instance at a time.

All parameters of a model sit in one flat buffer; :class:`Autoencoder`
objects are views into it. The numerical work is done by the compiled
kernels in :mod:`kitsune._kernels`.
"""

import json
import math

import numpy as np

from kitsune import _kernels as K
from kitsune.feature_mapper import FeatureMap

__all__ = ["Autoencoder", "KitNET", "ModeError", "rmse", "sigmoid"]


class ModeError(RuntimeError):
    """Operation not allowed in the model's current mode."""


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def rmse(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size == 0:
        raise ValueError(f"rmse needs equal non-empty shapes, got {x.shape} and {y.shape}")
    return float(np.sqrt(np.mean((x - y) ** 2)))


def hidden_size(d_in, rho):
    if not 0 < rho <= 1:
        raise ValueError(f"compression ratio must be in (0, 1], got {rho}")
    return max(1, math.ceil(rho * d_in))


class Autoencoder:
    """Three-layer autoencoder with tied weights and 0-1 input normalization.

    ``W`` has shape ``(d_hidden, d_in)``; the decoder uses ``W.T``. Parameters
    and the normalization extrema are views into ``buffer`` starting at
    ``offset``, so several autoencoders can share one contiguous array.
    """

    def __init__(self, d_in, d_hidden, lr=0.1, buffer=None, offset=0):
        if not 1 <= d_hidden <= d_in:
            raise ValueError(f"need 1 <= d_hidden <= d_in, got {d_hidden}, {d_in}")
        self.d_in = d_in
        self.d_hidden = d_hidden
        self.lr = lr
        size = K.block_size(d_in, d_hidden)
        if buffer is None:
            buffer = np.zeros(size)
            buffer[size - 2 * d_in : size - d_in] = np.inf
            buffer[size - d_in :] = -np.inf
        self.buffer = buffer
        self.offset = offset
        o, h, d = offset, d_hidden, d_in
        self.W = buffer[o : o + h * d].reshape(h, d)
        o += h * d
        self.b_enc = buffer[o : o + h]
        o += h
        self.b_dec = buffer[o : o + d]
        o += d
        self.norm_min = buffer[o : o + d]
        o += d
        self.norm_max = buffer[o : o + d]
        self._counters = np.zeros(1, dtype=np.int64)

    @classmethod
    def create(cls, d_in, rho=0.75, lr=0.1, rng=None):
        """A fresh autoencoder with weights drawn from U(-1/d_in, 1/d_in)."""
        rng = np.random.default_rng(rng)
        ae = cls(d_in, hidden_size(d_in, rho), lr)
        ae.W[:] = rng.uniform(-1.0 / d_in, 1.0 / d_in, ae.W.shape)
        return ae

    def __repr__(self):
        return f"Autoencoder(d_in={self.d_in}, d_hidden={self.d_hidden}, lr={self.lr})"

    @property
    def decoder_weights(self):
        return self.W.T

    @property
    def macs(self):
        """Multiply-accumulates of one forward pass."""
        return 2 * self.d_hidden * self.d_in

    def _vec(self, v):
        v = np.ascontiguousarray(v, dtype=np.float64)
        if v.shape != (self.d_in,):
            raise ValueError(f"expected length {self.d_in}, got shape {v.shape}")
        return v

    def normalize(self, v, learning=False):
        """Scale ``v`` to [0, 1] by the recorded extrema, updating them first when learning.

        Outside training values are not clamped: falling outside the learned
        range is part of the anomaly signal.
        """
        v = self._vec(v)
        out = np.empty(self.d_in)
        K.normalize(self.buffer, self.offset, self.d_hidden, self.d_in, v, out, learning)
        return out

    def forward(self, v):
        """Return ``(hidden activations, reconstruction)`` of a normalized input."""
        v = self._vec(v)
        H = np.empty(self.d_hidden)
        Y = np.empty(self.d_in)
        K.forward(self.buffer, self.offset, self.d_hidden, self.d_in, v, H, Y, self._counters)
        return H, Y

    def loss(self, v):
        _, y = self.forward(v)
        return float(np.mean((y - v) ** 2))

    def gradients(self, v):
        """Loss and its gradients ``(loss, dW, db_enc, db_dec)`` for one input."""
        v = self._vec(v)
        H, Y = self.forward(v)
        dO = np.empty(self.d_in)
        dH = np.empty(self.d_hidden)
        K.deltas(self.buffer, self.offset, self.d_hidden, self.d_in, v, H, Y, dO, dH)
        dW = np.outer(H, dO) + np.outer(dH, v)
        return float(np.mean((Y - v) ** 2)), dW, dH, dO

    def sgd_step(self, v):
        """One SGD update on ``v``; returns the RMSE of the pre-update reconstruction."""
        v = self._vec(v)
        n = self.d_in
        return K.sgd_step(
            self.buffer, self.offset, self.d_hidden, n, v,
            np.empty(self.d_hidden), np.empty(n), np.empty(n), np.empty(self.d_hidden),
            self.lr, self._counters,
        )

    def score(self, v):
        """RMSE reconstruction error of a normalized input."""
        _, y = self.forward(v)
        return rmse(v, y)


class KitNET:
    """The anomaly detector over a fixed :class:`FeatureMap`.

    Parameters
    ----------
    fmap : FeatureMap
        Assignment of features to ensemble members.
    rho : float
        Hidden-layer compression ratio; a member with ``d`` inputs gets
        ``ceil(rho * d)`` hidden units.
    lr : float
        SGD learning rate.
    beta_s : float
        Alert sensitivity; alerts fire when ``score >= phi * beta_s``.
    seed : int or None
        Seed for weight initialization.
    """

    def __init__(self, fmap, rho=0.75, lr=0.1, beta_s=1.0, seed=None):
        if not isinstance(fmap, FeatureMap):
            raise TypeError("fmap must be a FeatureMap")
        if beta_s < 1:
            raise ValueError("beta_s must be >= 1")
        self.fmap = fmap
        self.rho = rho
        self.lr = lr
        self.beta_s = beta_s
        self.seed = seed
        self.phi = -1.0
        self.mode = "train"
        self.n_trained = 0
        self.n_executed = 0

        k = fmap.k
        dims = [*fmap.sizes, k]
        hidden = [hidden_size(d, rho) for d in dims]
        layout = np.zeros((k + 1, 4), dtype=np.int64)
        offset = 0
        index_offset = 0
        for i, (d, h) in enumerate(zip(dims, hidden)):
            layout[i] = (d, h, offset, index_offset if i < k else -1)
            offset += K.block_size(d, h)
            index_offset += d
        self.layout = layout
        self.index = fmap.index
        self.params = np.zeros(offset)
        self.counters = np.zeros(1, dtype=np.int64)
        self.ensemble = [self._view(i) for i in range(k)]
        self.output_ae = self._view(k)

        rng = np.random.default_rng(seed)
        for ae in self.autoencoders:
            ae.W[:] = rng.uniform(-1.0 / ae.d_in, 1.0 / ae.d_in, ae.W.shape)
            ae.norm_min[:] = np.inf
            ae.norm_max[:] = -np.inf

    def _view(self, i):
        d, h, o, _ = self.layout[i]
        ae = Autoencoder(int(d), int(h), self.lr, self.params, int(o))
        ae._counters = self.counters
        return ae

    @property
    def autoencoders(self):
        return [*self.ensemble, self.output_ae]

    @property
    def k(self):
        return self.fmap.k

    @property
    def n(self):
        return self.fmap.n

    @property
    def threshold(self):
        return self.phi * self.beta_s

    def _instance(self, x):
        if type(x) is np.ndarray and x.dtype == np.float64 and x.shape == (self.n,) and x.flags.c_contiguous:
            return x
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise ValueError(f"expected an instance of length {self.n}, got shape {x.shape}")
        return x

    def _matrix(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n:
            raise ValueError(f"expected instances of width {self.n}, got shape {X.shape}")
        return X

    def train_step(self, x):
        """Learn from one instance and return its anomaly score.

        ``x`` is the full feature vector; the feature map is applied inside.
        The threshold ``phi`` tracks the largest score seen while training.
        """
        if self.mode != "train":
            raise ModeError("train_step called in execute mode")
        zn = np.empty(self.k)
        s = K.train_step(self.params, self.layout, self.index, self._instance(x), self.lr, self.counters, zn)
        self.n_trained += 1
        if s >= self.phi:
            self.phi = s
        return s

    def train_many(self, X):
        if self.mode != "train":
            raise ModeError("train_many called in execute mode")
        X = self._matrix(X)
        out = np.empty(len(X))
        K.train_many(self.params, self.layout, self.index, X, self.lr, self.counters, out)
        self.n_trained += len(X)
        if len(out):
            self.phi = max(self.phi, float(out.max()))
        return out

    def freeze(self):
        """Switch to execute mode; parameters, extrema and phi stop changing."""
        if self.n_trained == 0:
            raise ModeError("cannot execute a model that was never trained")
        self.mode = "execute"

    def _check_execute(self):
        if self.mode != "execute":
            raise ModeError("model is still training; call freeze() first")

    def execute_step(self, x):
        """Anomaly score of one instance; no state other than counters changes."""
        if self.mode != "execute":
            self._check_execute()
        s = K.execute_step(self.params, self.layout, self.index, self._instance(x), self.counters)
        self.n_executed += 1
        return s

    def execute_many(self, X):
        self._check_execute()
        X = self._matrix(X)
        out = np.empty(len(X))
        K.execute_many(self.params, self.layout, self.index, X, self.counters, out)
        self.n_executed += len(X)
        return out

    def ensemble_errors(self, x):
        """Normalized ensemble RMSE vector fed to the output layer for ``x``."""
        self._check_execute()
        zn = np.empty(self.k)
        K.execute_into(self.params, self.layout, self.index, self._instance(x), np.zeros(1, np.int64), zn)
        return zn

    def is_alert(self, s):
        if self.phi < 0:
            raise ModeError("threshold unset: the model has not been trained")
        return s >= self.phi * self.beta_s

    def execute_macs(self):
        """Closed-form multiply-accumulate count of one :meth:`execute_step`."""
        return sum(ae.macs for ae in self.autoencoders)

    def to_dict(self):
        return {
            "format": "kitnet-model",
            "version": 1,
            "feature_map": self.fmap.to_dict(),
            "rho": self.rho,
            "lr": self.lr,
            "beta_s": self.beta_s,
            "seed": self.seed,
            "phi": self.phi,
            "mode": self.mode,
            "n_trained": self.n_trained,
            "autoencoders": [
                {
                    "d_in": ae.d_in,
                    "d_hidden": ae.d_hidden,
                    "W": ae.W.tolist(),
                    "b_enc": ae.b_enc.tolist(),
                    "b_dec": ae.b_dec.tolist(),
                    "norm_min": ae.norm_min.tolist(),
                    "norm_max": ae.norm_max.tolist(),
                }
                for ae in self.autoencoders
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != "kitnet-model":
            raise ValueError("not a serialized KitNET model")
        model = cls(
            FeatureMap.from_dict(doc["feature_map"]),
            rho=doc["rho"], lr=doc["lr"], beta_s=doc["beta_s"], seed=doc["seed"],
        )
        if len(doc["autoencoders"]) != len(model.autoencoders):
            raise ValueError("autoencoder count does not match the feature map")
        for ae, rec in zip(model.autoencoders, doc["autoencoders"]):
            if (rec["d_in"], rec["d_hidden"]) != (ae.d_in, ae.d_hidden):
                raise ValueError("autoencoder dimensions do not match the feature map")
            for name in ("W", "b_enc", "b_dec", "norm_min", "norm_max"):
                getattr(ae, name)[...] = np.asarray(rec[name], dtype=np.float64)
        model.phi = float(doc["phi"])
        model.mode = doc["mode"]
        model.n_trained = int(doc["n_trained"])
        return model

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
