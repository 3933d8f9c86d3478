"""Fully connected network trained by mini-batch gradient descent on MSE.

Plain numpy forward/backward passes; weights come from a seeded
Glorot-uniform draw and batches from a seeded per-epoch shuffle, so training
is deterministic.  The gradient code is checked against central finite
differences in the test suite.
"""

from __future__ import annotations

import numpy as np

_ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0).astype(float)),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
}


class FCNNModel:
    kind = "fcnn"

    def __init__(self, hidden=(64, 64), activation="relu", epochs=100,
                 batch_size=32, learning_rate=1e-3, seed=0):
        if epochs < 1:
            raise ValueError("epochs must be >= 1")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.hidden = tuple(int(h) for h in hidden)
        self.activation = activation
        self.epochs = int(epochs)
        self.batch_size = int(batch_size)
        self.learning_rate = float(learning_rate)
        self.seed = int(seed)
        self.weights = []
        self.biases = []

    def init_params(self, d_in, d_out, rng=None):
        rng = rng or np.random.default_rng(self.seed)
        sizes = [d_in, *self.hidden, d_out]
        self.weights, self.biases = [], []
        for a, b in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (a + b))
            self.weights.append(rng.uniform(-limit, limit, size=(a, b)))
            self.biases.append(np.zeros(b))

    def _forward(self, X):
        act, _ = _ACTIVATIONS[self.activation]
        zs, hs = [], [X]
        h = X
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            zs.append(z)
            h = act(z) if i < len(self.weights) - 1 else z
            hs.append(h)
        return zs, hs

    def loss_and_grads(self, X, Y):
        """Mean squared error over all outputs, with dL/dW and dL/db."""
        _, dact = _ACTIVATIONS[self.activation]
        zs, hs = self._forward(X)
        pred = hs[-1]
        n = X.shape[0]
        diff = pred - Y
        loss = float(np.mean(diff ** 2))
        delta = 2.0 * diff / diff.size
        gW = [None] * len(self.weights)
        gb = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            gW[i] = hs[i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * dact(zs[i - 1])
        return loss, gW, gb

    def fit(self, X, Y):
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if Y.ndim == 1:
            Y = Y[:, None]
        rng = np.random.default_rng(self.seed)
        self.init_params(X.shape[1], Y.shape[1], rng)
        n = X.shape[0]
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                batch = order[start:start + self.batch_size]
                _, gW, gb = self.loss_and_grads(X[batch], Y[batch])
                for i in range(len(self.weights)):
                    self.weights[i] -= self.learning_rate * gW[i]
                    self.biases[i] -= self.learning_rate * gb[i]
        return self

    def predict(self, X):
        return self._forward(np.asarray(X, dtype=np.float64))[1][-1]

    # flat parameter vector helpers for the finite-difference check
    def get_flat_params(self):
        return np.concatenate([w.ravel() for w in self.weights]
                              + [b.ravel() for b in self.biases])

    def set_flat_params(self, flat):
        pos = 0
        for i, w in enumerate(self.weights):
            self.weights[i] = flat[pos:pos + w.size].reshape(w.shape).copy()
            pos += w.size
        for i, b in enumerate(self.biases):
            self.biases[i] = flat[pos:pos + b.size].copy()
            pos += b.size

    def flat_grads(self, X, Y):
        _, gW, gb = self.loss_and_grads(X, Y)
        return np.concatenate([g.ravel() for g in gW] + [g.ravel() for g in gb])

    def to_dict(self):
        return {"hidden": list(self.hidden), "activation": self.activation,
                "epochs": self.epochs, "batch_size": self.batch_size,
                "learning_rate": self.learning_rate, "seed": self.seed,
                "weights": [w.tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases]}

    @staticmethod
    def from_dict(d):
        m = FCNNModel(d["hidden"], d["activation"], d["epochs"],
                      d["batch_size"], d["learning_rate"], d["seed"])
        m.weights = [np.asarray(w, dtype=np.float64) for w in d["weights"]]
        m.biases = [np.asarray(b, dtype=np.float64) for b in d["biases"]]
        return m
