"""Feed-forward ELU network approximating a potential on ``[d] x simplex``.

The input for state ``x`` and measure ``eta`` is ``onehot(x) ++ eta``.  All
parameters live in one flat float64 vector ``theta``; weights and biases
are views into it, so optimisers can update ``theta`` in place.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import InvalidInputError

ACTIVATION = "elu"


def elu(z):
    out = np.expm1(np.minimum(z, 0.0))
    np.copyto(out, z, where=z > 0)
    return out


def elu_grad_from_output(a):
    """ELU derivative written in terms of the activation ``a = elu(z)``."""
    return np.where(a > 0, 1.0, a + 1.0)


def parameter_count(layer_sizes) -> int:
    return sum(m * n + n for m, n in zip(layer_sizes[:-1], layer_sizes[1:]))


class PotentialNetwork:
    """MLP ``U(x, eta; theta)`` with ELU hidden layers and a linear head.

    Parameters
    ----------
    layer_sizes : sequence of int
        ``[2d, hidden..., 1]``.
    theta : ndarray, optional
        Flat parameter vector.  Glorot-uniform initialisation when omitted.
    seed : int
        Seed for the initialisation.
    zero_head : bool
        Start the output layer at zero, so the network is identically 0.
    """

    def __init__(self, layer_sizes, theta=None, seed: int = 0, zero_head: bool = False):
        layer_sizes = [int(s) for s in layer_sizes]
        if len(layer_sizes) < 2 or layer_sizes[-1] != 1 or layer_sizes[0] % 2:
            raise InvalidInputError(f"layer sizes must be [2d, ..., 1], got {layer_sizes}")
        self.layer_sizes = layer_sizes
        self.d = layer_sizes[0] // 2
        count = parameter_count(layer_sizes)
        if theta is None:
            theta = self._glorot(np.random.default_rng(seed), zero_head)
        theta = np.array(theta, dtype=float)
        if theta.shape != (count,):
            raise InvalidInputError(
                f"parameter vector has {theta.size} entries, layer sizes need {count}"
            )
        self.theta = theta

    @classmethod
    def default(cls, d: int, hidden=(64, 64), seed: int = 0, **kwargs) -> "PotentialNetwork":
        return cls([2 * d, *hidden, 1], seed=seed, **kwargs)

    def _glorot(self, rng, zero_head):
        chunks = []
        pairs = list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))
        for k, (m, n) in enumerate(pairs):
            limit = np.sqrt(6.0 / (m + n))
            W = rng.uniform(-limit, limit, size=(m, n))
            if zero_head and k == len(pairs) - 1:
                W[:] = 0.0
            chunks += [W.ravel(), np.zeros(n)]
        return np.concatenate(chunks)

    @property
    def layers(self):
        """List of ``(W, b)`` views into ``theta``."""
        out, pos = [], 0
        for m, n in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            W = self.theta[pos : pos + m * n].reshape(m, n)
            pos += m * n
            out.append((W, self.theta[pos : pos + n]))
            pos += n
        return out

    def copy(self) -> "PotentialNetwork":
        return PotentialNetwork(self.layer_sizes, self.theta.copy())

    # -- evaluation ---------------------------------------------------------

    def encode(self, eta) -> np.ndarray:
        """Inputs for every state at every measure: shape ``(..., d, 2d)``."""
        eta = np.asarray(eta, dtype=float)
        d = self.d
        onehot = np.broadcast_to(np.eye(d), eta.shape[:-1] + (d, d))
        etas = np.broadcast_to(eta[..., None, :], eta.shape[:-1] + (d, d))
        return np.concatenate([onehot, etas], axis=-1)

    def forward(self, inputs, keep=False):
        """Evaluate on rows of ``inputs`` (shape ``(N, 2d)``); returns ``(N,)``.

        With ``keep=True`` also returns the cache needed by :meth:`backward`.
        """
        a = np.asarray(inputs, dtype=float)
        cache = [a]
        layers = self.layers
        for k, (W, b) in enumerate(layers):
            z = a @ W + b
            if k < len(layers) - 1:
                a = elu(z)
                cache.append(a)
            else:
                a = z
        out = a[:, 0]
        return (out, cache) if keep else out

    def backward(self, cache, grad_out) -> np.ndarray:
        """Gradient of ``sum(grad_out * forward(inputs))`` with respect to ``theta``."""
        layers = self.layers
        grads = [None] * len(layers)
        delta = np.asarray(grad_out, dtype=float)[:, None]
        for k in range(len(layers) - 1, -1, -1):
            W, _ = layers[k]
            a_prev = cache[k]
            grads[k] = (a_prev.T @ delta, delta.sum(axis=0))
            if k > 0:
                delta = (delta @ W.T) * elu_grad_from_output(a_prev)
        return np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in grads])

    def __call__(self, x: int, eta) -> float:
        """``U(x, eta)`` for a single state and measure."""
        eta = np.asarray(eta, dtype=float)
        row = np.concatenate([np.eye(self.d)[x], eta])[None, :]
        return float(self.forward(row)[0])

    def potential(self, eta) -> np.ndarray:
        """Vector ``(U(x, eta))_x``; batched over leading axes of ``eta``."""
        eta = np.asarray(eta, dtype=float)
        X = self.encode(eta)
        return self.forward(X.reshape(-1, 2 * self.d)).reshape(eta.shape)

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "layer_sizes": self.layer_sizes,
            "activation": ACTIVATION,
            "weights": [W.tolist() for W, _ in self.layers],
            "biases": [b.tolist() for _, b in self.layers],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PotentialNetwork":
        if data.get("activation", ACTIVATION) != ACTIVATION:
            raise InvalidInputError(f"unsupported activation {data['activation']!r}")
        sizes = [int(s) for s in data["layer_sizes"]]
        chunks = []
        for W, b in zip(data["weights"], data["biases"]):
            chunks += [np.asarray(W, float).ravel(), np.asarray(b, float).ravel()]
        theta = np.concatenate(chunks) if chunks else np.zeros(0)
        net = cls(sizes, theta)
        for (W, b), W_in, b_in in zip(net.layers, data["weights"], data["biases"]):
            if np.shape(W_in) != W.shape or np.shape(b_in) != b.shape:
                raise InvalidInputError("weight shapes do not match layer sizes")
        return net

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PotentialNetwork":
        return cls.from_dict(json.loads(text))


class ConstantPotential:
    """Measure-independent potential ``U(x, eta) = u_x``.

    Drop-in replacement for :class:`PotentialNetwork` wherever only
    evaluation is needed.
    """

    def __init__(self, u):
        self.u = np.asarray(u, dtype=float)
        self.d = self.u.shape[0]

    def __call__(self, x: int, eta) -> float:
        return float(self.u[x])

    def potential(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        return np.broadcast_to(self.u, eta.shape).copy()
