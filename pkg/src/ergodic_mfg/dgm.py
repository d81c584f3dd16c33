"""Deep Galerkin training of the ergodic master equation.

A network ``U(x, eta; theta)`` is fitted so that for sampled measures

    R(x, eta) = H(x, Delta_x U(., eta)) + eta_x
                + sum_{y != z} eta_y D_yz U(x, eta) gamma*_z(y, Delta_y U(., eta)) - rho

vanishes, while the centring term ``(sum_y U(y, eta))^2`` pins the free
additive constant.  ``rho`` is an input (the value of the stationary
system), not a trained quantity.

The simplex derivative ``D_yz`` is a one-sided difference quotient in the
direction ``e_z - e_y``.  Its theta-gradient is exact: every shifted
evaluation is part of the backward pass.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import DivergenceError, DomainError, InvalidInputError
from .model import ModelParams, hamiltonian_rows, potential_differences, selector_slope
from .network import PotentialNetwork

logger = logging.getLogger(__name__)


def sample_simplex(d: int, count: int, seed=None, *, rng=None, margin: float = 0.0) -> np.ndarray:
    """Uniform samples on the simplex, shape ``(count, d)``.

    Normalised standard-exponential draws (Dirichlet(1, ..., 1)).  With
    ``margin > 0`` the samples are uniform on ``{eta : eta_x >= margin}``.
    """
    if count < 1:
        raise InvalidInputError("count must be at least 1")
    if not 0 <= margin * d < 1:
        raise InvalidInputError(f"margin {margin} too large for d={d}")
    if rng is None:
        rng = np.random.default_rng(seed)
    e = rng.standard_exponential((count, d))
    eta = e / e.sum(axis=1, keepdims=True)
    if margin:
        eta = margin + (1.0 - d * margin) * eta
    return eta


def direction_pairs(d: int):
    """Ordered pairs ``(y, z)`` with ``y != z``."""
    return [(y, z) for y in range(d) for z in range(d) if y != z]


def stencil_signs(eta, h: float) -> np.ndarray:
    """+1 for a forward step, -1 for a backward step, per pair and sample.

    The forward point ``eta + h (e_z - e_y)`` needs ``eta_y >= h``; when it
    leaves the simplex the backward point ``eta - h (e_z - e_y)`` is used.
    """
    eta = np.atleast_2d(eta)
    d = eta.shape[1]
    pairs = direction_pairs(d)
    ys = np.array([y for y, _ in pairs])
    zs = np.array([z for _, z in pairs])
    forward = eta[:, ys] >= h
    backward = eta[:, zs] >= h
    if np.any(~forward & ~backward):
        raise DomainError(f"step h={h} leaves the simplex in both directions")
    return np.where(forward, 1.0, -1.0)


def simplex_derivative(net, x: int, eta, y: int, z: int, h: float) -> float:
    """Forward difference ``(U(x, eta + h(e_z - e_y)) - U(x, eta)) / h``."""
    if y == z:
        return 0.0
    eta = np.asarray(eta, dtype=float)
    shifted = eta.copy()
    shifted[z] += h
    shifted[y] -= h
    if shifted[y] < 0:
        raise DomainError(f"eta + h(e_{z} - e_{y}) leaves the simplex for h={h}")
    return (net(x, shifted) - net(x, eta)) / h


def _stencil_points(eta, signs, h):
    N, d = eta.shape
    pairs = direction_pairs(d)
    step = np.zeros((len(pairs), d))
    for j, (y, z) in enumerate(pairs):
        step[j, z], step[j, y] = 1.0, -1.0
    shifted = eta[:, None, :] + h * signs[:, :, None] * step[None]
    return np.concatenate([eta[:, None, :], shifted], axis=1)


class _Evaluation:
    """Network values on the stencil of a batch and the residual pieces."""

    def __init__(self, net, eta, rho, params, h, keep=False):
        eta = np.atleast_2d(np.asarray(eta, dtype=float))
        N, d = eta.shape
        if d != net.d or d != params.d:
            raise InvalidInputError("dimension mismatch between measure, network and model")
        self.eta, self.h, self.params = eta, h, params
        self.pairs = direction_pairs(d)
        self.ys = np.array([y for y, _ in self.pairs], dtype=int)
        self.zs = np.array([z for _, z in self.pairs], dtype=int)
        self.signs = stencil_signs(eta, h)
        points = _stencil_points(eta, self.signs, h)
        inputs = net.encode(points).reshape(-1, 2 * d)
        if keep:
            values, self.cache = net.forward(inputs, keep=True)
        else:
            values = net.forward(inputs)
        self.U = values.reshape(N, len(self.pairs) + 1, d)
        u = self.U[:, 0, :]
        self.u = u
        self.P = potential_differences(u)
        self.H, self.A = hamiltonian_rows(self.P, params)
        # D[n, x, j] = D_{y_j z_j} U(x, eta_n)
        self.D = self.signs[:, None, :] * (
            self.U[:, 1:, :].transpose(0, 2, 1) - u[:, :, None]
        ) / h
        self.w = eta[:, self.ys] * self.A[:, self.ys, self.zs]
        self.drift = np.einsum("nxj,nj->nx", self.D, self.w)
        self.R = self.H + eta + self.drift - rho
        self.C = u.sum(axis=1)

    def grad_values(self, gR, gC):
        """Backpropagate ``dL/dR`` and ``dL/dC`` to the network outputs."""
        N, d = self.eta.shape
        h, params = self.h, self.params
        dU0 = np.zeros((N, d)) + gC[:, None]
        dP = gR[:, :, None] * self.A
        dD = gR[:, :, None] * self.w[:, None, :]
        dw = np.einsum("nx,nxj->nj", gR, self.D)
        scaled = dD * self.signs[:, None, :] / h
        dUs = scaled.transpose(0, 2, 1)
        dU0 -= scaled.sum(axis=2)
        dA = np.zeros((N, d, d))
        dA[:, self.ys, self.zs] = dw * self.eta[:, self.ys]
        off = ~np.eye(d, dtype=bool)
        dP += np.where(off, dA * selector_slope(self.P, params), 0.0)
        dU0 += dP.sum(axis=1) - dP.sum(axis=2)
        return np.concatenate([dU0[:, None, :], dUs], axis=1)


def master_residuals(net, eta, rho: float, params: ModelParams, h: float) -> np.ndarray:
    """Residuals ``R(x, eta)`` for every state, shape ``(N, d)``."""
    return _Evaluation(net, eta, rho, params, h).R


def master_residual(net, x: int, eta, rho: float, params: ModelParams, h: float) -> float:
    """Residual of the master equation at a single ``(x, eta)``."""
    return float(master_residuals(net, np.asarray(eta, float)[None], rho, params, h)[0, x])


def _weighted_loss(ev, weights):
    total = weights.sum()
    per = ev.R**2 + ev.C[:, None] ** 2
    return float((weights * per).sum() / total)


def loss(net, samples, rho: float, params: ModelParams, h: float) -> float:
    """Mean over ``(x, eta)`` samples of ``R(x, eta)^2 + (sum_y U(y, eta))^2``."""
    if len(samples) == 0:
        raise InvalidInputError("samples must be non-empty")
    xs = np.array([x for x, _ in samples], dtype=int)
    eta = np.array([e for _, e in samples], dtype=float)
    weights = np.zeros((len(samples), params.d))
    weights[np.arange(len(samples)), xs] = 1.0
    return _weighted_loss(_Evaluation(net, eta, rho, params, h), weights)


def loss_and_grad(net, eta, rho: float, params: ModelParams, h: float, weights=None):
    """Loss over all states at each measure in ``eta`` and its theta-gradient."""
    ev = _Evaluation(net, eta, rho, params, h, keep=True)
    if weights is None:
        weights = np.ones_like(ev.R)
    total = weights.sum()
    value = _weighted_loss(ev, weights)
    gR = 2.0 * weights * ev.R / total
    gC = 2.0 * (weights.sum(axis=1)) * ev.C / total
    dvalues = ev.grad_values(gR, gC)
    return value, net.backward(ev.cache, dvalues.reshape(-1))


def residual_mse(net, rho: float, params: ModelParams, h: float, count: int = 1000, seed: int = 12345):
    """Mean squared residual over all states at fresh interior samples."""
    eta = sample_simplex(params.d, count, seed, margin=2 * h)
    return float(np.mean(master_residuals(net, eta, rho, params, h) ** 2))


# ---------------------------------------------------------------------------
# training


@dataclass
class DgmConfig:
    """Hyper-parameters for :func:`train`; ``rho`` is required."""

    rho: float | None = None
    batch_size: int = 256
    iterations: int = 20_000
    learning_rate: float = 1e-3
    h: float = 1e-3
    seed: int = 0
    hidden: tuple = (64, 64)
    beta1: float = 0.9
    beta2: float = 0.999
    record_every: int = 100
    validation_size: int = 1000

    def __post_init__(self):
        self.hidden = tuple(int(k) for k in self.hidden)

    def validate(self, d: int):
        if self.rho is None:
            raise InvalidInputError("DgmConfig.rho is required (solve the stationary system first)")
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be positive")
        if not (0 < self.h and 2 * self.h * d < 1):
            raise InvalidInputError("h must be positive and small compared with 1/d")
        if self.batch_size < 1 or self.iterations < 1 or self.record_every < 1:
            raise InvalidInputError("batch_size, iterations and record_every must be positive")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["hidden"] = list(self.hidden)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "DgmConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown dgm keys: {sorted(unknown)}")
        return cls(**data)


class Adam:
    """Adam update on a flat parameter vector (modified in place)."""

    def __init__(self, size, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        theta -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainedNetwork:
    """Outcome of :func:`train`.

    ``residual_history`` holds the validation loss every ``record_every``
    iterations; ``network`` carries the parameters with the lowest one.
    """

    network: PotentialNetwork
    final_loss: float
    residual_history: list
    best_loss: float
    config: DgmConfig
    params: ModelParams
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            **self.network.to_dict(),
            "training": {
                "seed": self.config.seed,
                "config": self.config.to_dict(),
                "model": self.params.to_dict(),
                "final_loss": self.final_loss,
                "best_loss": self.best_loss,
                "residual_history": list(self.residual_history),
                **self.metadata,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "TrainedNetwork":
        net = PotentialNetwork.from_dict(data)
        meta = dict(data.get("training", {}))
        config = DgmConfig.from_dict(meta.pop("config"))
        params = ModelParams.from_dict(meta.pop("model"))
        meta.pop("seed", None)
        return cls(
            network=net,
            final_loss=float(meta.pop("final_loss")),
            residual_history=list(meta.pop("residual_history")),
            best_loss=float(meta.pop("best_loss")),
            config=config,
            params=params,
            metadata=meta,
        )

    @classmethod
    def from_json(cls, text: str) -> "TrainedNetwork":
        return cls.from_dict(json.loads(text))


def train(config: DgmConfig, params: ModelParams, network: PotentialNetwork | None = None,
          callback=None) -> TrainedNetwork:
    """Fit a potential network to the master equation with Adam.

    Every iteration draws a fresh minibatch of measures (uniform on the
    simplex shrunk by ``2h``) and uses all ``d`` states at each of them.
    The loss on a fixed validation set is recorded every
    ``config.record_every`` iterations and the best parameters are kept.
    """
    config.validate(params.d)
    d, h = params.d, config.h
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    if network is None:
        network = PotentialNetwork([2 * d, *config.hidden, 1], seed=int(seeds[0].generate_state(1)[0]))
    elif network.d != d:
        raise InvalidInputError("network dimension does not match the model")
    net = network.copy()
    rng = np.random.default_rng(seeds[1])
    validation = sample_simplex(d, config.validation_size, rng=np.random.default_rng(seeds[2]), margin=2 * h)
    weights = np.ones((config.validation_size, d))
    opt = Adam(net.theta.size, config.learning_rate, config.beta1, config.beta2)

    history = []
    best_loss, best_theta = np.inf, net.theta.copy()
    for it in range(1, config.iterations + 1):
        eta = sample_simplex(d, config.batch_size, rng=rng, margin=2 * h)
        value, grad = loss_and_grad(net, eta, config.rho, params, h)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise DivergenceError(f"non-finite loss at iteration {it}", it)
        opt.step(net.theta, grad)
        if it % config.record_every == 0 or it == config.iterations:
            val = _weighted_loss(_Evaluation(net, validation, config.rho, params, h), weights)
            if not np.isfinite(val):
                raise DivergenceError(f"non-finite validation loss at iteration {it}", it)
            history.append(val)
            if val < best_loss:
                best_loss, best_theta = val, net.theta.copy()
            if callback is not None:
                callback(it, val)
            logger.debug("iteration %d validation loss %.3e", it, val)
    best = PotentialNetwork(net.layer_sizes, best_theta)
    return TrainedNetwork(best, history[-1], history, float(best_loss), config, params)
