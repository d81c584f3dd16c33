"""Problem data for the quadratic benchmark game.

States are indexed ``0, ..., d-1``.  State ``0`` carries the bias ``delta``
in the running cost.  A player in state ``x`` picks transition rates
``a_y`` towards every ``y != x`` from the interval ``[a_lo, a_hi]`` and pays

    f(x, a) = delta * 1{x == 0} + b * sum_{y != x} (a_y - 2)**2

per unit time, plus the mean-field cost ``F(x, eta) = eta_x``.  Rate vectors
always carry the negative row sum on the diagonal so that they can be
stacked directly into generator matrices.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import DomainError, InvalidInputError

#: Rate at which moving is free of charge.
FREE_RATE = 2.0


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the benchmark game.

    Parameters
    ----------
    d : int
        Number of states, at least 2.
    a_lo, a_hi : float
        Bounds of the admissible rate interval, ``0 < a_lo < a_hi``.
    b : float
        Scale of the quadratic rate cost, positive.
    delta : float
        Extra running cost paid in state 0, non-negative.
    """

    d: int = 2
    a_lo: float = 1.0
    a_hi: float = 3.0
    b: float = 4.0
    delta: float = 0.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise InvalidInputError(f"d must be an integer >= 2, got {self.d!r}")
        if not (0 < self.a_lo < self.a_hi) or not np.isfinite(self.a_hi):
            raise InvalidInputError(
                f"need 0 < a_lo < a_hi < inf, got a_lo={self.a_lo}, a_hi={self.a_hi}"
            )
        if not self.b > 0:
            raise InvalidInputError(f"b must be positive, got {self.b}")
        if not self.delta >= 0:
            raise InvalidInputError(f"delta must be non-negative, got {self.delta}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown ModelParams keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


def as_simplex_point(eta, d: int | None = None, atol: float = 1e-12) -> np.ndarray:
    """Validate ``eta`` as a probability vector and return it as an array."""
    eta = np.asarray(eta, dtype=float)
    if eta.ndim != 1 or (d is not None and eta.shape[0] != d):
        raise DomainError(f"expected a probability vector of length {d}, got shape {eta.shape}")
    if np.any(eta < -atol) or abs(eta.sum() - 1.0) > atol:
        raise DomainError(f"not a point of the simplex: {eta}")
    return eta


def finite_difference(u, x: int) -> np.ndarray:
    """Return ``(u_y - u_x)_y``; the entry at ``x`` is zero."""
    u = np.asarray(u, dtype=float)
    return u - u[x]


def potential_differences(u) -> np.ndarray:
    """Stack ``finite_difference(u, x)`` for every ``x``.

    Works on batches: for ``u`` of shape ``(..., d)`` the result has shape
    ``(..., d, d)`` with ``out[..., x, y] = u[..., y] - u[..., x]``.
    """
    u = np.asarray(u, dtype=float)
    return u[..., None, :] - u[..., :, None]


def running_cost(x: int, a, params: ModelParams) -> float:
    """Running cost ``f(x, a)``; the diagonal entry of ``a`` is ignored."""
    a = np.asarray(a, dtype=float)
    off = np.arange(params.d) != x
    bias = params.delta if x == 0 else 0.0
    return float(bias + params.b * np.sum((a[off] - FREE_RATE) ** 2))


def mean_field_cost(x: int, eta) -> float:
    """Mean-field cost ``F(x, eta) = eta_x``."""
    return float(np.asarray(eta, dtype=float)[x])


def selector_rates(p, params: ModelParams) -> np.ndarray:
    """Per-coordinate minimiser of ``b (a - 2)^2 + a p`` over ``[a_lo, a_hi]``.

    Elementwise on arrays; diagonal bookkeeping is left to the caller.
    """
    p = np.asarray(p, dtype=float)
    return np.clip(FREE_RATE - p / (2.0 * params.b), params.a_lo, params.a_hi)


def selector_slope(p, params: ModelParams) -> np.ndarray:
    """Derivative of :func:`selector_rates` with respect to ``p`` (0 where clamped)."""
    p = np.asarray(p, dtype=float)
    raw = FREE_RATE - p / (2.0 * params.b)
    inside = (raw > params.a_lo) & (raw < params.a_hi)
    return np.where(inside, -1.0 / (2.0 * params.b), 0.0)


def _check_finite(p):
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise InvalidInputError(f"non-finite momentum vector: {p}")
    return p


def hamiltonian(x: int, p, params: ModelParams) -> float:
    """``H(x, p) = min_a f(x, a) + a . p`` over admissible rate vectors leaving ``x``.

    The cost is separable, so each coordinate is minimised on its own at the
    clamped stationary point.  ``p[x]`` does not enter.
    """
    p = _check_finite(p)
    off = np.arange(params.d) != x
    a = selector_rates(p[off], params)
    bias = params.delta if x == 0 else 0.0
    return float(bias + np.sum(params.b * (a - FREE_RATE) ** 2 + a * p[off]))


def optimal_selector(x: int, p, params: ModelParams) -> np.ndarray:
    """Rate vector ``gamma*(x, p)`` realising :func:`hamiltonian`."""
    p = _check_finite(p)
    a = selector_rates(p, params)
    a[x] = 0.0
    a[x] = -a.sum()
    return a


def hamiltonian_rows(P, params: ModelParams):
    """Vectorised Hamiltonian and selector for stacked momentum matrices.

    ``P`` has shape ``(..., d, d)`` with row ``x`` the momentum seen from
    state ``x`` (typically :func:`potential_differences`).  Returns
    ``(H, A)`` where ``H[..., x] = H(x, P[..., x, :])`` and ``A`` holds the
    selected off-diagonal rates with zeros on the diagonal.
    """
    P = np.asarray(P, dtype=float)
    d = P.shape[-1]
    off = ~np.eye(d, dtype=bool)
    A = np.where(off, selector_rates(P, params), 0.0)
    terms = np.where(off, params.b * (A - FREE_RATE) ** 2 + A * P, 0.0)
    H = terms.sum(axis=-1)
    H[..., 0] += params.delta
    return H, A
