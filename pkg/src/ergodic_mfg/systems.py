"""Stationary and time-dependent MFG systems.

The stationary system asks for ``(rho, u, mu)`` with

    rho = H(x, Delta_x u) + F(x, mu)            for every state x,
    0   = sum_y mu_y gamma*_x(y, Delta_y u)      (mu is invariant),

and the forward equation transports a measure under the feedback rates
``gamma*(y, Delta_y U(., mu(t)))`` for a potential that may depend on the
current measure.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IterationLimitError,
    InvalidInputError,
    MFGError,
    OutOfRegimeError,
    StepSizeError,
)
from .model import (
    ModelParams,
    as_simplex_point,
    hamiltonian_rows,
    potential_differences,
)

logger = logging.getLogger(__name__)


def centered(u) -> np.ndarray:
    """Shift a potential so that its entries sum to zero."""
    u = np.asarray(u, dtype=float)
    return u - u.mean(axis=-1, keepdims=True)


@dataclass(frozen=True)
class StationarySolution:
    """Solution ``(rho, u, mu)`` of the stationary system, ``u`` centred."""

    rho: float
    u: np.ndarray
    mu: np.ndarray

    @property
    def gap(self) -> float:
        """``u_1 - u_0``; for two states this fixes ``u`` up to a constant."""
        return float(self.u[1] - self.u[0])

    def residuals(self, params: ModelParams) -> tuple[float, float]:
        """Max-norm Bellman and invariance residuals."""
        H, _ = hamiltonian_rows(potential_differences(self.u), params)
        bellman = np.max(np.abs(H + self.mu - self.rho))
        Q = rate_matrix_from_potential(self.u, params)
        stationarity = np.max(np.abs(self.mu @ Q))
        return float(bellman), float(stationarity)

    def to_dict(self) -> dict:
        return {"rho": float(self.rho), "u": self.u.tolist(), "mu": self.mu.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "StationarySolution":
        return cls(float(data["rho"]), np.asarray(data["u"], float), np.asarray(data["mu"], float))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "StationarySolution":
        return cls.from_dict(json.loads(text))


@dataclass(eq=False)
class MeasurePath:
    """A measure flow sampled on an increasing time grid."""

    times: np.ndarray
    points: np.ndarray
    max_projection_error: float = field(default=0.0, compare=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[0] != self.times.shape[0]:
            raise InvalidInputError("points must have one row per time")
        if np.any(np.diff(self.times) <= 0):
            raise InvalidInputError("time grid must be strictly increasing")

    def __eq__(self, other):
        if not isinstance(other, MeasurePath):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(self.points, other.points)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation; constant extrapolation outside the grid."""
        return np.array([np.interp(t, self.times, self.points[:, k]) for k in range(self.d)])

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(), "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "MeasurePath":
        return cls(np.asarray(data["times"]), np.asarray(data["points"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MeasurePath":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"mu_{k + 1}" for k in range(self.d)])
        for t, row in zip(self.times, self.points):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "MeasurePath":
        rows = list(csv.reader(io.StringIO(text)))
        data = np.array(rows[1:], dtype=float)
        return cls(data[:, 0], data[:, 1:])


# ---------------------------------------------------------------------------
# closed form for the two-state benchmark


def solve_stationary_closed_form(b: float, delta: float) -> StationarySolution:
    """Explicit solution of the two-state benchmark (rates in ``[1, 3]``).

    With ``A = u_1 - u_0`` the value equations give
    ``4A + (mu_0 - mu_1) + delta = 0`` and invariance gives
    ``mu_0 - mu_1 = A / (4b)``, hence ``A = -4 b delta / (16 b + 1)``: the
    penalised state has the larger potential.  Then
    ``mu = (1/2)(1 -+ delta/(16b+1))`` and
    ``rho = (1 + delta)/2 - 4 b delta^2 / (16 b + 1)^2``.

    Valid only while both selected rates stay inside ``[1, 3]``, i.e.
    ``|A| <= 2b``.
    """
    if not b > 0 or not delta >= 0:
        raise InvalidInputError(f"need b > 0 and delta >= 0, got b={b}, delta={delta}")
    k = 16.0 * b + 1.0
    A = 0.0 - 4.0 * b * delta / k
    if abs(A) > 2.0 * b:
        raise OutOfRegimeError(f"|u_1 - u_0| = {abs(A)} exceeds 2b = {2 * b}")
    mu = np.array([0.5 * (1.0 - delta / k), 0.5 * (1.0 + delta / k)])
    rho = 0.5 * (1.0 + delta) - 4.0 * b * delta**2 / k**2
    return StationarySolution(rho, np.array([-A / 2.0, A / 2.0]), mu)


# ---------------------------------------------------------------------------
# generators


def rate_matrix_from_potential(u, params: ModelParams) -> np.ndarray:
    """Generator whose row ``x`` is ``gamma*(x, Delta_x u)``."""
    _, A = hamiltonian_rows(potential_differences(u), params)
    return with_diagonal(A)


def with_diagonal(A) -> np.ndarray:
    """Fill the diagonal of (stacked) off-diagonal rates with minus the row sums."""
    d = A.shape[-1]
    return A - np.eye(d) * A.sum(axis=-1)[..., :, None]


def stationary_dist_of_rate_matrix(Q) -> np.ndarray:
    """Invariant law ``pi`` of an irreducible generator: ``pi Q = 0``, ``sum pi = 1``."""
    Q = np.asarray(Q, dtype=float)
    d = Q.shape[0]
    if Q.shape != (d, d):
        raise InvalidInputError(f"rate matrix must be square, got {Q.shape}")
    if np.max(np.abs(Q.sum(axis=1))) > 1e-9 * max(1.0, np.abs(Q).max()):
        raise InvalidInputError("rate matrix rows must sum to zero")
    M = Q.T.copy()
    M[-1, :] = 1.0
    rhs = np.zeros(d)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise MFGError("rate matrix is reducible; invariant law not unique") from exc
    return pi


# ---------------------------------------------------------------------------
# fixed-point solver


def _relative_value_iteration(mu, params, u0, tol, max_iter):
    """Average-cost control against a frozen measure by uniformised RVI."""
    uniform = 1.05 * (params.d - 1) * params.a_hi
    u = np.array(u0, dtype=float)
    for it in range(max_iter):
        H, _ = hamiltonian_rows(potential_differences(u), params)
        g = H + mu
        span = g.max() - g.min()
        if span < tol:
            return g.mean(), centered(u), span
        u = u + g / uniform
        u = u - u[0]
    raise IterationLimitError("relative value iteration did not converge", span, max_iter)


def solve_stationary_fixed_point(
    params: ModelParams,
    tol: float = 1e-10,
    max_iter: int = 500,
    damping: float = 0.5,
    inner_max_iter: int = 100_000,
) -> StationarySolution:
    """Solve the stationary system by damped best-response iteration.

    Each sweep solves the ergodic control problem against the current
    measure (relative value iteration anchored at state 0, then centred),
    computes the invariant law of the resulting generator and moves the
    measure a fraction ``damping`` towards it.
    """
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    if not 0 < damping <= 1:
        raise InvalidInputError("damping must lie in (0, 1]")
    d = params.d
    mu = np.full(d, 1.0 / d)
    u = np.zeros(d)
    residual = np.inf
    for it in range(max_iter):
        rho, u, _ = _relative_value_iteration(mu, params, u, tol / 10, inner_max_iter)
        Q = rate_matrix_from_potential(u, params)
        stationarity = np.max(np.abs(mu @ Q))
        H, _ = hamiltonian_rows(potential_differences(u), params)
        bellman = np.max(np.abs(H + mu - rho))
        residual = max(stationarity, bellman)
        if residual < tol:
            return StationarySolution(float(rho), u, mu)
        mu = (1 - damping) * mu + damping * stationary_dist_of_rate_matrix(Q)
    raise IterationLimitError(
        f"fixed point not reached after {max_iter} sweeps (residual {residual:.3e})",
        residual,
        max_iter,
    )


def solve_stationary(params: ModelParams, **kwargs) -> StationarySolution:
    """Closed form when it applies, fixed-point iteration otherwise."""
    if params.d == 2 and (params.a_lo, params.a_hi) == (1.0, 3.0):
        try:
            return solve_stationary_closed_form(params.b, params.delta)
        except OutOfRegimeError:
            logger.info("closed form out of regime; falling back to fixed point")
    return solve_stationary_fixed_point(params, **kwargs)


# ---------------------------------------------------------------------------
# forward equation


def kolmogorov_forward(
    eta,
    potential_of_measure,
    params: ModelParams,
    T: float,
    dt: float = 1e-3,
    record_every: int = 1,
) -> MeasurePath:
    """Integrate ``d mu/dt = mu Q(mu)`` with classical RK4 on a fixed grid.

    ``potential_of_measure`` maps a measure to a potential vector; a plain
    array is treated as a constant potential.  After every step the state is
    projected back onto the simplex.
    """
    if not dt > 0 or not T >= dt:
        raise InvalidInputError(f"need dt > 0 and T >= dt, got T={T}, dt={dt}")
    mu = as_simplex_point(eta, params.d, atol=1e-10).copy()
    if callable(potential_of_measure):
        potential = potential_of_measure

        def step(m):
            def rhs(v):
                return v @ rate_matrix_from_potential(potential(v), params)

            k1 = rhs(m)
            k2 = rhs(m + 0.5 * dt * k1)
            k3 = rhs(m + 0.5 * dt * k2)
            k4 = rhs(m + dt * k3)
            return m + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    else:
        # for a fixed generator an RK4 step is the degree-4 Taylor polynomial of exp(dt Q)
        Q = rate_matrix_from_potential(np.asarray(potential_of_measure, dtype=float), params)
        hQ = dt * Q
        M = np.eye(params.d)
        term = np.eye(params.d)
        for j in range(1, 5):
            term = term @ hQ / j
            M = M + term

        def step(m):
            return m @ M

    steps = int(round(T / dt))
    times = [0.0]
    points = [mu.copy()]
    worst = 0.0
    for k in range(1, steps + 1):
        mu = step(mu)
        if mu.min() < -1e-10:
            raise StepSizeError(
                f"negative mass {mu.min():.3e} at t={k * dt:.6g}; use a smaller dt"
            )
        projected = np.clip(mu, 0.0, None)
        projected /= projected.sum()
        err = float(np.abs(projected - mu).max())
        worst = max(worst, err)
        if err > 1e-10:
            logger.warning("simplex projection error %.3e at step %d", err, k)
        mu = projected
        if k % record_every == 0 or k == steps:
            times.append(k * dt)
            points.append(mu.copy())
    logger.debug("max projection error %.3e", worst)
    return MeasurePath(np.array(times), np.array(points), worst)


def fit_decay_rate(path: MeasurePath, target, t_min: float, t_max: float):
    """Least-squares fit of ``log|mu(t) - target|`` on ``[t_min, t_max]``.

    Returns ``(rate, r_squared)`` where ``rate`` is minus the fitted slope.
    """
    sel = (path.times >= t_min) & (path.times <= t_max)
    t = path.times[sel]
    err = np.linalg.norm(path.points[sel] - np.asarray(target), axis=1)
    y = np.log(err)
    slope, intercept = np.polyfit(t, y, 1)
    fitted = slope * t + intercept
    ss_res = np.sum((y - fitted) ** 2)
    ss_tot = np.sum((y - y.mean()) ** 2)
    return float(-slope), float(1.0 - ss_res / ss_tot)
