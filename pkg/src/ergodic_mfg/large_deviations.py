"""Large-deviation quantities for the empirical measure.

Notation: ``tau(a) = e^a - a - 1`` and its Legendre transform
``tau*(a) = (a + 1) log(a + 1) - a``.  For a symmetric profile with limiting
generator ``a(eta)``, a controlled path ``(mu, L)`` with ``mu' = L^T mu``
costs

    S = int sum_{x != y} mu_x a_xy(mu) tau*(L_xy / a_xy(mu) - 1) dt,

and the rate of an instantaneous velocity ``R`` at ``xi`` has the variational
form

    |||R|||_xi = sup_phi  R . phi - sum_{x != y} xi_x a_xy(xi) tau(phi_y - phi_x).

For two states the stationary rate function is explicit:
``s~(eta) = int_0^{eta_0} log r(l) dl`` with
``r(l) = a_01 / a_10 * l / (1 - l)`` evaluated at ``(l, 1 - l)``, and
``s = s~ - min s~``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import xlogy

from .birth_death import bd_rates, bd_stationary, per_player_rates
from .errors import DomainError, InfeasiblePathError, InvalidInputError, IterationLimitError
from .model import selector_rates
from .strategies import MasterEquationProfile


def tau(a):
    """``e^a - a - 1``."""
    a = np.asarray(a, dtype=float)
    return np.expm1(a) - a


def tau_star(a):
    """Legendre transform of :func:`tau`; ``+inf`` below ``-1``."""
    a = np.asarray(a, dtype=float)
    b = np.maximum(a + 1.0, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(b > 0, b * np.log(np.where(b > 0, b, 1.0)) - a, 1.0)
    val = np.where(a < -1.0, np.inf, val)
    return val if val.ndim else float(val)


# ---------------------------------------------------------------------------
# path functionals


@dataclass(frozen=True)
class ControlledPath:
    """Measures ``mu(t)`` driven by rate matrices ``L(t)`` on a time grid."""

    times: np.ndarray
    measures: np.ndarray
    rate_matrices: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        mu = np.asarray(self.measures, dtype=float)
        L = np.asarray(self.rate_matrices, dtype=float)
        if t.ndim != 1 or np.any(np.diff(t) <= 0):
            raise InvalidInputError("times must be strictly increasing")
        if mu.shape[0] != t.size or L.shape != (t.size, mu.shape[1], mu.shape[1]):
            raise InvalidInputError("measures and rate matrices must match the time grid")
        if np.any(np.abs(L.sum(axis=2)) > 1e-9):
            raise InvalidInputError("rate matrices must have zero row sums")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "measures", mu)
        object.__setattr__(self, "rate_matrices", L)

    def dynamics_error(self) -> float:
        """Largest mismatch between ``mu'`` (differences) and the trapezoidal ``L^T mu``."""
        drift = np.einsum("tx,txy->ty", self.measures, self.rate_matrices)
        dmu = np.diff(self.measures, axis=0) / np.diff(self.times)[:, None]
        return float(np.abs(dmu - 0.5 * (drift[1:] + drift[:-1])).max())


def action_integrand(mu, L, profile) -> float:
    """``sum_{x != y} mu_x a_xy tau*(L_xy / a_xy - 1)`` at a single instant.

    The weight is the measure of the *source* state ``x``, the state whose
    players jump.
    """
    mu = np.asarray(mu, dtype=float)
    L = np.asarray(L, dtype=float)
    A = profile.mean_field_rates(mu)
    off = ~np.eye(mu.size, dtype=bool)
    if np.any(L[off] < 0):
        raise InfeasiblePathError("negative off-diagonal rate in L")
    ratio = L[off] / A[off]
    weights = np.broadcast_to(mu[:, None], A.shape)[off] * A[off]
    return float(np.sum(weights * tau_star(ratio - 1.0)))


def action_functional(path: ControlledPath, profile) -> float:
    """Trapezoidal approximation of ``S_[0,T]`` along ``path``."""
    vals = np.array([action_integrand(m, L, profile) for m, L in zip(path.measures, path.rate_matrices)])
    return float(integrate.trapezoid(vals, path.times))


def variational_norm(R, xi, profile, tol: float = 1e-12, max_iter: int = 100) -> float:
    """``|||R|||_xi`` by Newton's method with backtracking, ``phi_0 = 0``.

    Raises
    ------
    InvalidInputError
        ``R`` does not sum to zero or ``xi`` is not interior.
    IterationLimitError
        Newton did not reach the gradient tolerance.
    """
    return _variational(R, xi, profile, tol, max_iter)[0]


def _variational(R, xi, profile, tol, max_iter):
    R = np.asarray(R, dtype=float)
    xi = np.asarray(xi, dtype=float)
    d = xi.size
    if R.shape != (d,) or abs(R.sum()) > 1e-10:
        raise InvalidInputError(f"R must be a tangent vector of length {d} (sum 0), got {R}")
    if np.any(xi <= 0) or abs(xi.sum() - 1) > 1e-10:
        raise InvalidInputError("xi must be an interior point of the simplex")
    A = profile.mean_field_rates(xi)
    W = xi[:, None] * A
    np.fill_diagonal(W, 0.0)

    def objective(phi):
        diff = phi[None, :] - phi[:, None]
        return float(R @ phi - np.sum(W * tau(diff)))

    def derivatives(phi):
        diff = phi[None, :] - phi[:, None]
        E = W * np.exp(diff)  # E[x, y] = W_xy e^{phi_y - phi_x}
        grad = R - (E.sum(axis=0) - W.sum(axis=0)) + (E.sum(axis=1) - W.sum(axis=1))
        S = E + E.T
        hess = S - np.diag(S.sum(axis=1))
        return grad[1:], hess[1:, 1:]

    phi = np.zeros(d)
    value = objective(phi)
    for it in range(max_iter):
        g, Hm = derivatives(phi)
        if np.max(np.abs(g)) < tol:
            return value, phi, it
        step = np.linalg.solve(Hm, -g)  # ascent direction since Hm is negative definite
        slope = float(g @ step)
        # near the optimum the gain is below float resolution, so a step that
        # is flat to roundoff is accepted as well
        flat = 1e-13 * (1.0 + abs(value))
        s = 1.0
        while True:
            trial = phi.copy()
            trial[1:] += s * step
            new = objective(trial)
            if new >= value + 1e-4 * s * slope - flat:
                break
            s *= 0.5
            if s < 1e-12:
                raise IterationLimitError("line search failed", float(np.max(np.abs(g))), it)
        phi, value = trial, new
    g, _ = derivatives(phi)
    raise IterationLimitError("variational problem did not converge", float(np.max(np.abs(g))), max_iter)


def matched_rates(mu, phi, profile) -> np.ndarray:
    """Rate matrix ``L_xy = a_xy(mu) exp(phi_y - phi_x)``.

    These are the rate matrices at which the action integrand equals the
    variational rate of ``L^T mu - a^T mu``; for other ``L`` the integrand is
    only an upper bound.
    """
    mu = np.asarray(mu, dtype=float)
    phi = np.asarray(phi, dtype=float)
    A = profile.mean_field_rates(mu)
    L = A * np.exp(phi[None, :] - phi[:, None])
    np.fill_diagonal(L, 0.0)
    np.fill_diagonal(L, -L.sum(axis=1))
    return L


def finite_time_rate(eta, xi, profile, T: float, knots: int = 3, steps: int = 40):
    """Coarse upper bound on the finite-time rate ``S_T(xi | eta)``.

    Minimises ``int_0^T |||mu' - a(mu)^T mu|||_mu dt`` over piecewise-linear
    paths from ``eta`` to ``xi`` with ``knots`` free interior knots.  Knot
    positions (softmax, so they stay interior) and knot times (softmax of
    the segment lengths) are both optimised by Nelder-Mead.  The result is
    only as good as this path class and the ``steps``-point quadrature;
    expect a few percent of slack.  Returns ``(value, knot_times, knot_measures)``.
    """
    eta = np.asarray(eta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    d = eta.size
    if np.any(eta <= 0) or np.any(xi <= 0):
        raise InvalidInputError("endpoints must be interior")
    if not T > 0:
        raise InvalidInputError("T must be positive")
    per_segment = max(steps // (knots + 1), 2) + 1
    frac = np.linspace(0.0, 1.0, per_segment)
    line = np.linspace(0.0, 1.0, knots + 2)[1:-1, None]
    start = np.concatenate([np.log((1 - line) * eta + line * xi).ravel(), np.zeros(knots + 1)])

    def unpack(z):
        inner = np.exp(z[: knots * d].reshape(knots, d))
        inner /= inner.sum(axis=1, keepdims=True)
        lengths = np.exp(z[knots * d :] - z[knots * d :].max())
        knot_t = np.concatenate([[0.0], np.cumsum(T * lengths / lengths.sum())])
        return np.vstack([eta, inner, xi]), knot_t

    def path_cost(z):
        pts, knot_t = unpack(z)
        total = 0.0
        for k in range(knots + 1):
            span = knot_t[k + 1] - knot_t[k]
            if span <= 1e-9 * T:
                return np.inf
            v = (pts[k + 1] - pts[k]) / span
            vals = []
            for w in frac:
                m = (1 - w) * pts[k] + w * pts[k + 1]
                R = v - m @ profile.mean_field_rates(m)
                vals.append(variational_norm(R - R.mean(), m, profile, tol=1e-10))
            total += integrate.trapezoid(vals, dx=span / (per_segment - 1))
        return total

    res = optimize.minimize(path_cost, start, method="Nelder-Mead",
                            options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 600 * start.size})
    pts, knot_t = unpack(res.x)
    return float(res.fun), knot_t, pts


# ---------------------------------------------------------------------------
# explicit two-state rate function


def _two_state(profile):
    if profile.params.d != 2:
        raise DomainError("the explicit rate function is available for d = 2 only")


def rate_ratio(lam, profile) -> np.ndarray:
    """``a_01 / a_10`` of the limiting generator at ``(lam, 1 - lam)``."""
    _two_state(profile)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if isinstance(profile, MasterEquationProfile):
        # batched: gamma*_1(0, .) / gamma*_0(1, .) from the potential gap
        U = profile.potential.potential(np.stack([lam, 1.0 - lam], axis=1))
        gap = U[:, 1] - U[:, 0]
        return selector_rates(gap, profile.params) / selector_rates(-gap, profile.params)
    out = np.empty_like(lam)
    for i, l in enumerate(lam):
        A = profile.mean_field_rates(np.array([l, 1.0 - l]))
        out[i] = A[0, 1] / A[1, 0]
    return out


def r_function(lam, profile):
    """``r(lam) = a_01 / a_10 * lam / (1 - lam)`` for ``lam`` in ``(0, 1)``."""
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr <= 0) or np.any(lam_arr >= 1):
        raise DomainError("r is defined on the open interval (0, 1)")
    val = rate_ratio(lam_arr, profile) * lam_arr / (1.0 - lam_arr)
    return val.reshape(lam_arr.shape) if lam_arr.ndim else float(val[0])


def _log_odds_integral(a):
    """``int_0^a log(l / (1 - l)) dl = log(1 - a) + a log(a / (1 - a))``."""
    a = np.asarray(a, dtype=float)
    return xlogy(1.0 - a, 1.0 - a) + xlogy(a, a)


def _gauss_legendre_adaptive(fun, lo, hi, order, tol, depth=0, max_depth=30):
    """Adaptive Gauss-Legendre: compare ``order`` with ``2 * order`` and bisect."""
    def rule(a, b, m):
        x, w = np.polynomial.legendre.leggauss(m)
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        return half * float(np.dot(w, fun(mid + half * x)))

    coarse = rule(lo, hi, order)
    fine = rule(lo, hi, 2 * order)
    err = abs(fine - coarse)
    if err <= tol or depth >= max_depth:
        return fine, err
    mid = 0.5 * (lo + hi)
    left, e1 = _gauss_legendre_adaptive(fun, lo, mid, order, tol / 2, depth + 1, max_depth)
    right, e2 = _gauss_legendre_adaptive(fun, mid, hi, order, tol / 2, depth + 1, max_depth)
    return left + right, e1 + e2


class RateFunction:
    """Explicit two-state rate function ``s(eta) = s~(eta_0) - min s~``.

    Parameters
    ----------
    profile : StrategyProfile
        Stationary profiles use the closed form (constant ratio); any other
        profile integrates ``log(a_01 / a_10)`` by adaptive Gauss-Legendre
        quadrature, the ``log(l / (1 - l))`` part being integrated exactly.
    method : {"auto", "closed", "quadrature"}
    quad_points : int
        Order of the base Gauss-Legendre rule.
    tol : float
        Absolute tolerance of each quadrature.
    """

    def __init__(self, profile, method: str = "auto", quad_points: int = 8, tol: float = 1e-11):
        _two_state(profile)
        from .strategies import StationaryProfile

        if method == "auto":
            method = "closed" if isinstance(profile, StationaryProfile) else "quadrature"
        if method not in ("closed", "quadrature"):
            raise InvalidInputError(f"unknown method {method!r}")
        if method == "closed" and not isinstance(profile, StationaryProfile):
            raise InvalidInputError("the closed form needs a stationary profile")
        self.profile = profile
        self.method = method
        self.quad_points = quad_points
        self.tol = tol
        if method == "closed":
            self.ratio = float(rate_ratio(0.5, profile)[0])
            self.argmin = 1.0 / (self.ratio + 1.0)
            self.s_tilde_min = math.log(self.ratio) - math.log(self.ratio + 1.0)
        else:
            self.ratio = None
            self.argmin, self.s_tilde_min = self._minimise()

    def _log_ratio(self, lam):
        return np.log(rate_ratio(lam, self.profile))

    def s_tilde(self, eta0):
        """``int_0^{eta0} log r``; accepts scalars or arrays in ``[0, 1]``."""
        eta0 = np.asarray(eta0, dtype=float)
        if np.any(eta0 < 0) or np.any(eta0 > 1):
            raise DomainError("eta0 must lie in [0, 1]")
        base = _log_odds_integral(eta0)
        if self.method == "closed":
            return base + eta0 * math.log(self.ratio)
        flat = np.atleast_1d(eta0)
        vals = np.empty_like(flat)
        for i, a in enumerate(flat):
            if a == 0:
                vals[i] = 0.0
                continue
            v, err = _gauss_legendre_adaptive(self._log_ratio, 0.0, float(a), self.quad_points, self.tol)
            if err > 10 * self.tol:
                warnings.warn(f"quadrature reached only {err:.2e} at eta0={a}", RuntimeWarning)
            vals[i] = v
        vals = vals.reshape(eta0.shape) + base
        return vals if vals.ndim else float(vals)

    def _minimise(self):
        grid = np.linspace(0.0, 1.0, 201)[1:-1]
        vals = self.s_tilde(grid)
        k = int(np.argmin(vals))
        lo, hi = grid[max(k - 1, 0)] if k > 0 else 1e-9, grid[min(k + 1, grid.size - 1)] if k < grid.size - 1 else 1 - 1e-9
        res = optimize.minimize_scalar(lambda a: float(self.s_tilde(a)), bracket=(lo, grid[k], hi),
                                       method="golden", tol=1e-10)
        if res.fun <= vals[k]:
            return float(res.x), float(res.fun)
        return float(grid[k]), float(vals[k])

    def __call__(self, eta0):
        """``s`` at ``eta = (eta0, 1 - eta0)``."""
        return self.s_tilde(eta0) - self.s_tilde_min

    def table(self, grid_size: int = 99, tag: str | None = None) -> "RateFunctionTable":
        grid = np.linspace(0.0, 1.0, grid_size + 2)[1:-1]
        return RateFunctionTable(grid, np.asarray(self(grid), dtype=float), tag or self.method,
                                 self.argmin, self.s_tilde_min)


@dataclass(frozen=True)
class RateFunctionTable:
    """``s`` tabulated on an interior grid of ``eta0`` values."""

    grid: np.ndarray
    values: np.ndarray
    tag: str
    argmin: float
    s_tilde_min: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eta1", "s"])
        for x, v in zip(self.grid, self.values):
            w.writerow([repr(float(x)), repr(float(v))])
        return buf.getvalue()


def rate_function_d2(profile, grid_size: int = 99, quad_points: int = 8, method: str = "auto",
                     tag: str | None = None) -> RateFunctionTable:
    """Tabulate the explicit two-state rate function on ``grid_size`` interior points."""
    return RateFunction(profile, method, quad_points).table(grid_size, tag)


def s_tilde_direct(eta0: float, profile) -> float:
    """``int_0^{eta0} log r`` by adaptive quadrature of ``log r`` itself.

    Independent of :class:`RateFunction`: the logarithmic endpoint
    singularity is left to the integrator instead of being removed.
    """
    val, _ = integrate.quad(lambda l: math.log(r_function(l, profile)), 0.0, eta0, limit=200,
                            epsabs=1e-13, epsrel=1e-13)
    return float(val)


def s_tilde_monte_carlo(eta0: float, profile, samples: int = 100_000, seed: int = 0):
    """Monte Carlo estimate of ``int_0^{eta0} log r`` with its standard error."""
    rng = np.random.default_rng(seed)
    lam = eta0 * (1.0 - rng.random(samples))  # in (0, eta0]
    lam = lam[lam < 1.0]
    vals = eta0 * np.log(r_function(lam, profile))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))


# ---------------------------------------------------------------------------
# finite-n checks


def count_chain_log_sum(n: int, profile, convention: str = "shared", k_max: int | None = None) -> float:
    """``(1/n) sum_k [log(d(k+1) / b(k)) - log r(k/n)]`` for ``k = 1..k_max``.

    ``b(k)`` and ``d(k)`` are the birth and death rates of the count chain.
    The factor ``n - k`` cancels between ``b(k)`` and ``r(k/n)``, and the
    summand is evaluated in that cancelled form, so ``k = n`` is allowed
    (default ``k_max = n``).  For a stationary profile the sum telescopes to
    ``log(k_max + 1) / n``.
    """
    if n < 2:
        raise DomainError("needs n >= 2")
    k_max = n if k_max is None else int(k_max)
    ks = np.arange(1, k_max + 1)
    a01_next, _ = per_player_rates(n, profile, ks + 1, convention)
    _, a10 = per_player_rates(n, profile, ks, convention)
    ratio = rate_ratio(ks / n, profile)
    terms = np.log(a01_next * (ks + 1)) - np.log(a10 * ratio * ks)
    return float(terms.sum() / n)


def log_sum_check(profile, ns, convention: str = "shared") -> np.ndarray:
    """:func:`count_chain_log_sum` for each ``n`` in ``ns``; tends to 0 with ``n``."""
    return np.array([count_chain_log_sum(int(n), profile, convention) for n in ns])


@dataclass(frozen=True)
class LDPCheck:
    n: int
    threshold: float
    side: str
    empirical: float
    rate_inf: float

    @property
    def relative_gap(self) -> float:
        if self.rate_inf == 0:
            return abs(self.empirical)
        return abs(self.empirical - self.rate_inf) / self.rate_inf


def ld_consistency_check(profile, n: int, threshold: float, side: str = "ge",
                         convention: str = "shared", rate: RateFunction | None = None) -> LDPCheck:
    """Compare ``-(1/n) log pi_n(E)`` with ``inf_E s`` for ``E = {eta0 >= c}`` or ``{eta0 <= c}``.

    ``pi_n`` is the exact stationary law of the count chain, handled in
    log space so that tiny probabilities do not underflow.
    """
    dist = bd_stationary(bd_rates(n, profile, convention))
    log_p = dist.log_tail(threshold, side)
    empirical = -log_p / n
    rate = rate or RateFunction(profile)
    if side == "ge":
        lo, hi = max(threshold, 0.0), 1.0
    else:
        lo, hi = 0.0, min(threshold, 1.0)
    if lo <= rate.argmin <= hi:
        inf = 0.0
    else:
        pts = np.clip(np.linspace(lo, hi, 2001), 1e-12, 1 - 1e-12)
        inf = float(np.min(rate(pts)))
    return LDPCheck(n, float(threshold), side, float(empirical), max(inf, 0.0))
