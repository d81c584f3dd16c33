"""Exact analysis of the two-state game through its count process.

With ``d = 2`` and a symmetric profile the number ``k`` of players in state
0 is a birth-death chain on ``{0, ..., n}``: a birth is a move ``1 -> 0``,
a death a move ``0 -> 1``.  Its stationary law gives exact ergodic costs.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.special import logsumexp

from .errors import DomainError, InvalidInputError
from .model import ModelParams, running_cost
from .strategies import MasterEquationProfile, StrategyProfile, selector_table

CONVENTIONS = ("shared", "self_excluded")
MEAN_FIELD = ("self_excluded", "self_included")


@dataclass(frozen=True)
class BirthDeathChain:
    """Rates ``birth[k]`` (``k -> k+1``) and ``death[k]`` (``k -> k-1``).

    ``rates0[k]`` and ``rates1[k]`` are the per-player rates out of states 0
    and 1 when ``k`` players sit in state 0; they are kept for cost
    evaluation.
    """

    n: int
    birth: np.ndarray
    death: np.ndarray
    rates0: np.ndarray | None = None
    rates1: np.ndarray | None = None

    def __post_init__(self):
        n = self.n
        birth = np.asarray(self.birth, dtype=float)
        death = np.asarray(self.death, dtype=float)
        if birth.shape != (n + 1,) or death.shape != (n + 1,):
            raise InvalidInputError(f"rate vectors must have length n+1={n + 1}")
        if birth[n] != 0 or death[0] != 0:
            raise InvalidInputError("need birth[n] = 0 and death[0] = 0")
        if np.any(birth[:n] <= 0) or np.any(death[1:] <= 0):
            raise InvalidInputError("interior birth and death rates must be positive")
        object.__setattr__(self, "birth", birth)
        object.__setattr__(self, "death", death)


@dataclass(frozen=True)
class CountDistribution:
    """Law of the count ``k`` over ``{0, ..., n}``, stored with its logarithm."""

    log_probs: np.ndarray

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    @property
    def n(self) -> int:
        return self.log_probs.size - 1

    def mean_fraction(self) -> float:
        k = np.arange(self.n + 1)
        return float(np.dot(self.probs, k) / self.n)

    def log_mass(self, mask) -> float:
        """``log P(k in mask)``; ``-inf`` for an empty set."""
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            return -np.inf
        return float(logsumexp(self.log_probs[mask]))

    def log_tail(self, c: float, side: str = "ge") -> float:
        """``log P(k/n >= c)`` (``side="ge"``) or ``log P(k/n <= c)`` (``"le"``)."""
        frac = np.arange(self.n + 1) / self.n
        eps = 1e-12
        if side == "ge":
            return self.log_mass(frac >= c - eps)
        if side == "le":
            return self.log_mass(frac <= c + eps)
        raise InvalidInputError(f"side must be 'ge' or 'le', got {side!r}")

    def mass_outside(self, radius: float, center: float = 0.5) -> float:
        frac = np.arange(self.n + 1) / self.n
        return float(self.probs[np.abs(frac - center) > radius].sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "prob"])
        for k, p in enumerate(self.probs):
            w.writerow([k, repr(float(p))])
        return buf.getvalue()


def _check_two_states(params: ModelParams):
    if params.d != 2:
        raise DomainError("the birth-death reduction needs d = 2")


def _rate_tables(n: int, profile: StrategyProfile, ks, convention: str) -> np.ndarray:
    """Per-player rate tables ``A[k]`` (off-diagonal, zero diagonal) at counts ``ks``.

    Counts outside ``0..n`` are allowed; the measure is then extrapolated.
    """
    if convention not in CONVENTIONS:
        raise InvalidInputError(f"convention must be one of {CONVENTIONS}")
    params = profile.params
    ks = np.asarray(ks, dtype=float)
    if convention == "shared" and isinstance(profile, MasterEquationProfile):
        # one measure (k/(n-1), 1 - k/(n-1)) for both directions; at k = n it
        # lies outside the simplex and the potential is extrapolated there
        lam = ks / (n - 1.0)
        U = profile.potential.potential(np.stack([lam, 1.0 - lam], axis=1))
        return np.array([selector_table(np.broadcast_to(u, (2, 2)), params) for u in U])
    return np.array([profile.state_rates(0.0, np.array([k, n - k])) for k in ks])


def per_player_rates(n: int, profile: StrategyProfile, ks, convention: str = "shared"):
    """Per-player rates ``(a_01(k), a_10(k))`` when ``k`` players sit in state 0."""
    _check_two_states(profile.params)
    A = _rate_tables(n, profile, ks, convention)
    return A[:, 0, 1], A[:, 1, 0]


def bd_rates(n: int, profile: StrategyProfile, convention: str = "shared") -> BirthDeathChain:
    """Birth-death chain of the count in state 0 under a symmetric profile.

    Parameters
    ----------
    n : int
        Number of players, at least 2.
    profile : StrategyProfile
        Stationary or master-equation profile.
    convention : {"shared", "self_excluded"}
        For master-equation profiles, ``"shared"`` evaluates the potential
        at ``(k/(n-1), 1 - k/(n-1))`` for births and deaths alike, while
        ``"self_excluded"`` uses the measure each mover actually sees, which
        matches the simulated n-player game.  Stationary profiles do not
        depend on the measure, so both conventions agree.
    """
    _check_two_states(profile.params)
    if n < 2:
        raise DomainError("the count chain needs n >= 2")
    ks = np.arange(n + 1)
    A = _rate_tables(n, profile, ks, convention)
    birth = A[:, 1, 0] * (n - ks)
    death = A[:, 0, 1] * ks
    return BirthDeathChain(n, birth, death, rates0=A[:, 0, :], rates1=A[:, 1, :])


def bd_stationary(chain: BirthDeathChain) -> CountDistribution:
    """Stationary law ``pi_k`` proportional to ``prod_{j<k} birth[j] / death[j+1]``."""
    steps = np.log(chain.birth[:-1]) - np.log(chain.death[1:])
    log_w = np.concatenate([[0.0], np.cumsum(steps)])
    return CountDistribution(log_w - logsumexp(log_w))


def _mean_field_fractions(n, mean_field):
    k = np.arange(n + 1)
    if mean_field == "self_excluded":
        return (k - 1) / (n - 1.0), (n - k - 1) / (n - 1.0)
    if mean_field == "self_included":
        return k / float(n), (n - k) / float(n)
    raise InvalidInputError(f"mean_field must be one of {MEAN_FIELD}")


def exact_cost(
    n: int,
    profile: StrategyProfile,
    convention: str = "shared",
    mean_field: str = "self_excluded",
) -> float:
    """Exact ergodic cost of a single player under a symmetric profile.

    With ``k`` players in state 0, a player in state 0 pays its running cost
    plus the fraction of the *other* players in state 0, ``(k-1)/(n-1)``;
    likewise in state 1.  The cost is the stationary expectation of
    ``(k/n) c_0(k) + ((n-k)/n) c_1(k)``.  ``mean_field="self_included"``
    uses ``k/n`` instead, i.e. the mean-field cost of the full empirical
    measure.
    """
    params = profile.params
    chain = bd_rates(n, profile, convention)
    pi = bd_stationary(chain).probs
    k = np.arange(n + 1)
    f0 = np.array([running_cost(0, r, params) for r in chain.rates0])
    f1 = np.array([running_cost(1, r, params) for r in chain.rates1])
    F0, F1 = _mean_field_fractions(n, mean_field)
    per_k = (k / n) * (f0 + F0) + ((n - k) / n) * (f1 + F1)
    return float(np.dot(pi, per_k))


def full_chain_cost(n: int, profile: StrategyProfile, player: int = 0) -> float:
    """Ergodic cost of ``player`` from the full generator on ``[d]^n``.

    Brute force over all ``d**n`` configurations; meant as an oracle for
    small ``n``.  The mean-field cost uses the measure of the other players.
    """
    params = profile.params
    d = params.d
    if n < 2:
        raise DomainError("needs n >= 2")
    configs = list(itertools.product(range(d), repeat=n))
    index = {c: i for i, c in enumerate(configs)}
    size = len(configs)
    Q = np.zeros((size, size))
    cost = np.zeros(size)
    for s, c in enumerate(configs):
        arr = np.array(c)
        for i in range(n):
            row = profile.rates_for_player(0.0, arr, i)
            for y in range(d):
                if y != c[i]:
                    target = list(c)
                    target[i] = y
                    Q[s, index[tuple(target)]] += row[y]
            if i == player:
                others = np.delete(arr, i)
                cost[s] = running_cost(c[i], row, params) + np.mean(others == c[i])
        Q[s, s] = -Q[s].sum()
    pi = null_space(Q.T)[:, 0]
    pi = pi / pi.sum()
    return float(np.dot(pi, cost))


def cost_curve_csv(ns, rho_stationary, rho_master) -> str:
    """CSV with columns ``n, rho_stationary, rho_master, difference``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "rho_stationary", "rho_master", "difference"])
    for n, a, b in zip(ns, rho_stationary, rho_master):
        w.writerow([int(n), repr(float(a)), repr(float(b)), repr(float(a - b))])
    return buf.getvalue()
