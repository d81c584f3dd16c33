"""Markovian strategy profiles for the n-player game.

A profile maps ``(t, configuration, player)`` to a rate vector.  Every
profile here except deviations is symmetric: a player's rates depend only on
its own state and on the empirical measure of the *other* players, so the
simulator can work with per-state rate tables keyed by the count vector.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, InvalidInputError
from .model import ModelParams, selector_rates
from .network import ConstantPotential
from .systems import MeasurePath, with_diagonal


def counts_of(config, d: int) -> np.ndarray:
    """Number of players in each state."""
    config = np.asarray(config)
    if config.ndim != 1 or np.any(config < 0) or np.any(config >= d):
        raise InvalidInputError(f"configuration entries must lie in 0..{d - 1}")
    return np.bincount(config, minlength=d)


def excluded_measures(counts) -> np.ndarray:
    """Row ``x`` is the empirical measure seen by a player sitting in ``x``.

    That player is removed, so row ``x`` equals ``(counts - e_x) / (n - 1)``.
    Rows of empty states are still filled (they are never used).
    """
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    if n < 2:
        raise DomainError("the measure of the other players needs n >= 2")
    return (counts[None, :] - np.eye(counts.size)) / (n - 1.0)


def selector_table(U, params: ModelParams) -> np.ndarray:
    """Off-diagonal rate table from per-state potentials.

    ``U[x]`` is the potential vector used by a player in state ``x``; the
    result has ``A[x, y] = gamma*_y(x, Delta_x U[x])`` and zero diagonal.
    """
    U = np.asarray(U, dtype=float)
    P = U - np.diagonal(U)[:, None]
    A = selector_rates(P, params)
    np.fill_diagonal(A, 0.0)
    return A


class StrategyProfile:
    """Base class.  Subclasses provide :meth:`state_rates`."""

    params: ModelParams
    time_homogeneous = True
    deviator = None

    def state_rates(self, t: float, counts) -> np.ndarray:
        """Off-diagonal rates ``A[x, y]`` used by a (non-deviating) player in ``x``."""
        raise NotImplementedError

    def rates_for_player(self, t: float, config, i: int) -> np.ndarray:
        """Rate vector (with negative-sum diagonal) of player ``i``."""
        d = self.params.d
        counts = counts_of(config, d)
        x = int(np.asarray(config)[i])
        row = self.state_rates(t, counts)[x].copy()
        row[x] = -row.sum()
        return row

    def mean_field_rates(self, eta) -> np.ndarray:
        """Generator ``a(eta)`` of the limiting (``n -> oo``) dynamics."""
        raise NotImplementedError


class StationaryProfile(StrategyProfile):
    """Every player uses ``gamma*(x, Delta_x u)`` for a fixed potential ``u``."""

    def __init__(self, u, params: ModelParams):
        u = np.asarray(u, dtype=float)
        if u.shape != (params.d,) or not np.all(np.isfinite(u)):
            raise InvalidInputError(f"potential must be a finite vector of length {params.d}")
        self.u = u
        self.params = params
        self._table = selector_table(np.broadcast_to(u, (params.d, params.d)), params)

    def state_rates(self, t, counts):
        return self._table

    def mean_field_rates(self, eta):
        return with_diagonal(self._table)


class MasterEquationProfile(StrategyProfile):
    """Rates from a potential that depends on the other players' measure.

    ``potential`` needs a ``potential(eta)`` method that is batched over
    leading axes (a :class:`PotentialNetwork` or :class:`ConstantPotential`).
    """

    def __init__(self, potential, params: ModelParams):
        self.potential = potential
        self.params = params

    def state_rates(self, t, counts):
        U = self.potential.potential(excluded_measures(counts))
        return selector_table(U, self.params)

    def mean_field_rates(self, eta):
        eta = np.asarray(eta, dtype=float)
        u = self.potential.potential(eta)
        return with_diagonal(selector_table(np.broadcast_to(u, (eta.size, eta.size)), self.params))


class TimeDependentProfile(StrategyProfile):
    """Rates from ``U(., mu(t))`` along a precomputed measure path.

    The rates depend on time only, not on the configuration.
    """

    time_homogeneous = False

    def __init__(self, potential, path: MeasurePath, params: ModelParams):
        self.potential = potential
        self.path = path
        self.params = params

    def state_rates(self, t, counts=None):
        u = self.potential.potential(self.path.at(t))
        d = self.params.d
        return selector_table(np.broadcast_to(u, (d, d)), self.params)

    def mean_field_rates(self, eta):
        raise DomainError("a time-dependent profile has no measure-feedback generator")


class DeviationProfile(StrategyProfile):
    """``base`` for everybody except ``player``, who follows ``rule``.

    ``rule`` is either a scalar (that rate towards every other state) or a
    ``(d, d)`` array of off-diagonal rates indexed by the deviator's state.
    """

    def __init__(self, base: StrategyProfile, player: int, rule):
        self.base = base
        self.params = base.params
        self.time_homogeneous = base.time_homogeneous
        self.deviator = int(player)
        d = self.params.d
        rule = np.asarray(rule, dtype=float)
        table = np.full((d, d), float(rule)) if rule.ndim == 0 else rule.copy()
        if table.shape != (d, d):
            raise InvalidInputError(f"deviation rule must be a scalar or a {d}x{d} table")
        np.fill_diagonal(table, 0.0)
        off = ~np.eye(d, dtype=bool)
        lo, hi = self.params.a_lo, self.params.a_hi
        if np.any(table[off] < lo - 1e-12) or np.any(table[off] > hi + 1e-12):
            raise InvalidInputError(f"deviation rates must lie in [{lo}, {hi}]")
        self.table = table

    def state_rates(self, t, counts):
        return self.base.state_rates(t, counts)

    def rates_for_player(self, t, config, i):
        if i != self.deviator:
            return self.base.rates_for_player(t, config, i)
        x = int(np.asarray(config)[i])
        row = self.table[x].copy()
        row[x] = -row.sum()
        return row


def constant_network_profile(u, params: ModelParams) -> MasterEquationProfile:
    """Master-equation profile whose potential ignores the measure."""
    return MasterEquationProfile(ConstantPotential(u), params)


__all__ = [
    "StrategyProfile",
    "StationaryProfile",
    "MasterEquationProfile",
    "TimeDependentProfile",
    "DeviationProfile",
    "counts_of",
    "excluded_measures",
    "selector_table",
    "constant_network_profile",
]
