"""Potential, mobilities and the three semi-implicit Cahn--Hilliard steppers.

All models are written in rescaled time::

    du/dt = A(u) mu,     mu = W'(u) / eps^2 - lap(u)

with ``A(u) mu`` equal to ``lap(mu)`` (C-CH), ``div(M(u) grad mu)`` (M-CH) or
``N(u) div(M(u) grad(N(u) mu))`` (NMN-CH). Each step solves the linear
two-by-two block system for ``(u^{n+1}, mu^{n+1})`` mode by mode, with the
concave part of the energy and the non-constant part of the metric treated
explicitly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import expit

from .spectral import GridSpec, SymbolOperator, build_symbol, _check_field

#: max of |W''| on [0, 1]; the explicit energy part is concave for alpha >= this
W2_BOUND = 1.0
#: max of W on [0, 1], reached at s = 1/2
W_MAX = 1.0 / 32.0


class ConfigError(ValueError):
    """Invalid parameter combination."""


class InstabilityError(RuntimeError):
    """The state stopped being finite during a step."""

    def __init__(self, step: int, max_abs: float, state: "SimState | None" = None):
        super().__init__(f"non-finite state after step {step} (max |u| before blow-up: {max_abs:.6g})")
        self.step = step
        self.max_abs = max_abs
        self.state = state


class Model(str, enum.Enum):
    CCH = "cch"
    MCH = "mch"
    NMNCH = "nmn"

    @classmethod
    def parse(cls, name: "str | Model") -> "Model":
        if isinstance(name, Model):
            return name
        key = str(name).strip().lower().replace("-", "").replace("_", "")
        aliases = {"cch": cls.CCH, "c": cls.CCH, "classical": cls.CCH,
                   "mch": cls.MCH, "m": cls.MCH, "mobility": cls.MCH,
                   "nmn": cls.NMNCH, "nmnch": cls.NMNCH}
        try:
            return aliases[key]
        except KeyError:
            raise ConfigError(f"unknown model {name!r}; expected one of cch, mch, nmn") from None


# -- potential and profile -------------------------------------------------

def W(s):
    """Double well ``s^2 (1-s)^2 / 2``."""
    return 0.5 * s * s * (1.0 - s) ** 2


def W_prime(s):
    return s * (1.0 - s) * (1.0 - 2.0 * s)


def W_second(s):
    return 1.0 - 6.0 * s + 6.0 * s * s


def G(s):
    """Antiderivative of ``s(1-s)`` vanishing at 0, so that ``6 G(1) = 1``."""
    return s * s / 2.0 - s ** 3 / 3.0


def profile_q(z):
    """Optimal profile ``(1 - tanh(z/2)) / 2``: 1 for ``z -> -inf``, 0 for ``z -> +inf``.

    Evaluated as the logistic ``1 / (1 + e^z)`` so the far tail keeps its
    exponentially small value instead of rounding to 0.
    """
    return expit(-np.asarray(z, dtype=float))


def profile_q_prime(z):
    q = profile_q(z)
    return -q * (1.0 - q)


# -- parameters ------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Scheme constants. ``m`` and ``beta`` default per model when left as ``None``.

    ``m`` defaults to ``max M`` on [0, 1] for M-CH and to 1 otherwise; ``beta``
    defaults to ``2 / eps^2``.
    """

    model: Model
    epsilon: float
    dt: float
    alpha: float = 2.0
    m: float | None = None
    beta: float | None = None
    gamma: float = 1.0
    mobility_scale: float = 36.0

    def __post_init__(self):
        object.__setattr__(self, "model", Model.parse(self.model))
        for name in ("epsilon", "dt", "alpha", "gamma", "mobility_scale"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v <= 0:
                raise ConfigError(f"{name} must be positive and finite, got {v}")
            object.__setattr__(self, name, v)
        if self.alpha < W2_BOUND:
            raise ConfigError(
                f"alpha={self.alpha} violates the concavity bound alpha >= max|W''| = {W2_BOUND}"
            )
        if self.m is None:
            m = self.mobility_scale * 2.0 * W_MAX if self.model is Model.MCH else 1.0
        else:
            m = float(self.m)
        if not np.isfinite(m) or m <= 0:
            raise ConfigError(f"m must be positive, got {m}")
        if self.model is Model.MCH and m < self.mobility_scale * 2.0 * W_MAX * (1 - 1e-12):
            raise ConfigError(
                f"m={m} is below max M = {self.mobility_scale * 2.0 * W_MAX} for the M-CH mobility"
            )
        object.__setattr__(self, "m", m)
        beta = 2.0 / self.epsilon ** 2 if self.beta is None else float(self.beta)
        if not np.isfinite(beta) or beta < 0:
            raise ConfigError(f"beta must be >= 0, got {beta}")
        object.__setattr__(self, "beta", beta)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def mobility_M(s, p: ModelParams):
    if p.model is Model.MCH:
        return p.mobility_scale * 2.0 * W(s)
    if p.model is Model.NMNCH:
        return W(s) + p.gamma * p.epsilon ** 2
    return np.ones_like(np.asarray(s, dtype=float))


def mobility_N(s, p: ModelParams):
    """``1 / sqrt(M)``; only meaningful for NMN-CH, identically 1 otherwise."""
    if p.model is Model.NMNCH:
        return 1.0 / np.sqrt(mobility_M(s, p))
    return np.ones_like(np.asarray(s, dtype=float))


# -- state -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SimState:
    u: np.ndarray
    mu: np.ndarray
    step: int = 0
    time: float = 0.0


def chemical_potential(grid: GridSpec, u: np.ndarray, eps: float) -> np.ndarray:
    F = grid.rfft(u)
    return W_prime(u) / eps ** 2 + grid.irfft(grid.k2 * F)


MU0_POLICIES = ("consistent", "zero")


def initial_state(grid: GridSpec, u: np.ndarray, p: ModelParams, mu0: str = "consistent") -> SimState:
    """Pair ``u`` with a starting chemical potential.

    ``"consistent"`` uses the potential ``u`` implies. ``"zero"`` starts from
    ``mu = 0``, which is what rough data (grid-scale noise) need: there the
    consistent potential is of size ``1/h^2`` and the explicit metric terms of
    M-CH and NMN-CH amplify it.
    """
    u = _check_field(grid, u, "u")
    if mu0 == "consistent":
        mu = chemical_potential(grid, u, p.epsilon)
    elif mu0 == "zero":
        mu = np.zeros_like(u)
    else:
        raise ConfigError(f"unknown mu0 policy {mu0!r}; expected one of {', '.join(MU0_POLICIES)}")
    return SimState(u=u.copy(), mu=mu)


# -- symbols ---------------------------------------------------------------

def symbol_rule(p: ModelParams) -> Callable[[np.ndarray], np.ndarray]:
    """Multiplier of the inverse operator as a function of ``k2 = 4 pi^2 |xi|^2``."""
    stab = p.alpha / p.epsilon ** 2
    if p.model is Model.CCH:
        return lambda k2: 1.0 / (1.0 + p.dt * k2 * (k2 + stab))
    if p.model is Model.MCH:
        return lambda k2: 1.0 / (1.0 + p.dt * p.m * k2 * (k2 + stab))
    return lambda k2: 1.0 / (1.0 + p.dt * (p.m * k2 + p.beta) * (k2 + stab))


@lru_cache(maxsize=32)
def scheme_symbol(grid: GridSpec, p: ModelParams) -> SymbolOperator:
    return build_symbol(grid, symbol_rule(p))


# -- right-hand sides ------------------------------------------------------

def nmn_rhs(grid: GridSpec, u: np.ndarray, mu: np.ndarray, p: ModelParams) -> np.ndarray:
    """``N div(M grad(N mu))`` in the expanded form ``a lap(w) + 2 grad a . grad w``.

    Here ``a = sqrt(M(u))`` and ``w = N(u) mu = mu / a``.
    """
    M = mobility_M(u, p)
    if np.any(M <= 0):
        raise ConfigError("NMN mobility must stay positive")
    a = np.sqrt(M)
    w = mu / a
    A = grid.rfft(a)
    Wh = grid.rfft(w)
    out = a * grid.irfft(-grid.k2 * Wh)
    for d in grid.ik:
        out += 2.0 * grid.irfft(d * A) * grid.irfft(d * Wh)
    return out


def mch_rhs(grid: GridSpec, u: np.ndarray, mu: np.ndarray, p: ModelParams) -> np.ndarray:
    """``div(M(u) grad mu)``."""
    M = mobility_M(u, p)
    Mh = grid.rfft(mu)
    acc = 0
    for d in grid.ik:
        acc = acc + d * grid.rfft(M * grid.irfft(d * Mh))
    return grid.irfft(acc)


# -- steppers --------------------------------------------------------------

class Stepper:
    """One time step of a model on a fixed grid.

    The inverse operator is tabulated once at construction; calling the stepper
    never mutates its input state.
    """

    def __init__(self, params: ModelParams, grid: GridSpec, dealias: bool = False):
        self.params = params
        self.grid = grid
        self.dealias = dealias
        self.symbol = scheme_symbol(grid, params)
        self._stab = params.alpha / params.epsilon ** 2
        self._mask = grid.dealias_mask if dealias else None

    def _nl(self, F):
        return F * self._mask if self._mask is not None else F

    def _rhs_hat(self, u, mu, U, MU):
        """Return (transform of B1, symbol multiplying B2 in the u update)."""
        raise NotImplementedError

    def __call__(self, state: SimState) -> SimState:
        # _step detects blow-up itself; the overflow warnings on the way are noise
        with np.errstate(over="ignore", invalid="ignore"):
            return self._step(state)

    def _step(self, state: SimState) -> SimState:
        g, p = self.grid, self.params
        u, mu = state.u, state.mu
        U = g.rfft(u)
        MU = g.rfft(mu)
        B2 = self._nl(g.rfft(W_prime(u))) / p.epsilon ** 2 - self._stab * U
        B1, coef = self._rhs_hat(u, mu, U, MU)
        U_new = self.symbol.multipliers * (B1 - p.dt * coef * B2)
        MU_new = B2 + (g.k2 + self._stab) * U_new
        u_new = g.irfft(U_new)
        mu_new = g.irfft(MU_new)
        step = state.step + 1
        new = SimState(u=u_new, mu=mu_new, step=step, time=step * p.dt)
        if not (np.isfinite(u_new).all() and np.isfinite(mu_new).all()):
            raise InstabilityError(step, float(np.nanmax(np.abs(u))), new)
        return new

    def run(self, state: SimState, steps: int, callback=None) -> SimState:
        for _ in range(steps):
            state = self(state)
            if callback is not None:
                callback(state)
        return state


class CCHStepper(Stepper):
    def _rhs_hat(self, u, mu, U, MU):
        return U, self.grid.k2


class MCHStepper(Stepper):
    """``mobility`` overrides ``M(u)``; the default is the scaled degenerate mobility."""

    def __init__(self, params, grid, dealias=False, mobility=None):
        super().__init__(params, grid, dealias)
        self.mobility = mobility if mobility is not None else (lambda s: mobility_M(s, params))

    def _rhs_hat(self, u, mu, U, MU):
        g, p = self.grid, self.params
        M = self.mobility(u)
        peak = float(M.max())
        if peak > p.m * (1 + 1e-12):
            raise ConfigError(f"max M(u) = {peak:.6g} exceeds the splitting constant m = {p.m}")
        Mm = M - p.m
        acc = 0
        for d in g.ik:
            acc = acc + d * g.rfft(Mm * g.irfft(d * MU))
        return U + p.dt * self._nl(acc), p.m * g.k2


class NMNStepper(Stepper):
    def _rhs_hat(self, u, mu, U, MU):
        g, p = self.grid, self.params
        rhs = self._nl(g.rfft(nmn_rhs(g, u, mu, p)))
        H = rhs + (p.m * g.k2 + p.beta) * MU
        return U + p.dt * H, p.m * g.k2 + p.beta


_STEPPERS = {Model.CCH: CCHStepper, Model.MCH: MCHStepper, Model.NMNCH: NMNStepper}


def make_stepper(params: ModelParams, grid: GridSpec, dealias: bool = False) -> Stepper:
    return _STEPPERS[params.model](params, grid, dealias=dealias)


def _checked(p: ModelParams, model: Model) -> ModelParams:
    if p.model is not model:
        raise ConfigError(f"parameters are for {p.model.value}, not {model.value}")
    return p


def step_cch(grid: GridSpec, state: SimState, p: ModelParams) -> SimState:
    return CCHStepper(_checked(p, Model.CCH), grid)(state)


def step_mch(grid: GridSpec, state: SimState, p: ModelParams) -> SimState:
    return MCHStepper(_checked(p, Model.MCH), grid)(state)


def step_nmn(grid: GridSpec, state: SimState, p: ModelParams) -> SimState:
    return NMNStepper(_checked(p, Model.NMNCH), grid)(state)
