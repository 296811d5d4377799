"""Reciprocal moments theta_k(t) = E[lambda_t^-k] of the intensity.

With lambda0 = 1 the moments solve the linear cascade

    theta_k' + psi_k * theta_k = mS_k * theta_{k-1},   theta_k(0) = 1,   theta_0 = 1,

where mS_k = E[exp(kX)] - 1 and psi_k = k*beta - rho*mE_k. Orders 1 and 2
have closed forms; higher orders are integrated numerically.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate

from .core_model import ArrayLike, ModelParams, exp_moment
from .errors import DivergentMomentError, MomentViolation, ParameterError, StabilityError

logger = logging.getLogger(__name__)

DEGENERACY_RTOL = 1e-8
KNOT_SPACING = 0.5
QUAD_EPSREL = 1e-10
QUAD_EPSABS = 1e-13


@dataclass(frozen=True)
class MomentParams:
    """Jump moments and relaxation rates for orders 1..order (index 0 is order 1)."""
    mS: Tuple[float, ...]
    mE: Tuple[float, ...]
    psi: Tuple[float, ...]
    order: int

    def __post_init__(self):
        if self.order < 1:
            raise ParameterError(f"moment order must be at least 1, got {self.order}")
        if not len(self.mS) == len(self.mE) == len(self.psi) == self.order:
            raise ParameterError("mS, mE and psi must each hold one entry per order")
        unstable = [
            MomentViolation(k, "psi", f"psi_{k} = {p:g} is not positive")
            for k, p in enumerate(self.psi, start=1)
            if not p > 0
        ]
        if unstable:
            raise StabilityError("unstable reciprocal moments", unstable)

    @classmethod
    def from_model(cls, params: ModelParams, order: int) -> "MomentParams":
        """Evaluate the constants once; report every divergent or unstable order together."""
        if order < 1:
            raise ParameterError(f"moment order must be at least 1, got {order}")
        if params.lambda0 != 1.0:
            raise ParameterError(f"reciprocal moments require lambda0 = 1, got {params.lambda0}")
        divergent: List[MomentViolation] = []
        mS: List[float] = []
        mE: List[float] = []
        for k in range(1, order + 1):
            try:
                mS.append(exp_moment(params.jump_self, k))
            except DivergentMomentError as exc:
                divergent.extend(MomentViolation(v.order, "self", v.reason) for v in exc.violations)
                mS.append(math.inf)
            try:
                mE.append(exp_moment(params.jump_ext, k))
            except DivergentMomentError as exc:
                # without external arrivals their marks never enter psi_k
                if params.rho > 0:
                    divergent.extend(MomentViolation(v.order, "external", v.reason) for v in exc.violations)
                mE.append(math.inf)
        if divergent:
            raise DivergentMomentError("divergent jump moments", divergent)
        psi = tuple(k * params.beta - (params.rho * m if params.rho > 0 else 0.0) for k, m in enumerate(mE, start=1))
        return cls(tuple(mS), tuple(mE), psi, order)

    def m_self(self, k: int) -> float:
        return self.mS[k - 1]

    def psi_k(self, k: int) -> float:
        return self.psi[k - 1]

    def stationary(self, k: int) -> float:
        return math.prod(self.mS[j] / self.psi[j] for j in range(k))


class CurveSource(str, Enum):
    THEORY = "theory"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class MomentCurve:
    times: np.ndarray
    values: np.ndarray
    order: int
    source: CurveSource = CurveSource.THEORY
    ci_half_width: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ParameterError("times and values differ in length")
        if self.ci_half_width is not None:
            if self.source is not CurveSource.MONTE_CARLO:
                raise ParameterError("only Monte Carlo curves carry confidence half-widths")
            if len(self.ci_half_width) != len(self.times):
                raise ParameterError("ci_half_width and times differ in length")

    def __len__(self) -> int:
        return len(self.times)


def _times(t: ArrayLike) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise ParameterError("moment times must be nonnegative")
    return arr


def _out(value: np.ndarray):
    return float(value) if value.ndim == 0 else value


def _theta1(mp: MomentParams, t: np.ndarray) -> np.ndarray:
    psi1 = mp.psi[0]
    c = mp.mS[0] / psi1
    return np.exp(-psi1 * t) - c * np.expm1(-psi1 * t)


def _theta2(mp: MomentParams, t: np.ndarray) -> np.ndarray:
    psi1, psi2 = mp.psi[0], mp.psi[1]
    c = mp.mS[0] / psi1
    gap = psi2 - psi1
    if abs(gap) < DEGENERACY_RTOL * max(psi1, psi2):
        crossed = t * np.exp(-psi1 * t)
    else:
        # (exp(-psi1 t) - exp(-psi2 t)) / (psi2 - psi1)
        crossed = np.exp(-psi1 * t) * -np.expm1(-gap * t) / gap
    settled = -np.expm1(-psi2 * t) / psi2
    return np.exp(-psi2 * t) + mp.mS[1] * (c * settled + (1.0 - c) * crossed)


def theta1(params: ModelParams, t: ArrayLike):
    """E[1/lambda_t] in closed form."""
    return _out(_theta1(MomentParams.from_model(params, 1), _times(t)))


def theta2(params: ModelParams, t: ArrayLike):
    """E[1/lambda_t^2] in closed form, with the psi_2 == psi_1 limit taken analytically."""
    return _out(_theta2(MomentParams.from_model(params, 2), _times(t)))


class _Cascade:
    """theta_j for j <= order, stepping each level across fixed knots.

    Between knots a and b,

        theta_j(b) = exp(-psi_j (b-a)) theta_j(a) + mS_j * int_a^b exp(-psi_j (b-s)) theta_{j-1}(s) ds,

    so every quadrature sees a bounded weight regardless of psi_j * t.
    """

    def __init__(self, mp: MomentParams, spacing: float = KNOT_SPACING):
        self.mp = mp
        self.spacing = spacing
        self.knots: Dict[int, List[float]] = {j: [1.0] for j in range(1, mp.order + 1)}

    def _panel(self, j: int, a: float, b: float, start: float) -> float:
        psi = self.mp.psi_k(j)
        if j == 1:
            lower = self._flat
        else:
            lower = lambda s: self.value(j - 1, s)  # noqa: E731
        integral, _ = integrate.quad(
            lambda s: math.exp(-psi * (b - s)) * lower(s), a, b, epsrel=QUAD_EPSREL, epsabs=QUAD_EPSABS
        )
        return math.exp(-psi * (b - a)) * start + self.mp.m_self(j) * integral

    @staticmethod
    def _flat(_s: float) -> float:
        return 1.0

    def _knot(self, j: int, n: int) -> float:
        cache = self.knots[j]
        while len(cache) <= n:
            i = len(cache)
            cache.append(self._panel(j, (i - 1) * self.spacing, i * self.spacing, cache[-1]))
        return cache[n]

    def value(self, j: int, t: float) -> float:
        n = int(t // self.spacing)
        a = n * self.spacing
        base = self._knot(j, n)
        if t == a:
            return base
        return self._panel(j, a, t, base)


def theta_k_recursive(params: ModelParams, k: int, grid: ArrayLike) -> MomentCurve:
    """theta_k on ``grid`` by quadrature through the cascade of lower orders."""
    mp = MomentParams.from_model(params, k)
    times = np.atleast_1d(_times(grid))
    cascade = _Cascade(mp)
    values = np.array([cascade.value(k, float(t)) for t in times])
    logger.debug(f"theta_{k} by recursion on {times.size} points, {len(cascade.knots[k])} knots")
    return MomentCurve(times, values, k, CurveSource.THEORY)


def product_moment(params: ModelParams, s: float, t: float) -> float:
    """E[lambda_s^-1 * lambda_t^-1] for s <= t."""
    if not 0 <= s <= t:
        raise ParameterError(f"product moment needs 0 <= s <= t, got s={s}, t={t}")
    mp = MomentParams.from_model(params, 2)
    lag = t - s
    decay = math.exp(-mp.psi[0] * lag)
    s_arr = np.asarray(float(s))
    c = mp.mS[0] / mp.psi[0]
    return float(decay * _theta2(mp, s_arr) - c * math.expm1(-mp.psi[0] * lag) * _theta1(mp, s_arr))


def covariance(params: ModelParams, s: float, t: float) -> float:
    """Cov(lambda_s^-1, lambda_t^-1) for s <= t."""
    return product_moment(params, s, t) - theta1(params, t) * theta1(params, s)


def stationary_theta(params: ModelParams, k: int) -> float:
    """Limit of theta_k(t) as t grows: the product of mS_j / psi_j over j <= k."""
    return MomentParams.from_model(params, k).stationary(k)


def theory_curve(params: ModelParams, order: int, grid: ArrayLike) -> MomentCurve:
    times = np.atleast_1d(_times(grid))
    if order == 1:
        return MomentCurve(times, _theta1(MomentParams.from_model(params, 1), times), 1)
    if order == 2:
        return MomentCurve(times, _theta2(MomentParams.from_model(params, 2), times), 2)
    return theta_k_recursive(params, order, times)
