"""
MLC threshold-voltage channel: state distributions under PE cycling and
retention, adjacent-state intersections, closed-form page RBERs, sampling.

Every function here is pure; sampling takes a caller-owned numpy Generator.
"""
import logging
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import NoRootInInterval
from ..models.channel import (
    CellState, ChannelParams, HardThresholds, StateModel, WriteVoltages
)
from ..utils.numerics import (
    gaussian_logpdf, gaussian_pdf, gaussian_sf, interval_mass
)

logger = logging.getLogger(__name__)

StateLike = Union[CellState, str, int]

NEWTON_STEPS = 3
EQUALITY_RTOL = 1e-9


def retention_shift(params: ChannelParams, v_nominal: float) -> Tuple[float, float]:
    """Mean and standard deviation of the retention voltage loss for a cell programmed at v_nominal"""
    pe = params.pe
    wear = params.a_r * pe ** params.alpha1 + params.b_r * pe ** params.alpha0
    mu_r = wear * (v_nominal - params.x0) * math.log1p(params.t_ret)
    return mu_r, 0.4 * abs(mu_r)


def nominal_voltages(params: ChannelParams, write: WriteVoltages) -> Tuple[float, float, float, float]:
    """Noise-free centers: V_min for the erased state, V + v_pp/2 for programmed states"""
    half_step = 0.5 * params.v_pp
    return (
        params.v_min,
        write.v1 + half_step,
        write.v2 + half_step,
        params.v_max + half_step,
    )


def build_state_model(params: ChannelParams, write: WriteVoltages) -> StateModel:
    """Gaussian (mu, sigma) per state at the operating point carried by params"""
    write.check_within(params)
    sigma_t = params.sigma_t

    mu, sigma = [], []
    for index, v_nominal in enumerate(nominal_voltages(params, write)):
        mu_r, sigma_r = retention_shift(params, v_nominal)
        base = params.sigma_e if index == 0 else params.sigma_p
        mu.append(v_nominal - mu_r)
        sigma.append(math.hypot(base, sigma_t, sigma_r))

    return StateModel(mu=tuple(mu), sigma=tuple(sigma), write=write,
                      pe=params.pe, t_ret=params.t_ret)


def pdf(model: StateModel, state: StateLike, v):
    """Density of the threshold voltage of one state"""
    i = CellState.coerce(state).index
    return gaussian_pdf(v, model.mu[i], model.sigma[i])


def ispp_programmed_pdf(v, v_write: float, v_pp: float, sigma: float):
    """
    Reference density of a programmed state before the Gaussian approximation:
    ISPP places the noise-free voltage uniformly on [v_write, v_write + v_pp],
    then programming noise N(0, sigma^2) is added.
    """
    v = np.asarray(v, dtype=float)
    out = interval_mass(v - v_write - v_pp, v - v_write, 0.0, sigma) / v_pp
    return out if out.ndim else float(out)


def sample_cell(model: StateModel, state: StateLike, rng: np.random.Generator,
                size: Optional[int] = None):
    """Draw threshold voltages of cells programmed to one state"""
    i = CellState.coerce(state).index
    return rng.normal(model.mu[i], model.sigma[i], size)


def sample_cells(model: StateModel, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one threshold voltage per entry of an array of state indices"""
    states = np.asarray(states, dtype=np.intp)
    mu = model.mu_array[states]
    sigma = model.sigma_array[states]
    return mu + sigma * rng.standard_normal(states.shape)


def _pair_equality_residual(v: float, mu_i: float, s_i: float, mu_j: float, s_j: float) -> float:
    return float(gaussian_logpdf(v, mu_i, s_i) - gaussian_logpdf(v, mu_j, s_j))


def intersection(mu_i: float, sigma_i: float, mu_j: float, sigma_j: float) -> float:
    """
    Voltage in (mu_i, mu_j) where two Gaussian densities are equal.

    Equating log-densities gives a*v^2 + b*v + c = 0; the numerically stable
    quadratic formula picks the roots and Newton steps polish the selected one.
    """
    var_i, var_j = sigma_i * sigma_i, sigma_j * sigma_j
    a = var_j - var_i
    b = -2.0 * (var_j * mu_i - var_i * mu_j)
    c = var_j * mu_i * mu_i - var_i * mu_j * mu_j + 2.0 * var_i * var_j * math.log(sigma_i / sigma_j)

    if abs(a) <= 1e-14 * max(var_i, var_j):
        roots = [-c / b] if b != 0.0 else []
    else:
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            raise NoRootInInterval(
                f"densities N({mu_i:.6g}, {sigma_i:.6g}^2) and N({mu_j:.6g}, {sigma_j:.6g}^2) never intersect"
            )
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        roots = [q / a]
        if q != 0.0:
            roots.append(c / q)

    inside = [r for r in roots if mu_i < r < mu_j]
    if not inside:
        raise NoRootInInterval(
            f"no density intersection between means {mu_i:.6g} and {mu_j:.6g} (roots {roots})"
        )
    t = inside[0]

    for _ in range(NEWTON_STEPS):
        f = _pair_equality_residual(t, mu_i, sigma_i, mu_j, sigma_j)
        df = -(t - mu_i) / var_i + (t - mu_j) / var_j
        if df == 0.0:
            break
        step = f / df
        if not mu_i < t - step < mu_j:
            break
        t -= step
    return t


def hard_thresholds(model: StateModel) -> HardThresholds:
    """Intersections t1, t2, t3 of adjacent state densities"""
    if not model.is_ordered():
        raise NoRootInInterval(f"state means are not ordered: {model.mu}")
    mu, sigma = model.mu, model.sigma
    t = [intersection(mu[i], sigma[i], mu[i + 1], sigma[i + 1]) for i in range(3)]
    return HardThresholds(*t)


def rber(model: StateModel, th: HardThresholds) -> Tuple[float, float]:
    """(omega_msb, omega_lsb) of hard reads at the thresholds, equal state priors"""
    mu, sigma = model.mu, model.sigma

    def above(t, i):
        return gaussian_sf((t - mu[i]) / sigma[i])

    def below(t, i):
        return gaussian_sf((mu[i] - t) / sigma[i])

    omega_msb = 0.25 * (above(th.t2, 1) + below(th.t2, 2))
    omega_lsb = 0.25 * (above(th.t1, 0) + below(th.t1, 1)) + 0.25 * (above(th.t3, 2) + below(th.t3, 3))
    return float(omega_msb), float(omega_lsb)


def transition_matrix(model: StateModel, boundaries: Sequence[float]) -> np.ndarray:
    """P(region r | state s) for regions delimited by boundaries (length R + 1), shape (4, R)"""
    edges = np.asarray(boundaries, dtype=float)
    mu = model.mu_array[:, None]
    sigma = model.sigma_array[:, None]
    return interval_mass(edges[None, :-1], edges[None, 1:], mu, sigma)


def hard_decision(voltages: np.ndarray, th: HardThresholds) -> np.ndarray:
    """State index 0..3 decided by comparing sensed voltages against t1 < t2 < t3"""
    return np.searchsorted(np.asarray(th.as_tuple()), voltages, side='right')


def evaluate(params: ChannelParams, write: WriteVoltages):
    """State model, hard thresholds and page RBERs in one call"""
    model = build_state_model(params, write)
    th = hard_thresholds(model)
    omega_msb, omega_lsb = rber(model, th)
    return model, th, omega_msb, omega_lsb
