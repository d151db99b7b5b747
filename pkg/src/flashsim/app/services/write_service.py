"""
Write-voltage design: the distance-weighted write cost, the alternating
coordinate search over (V1, V2), baseline schemes and a 2-D grid oracle.
"""
import logging
import math
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy import optimize, special

from ..config import current_config
from ..exceptions import DegenerateBracket, NoRootInInterval, OptimizerError
from ..models.campaign import WriteScheme
from ..models.channel import ChannelParams, WriteVoltages
from ..models.quantization import WriteCostInput, WriteSearchConfig, WriteSearchResult
from ..utils.numerics import golden_section, mutual_information, page_weighted_cost
from . import channel_service

logger = logging.getLogger(__name__)

Objective = Callable[[float, float], float]


def write_cost(inp: WriteCostInput) -> float:
    """C_write = 2^(-1.5 d_min) * omega_lsb + 4^(-d_min) * omega_msb"""
    return page_weighted_cost(inp.omega_lsb, inp.omega_msb, inp.d_min)


def ml_ber_lsb(transition: np.ndarray, d_min: int, spectrum: Dict[int, float]) -> float:
    """
    Reference ML-decoding BER estimate of the LSB page.

    transition is the 4x4 hard-read matrix P(decided h | written g) in state
    order 11, 10, 00, 01; spectrum maps codeword weight to multiplicity.
    The crossover probability is taken as P(11->10) + P(00->01).
    """
    p = transition[0, 1] + transition[2, 3]
    total = 0.0
    for d in {d_min, 2 * ((d_min + 1) // 2)}:
        total += spectrum.get(d, 0.0) * 2.0 ** (-math.ceil(1.5 * d)) * special.comb(d, math.ceil(d / 2), exact=True)
    return float(p ** math.ceil(d_min / 2) * total)


def ml_ber_msb(transition: np.ndarray, d_min: int, spectrum: Dict[int, float]) -> float:
    """Reference ML-decoding BER estimate of the MSB page (crossover P(10->00))"""
    p = transition[1, 2]
    total = 0.0
    for d in {d_min, 2 * ((d_min + 1) // 2)}:
        total += spectrum.get(d, 0.0) * 4.0 ** (-d) * special.comb(d, math.ceil(d / 2), exact=True)
    return float(p ** math.ceil(d_min / 2) * total)


def hard_transition_matrix(params: ChannelParams, write: WriteVoltages) -> np.ndarray:
    """4x4 P(decided state | written state) for reads at the hard thresholds"""
    model = channel_service.build_state_model(params, write)
    th = channel_service.hard_thresholds(model)
    return channel_service.transition_matrix(model, [-np.inf, *th.as_tuple(), np.inf])


def _page_rates(params: ChannelParams, v1: float, v2: float) -> Tuple[float, float]:
    _, _, omega_msb, omega_lsb = channel_service.evaluate(params, WriteVoltages(v1, v2))
    return omega_msb, omega_lsb


def _guarded(objective: Objective) -> Objective:
    """Infeasible or degenerate points evaluate to +inf"""
    def wrapped(v1: float, v2: float) -> float:
        try:
            value = objective(v1, v2)
        except (ValueError, NoRootInInterval):
            return math.inf
        return value if math.isfinite(value) else math.inf
    return wrapped


def proposed_objective(params: ChannelParams, d_min: int) -> Objective:
    def objective(v1, v2):
        omega_msb, omega_lsb = _page_rates(params, v1, v2)
        return page_weighted_cost(omega_lsb, omega_msb, d_min)
    return _guarded(objective)


def total_rber_objective(params: ChannelParams) -> Objective:
    def objective(v1, v2):
        omega_msb, omega_lsb = _page_rates(params, v1, v2)
        return omega_msb + omega_lsb
    return _guarded(objective)


def capacity_objective(params: ChannelParams) -> Objective:
    """Negative mutual information (bits) of the hard-read 4x4 channel, uniform input"""
    def objective(v1, v2):
        return -float(mutual_information(hard_transition_matrix(params, WriteVoltages(v1, v2))))
    return _guarded(objective)


def interior_grid(lo: float, hi: float, m_grid: int) -> np.ndarray:
    """m_grid points splitting (lo, hi) into m_grid + 1 equal intervals"""
    return lo + (hi - lo) * np.arange(1, m_grid + 1) / (m_grid + 1)


def _bracket(grid: np.ndarray, values: np.ndarray) -> Tuple[int, float, float]:
    best = int(np.argmin(values))
    if best == 0 or best == grid.size - 1:
        raise DegenerateBracket(f"grid minimum at end point {grid[best]:.6f}")
    return best, grid[best - 1], grid[best + 1]


def line_search(f: Callable[[float], float], lo: float, hi: float, m_grid: int,
                tol: float) -> Tuple[float, float]:
    """Grid scan of (lo, hi) followed by golden-section refinement of the best bracket"""
    grid = interior_grid(lo, hi, m_grid)
    values = np.array([f(x) for x in grid])
    if not np.isfinite(values).any():
        raise OptimizerError(f"no feasible point on ({lo:.6f}, {hi:.6f})")

    try:
        best, a, b = _bracket(grid, values)
    except DegenerateBracket as e:
        logger.warning(f"{e}; keeping the grid point")
        best = int(np.argmin(values))
        return float(grid[best]), float(values[best])

    x, fx = golden_section(f, a, b, tol)
    if fx <= values[best]:
        return float(x), float(fx)
    return float(grid[best]), float(values[best])


def coordinate_descent(objective: Objective, params: ChannelParams, cfg: WriteSearchConfig,
                       name: str) -> Tuple[float, float, float, int, list]:
    """
    Alternate 1-D searches for V1 on (V_min, V2) and V2 on (V1, V_max).

    An update is kept only when it does not raise the objective, so the
    recorded cost sequence is non-increasing.
    """
    if not params.v_min < cfg.v2_init < params.v_max:
        raise OptimizerError(f"v2_init {cfg.v2_init} outside ({params.v_min}, {params.v_max})")

    v2 = cfg.v2_init
    v1 = 0.5 * (params.v_min + v2)
    cost = objective(v1, v2)
    history = [cost]

    q = 0
    for q in range(1, cfg.q_max + 1):
        x1, c1 = line_search(lambda x: objective(x, v2), params.v_min, v2, cfg.m_grid, cfg.tol)
        moved1 = 0.0
        if c1 <= cost:
            moved1, v1, cost = abs(x1 - v1), x1, c1

        x2, c2 = line_search(lambda x: objective(v1, x), v1, params.v_max, cfg.m_grid, cfg.tol)
        moved2 = 0.0
        if c2 <= cost:
            moved2, v2, cost = abs(x2 - v2), x2, c2

        history.append(cost)
        logger.debug(f"{name} pass {q}: V1={v1:.6f} V2={v2:.6f} cost={cost:.6e}")
        if moved1 < cfg.tol and moved2 < cfg.tol:
            break

    if not math.isfinite(cost):
        raise OptimizerError(f"{name} search found no feasible write voltages")
    return v1, v2, cost, q, history


def _result(params: ChannelParams, v1: float, v2: float, objective: str, value: float,
            iterations: int = 0, history: Optional[list] = None) -> WriteSearchResult:
    write = WriteVoltages(v1, v2, scheme=objective)
    omega_msb, omega_lsb = _page_rates(params, v1, v2)
    return WriteSearchResult(
        write=write, omega_msb=omega_msb, omega_lsb=omega_lsb, objective=objective,
        objective_value=value, iterations=iterations, history=list(history or []),
    )


def optimize_write(params: ChannelParams, d_min: int,
                   cfg: WriteSearchConfig = None) -> WriteSearchResult:
    """Write voltages minimizing the write cost for a code of minimum distance d_min"""
    cfg = cfg or WriteSearchConfig()
    v1, v2, cost, q, history = coordinate_descent(proposed_objective(params, d_min), params, cfg, "proposed")
    logger.info(f"Write design (PE={params.pe:g}, T={params.t_ret:g}): V1={v1:.4f} V2={v2:.4f} "
                f"cost={cost:.4e} after {q} passes")
    return _result(params, v1, v2, WriteScheme.PROPOSED.value, cost, q, history)


def baseline_fixed(params: ChannelParams) -> WriteSearchResult:
    """Equal-thirds write voltages independent of the operating point"""
    span = params.v_max - params.v_min
    v1 = params.v_min + current_config.FIXED_V1_FRACTION * span
    v2 = params.v_min + current_config.FIXED_V2_FRACTION * span
    omega_msb, omega_lsb = _page_rates(params, v1, v2)
    return _result(params, v1, v2, WriteScheme.FIXED.value, omega_msb + omega_lsb)


def baseline_min_rber(params: ChannelParams, cfg: WriteSearchConfig = None) -> WriteSearchResult:
    """Write voltages minimizing omega_msb + omega_lsb"""
    cfg = cfg or WriteSearchConfig()
    v1, v2, cost, q, history = coordinate_descent(total_rber_objective(params), params, cfg, "min-rber")
    return _result(params, v1, v2, WriteScheme.MIN_RBER.value, cost, q, history)


def _balanced_v1(params: ChannelParams, v2: float, m_grid: int) -> float:
    """
    V1 on (V_min, v2) where omega_msb = omega_lsb, lowest total RBER among the
    balance roots; the grid point with the smallest gap when none exists.
    """
    def gap(v1):
        omega_msb, omega_lsb = _page_rates(params, v1, v2)
        return omega_msb - omega_lsb

    def safe_gap(v1):
        try:
            return gap(v1)
        except (ValueError, NoRootInInterval):
            return math.nan

    total = total_rber_objective(params)
    grid = interior_grid(params.v_min, v2, m_grid)
    gaps = np.array([safe_gap(x) for x in grid])

    roots = []
    for i in range(grid.size - 1):
        g0, g1 = gaps[i], gaps[i + 1]
        if not (np.isfinite(g0) and np.isfinite(g1)):
            continue
        if g0 == 0.0:
            roots.append(grid[i])
        elif g0 * g1 < 0.0:
            roots.append(optimize.brentq(gap, grid[i], grid[i + 1], xtol=1e-12))

    if roots:
        return float(min(roots, key=lambda x: total(x, v2)))

    finite = np.isfinite(gaps)
    if not finite.any():
        raise OptimizerError(f"no feasible V1 below V2={v2:.6f}")
    candidates = np.where(finite, np.abs(gaps), np.inf)
    return float(grid[int(np.argmin(candidates))])


def baseline_mrd(params: ChannelParams, cfg: WriteSearchConfig = None) -> WriteSearchResult:
    """
    Minimum RBER difference between pages.

    Solved lexicographically: for each V2 the page-balance equation fixes V1,
    then V2 minimizes the total RBER along that balance curve.
    """
    cfg = cfg or WriteSearchConfig()
    total = total_rber_objective(params)

    def along_balance(v2: float) -> float:
        try:
            return total(_balanced_v1(params, v2, cfg.m_grid), v2)
        except OptimizerError:
            return math.inf

    v2, _ = line_search(along_balance, params.v_min, params.v_max, cfg.m_grid, cfg.tol)
    v1 = _balanced_v1(params, v2, cfg.m_grid)
    omega_msb, omega_lsb = _page_rates(params, v1, v2)
    logger.info(f"MRD design: V1={v1:.4f} V2={v2:.4f} gap={abs(omega_msb - omega_lsb):.3e}")
    return _result(params, v1, v2, WriteScheme.MRD.value, abs(omega_msb - omega_lsb))


def baseline_mcc(params: ChannelParams, cfg: WriteSearchConfig = None) -> WriteSearchResult:
    """Write voltages maximizing the hard-read channel capacity"""
    cfg = cfg or WriteSearchConfig()
    v1, v2, cost, q, history = coordinate_descent(capacity_objective(params), params, cfg, "mcc")
    return _result(params, v1, v2, WriteScheme.MCC.value, -cost, q, history)


def design_write(params: ChannelParams, scheme: WriteScheme, d_min: int,
                 cfg: WriteSearchConfig = None) -> WriteSearchResult:
    """Dispatch on the write scheme"""
    scheme = WriteScheme(scheme)
    if scheme is WriteScheme.PROPOSED:
        return optimize_write(params, d_min, cfg)
    if scheme is WriteScheme.FIXED:
        return baseline_fixed(params)
    if scheme is WriteScheme.MIN_RBER:
        return baseline_min_rber(params, cfg)
    if scheme is WriteScheme.MRD:
        return baseline_mrd(params, cfg)
    return baseline_mcc(params, cfg)


def exhaustive_write_search(params: ChannelParams, scheme: WriteScheme, d_min: int = 1,
                            m_grid: int = 200) -> WriteSearchResult:
    """
    Brute-force oracle on an m_grid x m_grid lattice of the feasible triangle
    V_min < V1 < V2 < V_max. The MRD oracle keeps, per V2, the V1 with the
    smallest page gap and then the V2 with the lowest total RBER.
    """
    scheme = WriteScheme(scheme)
    axis = interior_grid(params.v_min, params.v_max, m_grid)
    omega = np.full((m_grid, m_grid, 2), np.nan)
    for i, v1 in enumerate(axis):
        for j in range(i + 1, m_grid):
            try:
                omega[i, j] = _page_rates(params, v1, axis[j])
            except (ValueError, NoRootInInterval):
                continue
    msb, lsb = omega[..., 0], omega[..., 1]

    if scheme is WriteScheme.MRD:
        gap = np.where(np.isnan(msb), np.inf, np.abs(msb - lsb))
        best_i = np.argmin(gap, axis=0)
        totals = np.array([
            msb[best_i[j], j] + lsb[best_i[j], j] if np.isfinite(gap[best_i[j], j]) else np.inf
            for j in range(m_grid)
        ])
        j = int(np.argmin(totals))
        i = int(best_i[j])
        value = gap[i, j]
    else:
        if scheme is WriteScheme.PROPOSED:
            values = page_weighted_cost(lsb, msb, d_min)
        elif scheme is WriteScheme.MIN_RBER:
            values = msb + lsb
        elif scheme is WriteScheme.MCC:
            values = np.full((m_grid, m_grid), np.nan)
            for i in range(m_grid):
                for j in range(i + 1, m_grid):
                    if not np.isnan(msb[i, j]):
                        values[i, j] = capacity_objective(params)(axis[i], axis[j])
        else:
            raise ValueError(f"no grid oracle for scheme '{scheme.value}'")
        values = np.where(np.isnan(values), np.inf, values)
        i, j = np.unravel_index(int(np.argmin(values)), values.shape)
        value = -values[i, j] if scheme is WriteScheme.MCC else values[i, j]

    logger.debug(f"Grid oracle {scheme.value}: V1={axis[i]:.4f} V2={axis[j]:.4f} value={value:.4e}")
    return _result(params, float(axis[i]), float(axis[j]), scheme.value, float(value))
