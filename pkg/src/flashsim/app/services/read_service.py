"""
Read-voltage placement: entropy level sets around the hard thresholds,
region LLR tables, the LLR-aware read cost and its weights, theta search,
and the uniform / MMI / hard-decision baselines.
"""
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, special

from ..config import current_config
from ..config.loader import dump_kv, parse_sections
from ..exceptions import (
    ConfigError, MissingArtifact, OptimizerError, OverlapError, RankDeficient, ThetaOutOfRange
)
from ..models.campaign import ReadScheme
from ..models.channel import LSB_BITS, MSB_BITS, HardThresholds, StateModel
from ..models.quantization import CostWeights, LlrTable, ReadVoltages
from ..utils.numerics import (
    gaussian_logpdf, golden_section, interval_mass, mutual_information, page_weighted_cost
)
from . import channel_service

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
FLANK_SAMPLES = 256
RESIDUAL_TOL = 1e-9


def entropy(model: StateModel, v):
    """Entropy in bits of the state posterior at voltage v (equal priors)"""
    v = np.asarray(v, dtype=float)
    log_density = gaussian_logpdf(v[None, ...],
                                  model.mu_array.reshape((4,) + (1,) * v.ndim),
                                  model.sigma_array.reshape((4,) + (1,) * v.ndim))
    log_q = log_density - special.logsumexp(log_density, axis=0, keepdims=True)
    h = special.entr(np.exp(log_q)).sum(axis=0) / LN2
    return h if h.ndim else float(h)


def _flank_root(model: StateModel, theta: float, t: float, end: float) -> Optional[float]:
    """Nearest v between t and end with H(v) = theta, None if H stays above theta"""
    def f(v):
        return entropy(model, v) - theta

    points = t + (end - t) * np.linspace(0.0, 1.0, FLANK_SAMPLES + 1)
    values = entropy(model, points) - theta
    if values[0] <= 0.0:
        raise ThetaOutOfRange(f"theta={theta:.4f} is above the entropy peak H({t:.6f})={values[0] + theta:.6f}")

    crossing = np.flatnonzero(values <= 0.0)
    if crossing.size == 0:
        return None
    i = int(crossing[0])
    if values[i] == 0.0:
        return float(points[i])
    root = optimize.brentq(f, points[i - 1], points[i], xtol=1e-14, rtol=4 * np.finfo(float).eps)
    return float(root)


def solve_read_voltages(model: StateModel, theta: float,
                        th: Optional[HardThresholds] = None,
                        flank_sigmas: float = current_config.ENTROPY_FLANK_SIGMAS) -> ReadVoltages:
    """
    Six voltages where H(v) = theta, two around each hard threshold.

    Inner flanks are searched up to the neighbouring hard threshold; if H stays
    above theta all the way the two windows have merged. The outer flanks of
    t1 and t3 extend flank_sigmas deviations of the outer state.
    """
    if not 0.0 < theta < 1.0:
        raise ThetaOutOfRange(f"theta must lie in (0, 1), got {theta}")
    th = th or channel_service.hard_thresholds(model)
    sigma = model.sigma
    ts = th.as_tuple()

    reads = []
    for k, t in enumerate(ts):
        left_end = ts[k - 1] if k > 0 else t - flank_sigmas * sigma[0]
        right_end = ts[k + 1] if k < 2 else t + flank_sigmas * sigma[3]

        for end, inner in ((left_end, k > 0), (right_end, k < 2)):
            root = _flank_root(model, theta, t, end)
            if root is None:
                if inner:
                    raise OverlapError(
                        f"read windows merge at theta={theta:.4f}: H(v) stays above theta "
                        f"between {t:.6f} and {end:.6f}"
                    )
                raise ThetaOutOfRange(f"H(v) stays above theta={theta:.4f} between {t:.6f} and {end:.6f}")
            reads.append(root)

    for left, right in ((reads[1], reads[2]), (reads[3], reads[4])):
        if left >= right:
            raise OverlapError(f"read windows cross at theta={theta:.4f} ({left:.6f} >= {right:.6f})")

    residual = float(np.max(np.abs(entropy(model, np.asarray(reads)) - theta)))
    if residual > RESIDUAL_TOL:
        logger.warning(f"Entropy residual {residual:.2e} exceeds {RESIDUAL_TOL:.0e} at theta={theta:.4f}")
    return ReadVoltages(tuple(reads), theta=theta, scheme=ReadScheme.PROPOSED.value)


def _page_llr(bit0_mass: np.ndarray, bit1_mass: np.ndarray, clamp: float) -> np.ndarray:
    with np.errstate(divide='ignore', invalid='ignore'):
        llr = np.log(bit0_mass) - np.log(bit1_mass)
    llr = np.where(np.isnan(llr), 0.0, llr)
    return np.clip(llr, -clamp, clamp)


def _page_error_mass(mass: np.ndarray, bits: np.ndarray, llr: np.ndarray) -> np.ndarray:
    """Prior-weighted mass of cells whose page bit disagrees with the region decision"""
    decision = (llr < 0).astype(np.uint8)
    wrong = bits[:, None] != decision[None, :]
    return 0.25 * (mass * wrong).sum(axis=0)


def llr_table(model: StateModel, reads: ReadVoltages,
              clamp: float = current_config.LLR_CLAMP) -> LlrTable:
    """Per-region page LLRs (positive means bit 0) and error masses"""
    mass = channel_service.transition_matrix(model, reads.boundaries)
    l_msb = _page_llr(mass[MSB_BITS == 0].sum(axis=0), mass[MSB_BITS == 1].sum(axis=0), clamp)
    l_lsb = _page_llr(mass[LSB_BITS == 0].sum(axis=0), mass[LSB_BITS == 1].sum(axis=0), clamp)
    return LlrTable(
        l_msb=l_msb,
        l_lsb=l_lsb,
        p_msb=_page_error_mass(mass, MSB_BITS, l_msb),
        p_lsb=_page_error_mass(mass, LSB_BITS, l_lsb),
        region_mass=mass,
    )


def hard_llr_table(model: StateModel, reads: ReadVoltages,
                   clamp: float = current_config.LLR_CLAMP) -> LlrTable:
    """Region LLRs saturated to +/- clamp by sign"""
    table = llr_table(model, reads, clamp)
    table.l_msb = np.sign(table.l_msb) * clamp
    table.l_lsb = np.sign(table.l_lsb) * clamp
    return table


def alphas(table: LlrTable) -> Tuple[float, float, float, float]:
    """(a_pe_lsb, a_llr_lsb, a_pe_msb, a_llr_msb)"""
    return (
        float(np.sum(np.abs(table.l_lsb) * table.p_lsb)),
        float(np.sum(table.l_lsb * table.p_lsb)),
        float(np.sum(np.abs(table.l_msb) * table.p_msb)),
        float(np.sum(table.l_msb * table.p_msb)),
    )


def cost_components(alpha: Sequence[float], d_min: int) -> Tuple[float, float]:
    """(C_pe, C_llr) from the four alphas"""
    a_pe_lsb, a_llr_lsb, a_pe_msb, a_llr_msb = alpha
    return (page_weighted_cost(a_pe_lsb, a_pe_msb, d_min),
            page_weighted_cost(a_llr_lsb, a_llr_msb, d_min))


def read_cost(alpha: Sequence[float], d_min: int, w: CostWeights) -> float:
    """C_oa = c1 * C_pe + c2 * C_llr"""
    cost_pe, cost_llr = cost_components(alpha, d_min)
    return w.c1 * cost_pe + w.c2 * cost_llr


def calibrate_weights(theta_grid: Sequence[float], ber_samples: Sequence[float],
                      cost_pe_samples: Sequence[float], cost_llr_samples: Sequence[float],
                      collinearity_tol: float = 1e-9) -> CostWeights:
    """
    Least-squares fit ber ~ b0 + c1*cost_pe + c2*cost_llr, returning the slopes.

    Regressors are standardised before the fit; slopes are mapped back to the
    original scale.
    """
    theta = np.asarray(theta_grid, dtype=float)
    y = np.asarray(ber_samples, dtype=float)
    X = np.column_stack([np.asarray(cost_pe_samples, dtype=float),
                         np.asarray(cost_llr_samples, dtype=float)])
    if theta.size < 3:
        raise RankDeficient(f"calibration needs at least 3 theta points, got {theta.size}")
    if not (y.size == X.shape[0] == theta.size):
        raise ValueError("calibration samples are not aligned with the theta grid")

    center = X.mean(axis=0)
    scale = X.std(axis=0)
    if (scale <= 1e-12 * np.abs(center)).any() or (scale == 0.0).any():
        raise RankDeficient("a cost regressor is constant over the theta grid")
    Z = (X - center) / scale
    corr = float(np.mean(Z[:, 0] * Z[:, 1]))
    if abs(corr) > 1.0 - collinearity_tol:
        raise RankDeficient(f"cost regressors are collinear (correlation {corr:.12f})")

    design = np.column_stack([np.ones(theta.size), Z])
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    c1, c2 = beta[1:] / scale
    try:
        weights = CostWeights(float(c1), float(c2))
    except ValueError as e:
        raise RankDeficient(f"regression gave no usable weights: {e}") from e
    logger.info(f"Calibrated read-cost weights c1={weights.c1:.6g} c2={weights.c2:.6g}")
    return weights


def theta_cost(model: StateModel, d_min: int, w: CostWeights) -> Callable[[float], float]:
    """C_oa as a function of theta for a fixed state model"""
    th = channel_service.hard_thresholds(model)

    def cost(theta: float) -> float:
        reads = solve_read_voltages(model, theta, th)
        return read_cost(alphas(llr_table(model, reads)), d_min, w)
    return cost


def optimize_theta(model: StateModel, d_min: int, w: CostWeights,
                   bounds: Tuple[float, float] = current_config.THETA_BOUNDS,
                   tol: float = current_config.THETA_TOL,
                   cost_fn: Optional[Callable[[float], float]] = None,
                   step: float = current_config.THETA_SCAN_STEP) -> Tuple[float, ReadVoltages]:
    """
    theta minimizing the read cost on bounds.

    A coarse scan locates the valley and golden-section refines it. If a bound
    is infeasible the bounds shrink once to the feasible part of the scan.
    """
    lo, hi = bounds
    if not 0.0 < lo < hi < 1.0:
        raise ValueError(f"theta bounds must satisfy 0 < lo < hi < 1, got {bounds}")
    stubbed = cost_fn is not None
    cost_fn = cost_fn or theta_cost(model, d_min, w)

    last_error: Optional[OptimizerError] = None

    def safe_cost(theta: float) -> float:
        nonlocal last_error
        try:
            value = cost_fn(theta)
        except (ThetaOutOfRange, OverlapError) as e:
            last_error = e
            return math.inf
        return value if math.isfinite(value) else math.inf

    count = int(round((hi - lo) / step))
    grid = np.unique(np.append(np.round(lo + step * np.arange(count + 1), 12), hi))
    grid = grid[grid <= hi]
    values = np.array([safe_cost(x) for x in grid])
    feasible = np.isfinite(values)

    if not feasible.any():
        raise last_error or ThetaOutOfRange(f"no feasible theta on {bounds}")
    if not (feasible[0] and feasible[-1]):
        keep = np.flatnonzero(feasible)
        lo, hi = grid[keep[0]], grid[keep[-1]]
        logger.warning(f"theta bounds {bounds} partly infeasible; shrinking to ({lo:.3f}, {hi:.3f})")
        window = (grid >= lo) & (grid <= hi)
        grid, values = grid[window], values[window]

    best = int(np.argmin(values))
    a, b = grid[max(best - 1, 0)], grid[min(best + 1, grid.size - 1)]
    x, fx = golden_section(safe_cost, a, b, tol)

    candidates = [(fx, x), (values[best], grid[best]), (values[0], grid[0]), (values[-1], grid[-1])]
    value, theta_star = min(candidates, key=lambda c: c[0])
    theta_star = float(theta_star)
    logger.debug(f"theta*={theta_star:.4f} cost={value:.6e}")

    if not math.isfinite(value):
        raise last_error or ThetaOutOfRange("read cost is infinite on the whole search range")
    try:
        reads = solve_read_voltages(model, theta_star)
    except (ThetaOutOfRange, OverlapError):
        if not stubbed:
            raise
        reads = None
    return theta_star, reads


def uniform_reads(model: StateModel) -> ReadVoltages:
    """Six voltages evenly spaced strictly inside [mu_11, mu_01]"""
    lo, hi = model.mu[0], model.mu[3]
    reads = lo + (hi - lo) * np.arange(1, 7) / 7.0
    return ReadVoltages(tuple(reads), scheme=ReadScheme.UNIFORM.value)


def hard_reads(model: StateModel, th: Optional[HardThresholds] = None) -> ReadVoltages:
    """Each hard threshold read twice, leaving three empty regions"""
    th = th or channel_service.hard_thresholds(model)
    t1, t2, t3 = th.as_tuple()
    return ReadVoltages((t1, t1, t2, t2, t3, t3), scheme=ReadScheme.HARD.value)


def read_mutual_information(model: StateModel, reads: ReadVoltages) -> float:
    """I(X;Y) in bits of the 4-input, 7-region read channel with uniform input"""
    return float(mutual_information(channel_service.transition_matrix(model, reads.boundaries)))


def _batch_information(model: StateModel, boundaries: np.ndarray) -> np.ndarray:
    """Mutual information for a batch of boundary vectors, shape (C, 8)"""
    mu = model.mu_array[None, :, None]
    sigma = model.sigma_array[None, :, None]
    mass = interval_mass(boundaries[:, None, :-1], boundaries[:, None, 1:], mu, sigma)
    return mutual_information(mass)


def _coordinate_ascent(model: StateModel, reads: np.ndarray, step: float, radius: Optional[float],
                       max_sweeps: int = 100) -> Tuple[np.ndarray, float]:
    reads = reads.copy()
    best = read_mutual_information(model, ReadVoltages(tuple(reads)))
    for _ in range(max_sweeps):
        improved = False
        for i in range(6):
            lower = reads[i - 1] if i > 0 else model.mu[0] - 6.0 * model.sigma[0]
            upper = reads[i + 1] if i < 5 else model.mu[3] + 6.0 * model.sigma[3]
            if radius is not None:
                lower, upper = max(lower, reads[i] - radius), min(upper, reads[i] + radius)
            offsets = np.arange(math.ceil((lower - reads[i]) / step), math.floor((upper - reads[i]) / step) + 1)
            candidates = reads[i] + step * offsets
            candidates = candidates[(candidates >= lower) & (candidates <= upper)]
            if candidates.size == 0:
                continue
            edges = np.tile(np.concatenate(([-np.inf], reads, [np.inf])), (candidates.size, 1))
            edges[:, i + 1] = candidates
            info = _batch_information(model, edges)
            j = int(np.argmax(info))
            if info[j] > best + 1e-15:
                best, reads[i] = float(info[j]), candidates[j]
                improved = True
        if not improved:
            break
    return reads, best


def mmi_reads(model: StateModel, step: float = current_config.MMI_STEP,
              refinements: int = current_config.MMI_REFINEMENTS) -> ReadVoltages:
    """
    Read voltages maximizing the read-channel mutual information.

    Cyclic coordinate ascent on a step grid, then refinement passes at step/10
    and step/100 near the fixed point; started from the uniform reads and from
    one sigma around each hard threshold, keeping the best.
    """
    th = channel_service.hard_thresholds(model)
    starts = [np.asarray(uniform_reads(model).r)]
    around = []
    for k, t in enumerate(th.as_tuple()):
        around.extend([t - model.sigma[k], t + model.sigma[k + 1]])
    if all(a < b for a, b in zip(around, around[1:])):
        starts.append(np.asarray(around))

    best_reads, best_info = None, -math.inf
    for start in starts:
        reads, info = _coordinate_ascent(model, start, step, radius=None)
        fine = step
        for _ in range(refinements):
            reads, info = _coordinate_ascent(model, reads, fine / 10.0, radius=fine)
            fine /= 10.0
        if info > best_info:
            best_reads, best_info = reads, info

    logger.debug(f"MMI reads {np.round(best_reads, 5)} with I={best_info:.6f} bits")
    return ReadVoltages(tuple(best_reads), scheme=ReadScheme.MMI.value)


def design_reads(model: StateModel, scheme: ReadScheme, d_min: int,
                 weights: Optional[CostWeights] = None,
                 theta: float = current_config.THETA_FIXED) -> Tuple[ReadVoltages, LlrTable]:
    """Dispatch on the read scheme; returns the reads and their LLR table"""
    scheme = ReadScheme(scheme)
    if scheme is ReadScheme.PROPOSED:
        if weights is None:
            raise MissingArtifact("the proposed read scheme needs calibrated weights (--weights or a weights file)")
        _, reads = optimize_theta(model, d_min, weights)
    elif scheme is ReadScheme.ENTROPY_FIXED:
        reads = solve_read_voltages(model, theta)
        reads = ReadVoltages(reads.r, theta=theta, scheme=scheme.value)
    elif scheme is ReadScheme.UNIFORM:
        reads = uniform_reads(model)
    elif scheme is ReadScheme.MMI:
        reads = mmi_reads(model)
    else:
        reads = hard_reads(model)
        return reads, hard_llr_table(model, reads)
    return reads, llr_table(model, reads)


def save_weights(weights: CostWeights, path: Union[str, Path],
                 calibration: Optional[Dict[str, Any]] = None) -> Path:
    """Persist weights, plus the calibration samples they came from when given"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sections = [("weights", weights.to_dict())]
    if calibration:
        sections.append(("calibration", calibration))
    path.write_text(dump_kv(sections), encoding="utf-8")
    logger.info(f"Saved read-cost weights to {path}")
    return path


def load_weights(path: Union[str, Path]) -> CostWeights:
    """Read the [weights] block of a weights file"""
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"weights file not found: {path} (run 'calibrate' or pass --weights c1,c2)")
    values = {}
    for section in parse_sections(path.read_text(encoding="utf-8")):
        if section.name == "weights":
            values.update({entry.key: entry.value for entry in section.entries})
    try:
        return CostWeights(float(values['c1']), float(values['c2']))
    except KeyError as e:
        raise ConfigError(f"weights file {path} lacks weights.{e.args[0]}") from e
    except ValueError as e:
        raise ConfigError(f"weights file {path}: {e}") from e
