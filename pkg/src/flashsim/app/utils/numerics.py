"""
Numerical helpers: Gaussian tails, interval masses, mutual information,
golden-section search
"""
import math
from typing import Callable, Tuple

import numpy as np
from scipy import special

SQRT2 = math.sqrt(2.0)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2


def gaussian_sf(z):
    """
    Standard normal upper tail Q(z) = P(Z > z).

    Uses the scaled complementary error function so tails stay accurate
    well below 1e-15 instead of rounding through 1 - cdf.
    """
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    tail = 0.5 * special.erfcx(a / SQRT2) * np.exp(-0.5 * a * a)
    out = np.where(z >= 0, tail, 1.0 - tail)
    return out if out.ndim else float(out)


def gaussian_cdf(z):
    """Standard normal lower tail P(Z < z)"""
    return gaussian_sf(-np.asarray(z, dtype=float))


def gaussian_pdf(x, mu, sigma):
    """Normalised Gaussian density"""
    z = (np.asarray(x, dtype=float) - mu) / sigma
    out = np.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))
    return out if np.ndim(out) else float(out)


def gaussian_logpdf(x, mu, sigma):
    """Log of the normalised Gaussian density"""
    z = (np.asarray(x, dtype=float) - mu) / sigma
    return -0.5 * z * z - np.log(sigma) - LOG_SQRT_2PI


def interval_mass(lower, upper, mu, sigma):
    """
    P(lower < X < upper) for X ~ N(mu, sigma^2), broadcasting over arrays.

    Differences are taken on whichever tail keeps both terms small, so
    regions deep in either tail do not cancel to zero.
    """
    za = (np.asarray(lower, dtype=float) - mu) / sigma
    zb = (np.asarray(upper, dtype=float) - mu) / sigma
    upper_side = gaussian_sf(za) - gaussian_sf(zb)
    lower_side = gaussian_cdf(zb) - gaussian_cdf(za)
    mass = np.where(za > 0, upper_side, lower_side)
    return np.clip(mass, 0.0, 1.0)


def mutual_information(transition: np.ndarray, prior: np.ndarray = None) -> np.ndarray:
    """
    Mutual information I(X;Y) in bits of a discrete memoryless channel.

    transition: (..., num_x, num_y) array of P(y | x); leading axes are batched.
    prior: input distribution, uniform when omitted.
    """
    p_y_x = np.asarray(transition, dtype=float)
    num_x = p_y_x.shape[-2]
    if prior is None:
        prior = np.full(num_x, 1.0 / num_x)
    prior = np.asarray(prior, dtype=float)

    joint = p_y_x * prior[:, None]
    p_y = joint.sum(axis=-2, keepdims=True)
    ratio = np.divide(p_y_x, p_y, out=np.ones_like(p_y_x), where=p_y > 0)
    terms = special.xlogy(joint, ratio) / math.log(2.0)
    return terms.sum(axis=(-2, -1))


def golden_section(f: Callable[[float], float], a: float, b: float,
                   tol: float = 1e-5) -> Tuple[float, float]:
    """
    Golden-section search.

    Given a function f with a single local minimum in [a, b], returns the
    point with the lowest evaluated value once the bracket is narrower
    than tol, together with that value.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        x = 0.5 * (a + b)
        return x, f(x)

    # Required steps to achieve tolerance
    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))

    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)

    for _ in range(n - 1):
        if yc < yd:
            b = d
            d = c
            yd = yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a = c
            c = d
            yc = yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)

    if yc < yd:
        return c, yc
    return d, yd


def page_weighted_cost(lsb: float, msb: float, d_min: int) -> float:
    """2^(-1.5 d_min) * lsb + 4^(-d_min) * msb"""
    return 2.0 ** (-1.5 * d_min) * lsb + 4.0 ** (-d_min) * msb
