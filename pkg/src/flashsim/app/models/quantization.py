"""
Data models for write-voltage search and read-voltage quantization
"""
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..config import current_config
from ..utils.numerics import page_weighted_cost
from .channel import WriteVoltages


@dataclass(frozen=True)
class WriteCostInput:
    """Page RBERs and code distance feeding the write cost"""
    omega_lsb: float
    omega_msb: float
    d_min: int

    def __post_init__(self):
        for name in ("omega_lsb", "omega_msb"):
            value = getattr(self, name)
            if not 0.0 <= value <= 0.5:
                raise ValueError(f"{name} must lie in [0, 0.5], got {value}")
        if self.d_min < 1:
            raise ValueError(f"d_min must be a positive integer, got {self.d_min}")


@dataclass(frozen=True)
class WriteSearchConfig:
    """Coordinate-descent settings: grid points per pass, pass cap, V2 start, tolerance"""
    m_grid: int = current_config.WRITE_M_GRID
    q_max: int = current_config.WRITE_Q_MAX
    v2_init: float = current_config.WRITE_V2_INIT
    tol: float = current_config.WRITE_TOL

    def __post_init__(self):
        if self.m_grid < 3:
            raise ValueError(f"m_grid must be >= 3, got {self.m_grid}")
        if self.q_max < 1:
            raise ValueError(f"q_max must be >= 1, got {self.q_max}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class WriteSearchResult:
    """Outcome of a write-voltage search"""
    write: WriteVoltages
    omega_msb: float
    omega_lsb: float
    objective: str = "proposed"
    objective_value: float = float('nan')
    iterations: int = 0
    history: List[float] = field(default_factory=list)

    def cost(self, d_min: int) -> float:
        """Write cost of the result for a code of minimum distance d_min"""
        return page_weighted_cost(self.omega_lsb, self.omega_msb, d_min)

    def to_row(self, d_min: int) -> Dict[str, Any]:
        """CSV row: v1,v2,cost,omega_msb,omega_lsb"""
        return {
            'v1': self.write.v1,
            'v2': self.write.v2,
            'cost': self.cost(d_min),
            'omega_msb': self.omega_msb,
            'omega_lsb': self.omega_lsb,
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            'v1': self.write.v1,
            'v2': self.write.v2,
            'omega_msb': self.omega_msb,
            'omega_lsb': self.omega_lsb,
            'scheme': self.objective,
            'objective_value': self.objective_value,
            'iterations': self.iterations,
        }


@dataclass(frozen=True)
class ReadVoltages:
    """Six sensing voltages R1..R6 and the entropy level that produced them"""
    r: Tuple[float, float, float, float, float, float]
    theta: Optional[float] = None
    scheme: str = ""

    def __post_init__(self):
        values = tuple(float(v) for v in self.r)
        if len(values) != 6:
            raise ValueError(f"six read voltages required, got {len(values)}")
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"read voltages must be finite, got {values}")
        # hard-decision reads repeat each threshold, so equality is allowed here
        if any(b < a for a, b in zip(values, values[1:])):
            raise ValueError(f"read voltages must be non-decreasing, got {values}")
        object.__setattr__(self, 'r', values)

    @property
    def boundaries(self) -> np.ndarray:
        """Region edges [-inf, R1..R6, +inf]"""
        return np.concatenate(([-np.inf], self.r, [np.inf]))

    @property
    def is_strictly_increasing(self) -> bool:
        return all(a < b for a, b in zip(self.r, self.r[1:]))

    def region_of(self, voltages: np.ndarray) -> np.ndarray:
        """Region index 0..6 for each sensed voltage"""
        return np.searchsorted(np.asarray(self.r), voltages, side='right')

    def to_dict(self) -> Dict[str, Any]:
        data = {f"r{i}": v for i, v in enumerate(self.r, start=1)}
        data['theta'] = self.theta
        data['scheme'] = self.scheme
        return data


@dataclass
class LlrTable:
    """Per-region LLRs and error masses for both pages (positive LLR means bit 0)"""
    l_msb: np.ndarray
    l_lsb: np.ndarray
    p_msb: np.ndarray
    p_lsb: np.ndarray
    region_mass: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("l_msb", "l_lsb", "p_msb", "p_lsb"):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != (7,):
                raise ValueError(f"{name} must have 7 entries, got shape {value.shape}")
            setattr(self, name, value)
        if self.region_mass is not None:
            self.region_mass = np.asarray(self.region_mass, dtype=float)
            if self.region_mass.shape != (4, 7):
                raise ValueError("region_mass must be a 4 x 7 matrix (state x region)")

    @property
    def total_mass(self) -> float:
        """Sum over regions of the prior-weighted region probability"""
        if self.region_mass is None:
            return float('nan')
        return float(self.region_mass.sum() / 4.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'l_msb': self.l_msb.tolist(),
            'l_lsb': self.l_lsb.tolist(),
            'p_msb': self.p_msb.tolist(),
            'p_lsb': self.p_lsb.tolist(),
        }


@dataclass(frozen=True)
class CostWeights:
    """Regression weights c1 (error-probability term) and c2 (signed-LLR term)"""
    c1: float
    c2: float

    def __post_init__(self):
        if not (math.isfinite(self.c1) and math.isfinite(self.c2)):
            raise ValueError("cost weights must be finite")
        if self.c1 == 0.0 and self.c2 == 0.0:
            raise ValueError("cost weights c1 and c2 must not both be zero")

    @classmethod
    def parse(cls, text: str) -> "CostWeights":
        """Parse 'c1,c2'"""
        parts = [p.strip() for p in str(text).split(',') if p.strip()]
        if len(parts) != 2:
            raise ValueError(f"expected 'c1,c2', got '{text}'")
        return cls(float(parts[0]), float(parts[1]))

    def to_dict(self) -> Dict[str, Any]:
        return {'c1': self.c1, 'c2': self.c2}
