"""
Data models for the MLC threshold-voltage channel
"""
import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Any, Dict, Tuple

import numpy as np

from ..config import current_config


class CellState(Enum):
    """MLC voltage states in ascending voltage order (Gray map, left bit MSB)"""
    S11 = "11"
    S10 = "10"
    S00 = "00"
    S01 = "01"

    @property
    def index(self) -> int:
        return _STATE_ORDER.index(self)

    @property
    def msb(self) -> int:
        return int(self.value[0])

    @property
    def lsb(self) -> int:
        return int(self.value[1])

    @classmethod
    def coerce(cls, state) -> "CellState":
        """Accept a CellState, its label ('10') or its index (1)"""
        if isinstance(state, cls):
            return state
        if isinstance(state, (int, np.integer)):
            return _STATE_ORDER[int(state)]
        return cls(str(state))


_STATE_ORDER = (CellState.S11, CellState.S10, CellState.S00, CellState.S01)

STATES = _STATE_ORDER
MSB_BITS = np.array([s.msb for s in _STATE_ORDER], dtype=np.uint8)
LSB_BITS = np.array([s.lsb for s in _STATE_ORDER], dtype=np.uint8)
# state index for the bit pair (msb << 1) | lsb
STATE_OF_BITS = np.array([2, 3, 1, 0], dtype=np.intp)


@dataclass(frozen=True)
class ChannelParams:
    """Physical channel constants plus the operating point (PE cycles, retention hours)"""
    v_min: float = current_config.V_MIN
    v_max: float = current_config.V_MAX
    v_pp: float = current_config.V_PP
    sigma_e: float = current_config.SIGMA_E
    sigma_p: float = current_config.SIGMA_P
    rtn_coeff: float = current_config.RTN_COEFF
    rtn_exp: float = current_config.RTN_EXP
    a_r: float = current_config.A_R
    b_r: float = current_config.B_R
    alpha1: float = current_config.ALPHA1
    alpha0: float = current_config.ALPHA0
    x0: float = current_config.X0
    pe: float = 0.0
    t_ret: float = 0.0

    def __post_init__(self):
        """Validate physical invariants"""
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ValueError(f"channel.{f.name} must be finite, got {value}")
        if not self.v_min < self.v_max:
            raise ValueError(f"channel.v_min ({self.v_min}) must be below channel.v_max ({self.v_max})")
        for name in ("v_pp", "sigma_e", "sigma_p"):
            if getattr(self, name) <= 0:
                raise ValueError(f"channel.{name} must be positive")
        if self.pe < 0:
            raise ValueError("channel.pe must be >= 0")
        if self.t_ret < 0:
            raise ValueError("channel.t_ret must be >= 0")

    @property
    def sigma_t(self) -> float:
        """Random telegraph noise standard deviation at the current PE count"""
        return self.rtn_coeff * self.pe ** self.rtn_exp

    def at(self, pe: float = None, t_ret: float = None) -> "ChannelParams":
        """Same physics at another operating point"""
        return replace(
            self,
            pe=self.pe if pe is None else float(pe),
            t_ret=self.t_ret if t_ret is None else float(t_ret),
        )

    def to_kv(self) -> str:
        """Serialize as `channel.key = value` lines; repr keeps exact decimal round-trip"""
        return "\n".join(f"channel.{f.name} = {getattr(self, f.name)!r}" for f in fields(self)) + "\n"

    @classmethod
    def from_kv(cls, text: str) -> "ChannelParams":
        """Parse the output of to_kv (dotted or [channel]-sectioned lines)"""
        known = {f.name for f in fields(cls)}
        values = {}
        section = ""
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            if line.startswith('['):
                section = line.strip('[]').strip()
                continue
            key, sep, value = line.partition('=')
            if not sep:
                raise ValueError(f"line {lineno}: expected 'key = value'")
            key = key.strip()
            if section:
                key = f"{section}.{key}"
            prefix, _, name = key.partition('.')
            if prefix != "channel" or name not in known:
                raise ValueError(f"line {lineno}: unknown key '{key}'")
            values[name] = float(value.strip())
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary"""
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data['sigma_t'] = self.sigma_t
        return data


@dataclass(frozen=True)
class WriteVoltages:
    """Write voltages V1, V2 of the two middle programmed states"""
    v1: float
    v2: float
    scheme: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.v1) and math.isfinite(self.v2)):
            raise ValueError("write voltages must be finite")
        if not self.v1 < self.v2:
            raise ValueError(f"write voltages must satisfy v1 < v2, got ({self.v1}, {self.v2})")

    def check_within(self, params: ChannelParams):
        """Raise ValueError unless v_min < v1 < v2 < v_max"""
        if not params.v_min < self.v1 < self.v2 < params.v_max:
            raise ValueError(
                f"write voltages ({self.v1:.6f}, {self.v2:.6f}) outside "
                f"({params.v_min}, {params.v_max})"
            )

    def to_dict(self) -> Dict[str, Any]:
        return {'v1': self.v1, 'v2': self.v2, 'scheme': self.scheme}


@dataclass(frozen=True)
class StateModel:
    """Per-state Gaussian approximation of the threshold-voltage distribution"""
    mu: Tuple[float, float, float, float]
    sigma: Tuple[float, float, float, float]
    write: WriteVoltages = None
    pe: float = 0.0
    t_ret: float = 0.0

    def __post_init__(self):
        if len(self.mu) != 4 or len(self.sigma) != 4:
            raise ValueError("a state model needs four means and four sigmas")
        if not all(math.isfinite(m) for m in self.mu):
            raise ValueError(f"non-finite state mean in {self.mu}")
        if not all(math.isfinite(s) and s > 0 for s in self.sigma):
            raise ValueError(f"state sigmas must be finite and positive, got {self.sigma}")

    @property
    def mu_array(self) -> np.ndarray:
        return np.asarray(self.mu, dtype=float)

    @property
    def sigma_array(self) -> np.ndarray:
        return np.asarray(self.sigma, dtype=float)

    def is_ordered(self) -> bool:
        """Means strictly increasing in state order 11 < 10 < 00 < 01"""
        return all(a < b for a, b in zip(self.mu, self.mu[1:]))

    def span(self, n_sigma: float = 3.0) -> Tuple[float, float]:
        """Voltage window from the lowest state's lower tail to the highest state's upper tail"""
        return (self.mu[0] - n_sigma * self.sigma[0], self.mu[3] + n_sigma * self.sigma[3])

    def to_dict(self) -> Dict[str, Any]:
        data = {}
        for state, m, s in zip(STATES, self.mu, self.sigma):
            data[f"mu_s{state.value}"] = m
            data[f"sigma_s{state.value}"] = s
        return data


@dataclass(frozen=True)
class HardThresholds:
    """Intersections of adjacent state densities (MAP boundaries for equal priors)"""
    t1: float
    t2: float
    t3: float

    def __post_init__(self):
        if not self.t1 < self.t2 < self.t3:
            raise ValueError(f"hard thresholds must be ordered, got ({self.t1}, {self.t2}, {self.t3})")

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.t1, self.t2, self.t3)

    def to_dict(self) -> Dict[str, Any]:
        return {'t1': self.t1, 't2': self.t2, 't3': self.t3}
