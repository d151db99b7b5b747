"""
Data models for Monte-Carlo campaigns, run configuration and the voltage look-up table
"""
import math
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..config import current_config
from ..config.settings import RESULTS_DIR
from ..utils.helpers import parse_float_list, parse_profile, write_csv
from .channel import ChannelParams
from .code import LdpcCode
from .quantization import CostWeights


class WriteScheme(Enum):
    """Write-voltage design schemes"""
    PROPOSED = "proposed"
    FIXED = "fixed"
    MIN_RBER = "min-rber"
    MRD = "mrd"
    MCC = "mcc"


class ReadScheme(Enum):
    """Read-voltage placement schemes"""
    PROPOSED = "proposed"
    UNIFORM = "uniform"
    MMI = "mmi"
    ENTROPY_FIXED = "entropy-fixed"
    HARD = "hard"


class StopReason(Enum):
    """Which stop rule ended a grid point"""
    MIN_EVENTS = "min_events"
    FRAME_CAP = "frame_cap"
    FAILED = "failed"


def _parse_bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def _parse_optional_int(text: str) -> Optional[int]:
    value = str(text).strip().lower()
    if value in ("", "none", "auto"):
        return None
    return int(value)


def _parse_optional_weights(text: str) -> Optional[CostWeights]:
    value = str(text).strip().lower()
    if value in ("", "none"):
        return None
    return CostWeights.parse(text)


def _parse_optional_path(text: str) -> Optional[str]:
    value = str(text).strip()
    if value.lower() in ("", "none"):
        return None
    return value


@dataclass
class CodeSettings:
    """[code] block"""
    n: int = field(default=current_config.CODE_N, metadata={'parse': int})
    k: int = field(default=current_config.CODE_K, metadata={'parse': int})
    profile: Dict[int, float] = field(
        default_factory=lambda: dict(current_config.CODE_PROFILE), metadata={'parse': parse_profile}
    )
    seed: int = field(default=current_config.CODE_SEED, metadata={'parse': int})
    d_min: Optional[int] = field(default=None, metadata={'parse': _parse_optional_int})
    dmin_effort: int = field(default=current_config.DMIN_EFFORT, metadata={'parse': int})
    strict_girth: bool = field(default=current_config.CODE_STRICT_GIRTH, metadata={'parse': _parse_bool})
    max_iter: int = field(default=current_config.BP_MAX_ITER, metadata={'parse': int})

    def __post_init__(self):
        if not self.n > self.k > 0:
            raise ValueError(f"code needs n > k > 0, got n={self.n}, k={self.k}")
        if not self.profile or any(d < 1 or f < 0 for d, f in self.profile.items()):
            raise ValueError(f"invalid degree profile {self.profile}")
        if self.d_min is not None and self.d_min < 1:
            raise ValueError("code.d_min must be a positive integer")
        if self.dmin_effort < 1:
            raise ValueError("code.dmin_effort must be >= 1")
        if self.max_iter < 1:
            raise ValueError("code.max_iter must be >= 1")


@dataclass
class SchemeSettings:
    """[schemes] block"""
    write: WriteScheme = field(default=WriteScheme.PROPOSED, metadata={'parse': WriteScheme})
    read: ReadScheme = field(default=ReadScheme.PROPOSED, metadata={'parse': ReadScheme})
    theta: float = field(default=current_config.THETA_FIXED, metadata={'parse': float})
    weights: Optional[CostWeights] = field(default=None, metadata={'parse': _parse_optional_weights})

    def __post_init__(self):
        if isinstance(self.write, str):
            self.write = WriteScheme(self.write)
        if isinstance(self.read, str):
            self.read = ReadScheme(self.read)
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"schemes.theta must lie in (0, 1), got {self.theta}")


@dataclass
class SweepSettings:
    """[sweep] block"""
    pe: List[float] = field(default_factory=lambda: [6000.0], metadata={'parse': parse_float_list})
    t_ret: List[float] = field(default_factory=lambda: [15000.0], metadata={'parse': parse_float_list})
    # unset: sweeps stop at FRAME_CAP and calibration uses CALIBRATION_FRAMES
    frames: Optional[int] = field(default=None, metadata={'parse': _parse_optional_int})
    min_events: int = field(default=current_config.MIN_ERROR_EVENTS, metadata={'parse': int})
    batch: int = field(default=current_config.BATCH_FRAMES, metadata={'parse': int})
    use_lut: bool = field(default=False, metadata={'parse': _parse_bool})

    def __post_init__(self):
        if self.frames is not None and self.frames < 1:
            raise ValueError(f"sweep.frames must be >= 1, got {self.frames}")
        if self.min_events < 1:
            raise ValueError("sweep.min_events must be >= 1")
        if self.batch < 1:
            raise ValueError("sweep.batch must be >= 1")
        if not self.pe or not self.t_ret:
            raise ValueError("sweep needs at least one PE value and one retention time")
        if any(v < 0 or not math.isfinite(v) for v in list(self.pe) + list(self.t_ret)):
            raise ValueError("sweep grid values must be finite and >= 0")

    @property
    def frame_cap(self) -> int:
        return self.frames if self.frames is not None else current_config.FRAME_CAP


@dataclass
class OutputSettings:
    """[output] block"""
    dir: str = field(default=str(RESULTS_DIR), metadata={'parse': str})
    csv: Optional[str] = field(default=None, metadata={'parse': _parse_optional_path})
    lut: str = field(default=current_config.LUT_FILE, metadata={'parse': str})
    weights: str = field(default=current_config.WEIGHTS_FILE, metadata={'parse': str})

    def path_for(self, name: str) -> Path:
        """Resolve a file name against the output directory"""
        path = Path(name)
        return path if path.is_absolute() else Path(self.dir) / path


@dataclass
class RunSettings:
    """[run] block"""
    master_seed: int = field(default=current_config.MASTER_SEED, metadata={'parse': int})
    threads: int = field(default=current_config.MAX_WORKERS, metadata={'parse': int})
    log_level: str = field(default=current_config.LOG_LEVEL, metadata={'parse': str})

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError("run.threads must be >= 1")
        if self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown run.log_level '{self.log_level}'")


@dataclass
class RunConfig:
    """Everything one CLI invocation needs"""
    channel: ChannelParams = field(default_factory=ChannelParams)
    code: CodeSettings = field(default_factory=CodeSettings)
    schemes: SchemeSettings = field(default_factory=SchemeSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    run: RunSettings = field(default_factory=RunSettings)

    @staticmethod
    def block_types() -> Dict[str, type]:
        return {f.name: f.type for f in fields(RunConfig)}

    def to_dict(self) -> Dict[str, Any]:
        return {
            'channel': self.channel.to_dict(),
            'code': {f.name: getattr(self.code, f.name) for f in fields(self.code)},
            'schemes': {
                'write': self.schemes.write.value,
                'read': self.schemes.read.value,
                'theta': self.schemes.theta,
                'weights': self.schemes.weights.to_dict() if self.schemes.weights else None,
            },
            'sweep': {f.name: getattr(self.sweep, f.name) for f in fields(self.sweep)},
            'output': {f.name: getattr(self.output, f.name) for f in fields(self.output)},
            'run': {f.name: getattr(self.run, f.name) for f in fields(self.run)},
        }


@dataclass
class CampaignConfig:
    """A Monte-Carlo campaign over a (PE, T) grid"""
    channel: ChannelParams
    code: LdpcCode
    pe_grid: List[float] = field(default_factory=lambda: [6000.0])
    t_grid: List[float] = field(default_factory=lambda: [15000.0])
    write_scheme: WriteScheme = WriteScheme.PROPOSED
    read_scheme: ReadScheme = ReadScheme.PROPOSED
    frames: int = current_config.FRAME_CAP
    min_events: int = current_config.MIN_ERROR_EVENTS
    batch_frames: int = current_config.BATCH_FRAMES
    master_seed: int = current_config.MASTER_SEED
    threads: int = current_config.MAX_WORKERS
    max_iter: int = current_config.BP_MAX_ITER
    theta: float = current_config.THETA_FIXED
    weights: Optional[CostWeights] = None
    use_lut: bool = False
    lut_path: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.write_scheme, str):
            self.write_scheme = WriteScheme(self.write_scheme)
        if isinstance(self.read_scheme, str):
            self.read_scheme = ReadScheme(self.read_scheme)
        if self.frames < 1:
            raise ValueError(f"frames must be >= 1, got {self.frames}")
        if not self.pe_grid or not self.t_grid:
            raise ValueError("a campaign needs at least one grid point")
        if self.min_events < 1 or self.batch_frames < 1 or self.threads < 1:
            raise ValueError("min_events, batch_frames and threads must be >= 1")
        if self.code.d_min_est is None:
            raise ValueError("campaign code needs a d_min estimate")

    @property
    def grid(self) -> List[Tuple[int, float, float]]:
        """(grid index, PE, T) in PE-major order"""
        points = []
        for pe in self.pe_grid:
            for t_ret in self.t_grid:
                points.append((len(points), float(pe), float(t_ret)))
        return points


BER_COLUMNS = [
    'pe', 't_ret', 'write_scheme', 'read_scheme', 'ber_msb', 'ber_lsb', 'ber_total',
    'fer', 'frames', 'events', 'mean_iters', 'stop_rule', 'wall_time',
]


@dataclass
class BerRow:
    """Aggregated counters for one grid point"""
    pe: float
    t_ret: float
    write_scheme: str
    read_scheme: str
    frames: int = 0
    bits_per_page: int = 0
    errors_msb: int = 0
    errors_lsb: int = 0
    frame_errors: int = 0
    iterations: int = 0
    stop_rule: StopReason = StopReason.FRAME_CAP
    wall_time: float = 0.0

    @property
    def events(self) -> int:
        return self.errors_msb + self.errors_lsb

    @property
    def ber_msb(self) -> float:
        bits = self.frames * self.bits_per_page
        return self.errors_msb / bits if bits else float('nan')

    @property
    def ber_lsb(self) -> float:
        bits = self.frames * self.bits_per_page
        return self.errors_lsb / bits if bits else float('nan')

    @property
    def ber_total(self) -> float:
        """Both pages carry the same number of bits, so this is the plain average"""
        bits = 2 * self.frames * self.bits_per_page
        return self.events / bits if bits else float('nan')

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else float('nan')

    @property
    def mean_iters(self) -> float:
        """Mean BP iterations per decoded page"""
        return self.iterations / (2 * self.frames) if self.frames else float('nan')

    def to_row(self) -> Dict[str, Any]:
        return {
            'pe': self.pe,
            't_ret': self.t_ret,
            'write_scheme': self.write_scheme,
            'read_scheme': self.read_scheme,
            'ber_msb': self.ber_msb,
            'ber_lsb': self.ber_lsb,
            'ber_total': self.ber_total,
            'fer': self.fer,
            'frames': self.frames,
            'events': self.events,
            'mean_iters': self.mean_iters,
            'stop_rule': self.stop_rule.value,
            'wall_time': self.wall_time,
        }


@dataclass
class BerReport:
    """Rows of a campaign, one per grid point"""
    rows: List[BerRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def write_csv(self, path: Path, float_format: str = current_config.CSV_FLOAT_FORMAT) -> Path:
        return write_csv([row.to_row() for row in self.rows], path, BER_COLUMNS, float_format)


@dataclass
class LutRecord:
    """Optimized voltages for one (PE, T) grid point"""
    pe: float
    t_ret: float
    v1: float = float('nan')
    v2: float = float('nan')
    theta: float = float('nan')
    r: Tuple[float, ...] = ()
    c1: float = float('nan')
    c2: float = float('nan')
    d_min: int = 0
    valid: bool = True
    error: str = ""

    @property
    def key(self) -> Tuple[float, float]:
        return (self.pe, self.t_ret)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'pe': self.pe, 't_ret': self.t_ret, 'v1': self.v1, 'v2': self.v2,
            'theta': self.theta, 'c1': self.c1, 'c2': self.c2, 'd_min': self.d_min,
            'valid': self.valid, 'error': self.error,
        }
        data.update({f"r{i}": v for i, v in enumerate(self.r, start=1)})
        return data
