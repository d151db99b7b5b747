"""
Helper utility functions for FlashSim
"""
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np
import pandas as pd


def format_duration(seconds: float) -> str:
    """Format duration in MM:SS format"""
    if not seconds or seconds < 0:
        return "00:00"

    minutes = int(seconds // 60)
    secs = int(seconds % 60)
    return f"{minutes:02d}:{secs:02d}"


def format_sig(value: float, digits: int = 9) -> str:
    """Format a float with a fixed number of significant digits"""
    return f"{value:.{digits}g}"


def round_sig(value: float, digits: int = 9) -> float:
    """Round a float to a fixed number of significant digits"""
    return float(format_sig(value, digits))


def parse_float_list(text: str) -> List[float]:
    """Parse '1, 2.5, 3' into floats; empty text gives an empty list"""
    items = [item.strip() for item in str(text).split(',')]
    return [float(item) for item in items if item]


def parse_profile(text: str) -> Dict[int, float]:
    """Parse a degree profile such as '2:0.06,3:0.94'"""
    profile = {}
    for item in str(text).split(','):
        item = item.strip()
        if not item:
            continue
        degree, _, fraction = item.partition(':')
        profile[int(degree)] = float(fraction)
    return profile


def format_profile(profile: Dict[int, float]) -> str:
    """Inverse of parse_profile"""
    return ",".join(f"{degree}:{fraction!r}" for degree, fraction in sorted(profile.items()))


def frame_rng(master_seed: int, grid_index: int, frame_index: int) -> np.random.Generator:
    """
    Independent RNG stream for one frame of one grid point.

    The stream depends only on (master_seed, grid_index, frame_index), so
    results do not depend on how frames are scheduled across threads.
    """
    seq = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, grid_index, frame_index])
    return np.random.default_rng(seq)


def write_csv(rows: Sequence[Dict[str, Any]], path: Path, columns: Iterable[str],
              float_format: str = "%.9g") -> Path:
    """Write rows as UTF-8 CSV with a header row and LF line endings"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=list(columns))
    frame.to_csv(path, index=False, float_format=float_format,
                 encoding="utf-8", lineterminator="\n")
    return path


def create_output_filename(prefix: str, pe: float, t_ret: float, suffix: str = "csv") -> str:
    """Create standardized output filename for a grid point"""
    return f"{prefix}_pe{int(round(pe))}_t{int(round(t_ret))}.{suffix}"
