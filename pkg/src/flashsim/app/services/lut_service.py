"""
Voltage look-up table: per (PE, T) grid point the optimized write voltages,
entropy level, six read voltages, cost weights and code distance.
"""
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config.loader import parse_sections
from ..exceptions import ConfigError, FlashSimError, MissingArtifact
from ..models.campaign import LutRecord
from ..models.channel import ChannelParams, WriteVoltages
from ..models.quantization import CostWeights, ReadVoltages, WriteSearchConfig
from ..utils.helpers import format_sig, round_sig
from . import channel_service, read_service, write_service

logger = logging.getLogger(__name__)

LUT_DIGITS = 9


def _fmt(value: float) -> str:
    return format_sig(value, LUT_DIGITS)


def _rounded(value: float) -> float:
    return value if not math.isfinite(value) else round_sig(value, LUT_DIGITS)


def design_point(params: ChannelParams, d_min: int, weights: CostWeights,
                 search: WriteSearchConfig = None) -> LutRecord:
    """Optimize write then read voltages at the operating point in params"""
    write = write_service.optimize_write(params, d_min, search)
    model = channel_service.build_state_model(params, write.write)
    theta, reads = read_service.optimize_theta(model, d_min, weights)
    return LutRecord(
        pe=params.pe, t_ret=params.t_ret,
        v1=_rounded(write.write.v1), v2=_rounded(write.write.v2),
        theta=_rounded(theta), r=tuple(_rounded(v) for v in reads.r),
        c1=_rounded(weights.c1), c2=_rounded(weights.c2), d_min=int(d_min),
    )


def check_trend(records: Sequence[LutRecord]) -> List[Tuple[float, float, float]]:
    """
    Grid points where stored V1 increases with PE at a fixed retention time.

    Returns (t_ret, pe, v1) for each violation and logs a warning for it.
    """
    violations = []
    by_time: Dict[float, List[LutRecord]] = {}
    for record in records:
        if record.valid:
            by_time.setdefault(record.t_ret, []).append(record)
    for t_ret, group in sorted(by_time.items()):
        group.sort(key=lambda r: r.pe)
        for prev, cur in zip(group, group[1:]):
            if cur.v1 > prev.v1:
                violations.append((t_ret, cur.pe, cur.v1))
                logger.warning(f"LUT trend: V1 rises from {prev.v1:.6f} (PE={prev.pe:g}) "
                               f"to {cur.v1:.6f} (PE={cur.pe:g}) at T={t_ret:g}")
    return violations


def build_lut(params: ChannelParams, pe_grid: Iterable[float], t_grid: Iterable[float],
              d_min: int, weights: CostWeights, search: WriteSearchConfig = None) -> List[LutRecord]:
    """One record per grid point; failed points are kept and marked invalid"""
    records = []
    for pe in pe_grid:
        for t_ret in t_grid:
            point = params.at(pe, t_ret)
            try:
                record = design_point(point, d_min, weights, search)
            except FlashSimError as e:
                logger.error(f"LUT point PE={pe:g} T={t_ret:g} invalid: {e}")
                record = LutRecord(pe=point.pe, t_ret=point.t_ret, d_min=int(d_min),
                                   valid=False, error=str(e))
            records.append(record)
            logger.info(f"LUT point PE={pe:g} T={t_ret:g} done ({len(records)} records)")
    check_trend(records)
    return records


def dumps_lut(records: Sequence[LutRecord]) -> str:
    """Render records as [point pe=.. t=..] blocks"""
    blocks = []
    for rec in records:
        error = " ".join(rec.error.replace('#', ' ').split())
        lines = [
            f"[point pe={_fmt(rec.pe)} t={_fmt(rec.t_ret)}]",
            f"v1 = {_fmt(rec.v1)}",
            f"v2 = {_fmt(rec.v2)}",
            f"theta = {_fmt(rec.theta)}",
            f"r = {','.join(_fmt(v) for v in rec.r)}",
            f"c1 = {_fmt(rec.c1)}",
            f"c2 = {_fmt(rec.c2)}",
            f"d_min = {rec.d_min}",
            f"valid = {'true' if rec.valid else 'false'}",
            f"error = {error}",
        ]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def save_lut(records: Sequence[LutRecord], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_lut(records), encoding="utf-8")
    logger.info(f"Saved {len(records)} LUT records to {path}")
    return path


def loads_lut(text: str) -> List[LutRecord]:
    records = []
    for section in parse_sections(text):
        if section.name != "point":
            raise ConfigError(f"unexpected LUT section '{section.name}'", line=section.line)
        values = {entry.key: entry.value for entry in section.entries}
        try:
            r = tuple(float(v) for v in values.get('r', '').split(',') if v.strip())
            records.append(LutRecord(
                pe=float(section.attributes['pe']),
                t_ret=float(section.attributes['t']),
                v1=float(values['v1']),
                v2=float(values['v2']),
                theta=float(values['theta']),
                r=r,
                c1=float(values['c1']),
                c2=float(values['c2']),
                d_min=int(values['d_min']),
                valid=values.get('valid', 'true').lower() == 'true',
                error=values.get('error', ''),
            ))
        except (KeyError, ValueError) as e:
            raise ConfigError(f"malformed LUT point: {e}", line=section.line) from e
    return records


def load_lut(path: Union[str, Path]) -> List[LutRecord]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"LUT file not found: {path} (run 'build-lut' first)")
    return loads_lut(path.read_text(encoding="utf-8"))


class VoltageLut:
    """Nearest-grid-point lookup over valid records"""

    def __init__(self, records: Sequence[LutRecord]):
        self.records = [r for r in records if r.valid]
        if not self.records:
            raise MissingArtifact("LUT has no valid grid points")
        self._points = np.array([[r.pe, r.t_ret] for r in self.records], dtype=float)
        span = self._points.max(axis=0) - self._points.min(axis=0)
        self._scale = np.where(span > 0, span, 1.0)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "VoltageLut":
        return cls(load_lut(path))

    def lookup(self, pe: float, t_ret: float) -> LutRecord:
        """Record whose (PE, T) is nearest on axes normalised by the grid span"""
        delta = (self._points - np.array([pe, t_ret], dtype=float)) / self._scale
        return self.records[int(np.argmin(np.einsum('ij,ij->i', delta, delta)))]

    def voltages(self, pe: float, t_ret: float) -> Tuple[WriteVoltages, ReadVoltages, Optional[CostWeights]]:
        """Write and read voltages stored for the nearest grid point"""
        rec = self.lookup(pe, t_ret)
        write = WriteVoltages(rec.v1, rec.v2, scheme="lut")
        reads = ReadVoltages(rec.r, theta=rec.theta, scheme="lut")
        weights = CostWeights(rec.c1, rec.c2) if math.isfinite(rec.c1) and math.isfinite(rec.c2) else None
        return write, reads, weights
