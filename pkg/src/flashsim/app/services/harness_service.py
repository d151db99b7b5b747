"""
Monte-Carlo campaigns: encode two pages per frame, program MLC cells, sample
the channel, quantize with six reads, decode both pages and count errors.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from ..config import current_config
from ..exceptions import FlashSimError, RankDeficient
from ..models.campaign import BerReport, BerRow, CampaignConfig, ReadScheme, StopReason
from ..models.channel import STATE_OF_BITS, ChannelParams, StateModel, WriteVoltages
from ..models.code import LdpcCode
from ..models.quantization import CostWeights, LlrTable, ReadVoltages, WriteSearchConfig
from ..utils.helpers import format_duration, frame_rng
from . import channel_service, read_service, write_service
from .ldpc_service import bp_decode_batch, encode
from .lut_service import VoltageLut

logger = logging.getLogger(__name__)


@dataclass
class FrameCounts:
    """Additive error counters over a set of frames"""
    frames: int = 0
    errors_msb: int = 0
    errors_lsb: int = 0
    frame_errors: int = 0
    iterations: int = 0

    def __add__(self, other: "FrameCounts") -> "FrameCounts":
        return FrameCounts(
            self.frames + other.frames,
            self.errors_msb + other.errors_msb,
            self.errors_lsb + other.errors_lsb,
            self.frame_errors + other.frame_errors,
            self.iterations + other.iterations,
        )

    @property
    def events(self) -> int:
        return self.errors_msb + self.errors_lsb


@dataclass
class PointDesign:
    """Everything the frame loop needs at one operating point"""
    params: ChannelParams
    write: WriteVoltages
    model: StateModel
    reads: ReadVoltages
    table: LlrTable


@dataclass
class CalibrationResult:
    """Weights fitted from a theta sweep, with the samples behind them"""
    weights: CostWeights
    pe: float
    t_ret: float
    d_min: int
    frames: int
    thetas: List[float] = field(default_factory=list)
    ber: List[float] = field(default_factory=list)
    cost_pe: List[float] = field(default_factory=list)
    cost_llr: List[float] = field(default_factory=list)

    def to_dict(self):
        return {
            'pe': self.pe, 't_ret': self.t_ret, 'd_min': self.d_min, 'frames': self.frames,
            'thetas': self.thetas, 'ber': self.ber, 'cost_pe': self.cost_pe, 'cost_llr': self.cost_llr,
        }


def simulate_frames(code: LdpcCode, design: PointDesign, master_seed: int, grid_index: int,
                    frame_indices: Sequence[int],
                    max_iter: int = current_config.BP_MAX_ITER) -> FrameCounts:
    """
    Run the full write/read/decode pipeline on a batch of frames.

    Frame f draws its messages and cell noise from its own stream, so the
    counts depend only on which frames are in the batch.
    """
    count = len(frame_indices)
    if count == 0:
        return FrameCounts()
    k, n = code.k, code.n
    msgs = np.empty((2, count, k), dtype=np.uint8)
    noise = np.empty((count, n))
    for row, f in enumerate(frame_indices):
        rng = frame_rng(master_seed, grid_index, int(f))
        msgs[:, row] = rng.integers(0, 2, size=(2, k), dtype=np.uint8)
        noise[row] = rng.standard_normal(n)

    msb_words = encode(code, msgs[0])
    lsb_words = encode(code, msgs[1])
    states = STATE_OF_BITS[(msb_words.astype(np.intp) << 1) | lsb_words]
    voltages = design.model.mu_array[states] + design.model.sigma_array[states] * noise
    regions = design.reads.region_of(voltages)

    counts = FrameCounts(frames=count)
    failed = np.zeros(count, dtype=bool)
    info = code.info_positions
    for page, msg, llr_of_region in ((0, msgs[0], design.table.l_msb), (1, msgs[1], design.table.l_lsb)):
        result = bp_decode_batch(code, llr_of_region[regions], max_iter=max_iter)
        wrong = (result.bits[:, info] != msg).sum(axis=1)
        failed |= wrong > 0
        counts.iterations += int(result.iterations.sum())
        if page == 0:
            counts.errors_msb = int(wrong.sum())
        else:
            counts.errors_lsb = int(wrong.sum())
    counts.frame_errors = int(failed.sum())
    return counts


class HarnessService:
    """Runs BER campaigns over (PE, T) grids"""

    def __init__(self, search: WriteSearchConfig = None):
        """Initialize harness service"""
        self.search = search or WriteSearchConfig()
        logger.info("Harness service initialized")

    def design_point(self, cfg: CampaignConfig, pe: float, t_ret: float,
                     lut: Optional[VoltageLut] = None) -> PointDesign:
        """Write and read voltages for one grid point, from the LUT or by optimization"""
        params = cfg.channel.at(pe, t_ret)
        d_min = cfg.code.d_min_est
        if lut is not None:
            write, reads, _ = lut.voltages(pe, t_ret)
            model = channel_service.build_state_model(params, write)
            return PointDesign(params, write, model, reads, read_service.llr_table(model, reads))

        write = write_service.design_write(params, cfg.write_scheme, d_min, self.search).write
        model = channel_service.build_state_model(params, write)
        reads, table = read_service.design_reads(model, cfg.read_scheme, d_min, cfg.weights, cfg.theta)
        return PointDesign(params, write, model, reads, table)

    def run_design(self, cfg: CampaignConfig, design: PointDesign, grid_index: int = 0,
                   executor: Optional[ThreadPoolExecutor] = None) -> BerRow:
        """
        Simulate batches until the stop rule fires.

        Batches are consumed strictly in index order and the run stops after
        the first batch that lifts the error count to min_events, so the result
        does not depend on the thread count.
        """
        row = BerRow(pe=design.params.pe, t_ret=design.params.t_ret,
                     write_scheme=cfg.write_scheme.value, read_scheme=cfg.read_scheme.value,
                     bits_per_page=cfg.code.k)
        started = time.perf_counter()
        batches = [range(s, min(s + cfg.batch_frames, cfg.frames))
                   for s in range(0, cfg.frames, cfg.batch_frames)]

        def work(frames: range) -> FrameCounts:
            return simulate_frames(cfg.code, design, cfg.master_seed, grid_index, frames, cfg.max_iter)

        total = FrameCounts()
        stop = StopReason.FRAME_CAP
        wave = max(1, cfg.threads)
        for start in range(0, len(batches), wave):
            chunk = batches[start:start + wave]
            results = list(executor.map(work, chunk)) if executor else [work(b) for b in chunk]
            for counts in results:
                total = total + counts
                if total.events >= cfg.min_events:
                    stop = StopReason.MIN_EVENTS
                    break
            if stop is StopReason.MIN_EVENTS:
                break

        row.frames = total.frames
        row.errors_msb = total.errors_msb
        row.errors_lsb = total.errors_lsb
        row.frame_errors = total.frame_errors
        row.iterations = total.iterations
        row.stop_rule = stop
        row.wall_time = time.perf_counter() - started
        if total.events == 0:
            logger.info(f"No residual errors in {total.frames} frames at PE={row.pe:g} T={row.t_ret:g}")
        return row

    def _execute(self, cfg: CampaignConfig, design: PointDesign, grid_index: int) -> BerRow:
        if cfg.threads <= 1:
            return self.run_design(cfg, design, grid_index)
        with ThreadPoolExecutor(max_workers=cfg.threads) as executor:
            return self.run_design(cfg, design, grid_index, executor)

    def run_point(self, cfg: CampaignConfig, pe: float, t_ret: float, grid_index: int = 0,
                  lut: Optional[VoltageLut] = None) -> BerRow:
        """One grid point; grid_index selects the random streams"""
        design = self.design_point(cfg, pe, t_ret, lut)
        row = self._execute(cfg, design, grid_index)
        logger.info(f"PE={pe:g} T={t_ret:g} [{cfg.write_scheme.value}/{cfg.read_scheme.value}]: "
                    f"BER={row.ber_total:.3e} FER={row.fer:.3e} frames={row.frames} "
                    f"stop={row.stop_rule.value} ({format_duration(row.wall_time)})")
        return row

    def run_sweep(self, cfg: CampaignConfig, csv_path: Optional[Union[str, Path]] = None,
                  on_row: Optional[Callable[[BerRow], None]] = None) -> BerReport:
        """
        Every grid point in PE-major order.

        The CSV is rewritten after each point, so an interrupted sweep leaves
        the finished points on disk. Points whose design fails are recorded
        with stop_rule 'failed'.
        """
        report = BerReport()
        lut = VoltageLut.from_file(cfg.lut_path or current_config.LUT_FILE) if cfg.use_lut else None
        logger.info(f"Sweep over {len(cfg.grid)} grid points with up to {cfg.frames} frames each")

        try:
            for grid_index, pe, t_ret in cfg.grid:
                try:
                    row = self.run_point(cfg, pe, t_ret, grid_index, lut)
                except FlashSimError as e:
                    logger.error(f"Grid point PE={pe:g} T={t_ret:g} failed: {e}")
                    row = BerRow(pe=pe, t_ret=t_ret, write_scheme=cfg.write_scheme.value,
                                 read_scheme=cfg.read_scheme.value, bits_per_page=cfg.code.k,
                                 stop_rule=StopReason.FAILED)
                report.rows.append(row)
                if on_row:
                    on_row(row)
                if csv_path:
                    report.write_csv(csv_path)
        except KeyboardInterrupt:
            logger.warning(f"Sweep interrupted after {len(report)} grid points")
            if csv_path:
                report.write_csv(csv_path)
            raise
        return report

    def calibrate(self, cfg: CampaignConfig, pe: float, t_ret: float,
                  thetas: Sequence[float] = current_config.CALIBRATION_THETAS,
                  frames: Optional[int] = None) -> CalibrationResult:
        """
        Fit the read-cost weights at one operating point.

        Write voltages come from the proposed write design; for each theta the
        entropy reads are simulated and their cost components recorded.
        """
        frames = frames or current_config.CALIBRATION_FRAMES
        d_min = cfg.code.d_min_est
        params = cfg.channel.at(pe, t_ret)
        write = write_service.optimize_write(params, d_min, self.search).write
        model = channel_service.build_state_model(params, write)
        th = channel_service.hard_thresholds(model)
        run_cfg = CampaignConfig(
            channel=cfg.channel, code=cfg.code, pe_grid=[pe], t_grid=[t_ret],
            write_scheme=cfg.write_scheme, read_scheme=ReadScheme.ENTROPY_FIXED, frames=frames,
            min_events=2 * frames * cfg.code.k + 1, batch_frames=cfg.batch_frames,
            master_seed=cfg.master_seed, threads=cfg.threads, max_iter=cfg.max_iter,
        )

        feasible = []
        for theta in thetas:
            try:
                feasible.append((float(theta), read_service.solve_read_voltages(model, theta, th)))
            except FlashSimError as e:
                logger.warning(f"Calibration skips theta={theta:.3f}: {e}")
        if len(feasible) < 3:
            raise RankDeficient(
                f"only {len(feasible)} of {len(thetas)} calibration thetas are feasible at "
                f"PE={params.pe:g}, T={params.t_ret:g}; the fit needs at least 3"
            )

        used, ber, cost_pe, cost_llr = [], [], [], []
        for index, (theta, reads) in enumerate(feasible):
            table = read_service.llr_table(model, reads)
            c_pe, c_llr = read_service.cost_components(read_service.alphas(table), d_min)
            row = self._execute(run_cfg, PointDesign(params, write, model, reads, table), index)
            used.append(theta)
            ber.append(row.ber_total)
            cost_pe.append(c_pe)
            cost_llr.append(c_llr)
            logger.info(f"Calibration theta={theta:.3f}: BER={row.ber_total:.3e} "
                        f"C_pe={c_pe:.3e} C_llr={c_llr:.3e}")

        weights = read_service.calibrate_weights(used, ber, cost_pe, cost_llr)
        return CalibrationResult(weights=weights, pe=params.pe, t_ret=params.t_ret, d_min=d_min,
                                 frames=frames, thetas=used, ber=ber, cost_pe=cost_pe, cost_llr=cost_llr)


harness_service = HarnessService()
