"""
Tests for Monte-Carlo campaigns and the voltage look-up table
"""
import math
import os
import tempfile
import unittest
import sys
from dataclasses import replace
from pathlib import Path

import pandas as pd

os.environ.setdefault('FLASHSIM_ENV', 'testing')
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.exceptions import MissingArtifact, RankDeficient
from app.models import (
    BER_COLUMNS, CampaignConfig, ChannelParams, CostWeights, LutRecord, ReadScheme, StopReason,
    WriteScheme, WriteSearchConfig
)
from app.services import HarnessService, VoltageLut
from app.services import channel_service as channel
from app.services import lut_service
from app.services import read_service as readopt
from app.services.ldpc_service import peg_construct
from app.services.write_service import baseline_fixed

PROFILE = {2: 0.06, 3: 0.94}


def small_code():
    return replace(peg_construct(256, 228, PROFILE, seed=1), d_min_est=4)


def noisy_channel() -> ChannelParams:
    # wide programmed states, so every frame carries raw errors
    return ChannelParams(sigma_p=0.25)


class TestFrameLoop(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.code = small_code()
        cls.harness = HarnessService()

    def campaign(self, **overrides) -> CampaignConfig:
        settings = dict(
            channel=noisy_channel(), code=self.code, pe_grid=[6000.0], t_grid=[0.0],
            write_scheme=WriteScheme.FIXED, read_scheme=ReadScheme.HARD,
            frames=40, min_events=10 ** 9, batch_frames=4, master_seed=7, threads=1, max_iter=10,
        )
        settings.update(overrides)
        return CampaignConfig(**settings)

    def test_noiseless_channel(self):
        cfg = self.campaign(channel=ChannelParams(sigma_e=1e-6, sigma_p=1e-6), pe_grid=[0.0],
                            read_scheme=ReadScheme.ENTROPY_FIXED, frames=20, max_iter=50)
        row = self.harness.run_point(cfg, 0.0, 0.0)
        self.assertEqual(row.frames, 20)
        self.assertEqual(row.events, 0)
        self.assertEqual(row.frame_errors, 0)
        self.assertEqual(row.ber_total, 0.0)
        self.assertEqual(row.stop_rule, StopReason.FRAME_CAP)

    def test_noisy_channel_counts(self):
        row = self.harness.run_point(self.campaign(), 6000.0, 0.0)
        self.assertEqual(row.frames, 40)
        self.assertEqual(row.bits_per_page, self.code.k)
        self.assertGreater(row.events, 0)
        self.assertLessEqual(row.frame_errors, row.frames)
        self.assertTrue(0.0 < row.ber_total < 0.5)
        self.assertGreater(row.mean_iters, 0.0)

    def test_thread_count_does_not_change_results(self):
        rows = []
        for threads in (1, 2, 3):
            cfg = self.campaign(threads=threads, min_events=400)
            rows.append(self.harness.run_point(cfg, 6000.0, 0.0))
        for row in rows[1:]:
            self.assertEqual(
                (row.frames, row.errors_msb, row.errors_lsb, row.frame_errors, row.iterations),
                (rows[0].frames, rows[0].errors_msb, rows[0].errors_lsb,
                 rows[0].frame_errors, rows[0].iterations),
            )

    def test_stop_rule(self):
        row = self.harness.run_point(self.campaign(min_events=1, frames=200), 6000.0, 0.0)
        self.assertEqual(row.stop_rule, StopReason.MIN_EVENTS)
        self.assertGreaterEqual(row.events, 1)
        self.assertEqual(row.frames % 4, 0)
        self.assertLess(row.frames, 200)

    def test_seed_changes_streams(self):
        a = self.harness.run_point(self.campaign(master_seed=1), 6000.0, 0.0)
        b = self.harness.run_point(self.campaign(master_seed=1), 6000.0, 0.0)
        c = self.harness.run_point(self.campaign(master_seed=2), 6000.0, 0.0)
        self.assertEqual((a.errors_msb, a.errors_lsb), (b.errors_msb, b.errors_lsb))
        self.assertNotEqual((a.errors_msb, a.errors_lsb, a.iterations),
                            (c.errors_msb, c.errors_lsb, c.iterations))


class TestSchemeOrdering(unittest.TestCase):
    """Schemes compared on identical cell noise: same seed, same grid index"""

    @classmethod
    def setUpClass(cls):
        cls.code = small_code()
        cls.harness = HarnessService()
        # raw page error rates of a few 1e-3, where hard decoding starts to fail
        cls.channel = ChannelParams(sigma_e=0.2, sigma_p=0.15)

    def run_scheme(self, read_scheme, pe=6000.0, t_ret=0.0):
        cfg = CampaignConfig(
            channel=self.channel, code=self.code, pe_grid=[pe], t_grid=[t_ret],
            write_scheme=WriteScheme.FIXED, read_scheme=read_scheme, frames=80,
            min_events=10 ** 9, batch_frames=8, master_seed=11, threads=1,
        )
        return self.harness.run_point(cfg, pe, t_ret, grid_index=0)

    def test_soft_reads_beat_hard_reads(self):
        hard = self.run_scheme(ReadScheme.HARD)
        self.assertGreater(hard.events, 0)
        for scheme in (ReadScheme.ENTROPY_FIXED, ReadScheme.MMI):
            with self.subTest(scheme=scheme.value):
                soft = self.run_scheme(scheme)
                self.assertLessEqual(soft.events, hard.events)
                self.assertLessEqual(soft.frame_errors, hard.frame_errors)

    def test_ber_grows_with_wear(self):
        rows = [self.run_scheme(ReadScheme.HARD, pe, 1e4) for pe in (2000.0, 6000.0, 10000.0)]
        for lighter, heavier in zip(rows, rows[1:]):
            ber = lighter.ber_total
            slack = 2.0 * math.sqrt(max(ber * (1.0 - ber), 1e-12) / (2 * lighter.frames * lighter.bits_per_page))
            self.assertGreaterEqual(heavier.ber_total, ber - slack)
        self.assertGreater(rows[-1].ber_total, rows[0].ber_total)


class TestSweep(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.addCleanup(self.temp_dir.cleanup)
        self.path = Path(self.temp_dir.name)
        self.code = small_code()
        self.harness = HarnessService()

    def campaign(self, **overrides) -> CampaignConfig:
        settings = dict(
            channel=noisy_channel(), code=self.code, pe_grid=[6000.0], t_grid=[0.0],
            write_scheme=WriteScheme.FIXED, read_scheme=ReadScheme.HARD,
            frames=12, batch_frames=4, master_seed=3, threads=1, max_iter=10,
        )
        settings.update(overrides)
        return CampaignConfig(**settings)

    def test_single_point_sweep_matches_run_point(self):
        cfg = self.campaign()
        report = self.harness.run_sweep(cfg)
        row = self.harness.run_point(cfg, 6000.0, 0.0, grid_index=0)
        self.assertEqual(len(report), 1)
        self.assertEqual(report.rows[0].to_row() | {'wall_time': 0.0}, row.to_row() | {'wall_time': 0.0})

    def test_csv_written_after_each_point(self):
        csv_path = self.path / "ber.csv"
        seen = []

        def on_row(row):
            seen.append(pd.read_csv(csv_path) if csv_path.exists() else None)

        report = self.harness.run_sweep(self.campaign(t_grid=[0.0, 5000.0]), csv_path, on_row)
        self.assertEqual(len(report), 2)
        # the callback runs before the CSV is rewritten
        self.assertIsNone(seen[0])
        self.assertEqual(len(seen[1]), 1)

        frame = pd.read_csv(csv_path)
        self.assertEqual(list(frame.columns), BER_COLUMNS)
        self.assertEqual(frame['t_ret'].tolist(), [0.0, 5000.0])
        self.assertEqual(frame['write_scheme'].tolist(), ["fixed", "fixed"])
        self.assertTrue(csv_path.read_bytes().endswith(b"\n"))
        self.assertNotIn(b"\r\n", csv_path.read_bytes())

    def test_failed_point_is_recorded(self):
        cfg = self.campaign(read_scheme=ReadScheme.PROPOSED, weights=None)
        report = self.harness.run_sweep(cfg)
        self.assertEqual(report.rows[0].stop_rule, StopReason.FAILED)
        self.assertEqual(report.rows[0].frames, 0)

    def test_grid_order(self):
        cfg = self.campaign(pe_grid=[2000.0, 6000.0], t_grid=[0.0, 10.0])
        self.assertEqual(cfg.grid, [(0, 2000.0, 0.0), (1, 2000.0, 10.0), (2, 6000.0, 0.0), (3, 6000.0, 10.0)])

    def test_invalid_campaign(self):
        with self.assertRaises(ValueError):
            self.campaign(frames=0)
        with self.assertRaises(ValueError):
            self.campaign(code=peg_construct(64, 32, PROFILE, seed=1))

    def test_calibration(self):
        cfg = self.campaign()
        result = self.harness.calibrate(cfg, 6000.0, 0.0, thetas=(0.6, 0.7, 0.8, 0.9), frames=8)
        self.assertEqual(result.thetas, [0.6, 0.7, 0.8, 0.9])
        self.assertEqual(len(result.ber), 4)
        self.assertTrue(math.isfinite(result.weights.c1))
        self.assertEqual(result.to_dict()['frames'], 8)

    def test_calibration_with_too_few_feasible_thetas(self):
        cfg = self.campaign()
        with self.assertLogs('app.services.harness_service', level='WARNING'), \
                self.assertRaises(RankDeficient) as ctx:
            self.harness.calibrate(cfg, 6000.0, 0.0, thetas=(0.8, 1.0, 1.5), frames=8)
        self.assertIn("only 1 of 3", str(ctx.exception))


class TestVoltageLut(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.addCleanup(self.temp_dir.cleanup)
        self.path = Path(self.temp_dir.name) / "voltages.lut"
        r = (1.5, 1.75, 2.25, 2.5, 3.0, 3.25)
        self.records = [
            LutRecord(pe=2000.0, t_ret=0.0, v1=2.25, v2=3.0, theta=0.35, r=r, c1=1.5, c2=-0.25, d_min=5),
            LutRecord(pe=6000.0, t_ret=0.0, v1=2.125, v2=3.0, theta=0.4, r=r, c1=1.5, c2=-0.25, d_min=5),
            LutRecord(pe=2000.0, t_ret=10000.0, v1=2.0, v2=2.875, theta=0.3, r=r, c1=1.5, c2=-0.25, d_min=5),
            LutRecord(pe=6000.0, t_ret=10000.0, d_min=5, valid=False,
                      error="no feasible theta # bounds\nexhausted"),
        ]

    def test_round_trip(self):
        loaded = lut_service.load_lut(lut_service.save_lut(self.records, self.path))
        self.assertEqual(loaded[:3], self.records[:3])
        bad = loaded[3]
        self.assertFalse(bad.valid)
        self.assertTrue(math.isnan(bad.v1))
        self.assertEqual(bad.r, ())
        self.assertEqual(bad.error, "no feasible theta bounds exhausted")

    def test_nine_significant_digits(self):
        record = LutRecord(pe=6000.0, t_ret=0.0, v1=2.123456789123, v2=3.0, theta=1.0 / 3.0,
                           r=(1.0, 1.1, 1.2, 1.3, 1.4, 1.5), c1=1.0, c2=1.0, d_min=4)
        text = lut_service.dumps_lut([record])
        self.assertIn("[point pe=6000 t=0]", text)
        self.assertIn("v1 = 2.12345679", text)
        self.assertIn("theta = 0.333333333", text)

    def test_exact_and_nearest_lookup(self):
        lut = VoltageLut(self.records)
        self.assertEqual(lut.lookup(6000.0, 0.0), self.records[1])
        self.assertEqual(lut.lookup(2500.0, 1000.0), self.records[0])
        # the invalid point is skipped in favour of its neighbours
        self.assertIn(lut.lookup(6000.0, 10000.0), self.records[1:3])

    def test_voltages(self):
        write, reads, weights = VoltageLut(self.records).voltages(2000.0, 10000.0)
        self.assertEqual((write.v1, write.v2), (2.0, 2.875))
        self.assertEqual(reads.theta, 0.3)
        self.assertEqual((weights.c1, weights.c2), (1.5, -0.25))

    def test_no_valid_points(self):
        with self.assertRaises(MissingArtifact):
            VoltageLut(self.records[3:])
        with self.assertRaises(MissingArtifact):
            VoltageLut.from_file(self.path)

    def test_trend_check(self):
        self.assertEqual(lut_service.check_trend(self.records), [])
        rising = replace(self.records[1], v1=2.5)
        with self.assertLogs('app.services.lut_service', level='WARNING'):
            violations = lut_service.check_trend([self.records[0], rising])
        self.assertEqual(violations, [(0.0, 6000.0, 2.5)])

    def test_harness_uses_lut_voltages(self):
        params = ChannelParams(pe=6000.0, t_ret=15000.0)
        write = baseline_fixed(params).write
        model = channel.build_state_model(params, write)
        reads = readopt.solve_read_voltages(model, 0.35)
        record = LutRecord(pe=6000.0, t_ret=15000.0, v1=write.v1, v2=write.v2, theta=0.35,
                           r=reads.r, c1=1.0, c2=1.0, d_min=4)
        cfg = CampaignConfig(channel=ChannelParams(), code=small_code(), pe_grid=[6000.0],
                             t_grid=[15000.0], frames=4, batch_frames=4, threads=1)
        design = HarnessService().design_point(cfg, 6000.0, 15000.0, VoltageLut([record]))
        self.assertEqual((design.write.v1, design.write.v2), (write.v1, write.v2))
        self.assertEqual(design.reads.r, reads.r)


class TestLutBuild(unittest.TestCase):

    def test_build_single_point(self):
        params = ChannelParams()
        records = lut_service.build_lut(params, [6000.0], [15000.0], 4, CostWeights(1.0, 1.0),
                                        WriteSearchConfig(m_grid=20))
        self.assertEqual(len(records), 1)
        record = records[0]
        self.assertTrue(record.valid, record.error)
        self.assertEqual(len(record.r), 6)
        self.assertTrue(params.v_min < record.v1 < record.v2 < params.v_max)
        self.assertEqual(record.v1, float(f"{record.v1:.9g}"))


if __name__ == '__main__':
    unittest.main()
