"""
Tests for the flashsim command-line interface
"""
import io
import os
import tempfile
import unittest
import sys
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path
from unittest import mock

import pandas as pd

os.environ.setdefault('FLASHSIM_ENV', 'testing')
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.config import current_config
from app.exceptions import EXIT_CONFIG_ERROR, EXIT_MISSING_DEPENDENCY, EXIT_OK, EXIT_OPTIMIZER_FAILURE
from app.main import WRITE_COLUMNS, main
from app.models import BER_COLUMNS, CostWeights, StopReason
from app.services import LdpcService
from app.services import read_service as readopt
from app.services.harness_service import CalibrationResult

SMALL_CODE = "[code]\nn = 64\nk = 32\nstrict_girth = false\n"
# high-rate code on wide programmed states, so decoded frames keep errors
LEAKY_POINT = ("[code]\nn = 64\nk = 56\nstrict_girth = false\nd_min = 2\n"
               "[channel]\nsigma_p = 0.25\n[sweep]\npe = 6000\nt_ret = 0\n")


class CliTestCase(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.addCleanup(self.temp_dir.cleanup)
        self.path = Path(self.temp_dir.name)
        self.out = self.path / "out"

        # keep generated codes out of the package data directory
        patcher = mock.patch('app.main.ldpc_service', LdpcService(self.path / "codes"))
        patcher.start()
        self.addCleanup(patcher.stop)

    def write_config(self, text: str) -> str:
        path = self.path / "run.kv"
        path.write_text(text, encoding="utf-8")
        return str(path)

    def run_cli(self, *argv):
        """Return (exit code, stdout, stderr)"""
        stdout, stderr = io.StringIO(), io.StringIO()
        args = list(argv)
        if args and not args[0].startswith('-'):
            args += ["--output", str(self.out), "--log-level", "WARNING"]
        with redirect_stdout(stdout), redirect_stderr(stderr):
            code = main(args)
        return code, stdout.getvalue(), stderr.getvalue()


class TestInspect(CliTestCase):

    def test_fresh_cells(self):
        code, stdout, _ = self.run_cli("inspect", "--pe", "0", "--t-ret", "0")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("sigma_s11 = 0.35", stdout)
        self.assertIn("t2 = ", stdout)

        trace = pd.read_csv(self.out / "entropy_pe0_t0.csv")
        self.assertEqual(list(trace.columns), ['v', 'entropy'])
        self.assertEqual(len(trace), 512)
        self.assertTrue(((trace['entropy'] >= 0) & (trace['entropy'] <= 2)).all())

    def test_malformed_key(self):
        config = self.write_config("[channel]\nsigma_e = 0.35\nsigma_eee = 0.1\n")
        code, _, stderr = self.run_cli("inspect", "--config", config)
        self.assertEqual(code, EXIT_CONFIG_ERROR)
        self.assertIn("sigma_eee", stderr)
        self.assertIn("line 3", stderr)

    def test_missing_config_file(self):
        code, _, _ = self.run_cli("inspect", "--config", str(self.path / "absent.kv"))
        self.assertEqual(code, EXIT_MISSING_DEPENDENCY)


class TestOptimize(CliTestCase):

    def test_optimize_write_fixed(self):
        config = self.write_config("[code]\nd_min = 4\n")
        code, _, _ = self.run_cli("optimize-write", "--config", config, "--scheme", "fixed",
                                  "--pe", "6000", "--t-ret", "15000")
        self.assertEqual(code, EXIT_OK)
        row = pd.read_csv(self.out / "write_fixed_pe6000_t15000.csv")
        self.assertEqual(list(row.columns), WRITE_COLUMNS)
        self.assertAlmostEqual(row['v1'][0], 2.2433, places=4)
        self.assertAlmostEqual(row['v2'][0], 3.0867, places=4)

    def test_optimize_read_entropy_fixed(self):
        config = self.write_config("[code]\nd_min = 4\n[schemes]\nwrite = fixed\n")
        code, _, _ = self.run_cli("optimize-read", "--config", config, "--scheme", "entropy-fixed",
                                  "--theta", "0.35", "--weights-file", str(self.path / "absent.kv"))
        self.assertEqual(code, EXIT_OK)
        row = pd.read_csv(self.out / "read_entropy-fixed_pe6000_t15000.csv")
        self.assertEqual(row['theta_star'][0], 0.35)
        reads = [row[f"r{i}"][0] for i in range(1, 7)]
        self.assertEqual(reads, sorted(reads))

    def test_proposed_read_without_weights(self):
        config = self.write_config("[code]\nd_min = 4\n[schemes]\nwrite = fixed\n")
        code, _, stderr = self.run_cli("optimize-read", "--config", config, "--scheme", "proposed",
                                       "--weights-file", str(self.path / "absent.kv"))
        self.assertEqual(code, EXIT_MISSING_DEPENDENCY)
        self.assertIn("weights", stderr)

    def test_optimize_write_proposed(self):
        config = self.write_config("[code]\nd_min = 4\n")
        code, stdout, _ = self.run_cli("optimize-write", "--config", config, "--scheme", "proposed",
                                       "--pe", "6000", "--t-ret", "15000")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("proposed: V1=", stdout)
        row = pd.read_csv(self.out / "write_proposed_pe6000_t15000.csv")
        self.assertLess(row['v1'][0], row['v2'][0])
        self.assertGreater(row['cost'][0], 0.0)


class TestCalibrateCommand(CliTestCase):

    def calibrate_frames(self, config_text: str, *flags) -> int:
        """Frames the calibrate command hands to the harness"""
        def fake_calibrate(cfg, pe, t_ret, thetas, frames):
            return CalibrationResult(weights=CostWeights(1.0, 2.0), pe=pe, t_ret=t_ret, d_min=3, frames=frames)

        with mock.patch('app.main.harness_service') as harness:
            harness.calibrate.side_effect = fake_calibrate
            code, _, _ = self.run_cli("calibrate", "--config", self.write_config(config_text), *flags)
        self.assertEqual(code, EXIT_OK)
        return harness.calibrate.call_args[0][4]

    def test_frames_from_config_file(self):
        self.assertEqual(self.calibrate_frames(SMALL_CODE + "d_min = 3\n[sweep]\nframes = 7\n"), 7)

    def test_frames_flag_beats_config_file(self):
        text = SMALL_CODE + "d_min = 3\n[sweep]\nframes = 7\n"
        self.assertEqual(self.calibrate_frames(text, "--frames", "3"), 3)

    def test_default_frames(self):
        self.assertEqual(self.calibrate_frames(SMALL_CODE + "d_min = 3\n"), current_config.CALIBRATION_FRAMES)

    def test_writes_weights_file(self):
        config = self.write_config(LEAKY_POINT + "frames = 6\n")
        weights_file = self.path / "weights.kv"
        code, stdout, _ = self.run_cli("calibrate", "--config", config, "--thetas", "0.6,0.7,0.8,0.9",
                                       "--weights-file", str(weights_file))
        self.assertEqual(code, EXIT_OK)
        self.assertIn("c1=", stdout)
        weights = readopt.load_weights(weights_file)
        self.assertTrue(weights.c1 != 0.0 or weights.c2 != 0.0)
        text = weights_file.read_text(encoding="utf-8")
        self.assertIn("[calibration]", text)
        self.assertIn("frames = 6", text)

    def test_infeasible_thetas_exit_code(self):
        config = self.write_config(LEAKY_POINT + "frames = 2\n")
        code, _, stderr = self.run_cli("calibrate", "--config", config, "--thetas", "0.8,1.0,1.5",
                                       "--weights-file", str(self.path / "weights.kv"))
        self.assertEqual(code, EXIT_OPTIMIZER_FAILURE)
        self.assertIn("at least 3", stderr)
        self.assertFalse((self.path / "weights.kv").exists())


class TestLutCommands(CliTestCase):

    def test_build_then_sweep_from_lut(self):
        config = self.write_config(SMALL_CODE + "d_min = 3\n[sweep]\npe = 6000\nt_ret = 15000\n")
        lut = str(self.path / "voltages.lut")
        code, stdout, _ = self.run_cli("build-lut", "--config", config, "--weights", "1,1", "--lut", lut)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("1 grid points, 0 invalid", stdout)

        code, _, _ = self.run_cli("sweep", "--config", config, "--use-lut", "--lut", lut,
                                  "--frames", "4", "--seed", "3")
        self.assertEqual(code, EXIT_OK)
        frame = pd.read_csv(self.out / "ber_proposed_proposed.csv")
        self.assertEqual(len(frame), 1)
        self.assertEqual(int(frame['frames'][0]), 4)
        self.assertEqual(frame['stop_rule'][0], StopReason.FRAME_CAP.value)

    def test_sweep_without_lut_file(self):
        config = self.write_config(SMALL_CODE + "d_min = 3\n")
        code, _, _ = self.run_cli("sweep", "--config", config, "--use-lut",
                                  "--lut", str(self.path / "absent.lut"), "--frames", "2")
        self.assertEqual(code, EXIT_MISSING_DEPENDENCY)


class TestSweepCommand(CliTestCase):

    def test_zero_frames_rejected(self):
        code, _, _ = self.run_cli("sweep", "--frames", "0")
        self.assertEqual(code, EXIT_CONFIG_ERROR)

    def test_small_sweep(self):
        config = self.write_config(SMALL_CODE + "d_min = 3\n")
        code, stdout, _ = self.run_cli("sweep", "--config", config, "--write-scheme", "fixed",
                                       "--read-scheme", "hard", "--frames", "4",
                                       "--pe", "6000", "--t-ret", "0,5000", "--seed", "5")
        self.assertEqual(code, EXIT_OK)
        frame = pd.read_csv(self.out / "ber_fixed_hard.csv")
        self.assertEqual(list(frame.columns), BER_COLUMNS)
        self.assertEqual(len(frame), 2)
        self.assertEqual(frame['frames'].tolist(), [4, 4])
        self.assertIn("PE=6000 T=5000", stdout)

    def test_dmin(self):
        config = self.write_config(SMALL_CODE)
        code, stdout, _ = self.run_cli("dmin", "--config", config, "--effort", "10")
        self.assertEqual(code, EXIT_OK)
        written = list(self.out.glob("dmin_n64_k*.csv"))
        self.assertEqual(len(written), 1)
        row = pd.read_csv(written[0])
        self.assertGreaterEqual(int(row['d_min'][0]), 1)
        self.assertEqual(int(row['effort'][0]), 10)


class TestArgumentParsing(unittest.TestCase):

    def test_unknown_command(self):
        with redirect_stderr(io.StringIO()), self.assertRaises(SystemExit) as ctx:
            main(["transmogrify"])
        self.assertEqual(ctx.exception.code, EXIT_CONFIG_ERROR)

    def test_bad_weights_flag(self):
        with redirect_stderr(io.StringIO()), self.assertRaises(SystemExit) as ctx:
            main(["sweep", "--weights", "1"])
        self.assertEqual(ctx.exception.code, EXIT_CONFIG_ERROR)

    def test_sweep_help_lists_flags(self):
        stdout = io.StringIO()
        with redirect_stdout(stdout), self.assertRaises(SystemExit) as ctx:
            main(["sweep", "--help"])
        self.assertEqual(ctx.exception.code, 0)
        for flag in ("--config", "--pe", "--t-ret", "--seed", "--threads", "--output", "--log-level",
                     "--frames", "--write-scheme", "--read-scheme", "--theta", "--use-lut", "--lut",
                     "--weights", "--weights-file"):
            self.assertIn(flag, stdout.getvalue())

    def test_every_subcommand_exists(self):
        for command in ("inspect", "optimize-write", "optimize-read", "calibrate", "sweep",
                        "build-lut", "dmin"):
            with redirect_stdout(io.StringIO()), self.assertRaises(SystemExit) as ctx:
                main([command, "--help"])
            self.assertEqual(ctx.exception.code, 0)


if __name__ == '__main__':
    unittest.main()
