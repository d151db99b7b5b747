"""
Tests for entropy-based read placement, LLR tables, the read cost and the read baselines
"""
import os
import tempfile
import unittest
import sys
from pathlib import Path

import numpy as np

os.environ.setdefault('FLASHSIM_ENV', 'testing')
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.exceptions import ConfigError, MissingArtifact, OverlapError, RankDeficient, ThetaOutOfRange
from app.models import ChannelParams, CostWeights, ReadScheme, StateModel
from app.services import channel_service as channel
from app.services import read_service as readopt
from app.services.write_service import baseline_fixed, optimize_write

THETAS = (0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85)


def worn_model() -> StateModel:
    params = ChannelParams(pe=6000, t_ret=15000)
    return channel.build_state_model(params, baseline_fixed(params).write)


SEPARATED = StateModel(mu=(0.0, 10.0, 20.0, 30.0), sigma=(1.0, 1.0, 1.0, 1.0))
# state 10 is broad enough that the entropy stays above 0.1 past its own mean
BROAD_10 = StateModel(mu=(0.0, 1.2, 4.0, 8.0), sigma=(0.6, 0.6, 0.3, 0.3))


def scan_crossings(model: StateModel, theta: float, lo: float, hi: float, step: float = 1e-5) -> np.ndarray:
    """Crossings of entropy = theta on a dense grid, as midpoints of the bracketing samples"""
    v = np.arange(lo, hi, step)
    above = readopt.entropy(model, v) > theta
    idx = np.flatnonzero(above[1:] != above[:-1])
    return 0.5 * (v[idx] + v[idx + 1])


class TestEntropy(unittest.TestCase):

    def test_midpoint_is_one_bit(self):
        self.assertAlmostEqual(readopt.entropy(SEPARATED, 5.0), 1.0, places=9)

    def test_state_mean_is_certain(self):
        self.assertLess(readopt.entropy(SEPARATED, 0.0), 1e-12)
        self.assertLess(readopt.entropy(SEPARATED, 30.0), 1e-12)

    def test_vectorised(self):
        v = np.array([0.0, 5.0, 15.0])
        h = readopt.entropy(SEPARATED, v)
        self.assertEqual(h.shape, (3,))
        self.assertAlmostEqual(h[2], 1.0, places=9)

    def test_bounded_by_two_bits(self):
        model = worn_model()
        lo, hi = model.span()
        h = readopt.entropy(model, np.linspace(lo, hi, 500))
        self.assertTrue(((h >= 0.0) & (h <= 2.0)).all())


class TestSolveReadVoltages(unittest.TestCase):

    def test_residual_and_nesting(self):
        model = worn_model()
        th = channel.hard_thresholds(model)
        for theta in (0.15, 0.35, 0.6):
            reads = readopt.solve_read_voltages(model, theta)
            r = reads.r
            residual = np.abs(readopt.entropy(model, np.asarray(r)) - theta)
            self.assertLessEqual(float(residual.max()), 1e-9)
            self.assertTrue(r[0] < th.t1 < r[1] < r[2] < th.t2 < r[3] < r[4] < th.t3 < r[5])
            self.assertEqual(reads.theta, theta)

    def test_lower_theta_widens_windows(self):
        model = worn_model()
        narrow = readopt.solve_read_voltages(model, 0.6).r
        wide = readopt.solve_read_voltages(model, 0.2).r
        for k in range(3):
            self.assertGreater(wide[2 * k + 1] - wide[2 * k], narrow[2 * k + 1] - narrow[2 * k])

    def test_symmetric_pair(self):
        reads = readopt.solve_read_voltages(SEPARATED, 0.5).r
        for k, t in enumerate((5.0, 15.0, 25.0)):
            self.assertAlmostEqual(t - reads[2 * k], reads[2 * k + 1] - t, delta=1e-9)

    def test_theta_outside_unit_interval(self):
        for theta in (0.0, 1.0, 1.5):
            with self.assertRaises(ThetaOutOfRange):
                readopt.solve_read_voltages(SEPARATED, theta)

    def test_root_beyond_neighbouring_mean(self):
        reads = readopt.solve_read_voltages(BROAD_10, 0.1).r
        self.assertGreater(reads[1], BROAD_10.mu[1])
        self.assertEqual(list(reads), sorted(reads))
        residual = np.abs(readopt.entropy(BROAD_10, np.asarray(reads)) - 0.1)
        self.assertLessEqual(float(residual.max()), 1e-9)

        crossings = scan_crossings(BROAD_10, 0.1, -2.5, 9.5)
        self.assertEqual(len(crossings), 6)
        np.testing.assert_allclose(reads, crossings, atol=1e-4)

    def test_merged_windows_raise_overlap(self):
        merged = StateModel(mu=(0.0, 1.0, 2.0, 3.0), sigma=(0.6, 0.6, 0.6, 0.6))
        with self.assertRaises(OverlapError):
            readopt.solve_read_voltages(merged, 0.1)

    def test_matches_dense_scan(self):
        model = worn_model()
        lo, hi = model.span(8.0)
        for theta in (0.2, 0.35, 0.55, 0.8):
            reads = readopt.solve_read_voltages(model, theta).r
            crossings = scan_crossings(model, theta, lo, hi)
            self.assertEqual(len(crossings), 6, msg=f"theta={theta}")
            np.testing.assert_allclose(reads, crossings, atol=1e-4, err_msg=f"theta={theta}")

    def test_feasibility_agrees_with_dense_scan(self):
        # six crossings means a solution exists, fewer means two windows merged
        for pe, t_ret in ((6000, 15000), (18000, 20000)):
            params = ChannelParams(pe=pe, t_ret=t_ret)
            model = channel.build_state_model(params, optimize_write(params, 4).write)
            lo, hi = model.span(8.0)
            for theta in (0.05, 0.2, 0.5):
                crossings = scan_crossings(model, theta, lo, hi, step=2e-5)
                with self.subTest(pe=pe, t_ret=t_ret, theta=theta):
                    if len(crossings) == 6:
                        reads = readopt.solve_read_voltages(model, theta).r
                        np.testing.assert_allclose(reads, crossings, atol=1e-4)
                    else:
                        with self.assertRaises(OverlapError):
                            readopt.solve_read_voltages(model, theta)


class TestLlrTable(unittest.TestCase):

    def setUp(self):
        self.model = worn_model()
        self.reads = readopt.solve_read_voltages(self.model, 0.35)
        self.table = readopt.llr_table(self.model, self.reads)

    def test_region_masses(self):
        np.testing.assert_allclose(self.table.region_mass.sum(axis=1), 1.0, atol=1e-12)
        self.assertAlmostEqual(self.table.total_mass, 1.0, places=12)

    def test_outer_region_signs(self):
        # below R1 is state 11, above R6 is state 01
        self.assertLess(self.table.l_msb[0], 0.0)
        self.assertLess(self.table.l_lsb[0], 0.0)
        self.assertGreater(self.table.l_msb[6], 0.0)
        self.assertLess(self.table.l_lsb[6], 0.0)
        # around t2 the two middle states agree on the LSB
        self.assertGreater(self.table.l_lsb[3], 0.0)

    def test_clamped(self):
        for llr in (self.table.l_msb, self.table.l_lsb):
            self.assertTrue((np.abs(llr) <= 30.0).all())
        tight = readopt.llr_table(self.model, self.reads, clamp=2.0)
        self.assertEqual(float(np.abs(tight.l_msb).max()), 2.0)

    def test_error_masses(self):
        for p in (self.table.p_msb, self.table.p_lsb):
            self.assertTrue((p >= 0.0).all())
            self.assertLess(p.sum(), 0.5)

    def test_hard_table(self):
        model = self.model
        reads = readopt.hard_reads(model)
        table = readopt.hard_llr_table(model, reads)
        self.assertFalse(reads.is_strictly_increasing)
        for llr in (table.l_msb, table.l_lsb):
            self.assertTrue(np.isin(np.abs(llr), (0.0, 30.0)).all())
        # the repeated reads leave regions 1, 3 and 5 empty
        np.testing.assert_array_equal(table.region_mass[:, [1, 3, 5]], 0.0)


class TestReadCost(unittest.TestCase):

    def test_alphas(self):
        model = worn_model()
        table = readopt.llr_table(model, readopt.solve_read_voltages(model, 0.35))
        a_pe_lsb, a_llr_lsb, a_pe_msb, a_llr_msb = readopt.alphas(table)
        self.assertGreaterEqual(a_pe_lsb, abs(a_llr_lsb))
        self.assertGreaterEqual(a_pe_msb, abs(a_llr_msb))
        self.assertGreater(a_pe_lsb, 0.0)

    def test_golden_cost(self):
        cost = readopt.read_cost((1e-3, 1e-3, 1e-3, 1e-3), 6, CostWeights(1.0, 1.0))
        self.assertAlmostEqual(cost, 4.39453125e-6, delta=1e-18)
        cost_pe, cost_llr = readopt.cost_components((1e-3, 0.0, 1e-3, 0.0), 6)
        self.assertAlmostEqual(cost_pe, 2.197265625e-6, delta=1e-18)
        self.assertEqual(cost_llr, 0.0)


class TestCalibration(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(17)
        self.cost_pe = rng.uniform(1e-7, 1e-6, len(THETAS))
        self.cost_llr = rng.uniform(1e-7, 1e-6, len(THETAS))
        self.rng = rng

    def test_recovers_single_term(self):
        ber = 3.0 * self.cost_pe
        w = readopt.calibrate_weights(THETAS, ber, self.cost_pe, self.cost_llr)
        self.assertAlmostEqual(w.c1, 3.0, places=6)
        self.assertAlmostEqual(w.c2, 0.0, places=6)

    def test_recovers_both_terms_with_intercept(self):
        ber = 1.0 * self.cost_pe + 2.0 * self.cost_llr + 0.1
        w = readopt.calibrate_weights(THETAS, ber, self.cost_pe, self.cost_llr)
        self.assertAlmostEqual(w.c1, 1.0, places=5)
        self.assertAlmostEqual(w.c2, 2.0, places=5)

    def test_noisy_samples(self):
        thetas = np.linspace(0.15, 0.85, 9)
        cost_pe = self.rng.uniform(1e-3, 1e-2, thetas.size)
        cost_llr = self.rng.uniform(1e-3, 1e-2, thetas.size)
        # noise variance 1e-8
        ber = cost_pe + cost_llr + self.rng.normal(0.0, 1e-4, thetas.size)
        w = readopt.calibrate_weights(thetas, ber, cost_pe, cost_llr)
        self.assertAlmostEqual(w.c1, 1.0, delta=0.1)
        self.assertAlmostEqual(w.c2, 1.0, delta=0.1)

    def test_collinear_regressors(self):
        with self.assertRaises(RankDeficient):
            readopt.calibrate_weights(THETAS, self.cost_pe, self.cost_pe, 2.0 * self.cost_pe)

    def test_constant_regressor(self):
        with self.assertRaises(RankDeficient):
            readopt.calibrate_weights(THETAS, self.cost_pe, self.cost_pe, np.full(len(THETAS), 1e-7))

    def test_too_few_points(self):
        with self.assertRaises(RankDeficient):
            readopt.calibrate_weights(THETAS[:2], [0.1, 0.2], [1.0, 2.0], [2.0, 1.0])


class TestOptimizeTheta(unittest.TestCase):

    def setUp(self):
        self.model = worn_model()
        self.w = CostWeights(1.0, 1.0)

    def test_stub_cost(self):
        theta, reads = readopt.optimize_theta(self.model, 6, self.w, cost_fn=lambda t: (t - 0.4) ** 2)
        self.assertAlmostEqual(theta, 0.4, delta=1e-3)
        self.assertIsNotNone(reads)

    def test_shrinks_infeasible_bound(self):
        def cost(theta):
            if theta > 0.7:
                raise ThetaOutOfRange("above the peak")
            return (theta - 0.9) ** 2

        with self.assertLogs('app.services.read_service', level='WARNING'):
            theta, _ = readopt.optimize_theta(self.model, 6, self.w, cost_fn=cost)
        self.assertAlmostEqual(theta, 0.7, delta=1e-3)

    def test_nothing_feasible(self):
        def cost(theta):
            raise ThetaOutOfRange("never")

        with self.assertRaises(ThetaOutOfRange):
            readopt.optimize_theta(self.model, 6, self.w, cost_fn=cost)

    def test_bad_bounds(self):
        with self.assertRaises(ValueError):
            readopt.optimize_theta(self.model, 6, self.w, bounds=(0.5, 0.2))

    def test_real_cost(self):
        theta, reads = readopt.optimize_theta(self.model, 6, self.w)
        self.assertTrue(0.05 <= theta <= 0.95)
        self.assertTrue(reads.is_strictly_increasing)
        cost = readopt.theta_cost(self.model, 6, self.w)
        for other in (0.05, 0.35, 0.95):
            try:
                self.assertLessEqual(cost(theta), cost(other) + 1e-18)
            except ThetaOutOfRange:
                continue


class TestBaselineReads(unittest.TestCase):

    def setUp(self):
        self.model = worn_model()

    def test_uniform_spacing(self):
        r = np.asarray(readopt.uniform_reads(self.model).r)
        gaps = np.diff(np.concatenate(([self.model.mu[0]], r, [self.model.mu[3]])))
        np.testing.assert_allclose(gaps, (self.model.mu[3] - self.model.mu[0]) / 7.0)

    def test_hard_reads_repeat_thresholds(self):
        th = channel.hard_thresholds(self.model)
        r = readopt.hard_reads(self.model).r
        self.assertEqual(r, (th.t1, th.t1, th.t2, th.t2, th.t3, th.t3))

    def test_mmi_improves_information(self):
        mmi = readopt.mmi_reads(self.model)
        info_mmi = readopt.read_mutual_information(self.model, mmi)
        info_uniform = readopt.read_mutual_information(self.model, readopt.uniform_reads(self.model))
        info_hard = readopt.read_mutual_information(self.model, readopt.hard_reads(self.model))
        self.assertGreaterEqual(info_mmi, info_uniform)
        self.assertGreaterEqual(info_mmi, info_hard)
        self.assertLessEqual(info_mmi, 2.0)
        self.assertTrue(mmi.is_strictly_increasing)

    def test_information_ordering(self):
        info = {}
        for name, reads in (
                ("mmi", readopt.mmi_reads(self.model)),
                ("entropy", readopt.solve_read_voltages(self.model, 0.35)),
                ("uniform", readopt.uniform_reads(self.model))):
            info[name] = readopt.read_mutual_information(self.model, reads)
        self.assertGreaterEqual(info["mmi"], info["entropy"] - 1e-4)
        self.assertGreaterEqual(info["entropy"], info["uniform"])


class TestDesignReads(unittest.TestCase):

    def setUp(self):
        self.model = worn_model()

    def test_schemes(self):
        reads, table = readopt.design_reads(self.model, ReadScheme.ENTROPY_FIXED, 6, theta=0.35)
        self.assertEqual(reads.theta, 0.35)
        self.assertEqual(reads.scheme, ReadScheme.ENTROPY_FIXED.value)
        reads, table = readopt.design_reads(self.model, "uniform", 6)
        self.assertEqual(reads.scheme, ReadScheme.UNIFORM.value)
        reads, table = readopt.design_reads(self.model, "hard", 6)
        self.assertTrue(np.isin(np.abs(table.l_lsb), (0.0, 30.0)).all())

    def test_proposed_needs_weights(self):
        with self.assertRaises(MissingArtifact):
            readopt.design_reads(self.model, ReadScheme.PROPOSED, 6)


class TestWeightsFile(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.addCleanup(self.temp_dir.cleanup)
        self.path = Path(self.temp_dir.name) / "weights.kv"

    def test_round_trip(self):
        weights = CostWeights(1.25, -0.5)
        readopt.save_weights(weights, self.path, calibration={'pe': 6000.0, 'frames': 200})
        self.assertEqual(readopt.load_weights(self.path), weights)

    def test_missing_file(self):
        with self.assertRaises(MissingArtifact):
            readopt.load_weights(self.path)

    def test_incomplete_file(self):
        self.path.write_text("[weights]\nc1 = 1.0\n", encoding="utf-8")
        with self.assertRaises(ConfigError):
            readopt.load_weights(self.path)


if __name__ == '__main__':
    unittest.main()
