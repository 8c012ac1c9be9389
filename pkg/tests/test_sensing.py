"""Pilot generation, measurement matrix structure, and noise calibration."""

import numpy as np
import pytest

from ris_crlb import sensing as sn
from ris_crlb.errors import DimensionMismatchError
from ris_crlb.numerics import kron, numeric_rank


class TestGenPilots:
    def test_deterministic_given_seed(self):
        cfg = sn.PilotConfig(n_d=5, k=20, seed=123)
        np.testing.assert_array_equal(sn.gen_pilots(cfg), sn.gen_pilots(cfg))

    def test_mean_entry_power(self):
        x = sn.gen_pilots(sn.PilotConfig(n_d=100, k=1000, seed=1))
        assert abs(np.mean(np.abs(x) ** 2) - 1.0) < 0.02

    def test_long_columns_nearly_orthogonal(self):
        # law-of-large-numbers decay of cross-correlation between pilot rows
        x = sn.gen_pilots(sn.PilotConfig(n_d=2, k=10_000, seed=2))
        assert abs(np.vdot(x[0], x[1])) / x.shape[1] < 0.05

    def test_warns_when_k_too_small(self):
        with pytest.warns(UserWarning):
            sn.PilotConfig(n_d=5, k=5, seed=0)

    def test_p_ms(self):
        cfg = sn.PilotConfig(n_d=5, k=20, seed=0)
        assert cfg.p_ms == 5.0


class TestMeasurementMatrix:
    def test_scalar_pilot_identity(self):
        np.testing.assert_allclose(
            sn.measurement_matrix(np.array([[1.0 + 0j]]), 2), np.eye(2)
        )

    def test_ns_one_is_transpose(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
        np.testing.assert_allclose(sn.measurement_matrix(x, 1), x.T)

    def test_default_scale_full_rank(self):
        pilots = sn.gen_pilots(sn.PilotConfig(n_d=5, k=20, seed=4))
        mat = sn.measurement_matrix(pilots, 5)
        assert mat.shape == (100, 25)
        assert numeric_rank(mat) == 25

    def test_column_structure(self):
        pilots = sn.gen_pilots(sn.PilotConfig(n_d=3, k=7, seed=5))
        n_s = 4
        mat = sn.measurement_matrix(pilots, n_s)
        # column j*n_s + i is pilot row j placed at identity position i
        for j in range(3):
            for i in range(n_s):
                col = mat[:, j * n_s + i]
                assert np.count_nonzero(col) == 7
                np.testing.assert_allclose(col[i::n_s], pilots[j])

    def test_same_pilot_row_columns_orthogonal(self):
        pilots = sn.gen_pilots(sn.PilotConfig(n_d=3, k=7, seed=6))
        mat = sn.measurement_matrix(pilots, 4)
        # disjoint supports for equal pilot row, distinct identity index
        assert np.vdot(mat[:, 0], mat[:, 1]) == 0
        assert np.vdot(mat[:, 4], mat[:, 7]) == 0

    def test_random_submatrices_full_rank(self):
        # reduced-size version of the full-rank sweep in the acceptance suite
        rng = np.random.default_rng(7)
        for draw in range(100):
            pilots = sn.gen_pilots(sn.PilotConfig(n_d=5, k=20, seed=1000 + draw))
            mat = sn.measurement_matrix(pilots, 5)
            assert numeric_rank(mat) == 25
            for _ in range(10):
                l = int(rng.integers(1, 4))
                cols = rng.choice(25, size=l, replace=False)
                assert numeric_rank(mat[:, cols]) == l


class TestObserve:
    def _model(self, noise_var, seed=8):
        pilots = sn.gen_pilots(sn.PilotConfig(n_d=5, k=12, seed=seed))
        return sn.measurement_model(pilots, 5, noise_var=noise_var)

    def test_noiseless_limit(self):
        model = self._model(0.0)
        truth = np.zeros(25, dtype=complex)
        truth[3] = 1.0 + 2.0j
        obs = sn.observe(model, truth, np.random.default_rng(9))
        np.testing.assert_allclose(obs.y, model.upsilon_mat @ truth)

    def test_deterministic_given_seed(self):
        model = self._model(0.5)
        truth = np.ones(25, dtype=complex)
        y1 = sn.observe(model, truth, np.random.default_rng(10)).y
        y2 = sn.observe(model, truth, np.random.default_rng(10)).y
        np.testing.assert_array_equal(y1, y2)

    def test_noise_only_energy(self):
        sigma2 = 0.7
        model = self._model(sigma2)
        truth = np.zeros(25, dtype=complex)
        rng = np.random.default_rng(11)
        draws = 10_000
        total = 0.0
        for _ in range(draws):
            total += float(np.sum(np.abs(sn.observe(model, truth, rng).y) ** 2))
        expected = model.k * model.n_s * sigma2
        assert abs(total / draws / expected - 1.0) < 0.02

    def test_noise_calibration_per_entry(self):
        sigma2 = 0.3
        model = self._model(sigma2)
        rng = np.random.default_rng(12)
        truth = (rng.standard_normal(25) + 1j * rng.standard_normal(25)) / 4
        samples = []
        for _ in range(200):
            obs = sn.observe(model, truth, rng)
            samples.append(obs.y - model.upsilon_mat @ truth)
        per_entry = np.mean(np.abs(np.concatenate(samples)) ** 2)
        assert abs(per_entry / sigma2 - 1.0) < 0.02

    def test_dimension_mismatch(self):
        model = self._model(0.1)
        with pytest.raises(DimensionMismatchError):
            sn.observe(model, np.ones(7, dtype=complex), np.random.default_rng(0))


class TestSnrToNoiseVar:
    def test_unit_ratio(self):
        model = sn.measurement_model(
            sn.gen_pilots(sn.PilotConfig(n_d=5, k=12, seed=13)), 5
        )
        truth = np.zeros(25, dtype=complex)
        truth[:5] = 1.0  # ||truth||^2 = n_s
        assert abs(sn.snr_to_noise_var(0.0, model, truth) - 1.0) < 1e-12

    def test_db_scaling(self):
        model = sn.measurement_model(
            sn.gen_pilots(sn.PilotConfig(n_d=5, k=12, seed=14)), 5
        )
        truth = np.ones(25, dtype=complex)
        v0 = sn.snr_to_noise_var(0.0, model, truth)
        v20 = sn.snr_to_noise_var(20.0, model, truth)
        assert abs(v0 / v20 - 100.0) < 1e-9

    def test_rejects_zero_truth(self):
        model = sn.measurement_model(
            sn.gen_pilots(sn.PilotConfig(n_d=5, k=12, seed=15)), 5
        )
        with pytest.raises(ValueError):
            sn.snr_to_noise_var(10.0, model, np.zeros(25, dtype=complex))

    def test_snr_definition_monte_carlo(self):
        # mean ||Upsilon upsilon||^2 / (K n_s sigma^2) should hit 10^(snr/10)
        rng = np.random.default_rng(16)
        truth = (rng.standard_normal(25) + 1j * rng.standard_normal(25)) / 3
        snr_db = 13.0
        ratios = []
        for draw in range(1000):
            pilots = sn.gen_pilots(sn.PilotConfig(n_d=5, k=20, seed=5000 + draw))
            model = sn.measurement_model(pilots, 5)
            sigma2 = sn.snr_to_noise_var(snr_db, model, truth)
            signal = float(np.sum(np.abs(model.upsilon_mat @ truth) ** 2))
            ratios.append(signal / (model.k * model.n_s * sigma2))
        assert abs(np.mean(ratios) / 10 ** (snr_db / 10) - 1.0) < 0.05
