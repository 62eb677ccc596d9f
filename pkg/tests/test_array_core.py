import numpy as np
import pytest

from risbeamcal.array_core import (
    build_codebook,
    ideal_codeword,
    make_angle_grid,
    quantize_codeword,
    steering_matrix,
    steering_vector,
)


class TestMakeAngleGrid:
    def test_full_sweep_has_181_samples(self):
        grid = make_angle_grid(-90, 90, 1)
        assert grid.count == 181
        assert grid.angles_deg[0] == -90
        assert grid.angles_deg[-1] == 90

    def test_metric_window_has_81_samples(self):
        assert make_angle_grid(-40, 40, 1).count == 81

    def test_single_point(self):
        grid = make_angle_grid(0, 0, 1)
        assert grid.count == 1
        assert grid.angles_deg[0] == 0.0

    @pytest.mark.parametrize("args", [(-90, 90, 0), (-90, 90, -1),
                                      (-91, 90, 1), (-90, 90.5, 1)])
    def test_rejects_bad_ranges(self, args):
        with pytest.raises(ValueError):
            make_angle_grid(*args)

    def test_rejects_reversed_range(self):
        with pytest.raises(ValueError):
            make_angle_grid(10, -10, 1)


class TestSteeringVector:
    def test_boresight_is_all_ones(self):
        assert np.allclose(steering_vector(0.0, 8), np.ones(8))

    def test_thirty_degrees_two_elements(self):
        assert np.allclose(steering_vector(30.0, 2), [1.0, 1j], atol=1e-12)

    def test_minus_thirty_degrees_two_elements(self):
        assert np.allclose(steering_vector(-30.0, 2), [1.0, -1j], atol=1e-12)

    def test_angle_symmetry_is_conjugation(self):
        for phi in np.linspace(-90, 90, 37):
            a_pos = steering_vector(phi, 16)
            a_neg = steering_vector(-phi, 16)
            assert np.allclose(a_neg, a_pos.conj(), atol=1e-12)

    def test_rejects_out_of_range_angle(self):
        with pytest.raises(ValueError):
            steering_vector(95.0, 4)


class TestSteeringMatrix:
    def test_single_angle_boresight(self):
        mat = steering_matrix(make_angle_grid(0, 0, 1), 4)
        assert mat.entries.shape == (4, 1)
        assert np.allclose(mat.entries, 1.0)

    def test_full_grid_shape_and_modulus(self):
        mat = steering_matrix(make_angle_grid(-90, 90, 1), 16)
        assert mat.entries.shape == (16, 181)
        assert np.all(np.abs(np.abs(mat.entries) - 1.0) < 1e-12)

    def test_columns_match_steering_vectors(self):
        grid = make_angle_grid(-30, 30, 60)
        mat = steering_matrix(grid, 2)
        assert np.allclose(mat.entries[:, 0], [1.0, -1j], atol=1e-12)
        assert np.allclose(mat.entries[:, 1], [1.0, 1j], atol=1e-12)


class TestIdealCodeword:
    def test_boresight_entries(self):
        w = ideal_codeword(0.0, 16)
        assert np.allclose(w, 0.25)

    @pytest.mark.parametrize("scan", [-50.0, -17.3, 0.0, 8.0, 50.0])
    def test_coherent_gain(self, scan):
        n = 16
        w = ideal_codeword(scan, n)
        gain = abs(steering_vector(scan, n) @ w)
        assert abs(gain - np.sqrt(n)) < 1e-10

    def test_thirty_degrees_two_elements(self):
        w = ideal_codeword(30.0, 2)
        assert np.allclose(w, np.array([1.0, -1j]) / np.sqrt(2), atol=1e-12)


class TestQuantizeCodeword:
    def test_rounds_down_below_midpoint(self):
        w = np.array([np.exp(1j * np.deg2rad(44.0))])
        q = quantize_codeword(w, 2)
        assert np.allclose(np.angle(q, deg=True), 0.0, atol=1e-9)

    def test_rounds_up_above_midpoint(self):
        w = np.array([np.exp(1j * np.deg2rad(46.0))])
        q = quantize_codeword(w, 2)
        assert np.allclose(np.angle(q, deg=True), 90.0, atol=1e-9)

    def test_tie_breaks_toward_smaller_phase(self):
        w = np.array([np.exp(1j * np.pi / 4)])  # exactly between 0 and 90 deg
        q = quantize_codeword(w, 2)
        assert np.allclose(np.angle(q, deg=True), 0.0, atol=1e-9)

    def test_idempotent_on_grid_phases(self):
        phases = np.deg2rad([0.0, 90.0, 180.0, 270.0])
        w = np.exp(1j * phases) / 2.0
        q = quantize_codeword(w, 2)
        assert np.allclose(q, np.exp(1j * phases) / 2.0, atol=1e-12)

    def test_quantization_never_improves_gain(self):
        n = 16
        for scan in np.linspace(-60, 60, 25):
            w = ideal_codeword(scan, n)
            q = quantize_codeword(w, 2)
            a = steering_vector(scan, n)
            assert abs(a @ q) <= abs(a @ w) + 1e-12

    def test_rejects_zero_entries(self):
        with pytest.raises(ValueError):
            quantize_codeword(np.array([0.0 + 0j, 1.0]), 2)

    def test_rejects_bad_bit_count(self):
        with pytest.raises(ValueError):
            quantize_codeword(np.ones(4, dtype=complex), 0)


class TestBuildCodebook:
    def test_default_sweep_shape(self):
        scans = np.arange(-50.0, 51.0, 10.0)
        book = build_codebook(scans, 16, 2)
        assert book.columns.shape == (16, 11)
        assert np.allclose(np.linalg.norm(book.columns, axis=0), 1.0, atol=1e-12)

    def test_single_boresight_scan(self):
        book = build_codebook([0.0], 16, 2)
        assert np.allclose(book.columns[:, 0], 0.25)

    def test_unquantized_codebook(self):
        scans = [0.0, 25.0]
        book = build_codebook(scans, 8, None)
        assert book.phase_bits is None
        for g, scan in enumerate(scans):
            assert np.allclose(book.columns[:, g], ideal_codeword(scan, 8))
