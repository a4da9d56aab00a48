import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings
from hypothesis import strategies as st

from ilf import beam, study
from ilf.data import EstimatorKind, FrequencyResponseSet, TimeHistorySet
from ilf.signals import add_wgn, average_frfs, frf_direct, h1_estimate
from ilf.synthetic import random_modal_model, white_noise_inputs

from oracles import zoh_step_frf_ratio, zoh_transfer


def _rel_err(a, b):
    return np.abs(a - b) / np.abs(b)


def _multisine(period, fs, seed):
    """One period of a unit-amplitude random-phase multisine exciting every bin."""
    rng = np.random.default_rng(seed)
    spectrum = np.exp(2j * np.pi * rng.uniform(size=period // 2 + 1))
    spectrum[0] = spectrum[-1] = 0.0
    return np.fft.irfft(spectrum, n=period)


@pytest.fixture(scope="module")
def siso_model():
    return random_modal_model(3, 1, 2, band_hz=(5.0, 100.0), seed=4)


class TestFrfDirect:
    def test_unit_passthrough(self):
        x = np.random.default_rng(0).standard_normal(4096)
        th = TimeHistorySet(100.0, x[None], x[None])
        frf = frf_direct(th)
        np.testing.assert_allclose(frf.values, 1.0, rtol=1e-12)
        assert frf.estimator_kind == EstimatorKind.DIRECT_RATIO

    @given(st.floats(1e-3, 1e3))
    @settings(max_examples=25, deadline=None)
    def test_joint_scaling_invariant(self, scale):
        rng = np.random.default_rng(1)
        th = TimeHistorySet(64.0, rng.standard_normal((1, 512)), rng.standard_normal((3, 512)))
        scaled = TimeHistorySet(64.0, scale * th.inputs, scale * th.outputs)
        np.testing.assert_allclose(frf_direct(scaled).values, frf_direct(th).values, rtol=1e-9)

    def test_scaling_by_ten(self, step_runs):
        scaled = [replace(r, inputs=10 * r.inputs, outputs=10 * r.outputs) for r in step_runs]
        a = frf_direct(step_runs, band_hz=(1, 399), n_fft=2048)
        b = frf_direct(scaled, band_hz=(1, 399), n_fft=2048)
        np.testing.assert_allclose(b.values, a.values, rtol=1e-12, atol=1e-12 * np.abs(a.values).max())

    def test_zoh_oscillator_oracle(self, oscillator_model):
        fs, n = 256.0, 4096
        th = oscillator_model.simulate(np.ones((1, n)), fs)
        frf = frf_direct(th)
        r = oscillator_model.output_vectors[0, 0] * oscillator_model.input_vectors[0, 0]
        expected = zoh_step_frf_ratio(oscillator_model.poles[0], r, frf.freqs_hz, fs, n)
        np.testing.assert_allclose(frf.values[0, 0], expected, rtol=1e-9)

    def test_beam_step_equals_sampled_system(self, beam_system, direct_frf):
        # the step pair reproduces the discrete-time system exactly
        model = beam.modal_model(beam_system, study.BEAM_INPUTS, max_mode_hz=400.0)
        f = direct_frf.freqs_hz
        expected = np.zeros(direct_frf.values.shape, dtype=complex)
        for r, pole in enumerate(model.poles):
            res = np.outer(model.output_vectors[:, r], model.input_vectors[:, r])
            for (i, j), value in np.ndenumerate(res):
                expected[i, j] += zoh_step_frf_ratio(pole, value, f, 800.0, study.DEFAULT_N_FFT)
        scale = np.abs(expected).max()
        np.testing.assert_allclose(direct_frf.values, expected, rtol=0, atol=1e-9 * scale)

    def test_beam_step_matches_exact_frf_one_percent(self, direct_frf, beam_system):
        # published expectation for the sampled step test at 800 Hz
        exact = beam.exact_frf(beam_system, direct_frf.freqs_hz, study.BEAM_INPUTS)
        err = np.abs(direct_frf.values - exact.values) / np.abs(exact.values).max(axis=2, keepdims=True)
        assert err.max() <= 0.01

    def test_beam_step_gap_is_sampling_and_truncation(self, direct_frf, beam_system):
        # retained modes plus half a sample of delay explain the low band
        low = direct_frf.select_band(1.0, 40.0)
        retained = beam.exact_frf(beam_system, low.freqs_hz, study.BEAM_INPUTS, max_mode_hz=400.0).values
        delayed = retained * np.exp(-1j * np.pi * low.freqs_hz / 800.0)
        peak = np.abs(retained).max(axis=2, keepdims=True)
        live = peak[..., 0] > 0
        assert (np.abs(low.values - delayed)[live] / peak[live]).max() <= 5e-3

    def test_periodic_record_exact_without_differencing(self, siso_model):
        fs, period = 1024.0, 8192
        x = np.tile(_multisine(period, fs, 7), 10)
        th = siso_model.simulate(x[None], fs)
        steady = TimeHistorySet(fs, th.inputs[:, -period:], th.outputs[:, -period:])
        frf = frf_direct(steady, band_hz=(2.0, 200.0), from_rest=False)
        m = siso_model
        expected = zoh_transfer(m.poles, m.output_vectors, m.input_vectors, frf.freqs_hz, fs)
        np.testing.assert_allclose(frf.values, expected, rtol=1e-6, atol=1e-9 * np.abs(expected).max())

    def test_band_restriction(self, step_runs):
        frf = frf_direct(step_runs, band_hz=(10.0, 20.0), n_fft=2048)
        assert frf.freqs_hz.min() >= 10.0 and frf.freqs_hz.max() <= 20.0
        assert frf.values.shape[:2] == (16, 2)

    def test_zero_input_rejected(self):
        th = TimeHistorySet(10.0, np.zeros((1, 64)), np.ones((1, 64)))
        with pytest.raises(ValueError, match="vanishes"):
            frf_direct(th)

    def test_run_count_must_match_inputs(self, step_runs):
        with pytest.raises(ValueError, match="one run per input"):
            frf_direct(step_runs[:1])

    def test_mismatched_runs(self, step_runs):
        short = TimeHistorySet(800.0, np.ones((2, 1024)), np.ones((16, 1024)))
        with pytest.raises(ValueError, match="differ"):
            frf_direct([step_runs[0], short])

    def test_empty_band(self, step_runs):
        with pytest.raises(ValueError, match="no frequency bins"):
            frf_direct(step_runs, band_hz=(1.0, 1.1), n_fft=64)

    @pytest.mark.parametrize("n_fft", [1, 2**17])
    def test_n_fft_range(self, step_runs, n_fft):
        with pytest.raises(ValueError, match="n_fft"):
            frf_direct(step_runs, n_fft=n_fft)

    def test_combined_equals_per_column_for_separate_runs(self, step_runs, direct_frf):
        combined = frf_direct(step_runs, band_hz=study.DEFAULT_BAND_HZ, n_fft=study.DEFAULT_N_FFT, combined=True)
        np.testing.assert_allclose(combined.values, direct_frf.values, rtol=1e-10,
                                   atol=1e-12 * np.abs(direct_frf.values).max())

    def test_combined_needs_independent_inputs(self, step_runs):
        same = [step_runs[0], step_runs[0]]
        with pytest.raises(ValueError, match="independent"):
            frf_direct(same, combined=True, n_fft=256)

    def test_combined_mixed_inputs(self):
        # bursts that decay before the record ends, with two different input mixes
        model = random_modal_model(2, 2, 2, band_hz=(5.0, 50.0), seed=3)
        u = np.zeros((2, 2**15))
        u[:, :4096] = white_noise_inputs(2, 4096, seed=5)
        mix = np.array([[1.0, 2.0], [-1.0, 0.5]])
        runs = [model.simulate(u, 512.0), model.simulate(mix @ u, 512.0)]
        separate = [model.simulate(np.vstack([u[0], 0 * u[0]]), 512.0),
                    model.simulate(np.vstack([0 * u[0], u[0]]), 512.0)]
        a = frf_direct(runs, combined=True, band_hz=(1.0, 100.0))
        b = frf_direct(separate, band_hz=(1.0, 100.0))
        np.testing.assert_allclose(a.values, b.values, rtol=1e-6, atol=1e-9 * np.abs(b.values).max())


class TestH1:
    def test_one_dof_white_noise(self, oscillator_model):
        fs = 1024.0
        m = oscillator_model
        th = m.simulate(white_noise_inputs(1, 2**22, seed=2), fs)
        frf = h1_estimate(th, seg_len=65536, overlap=32768, band_hz=(5.0, 15.0))
        expected = zoh_transfer(m.poles, m.output_vectors, m.input_vectors, frf.freqs_hz, fs)[0, 0]
        assert _rel_err(frf.values[0, 0], expected).max() <= 0.02
        assert frf.estimator_kind == EstimatorKind.H1

    def test_one_dof_close_to_continuous_response(self, oscillator_model):
        # sampling adds about half a sample of delay, pi f / fs in relative terms
        fs = 1024.0
        th = oscillator_model.simulate(white_noise_inputs(1, 2**20, seed=3), fs)
        frf = h1_estimate(th, seg_len=65536, overlap=32768, band_hz=(5.0, 15.0))
        continuous = oscillator_model.frf(frf.freqs_hz).values[0, 0]
        assert np.median(_rel_err(frf.values[0, 0], continuous)) <= np.pi * 15.0 / fs + 0.01

    def test_zero_output(self):
        rng = np.random.default_rng(0)
        th = TimeHistorySet(100.0, rng.standard_normal((2, 4096)), np.zeros((3, 4096)))
        frf = h1_estimate(th, seg_len=512, overlap=256)
        assert np.all(frf.values == 0)

    def test_overlap_consistency(self, siso_model):
        th = siso_model.simulate(white_noise_inputs(1, 2**19, seed=8), 512.0)
        a = h1_estimate(th, seg_len=8192, overlap=0, band_hz=(3.0, 120.0))
        b = h1_estimate(th, seg_len=8192, overlap=4096, band_hz=(3.0, 120.0))
        np.testing.assert_array_equal(a.freqs_hz, b.freqs_hz)
        assert np.median(_rel_err(a.values, b.values)) <= 0.02

    def test_matches_direct_on_periodic_data(self, siso_model):
        # two periods per segment put the Hann neighbours of every line on empty bins
        fs, period = 1024.0, 8192
        x = np.tile(_multisine(period, fs, 6), 12)
        th = siso_model.simulate(x[None], fs)
        steady = TimeHistorySet(fs, th.inputs[:, 8 * period:], th.outputs[:, 8 * period:])
        direct = frf_direct(steady, band_hz=(2.0, 200.0), n_fft=period, from_rest=False)
        h1 = h1_estimate(steady, seg_len=2 * period, overlap=period, band_hz=(2.0, 200.0))
        lines = np.isin(h1.freqs_hz, direct.freqs_hz)
        np.testing.assert_array_equal(h1.freqs_hz[lines], direct.freqs_hz)
        peak = np.abs(direct.values).max(axis=2, keepdims=True)
        assert (np.abs(h1.values[:, :, lines] - direct.values) / peak).max() <= 0.02

    def test_deterministic(self, siso_model):
        th = siso_model.simulate(white_noise_inputs(1, 8192, seed=1), 256.0)
        a = h1_estimate(th, seg_len=1024, overlap=512)
        b = h1_estimate(th, seg_len=1024, overlap=512)
        np.testing.assert_array_equal(a.values, b.values)

    def test_multiple_inputs_at_once(self):
        model = random_modal_model(3, 2, 4, band_hz=(5.0, 60.0), seed=9)
        fs = 512.0
        th = model.simulate(white_noise_inputs(2, 2**19, seed=10), fs)
        frf = h1_estimate(th, seg_len=16384, overlap=8192, band_hz=(3.0, 80.0))
        expected = zoh_transfer(model.poles, model.output_vectors, model.input_vectors, frf.freqs_hz, fs)
        peak = np.abs(expected).max(axis=2, keepdims=True)
        assert np.median(np.abs(frf.values - expected) / peak) <= 0.01

    def test_short_record(self):
        th = TimeHistorySet(10.0, np.ones((1, 100)), np.ones((1, 100)))
        with pytest.raises(ValueError, match="shorter"):
            h1_estimate(th, seg_len=128, overlap=64)

    @pytest.mark.parametrize("overlap", [-1, 128])
    def test_bad_overlap(self, overlap):
        th = TimeHistorySet(10.0, np.ones((1, 1024)), np.ones((1, 1024)))
        with pytest.raises(ValueError, match="overlap"):
            h1_estimate(th, seg_len=128, overlap=overlap)

    def test_only_hann(self):
        th = TimeHistorySet(10.0, np.ones((1, 1024)), np.ones((1, 1024)))
        with pytest.raises(ValueError, match="window"):
            h1_estimate(th, seg_len=128, overlap=64, window="boxcar")


@pytest.fixture(scope="module")
def long_run():
    rng = np.random.default_rng(3)
    t = np.arange(2**16) / 800.0
    outputs = np.vstack([np.sin(2 * np.pi * 7 * t), 5 * rng.standard_normal(t.size), 1e-6 * np.cos(t)])
    return TimeHistorySet(800.0, 3 + rng.standard_normal((2, t.size)), outputs)


class TestAddWgn:
    def test_level_zero_identity(self, long_run):
        out = add_wgn(long_run, 0.0, seed=1)
        np.testing.assert_array_equal(out.inputs, long_run.inputs)
        np.testing.assert_array_equal(out.outputs, long_run.outputs)

    def test_two_percent_std(self, long_run):
        noisy = add_wgn(long_run, 2.0, seed=5)
        for clean, dirty in ((long_run.inputs, noisy.inputs), (long_run.outputs, noisy.outputs)):
            measured = (dirty - clean).std(axis=1)
            target = 0.02 * clean.std(axis=1)
            np.testing.assert_allclose(measured, target, rtol=0.05)

    @pytest.mark.parametrize("level", [0.1, 1.0, 2.0])
    def test_variance_grows_by_level_squared(self, long_run, level):
        noisy = add_wgn(long_run, level, seed=11)
        ratio = noisy.outputs.var(axis=1) / long_run.outputs.var(axis=1) - 1
        # the signal-noise cross term has standard deviation 2 l / sqrt(T)
        tol = 5 * 2 * (level / 100) / np.sqrt(long_run.n_samples)
        np.testing.assert_allclose(ratio, (level / 100) ** 2, rtol=0, atol=tol)

    def test_same_seed_identical(self, long_run):
        a = add_wgn(long_run, 1.5, seed=42)
        b = add_wgn(long_run, 1.5, seed=42)
        np.testing.assert_array_equal(a.outputs, b.outputs)
        np.testing.assert_array_equal(a.inputs, b.inputs)

    def test_different_seed_differs(self, long_run):
        assert not np.array_equal(add_wgn(long_run, 1.0, seed=1).outputs, add_wgn(long_run, 1.0, seed=2).outputs)

    def test_channels_independent(self, long_run):
        noisy = add_wgn(long_run, 2.0, seed=9)
        e = noisy.outputs[:2] - long_run.outputs[:2]
        e = e / e.std(axis=1, keepdims=True)
        assert abs(np.mean(e[0] * e[1])) < 4 / np.sqrt(e.shape[1])

    def test_metadata_records_noise(self, long_run):
        noisy = add_wgn(long_run, 0.5, seed=3)
        assert noisy.metadata["noise_pct"] == 0.5 and noisy.metadata["noise_seed"] == 3

    def test_negative_level(self, long_run):
        with pytest.raises(ValueError):
            add_wgn(long_run, -0.1)


class TestAverage:
    @pytest.fixture
    def frf(self, order8_model):
        return order8_model.frf(np.linspace(1.0, 60.0, 200))

    def test_single_set(self, frf):
        np.testing.assert_array_equal(average_frfs([frf]).values, frf.values)

    def test_negation_cancels(self, frf):
        neg = replace(frf, values=-frf.values)
        np.testing.assert_array_equal(average_frfs([frf, neg]).values, 0)

    def test_variance_reduction(self, frf):
        rng = np.random.default_rng(0)
        scale = 0.05 * np.abs(frf.values)
        replicas = [replace(frf, values=frf.values + scale * (rng.standard_normal(frf.values.shape)
                                                              + 1j * rng.standard_normal(frf.values.shape)))
                    for _ in range(10)]
        single = np.linalg.norm(replicas[0].values - frf.values)
        averaged = np.linalg.norm(average_frfs(replicas).values - frf.values)
        assert averaged < single

    def test_grid_mismatch(self, frf, order8_model):
        other = order8_model.frf(np.linspace(1.0, 61.0, 200))
        with pytest.raises(ValueError, match="grids"):
            average_frfs([frf, other])

    def test_empty(self):
        with pytest.raises(ValueError):
            average_frfs([])
