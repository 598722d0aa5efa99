import numpy as np
import pytest

import echoforge as ef
from echoforge import dsp, echo
from echoforge.errors import ConfigError, IngestError


def direct_circular_correlation(frame, reference):
    """Independent time-domain oracle: out[l] = sum_n ref[n] * frame[(n+l) % N]."""
    n = len(reference)
    out = np.empty(n)
    for lag in range(n):
        out[lag] = np.dot(reference, np.roll(frame, -lag))
    return out


@pytest.fixture(scope="module")
def chirp():
    return ef.generate_sweep(ef.SWEEP_LOW)


class TestCrossCorrelate:
    def test_autocorrelation_peaks_at_lag0(self, chirp):
        corr = ef.cross_correlate(chirp.samples, chirp)
        assert corr.argmax() == 0

    def test_circular_delay_recovered(self, chirp):
        delayed = np.roll(chirp.samples, 29)
        corr = ef.cross_correlate(delayed, chirp)
        assert corr.argmax() == 29

    def test_zero_frame_gives_zero_column(self, chirp):
        corr = ef.cross_correlate(np.zeros(600), chirp)
        np.testing.assert_array_equal(corr, np.zeros(600))

    def test_matches_direct_oracle_on_random_pairs(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(100):
            frame = rng.standard_normal(600)
            ref = rng.standard_normal(600)
            fast = ef.cross_correlate(frame, ref)
            slow = direct_circular_correlation(frame, ref)
            worst = max(worst, np.abs(fast - slow).max() / np.abs(slow).max())
        assert worst <= 1e-6

    def test_length_mismatch_rejected(self, chirp):
        with pytest.raises(ConfigError):
            ef.cross_correlate(np.zeros(599), chirp)


class TestBuildEchoProfile:
    def test_simulated_reflector_at_10cm_lands_on_row_29(self, chirp):
        scene = ef.Scene((ef.Reflector.static(0.10),), duration=0.24)
        stream = ef.render_received(scene, ef.SWEEP_LOW, seed=0)
        frames = ef.segment_frames(stream, 600)
        profile = ef.build_echo_profile(frames, chirp, ef.Channel.SS1)
        rows = profile.values.argmax(axis=0)
        assert np.all(np.abs(rows - 29) <= 1)  # 0.10 m / 3.43 mm = 29.15

    def test_loopback_peaks_at_row_zero(self, chirp):
        frames = np.tile(chirp.samples, (5, 1))
        profile = ef.build_echo_profile(frames, chirp, ef.Channel.SS1)
        assert np.all(profile.values.argmax(axis=0) == 0)

    def test_two_reflectors_give_two_local_maxima(self, chirp):
        # reflectivities chosen so both echoes arrive at similar amplitude
        scene = ef.Scene(
            (ef.Reflector.static(0.05, 0.0005), ef.Reflector.static(0.20, 0.008)),
            duration=0.24,
        )
        stream = ef.render_received(scene, ef.SWEEP_LOW, seed=0)
        frames = ef.segment_frames(stream, 600)
        profile = ef.build_echo_profile(frames, chirp, ef.Channel.SS1)
        col = np.abs(profile.values[:, 5])
        # 0.05 / 0.00343 = 14.6, 0.20 / 0.00343 = 58.3
        near = col[13:18].argmax() + 13
        far = col[56:61].argmax() + 56
        assert abs(near - 15) <= 1 and abs(far - 58) <= 1
        # each peak dominates its neighbourhood at main-lobe scale
        assert col[near] > col[near - 8] and col[near] > col[near + 8]
        assert col[far] > col[far - 8] and col[far] > col[far + 8]

    def test_time_shift_covariance(self, chirp):
        rng = np.random.default_rng(9)
        frames = np.tile(np.roll(chirp.samples, 12), (4, 1))
        frames += 0.01 * rng.standard_normal(frames.shape)
        base = ef.build_echo_profile(frames, chirp, ef.Channel.SS1)
        k = 31
        shifted = ef.build_echo_profile(np.roll(frames, k, axis=1), chirp, ef.Channel.SS1)
        np.testing.assert_array_equal(
            (base.values.argmax(axis=0) + k) % 600, shifted.values.argmax(axis=0)
        )

    def test_localization_sweep_2_to_22cm(self, chirp):
        kernel_low = echo.default_kernels()[0]
        for d in np.linspace(0.02, 0.22, 9):
            scene = ef.Scene((ef.Reflector.static(float(d)),), duration=0.12)
            stream = ef.render_received(scene, ef.SWEEP_LOW, seed=0)
            filtered = ef.apply_filter(stream, kernel_low)
            frames = ef.segment_frames(filtered, 600)
            profile = ef.build_echo_profile(frames, chirp, ef.Channel.SS1)
            expected = round(d / echo.METERS_PER_BIN)
            assert np.all(np.abs(profile.values.argmax(axis=0) - expected) <= 1)

    def test_empty_frames_rejected(self, chirp):
        with pytest.raises(ConfigError):
            ef.build_echo_profile(np.zeros((0, 600)), chirp, ef.Channel.SS1)


class TestDifferentialProfile:
    def test_static_profile_diff_is_zero(self):
        values = np.tile(np.arange(20.0)[:, None], (1, 8))
        ep = echo.EchoProfile(values, ef.Channel.SS1)
        diff = ef.differential_profile(ep)
        np.testing.assert_array_equal(diff.values, np.zeros_like(values))

    def test_linear_ramp_gives_ones(self):
        values = np.tile(np.arange(10.0)[None, :], (6, 1))
        diff = ef.differential_profile(echo.EchoProfile(values, ef.Channel.SS1))
        np.testing.assert_array_equal(diff.values[:, 0], np.zeros(6))
        np.testing.assert_array_equal(diff.values[:, 1:], np.ones((6, 9)))

    def test_single_column_rejected(self):
        with pytest.raises(ConfigError):
            ef.differential_profile(echo.EchoProfile(np.zeros((5, 1)), ef.Channel.SS1))

    def test_moving_scene_dominates_static_in_diff_energy(self, chirp):
        def diff_energy(scene):
            stream = ef.render_received(scene, ef.SWEEP_LOW, seed=0)
            frames = ef.segment_frames(stream, 600)
            profile = ef.build_echo_profile(frames, chirp, ef.Channel.SS1)
            steady = ef.crop_window(profile, 0, 70, 1, profile.n_frames - 1)
            return float(np.sum(ef.differential_profile(steady).values ** 2))

        static = ef.Scene((ef.Reflector.static(0.10),), duration=1.2)
        moving = ef.Scene(
            (ef.Reflector(((0.0, 0.05), (1.0, 0.20)), 0.002),), duration=1.2
        )
        e_static, e_moving = diff_energy(static), diff_energy(moving)
        assert e_moving > 0
        assert e_static < 0.01 * e_moving


class TestCropWindow:
    def test_exact_submatrix(self):
        rng = np.random.default_rng(1)
        values = rng.standard_normal((120, 200))
        ep = echo.EchoProfile(values, ef.Channel.DS1)
        win = ef.crop_window(ep, 0, 70, 0, 155)
        np.testing.assert_array_equal(win.values, values[:70, :155])
        assert win.meters_per_bin == ep.meters_per_bin

    def test_out_of_bounds_reports_overhang(self):
        ep = echo.EchoProfile(np.zeros((80, 200)), ef.Channel.DS1)
        with pytest.raises(ConfigError, match="40 bins"):
            ef.crop_window(ep, 50, 70, 0, 155)

    def test_crop_composition(self):
        rng = np.random.default_rng(2)
        ep = echo.EchoProfile(rng.standard_normal((300, 400)), ef.Channel.SS2)
        once = ef.crop_window(ef.crop_window(ep, 10, 200, 20, 300), 5, 70, 7, 155)
        direct = ef.crop_window(ep, 15, 70, 27, 155)
        np.testing.assert_array_equal(once.values, direct.values)


class TestStackTensor:
    def _windows(self, rng, shape=(70, 155)):
        profiles = [
            echo.EchoProfile(rng.standard_normal(shape), ch) for ch in echo.CHANNEL_ORDER
        ]
        diffs = [ef.differential_profile(p) for p in profiles]
        return profiles, diffs

    def test_shape_155_70_8(self):
        profiles, diffs = self._windows(np.random.default_rng(0))
        t = ef.stack_tensor(profiles, diffs)
        assert t.data.shape == (155, 70, 8)

    def test_wrong_shape_rejected(self):
        rng = np.random.default_rng(0)
        profiles, diffs = self._windows(rng)
        profiles[2] = echo.EchoProfile(rng.standard_normal((69, 155)), ef.Channel.DS2)
        with pytest.raises(ConfigError, match="slot 2"):
            ef.stack_tensor(profiles, diffs)

    def test_wrong_channel_order_rejected(self):
        profiles, diffs = self._windows(np.random.default_rng(0))
        profiles[0], profiles[1] = profiles[1], profiles[0]
        with pytest.raises(ConfigError, match="order"):
            ef.stack_tensor(profiles, diffs)

    def test_unstack_round_trip(self):
        profiles, diffs = self._windows(np.random.default_rng(3))
        t = ef.stack_tensor(profiles, diffs)
        back_p, back_d = ef.unstack_tensor(t)
        for a, b in zip(profiles + diffs, back_p + back_d):
            np.testing.assert_array_equal(a.values, b.values)
            assert a.channel == b.channel

    def test_range_of_interest_covers_24cm(self):
        assert abs(echo.TENSOR_BINS * echo.METERS_PER_BIN - 0.2401) < 1e-12


class TestSerialization:
    def test_eprf_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        ep = echo.EchoProfile(rng.standard_normal((70, 155)), ef.Channel.DS2)
        path = tmp_path / "p.eprf"
        ef.save_eprf(ep, path)
        back = ef.load_eprf(path)
        assert back.channel == ef.Channel.DS2
        np.testing.assert_allclose(back.values, ep.values, atol=1e-6)

    def test_eprf_header(self, tmp_path):
        ep = echo.EchoProfile(np.zeros((3, 4)), ef.Channel.SS2)
        path = tmp_path / "p.eprf"
        ef.save_eprf(ep, path)
        raw = path.read_bytes()
        assert raw[:4] == b"EPRF"
        assert len(raw) == 15 + 3 * 4 * 4

    def test_eprf_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.eprf"
        path.write_bytes(b"NOPE" + bytes(32))
        with pytest.raises(IngestError, match="magic"):
            ef.load_eprf(path)

    def test_eprf_truncation_rejected(self, tmp_path):
        ep = echo.EchoProfile(np.zeros((10, 10)), ef.Channel.SS1)
        path = tmp_path / "p.eprf"
        ef.save_eprf(ep, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(IngestError, match="payload"):
            ef.load_eprf(path)

    def test_heatmap_png_written_and_deterministic(self, tmp_path):
        rng = np.random.default_rng(5)
        ep = echo.EchoProfile(rng.standard_normal((70, 155)), ef.Channel.SS1)
        p1, p2 = tmp_path / "a.png", tmp_path / "b.png"
        ef.save_heatmap_png(ep, p1)
        ef.save_heatmap_png(ep, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert p1.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_heatmap_row0_at_bottom(self, tmp_path):
        from PIL import Image

        values = np.zeros((70, 155))
        values[0, :] = 1.0  # nearest-distance bin bright
        ef.save_heatmap_png(echo.EchoProfile(values, ef.Channel.SS1), tmp_path / "h.png")
        img = np.asarray(Image.open(tmp_path / "h.png"))
        assert img[-1].min() == 255  # bottom image row is the bright one
        assert img[0].max() == 0


class TestPipeline:
    def test_tensor_from_simulated_scene(self):
        scene = ef.Scene((ef.Reflector.static(0.12),), duration=1.86, noise_rms=0.001)
        mic1, mic2 = ef.render_mic_streams(scene, seed=3)
        tensor = ef.tensor_from_mic_streams(mic1, mic2)
        assert tensor.data.shape == (155, 70, 8)
        # strongest reflection sits at bin 35 in every original channel
        for c in range(4):
            rows = tensor.data[:, :, c].argmax(axis=1)
            assert np.all(np.abs(rows - 35) <= 1)
