import numpy as np
import pytest

import echoforge as ef
from echoforge import dsp, echo, simulate
from echoforge.errors import ConfigError


def profile_from_stream(stream, sweep=None):
    sweep = sweep or ef.SWEEP_LOW
    frames = ef.segment_frames(stream, sweep.n_samples)
    return ef.build_echo_profile(frames, ef.generate_sweep(sweep), ef.Channel.SS1)


class TestRenderReceived:
    def test_empty_scene_without_noise_is_silent(self):
        scene = ef.Scene((), duration=0.12)
        stream = ef.render_received(scene, ef.SWEEP_LOW, seed=0)
        assert np.all(stream.samples == 0.0)
        assert len(stream) == round(0.12 * dsp.RATE)

    def test_same_seed_is_bit_identical(self):
        scene = ef.Scene((ef.Reflector.static(0.08),), duration=0.12, noise_rms=0.05)
        a = ef.render_received(scene, ef.SWEEP_LOW, seed=99)
        b = ef.render_received(scene, ef.SWEEP_LOW, seed=99)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_different_seeds_differ(self):
        scene = ef.Scene((), duration=0.12, noise_rms=0.05)
        a = ef.render_received(scene, ef.SWEEP_LOW, seed=1)
        b = ef.render_received(scene, ef.SWEEP_LOW, seed=2)
        assert not np.array_equal(a.samples, b.samples)

    def test_superposition(self):
        ra, rb = ef.Reflector.static(0.06), ef.Reflector.static(0.17)
        joint = ef.render_received(ef.Scene((ra, rb), duration=0.12), ef.SWEEP_LOW, 0)
        only_a = ef.render_received(ef.Scene((ra,), duration=0.12), ef.SWEEP_LOW, 0)
        only_b = ef.render_received(ef.Scene((rb,), duration=0.12), ef.SWEEP_LOW, 0)
        err = np.abs(joint.samples - (only_a.samples + only_b.samples)).max()
        assert err <= 1e-10 * max(np.abs(joint.samples).max(), 1.0)

    def test_monotonic_attenuation(self):
        def peak(d):
            scene = ef.Scene((ef.Reflector.static(d),), duration=0.12)
            stream = ef.render_received(scene, ef.SWEEP_LOW, seed=0)
            return profile_from_stream(stream).values[:, 5].max()

        assert peak(0.10) > peak(0.20)
        assert peak(0.05) > peak(0.10)

    def test_static_reflector_localization_over_range(self):
        for d in np.linspace(0.02, 0.22, 11):
            scene = ef.Scene((ef.Reflector.static(float(d)),), duration=0.096)
            stream = ef.render_received(scene, ef.SWEEP_LOW, seed=0)
            rows = profile_from_stream(stream).values.argmax(axis=0)
            expected = round(d / echo.METERS_PER_BIN)
            assert np.all(np.abs(rows - expected) <= 1), f"distance {d}"

    def test_duration_must_be_whole_frames(self):
        with pytest.raises(ConfigError, match="whole number"):
            ef.Scene((), duration=0.013)

    def test_trajectory_keyframes_validated(self):
        with pytest.raises(ConfigError):
            ef.Reflector(((0.0, 0.1), (0.0, 0.2)))  # duplicate times
        with pytest.raises(ConfigError):
            ef.Reflector(((0.0, 1.5),))  # outside [0, 1] m
        with pytest.raises(ConfigError):
            ef.Reflector(((0.0, 0.1),), reflectivity=0.0)


class TestMicStreams:
    def test_channel_gains_applied(self):
        scene = ef.Scene(
            (ef.Reflector.static(0.10),), duration=0.12,
            channel_gains=(1.0, 0.5, 0.25, 0.125),
        )
        mic1, mic2 = ef.render_mic_streams(scene, seed=0)
        low = simulate._render_echo(scene, ef.SWEEP_LOW)
        high = simulate._render_echo(scene, ef.SWEEP_HIGH)
        np.testing.assert_allclose(mic1.samples, 1.0 * low + 0.5 * high, atol=1e-15)
        np.testing.assert_allclose(mic2.samples, 0.25 * low + 0.125 * high, atol=1e-15)

    def test_mic_noise_independent(self):
        scene = ef.Scene((), duration=0.12, noise_rms=0.1)
        mic1, mic2 = ef.render_mic_streams(scene, seed=5)
        assert not np.array_equal(mic1.samples, mic2.samples)


class TestGestureScripts:
    def test_builtin_scripts_are_six_distinct_labels(self):
        scripts = ef.builtin_scripts()
        assert len(scripts) == 6
        assert len({s.label for s in scripts}) == 6
        for a in scripts:
            for b in scripts:
                if a.label != b.label:
                    assert a.reflectors != b.reflectors

    def test_zero_jitter_zero_noise_tensors_identical_within_class(self):
        from dataclasses import replace

        scripts = [
            replace(s, dist_jitter=0.0, time_jitter=0.0)
            for s in ef.builtin_scripts()[:2]
        ]
        tensors = ef.synth_gesture_set(scripts, 2, seed=3, noise_rms=0.0)
        np.testing.assert_array_equal(tensors[0].data, tensors[1].data)
        np.testing.assert_array_equal(tensors[2].data, tensors[3].data)
        # different scripts differ
        assert np.linalg.norm(tensors[0].data - tensors[2].data) > 0

    def test_synth_set_bookkeeping(self):
        tensors = ef.synth_gesture_set(ef.builtin_scripts(), 3, seed=1)
        assert len(tensors) == 18
        per_label = {}
        for t in tensors:
            assert t.data.shape == (155, 70, 8)
            per_label[t.label] = per_label.get(t.label, 0) + 1
        assert set(per_label.values()) == {3}

    def test_duplicate_labels_rejected(self):
        scripts = ef.builtin_scripts()
        with pytest.raises(ConfigError, match="distinct"):
            ef.synth_gesture_set([scripts[0], scripts[0]], 1, seed=0)

    def test_single_script_rejected(self):
        with pytest.raises(ConfigError, match="at least 2"):
            ef.synth_gesture_set([ef.builtin_scripts()[0]], 1, seed=0)

    def test_bad_count_rejected(self):
        with pytest.raises(ConfigError):
            ef.synth_gesture_set(ef.builtin_scripts(), 0, seed=0)


class TestSceneFiles:
    def test_round_trip(self, tmp_path):
        scene = ef.Scene(
            (ef.Reflector(((0.0, 0.08), (1.0, 0.12)), 0.004),),
            duration=1.86,
            noise_rms=0.01,
            label=ef.GestureLabel("Cylindrical", "Hold"),
        )
        path = tmp_path / "scene.json"
        ef.save_scene(scene, path)
        back = ef.load_scene(path)
        assert back == scene

    def test_malformed_scene_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"duration": 0.12}')
        with pytest.raises(ConfigError, match="malformed"):
            ef.load_scene(path)


class TestSyntheticCorpus:
    def test_in_memory_corpus_counts(self):
        instances = ef.build_synthetic_instances(
            participants=("A", "B"), sessions=2, reps_per_session=1, seed=0
        )
        assert len(instances) == 2 * 2 * 6
        sessions = {(i.meta.participant, i.meta.session) for i in instances}
        assert len(sessions) == 4

    def test_uneven_session_reps(self):
        instances = ef.build_synthetic_instances(
            participants=("A",), sessions=3, reps_per_session=(2, 1, 1), seed=0
        )
        per_class = {}
        for inst in instances:
            per_class[inst.label] = per_class.get(inst.label, 0) + 1
        assert set(per_class.values()) == {4}
