import numpy as np
import pytest

from coughscreen.audio.dsp import AudioBuffer, PATCH_SAMPLES
from coughscreen.augment import (MaskConfig, NoiseBank, NoiseMixConfig,
                                 mix_noise, random_crop_2s, spec_augment)
from coughscreen.audio.wavio import write_wav


def test_crop_long_clip_is_contiguous_window():
    rng = np.random.default_rng(0)
    x = np.arange(50000, dtype=np.float64) / 50000
    out = random_crop_2s(AudioBuffer(x, 16000), rng)
    assert len(out.samples) == PATCH_SAMPLES
    # the crop is a verbatim slice of the source
    start = int(round(out.samples[0] * 50000))
    assert np.array_equal(out.samples, x[start:start + PATCH_SAMPLES])


def test_crop_short_clip_zero_pads_right():
    rng = np.random.default_rng(1)
    x = np.ones(10000)
    out = random_crop_2s(AudioBuffer(x, 16000), rng)
    assert len(out.samples) == PATCH_SAMPLES
    assert np.all(out.samples[:10000] == 1)
    assert np.all(out.samples[10000:] == 0)


def test_crop_exact_length_is_identity():
    rng = np.random.default_rng(2)
    x = np.random.default_rng(3).uniform(-1, 1, PATCH_SAMPLES)
    out = random_crop_2s(AudioBuffer(x, 16000), rng)
    assert np.array_equal(out.samples, x)


def test_crop_randomizes_offsets():
    rng = np.random.default_rng(4)
    x = np.arange(64000, dtype=np.float64)
    starts = {int(random_crop_2s(AudioBuffer(x, 16000), rng).samples[0])
              for _ in range(20)}
    assert len(starts) > 1


def test_mix_noise_alpha_range_and_clip():
    rng = np.random.default_rng(5)
    clean = AudioBuffer(np.full(1000, 0.9), 16000)
    noise = AudioBuffer(np.full(1000, 0.9), 16000)
    cfg = NoiseMixConfig(factor_min=0.4, factor_max=0.75)
    out = mix_noise(clean, noise, rng, cfg)
    assert out.samples.max() <= 1.0
    assert out.samples.min() >= -1.0
    # all samples saturate: 0.9 + alpha*0.9 > 1
    assert np.all(out.samples == 1.0)


def test_mix_noise_tiles_short_noise():
    rng = np.random.default_rng(6)
    clean = AudioBuffer(np.zeros(1000), 16000)
    noise = AudioBuffer(np.array([0.1, -0.1]), 16000)
    out = mix_noise(clean, noise, rng, NoiseMixConfig(0.5, 0.5))
    assert len(out.samples) == 1000
    assert np.any(out.samples != 0)


def test_mix_noise_crops_long_noise():
    rng = np.random.default_rng(7)
    clean = AudioBuffer(np.zeros(100), 16000)
    noise = AudioBuffer(np.random.default_rng(8).uniform(-1, 1, 1000),
                        16000)
    out = mix_noise(clean, noise, rng, NoiseMixConfig(0.5, 0.5))
    assert len(out.samples) == 100


def test_spec_augment_fill_is_patch_mean():
    rng = np.random.default_rng(9)
    patch = np.random.default_rng(10).uniform(-1, 1, (64, 201))
    fill = patch.mean()
    cfg = MaskConfig(n_time_masks=2, max_time_width=20,
                     n_freq_masks=2, max_freq_width=8)
    out = spec_augment(patch, cfg, rng)
    assert out.shape == patch.shape
    changed = out != patch
    if changed.any():
        assert np.allclose(out[changed], fill)


def test_spec_augment_mask_extent_bounds():
    rng = np.random.default_rng(11)
    cfg = MaskConfig(2, 20, 2, 8)
    for _ in range(30):
        patch = np.random.default_rng(12).uniform(0, 1, (64, 201))
        out = spec_augment(patch, cfg, rng)
        col_masked = np.all(out == out[0:1, :], axis=0)
        row_masked = np.all(out == out[:, 0:1], axis=1)
        # at most 2 masks of width <= 20 columns / <= 8 rows
        assert col_masked.sum() <= 40
        assert row_masked.sum() <= 16


def test_spec_augment_does_not_mutate_input():
    rng = np.random.default_rng(13)
    patch = np.random.default_rng(14).uniform(0, 1, (64, 201))
    before = patch.copy()
    spec_augment(patch, MaskConfig(), rng)
    assert np.array_equal(patch, before)


def test_spec_augment_deterministic_given_seed():
    patch = np.random.default_rng(15).uniform(0, 1, (64, 201))
    a = spec_augment(patch, MaskConfig(), np.random.default_rng(42))
    b = spec_augment(patch, MaskConfig(), np.random.default_rng(42))
    assert np.array_equal(a, b)


def test_noise_bank_loads_and_caches(tmp_path):
    for i in range(3):
        write_wav(tmp_path / f"n{i}.wav",
                  np.random.default_rng(i).uniform(-0.5, 0.5, 8000), 16000)
    bank = NoiseBank(tmp_path)
    rng = np.random.default_rng(16)
    seen = {id(bank.sample(rng)) for _ in range(12)}
    assert len(seen) <= 3  # cached buffers are reused


def test_noise_bank_rejects_empty_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        NoiseBank(tmp_path)


def test_noise_mix_config_validation():
    with pytest.raises(ValueError):
        NoiseMixConfig(factor_min=0.8, factor_max=0.4)
    with pytest.raises(ValueError):
        NoiseMixConfig(apply_probability=1.5)
