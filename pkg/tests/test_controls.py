import io
import math
from statistics import NormalDist

import numpy as np
import pytest

from contourflow import controls, dsp
from contourflow.audio import synthesized_clip
from contourflow.controls import ControlSignal, DscParams

SR = 44100
CFG = dsp.StftConfig()


def noise_clip(rng, seconds=1.0, scale=0.5, sr=SR):
    return synthesized_clip(scale * rng.standard_normal(int(seconds * sr)), sr)


def brickwall(clip, cutoff_hz):
    spec = np.fft.rfft(clip.samples)
    freqs = np.fft.rfftfreq(len(clip), 1.0 / clip.sample_rate)
    spec[freqs > cutoff_hz] = 0.0
    return synthesized_clip(np.fft.irfft(spec, n=len(clip)), clip.sample_rate)


def test_dsc_params_validation():
    with pytest.raises(controls.ControlError):
        DscParams(q=0.0)
    with pytest.raises(controls.ControlError):
        DscParams(gamma=1.0)
    with pytest.raises(controls.ControlError):
        DscParams(m_f=4)
    assert abs(DscParams().q - 10.0**-1.6) < 1e-15


def test_control_signal_validation():
    with pytest.raises(controls.ControlError):
        ControlSignal(np.zeros((2, 5)), ("a",), SR, 512)
    with pytest.raises(controls.ControlError):
        ControlSignal(np.array([[-1.0]]), ("a",), SR, 512)
    with pytest.raises(controls.ControlError):
        ControlSignal(np.array([[30000.0]]), ("a",), SR, 512)
    c = ControlSignal(np.array([0.0, 100.0]), ("a",), SR, 512)
    assert c.n_frames == 2
    assert np.allclose(c.frame_times(), [0.0, 512 / SR])
    with pytest.raises(controls.ControlError):
        c.feature("missing")


def test_dsc_zero_spectrogram():
    spec = dsp.Spectrogram(np.zeros((40, CFG.n_bins)), config=CFG, sample_rate=SR)
    dsc = controls.compute_dsc(spec)
    assert np.all(dsc.values == 0.0)


def test_dsc_brickwall_4k():
    rng = np.random.default_rng(21)
    clip = brickwall(noise_clip(rng, 1.5), 4000.0)
    dsc = controls.compute_dsc(dsp.stft(clip, CFG))
    median_bin = np.median(dsc.feature("dsc_hz")) * CFG.n_fft / SR
    assert abs(median_bin - 186) <= 3


def test_dsc_fullband_noise_hits_top():
    rng = np.random.default_rng(22)
    clip = noise_clip(rng, 1.0, scale=0.9)
    dsc = controls.compute_dsc(dsp.stft(clip, CFG))
    top_hz = (CFG.n_bins - 1) * SR / CFG.n_fft
    frac = np.mean(dsc.feature("dsc_hz") >= top_hz - 1e-9)
    assert frac >= 0.95


def test_dsc_monotone_in_bandwidth():
    rng = np.random.default_rng(23)
    base = noise_clip(rng, 1.0)
    meds = []
    for fc in (3000.0, 6000.0, 12000.0):
        dsc = controls.compute_dsc(dsp.stft(brickwall(base, fc), CFG))
        meds.append(np.median(dsc.feature("dsc_hz")))
    assert meds[0] < meds[1] < meds[2]


def test_dsc_gain_invariance():
    rng = np.random.default_rng(24)
    clip = brickwall(noise_clip(rng, 1.0, scale=0.3), 8000.0)
    louder = synthesized_clip(clip.samples * 2.0, SR)
    a = np.median(controls.compute_dsc(dsp.stft(clip, CFG)).feature("dsc_hz"))
    b = np.median(controls.compute_dsc(dsp.stft(louder, CFG)).feature("dsc_hz"))
    assert abs(a - b) * CFG.n_fft / SR <= 1.0


def test_dsc_stays_low_in_quiet_region_where_centroid_does_not():
    rng = np.random.default_rng(25)
    loud = 0.5 * rng.standard_normal(SR)
    quiet = 1e-3 * rng.standard_normal(SR)
    clip = synthesized_clip(np.concatenate([loud, quiet]), SR)
    spec = dsp.stft(clip, CFG)
    dsc = controls.compute_dsc(spec).feature("dsc_hz")
    cen = controls.compute_centroid(spec).feature("centroid_hz")
    n_loud = SR // CFG.hop
    guard = 8  # frames straddling the transition
    dsc_loud = dsc[: n_loud - guard]
    dsc_quiet = dsc[n_loud + guard :]
    cen_quiet = cen[n_loud + guard :]
    assert dsc_quiet.max() <= dsc_loud.min()
    assert cen_quiet.min() > dsc_quiet.max()


def reflect(i, n):
    # half-sample symmetric mirror, same rule as np.pad mode='symmetric'
    while i < 0 or i >= n:
        if i < 0:
            i = -1 - i
        if i >= n:
            i = 2 * n - 1 - i
    return i


def dsc_oracle(mags, sr, n_fft, hop, p):
    n_frames, n_bins = mags.shape
    peak = mags.max()
    norm = mags / peak if peak > 0 else mags
    mask = np.zeros_like(norm)
    for f in range(n_frames):
        for k in range(n_bins):
            mask[f, k] = 1.0 if norm[f, k] > p.q else 0.0
    radius = int(np.ceil(4.0 * p.sigma_f))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (offsets / p.sigma_f) ** 2)
    kernel /= kernel.sum()
    shift = p.sigma_f * NormalDist().inv_cdf(1.0 - p.gamma)
    bins = np.zeros(n_frames)
    for f in range(n_frames):
        smoothed = np.zeros(n_bins)
        for k in range(n_bins):
            acc = 0.0
            for j in range(kernel.size):
                acc += mask[f, reflect(k - radius + j, n_bins)] * kernel[j]
            smoothed[k] = acc
        first = None
        for k in range(n_bins):
            if smoothed[k] < p.gamma:
                first = k
                break
        if first is None:
            bins[f] = float(n_bins - 1)
        elif first == 0:
            bins[f] = 0.0
        else:
            bins[f] = min(max(float(first) - shift, 0.0), float(n_bins - 1))
    half = p.m_f // 2
    filtered = np.zeros(n_frames)
    for f in range(n_frames):
        window = [bins[reflect(f - half + j, n_frames)] for j in range(p.m_f)]
        filtered[f] = sorted(window)[half]
    return filtered * sr / n_fft


def test_dsc_matches_brute_force_oracle():
    rng = np.random.default_rng(26)
    cfg = dsp.StftConfig(n_fft=256, hop=64)
    params = DscParams()
    for _ in range(100):
        n_frames = int(rng.integers(4, 10))
        mags = rng.random((n_frames, cfg.n_bins))
        if rng.random() < 0.7:
            cutoff = int(rng.integers(10, cfg.n_bins - 10))
            mags[:, cutoff:] *= 1e-3
        if rng.random() < 0.05:
            mags[:] = 0.0
        spec = dsp.Spectrogram(mags, config=cfg, sample_rate=SR)
        got = controls.compute_dsc(spec, params).feature("dsc_hz")
        want = dsc_oracle(mags, SR, cfg.n_fft, cfg.hop, params)
        assert np.array_equal(got, want)


def test_centroid_single_bin_and_silence():
    mags = np.zeros((3, CFG.n_bins))
    mags[0, 100] = 0.7
    mags[1, 100] = 0.7
    spec = dsp.Spectrogram(mags, config=CFG, sample_rate=SR)
    cen = controls.compute_centroid(spec).feature("centroid_hz")
    f_100 = 100 * SR / CFG.n_fft
    assert cen[0] == cen[1] == f_100
    assert cen[2] == 0.0


def test_centroid_flat_spectrum():
    mags = np.ones((2, CFG.n_bins))
    spec = dsp.Spectrogram(mags, config=CFG, sample_rate=SR)
    cen = controls.compute_centroid(spec).feature("centroid_hz")
    bin_hz = SR / CFG.n_fft
    assert abs(cen[0] - SR / 4.0) <= bin_hz


def test_rolloff_tone_flat_silence():
    mags = np.zeros((3, CFG.n_bins))
    mags[0, 200] = 1.0
    mags[1, :] = 1.0
    spec = dsp.Spectrogram(mags, config=CFG, sample_rate=SR)
    roll = controls.compute_rolloff(spec).feature("rolloff_hz")
    assert roll[0] == 200 * SR / CFG.n_fft
    want_bin = math.ceil(0.85 * CFG.n_bins) - 1
    assert roll[1] == want_bin * SR / CFG.n_fft
    assert roll[2] == 0.0
    with pytest.raises(controls.ControlError):
        controls.compute_rolloff(spec, pct=1.0)


def test_scale_control():
    c = ControlSignal(np.array([8000.0, 15000.0]), ("dsc_hz",), SR, 512)
    assert np.array_equal(controls.scale_control(c, 1.0).values, c.values)
    doubled = controls.scale_control(c, 2.0).feature("dsc_hz")
    assert doubled[0] == 16000.0
    assert doubled[1] == 22050.0
    with pytest.raises(controls.ControlError):
        controls.scale_control(c, 0.0)


def test_resample_control():
    c = ControlSignal(np.linspace(0, 1000, 11), ("dsc_hz",), SR, 512)
    longer = controls.resample_control(c, 21)
    assert longer.n_frames == 21
    assert longer.feature("dsc_hz")[0] == 0.0
    assert longer.feature("dsc_hz")[-1] == 1000.0
    same = controls.resample_control(c, 11)
    assert np.array_equal(same.values, c.values)


def test_control_csv_roundtrip_exact():
    rng = np.random.default_rng(30)
    values = np.vstack([rng.random(17) * 22050, rng.random(17) * 22050])
    c = ControlSignal(values, ("dsc_hz", "centroid_hz"), SR, 512)
    text = controls.control_csv_text(c)
    back = controls.read_control_csv(io.StringIO(text))
    assert back.feature_names == c.feature_names
    assert back.sample_rate == SR and back.hop == 512
    assert np.array_equal(back.values, c.values)
    assert text.splitlines()[0] == f"# sample_rate={SR} hop=512"
    assert text.splitlines()[1] == "frame,dsc_hz,centroid_hz"


def test_control_csv_rejects_malformed():
    with pytest.raises(controls.ControlError):
        controls.read_control_csv(io.StringIO("frame,dsc_hz\n0,1.0\n"))
    with pytest.raises(controls.ControlError):
        controls.read_control_csv(io.StringIO("# sample_rate=44100 hop=512\n"))
    with pytest.raises(controls.ControlError):
        controls.read_control_csv(
            io.StringIO("# sample_rate=44100 hop=512\nframe,dsc_hz\n0,not_a_number\n")
        )
    with pytest.raises(controls.ControlError):
        controls.read_control_csv(
            io.StringIO("# sample_rate=44100 hop=512\nframe,dsc_hz\n0,1.0,2.0\n")
        )
