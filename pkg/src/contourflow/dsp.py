"""Shared signal-processing kernels: STFT, mel projection, inversion, smoothing.

All functions are pure; nothing here holds mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import AudioClip, synthesized_clip

LOG_FLOOR = 1e-5  # linear-magnitude floor applied before taking logs of mel values


class DspError(ValueError):
    """Raised when an operation's preconditions are violated."""


@dataclass(frozen=True)
class StftConfig:
    n_fft: int = 2048
    hop: int = 512

    def __post_init__(self):
        if self.n_fft <= 0 or (self.n_fft & (self.n_fft - 1)) != 0:
            raise DspError(f"n_fft must be a power of two, got {self.n_fft}")
        if not 0 < self.hop <= self.n_fft:
            raise DspError(f"hop must be in (0, n_fft], got {self.hop}")

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1


@dataclass(frozen=True)
class MelConfig:
    n_bands: int = 128
    f_min: float = 0.0
    f_max: float = 22050.0

    def __post_init__(self):
        if self.n_bands <= 0:
            raise DspError(f"n_bands must be positive, got {self.n_bands}")
        if not 0 <= self.f_min < self.f_max:
            raise DspError(f"need 0 <= f_min < f_max, got [{self.f_min}, {self.f_max}]")


@dataclass
class Spectrogram:
    """Frame-major magnitude (and optionally phase) grid, shape (frames, bins)."""

    mags: np.ndarray
    config: StftConfig
    sample_rate: int
    phases: np.ndarray | None = None

    def __post_init__(self):
        self.mags = np.asarray(self.mags, dtype=np.float64)
        if self.mags.ndim != 2 or self.mags.shape[1] != self.config.n_bins:
            raise DspError(
                f"mags shape {self.mags.shape} inconsistent with n_fft={self.config.n_fft}"
            )
        if not np.all(np.isfinite(self.mags)) or np.any(self.mags < 0):
            raise DspError("magnitudes must be finite and nonnegative")
        if self.phases is not None:
            self.phases = np.asarray(self.phases, dtype=np.float64)
            if self.phases.shape != self.mags.shape:
                raise DspError("phase grid shape differs from magnitude grid")

    @property
    def n_frames(self) -> int:
        return self.mags.shape[0]

    @property
    def n_bins(self) -> int:
        return self.mags.shape[1]

    @property
    def bin_hz(self) -> float:
        return self.sample_rate / self.config.n_fft

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.bin_hz

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0


@dataclass
class MelSpectrogram:
    """Log-magnitude mel grid, shape (frames, bands)."""

    values: np.ndarray
    mel_config: MelConfig
    stft_config: StftConfig
    sample_rate: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != self.mel_config.n_bands:
            raise DspError(f"values shape {self.values.shape} inconsistent with mel config")
        if not np.all(np.isfinite(self.values)):
            raise DspError("mel values must be finite")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bands(self) -> int:
        return self.values.shape[1]


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window (COLA at hop = n/4)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft(clip: AudioClip, cfg: StftConfig = StftConfig()) -> Spectrogram:
    """STFT with reflect padding of n_fft/2 on each side.

    Frame count is 1 + floor(len / hop).
    """
    if len(clip) == 0:
        raise DspError("cannot compute STFT of an empty clip")
    pad = cfg.n_fft // 2
    padded = np.pad(clip.samples, (pad, pad), mode="reflect")
    n_frames = 1 + (len(padded) - cfg.n_fft) // cfg.hop
    frames = np.lib.stride_tricks.sliding_window_view(padded, cfg.n_fft)[:: cfg.hop][:n_frames]
    spec = np.fft.rfft(frames * hann_window(cfg.n_fft), axis=1)
    return Spectrogram(
        mags=np.abs(spec), phases=np.angle(spec), config=cfg, sample_rate=clip.sample_rate
    )


def istft(spec: Spectrogram, length: int | None = None) -> AudioClip:
    """Weighted overlap-add inverse of :func:`stft`; requires phases."""
    if spec.phases is None:
        raise DspError("istft requires a spectrogram with phases")
    cfg = spec.config
    window = hann_window(cfg.n_fft)
    frames = np.fft.irfft(spec.mags * np.exp(1j * spec.phases), n=cfg.n_fft, axis=1)
    total = (spec.n_frames - 1) * cfg.hop + cfg.n_fft
    out = np.zeros(total)
    weight = np.zeros(total)
    for i in range(spec.n_frames):
        start = i * cfg.hop
        out[start : start + cfg.n_fft] += frames[i] * window
        weight[start : start + cfg.n_fft] += window**2
    out /= np.maximum(weight, 1e-12)
    pad = cfg.n_fft // 2
    if length is None:
        length = total - 2 * pad
    return synthesized_clip(out[pad : pad + length], spec.sample_rate)


def mel_frequency(hz) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel) -> np.ndarray:
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_centers(mel_cfg: MelConfig) -> np.ndarray:
    """Center frequencies (Hz) of the triangular mel bands."""
    edges = np.linspace(mel_frequency(mel_cfg.f_min), mel_frequency(mel_cfg.f_max), mel_cfg.n_bands + 2)
    return mel_to_hz(edges)[1:-1]


def mel_filterbank(stft_cfg: StftConfig, mel_cfg: MelConfig, sample_rate: int) -> np.ndarray:
    """Triangular mel filterbank, shape (bands, bins), peak weight 1."""
    if mel_cfg.f_max > sample_rate / 2.0 + 1e-9:
        raise DspError(f"f_max={mel_cfg.f_max} exceeds Nyquist {sample_rate / 2.0}")
    edges_hz = mel_to_hz(
        np.linspace(mel_frequency(mel_cfg.f_min), mel_frequency(mel_cfg.f_max), mel_cfg.n_bands + 2)
    )
    fft_freqs = np.fft.rfftfreq(stft_cfg.n_fft, 1.0 / sample_rate)
    left = edges_hz[:-2, None]
    center = edges_hz[1:-1, None]
    right = edges_hz[2:, None]
    rising = (fft_freqs[None, :] - left) / np.maximum(center - left, 1e-12)
    falling = (right - fft_freqs[None, :]) / np.maximum(right - center, 1e-12)
    bank = np.maximum(0.0, np.minimum(rising, falling))
    if np.any(bank.sum(axis=1) <= 0):
        raise DspError("mel filterbank has an empty band; increase n_fft or reduce n_bands")
    return bank


def mel_project(spec: Spectrogram, mel_cfg: MelConfig = MelConfig()) -> MelSpectrogram:
    """Project linear magnitudes onto log mel bands."""
    bank = mel_filterbank(spec.config, mel_cfg, spec.sample_rate)
    values = np.log(np.maximum(spec.mags @ bank.T, LOG_FLOOR))
    return MelSpectrogram(
        values=values, mel_config=mel_cfg, stft_config=spec.config, sample_rate=spec.sample_rate
    )


def _nnls_columns(bank: np.ndarray, targets: np.ndarray, iters: int = 300) -> np.ndarray:
    """Nonnegative least squares min ||bank @ X - targets||, solved jointly for
    all columns by accelerated projected gradient."""
    lipschitz = float(np.linalg.norm(bank, 2)) ** 2
    gram = bank.T @ bank
    rhs = bank.T @ targets
    x = np.maximum(np.linalg.pinv(bank) @ targets, 0.0)
    z = x
    t_k = 1.0
    for _ in range(iters):
        x_next = np.maximum(z - (gram @ z - rhs) / lipschitz, 0.0)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
        z = x_next + ((t_k - 1.0) / t_next) * (x_next - x)
        x, t_k = x_next, t_next
    return x


def mel_invert(
    mel: MelSpectrogram,
    cfg: StftConfig | None = None,
    iters: int = 60,
    nnls_iters: int = 300,
) -> tuple[AudioClip, Spectrogram]:
    """Invert a log-mel grid to audio: NNLS magnitude recovery + Griffin-Lim phase.

    With ``iters=0`` the phase stays zero. Returns both the waveform and the
    final complex spectrogram (phases included) so callers can splice bands.
    """
    if iters < 0:
        raise DspError(f"Griffin-Lim iteration count must be >= 0, got {iters}")
    cfg = cfg or mel.stft_config
    bank = mel_filterbank(cfg, mel.mel_config, mel.sample_rate)
    linear = np.exp(mel.values)  # (frames, bands)
    mags = _nnls_columns(bank, linear.T, iters=nnls_iters).T  # (frames, bins)
    mags = np.maximum(mags, 0.0)
    return griffin_lim(mags, cfg, mel.sample_rate, iters=iters)


def griffin_lim(
    mags: np.ndarray, cfg: StftConfig, sample_rate: int, iters: int = 60
) -> tuple[AudioClip, Spectrogram]:
    """Phase reconstruction for a magnitude grid; zero-phase init."""
    length = (mags.shape[0] - 1) * cfg.hop
    phases = np.zeros_like(mags)
    spec = Spectrogram(mags=mags, phases=phases, config=cfg, sample_rate=sample_rate)
    for _ in range(iters):
        clip = istft(spec, length=length)
        reproj = stft(clip, cfg)
        spec = Spectrogram(
            mags=mags, phases=reproj.phases[: mags.shape[0]], config=cfg, sample_rate=sample_rate
        )
    return istft(spec, length=length), spec


def gaussian_filter_1d(x: np.ndarray, sigma: float) -> np.ndarray:
    """Convolve with a truncated normalized Gaussian (radius ceil(4*sigma)).

    The input is mirrored at its edges, which keeps the mean exactly. Works on
    the last axis of 1-D or 2-D input. sigma=0 is the identity.
    """
    if sigma < 0:
        raise DspError(f"sigma must be nonnegative, got {sigma}")
    x = np.asarray(x, dtype=np.float64)
    if sigma == 0:
        return x.copy()
    radius = int(np.ceil(4.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel /= kernel.sum()
    pad = [(0, 0)] * (x.ndim - 1) + [(radius, radius)]
    padded = np.pad(x, pad, mode="symmetric")
    windows = np.lib.stride_tricks.sliding_window_view(padded, kernel.size, axis=-1)
    return windows @ kernel[::-1]


def median_filter_1d(x: np.ndarray, window: int) -> np.ndarray:
    """Sliding median over an odd window, edges mirrored. window=1 is identity."""
    if window < 1 or window % 2 == 0:
        raise DspError(f"window must be odd and >= 1, got {window}")
    x = np.asarray(x, dtype=np.float64)
    if window == 1:
        return x.copy()
    half = window // 2
    padded = np.pad(x, (half, half), mode="symmetric")
    return np.median(np.lib.stride_tricks.sliding_window_view(padded, window), axis=-1)
