"""Evaluation metrics: log-spectral distance, kurtosis ratio, MFCC error,
and control adherence."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct

from .audio import AudioClip
from .controls import ControlSignal
from .dsp import MelConfig, StftConfig, mel_project, stft

log = logging.getLogger(__name__)

LSD_EPS = 1e-10
DB_SPECTRUM_EPS = 1e-12
KURTOSIS_FLOOR = 1e-6
VOICED_RMS_DB = -60.0
ADHERENCE_EPS_HZ = 1.0


class MetricError(ValueError):
    """Raised when metric preconditions cannot be met."""


def _align(ref: AudioClip, est: AudioClip) -> AudioClip:
    if len(est) == len(ref):
        return est
    log.warning("length mismatch (%d vs %d); est adjusted to match", len(est), len(ref))
    samples = est.samples[: len(ref)]
    if len(samples) < len(ref):
        samples = np.pad(samples, (0, len(ref) - len(samples)))
    return AudioClip(samples, est.sample_rate)


def _power(clip: AudioClip, cfg: StftConfig) -> np.ndarray:
    return stft(clip, cfg).mags ** 2


def lsd_frames(ref: AudioClip, est: AudioClip, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Per-frame RMS difference of power-dB spectra."""
    est = _align(ref, est)
    diff = 10.0 * np.log10(_power(ref, cfg) + LSD_EPS) - 10.0 * np.log10(_power(est, cfg) + LSD_EPS)
    return np.sqrt(np.mean(diff**2, axis=1))


def lsd(ref: AudioClip, est: AudioClip, cfg: StftConfig = StftConfig()) -> float:
    """Log-spectral distance in dB, averaged over frames."""
    return float(np.mean(lsd_frames(ref, est, cfg)))


def _frame_rms_db(clip: AudioClip, cfg: StftConfig) -> np.ndarray:
    """RMS level per STFT frame, same framing/padding as the transform."""
    pad = cfg.n_fft // 2
    padded = np.pad(clip.samples, (pad, pad), mode="reflect")
    n_frames = 1 + len(clip) // cfg.hop
    frames = np.lib.stride_tricks.sliding_window_view(padded, cfg.n_fft)[:: cfg.hop][:n_frames]
    rms = np.sqrt(np.mean(frames**2, axis=1))
    return 20.0 * np.log10(np.maximum(rms, 1e-12))


def _excess_kurtosis_rows(x: np.ndarray) -> np.ndarray:
    centered = x - x.mean(axis=1, keepdims=True)
    var = np.mean(centered**2, axis=1)
    fourth = np.mean(centered**4, axis=1)
    return fourth / np.maximum(var, 1e-30) ** 2 - 3.0


def lkr_pi(ref: AudioClip, proc: AudioClip, cfg: StftConfig = StftConfig()) -> float:
    """Mean log ratio of spectral kurtosis, processed over reference.

    Kurtosis is taken per frame over the dB spectrum so that spectral holes
    (heavy low tail in dB) read as flattening and push the score negative.
    Frames quieter than -60 dBFS in the reference are skipped.
    """
    proc = _align(ref, proc)
    ref_db = 10.0 * np.log10(_power(ref, cfg) + DB_SPECTRUM_EPS)
    proc_db = 10.0 * np.log10(_power(proc, cfg) + DB_SPECTRUM_EPS)
    k_ref = np.maximum(_excess_kurtosis_rows(ref_db), KURTOSIS_FLOOR)
    k_proc = np.maximum(_excess_kurtosis_rows(proc_db), KURTOSIS_FLOOR)
    voiced = _frame_rms_db(ref, cfg)[: k_ref.shape[0]] > VOICED_RMS_DB
    if not voiced.any():
        return 0.0
    return float(np.mean(np.log(k_proc[voiced] / k_ref[voiced])))


def mfcc(clip: AudioClip, n_mfcc: int = 13, cfg: StftConfig = StftConfig(),
         mel_cfg: MelConfig = MelConfig()) -> np.ndarray:
    """First n_mfcc orthonormal DCT-II coefficients of the log-mel grid, per frame."""
    mel = mel_project(stft(clip, cfg), mel_cfg)
    return dct(mel.values, type=2, norm="ortho", axis=1)[:, :n_mfcc]


def mfcc_mse(ref: AudioClip, est: AudioClip, n_mfcc: int = 13,
             cfg: StftConfig = StftConfig(), mel_cfg: MelConfig = MelConfig()) -> float:
    """Mean squared MFCC difference over frames and coefficients."""
    est = _align(ref, est)
    a = mfcc(ref, n_mfcc, cfg, mel_cfg)
    b = mfcc(est, n_mfcc, cfg, mel_cfg)
    return float(np.mean((a - b) ** 2))


def adherence(c_target: ControlSignal, audio: AudioClip, extractor,
              cfg: StftConfig = StftConfig()) -> float:
    """Median per-frame |ln(extracted + 1) - ln(target + 1)| in Hz terms."""
    extracted = extractor(stft(audio, cfg))
    if extracted.feature_names[0] != c_target.feature_names[0]:
        raise MetricError(
            f"extractor yields {extracted.feature_names[0]!r}, "
            f"target carries {c_target.feature_names[0]!r}"
        )
    got = extracted.values[0]
    want = c_target.values[0]
    if abs(len(got) - len(want)) > 2:
        raise MetricError(f"frame counts differ too much: {len(got)} vs {len(want)}")
    n = min(len(got), len(want))
    dist = np.abs(np.log(got[:n] + ADHERENCE_EPS_HZ) - np.log(want[:n] + ADHERENCE_EPS_HZ))
    return float(np.median(dist))


@dataclass
class ClipMetrics:
    clip_id: str
    lsd_db: float
    lkr_pi: float
    mfcc_mse: float
    adherence: float

    def __post_init__(self):
        for name in ("lsd_db", "lkr_pi", "mfcc_mse", "adherence"):
            if not np.isfinite(getattr(self, name)):
                raise MetricError(f"{name} is not finite for clip {self.clip_id}")
        if self.lsd_db < 0:
            raise MetricError(f"lsd_db must be >= 0, got {self.lsd_db}")


@dataclass
class MetricReport:
    per_clip: list[ClipMetrics] = field(default_factory=list)

    @property
    def lsd_db_mean(self) -> float:
        return float(np.mean([c.lsd_db for c in self.per_clip]))

    @property
    def lsd_db_std(self) -> float:
        return float(np.std([c.lsd_db for c in self.per_clip]))

    @property
    def lkr_pi_mean(self) -> float:
        return float(np.mean([c.lkr_pi for c in self.per_clip]))

    @property
    def mfcc_mse_mean(self) -> float:
        return float(np.mean([c.mfcc_mse for c in self.per_clip]))

    @property
    def adherence_median(self) -> float:
        return float(np.median([c.adherence for c in self.per_clip]))

    def aggregate_row(self) -> dict:
        if not self.per_clip:
            raise MetricError("report holds no clips")
        return {
            "clip_id": "aggregate",
            "lsd_db": self.lsd_db_mean,
            "lsd_db_std": self.lsd_db_std,
            "lkr_pi": self.lkr_pi_mean,
            "mfcc_mse": self.mfcc_mse_mean,
            "adherence": self.adherence_median,
        }
