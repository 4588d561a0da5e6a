"""Mono audio clips and WAV file I/O."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile

log = logging.getLogger(__name__)


class AudioError(ValueError):
    """Raised for malformed audio data or unreadable WAV files."""


@dataclass
class AudioClip:
    """A mono waveform with samples in [-1, 1].

    ``n_clipped`` counts samples that had to be clamped when the clip was
    produced by a synthesis or filtering operation.
    """

    samples: np.ndarray
    sample_rate: int = 44100
    n_clipped: int = field(default=0, compare=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise AudioError(f"expected mono 1-D samples, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise AudioError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise AudioError("samples contain non-finite values")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0

    def rms_db(self) -> float:
        rms = float(np.sqrt(np.mean(self.samples**2))) if len(self) else 0.0
        return 20.0 * np.log10(max(rms, 1e-12))


def clamp_to_unit(samples: np.ndarray) -> tuple[np.ndarray, int]:
    """Clamp samples to [-1, 1], returning the clipped array and clip count."""
    over = np.abs(samples) > 1.0
    n = int(np.count_nonzero(over))
    if n:
        samples = np.clip(samples, -1.0, 1.0)
    return samples, n


def synthesized_clip(samples: np.ndarray, sample_rate: int) -> AudioClip:
    """Wrap raw synthesis output as a clip, clamping and reporting overs."""
    samples, n = clamp_to_unit(np.asarray(samples, dtype=np.float64))
    if n:
        log.debug("clamped %d samples to [-1, 1]", n)
    return AudioClip(samples, sample_rate, n_clipped=n)


def read_wav(path) -> AudioClip:
    """Read a PCM16 or float32 WAV file; stereo is downmixed by averaging."""
    try:
        sr, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise AudioError(f"cannot read WAV file {path}: {exc}") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise AudioError(f"unsupported WAV sample format {data.dtype}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    elif samples.ndim != 1:
        raise AudioError(f"unsupported WAV channel layout with shape {data.shape}")
    samples, _ = clamp_to_unit(samples)
    return AudioClip(samples, int(sr))


def write_wav(path, clip: AudioClip, subtype: str = "pcm16") -> None:
    """Write a clip as PCM16 (default) or 32-bit float WAV."""
    if subtype == "pcm16":
        data = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype(np.int16)
    elif subtype == "float32":
        data = clip.samples.astype(np.float32)
    else:
        raise AudioError(f"unsupported WAV subtype {subtype!r}")
    wavfile.write(path, clip.sample_rate, data)


def wav_bytes(clip: AudioClip, subtype: str = "pcm16") -> bytes:
    import io

    buf = io.BytesIO()
    write_wav(buf, clip, subtype=subtype)
    return buf.getvalue()


def read_wav_bytes(payload: bytes) -> AudioClip:
    import io

    return read_wav(io.BytesIO(payload))
