"""Deterministic synthetic audio corpus: five generator families with an
8:1:1 split, reproducible per (seed, index) so clips can be built lazily."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, write_wav

GENERATORS = ("harmonic_stack", "filtered_noise", "am_fm_tone", "chirp", "percussive")
SPLITS = ("train", "val", "test")


class CorpusError(ValueError):
    """Raised for invalid corpus configuration or manifests."""


@dataclass(frozen=True)
class CorpusConfig:
    n_clips: int
    clip_seconds: float = 1.5
    sample_rate: int = 44100
    seed: int = 0
    mix: tuple = (1.0, 1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.n_clips < 1:
            raise CorpusError(f"n_clips must be >= 1, got {self.n_clips}")
        if self.clip_seconds <= 0:
            raise CorpusError(f"clip_seconds must be positive, got {self.clip_seconds}")
        if self.sample_rate <= 0:
            raise CorpusError(f"sample_rate must be positive, got {self.sample_rate}")
        weights = np.asarray(self.mix, dtype=np.float64)
        if weights.shape != (len(GENERATORS),) or np.any(weights < 0) or weights.sum() == 0:
            raise CorpusError(f"mix must be {len(GENERATORS)} nonnegative weights, not all zero")

    @property
    def n_samples(self) -> int:
        return int(round(self.clip_seconds * self.sample_rate))


@dataclass
class CorpusClip:
    clip_id: str
    split: str
    generator: str
    params: dict
    audio: AudioClip


def split_for_index(index: int) -> str:
    rem = index % 10
    if rem < 8:
        return "train"
    return "val" if rem == 8 else "test"


def _fade(x: np.ndarray, sr: int, ms: float = 10.0) -> np.ndarray:
    n = min(int(sr * ms / 1000.0), len(x) // 2)
    if n > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(n) / n)
        x[:n] *= ramp
        x[-n:] *= ramp[::-1]
    return x


def harmonic_stack(rng, n: int, sr: int, f0: float | None = None,
                   n_partials: int | None = None) -> tuple[np.ndarray, dict]:
    """Stack of exact harmonics with power-law amplitude decay; the partial
    count reaches near Nyquist by default so the clip is genuinely wideband."""
    f0 = float(rng.uniform(80.0, 500.0)) if f0 is None else f0
    if n_partials is None:
        n_partials = int(0.95 * (sr / 2.0) / f0)
    decay = float(rng.uniform(0.5, 1.2))
    t = np.arange(n) / sr
    k = np.arange(1, n_partials + 1)
    amps = k.astype(np.float64) ** -decay
    phases = rng.uniform(0, 2 * np.pi, n_partials)
    x = (amps[:, None] * np.sin(2 * np.pi * f0 * k[:, None] * t + phases[:, None])).sum(axis=0)
    return _fade(x, sr), {"f0": f0, "n_partials": n_partials, "decay": decay}


def filtered_noise(rng, n: int, sr: int) -> tuple[np.ndarray, dict]:
    """White noise with a random spectral tilt, shaped in the FFT domain."""
    tilt = float(rng.uniform(-6.0, 3.0))  # dB per octave relative to 1 kHz
    x = rng.standard_normal(n)
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, 1.0 / sr)
    gain = np.maximum(freqs, 20.0) / 1000.0
    spec *= gain ** (tilt / (20.0 * np.log10(2.0)))
    x = np.fft.irfft(spec, n=n)
    return _fade(x, sr), {"tilt_db_per_oct": tilt}


def am_fm_tone(rng, n: int, sr: int) -> tuple[np.ndarray, dict]:
    """Vibrato + tremolo tone whose harmonics reach past 10 kHz."""
    carrier = float(rng.uniform(800.0, 5000.0))
    fm_rate = float(rng.uniform(2.0, 8.0))
    fm_dev = float(rng.uniform(5.0, 40.0))
    am_rate = float(rng.uniform(1.0, 6.0))
    am_depth = float(rng.uniform(0.2, 0.6))
    n_partials = max(2, int(0.9 * (sr / 2.0) / carrier))
    t = np.arange(n) / sr
    inst_phase = 2 * np.pi * carrier * t + (fm_dev / fm_rate) * np.sin(2 * np.pi * fm_rate * t)
    k = np.arange(1, n_partials + 1)
    x = ((k[:, None] ** -1.0) * np.sin(k[:, None] * inst_phase)).sum(axis=0)
    x *= 1.0 - am_depth * 0.5 * (1.0 + np.sin(2 * np.pi * am_rate * t))
    params = {
        "carrier": carrier, "fm_rate": fm_rate, "fm_dev": fm_dev,
        "am_rate": am_rate, "am_depth": am_depth, "n_partials": n_partials,
    }
    return _fade(x, sr), params


def chirp(rng, n: int, sr: int) -> tuple[np.ndarray, dict]:
    """Linear sweep from a low start into the 12-20 kHz range."""
    f_start = float(rng.uniform(200.0, 2000.0))
    f_end = float(rng.uniform(12000.0, 20000.0))
    t = np.arange(n) / sr
    seconds = n / sr
    phase = 2 * np.pi * (f_start * t + 0.5 * (f_end - f_start) / seconds * t**2)
    x = np.sin(phase)
    return _fade(x, sr), {"f_start": f_start, "f_end": f_end}


def percussive(rng, n: int, sr: int) -> tuple[np.ndarray, dict]:
    """Sparse decaying broadband bursts, each with a tonal ping."""
    n_bursts = int(rng.integers(3, 9))
    x = np.zeros(n)
    onsets = np.sort(rng.integers(0, max(1, n - sr // 10), n_bursts))
    decays_ms = rng.uniform(5.0, 60.0, n_bursts)
    pings = rng.uniform(2000.0, 10000.0, n_bursts)
    for onset, decay_ms, ping in zip(onsets, decays_ms, pings):
        length = min(int(sr * decay_ms * 6 / 1000.0), n - onset)
        tt = np.arange(length) / sr
        env = np.exp(-tt / (decay_ms / 1000.0))
        burst = env * (rng.standard_normal(length) + 0.5 * np.sin(2 * np.pi * ping * tt))
        x[onset : onset + length] += burst
    if not x.any():
        x[0] = 1.0
    return _fade(x, sr), {
        "n_bursts": n_bursts,
        "onsets": [int(o) for o in onsets],
        "decays_ms": [float(d) for d in decays_ms],
        "pings_hz": [float(p) for p in pings],
    }


_GEN_FUNCS = {
    "harmonic_stack": harmonic_stack,
    "filtered_noise": filtered_noise,
    "am_fm_tone": am_fm_tone,
    "chirp": chirp,
    "percussive": percussive,
}


def generate_clip(config: CorpusConfig, index: int) -> CorpusClip:
    """Build clip `index`; pure in (config, index), so parallel-safe."""
    if not 0 <= index < config.n_clips:
        raise CorpusError(f"index {index} outside corpus of {config.n_clips}")
    rng = np.random.default_rng([config.seed, index])
    probs = np.asarray(config.mix, dtype=np.float64)
    probs = probs / probs.sum()
    kind = GENERATORS[int(rng.choice(len(GENERATORS), p=probs))]
    samples, params = _GEN_FUNCS[kind](rng, config.n_samples, config.sample_rate)
    peak = np.abs(samples).max()
    if peak > 0:
        samples = samples * (0.9 / peak)
    clip = AudioClip(samples, config.sample_rate)
    return CorpusClip(
        clip_id=f"clip_{index:05d}",
        split=split_for_index(index),
        generator=kind,
        params=params,
        audio=clip,
    )


def generate(config: CorpusConfig) -> list[CorpusClip]:
    return [generate_clip(config, i) for i in range(config.n_clips)]


def split_indices(config: CorpusConfig, split: str) -> list[int]:
    if split not in SPLITS:
        raise CorpusError(f"unknown split {split!r}")
    return [i for i in range(config.n_clips) if split_for_index(i) == split]


def write_corpus(config: CorpusConfig, out_dir) -> Path:
    """Write every clip as WAV plus a JSON manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for item in generate(config):
        filename = f"{item.clip_id}.wav"
        write_wav(out_dir / filename, item.audio)
        entries.append(
            {
                "id": item.clip_id,
                "split": item.split,
                "generator": item.generator,
                "params": item.params,
                "file": filename,
            }
        )
    manifest = {"config": asdict(config), "clips": entries}
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def read_manifest(path) -> dict:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"cannot read manifest {path}: {exc}") from exc
    if "config" not in manifest or "clips" not in manifest:
        raise CorpusError(f"manifest {path} missing config or clips")
    return manifest
