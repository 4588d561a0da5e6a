"""Randomized lowpass degradations: four filter families plus a sampler that
draws (family, cutoff, order, ripple) tuples for on-the-fly pair generation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .audio import AudioClip, synthesized_clip
from .dsp import StftConfig, gaussian_filter_1d, stft

CUTOFF_GRID_HZ = tuple(float(f) for f in range(3000, 19000, 1000))
FAMILIES = ("FIR", "Biquad", "ChebyshevI", "BrickWall")

CUTOFF_DROP_RATIO = 10.0**-0.6  # -6 dB in power


class DegradationError(ValueError):
    """Raised for invalid degradation specs or unstable designed filters."""


@dataclass(frozen=True)
class DegradationSpec:
    family: str
    cutoff_hz: float
    order: int | None = None
    ripple_db: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DegradationError(f"unknown family {self.family!r}, expected one of {FAMILIES}")
        if self.cutoff_hz <= 0:
            raise DegradationError(f"cutoff_hz must be positive, got {self.cutoff_hz}")
        if self.family == "BrickWall":
            if self.order is not None:
                raise DegradationError("BrickWall takes no order")
        else:
            if self.order is None or self.order < 1:
                raise DegradationError(f"{self.family} needs order >= 1, got {self.order}")
            if self.family == "FIR" and self.order % 2 == 0:
                raise DegradationError(f"FIR tap count must be odd, got {self.order}")
        if self.family == "ChebyshevI":
            if self.ripple_db is None or self.ripple_db <= 0:
                raise DegradationError(f"ChebyshevI needs ripple_db > 0, got {self.ripple_db}")
        elif self.ripple_db is not None:
            raise DegradationError(f"{self.family} takes no ripple_db")

    def to_dict(self) -> dict:
        out = {"family": self.family, "cutoff_hz": self.cutoff_hz}
        if self.order is not None:
            out["order"] = self.order
        if self.ripple_db is not None:
            out["ripple_db"] = self.ripple_db
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DegradationSpec":
        allowed = {"family", "cutoff_hz", "order", "ripple_db"}
        unknown = set(data) - allowed
        if unknown:
            raise DegradationError(f"unknown degradation fields {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise DegradationError(str(exc)) from exc


class DegradationSampler:
    """Draws random degradation specs; single consumer per instance."""

    def __init__(
        self,
        rng_seed: int = 0,
        family_weights: tuple = (1.0, 1.0, 1.0, 1.0),
        fir_taps_range: tuple = (31, 255),
        iir_order_range: tuple = (2, 10),
        ripple_range_db: tuple = (0.1, 3.0),
    ):
        weights = np.asarray(family_weights, dtype=np.float64)
        if weights.shape != (4,) or np.any(weights < 0) or weights.sum() == 0:
            raise DegradationError("family_weights must be 4 nonnegative reals, not all zero")
        if fir_taps_range[0] > fir_taps_range[1] or fir_taps_range[0] % 2 == 0:
            raise DegradationError(f"bad FIR taps range {fir_taps_range} (need odd lo <= hi)")
        if iir_order_range[0] > iir_order_range[1] or iir_order_range[0] < 1:
            raise DegradationError(f"bad IIR order range {iir_order_range}")
        if not 0 < ripple_range_db[0] <= ripple_range_db[1]:
            raise DegradationError(f"bad ripple range {ripple_range_db}")
        self.family_probs = weights / weights.sum()
        self.fir_taps_range = fir_taps_range
        self.iir_order_range = iir_order_range
        self.ripple_range_db = ripple_range_db
        self._rng = np.random.default_rng(rng_seed)

    def sample_spec(self) -> DegradationSpec:
        family = FAMILIES[int(self._rng.choice(4, p=self.family_probs))]
        cutoff = CUTOFF_GRID_HZ[int(self._rng.integers(len(CUTOFF_GRID_HZ)))]
        if family == "BrickWall":
            return DegradationSpec(family, cutoff)
        if family == "FIR":
            lo, hi = self.fir_taps_range
            taps = lo + 2 * int(self._rng.integers((hi - lo) // 2 + 1))
            return DegradationSpec(family, cutoff, order=taps)
        lo, hi = self.iir_order_range
        order = int(self._rng.integers(lo, hi + 1))
        if family == "ChebyshevI":
            ripple = float(self._rng.uniform(*self.ripple_range_db))
            return DegradationSpec(family, cutoff, order=order, ripple_db=ripple)
        return DegradationSpec(family, cutoff, order=order)


def _check_sos_stable(sos: np.ndarray, spec: DegradationSpec) -> None:
    for section in sos:
        poles = np.roots(section[3:])
        if np.any(np.abs(poles) >= 1.0):
            raise DegradationError(f"designed filter is unstable for {spec}")


def _apply_sos(samples: np.ndarray, sos: np.ndarray) -> np.ndarray:
    # steady-state init scaled by the first sample avoids the startup ramp
    zi = signal.sosfilt_zi(sos) * samples[0]
    out, _ = signal.sosfilt(sos, samples, zi=zi)
    return out


def apply_degradation(clip: AudioClip, spec: DegradationSpec) -> AudioClip:
    """Lowpass the clip per the spec; output has the input's length."""
    if spec.cutoff_hz >= clip.nyquist:
        raise DegradationError(
            f"cutoff {spec.cutoff_hz} Hz not below Nyquist {clip.nyquist} Hz"
        )
    x = clip.samples
    if spec.family == "BrickWall":
        fft = np.fft.rfft(x)
        freqs = np.fft.rfftfreq(len(x), 1.0 / clip.sample_rate)
        fft[freqs > spec.cutoff_hz] = 0.0
        y = np.fft.irfft(fft, n=len(x))
    elif spec.family == "FIR":
        taps = signal.firwin(spec.order, spec.cutoff_hz, window="hamming", fs=clip.sample_rate)
        delay = (spec.order - 1) // 2
        padded = np.pad(x, (delay, spec.order - 1 - delay), mode="edge")
        y = signal.fftconvolve(padded, taps, mode="valid")
    elif spec.family == "Biquad":
        sos = signal.butter(spec.order, spec.cutoff_hz, btype="low", output="sos", fs=clip.sample_rate)
        _check_sos_stable(sos, spec)
        y = _apply_sos(x, sos)
    else:
        sos = signal.cheby1(
            spec.order, spec.ripple_db, spec.cutoff_hz, btype="low", output="sos", fs=clip.sample_rate
        )
        _check_sos_stable(sos, spec)
        y = _apply_sos(x, sos)
    return synthesized_clip(y, clip.sample_rate)


def measure_cutoff(clip: AudioClip, reference: AudioClip, cfg: StftConfig = StftConfig()) -> float:
    """Lowest frequency where the smoothed power ratio clip/reference falls
    below -6 dB; Nyquist when it never does."""
    if len(clip) != len(reference) or clip.sample_rate != reference.sample_rate:
        raise DegradationError("measure_cutoff needs equal-length, same-rate clips")
    proc = np.mean(stft(clip, cfg).mags ** 2, axis=0)
    ref = np.mean(stft(reference, cfg).mags ** 2, axis=0)
    ratio = gaussian_filter_1d((proc + 1e-12) / (ref + 1e-12), 3.0)
    below = ratio < CUTOFF_DROP_RATIO
    if not below.any():
        return clip.nyquist
    return float(np.argmax(below)) * clip.sample_rate / cfg.n_fft
