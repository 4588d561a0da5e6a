"""Per-frame control features: the dynamic spectral contour plus
centroid / rolloff baselines, and the columnar text interchange format."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .dsp import Spectrogram, gaussian_filter_1d, median_filter_1d


class ControlError(ValueError):
    """Raised for invalid control parameters or malformed control files."""


@dataclass(frozen=True)
class DscParams:
    q: float = 10.0**-1.6
    sigma_f: float = 9.0
    gamma: float = 0.07
    m_f: int = 9

    def __post_init__(self):
        if self.q <= 0:
            raise ControlError(f"q must be positive, got {self.q}")
        if self.sigma_f < 0:
            raise ControlError(f"sigma_f must be nonnegative, got {self.sigma_f}")
        if not 0 < self.gamma < 1:
            raise ControlError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.m_f < 1 or self.m_f % 2 == 0:
            raise ControlError(f"m_f must be odd and >= 1, got {self.m_f}")

    @property
    def edge_shift_bins(self) -> float:
        """How far Gaussian smoothing pushes the detected edge of a step mask
        past the true edge: the first bin where the smoothed step drops below
        gamma sits sigma_f * Phi^-1(1 - gamma) bins beyond it."""
        return self.sigma_f * NormalDist().inv_cdf(1.0 - self.gamma)


@dataclass
class ControlSignal:
    """m features x F frames of per-frame values in Hz."""

    values: np.ndarray
    feature_names: tuple[str, ...]
    sample_rate: int
    hop: int

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        self.feature_names = tuple(self.feature_names)
        if len(self.feature_names) != self.values.shape[0]:
            raise ControlError(
                f"{len(self.feature_names)} names for {self.values.shape[0]} feature rows"
            )
        if self.sample_rate <= 0 or self.hop <= 0:
            raise ControlError("sample_rate and hop must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ControlError("control values must be finite")
        if np.any(self.values < 0) or np.any(self.values > self.nyquist + 1e-6):
            raise ControlError("control values must lie in [0, Nyquist]")

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0

    def feature(self, name: str) -> np.ndarray:
        try:
            return self.values[self.feature_names.index(name)]
        except ValueError:
            raise ControlError(f"no feature named {name!r}") from None

    def frame_times(self) -> np.ndarray:
        return np.arange(self.n_frames) * self.hop / self.sample_rate


def compute_dsc(spec: Spectrogram, params: DscParams = DscParams()) -> ControlSignal:
    """Highest meaningfully active frequency per frame.

    Magnitudes are peak-normalized, thresholded at q into a binary mask,
    smoothed along frequency, and scanned for the first bin below gamma.
    That crossing is pulled back by the smoothing-induced edge shift so it
    lands on the true mask edge, then median-filtered over time.
    """
    mags = spec.mags
    peak = float(mags.max())
    norm = mags / peak if peak > 0 else mags
    mask = (norm > params.q).astype(np.float64)
    smoothed = gaussian_filter_1d(mask, params.sigma_f)
    top = spec.n_bins - 1
    below = smoothed < params.gamma
    has_edge = below.any(axis=1)
    first = below.argmax(axis=1).astype(np.float64)
    bins = np.where(
        has_edge,
        np.where(first == 0, 0.0, np.clip(first - params.edge_shift_bins, 0.0, top)),
        float(top),
    )
    bins = median_filter_1d(bins, params.m_f)
    hz = bins * spec.sample_rate / spec.config.n_fft
    return ControlSignal(hz, ("dsc_hz",), spec.sample_rate, spec.config.hop)


def compute_centroid(spec: Spectrogram) -> ControlSignal:
    """Magnitude-weighted mean frequency per frame; silent frames map to 0."""
    total = spec.mags.sum(axis=1)
    hz = np.divide(
        spec.mags @ spec.freqs, total, out=np.zeros_like(total), where=total > 0
    )
    return ControlSignal(hz, ("centroid_hz",), spec.sample_rate, spec.config.hop)


def compute_rolloff(spec: Spectrogram, pct: float = 0.85) -> ControlSignal:
    """Lowest frequency containing pct of each frame's energy; silence maps to 0."""
    if not 0 < pct < 1:
        raise ControlError(f"pct must lie in (0, 1), got {pct}")
    power = spec.mags**2
    total = power.sum(axis=1)
    idx = np.argmax(power.cumsum(axis=1) >= pct * total[:, None], axis=1)
    hz = np.where(total > 0, spec.freqs[idx], 0.0)
    return ControlSignal(hz, ("rolloff_hz",), spec.sample_rate, spec.config.hop)


def scale_control(c: ControlSignal, factor: float) -> ControlSignal:
    """Multiply all values by factor, clamping into [0, Nyquist]."""
    if factor <= 0:
        raise ControlError(f"scale factor must be positive, got {factor}")
    values = np.clip(c.values * factor, 0.0, c.nyquist)
    return ControlSignal(values, c.feature_names, c.sample_rate, c.hop)


def resample_control(c: ControlSignal, n_frames: int) -> ControlSignal:
    """Linearly interpolate every feature row onto a new frame count."""
    if n_frames < 1:
        raise ControlError(f"n_frames must be >= 1, got {n_frames}")
    if n_frames == c.n_frames:
        return ControlSignal(c.values.copy(), c.feature_names, c.sample_rate, c.hop)
    src = np.linspace(0.0, 1.0, c.n_frames)
    dst = np.linspace(0.0, 1.0, n_frames)
    values = np.vstack([np.interp(dst, src, row) for row in c.values])
    return ControlSignal(values, c.feature_names, c.sample_rate, c.hop)


def write_control_csv(dest, c: ControlSignal) -> None:
    """Columnar text format shared with the editor UI.

    Line 1 is a comment carrying time alignment, line 2 the header, then one
    row per frame. Floats are written with full repr precision so a
    write/read cycle is exact.
    """
    own = isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__")
    fh = open(dest, "w", newline="") if own else dest
    try:
        fh.write(f"# sample_rate={c.sample_rate} hop={c.hop}\n")
        writer = csv.writer(fh)
        writer.writerow(("frame",) + c.feature_names)
        for i in range(c.n_frames):
            writer.writerow([i] + [repr(float(v)) for v in c.values[:, i]])
    finally:
        if own:
            fh.close()


def control_csv_text(c: ControlSignal) -> str:
    buf = io.StringIO()
    write_control_csv(buf, c)
    return buf.getvalue()


def read_control_csv(src) -> ControlSignal:
    """Parse the columnar control format; raises ControlError on anything off."""
    own = isinstance(src, (str, bytes)) or hasattr(src, "__fspath__")
    fh = open(src, "r", newline="") if own else src
    try:
        meta = fh.readline().strip()
        if not meta.startswith("#"):
            raise ControlError("control file must start with a '# sample_rate=.. hop=..' line")
        fields = dict(
            part.split("=", 1) for part in meta.lstrip("#").split() if "=" in part
        )
        try:
            sample_rate = int(fields["sample_rate"])
            hop = int(fields["hop"])
        except (KeyError, ValueError) as exc:
            raise ControlError(f"bad control metadata line: {meta!r}") from exc
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ControlError("control file has no header row") from None
        if not header or header[0] != "frame":
            raise ControlError("control header must start with 'frame'")
        names = tuple(header[1:])
        if not names:
            raise ControlError("control file declares no features")
        rows = []
        for lineno, row in enumerate(reader):
            if not row:
                continue
            if len(row) != len(names) + 1:
                raise ControlError(f"row {lineno} has {len(row)} fields, expected {len(names) + 1}")
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ControlError(f"row {lineno}: {exc}") from exc
        if not rows:
            raise ControlError("control file has no frames")
        values = np.asarray(rows, dtype=np.float64).T
    finally:
        if own:
            fh.close()
    return ControlSignal(values, names, sample_rate, hop)
