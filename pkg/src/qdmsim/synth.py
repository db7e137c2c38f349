"""Homodyne time-series synthesis and averaged-periodogram spectra.

Noise model
-----------
Each detector output is white Gaussian noise whose *per-sample* variance
equals the analytic readout variance of the two-mode state. The one-sided
PSD of a vacuum-limited record is therefore ``2 * 0.5 / sample_rate``, and
spectra are reported as ``10 log10(PSD * sample_rate)`` -- dB relative to
vacuum, independent of rbw, window and sample rate.

Spectrum-analyzer mapping
-------------------------
``rbw`` fixes the FFT segment length ``round(sample_rate / rbw)``; segments
are tapered (Hann by default) and overlap by 50 %. ``vbw_averages`` is the
minimum number of periodograms that must be averaged, the analogue of video
filtering (roughly ``sweeps * rbw / vbw``). The record is long enough for at
least that many; all available segments are used.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal as sps

from .gaussian import VACUUM_VARIANCE
from .network import QdmConfig, SignalSpec, readout_covariance, signal_transfer

WINDOWS = ("hann", "hamming", "blackman", "blackmanharris", "flattop", "boxcar")
MIN_SEGMENT = 16


class AcquisitionError(ValueError):
    """Acquisition parameters cannot produce the requested record or spectrum."""


@dataclass(frozen=True)
class AcquisitionConfig:
    sample_rate: float = 50e6
    duration: float = 20e-3
    rbw: float = 10e3
    vbw_averages: int = 300
    window: str = "hann"
    seed: int = 0
    detector_slope: float | None = None

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise AcquisitionError("sample_rate must be > 0")
        if not self.duration > 0:
            raise AcquisitionError("duration must be > 0")
        if not self.rbw > 0:
            raise AcquisitionError("rbw must be > 0")
        if int(self.vbw_averages) != self.vbw_averages or self.vbw_averages < 1:
            raise AcquisitionError("vbw_averages must be a positive integer")
        if self.window not in WINDOWS:
            raise AcquisitionError(f"unknown window {self.window!r}; choose from {', '.join(WINDOWS)}")
        if self.detector_slope is not None and not self.detector_slope > 0:
            raise AcquisitionError("detector_slope corner frequency must be > 0")
        if self.segment_length < MIN_SEGMENT:
            raise AcquisitionError(
                f"rbw {self.rbw:g} Hz gives only {self.segment_length} samples per segment; "
                f"lower rbw or raise sample_rate"
            )
        if self.n_samples < self.samples_needed:
            raise AcquisitionError(
                f"duration {self.duration:g} s holds {self.n_samples} samples but "
                f"{self.vbw_averages} averages at rbw {self.rbw:g} Hz need {self.samples_needed}; "
                f"increase duration to >= {self.samples_needed / self.sample_rate:.6g} s"
            )

    @classmethod
    def from_analyzer(cls, rbw: float, vbw: float, sweeps: int = 1, **kw) -> AcquisitionConfig:
        """Build from spectrum-analyzer settings; duration is sized to fit."""
        averages = max(1, math.ceil(sweeps * rbw / vbw))
        sample_rate = kw.pop("sample_rate", cls.sample_rate)
        seg = round(sample_rate / rbw)
        need = seg + (averages - 1) * (seg - seg // 2)
        kw.setdefault("duration", need / sample_rate)
        return cls(sample_rate=sample_rate, rbw=rbw, vbw_averages=averages, **kw)

    @property
    def n_samples(self) -> int:
        return int(round(self.sample_rate * self.duration))

    @property
    def segment_length(self) -> int:
        return int(round(self.sample_rate / self.rbw))

    @property
    def overlap(self) -> int:
        return self.segment_length // 2

    @property
    def samples_needed(self) -> int:
        seg = self.segment_length
        return seg + (self.vbw_averages - 1) * (seg - self.overlap)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DetectorRecord:
    samples: np.ndarray
    detector: str
    readout_angle: float
    acquisition: AcquisitionConfig

    def __post_init__(self):
        if self.detector not in ("A", "B"):
            raise ValueError("detector must be 'A' or 'B'")
        s = np.asarray(self.samples, dtype=np.float64)
        if not np.all(np.isfinite(s)):
            raise ValueError("record contains non-finite samples")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)


@dataclass(frozen=True)
class Spectrum:
    frequencies: np.ndarray
    power_db_rel_vacuum: np.ndarray
    n_averages: int
    rbw_effective: float
    effective_averages: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        p = np.asarray(self.power_db_rel_vacuum, dtype=float)
        if f.shape != p.shape or f.ndim != 1:
            raise ValueError("frequency and power arrays must be 1-D and equal length")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "power_db_rel_vacuum", p)

    @property
    def power_linear(self) -> np.ndarray:
        """Power relative to vacuum (vacuum = 1)."""
        return 10.0 ** (self.power_db_rel_vacuum / 10.0)

    def index_of(self, frequency: float) -> int:
        return int(np.argmin(np.abs(self.frequencies - frequency)))


def window_enbw_bins(window: str, n: int) -> float:
    """Equivalent noise bandwidth of the window in FFT bins."""
    w = sps.get_window(window, n)
    return float(n * np.sum(w**2) / np.sum(w) ** 2)


def welch_variance_factor(window: str, n: int, noverlap: int, k: int) -> float:
    """Variance of a Welch average relative to a single periodogram.

    Accounts for the correlation between overlapping segments; the
    effective number of independent averages is the reciprocal.
    """
    w = sps.get_window(window, n)
    step = n - noverlap
    norm = np.sum(w**2)
    total = 1.0
    # Welch (1967): correlation of overlapping segments inflates the variance
    j = 1
    while j < k and j * step < n:
        rho = np.sum(w[: n - j * step] * w[j * step :]) / norm
        total += 2.0 * (k - j) / k * rho**2
        j += 1
    return total / k


def n_segments(n_samples: int, n: int, noverlap: int) -> int:
    if n_samples < n:
        return 0
    return (n_samples - noverlap) // (n - noverlap)


def sample_joint_noise(cov, n: int, seed) -> tuple[np.ndarray, ...]:
    """Draw ``n`` zero-mean Gaussian vectors with covariance ``cov``.

    Uses a Cholesky factor; a singular but positive-semidefinite ``cov``
    falls back to a symmetric square root. Returns one array per dimension.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be square")
    if np.max(np.abs(cov - cov.T)) > 1e-12 * max(1.0, np.max(np.abs(cov))):
        raise ValueError("covariance must be symmetric")
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        ev, vec = np.linalg.eigh(cov)
        if ev.min() < -1e-12 * max(1.0, ev.max()):
            raise ValueError("covariance is not positive semidefinite") from None
        factor = vec * np.sqrt(np.clip(ev, 0.0, None))
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((cov.shape[0], int(n)))
    return tuple(factor @ z)


def _apply_slope(x: np.ndarray, sample_rate: float, corner: float) -> np.ndarray:
    """First-order low-pass ``1 / (1 + i f / corner)`` applied in the frequency domain."""
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(x.size, 1.0 / sample_rate)
    return np.fft.irfft(spec / (1.0 + 1j * f / corner), n=x.size)


def synthesize(
    config: QdmConfig,
    signals: list[SignalSpec],
    acq: AcquisitionConfig,
) -> tuple[DetectorRecord, DetectorRecord]:
    """Sampled outputs of detectors A and B.

    Noise is drawn from the joint A/B readout covariance (cross terms appear
    only with unequal path losses). Each signal adds
    ``gain * cos(2 pi f t + phase)`` with the gains of :func:`signal_transfer`.
    """
    nyquist = acq.sample_rate / 2.0
    for s in signals:
        if s.frequency >= nyquist:
            raise AcquisitionError(
                f"signal at {s.frequency:g} Hz aliases: Nyquist is {nyquist:g} Hz; "
                f"raise sample_rate above {2 * s.frequency:g} Hz"
            )
    n = acq.n_samples
    noise_a, noise_b = sample_joint_noise(readout_covariance(config), n, acq.seed)
    t = np.arange(n) / acq.sample_rate
    out_a, out_b = noise_a, noise_b
    for s in signals:
        ga, gb = signal_transfer(config, s)
        wave = np.cos(2.0 * np.pi * s.frequency * t + s.phase)
        out_a = out_a + ga * wave
        out_b = out_b + gb * wave
    if acq.detector_slope is not None:
        out_a = _apply_slope(out_a, acq.sample_rate, acq.detector_slope)
        out_b = _apply_slope(out_b, acq.sample_rate, acq.detector_slope)
    return (
        DetectorRecord(out_a, "A", config.bhd_a_angle, acq),
        DetectorRecord(out_b, "B", config.theta, acq),
    )


def welch_spectrum(
    samples: np.ndarray,
    sample_rate: float,
    rbw: float,
    window: str = "hann",
    metadata: dict | None = None,
) -> Spectrum:
    """Averaged periodogram in dB relative to vacuum.

    DC and Nyquist bins are dropped: they are not doubled in a one-sided
    density and would sit 3 dB low.
    """
    seg = int(round(sample_rate / rbw))
    noverlap = seg // 2
    x = np.asarray(samples, dtype=float)
    k = n_segments(x.size, seg, noverlap)
    if k < 1:
        raise AcquisitionError(f"record of {x.size} samples is shorter than one {seg}-sample segment")
    f, pxx = sps.welch(
        x,
        fs=sample_rate,
        window=window,
        nperseg=seg,
        noverlap=noverlap,
        detrend=False,
        return_onesided=True,
        scaling="density",
        average="mean",
    )
    vacuum_psd = 2.0 * VACUUM_VARIANCE / sample_rate
    keep = slice(1, -1) if seg % 2 == 0 else slice(1, None)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(pxx[keep] / vacuum_psd)
    return Spectrum(
        frequencies=f[keep],
        power_db_rel_vacuum=db,
        n_averages=k,
        rbw_effective=window_enbw_bins(window, seg) * sample_rate / seg,
        effective_averages=float(1.0 / welch_variance_factor(window, seg, noverlap, k)),
        metadata={"window": window, "segment_length": seg, "sample_rate": sample_rate, **(metadata or {})},
    )


def estimate_psd(record: DetectorRecord) -> Spectrum:
    acq = record.acquisition
    return welch_spectrum(
        record.samples,
        acq.sample_rate,
        acq.rbw,
        acq.window,
        metadata={"detector": record.detector, "readout_angle": record.readout_angle},
    )


def predicted_excess(gain: float, acq: AcquisitionConfig) -> float:
    """Peak height above the floor, relative to vacuum, of a bin-centred
    sinusoid of amplitude ``gain``: ``(gain^2 / 2) / (vacuum PSD * ENBW)``."""
    enbw_hz = window_enbw_bins(acq.window, acq.segment_length) * acq.sample_rate / acq.segment_length
    vacuum_psd = 2.0 * VACUUM_VARIANCE / acq.sample_rate
    return (gain**2 / 2.0) / (vacuum_psd * enbw_hz)


def amplitude_for_excess(excess: float, acq: AcquisitionConfig) -> float:
    """Inverse of :func:`predicted_excess`."""
    return math.sqrt(excess / predicted_excess(1.0, acq))
