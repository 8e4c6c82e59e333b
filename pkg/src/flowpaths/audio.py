"""Complex STFT front end, SI-SDR, synthetic noisy tones and PCM16 WAV I/O.

Spectra are raw complex STFT values (no amplitude compression). The real
vector view used by the samplers interleaves ``(re, im)`` per bin.
"""

from __future__ import annotations

import csv
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .paths import fmt

SI_SDR_CLIP_DB = 60.0


class WavFormatError(ValueError):
    pass


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self) -> int:
        return self.samples.shape[0]


@dataclass
class ComplexSpectrogram:
    values: np.ndarray  # (frames, bins) complex
    window: int
    hop: int
    n_samples: int
    sample_rate: int = 16000

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]

    def to_real(self) -> np.ndarray:
        """Frames as real row vectors ``[re_0, im_0, re_1, im_1, ...]``."""
        return complex_to_real(self.values)

    def with_values(self, values: np.ndarray) -> "ComplexSpectrogram":
        return ComplexSpectrogram(np.asarray(values, dtype=np.complex128), self.window, self.hop,
                                  self.n_samples, self.sample_rate)


def complex_to_real(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def real_to_complex(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] % 2:
        raise ValueError("interleaved vector needs an even length")
    return v[..., 0::2] + 1j * v[..., 1::2]


def hann(window: int) -> np.ndarray:
    """Periodic Hann window."""
    n = np.arange(window)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / window)


def is_cola(window: int, hop: int, tol: float = 1e-10) -> bool:
    """True when shifted periodic Hann windows sum to a constant."""
    w = hann(window)
    acc = np.zeros(hop)
    for start in range(0, window, hop):
        seg = w[start:start + hop]
        acc[:seg.shape[0]] += seg
    return bool(np.ptp(acc) < tol * max(acc.max(), 1.0))


def _check_stft_params(window: int, hop: int) -> None:
    if window < 2 or window & (window - 1):
        raise ValueError(f"window must be a power of two, got {window}")
    if not (0 < hop <= window):
        raise ValueError(f"hop must satisfy 0 < hop <= window, got {hop}")
    if not is_cola(window, hop):
        raise ValueError(f"Hann window {window} with hop {hop} does not satisfy overlap-add")


def stft(w: Waveform, window: int = 512, hop: int = 128) -> ComplexSpectrogram:
    """Hann-windowed real DFT frames; the signal is padded by ``window // 2`` on both sides."""
    _check_stft_params(window, hop)
    pad = window // 2
    n = len(w)
    n_frames = 1 + int(np.ceil(max(n + 2 * pad - window, 0) / hop))
    total = (n_frames - 1) * hop + window
    x = np.zeros(total)
    x[pad:pad + n] = w.samples
    idx = np.arange(window)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx] * hann(window)
    return ComplexSpectrogram(np.fft.rfft(frames, axis=1), window, hop, n, w.sample_rate)


def istft(s: ComplexSpectrogram) -> Waveform:
    """Weighted overlap-add inverse of :func:`stft`."""
    _check_stft_params(s.window, s.hop)
    if s.n_bins != s.window // 2 + 1:
        raise ValueError(f"expected {s.window // 2 + 1} bins, got {s.n_bins}")
    win = hann(s.window)
    frames = np.fft.irfft(s.values, n=s.window, axis=1) * win
    total = (s.n_frames - 1) * s.hop + s.window
    out = np.zeros(total)
    norm = np.zeros(total)
    for i in range(s.n_frames):
        sl = slice(i * s.hop, i * s.hop + s.window)
        out[sl] += frames[i]
        norm[sl] += win * win
    pad = s.window // 2
    out = out[pad:pad + s.n_samples]
    norm = norm[pad:pad + s.n_samples]
    nz = norm > 1e-12
    out[nz] /= norm[nz]
    return Waveform(out, s.sample_rate)


def frame_energies(frames_time: np.ndarray, spectra: np.ndarray):
    """Per-frame energy in time and from one-sided rfft spectra (Parseval)."""
    window = frames_time.shape[-1]
    p = np.abs(spectra) ** 2
    weights = np.full(p.shape[-1], 2.0)
    weights[0] = 1.0
    if window % 2 == 0:
        weights[-1] = 1.0
    return np.sum(frames_time ** 2, axis=-1), (p @ weights) / window


def si_sdr(estimate: Waveform, reference: Waveform) -> float:
    """Scale-invariant SDR in dB, clipped to +/-60 dB."""
    est = estimate.samples if isinstance(estimate, Waveform) else np.asarray(estimate, dtype=np.float64)
    ref = reference.samples if isinstance(reference, Waveform) else np.asarray(reference, dtype=np.float64)
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {ref.shape}")
    ref_energy = float(ref @ ref)
    if ref_energy == 0.0:
        raise ValueError("reference signal is identically zero")
    target = (est @ ref) / ref_energy * ref
    resid = est - target
    num, den = float(target @ target), float(resid @ resid)
    if den <= num * 10.0 ** (-SI_SDR_CLIP_DB / 10.0):
        return SI_SDR_CLIP_DB
    if num <= den * 10.0 ** (-SI_SDR_CLIP_DB / 10.0):
        return -SI_SDR_CLIP_DB
    return float(10.0 * np.log10(num / den))


@dataclass
class SynthConfig:
    duration: float = 1.0
    f0_range: tuple = (100.0, 300.0)
    harmonics: int = 8
    noise_color: str = "white"
    snr_db_range: tuple = (0.0, 15.0)
    sample_rate: int = 16000
    seed: int = 0

    def __post_init__(self):
        self.f0_range = tuple(float(f) for f in self.f0_range)
        self.snr_db_range = tuple(float(s) for s in self.snr_db_range)
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.f0_range[0] <= 0 or self.f0_range[0] > self.f0_range[1]:
            raise ValueError("f0_range must be positive and ordered")
        if self.snr_db_range[0] > self.snr_db_range[1]:
            raise ValueError("snr_db_range must be ordered")
        if self.noise_color not in ("white", "pink"):
            raise ValueError(f"noise_color must be white or pink, got {self.noise_color!r}")
        if self.harmonics < 1:
            raise ValueError("need at least one harmonic")


def colored_noise(n: int, color: str, rng: np.random.Generator) -> np.ndarray:
    white = rng.standard_normal(n)
    if color == "white":
        return white
    spec = np.fft.rfft(white)
    f = np.arange(spec.shape[0], dtype=np.float64)
    f[0] = 1.0
    return np.fft.irfft(spec / np.sqrt(f), n=n)


def synth_pair(cfg: SynthConfig, rng: np.random.Generator | None = None):
    """Harmonic tone with a smooth envelope, plus colored noise at a drawn SNR."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    sr = cfg.sample_rate
    n = int(round(cfg.duration * sr))
    t = np.arange(n) / sr
    f0 = rng.uniform(*cfg.f0_range)
    decay = rng.uniform(0.5, 0.9)
    clean = np.zeros(n)
    for h in range(1, cfg.harmonics + 1):
        if h * f0 >= sr / 2:
            break
        clean += decay ** (h - 1) * np.sin(2.0 * np.pi * h * f0 * t + rng.uniform(0.0, 2.0 * np.pi))
    attack = max(int(0.05 * n), 1)
    env = np.ones(n)
    env[:attack] = np.linspace(0.0, 1.0, attack)
    env *= np.exp(-rng.uniform(0.0, 3.0) * t / max(cfg.duration, 1e-9))
    clean *= env
    clean *= 0.5 / max(np.max(np.abs(clean)), 1e-12)

    snr = rng.uniform(*cfg.snr_db_range)
    noise = colored_noise(n, cfg.noise_color, rng)
    noise *= np.sqrt((clean @ clean) / (noise @ noise) / 10.0 ** (snr / 10.0))
    return Waveform(clean, sr), Waveform(clean + noise, sr)


def measured_snr_db(clean: Waveform, noisy: Waveform) -> float:
    noise = noisy.samples - clean.samples
    return float(10.0 * np.log10((clean.samples @ clean.samples) / (noise @ noise)))


def write_wav(path, w: Waveform) -> None:
    """16-bit PCM mono; samples are scaled by 32768, rounded and clipped."""
    q = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(int(w.sample_rate))
        fh.writeframes(q.tobytes())


def read_wav(path) -> Waveform:
    try:
        with wave.open(str(path), "rb") as fh:
            channels, width, rate = fh.getnchannels(), fh.getsampwidth(), fh.getframerate()
            data = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError) as exc:
        raise WavFormatError(f"{path}: malformed or unsupported WAV file ({exc})") from None
    if channels != 1:
        raise WavFormatError(f"{path}: unsupported format, {channels} channels (mono only)")
    if width != 2:
        raise WavFormatError(f"{path}: unsupported format, {8 * width}-bit samples (16-bit PCM only)")
    return Waveform(np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0, rate)


def write_spectrogram_csv(s: ComplexSpectrogram, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "bin", "re", "im"])
        for f in range(s.n_frames):
            for b in range(s.n_bins):
                z = s.values[f, b]
                w.writerow([f, b, fmt(z.real), fmt(z.imag)])
