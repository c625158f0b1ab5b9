"""Synthetic periodic-transient generation, SNR-controlled noise, and signal file IO.

The test signal is a train of damped oscillations repeated every T0 seconds;
each transient is a Gaussian-enveloped sinusoid, so the train is strictly
periodic up to the finite record length.  Noise is white Gaussian scaled to a
target SNR in dB, where signal power is the mean square of the clean record.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, SignalIOError
from .kernel import Signal

# Envelope terms smaller than this are identically zero in float64 anyway.
ENVELOPE_FLOOR = 1e-300


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the periodic transient train."""

    zeta: float = 0.01  # damping ratio
    omega: float = 0.055  # natural frequency, Hz
    T0: float = 200.0  # period, seconds
    length_l: float = 4000.0  # record length, seconds
    fs: float = 1.0  # sampling frequency, Hz

    def __post_init__(self):
        if not (0 < self.zeta < 1):
            raise InvalidArgumentError(f"damping ratio must be in (0, 1), got {self.zeta}")
        if self.omega <= 0 or self.T0 <= 0 or self.length_l <= 0 or self.fs <= 0:
            raise InvalidArgumentError("omega, T0, length_l, and fs must all be positive")

    @property
    def n(self) -> int:
        return int(round(self.length_l * self.fs))


@dataclass(frozen=True)
class NoiseSpec:
    """Target SNR in dB and the generator seed; snr_db = +inf means no noise."""

    snr_db: float
    seed: int = 0


def synthesize(spec: SyntheticSpec) -> Signal:
    """Periodic transient train sampled at t_i = i/fs.

    Each period contributes exp(-zeta*2*pi*omega*tau^2 / sqrt(1-zeta^2)) *
    sin(2*pi*omega*tau) with tau the time since that period's onset; onsets
    sit at multiples of T0.  Non-integer fs*T0 is allowed, which produces a
    fractional number of samples per period.
    """
    n = spec.n
    if n < 2:
        raise InvalidArgumentError(f"record length {spec.length_l}s at fs={spec.fs} gives n={n} < 2")
    t = np.arange(1, n + 1) / spec.fs
    rate = spec.zeta * 2.0 * np.pi * spec.omega / math.sqrt(1.0 - spec.zeta**2)
    # Radius beyond which the envelope drops under the floor; transients are
    # added only over the samples they can actually touch.
    radius = math.sqrt(-math.log(ENVELOPE_FLOOR) / rate)
    x = np.zeros(n)
    for j in range(int(spec.length_l // spec.T0) + 1):
        onset = j * spec.T0
        lo = max(0, int(math.floor((onset - radius) * spec.fs)) - 1)
        hi = min(n, int(math.ceil((onset + radius) * spec.fs)) + 1)
        if lo >= hi:
            continue
        tau = t[lo:hi] - onset
        x[lo:hi] += np.exp(-rate * tau**2) * np.sin(2.0 * np.pi * spec.omega * tau)
    return Signal(values=x, fs=spec.fs)


def signal_power(x: Signal) -> float:
    """Mean-square power of the record."""
    return float(np.mean(x.values**2))


def add_noise(x: Signal, noise: NoiseSpec) -> Signal:
    """Add seeded white Gaussian noise at the target SNR.

    Noise variance is P_x * 10^(-snr_db/10) with P_x the mean square of the
    clean record.  An infinite snr_db returns the input unchanged.
    """
    if math.isinf(noise.snr_db) and noise.snr_db > 0:
        return x
    power = signal_power(x)
    if power <= 0.0:
        raise InvalidArgumentError("cannot scale noise against a zero-power signal")
    sigma = math.sqrt(power * 10.0 ** (-noise.snr_db / 10.0))
    rng = np.random.default_rng(noise.seed)
    return Signal(values=x.values + sigma * rng.standard_normal(x.n), fs=x.fs)


def measured_snr_db(clean: Signal, noisy: Signal) -> float:
    """Empirical 10*log10(P_signal / P_noise) of a (clean, noisy) pair."""
    e = noisy.values - clean.values
    pe = float(np.mean(e**2))
    if pe == 0.0:
        return math.inf
    return 10.0 * math.log10(signal_power(clean) / pe)


# ---------------------------------------------------------------------------
# File IO: one value per line, optional "value" header, fs out of band
# ---------------------------------------------------------------------------


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_signal_csv(path, signal: Signal, sidecar: bool = True) -> None:
    """Write one value per line (17 significant digits) under a `value` header.

    The sampling frequency travels out of band; by default a JSON sidecar
    {"fs": ...} is written next to the file.
    """
    path = Path(path)
    with path.open("w") as fh:
        fh.write("value\n")
        for v in signal.values:
            fh.write(f"{v:.17g}\n")
    if sidecar:
        sidecar_path(path).write_text(json.dumps({"fs": signal.fs}) + "\n")


def read_signal_csv(path, fs: float | None = None) -> Signal:
    """Read a one-column signal file; fs comes from the argument or the JSON sidecar.

    Raises SignalIOError with the 1-based line number on the first
    unparsable line, and on empty files.
    """
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise SignalIOError(f"cannot read {path}: {exc}", path=str(path)) from exc
    values = []
    start = 0
    lines = raw.splitlines()
    if lines and lines[0].strip().lower() == "value":
        start = 1
    for lineno, line in enumerate(lines[start:], start=start + 1):
        text = line.strip()
        if not text:
            continue
        try:
            values.append(float(text))
        except ValueError as exc:
            raise SignalIOError(
                f"unparsable value {text!r} at line {lineno} of {path}", path=str(path), line=lineno
            ) from exc
    if not values:
        raise SignalIOError(f"{path} contains no samples", path=str(path))
    if fs is None:
        side = sidecar_path(path)
        if not side.exists():
            raise SignalIOError(
                f"no sampling frequency: pass fs or provide the sidecar {side}", path=str(path)
            )
        try:
            fs = float(json.loads(side.read_text())["fs"])
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise SignalIOError(f"bad sidecar {side}: {exc}", path=str(side)) from exc
    return Signal(values=np.asarray(values), fs=fs)
