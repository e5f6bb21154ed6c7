"""Second-order Butterworth low-pass for smoothing logged estimates."""
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Biquad:
    """Direct-form II transposed section, ``a0`` normalized to 1.

    ``state`` holds the two delay values per channel.
    """

    b0: float
    b1: float
    b2: float
    a1: float
    a2: float
    channels: int = 1
    state: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.state is None:
            self.reset()

    def reset(self):
        self.state = np.zeros((self.channels, 2))

    @property
    def poles(self):
        return np.roots([1.0, self.a1, self.a2])

    def response(self, freq, fs):
        """Complex frequency response at ``freq`` Hz."""
        z = np.exp(1j * 2.0 * np.pi * np.asarray(freq, dtype=float) / fs)
        zi = 1.0 / z
        return (self.b0 + self.b1 * zi + self.b2 * zi**2) / (1.0 + self.a1 * zi + self.a2 * zi**2)


def design_butterworth2(fc, fs, channels=1):
    """Bilinear-transform Butterworth low-pass with the cutoff pre-warped."""
    if not 0.0 < fc < fs / 2.0:
        raise ValueError(f"cutoff {fc} Hz must lie in (0, {fs / 2.0}) Hz")
    k = math.tan(math.pi * fc / fs)
    k2 = k * k
    norm = 1.0 / (1.0 + math.sqrt(2.0) * k + k2)
    b0 = k2 * norm
    return Biquad(
        b0=b0,
        b1=2.0 * b0,
        b2=b0,
        a1=2.0 * (k2 - 1.0) * norm,
        a2=(1.0 - math.sqrt(2.0) * k + k2) * norm,
        channels=channels,
    )


def filter_step(f, x):
    """Advance every channel by one sample; scalar in, scalar out for one channel."""
    x_arr = np.asarray(x, dtype=float).reshape(f.channels)
    s = f.state
    y = f.b0 * x_arr + s[:, 0]
    s[:, 0] = f.b1 * x_arr - f.a1 * y + s[:, 1]
    s[:, 1] = f.b2 * x_arr - f.a2 * y
    if np.ndim(x) == 0:
        return float(y[0])
    return y


def filter_signal(f, xs):
    """Run a whole 1-D (or samples x channels) signal through the filter."""
    xs = np.asarray(xs, dtype=float)
    out = np.empty_like(xs)
    for i in range(xs.shape[0]):
        out[i] = filter_step(f, xs[i])
    return out
