from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError, EncodingRangeError

DEFAULT_SCALE_BITS = 24
DEFAULT_BOUND = 128.0
DEFAULT_MAX_SUMMANDS = 64


@dataclass(frozen=True)
class FixedPointCodec:
    """Maps reals with ``|x| <= bound`` to integers mod ``n`` as ``round(x * 2**scale_bits)``.

    Negative values wrap to ``n - |m|``. The constructor refuses parameter
    combinations where ``max_summands`` encodings could wrap the modulus.
    """

    n: int
    scale_bits: int = DEFAULT_SCALE_BITS
    bound: float = DEFAULT_BOUND
    max_summands: int = DEFAULT_MAX_SUMMANDS

    def __post_init__(self):
        if self.scale_bits < 1 or self.bound <= 0 or self.max_summands < 1:
            raise ConfigurationError("scale_bits, bound and max_summands must be positive")
        largest = int(np.floor(self.bound * self.scale)) + 1
        if largest >= self.n // (2 * self.max_summands):
            raise ConfigurationError(
                f"modulus too small: {self.max_summands} summands of magnitude {self.bound} could wrap"
            )

    @property
    def scale(self):
        return 1 << self.scale_bits

    @property
    def resolution(self):
        return 1.0 / self.scale

    def encode(self, x):
        x = float(x)
        if not abs(x) <= self.bound:
            raise EncodingRangeError(f"|{x}| exceeds codec bound {self.bound}")
        return round(x * self.scale) % self.n

    def decode(self, m, divisor=1):
        m %= self.n
        if m > self.n // 2:
            m -= self.n
        return m / self.scale / divisor

    def encode_array(self, values):
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size and not np.max(np.abs(values)) <= self.bound:
            raise EncodingRangeError(f"max |x| = {np.max(np.abs(values))} exceeds codec bound {self.bound}")
        ints = np.rint(values * self.scale).astype(np.int64)
        n = self.n
        return [v % n for v in ints.tolist()]

    def decode_array(self, ints, divisor=1):
        n, half = self.n, self.n // 2
        signed = [(m % n) - n if (m % n) > half else (m % n) for m in ints]
        return np.array(signed, dtype=np.float64) / self.scale / divisor
