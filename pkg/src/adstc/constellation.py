"""Unit-energy BPSK and Gray-mapped QPSK."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Constellation", "BPSK", "QPSK", "get_constellation"]

_SQRT_HALF = np.sqrt(0.5)


@dataclass(frozen=True)
class Constellation:
    name: str
    bits_per_symbol: int

    @property
    def points(self) -> np.ndarray:
        """All symbols, indexed by their bit label read as an integer."""
        labels = np.arange(2 ** self.bits_per_symbol)
        bits = (labels[:, None] >> np.arange(self.bits_per_symbol)[::-1]) & 1
        return self.modulate(bits)

    def modulate(self, bits) -> np.ndarray:
        """Map bits of shape (..., bits_per_symbol) to complex symbols."""
        bits = np.asarray(bits)
        if self.bits_per_symbol == 1:
            return (1.0 - 2.0 * bits[..., 0]).astype(complex)
        # Gray: first bit on I, second on Q; neighbours differ in one bit.
        return _SQRT_HALF * ((1.0 - 2.0 * bits[..., 0]) + 1j * (1.0 - 2.0 * bits[..., 1]))

    def demodulate(self, z) -> np.ndarray:
        """Minimum-distance hard decision, returned as bits (..., bits_per_symbol).

        For both constellations this reduces to sign decisions, and the
        decision does not depend on a positive real scaling of `z`.
        """
        z = np.asarray(z)
        if self.bits_per_symbol == 1:
            return (z.real < 0).astype(np.uint8)[..., None]
        return np.stack([(z.real < 0), (z.imag < 0)], axis=-1).astype(np.uint8)

    def detect(self, z) -> np.ndarray:
        """Nearest constellation symbol to `z`."""
        return self.modulate(self.demodulate(z))


BPSK = Constellation("bpsk", 1)
QPSK = Constellation("qpsk", 2)


def get_constellation(name: str | Constellation) -> Constellation:
    if isinstance(name, Constellation):
        return name
    try:
        return {"bpsk": BPSK, "qpsk": QPSK}[name.lower()]
    except KeyError:
        raise ValueError(f"unknown constellation {name!r}; expected 'bpsk' or 'qpsk'") from None
