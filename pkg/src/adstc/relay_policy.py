"""Relay scaling rules alpha_i(g_sr) and relay mode selection.

Each policy is a small frozen dataclass with two vectorized methods:
``alpha(g)`` (the AF scaling factor) and ``mode(g)`` (silent / AF / DF).
Thresholds are in linear units of the relay-side gain
``g_sr = Gamma_sr |h_sr|^2``.  A relay whose gain sits exactly on a
threshold transmits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Union

import numpy as np

from .constellation import Constellation

__all__ = [
    "RelayMode",
    "FullPower",
    "OnOff",
    "PiecewiseLinear",
    "ThresholdDF",
    "HybridAfDf",
    "QuantizedAlphaFunction",
    "PolicySpec",
    "scaling_factor",
    "relay_mode",
    "optimal_onoff_threshold",
    "df_detect",
]


class RelayMode(IntEnum):
    SILENT = 0
    AF = 1
    DF = 2


def _af_mode(alpha):
    return np.where(alpha > 0, RelayMode.AF, RelayMode.SILENT).astype(np.int8)


def _check_threshold(name, value):
    if not value >= 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")


@dataclass(frozen=True)
class FullPower:
    def alpha(self, g):
        return np.ones_like(np.asarray(g, dtype=float))

    def mode(self, g):
        return _af_mode(self.alpha(g))

    def breakpoints(self):
        return ()


@dataclass(frozen=True)
class OnOff:
    threshold: float

    def __post_init__(self):
        _check_threshold("threshold", self.threshold)

    def alpha(self, g):
        return (np.asarray(g, dtype=float) >= self.threshold).astype(float)

    def mode(self, g):
        return _af_mode(self.alpha(g))

    def breakpoints(self):
        return (self.threshold,)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Zero below `tau1`, linear ramp to 1 at `tau2`, one above."""

    tau1: float
    tau2: float

    def __post_init__(self):
        _check_threshold("tau1", self.tau1)
        if not self.tau2 > self.tau1:
            raise ValueError(f"need tau1 < tau2, got {self.tau1!r}, {self.tau2!r}")

    def alpha(self, g):
        g = np.asarray(g, dtype=float)
        ramp = (g - self.tau1) / (self.tau2 - self.tau1)
        return np.clip(np.where(g < self.tau1, 0.0, ramp), 0.0, 1.0)

    def mode(self, g):
        return _af_mode(self.alpha(g))

    def breakpoints(self):
        return (self.tau1, self.tau2)


@dataclass(frozen=True)
class ThresholdDF:
    """Silent below the threshold, detect-and-forward at or above it."""

    threshold: float

    def __post_init__(self):
        _check_threshold("threshold", self.threshold)

    def mode(self, g):
        g = np.asarray(g, dtype=float)
        return np.where(g >= self.threshold, RelayMode.DF, RelayMode.SILENT).astype(np.int8)

    def alpha(self, g):
        # DF relays transmit at full power.
        return (self.mode(g) != RelayMode.SILENT).astype(float)

    def breakpoints(self):
        return (self.threshold,)


@dataclass(frozen=True)
class HybridAfDf:
    """On-off AF up to `t2`, detect-and-forward above it.

    `onoff_threshold` plays the role of the lower threshold T1.
    ``t2 = inf`` gives plain on-off; ``t2 = onoff_threshold`` gives
    threshold DF (up to the measure-zero boundary).
    """

    onoff_threshold: float
    t2: float = math.inf

    def __post_init__(self):
        _check_threshold("onoff_threshold", self.onoff_threshold)
        if not self.onoff_threshold <= self.t2:
            raise ValueError("onoff_threshold must not exceed t2")

    def mode(self, g):
        g = np.asarray(g, dtype=float)
        mode = np.where(g > self.t2, RelayMode.DF, RelayMode.AF)
        return np.where(g < self.onoff_threshold, RelayMode.SILENT, mode).astype(np.int8)

    def alpha(self, g):
        return (self.mode(g) != RelayMode.SILENT).astype(float)

    def breakpoints(self):
        return (self.onoff_threshold,) if math.isinf(self.t2) else (self.onoff_threshold, self.t2)


@dataclass(frozen=True)
class QuantizedAlphaFunction:
    """Piecewise-constant alpha(g): ``alpha_values[j]`` on ``[bin_edges[j], bin_edges[j+1])``.

    The last bin extends to infinity; gains below the first edge fall in
    the first bin.
    """

    bin_edges: tuple[float, ...]
    alpha_values: tuple[float, ...]

    def __post_init__(self):
        edges = tuple(float(e) for e in self.bin_edges)
        values = tuple(float(v) for v in self.alpha_values)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "alpha_values", values)
        if len(edges) != len(values) or not edges:
            raise ValueError("need one alpha value per bin")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("bin edges must be strictly increasing")
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ValueError("alpha values must lie in [0, 1]")

    @classmethod
    def log_spaced(cls, center: float, per_decade: int = 8, decades: float = 1.0,
                   value: float = 1.0) -> "QuantizedAlphaFunction":
        """Bins log-spaced over ``center * 10**(+-decades)``, first bin from 0."""
        n = int(round(2 * decades * per_decade))
        inner = center * 10.0 ** np.linspace(-decades, decades, n + 1)
        edges = (0.0,) + tuple(inner)
        return cls(edges, (value,) * len(edges))

    @property
    def n_bins(self) -> int:
        return len(self.bin_edges)

    def bin_index(self, g):
        idx = np.searchsorted(np.asarray(self.bin_edges), np.asarray(g, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n_bins - 1)

    def alpha(self, g):
        return np.asarray(self.alpha_values)[self.bin_index(g)]

    def mode(self, g):
        return _af_mode(self.alpha(g))

    def breakpoints(self):
        return tuple(e for e in self.bin_edges if e > 0)

    def with_values(self, values) -> "QuantizedAlphaFunction":
        return QuantizedAlphaFunction(self.bin_edges, tuple(values))


PolicySpec = Union[FullPower, OnOff, PiecewiseLinear, ThresholdDF, HybridAfDf,
                   QuantizedAlphaFunction]


def scaling_factor(p: PolicySpec, g_sr):
    """AF scaling factor in [0, 1]; 1 for relays in DF mode."""
    out = p.alpha(g_sr)
    return float(out) if np.ndim(out) == 0 else out


def relay_mode(p: PolicySpec, g_sr):
    """Silent / AF / DF decision as :class:`RelayMode` codes."""
    out = p.mode(g_sr)
    return RelayMode(int(out)) if np.ndim(out) == 0 else out


def optimal_onoff_threshold(gamma_t: float, ps_over_n0: float) -> float:
    """Asymptotically optimal on-off threshold ``xi = gamma_t N0 / Ps`` on ``g_sr``.

    On the unit-mean fading gain this is ``gamma_t / SNR_sr``, i.e.
    ``gamma_t[dB] - SNR_sr[dB]``.
    """
    if not (gamma_t >= 0 and ps_over_n0 > 0):
        raise ValueError("need gamma_t >= 0 and ps_over_n0 > 0")
    return gamma_t / ps_over_n0


def df_detect(u, h_sr, constellation: Constellation):
    """Coherent per-symbol detection of the source symbols at a relay.

    `u` holds the raw observations with a trailing slot axis.  Returns
    ``(symbols, degenerate)``; where ``h_sr == 0`` the detection falls back
    to the first constellation point and is flagged.
    """
    h_sr = np.asarray(h_sr, dtype=complex)
    u = np.asarray(u, dtype=complex)
    degenerate = h_sr == 0
    detected = constellation.detect(np.conj(h_sr)[..., None] * u)
    detected = np.where(degenerate[..., None], constellation.points[0], detected)
    return detected, degenerate
