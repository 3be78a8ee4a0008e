"""Periodic ring lattice, wavenumber table and momentum cutoff."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_MODES = 8


@dataclass(frozen=True, eq=False)
class CutoffMask:
    """Per-mode keep flags (FFT order) and the cutoff wavenumber they realise."""

    keep: np.ndarray
    k_cut: float

    @property
    def n_kept(self) -> int:
        return int(self.keep.sum())

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        """Zero the dropped modes of spectral ``amplitudes`` (last axis)."""
        return np.where(self.keep, amplitudes, 0.0)

    def filter_field(self, lattice: "RingLattice", field: np.ndarray) -> np.ndarray:
        return lattice.inverse_spectrum(self.apply(lattice.forward_spectrum(field)))


@dataclass(frozen=True, eq=False)
class RingLattice:
    """M-point uniform grid on a ring of circumference L.

    Positions run over ``[-L/2, L/2)``.  ``k`` is stored in FFT order, so
    ``k[0] == 0``; for even M the unmatched mode ``j = -M/2`` sits at index
    ``M // 2``.
    """

    M: int
    L: float
    dx: float
    x: np.ndarray
    k: np.ndarray
    j: np.ndarray

    @property
    def k_nyquist(self) -> float:
        return math.pi / self.dx

    @property
    def k_sorted(self) -> np.ndarray:
        return np.fft.fftshift(self.k)

    def cutoff_mask(self, k_cut: float | None = None) -> CutoffMask:
        """Modes kept by a cutoff at ``k_cut`` (default: the lattice Nyquist).

        The unmatched ``j = -M/2`` mode of an even lattice is always dropped,
        so every mask is symmetric in +-k.
        """
        keep = np.ones(self.M, dtype=bool)
        if self.M % 2 == 0:
            keep[self.M // 2] = False
        if k_cut is None:
            k_cut = self.k_nyquist
        else:
            if k_cut <= 0:
                raise ValueError(f"k_cut must be > 0, got {k_cut}")
            # tolerance so a cutoff placed exactly on a grid wavenumber keeps it
            keep &= np.abs(self.k) <= k_cut * (1 + 1e-12)
        return CutoffMask(keep=keep, k_cut=float(k_cut))

    # Spectral pair.  Amplitudes are normalised so that
    #   field(x) = L^{-1/2} sum_k a_k exp(i k x),
    # which makes sum |a_k|^2 = sum |field|^2 dx (Parseval) and gives each
    # Wigner mode amplitude directly.

    @property
    def _origin_phase(self) -> np.ndarray:
        return np.exp(-1j * self.k * self.x[0])

    def forward_spectrum(self, field: np.ndarray) -> np.ndarray:
        field = np.asarray(field)
        if field.shape[-1] != self.M:
            raise ValueError(f"field has {field.shape[-1]} points, lattice has {self.M}")
        return np.fft.fft(field, axis=-1) * (self._origin_phase * (math.sqrt(self.L) / self.M))

    def inverse_spectrum(self, amplitudes: np.ndarray) -> np.ndarray:
        amplitudes = np.asarray(amplitudes)
        if amplitudes.shape[-1] != self.M:
            raise ValueError(f"spectrum has {amplitudes.shape[-1]} modes, lattice has {self.M}")
        scaled = amplitudes * (np.conj(self._origin_phase) * (self.M / math.sqrt(self.L)))
        return np.fft.ifft(scaled, axis=-1)


def build_lattice(M: int, L: float) -> RingLattice:
    if int(M) != M or M < MIN_MODES:
        raise ValueError(f"need an integer M >= {MIN_MODES} to resolve bubbles, got {M}")
    if not (L > 0 and math.isfinite(L)):
        raise ValueError(f"L must be > 0, got {L}")
    M = int(M)
    dx = L / M
    x = -L / 2 + dx * np.arange(M)
    j = np.fft.fftfreq(M, d=1.0 / M).round().astype(np.int64)
    k = 2 * math.pi * j / L
    for arr in (x, k, j):
        arr.setflags(write=False)
    return RingLattice(M=M, L=float(L), dx=dx, x=x, k=k, j=j)
