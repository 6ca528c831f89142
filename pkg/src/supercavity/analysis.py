"""Peak, valley and splitting measurements on sampled spectra."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ResolutionWarning, SplittingNotResolved
from .exact import SpectrumScan, resonance_grid, scan_grid
from .model import SystemParams, empty_mode, theta

DEFAULT_THRESHOLD = 0.1


@dataclass(frozen=True)
class Peak:
    k_center: float
    E_center: float
    T_max: float
    fwhm_k: float
    fwhm_E: float
    warning: str | None = None

    @property
    def resolved(self) -> bool:
        return self.warning is None


@dataclass(frozen=True)
class Valley:
    k_center: float
    T_min: float
    width_k: float
    T_shoulder: float


@dataclass(frozen=True)
class PeakReport:
    peaks: list[Peak]
    valleys: list[Valley]
    grid: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "peaks": [vars(p) for p in self.peaks],
            "valleys": [vars(v) for v in self.valleys],
            "grid": dict(self.grid),
        }


def _vertex(k, y, i):
    """Extremum of the parabola through samples i-1, i, i+1 (non-uniform)."""
    x0, x2 = k[i - 1] - k[i], k[i + 1] - k[i]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    s0 = (y1 - y0) / -x0
    s1 = (y2 - y1) / x2
    curv = (s1 - s0) / (x2 - x0)
    if curv == 0.0:
        return k[i], y1
    # p(u) = y1 + b u + curv u^2 with b chosen to pass through all three points
    b = s0 - curv * x0
    u = min(max(-b / (2.0 * curv), x0), x2)
    return k[i] + u, y1 + b * u + curv * u * u


def _crossing(k, y, i, level, step):
    """Walk from i in direction ``step`` to where y drops below ``level``."""
    j = i
    while 0 <= j + step < len(y) and y[j + step] >= level:
        j += step
    nxt = j + step
    if not 0 <= nxt < len(y):
        return k[j], False
    frac = (y[j] - level) / (y[j] - y[nxt])
    return k[j] + frac * (k[nxt] - k[j]), True


def _crossing_up(k, y, i, level, step):
    """Walk from a minimum at i in direction ``step`` until y rises to ``level``."""
    j = i
    while 0 <= j + step < len(y) and y[j + step] < level:
        j += step
    nxt = j + step
    if not 0 <= nxt < len(y):
        return k[j]
    frac = (level - y[j]) / (y[nxt] - y[j])
    return k[j] + frac * (k[nxt] - k[j])


def _shoulder(y, i, step):
    j = i
    while 0 <= j + step < len(y) and y[j + step] >= y[j]:
        j += step
    return y[j]


def find_peaks(scan: SpectrumScan, threshold: float = DEFAULT_THRESHOLD) -> PeakReport:
    """Locate transmission peaks and valleys.

    Peaks are interior local maxima above ``threshold``, refined by a
    three-point parabola; FWHM comes from linear interpolation of the
    half-maximum crossings. A valley is a local minimum whose lower shoulder
    reaches at least twice its depth and the detection threshold; its width
    is measured at half depth between the minimum and that shoulder.
    """
    if len(scan) == 0:
        raise DomainError("cannot analyse an empty scan")
    k = np.asarray(scan.k_grid)
    T = np.asarray(scan.T)
    xi = scan.params.xi

    peaks = []
    for i in range(1, len(T) - 1):
        if not (T[i] > T[i - 1] and T[i] >= T[i + 1] and T[i] > threshold):
            continue
        kc, tmax = _vertex(k, T, i)
        half = 0.5 * tmax
        left, ok_l = _crossing(k, T, i, half, -1)
        right, ok_r = _crossing(k, T, i, half, +1)
        warning = None
        if not (ok_l and ok_r):
            warning = "half maximum not reached inside the grid"
        elif np.count_nonzero((k >= left) & (k <= right)) < 3:
            warning = "peak spans fewer than 3 grid points"
        width = right - left
        if not width > 0:
            width = float(np.min(np.diff(k[max(i - 1, 0): i + 2])))
            warning = warning or "peak spans fewer than 3 grid points"
        if warning is not None:
            warnings.warn(f"peak near k={kc:.9g}: {warning}", ResolutionWarning, stacklevel=2)
        peaks.append(Peak(
            k_center=float(kc),
            E_center=float(scan.params.omega_c + 2.0 * xi * math.cos(kc)),
            T_max=float(tmax),
            fwhm_k=float(width),
            fwhm_E=float(2.0 * xi * math.sin(kc) * width),
            warning=warning,
        ))

    valleys = []
    for i in range(1, len(T) - 1):
        if not (T[i] < T[i - 1] and T[i] <= T[i + 1]):
            continue
        shoulder = min(_shoulder(T, i, -1), _shoulder(T, i, +1))
        if shoulder < 2.0 * T[i] or shoulder < threshold:
            continue
        kc, tmin = _vertex(k, T, i)
        level = 0.5 * (T[i] + shoulder)
        width = _crossing_up(k, T, i, level, +1) - _crossing_up(k, T, i, level, -1)
        valleys.append(Valley(float(kc), float(max(tmin, 0.0)), float(width), float(shoulder)))

    grid = {"points": len(k), "k_min": float(k[0]), "k_max": float(k[-1]), "method": scan.method,
            "threshold": threshold}
    return PeakReport(peaks, valleys, grid)


def measure_splitting(params: SystemParams, m: int, window: float = 0.05, samples: int = 4001,
                      threshold: float = DEFAULT_THRESHOLD):
    """Energy separation of the two dominant peaks within ``window`` of theta_m.

    Returns ``(delta, (lower, upper))`` with the two :class:`Peak` entries
    ordered by energy.
    """
    if not params.has_atom:
        raise DomainError("splitting measurement needs an atom")
    th = theta(m, params.n_cavities)
    lo = max(th - window, 1e-6)
    hi = min(th + window, math.pi - 1e-6)
    report = find_peaks(scan_grid(params, resonance_grid(params, lo, hi, samples)), threshold)
    return splitting_from_report(report)


def splitting_from_report(report: PeakReport):
    """``(delta, (lower, upper))`` from the two highest peaks of a report."""
    if len(report.peaks) < 2:
        raise SplittingNotResolved(f"found {len(report.peaks)} peak(s); a doublet needs two")
    top = sorted(report.peaks, key=lambda p: p.T_max, reverse=True)[:2]
    lower, upper = sorted(top, key=lambda p: p.E_center)
    return upper.E_center - lower.E_center, (lower, upper)


@dataclass(frozen=True)
class DetuningRow:
    detuning: float
    E_lower: float
    E_upper: float
    shift_lower: float
    shift_upper: float


def _is_antinode(params: SystemParams, m: int) -> bool:
    th = theta(m, params.n_cavities)
    profile = np.abs(np.sin(np.arange(1, params.n_cavities + 1) * th))
    return profile[params.atom_site - 1] >= profile.max() - 1e-12


def detuning_sweep(params: SystemParams, m: int, detunings, window: float = 0.05,
                   samples: int = 4001) -> list[DetuningRow]:
    """Track the Rabi doublet as omega_a = nu_m + detuning is varied.

    Shifts are measured from the doublet at zero detuning.
    """
    if not params.has_atom or not _is_antinode(params, m):
        raise DomainError(f"detuning sweep needs the atom at an antinode of mode {m}")
    nu_m, _ = empty_mode(m, params)

    def pair(delta):
        _, (lo, hi) = measure_splitting(params.replace(omega_a=nu_m + delta), m, window, samples)
        return lo.E_center, hi.E_center

    base_lo, base_hi = pair(0.0)
    rows = []
    for delta in detunings:
        e_lo, e_hi = (base_lo, base_hi) if delta == 0 else pair(float(delta))
        rows.append(DetuningRow(float(delta), e_lo, e_hi, e_lo - base_lo, e_hi - base_hi))
    return rows


def compare_scans(a: SpectrumScan, b: SpectrumScan) -> tuple[float, float]:
    """(max |dT|, rms dT) between two scans on the same grid."""
    if len(a) != len(b) or not np.array_equal(a.k_grid, b.k_grid):
        raise DomainError("scans must share an identical k grid")
    diff = np.asarray(a.T) - np.asarray(b.T)
    if diff.size == 0:
        return 0.0, 0.0
    return float(np.abs(diff).max()), float(np.sqrt(np.mean(diff ** 2)))
