"""Exact single-photon scattering through the super cavity.

Two independent routes are provided: the closed-form determinant expression
for t (and r), and a direct solve of the augmented linear system that keeps
the atomic amplitude as an unknown.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError, PoleError
from .model import SystemParams, diagonalize_sc, dispersion
from .numerics import POLE_GUARD, _system_bands, _unscale, det_A_scaled, solve_batch

METHODS = ("closed-form", "direct")
UNITARITY_TOL = 1e-10
CHUNK = 8192


@dataclass(frozen=True)
class ScatteringSolution:
    k: float
    energy: float
    t: complex
    r: complex
    d: np.ndarray
    lam: complex

    @property
    def T(self) -> float:
        return abs(self.t) ** 2

    @property
    def R(self) -> float:
        return abs(self.r) ** 2


@dataclass(frozen=True)
class SpectrumScan:
    """Sampled transmission and reflection over a strictly increasing k grid."""

    params: SystemParams
    k_grid: np.ndarray
    T: np.ndarray
    R: np.ndarray
    method: str

    def __post_init__(self):
        for name in ("k_grid", "T", "R"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not len(self.k_grid) == len(self.T) == len(self.R):
            raise DomainError("k_grid, T and R must have equal lengths")
        if len(self.k_grid) > 1 and np.any(np.diff(self.k_grid) <= 0):
            raise DomainError("k_grid must be strictly increasing")

    def __len__(self):
        return len(self.k_grid)

    @property
    def energies(self) -> np.ndarray:
        return self.params.omega_c + 2.0 * self.params.xi * np.cos(self.k_grid)


def _check_k(ks):
    ks = np.asarray(ks, dtype=float)
    if np.any(~((ks > 0.0) & (ks < math.pi))):
        raise DomainError("wave vectors must lie strictly inside (0, pi)")
    return ks


def _near_pole(ks, params):
    if not params.has_atom or params.g == 0.0:
        return np.zeros(np.shape(ks), dtype=bool)
    energy = params.omega_c + 2.0 * params.xi * np.cos(ks)
    return np.abs(energy - params.omega_a) < POLE_GUARD * params.xi


def _closed_form_amplitudes(ks, params: SystemParams):
    """(t, r) from the determinant expansion of |B|; no pole points allowed."""
    ks = np.atleast_1d(ks)
    n_cav = params.n_cavities
    n = params.atom_site if params.has_atom else None
    shifted = None if n is None else n - 1
    energy = params.omega_c + 2.0 * params.xi * np.cos(ks)

    # full chain, last site removed, first site removed, both removed
    dets = [
        det_A_scaled(params, energy, n_cav, n),
        det_A_scaled(params, energy, n_cav - 1, n),
        det_A_scaled(params, energy, n_cav - 1, shifted),
        det_A_scaled(params, energy, n_cav - 2, shifted),
    ]
    top = np.max([e for _, e in dets], axis=0)
    a, b1, b2, c4 = (m * np.ldexp(1.0, e - top) for m, e in dets)

    g2 = params.gamma ** 2
    emik = np.exp(-1j * ks)
    det_b = emik ** 2 * a + g2 * emik * (b1 + b2) + g2 ** 2 * c4
    delta = 2j * np.sin(ks)
    phase = (-1.0) ** (n_cav + 1) * np.exp(-1j * ks * (n_cav + 1))
    # numerator carries the 2**-top that was divided out of |B|
    t = _unscale(phase * delta * g2 / det_b, -top)
    r = delta * (-emik * a - g2 * b1) / det_b - 1.0
    return t, r


def transmission_closed_form(k, params: SystemParams):
    """Transmission amplitude t from the closed-form determinant expression.

    The gamma^4 term uses the chain with both end sites removed and the atom
    at the shifted position n-1. Raises :class:`PoleError` when E_k is within
    the pole guard of omega_a.
    """
    ks = _check_k(k)
    if np.any(_near_pole(ks, params)):
        raise PoleError("E_k is on the atomic pole; use scatter_direct")
    t, _ = _closed_form_amplitudes(ks, params)
    return complex(t[0]) if np.ndim(k) == 0 else t


def _direct_solutions(ks, params: SystemParams):
    ks = np.atleast_1d(ks)
    diag, offdiag, rhs, arrow, coupling = _system_bands(ks, params, augmented=True)
    x = solve_batch(diag, offdiag, rhs, arrow, coupling, ks)
    return x


def direct_amplitudes(ks, params: SystemParams):
    """(t, r) arrays from the augmented direct solve, batched over k."""
    ks = _check_k(ks)
    n_cav = params.n_cavities
    x = _direct_solutions(ks, params)
    t = x[:, n_cav + 1] * np.exp(-1j * np.atleast_1d(ks) * (n_cav + 1))
    r = x[:, 0] - 1.0
    return t, r


def scatter_direct(k: float, params: SystemParams) -> ScatteringSolution:
    """Full scattering solution at one k from the augmented system."""
    k = float(_check_k(k))
    n_cav = params.n_cavities
    x = _direct_solutions(np.array([k]), params)[0]
    t = complex(x[n_cav + 1] * np.exp(-1j * k * (n_cav + 1)))
    r = complex(x[0] - 1.0)
    lam = complex(x[n_cav + 2]) if len(x) == n_cav + 3 else 0j
    sol = ScatteringSolution(k, dispersion(k, params), t, r, x[1: n_cav + 1].copy(), lam)
    drift = abs(sol.T + sol.R - 1.0)
    if not drift < UNITARITY_TOL:
        raise NumericError("flux conservation violated", k=k, diagnostics={"drift": drift})
    return sol


def _amplitudes(ks, params, method):
    if method == "direct":
        return direct_amplitudes(ks, params)
    if method != "closed-form":
        raise DomainError(f"unknown method {method!r}, expected one of {METHODS}")
    t = np.empty(len(ks), dtype=complex)
    r = np.empty(len(ks), dtype=complex)
    pole = _near_pole(ks, params)
    if np.any(~pole):
        t[~pole], r[~pole] = _closed_form_amplitudes(ks[~pole], params)
    if np.any(pole):
        t[pole], r[pole] = direct_amplitudes(ks[pole], params)
    return t, r


def scan_grid(params: SystemParams, k_grid, method: str = "closed-form") -> SpectrumScan:
    """Evaluate T and R on an arbitrary strictly increasing grid.

    Pole-adjacent points of a closed-form scan are rerouted to the direct
    solve. Points are processed in fixed-size chunks in grid order, so the
    output is deterministic.
    """
    ks = _check_k(np.atleast_1d(np.asarray(k_grid, dtype=float)))
    T = np.empty(len(ks))
    R = np.empty(len(ks))
    for start in range(0, len(ks), CHUNK):
        part = ks[start: start + CHUNK]
        try:
            t, r = _amplitudes(part, params, method)
        except NumericError as exc:
            idx = start + int(np.argmin(np.abs(part - exc.k))) if exc.k is not None else start
            raise NumericError(f"{exc.reason} at grid index {idx}", k=exc.k,
                               diagnostics=exc.diagnostics) from exc
        T[start: start + CHUNK] = np.abs(t) ** 2
        R[start: start + CHUNK] = np.abs(r) ** 2
    return SpectrumScan(params, ks, T, R, method)


def scan(params: SystemParams, k_min: float, k_max: float, samples: int,
         method: str = "closed-form") -> SpectrumScan:
    """Uniform-grid transmission scan over [k_min, k_max]."""
    if not 0.0 < k_min < k_max < math.pi:
        raise DomainError(f"need 0 < k_min < k_max < pi, got ({k_min}, {k_max})")
    if int(samples) != samples or samples < 2:
        raise DomainError(f"samples must be an integer >= 2, got {samples!r}")
    return scan_grid(params, np.linspace(k_min, k_max, int(samples)), method)


def resonance_windows(params: SystemParams):
    """Predicted (center, fwhm) in k of every super-cavity resonance.

    Each closed-system eigenstate v with energy inside the band attaches to
    the leads through its end-site weights. To lowest order in eta/xi its
    line has FWHM_k = gamma^2 (v_1^2 + v_N^2) and is displaced from the bare
    wave vector by -FWHM_k cot(k) / 2.
    """
    modes = diagonalize_sc(params)
    n_cav = params.n_cavities
    out = []
    for nu, vec in zip(modes.frequencies, modes.vectors.T):
        x = (nu - params.omega_c) / (2.0 * params.xi)
        if abs(x) >= 1.0:
            continue
        kc = math.acos(x)
        width = params.gamma ** 2 * (vec[0] ** 2 + vec[n_cav - 1] ** 2)
        if width < 1e-15:
            continue
        out.append((kc - 0.5 * width / math.tan(kc), width))
    return sorted(out)


def resonance_grid(params: SystemParams, k_min: float, k_max: float, base_samples: int,
                   window_samples: int = 401, window_widths: float = 10.0) -> np.ndarray:
    """Uniform base grid plus uniform fine windows on every resonance.

    The super-cavity lines are only ~gamma^2 wide, far below any practical
    uniform spacing. Each window spans ``window_widths`` predicted linewidths
    on either side of the predicted line center.
    """
    if not 0.0 < k_min < k_max < math.pi:
        raise DomainError(f"need 0 < k_min < k_max < pi, got ({k_min}, {k_max})")
    base = np.linspace(k_min, k_max, int(base_samples))
    inside = np.zeros(len(base), dtype=bool)
    parts = []
    for center, width in resonance_windows(params):
        lo = max(center - window_widths * width, k_min)
        hi = min(center + window_widths * width, k_max)
        if lo < hi:
            parts.append(np.linspace(lo, hi, int(window_samples)))
            # base points inside a window would sit arbitrarily close to window points
            inside |= (base > lo) & (base < hi)
    grid = np.unique(np.concatenate([base[~inside]] + parts))
    keep = np.concatenate([[True], np.diff(grid) > 1e-15 * grid[1:]])
    return grid[keep]
