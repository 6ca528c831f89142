"""Two-level approximation of the super cavity with an atom at a mode node.

Only two closed-system levels are kept: the resonant empty mode |psi_m>,
which does not see the atom, and the atom-dressed level |phi_m>. Each level
couples to the leads through its end-site amplitudes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegeneracyError, DomainError, NumericError
from .exact import SpectrumScan, _check_k, scatter_direct
from .model import SystemParams, build_hamiltonian, empty_mode, fix_signs, theta
from .numerics import symmetric_eigen

NODE_TOL = 1e-9
RESONANCE_TOL = 1e-12
CHANNELS = ("mode", "atom")


@dataclass(frozen=True)
class TwoLevelModel:
    m: int
    nu_m: float
    omega_A: float
    alpha1: float
    beta1: float
    alpha2: float
    beta2: float
    psi_m: np.ndarray
    phi_m: np.ndarray

    @property
    def atomic_weight(self) -> float:
        return float(self.phi_m[-1] ** 2)


@dataclass(frozen=True)
class TlaSolution:
    k: float
    t: complex
    r: complex
    mu: complex
    zeta: complex

    @property
    def T(self) -> float:
        return abs(self.t) ** 2

    @property
    def R(self) -> float:
        return abs(self.r) ** 2


@dataclass(frozen=True)
class AnalyticDressedState:
    """Closed-form dressed level for omega_a = nu_m with the atom at a node.

    ``normalization`` records whether the printed normalisation constant
    produced a unit vector (``"printed"``) or had to be replaced by the
    squared norm of the unnormalised profile (``"forced"``).
    """

    c_part: np.ndarray
    d_part: np.ndarray
    atomic_amp: float
    gamma_site: float
    a_norm: float
    normalization: str = "forced"
    printed_a_norm: float = float("nan")

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.c_part, self.d_part, [self.atomic_amp]])


@dataclass(frozen=True)
class LocalizedState:
    amplitudes: np.ndarray
    atomic_amp: complex
    c_const: complex
    profile_overlap: float
    transmission: float


def _node_value(params: SystemParams, m: int) -> float:
    return math.sin(params.atom_site * theta(m, params.n_cavities))


def _require_node(params: SystemParams, m: int):
    if not params.has_atom:
        raise DomainError("the two-level approximation needs an atom")
    if int(m) != m or not 1 <= m <= params.n_cavities:
        raise DomainError(f"mode index must lie in 1..{params.n_cavities}, got {m!r}")
    if abs(_node_value(params, m)) >= NODE_TOL:
        raise DomainError(
            f"atom at site {params.atom_site} is not at a node of mode {m}; "
            "use the exact solver for this configuration"
        )


def build_tla(params: SystemParams, m: int) -> TwoLevelModel:
    """Select the two retained levels for mode ``m``.

    The resonant mode is projected out of H_S before diagonalising, so the
    dressed level is orthogonal to it even when the two are degenerate
    (omega_a = nu_m). Among eigenvalues strictly between the neighbouring
    empty modes, the one with the largest atomic weight is taken, ties
    broken by proximity to omega_a.
    """
    _require_node(params, m)
    if not params.g > 0:
        raise DomainError("the two-level approximation needs g > 0")
    n_cav = params.n_cavities
    nu_m, psi = empty_mode(m, params)
    psi_full = np.append(psi, 0.0)

    h = build_hamiltonian(params)
    proj = np.eye(n_cav + 1) - np.outer(psi_full, psi_full)
    lift = 10.0 * (np.abs(h).sum(axis=1).max() + 1.0)
    values, vectors = symmetric_eigen(proj @ h @ proj + lift * np.outer(psi_full, psi_full))
    values, vectors = values[:-1], fix_signs(vectors[:, :-1])

    lo = empty_mode(m + 1, params)[0] if m < n_cav else -math.inf
    hi = empty_mode(m - 1, params)[0] if m > 1 else math.inf
    window = np.flatnonzero((values > lo) & (values < hi))
    if window.size == 0:
        raise DegeneracyError(f"no eigenvalue between the neighbours of mode {m}")
    weight = vectors[-1, window] ** 2
    best = weight.max()
    ties = window[weight >= best - 1e-12]
    pick = ties[np.argmin(np.abs(values[ties] - params.omega_a))]
    if vectors[-1, pick] ** 2 <= 0.5:
        raise DegeneracyError(
            f"best dressed candidate for mode {m} has atomic weight "
            f"{vectors[-1, pick] ** 2:.3g} <= 0.5"
        )
    phi = vectors[:, pick]
    phi = phi - (psi_full @ phi) * psi_full
    phi = phi / np.linalg.norm(phi)
    return TwoLevelModel(
        m=int(m), nu_m=nu_m, omega_A=float(values[pick]),
        alpha1=float(psi[0]), beta1=float(phi[0]),
        alpha2=float(psi[-1]), beta2=float(phi[n_cav - 1]),
        psi_m=psi, phi_m=phi,
    )


def _levels(tlm: TwoLevelModel, channels):
    table = {
        "mode": (tlm.alpha1, tlm.alpha2, tlm.nu_m),
        "atom": (tlm.beta1, tlm.beta2, tlm.omega_A),
    }
    for c in channels:
        if c not in table:
            raise DomainError(f"unknown channel {c!r}, expected one of {CHANNELS}")
    return [table[c] for c in channels]


def _solve_reduced(ks, tlm: TwoLevelModel, params: SystemParams, channels):
    """Batched solve for (r', t', level amplitudes...) of the reduced model."""
    ks = np.atleast_1d(_check_k(ks))
    levels = _levels(tlm, channels)
    dim = 2 + len(levels)
    energy = params.omega_c + 2.0 * params.xi * np.cos(ks)
    corner = (params.omega_c - energy) / params.xi + np.exp(1j * ks)
    gam = params.gamma

    mat = np.zeros((len(ks), dim, dim), dtype=complex)
    mat[:, 0, 0] = corner
    mat[:, 1, 1] = corner
    for i, (a1, a2, eps) in enumerate(levels, start=2):
        mat[:, 0, i] = mat[:, i, 0] = gam * a1
        mat[:, 1, i] = mat[:, i, 1] = gam * a2
        mat[:, i, i] = (eps - energy) / params.xi
    rhs = np.zeros((len(ks), dim), dtype=complex)
    rhs[:, 0] = 2j * np.sin(ks)
    try:
        x = np.linalg.solve(mat, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise NumericError("reduced scattering system is singular") from exc
    res = np.abs(np.einsum("bij,bj->bi", mat, x) - rhs).max(axis=1)
    scale = np.abs(mat).sum(axis=2).max(axis=1) * np.abs(x).max(axis=1) + np.abs(rhs).max(axis=1)
    bad = ~(res < 1e-12 * scale)
    if np.any(bad):
        raise NumericError("reduced scattering system is ill-conditioned",
                           k=float(ks[np.argmax(bad)]))
    return ks, x


def _to_solutions(ks, x, channels, n_cav):
    t = x[:, 1] * np.exp(-1j * ks * (n_cav + 1))
    r = x[:, 0] - 1.0
    amp = {c: x[:, 2 + i] for i, c in enumerate(channels)}
    zero = np.zeros(len(ks), dtype=complex)
    return t, r, amp.get("mode", zero), amp.get("atom", zero)


def tla_amplitudes(ks, tlm: TwoLevelModel, params: SystemParams, channels=CHANNELS):
    """Batched (t, r, mu, zeta) of the reduced model over wave vectors ``ks``."""
    ks, x = _solve_reduced(ks, tlm, params, tuple(channels))
    return _to_solutions(ks, x, tuple(channels), params.n_cavities)


def tla_scatter(k: float, tlm: TwoLevelModel, params: SystemParams) -> TlaSolution:
    t, r, mu, zeta = tla_amplitudes([k], tlm, params)
    return TlaSolution(float(k), complex(t[0]), complex(r[0]), complex(mu[0]), complex(zeta[0]))


def single_channel_scatter(k: float, tlm: TwoLevelModel, which: str,
                           params: SystemParams) -> TlaSolution:
    """Scatter through one retained level only (``"mode"`` or ``"atom"``)."""
    t, r, mu, zeta = tla_amplitudes([k], tlm, params, (which,))
    return TlaSolution(float(k), complex(t[0]), complex(r[0]), complex(mu[0]), complex(zeta[0]))


def tla_scan(params: SystemParams, tlm: TwoLevelModel, k_grid, channels=CHANNELS) -> SpectrumScan:
    channels = tuple(channels)
    t, r, _, _ = tla_amplitudes(k_grid, tlm, params, channels)
    tag = "tla" if channels == CHANNELS else "tla-" + "-".join(channels)
    return SpectrumScan(params, np.atleast_1d(k_grid), np.abs(t) ** 2, np.abs(r) ** 2, tag)


def dark_state_residual(sol: TlaSolution, tlm: TwoLevelModel) -> float:
    """|a2 mu + b2 zeta| / (|a2 mu| + |b2 zeta|); zero for a state dark to site N+1."""
    a = tlm.alpha2 * sol.mu
    b = tlm.beta2 * sol.zeta
    return abs(a + b) / (abs(a) + abs(b))


def dark_state_energy(tlm: TwoLevelModel) -> float:
    """Energy at which the two channels cancel on the output site.

    With t' = 0 the level equations give a2 mu + b2 zeta proportional to
    a1 a2 / (nu_m - E) + b1 b2 / (omega_A - E), whose root is returned.
    """
    w_mode = tlm.alpha1 * tlm.alpha2
    w_atom = tlm.beta1 * tlm.beta2
    if w_mode + w_atom == 0.0:
        raise NumericError("channel weights cancel; no finite dark-state energy")
    return (w_mode * tlm.omega_A + w_atom * tlm.nu_m) / (w_mode + w_atom)


def transmission_minimum(tlm: TwoLevelModel, params: SystemParams, k_lo: float, k_hi: float) -> float:
    """Wave vector minimising the reduced-model T inside [k_lo, k_hi]."""
    grid = np.linspace(k_lo, k_hi, 2001)
    t, *_ = tla_amplitudes(grid, tlm, params)
    i = int(np.argmin(np.abs(t)))
    center = grid[i]
    step = grid[1] - grid[0]
    lo = -1.0 if i > 0 else 0.0
    hi = 1.0 if i < len(grid) - 1 else 0.0

    # offsets in units of the grid step keep Brent's relative tolerance meaningful
    def objective(u):
        return abs(tla_amplitudes([center + u * step], tlm, params)[0][0]) ** 2

    if lo == hi:
        return float(center)
    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12, "maxiter": 500})
    return float(center + res.x * step)


def _require_resonant(params: SystemParams, m: int):
    nu_m, _ = empty_mode(m, params)
    if abs(params.omega_a - nu_m) > RESONANCE_TOL * params.xi:
        raise DomainError(f"needs omega_a = nu_{m} = {nu_m!r}, got {params.omega_a!r}")
    return nu_m


def assemble_dressed_state(params: SystemParams, m: int, a_norm: float | None = None):
    """Unchecked assembly of the closed-form dressed profile.

    Returns ``(c_part, d_part, atomic_amp, gamma_site, a_norm)``; ``a_norm``
    defaults to the exact squared norm of the unnormalised profile.
    """
    if not params.has_atom or not params.g > 0:
        raise DomainError("the dressed state needs an atom with g > 0")
    n_cav, n = params.n_cavities, params.atom_site
    th = theta(m, n_cav)
    gamma_site = n / (n_cav - n + 1)
    if a_norm is None:
        a_norm = (n_cav + 1) / (n_cav - n + 1) * (
            n / 2.0
            + (n_cav + 1) * params.xi ** 2 * math.sin(th) ** 2
            / (params.g ** 2 * (n_cav - n + 1))
        )
    root = math.sqrt(a_norm)
    j = np.arange(1, n_cav + 1)
    profile = np.sin(j * th)
    c_part = profile[:n] / root
    d_part = -gamma_site * profile[n:] / root
    atomic = params.xi * (1.0 + gamma_site) * math.cos(n * th) * math.sin(th) / (params.g * root)
    return c_part, d_part, atomic, gamma_site, a_norm


def dressed_state_analytic(params: SystemParams, m: int) -> AnalyticDressedState:
    nu_m = _require_resonant(params, m)
    _require_node(params, m)
    if not params.g > 0:
        raise DomainError("the dressed state needs g > 0")
    n_cav, n = params.n_cavities, params.atom_site
    th = theta(m, n_cav)
    printed = math.sqrt((n_cav + 1) / (n_cav - n + 1) * (
        n / 2.0 + (n_cav + 1) * params.xi ** 2 * math.sin(th) ** 2 / (params.g ** 2 * (n_cav - n + 1))
    ))
    parts = assemble_dressed_state(params, m, printed)
    vec = np.concatenate([parts[0], parts[1], [parts[2]]])
    branch = "printed"
    if abs(np.linalg.norm(vec) - 1.0) > 1e-10:
        parts = assemble_dressed_state(params, m)
        vec = np.concatenate([parts[0], parts[1], [parts[2]]])
        branch = "forced"
    residual = np.abs(build_hamiltonian(params) @ vec - nu_m * vec).max()
    if residual >= 1e-8:
        raise NumericError("analytic dressed state fails the eigen-equation",
                           diagnostics={"residual": float(residual)})
    c_part, d_part, atomic, gamma_site, a_norm = parts
    return AnalyticDressedState(c_part, d_part, atomic, gamma_site, a_norm, branch, printed)


def localized_state(params: SystemParams, m: int) -> LocalizedState:
    """In-cavity part of the exact scattering state at the reflection point.

    Evaluated at E_k = nu_m = omega_a. Amplitudes are divided by the
    largest-modulus site amplitude. ``profile_overlap`` compares the full
    normalised state with the two-level prediction
    C a2 [sum_{j<=n} sin(j theta) |j> + xi cos(n theta) sin(theta)/g |e>] / sqrt(A).
    """
    _require_resonant(params, m)
    _require_node(params, m)
    n_cav, n = params.n_cavities, params.atom_site
    th = theta(m, n_cav)
    sol = scatter_direct(th, params)
    peak = sol.d[np.argmax(np.abs(sol.d))]
    amps = sol.d / peak
    atomic = sol.lam / peak
    if np.abs(amps[n:]).max(initial=0.0) >= 0.05:
        raise NumericError("scattering state is not localised left of the atom", k=th)

    tlm = build_tla(params, m)
    gamma_site = n / (n_cav - n + 1)
    c_const = -2j * (gamma_site + 1.0) * math.sin(th) / (
        params.gamma * (tlm.alpha1 * tlm.beta2 - tlm.alpha2 * tlm.beta1)
    )
    *_, a_norm = assemble_dressed_state(params, m)
    pref = c_const * tlm.alpha2 / math.sqrt(a_norm)
    predicted = np.zeros(n_cav + 1, dtype=complex)
    predicted[:n] = pref * np.sin(np.arange(1, n + 1) * th)
    predicted[-1] = pref * params.xi * math.cos(n * th) * math.sin(th) / params.g
    exact = np.append(sol.d, sol.lam)
    overlap = abs(np.vdot(predicted, exact)) / (np.linalg.norm(predicted) * np.linalg.norm(exact))
    return LocalizedState(amps, atomic, c_const, float(overlap), sol.T)
