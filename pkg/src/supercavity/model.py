"""Physical parameters, the super-cavity Hamiltonian and its eigenmodes.

Frequencies are measured in units of the hopping ``xi`` and ``omega_c`` is a
common reference shift (default 0).
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, WeakCouplingWarning
from .numerics import symmetric_eigen

WEAK_COUPLING_LIMIT = 0.2


@dataclass(frozen=True)
class SystemParams:
    """A super cavity of ``n_cavities`` sites, optionally holding one atom.

    ``atom_site`` is 1-based; ``None`` means an empty super cavity.
    """

    n_cavities: int
    atom_site: int | None = None
    omega_a: float = 0.0
    g: float = 0.0
    eta: float = 0.01
    xi: float = 1.0
    omega_c: float = 0.0

    def __post_init__(self):
        if isinstance(self.n_cavities, bool) or int(self.n_cavities) != self.n_cavities or self.n_cavities < 1:
            raise DomainError(f"n_cavities must be a positive integer, got {self.n_cavities!r}")
        object.__setattr__(self, "n_cavities", int(self.n_cavities))
        if self.atom_site is not None:
            if int(self.atom_site) != self.atom_site or not 1 <= self.atom_site <= self.n_cavities:
                raise DomainError(
                    f"atom_site must lie in 1..{self.n_cavities}, got {self.atom_site!r}"
                )
            object.__setattr__(self, "atom_site", int(self.atom_site))
        for name in ("omega_a", "g", "eta", "xi", "omega_c"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.xi <= 0:
            raise DomainError(f"xi must be positive, got {self.xi}")
        if self.eta <= 0:
            raise DomainError(f"eta must be positive, got {self.eta}")
        if self.g < 0:
            raise DomainError(f"g must be non-negative, got {self.g}")
        if self.gamma >= WEAK_COUPLING_LIMIT:
            warnings.warn(
                f"eta/xi = {self.gamma:g} is not small; results stay exact but the "
                "super cavity is no longer a well-isolated resonator",
                WeakCouplingWarning,
                stacklevel=3,
            )

    @property
    def gamma(self) -> float:
        return self.eta / self.xi

    @property
    def has_atom(self) -> bool:
        return self.atom_site is not None

    def replace(self, **changes) -> SystemParams:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> SystemParams:
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


@dataclass(frozen=True)
class ModeSet:
    """Eigenpairs of the single-excitation super-cavity Hamiltonian.

    ``vectors[:, i]`` belongs to ``frequencies[i]``. The basis is the sites
    ``1..N`` followed by the atomic excited state when an atom is present.
    """

    frequencies: np.ndarray
    vectors: np.ndarray
    basis_labels: tuple[str, ...] = field(default=())

    def __len__(self):
        return len(self.frequencies)

    def atomic_weight(self) -> np.ndarray:
        if not self.basis_labels or self.basis_labels[-1] != "e":
            return np.zeros(len(self))
        return self.vectors[-1, :] ** 2


def theta(m: int, n_cavities: int) -> float:
    return m * math.pi / (n_cavities + 1)


def dispersion(k, params: SystemParams):
    """Lead dispersion E_k = omega_c + 2 xi cos k on the open band (0, pi)."""
    karr = np.asarray(k, dtype=float)
    if np.any(~((karr > 0.0) & (karr < math.pi))):
        raise DomainError(f"wave vector must lie strictly inside (0, pi), got {k!r}")
    out = params.omega_c + 2.0 * params.xi * np.cos(karr)
    return float(out) if out.ndim == 0 else out


def wave_vector(energy, params: SystemParams):
    """Inverse of :func:`dispersion`; energies must lie inside the band."""
    x = (np.asarray(energy, dtype=float) - params.omega_c) / (2.0 * params.xi)
    if np.any(np.abs(x) >= 1.0):
        raise DomainError(f"energy {energy!r} lies outside the open band")
    out = np.arccos(x)
    return float(out) if out.ndim == 0 else out


def _check_mode(m, params):
    if int(m) != m or not 1 <= m <= params.n_cavities:
        raise DomainError(f"mode index must lie in 1..{params.n_cavities}, got {m!r}")


def empty_mode(m: int, params: SystemParams) -> tuple[float, np.ndarray]:
    """Analytic m-th eigenmode of the empty super cavity (atom ignored)."""
    _check_mode(m, params)
    n = params.n_cavities
    th = theta(m, n)
    j = np.arange(1, n + 1)
    vec = math.sqrt(2.0 / (n + 1)) * np.sin(j * th)
    return params.omega_c + 2.0 * params.xi * math.cos(th), vec


def mode_coupling(m: int, params: SystemParams) -> float:
    """Atom coupling to empty mode m, g * <n|Phi_m>."""
    if not params.has_atom:
        raise DomainError("mode coupling needs an atom in the super cavity")
    _check_mode(m, params)
    n = params.n_cavities
    return params.g * math.sqrt(2.0 / (n + 1)) * math.sin(params.atom_site * theta(m, n))


def rabi_splitting(m: int, params: SystemParams) -> float:
    """Single-mode vacuum Rabi splitting sqrt((nu_m - omega_a)^2 + 4 g_m^2)."""
    gm = mode_coupling(m, params)
    nu, _ = empty_mode(m, params)
    return math.sqrt((nu - params.omega_a) ** 2 + 4.0 * gm ** 2)


def build_hamiltonian(params: SystemParams) -> np.ndarray:
    n = params.n_cavities
    dim = n + 1 if params.has_atom else n
    h = np.zeros((dim, dim))
    idx = np.arange(n)
    h[idx, idx] = params.omega_c
    h[idx[:-1], idx[1:]] = params.xi
    h[idx[1:], idx[:-1]] = params.xi
    if params.has_atom:
        h[n, n] = params.omega_a
        h[params.atom_site - 1, n] = h[n, params.atom_site - 1] = params.g
    return h


def basis_labels(params: SystemParams) -> tuple[str, ...]:
    labels = tuple(str(j) for j in range(1, params.n_cavities + 1))
    return labels + ("e",) if params.has_atom else labels


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude component is positive."""
    vectors = np.array(vectors, dtype=float)
    if vectors.size == 0:
        return vectors
    lead = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])]
    return vectors * np.where(lead < 0, -1.0, 1.0)


def diagonalize_sc(params: SystemParams) -> ModeSet:
    values, vectors = symmetric_eigen(build_hamiltonian(params))
    return ModeSet(values, fix_signs(vectors), basis_labels(params))
