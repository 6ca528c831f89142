"""Linear algebra kernels: continuants, the bordered scattering system, and a
symmetric eigensolver.

Everything here works on plain numpy arrays. Routines that are evaluated
across many wave vectors at once accept a trailing batch axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import DomainError, NumericError, PoleError

if TYPE_CHECKING:
    from .model import SystemParams

POLE_GUARD = 1e-8
COND_FALLBACK = 1e10
COND_LIMIT = 1e12
BACKWARD_TOL = 1e-12
MAX_QL_SWEEPS = 50


# ---------------------------------------------------------------------------
# continuants
# ---------------------------------------------------------------------------

def tridiag_det_scaled(diag, sub_super_product=1.0):
    """Continuant of a tridiagonal matrix in scaled form.

    Evaluates D_j = diag_j * D_{j-1} - c * D_{j-2} with D_0 = 1, D_{-1} = 0,
    where ``c`` is the product of the paired sub/super diagonal entries.
    After every step the two running values are renormalised by a power of
    two so the recurrence cannot overflow.

    ``diag`` has shape ``(L,)`` or ``(L, *batch)``. Returns ``(mantissa,
    exponent)`` with determinant = mantissa * 2**exponent.
    """
    diag = np.asarray(diag)
    batch = diag.shape[1:]
    dtype = np.result_type(diag.dtype, np.float64)
    prev = np.zeros(batch, dtype=dtype)
    cur = np.ones(batch, dtype=dtype)
    exponent = np.zeros(batch, dtype=np.int64)
    for d in diag:
        prev, cur = cur, d * cur - sub_super_product * prev
        scale = np.maximum(np.abs(cur), np.abs(prev))
        _, e = np.frexp(np.where(scale > 0, scale, 1.0))
        factor = np.ldexp(1.0, -e)
        prev = prev * factor
        cur = cur * factor
        exponent = exponent + e
    return cur, exponent


def _unscale(mantissa, exponent):
    if np.iscomplexobj(mantissa):
        return np.ldexp(mantissa.real, exponent) + 1j * np.ldexp(mantissa.imag, exponent)
    return np.ldexp(mantissa, exponent)


def tridiag_det(diag, sub_super_product=1.0):
    """Determinant of a tridiagonal matrix via the three-term recurrence.

    An empty diagonal gives 1. See :func:`tridiag_det_scaled` for the
    overflow-safe representation used internally.
    """
    m, e = tridiag_det_scaled(diag, sub_super_product)
    out = _unscale(m, e)
    return out[()] if np.ndim(out) == 0 else out


def _chain_diagonal(params: SystemParams, energy, length, atom_pos):
    energy = np.asarray(energy, dtype=float)
    alpha = (params.omega_c - energy) / params.xi
    diag = np.broadcast_to(alpha, (max(length, 0),) + alpha.shape).copy()
    if atom_pos is not None and params.g != 0.0 and 1 <= atom_pos <= length:
        detuning = energy - params.omega_a
        if np.any(np.abs(detuning) < POLE_GUARD * params.xi):
            raise PoleError(
                "E_k is within the pole guard of omega_a; the eliminated form "
                "is undefined here, use the augmented direct solve"
            )
        diag[atom_pos - 1] = alpha + params.g ** 2 / (params.xi * detuning)
    return diag


def det_A_scaled(params: SystemParams, energy, length, atom_pos=None):
    """Scaled determinant of the length x length chain matrix (H_S - E)/xi.

    The atom is eliminated: site ``atom_pos`` (1-based) carries
    beta = alpha + g^2 / (xi (E - omega_a)). ``atom_pos`` outside
    ``1..length`` means the atom is not part of this sub-chain.
    ``length == -1`` returns the continuant D_{-1} = 0.
    """
    if length < -1:
        raise DomainError(f"continuant length must be >= -1, got {length}")
    energy = np.asarray(energy, dtype=float)
    if length == -1:
        return np.zeros(energy.shape), np.zeros(energy.shape, dtype=np.int64)
    return tridiag_det_scaled(_chain_diagonal(params, energy, length, atom_pos))


def det_A(params: SystemParams, energy, length, atom_pos=None):
    """Determinant |A| of the eliminated chain matrix, see :func:`det_A_scaled`."""
    out = _unscale(*det_A_scaled(params, energy, length, atom_pos))
    return out[()] if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# the bordered scattering system  B D = Gamma
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverSystem:
    """Symmetric tridiagonal system with an optional arrow row.

    Unknowns are ordered ``d_0 .. d_{N+1}`` followed, in the augmented form,
    by the atomic amplitude lambda. ``arrow_site`` is the index of the chain
    unknown coupled to the final (atom) unknown.
    """

    diag: np.ndarray
    offdiag: np.ndarray
    rhs: np.ndarray
    arrow_site: int | None = None
    arrow_coupling: float = 0.0
    k: float | None = None

    @property
    def dimension(self) -> int:
        return len(self.diag)

    def dense(self) -> np.ndarray:
        n = self.dimension
        b = np.diag(self.diag.astype(complex))
        b += np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
        if self.arrow_site is not None:
            b[self.arrow_site, n - 1] = b[n - 1, self.arrow_site] = self.arrow_coupling
        return b

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.offdiag * x[1:]
        y[1:] += self.offdiag * x[:-1]
        if self.arrow_site is not None:
            y[self.arrow_site] += self.arrow_coupling * x[-1]
            y[-1] += self.arrow_coupling * x[self.arrow_site]
        return y


def _system_bands(ks, params: SystemParams, augmented: bool):
    """Diagonal, off-diagonal and rhs of B D = Gamma for a batch of k."""
    ks = np.atleast_1d(np.asarray(ks, dtype=float))
    n_cav = params.n_cavities
    energy = params.omega_c + 2.0 * params.xi * np.cos(ks)
    alpha = (params.omega_c - energy) / params.xi
    eik = np.exp(1j * ks)
    gamma = params.gamma
    coupled = augmented and params.has_atom and params.g != 0.0
    dim = n_cav + 3 if coupled else n_cav + 2

    diag = np.empty((len(ks), dim), dtype=complex)
    diag[:, : n_cav + 2] = alpha[:, None]
    diag[:, 0] += eik
    diag[:, n_cav + 1] += eik
    offdiag = np.ones((len(ks), dim - 1), dtype=complex)
    offdiag[:, 0] = gamma
    offdiag[:, n_cav] = gamma
    if coupled:
        diag[:, -1] = (params.omega_a - energy) / params.xi
        offdiag[:, -1] = 0.0
    elif params.has_atom and params.g != 0.0:
        diag[:, params.atom_site] = _chain_diagonal(params, energy, n_cav, params.atom_site)[
            params.atom_site - 1
        ]
    rhs = np.zeros((len(ks), dim), dtype=complex)
    rhs[:, 0] = eik - np.conj(eik)
    arrow = params.atom_site if coupled else None
    return diag, offdiag, rhs, arrow, (params.g / params.xi if coupled else 0.0)


def assemble_system(k: float, params: SystemParams, augmented: bool = True) -> SolverSystem:
    """Build the appendix system for one wave vector.

    The augmented form keeps lambda as an unknown through the atom row
    ``lambda omega_a + g d_n = lambda E_k`` and stays regular at E_k = omega_a.
    The eliminated form folds the atom into beta on site n.
    """
    diag, offdiag, rhs, arrow, coupling = _system_bands([k], params, augmented)
    return SolverSystem(diag[0], offdiag[0], rhs[0], arrow, coupling, k=float(k))


def _to_band(diag, offdiag, arrow_site, arrow_coupling):
    """Band storage (kl = ku = 2) of the system with lambda moved next to d_n.

    Returns ``(bands, perm)``; ``bands[b, i, c] = M[i, i - 2 + c]`` and
    ``perm[i]`` is the original unknown stored at permuted position i.
    """
    nb, dim = diag.shape
    if arrow_site is None:
        perm = np.arange(dim)
    else:
        chain = np.arange(dim - 1)
        perm = np.concatenate([chain[: arrow_site + 1], [dim - 1], chain[arrow_site + 1:]])
    inv = np.empty(dim, dtype=int)
    inv[perm] = np.arange(dim)

    bands = np.zeros((nb, dim, 5), dtype=complex)

    def put(i, j, val):
        pi, pj = inv[i], inv[j]
        bands[:, pi, pj - pi + 2] = val

    for i in range(dim):
        put(i, i, diag[:, i])
    for i in range(dim - 1):
        if arrow_site is not None and i == dim - 2:
            continue
        put(i, i + 1, offdiag[:, i])
        put(i + 1, i, offdiag[:, i])
    if arrow_site is not None:
        put(arrow_site, dim - 1, arrow_coupling)
        put(dim - 1, arrow_site, arrow_coupling)
    return bands, perm


def band_solve(bands, rhs, kl=2, ku=2):
    """Batched banded Gaussian elimination with partial pivoting.

    ``bands[b, i, c]`` holds ``M[i, i - kl + c]``. Elimination runs on a
    sliding frontal block of kl+1 rows, so the cost is O(dim * kl * (kl+ku))
    per system. Returns ``(x, pivot_ratio)``; the ratio of largest to
    smallest pivot magnitude is a cheap conditioning indicator.
    """
    nb, dim, width = bands.shape
    assert width == kl + ku + 1
    w = kl + ku + 1
    pad = w + kl
    bp = np.zeros((nb, dim + pad, width), dtype=complex)
    bp[:, :dim] = bands
    bp[:, dim:, kl] = 1.0
    rp = np.zeros((nb, dim + pad), dtype=complex)
    rp[:, :dim] = rhs

    block = np.zeros((nb, kl + 1, w), dtype=complex)
    brhs = np.zeros((nb, kl + 1), dtype=complex)
    for r in range(kl + 1):
        # row r spans columns r-kl .. r+ku; keep the non-negative ones
        lo = kl - r
        block[:, r, : w - lo] = bp[:, r, lo:]
        brhs[:, r] = rp[:, r]

    upper = np.empty((nb, dim, w), dtype=complex)
    y = np.empty((nb, dim), dtype=complex)
    piv_abs = np.empty((nb, dim))
    rows = np.arange(nb)
    for j in range(dim):
        p = np.argmax(np.abs(block[:, :, 0]), axis=1)
        swap = p != 0
        if np.any(swap):
            top = block[rows, 0].copy()
            block[rows, 0] = block[rows, p]
            block[rows, p] = top
            top_r = brhs[rows, 0].copy()
            brhs[rows, 0] = brhs[rows, p]
            brhs[rows, p] = top_r
        pivot = block[:, 0, 0]
        piv_abs[:, j] = np.abs(pivot)
        safe = np.where(pivot != 0, pivot, 1.0)
        factors = block[:, 1:, 0] / safe[:, None]
        block[:, 1:, :] -= factors[:, :, None] * block[:, 0:1, :]
        brhs[:, 1:] -= factors * brhs[:, 0:1]
        upper[:, j] = block[:, 0]
        y[:, j] = brhs[:, 0]
        nxt = j + kl + 1
        block[:, :kl, : w - 1] = block[:, 1:, 1:]
        block[:, :kl, w - 1] = 0.0
        block[:, kl] = bp[:, nxt]
        brhs[:, :kl] = brhs[:, 1:]
        brhs[:, kl] = rp[:, nxt]

    x = np.zeros((nb, dim + w), dtype=complex)
    for j in range(dim - 1, -1, -1):
        acc = y[:, j] - np.einsum("bc,bc->b", upper[:, j, 1:], x[:, j + 1: j + w])
        x[:, j] = acc / np.where(upper[:, j, 0] != 0, upper[:, j, 0], np.nan)
    with np.errstate(divide="ignore"):
        ratio = piv_abs.max(axis=1) / piv_abs.min(axis=1)
    return x[:, :dim], ratio


def _dense_matrix(diag, offdiag, arrow_site, arrow_coupling, b):
    sys = SolverSystem(diag[b], offdiag[b], np.zeros(diag.shape[1]), arrow_site, arrow_coupling)
    return sys.dense()


def _batch_matvec(diag, offdiag, arrow_site, arrow_coupling, x):
    y = diag * x
    y[:, :-1] += offdiag * x[:, 1:]
    y[:, 1:] += offdiag * x[:, :-1]
    if arrow_site is not None:
        y[:, arrow_site] += arrow_coupling * x[:, -1]
        y[:, -1] += arrow_coupling * x[:, arrow_site]
    return y


def solve_batch(diag, offdiag, rhs, arrow_site=None, arrow_coupling=0.0, ks=None):
    """Solve a batch of scattering systems sharing one sparsity pattern.

    The banded path is tried first; systems whose pivot ratio exceeds
    ``COND_FALLBACK`` or whose normwise backward error exceeds
    ``BACKWARD_TOL`` are re-solved densely with LAPACK. A dense condition number above ``COND_LIMIT``
    raises :class:`NumericError`.
    """
    bands, perm = _to_band(diag, offdiag, arrow_site, arrow_coupling)
    xp, ratio = band_solve(bands, rhs[:, perm])
    x = np.empty_like(xp)
    x[:, perm] = xp

    res = np.abs(_batch_matvec(diag, offdiag, arrow_site, arrow_coupling, x) - rhs).max(axis=1)
    # normwise backward error |r| <= tol (|B| |x| + |rhs|) in the infinity norm,
    # using max|diag| + 2 max|offdiag| + |arrow| as an upper bound on |B|
    norm_b = np.abs(diag).max(axis=1) + 2.0 * np.abs(offdiag).max(axis=1, initial=0.0)
    norm_b = norm_b + abs(arrow_coupling)
    scale = norm_b * np.abs(x).max(axis=1) + np.abs(rhs).max(axis=1)
    bound = BACKWARD_TOL * scale
    bad = ~np.isfinite(ratio) | (ratio > COND_FALLBACK) | ~(res < bound)
    for b in np.flatnonzero(bad):
        k = None if ks is None else float(ks[b])
        dense = _dense_matrix(diag, offdiag, arrow_site, arrow_coupling, b)
        cond = np.linalg.cond(dense)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise NumericError(
                "scattering system is singular or ill-conditioned", k=k,
                diagnostics={"condition": float(cond), "pivot_ratio": float(ratio[b])},
            )
        x[b] = np.linalg.solve(dense, rhs[b])
        r = np.abs(dense @ x[b] - rhs[b]).max()
        limit = BACKWARD_TOL * (np.abs(dense).sum(axis=1).max() * np.abs(x[b]).max()
                                + np.abs(rhs[b]).max())
        if not r < limit:
            raise NumericError(
                "residual bound violated after dense fallback", k=k,
                diagnostics={"residual": float(r), "condition": float(cond)},
            )
    return x


def solve_scattering_system(system: SolverSystem) -> np.ndarray:
    """Solve B D = Gamma for one system; returns D."""
    ks = None if system.k is None else np.array([system.k])
    x = solve_batch(
        system.diag[None, :], system.offdiag[None, :], system.rhs[None, :],
        system.arrow_site, system.arrow_coupling, ks,
    )
    return x[0]


# ---------------------------------------------------------------------------
# symmetric eigensolver: Householder tridiagonalisation + implicit QL
# ---------------------------------------------------------------------------

def _householder_tridiagonal(a):
    a = np.array(a, dtype=float)
    n = a.shape[0]
    q = np.eye(n)
    for k in range(n - 2):
        x = a[k + 1:, k]
        tail = np.linalg.norm(x[1:])
        if tail == 0.0:
            continue
        norm = np.hypot(x[0], tail)
        v = x.copy()
        v[0] += np.copysign(norm, x[0])
        v /= np.linalg.norm(v)
        a[k + 1:, :] -= 2.0 * np.outer(v, v @ a[k + 1:, :])
        a[:, k + 1:] -= 2.0 * np.outer(a[:, k + 1:] @ v, v)
        q[:, k + 1:] -= 2.0 * np.outer(q[:, k + 1:] @ v, v)
    return np.diag(a).copy(), np.append(np.diag(a, -1), 0.0), q


def _implicit_ql(d, e, z):
    n = len(d)
    eps = np.finfo(float).eps
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                if abs(e[m]) <= eps * (abs(d[m]) + abs(d[m + 1])):
                    break
                m += 1
            if m == l:
                break
            if sweeps == MAX_QL_SWEEPS:
                raise NumericError(
                    f"implicit QL did not converge for eigenvalue {l}",
                    diagnostics={"index": l, "sweeps": sweeps, "offdiag": float(abs(e[l]))},
                )
            sweeps += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + np.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi1 = z[:, i + 1].copy()
                z[:, i + 1] = s * z[:, i] + c * zi1
                z[:, i] = c * z[:, i] - s * zi1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, z


def symmetric_eigen(matrix):
    """Eigen-decomposition of a real symmetric matrix.

    Householder reduction to tridiagonal form followed by implicit QL
    iterations with Wilkinson-type shifts. Returns ``(values, vectors)``
    with values ascending and eigenvectors as the columns of ``vectors``.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {a.shape}")
    scale = max(np.abs(a).max(), 1.0) if a.size else 1.0
    if a.size and np.abs(a - a.T).max() > 1e-12 * scale:
        raise DomainError("matrix is not symmetric to 1e-12")
    if a.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    d, e, q = _householder_tridiagonal(0.5 * (a + a.T))
    d, z = _implicit_ql(d, e, q)
    order = np.argsort(d, kind="stable")
    return d[order], z[:, order]
