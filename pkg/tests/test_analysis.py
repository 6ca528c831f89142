import math

import numpy as np
import pytest

from supercavity import (
    DomainError,
    ResolutionWarning,
    SpectrumScan,
    SplittingNotResolved,
    SystemParams,
    compare_scans,
    detuning_sweep,
    find_peaks,
    measure_splitting,
    resonance_grid,
    scan,
    scan_grid,
)

from conftest import REFERENCE_OMEGA_A


def synthetic(params, k, T):
    return SpectrumScan(params, k, T, 1 - np.asarray(T), "synthetic")


def test_monotone_has_no_peaks(base):
    k = np.linspace(0.1, 0.2, 50)
    report = find_peaks(synthetic(base, k, np.linspace(0, 1, 50)))
    assert report.peaks == [] and report.valleys == []


def test_empty_scan_rejected(base):
    with pytest.raises(DomainError):
        find_peaks(synthetic(base, [], []))


@pytest.mark.parametrize("samples", [401, 2001, 8001])
def test_lorentzian(base, samples):
    k0, w = 0.4, 1e-3
    k = np.linspace(0.39, 0.41, samples) + 0.37e-5
    T = w ** 2 / ((k - k0) ** 2 + w ** 2)
    (peak,) = find_peaks(synthetic(base, k, T)).peaks
    assert abs(peak.k_center - k0) < 1e-6
    assert abs(peak.fwhm_k - 2 * w) < 0.02 * 2 * w
    assert peak.fwhm_E == pytest.approx(2 * math.sin(peak.k_center) * peak.fwhm_k)
    assert peak.resolved


def test_refinement_invariance(base):
    params = base.replace(atom_site=12, g=0.1, omega_a=REFERENCE_OMEGA_A)
    th = math.pi / 8
    coarse = find_peaks(scan_grid(params, resonance_grid(params, th - 0.04, th + 0.04, 2001)))
    fine = find_peaks(scan_grid(params, resonance_grid(params, th - 0.04, th + 0.04, 8001,
                                                       window_samples=1601)))
    assert len(coarse.peaks) == len(fine.peaks) == 2
    for a, b in zip(coarse.peaks, fine.peaks):
        assert a.k_center == pytest.approx(b.k_center, abs=1e-5)
        assert a.fwhm_k == pytest.approx(b.fwhm_k, rel=0.02)


def test_under_resolved_peak_warns(base):
    from supercavity.exact import resonance_windows
    center = [c for c, _ in resonance_windows(base) if 0.3 < c < 0.5]
    k = np.union1d(np.linspace(0.3, 0.5, 201), center)
    with pytest.warns(ResolutionWarning):
        report = find_peaks(scan_grid(base, k))
    assert len(report.peaks) == len(center)
    assert all(not p.resolved for p in report.peaks)
    assert all(p.fwhm_k > 0 for p in report.peaks)


def test_valley_detection(base):
    k = np.linspace(0.1, 0.2, 2001)
    s_dip = 0.002
    T = 0.9 * np.exp(-((k - 0.15) / 0.03) ** 2) * (1 - np.exp(-((k - 0.15) / s_dip) ** 2))
    report = find_peaks(synthetic(base, k, T))
    (valley,) = report.valleys
    assert valley.k_center == pytest.approx(0.15, abs=1e-6)
    assert valley.T_min == pytest.approx(0.0, abs=1e-9)
    assert len(report.peaks) == 2
    # roughly the half-depth width of the Gaussian hole, 2 s sqrt(ln 2)
    assert valley.width_k == pytest.approx(2 * s_dip * math.sqrt(math.log(2)), rel=0.1)


def test_fig2_peaks(base):
    report = find_peaks(scan_grid(base, resonance_grid(base, 0.05, 0.55, 20001)))
    assert len(report.peaks) == 5
    ks = [p.k_center for p in report.peaks]
    assert ks == sorted(ks)
    for m, p in enumerate(report.peaks, 1):
        assert abs(p.k_center - m * math.pi / 32) < 1e-3
        assert p.T_max > 0.99 and p.resolved
    assert report.to_dict()["grid"]["points"] == len(resonance_grid(base, 0.05, 0.55, 20001))


def test_splitting(base, nu4):
    params = base.replace(atom_site=12, g=0.1, omega_a=nu4)
    delta, (lo, hi) = measure_splitting(params, 4, window=0.04)
    assert abs(delta - 0.05) < 0.25 * 0.05
    assert lo.E_center < hi.E_center
    bigger, _ = measure_splitting(params.replace(g=0.2), 4, window=0.08)
    assert bigger > delta


def test_splitting_unresolved(base, nu4):
    params = base.replace(atom_site=12, g=1e-4, omega_a=nu4 + 0.3)
    with pytest.raises(SplittingNotResolved):
        measure_splitting(params, 4, window=0.01)
    with pytest.raises(DomainError):
        measure_splitting(base, 4)


def test_detuning_asymmetry(base, nu4):
    params = base.replace(atom_site=12, g=0.1)
    rows = detuning_sweep(params, 4, [-0.02, 0.0, 0.02], window=0.05, samples=4001)
    neg, zero, pos = rows
    assert zero.shift_lower == zero.shift_upper == 0
    assert abs(pos.shift_upper) > abs(pos.shift_lower)
    assert abs(neg.shift_lower) > abs(neg.shift_upper)
    # the zero-detuning pair straddles nu_m; non-resonant modes offset it slightly
    centre = 0.5 * (zero.E_lower + zero.E_upper)
    assert abs(centre - nu4) < 0.02 * (zero.E_upper - zero.E_lower)


def test_detuning_needs_antinode(base):
    with pytest.raises(DomainError):
        detuning_sweep(base.replace(atom_site=8, g=0.1), 4, [0.0])


def test_compare_scans(base):
    a = scan(base, 0.1, 0.5, 501)
    assert compare_scans(a, a) == (0.0, 0.0)
    b = scan(base, 0.1, 0.5, 501, method="direct")
    assert compare_scans(a, b)[0] < 1e-9
    with pytest.raises(DomainError):
        compare_scans(a, scan(base, 0.1, 0.5, 500))
