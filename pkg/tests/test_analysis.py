"""Diagnostics on reconstructed process tensors."""

import numpy as np
import pytest

from csqpt.analysis import (diagonal_elements, fit_count_rates,
                            off_target_mass, process_fidelity_to_ideal,
                            wigner_report, worst_case_fidelity)
from csqpt.boxes import BlackBoxKind
from csqpt.tomography import ProcessTensor, ideal_process_tensor

ANNIH = BlackBoxKind.ANNIHILATION
CREA = BlackBoxKind.CREATION
RESTARTS = 8  # unit tests need far fewer descents than the reports


def diag_tensor(rows, dim):
    """CP tensor with prescribed diagonal D[m, k] and nothing else."""
    el = np.zeros((dim, dim, dim, dim), dtype=complex)
    for m, row in enumerate(rows):
        for k, w in row.items():
            el[m, m, k, k] = w
    return ProcessTensor(el)


def identity_tensor(dim):
    el = np.zeros((dim, dim, dim, dim), dtype=complex)
    for m in range(dim):
        for n in range(dim):
            el[m, n, m, n] = 1.0
    return ProcessTensor(el)


def test_diagonal_elements_of_ideal_tensors():
    d = diagonal_elements(ideal_process_tensor(ANNIH, 6))
    for m in range(1, 6):
        assert d[m, m - 1] == m
    assert d.sum() == sum(range(6))
    dc = diagonal_elements(ideal_process_tensor(CREA, 6))
    for m in range(5):
        assert dc[m, m + 1] == m + 1


def test_diagonal_elements_integrity_check():
    el = np.zeros((3, 3, 3, 3), dtype=complex)
    el[1, 1, 0, 0] = 1.0 + 0.01j
    with pytest.raises(ValueError, match="imaginary"):
        diagonal_elements(ProcessTensor(el))


def test_off_target_mass():
    ideal = ideal_process_tensor(ANNIH, 5)
    mass = off_target_mass(ideal, ANNIH)
    assert np.isnan(mass[0])  # vacuum row has no click target
    assert np.allclose(mass[1:], 0.0)
    leaky = diag_tensor([{}, {0: 0.8, 1: 0.2}, {1: 0.9, 3: 0.1}], 4)
    got = off_target_mass(leaky, ANNIH)
    assert got[1] == pytest.approx(0.2)
    assert got[2] == pytest.approx(0.1)
    assert np.isnan(got[0]) and np.isnan(got[3])


def test_worst_case_fidelity_ideal_is_unity():
    for kind in (ANNIH, CREA):
        t = ideal_process_tensor(kind, 8)
        for n in (1, 2, 4):
            rep = worst_case_fidelity(t, kind, n, seed=1, restarts=RESTARTS)
            assert rep.fidelity == pytest.approx(1.0, abs=1e-9)
            assert rep.skipped == 0
            assert abs(np.linalg.norm(rep.state) - 1.0) < 1e-9


def test_worst_case_fidelity_detects_contamination():
    mixed = ProcessTensor(0.8 * ideal_process_tensor(ANNIH, 6).elements
                          + 0.2 * identity_tensor(6).elements)
    rep = worst_case_fidelity(mixed, ANNIH, 2, seed=3, restarts=RESTARTS)
    # Fock input |1>: 0.8 / (0.8 + 0.2); superpositions can only do worse
    assert rep.fidelity <= 0.8 + 1e-6
    assert rep.fidelity > 0.4
    assert rep.n == 2 and rep.kind is ANNIH


def test_worst_case_fidelity_single_state_subspace():
    t = diag_tensor([{1: 0.7, 0: 0.3}], 3)
    rep = worst_case_fidelity(t, CREA, 1, seed=0)
    assert rep.fidelity == pytest.approx(0.7)
    assert rep.restarts == 1


def test_worst_case_fidelity_validation():
    t = ideal_process_tensor(ANNIH, 4)
    with pytest.raises(ValueError, match="subspace size"):
        worst_case_fidelity(t, ANNIH, 0, seed=0)
    with pytest.raises(ValueError, match="subspace size"):
        worst_case_fidelity(t, ANNIH, 4, seed=0)
    silent = diag_tensor([{}, {}, {2: 1.0}], 3)
    with pytest.raises(ValueError, match="trace vanishes"):
        worst_case_fidelity(silent, ANNIH, 1, seed=0)


def test_fit_count_rates_exact_annihilation():
    zeta2 = 0.0025
    alphas = np.linspace(0.2, 1.6, 8)
    total = 1e6
    rates = [(a, zeta2 * a ** 2 * total, total) for a in alphas]
    fit = fit_count_rates(rates, ANNIH)
    assert fit.scale == pytest.approx(zeta2, rel=1e-12)
    assert fit.quad_coeff is None
    assert fit.chi2 < 1e-18
    assert fit.p_value > 0.999
    assert np.allclose(fit.model(alphas), zeta2 * alphas ** 2)


def test_fit_count_rates_exact_creation():
    zeta2, b = 0.0025, 1.0
    alphas = np.linspace(0.0, 1.6, 9)
    total = 1e6
    rates = [(a, zeta2 * (1 + b * a ** 2) * total, total) for a in alphas]
    fit = fit_count_rates(rates, CREA)
    assert fit.scale == pytest.approx(zeta2, rel=1e-12)
    assert fit.quad_coeff == pytest.approx(b, rel=1e-10)
    assert fit.dof == alphas.size - 2


def test_fit_count_rates_validation():
    with pytest.raises(ValueError, match="3 distinct"):
        fit_count_rates([(0.5, 10, 100), (0.5, 12, 100), (1.0, 30, 100)],
                        ANNIH)
    with pytest.raises(ValueError, match="outside"):
        fit_count_rates([(0.2, 200, 100), (0.5, 10, 100), (1.0, 30, 100)],
                        ANNIH)
    with pytest.raises(ValueError, match="triples"):
        fit_count_rates([(0.2, 10), (0.5, 12), (1.0, 30)], ANNIH)


def test_wigner_report_photon_addition_negativity():
    t = ideal_process_tensor(CREA, 10)
    xs = np.linspace(-5.0, 5.0, 201)
    report = wigner_report(t, [0.0, 0.8], xs, xs)
    vac = report.entries[0]
    assert vac.min_value == pytest.approx(-1.0 / np.pi, abs=1e-6)
    assert vac.min_x == 0.0 and vac.min_p == 0.0
    assert report.entries[1].min_value < -0.01
    step = xs[1] - xs[0]
    for entry in report.entries:
        assert abs(entry.field.sum() * step * step - 1.0) < 1e-4


def test_wigner_report_skips_silent_probe():
    t = ideal_process_tensor(ANNIH, 10)
    xs = np.linspace(-4.0, 4.0, 81)
    report = wigner_report(t, [0.0, 0.8], xs, xs)
    assert report.entries[0].field is None
    assert report.entries[0].note == "herald probability vanishes"
    kept = report.entries[1]
    assert kept.herald_weight == pytest.approx(0.64, rel=1e-6)
    # positive up to Fock-truncation ringing
    assert kept.min_value > -1e-4


def test_process_fidelity_to_ideal_anchor_points():
    assert process_fidelity_to_ideal(ideal_process_tensor(ANNIH, 8),
                                     ANNIH) == pytest.approx(1.0, abs=1e-5)
    cross = process_fidelity_to_ideal(ideal_process_tensor(CREA, 8), ANNIH)
    assert cross < 0.05  # disjoint ladder supports


def test_acceptance_reconstructions_close_to_ideal(annih_run, crea_run):
    assert process_fidelity_to_ideal(annih_run["tensor"], ANNIH) > 0.95
    assert process_fidelity_to_ideal(crea_run["tensor"], CREA) > 0.95
