"""Fock-space primitives: ladder algebra, states, channels, Wigner."""

import numpy as np
import pytest
from scipy.linalg import expm

from csqpt.fock import (DensityMatrix, TruncationWarning, annihilation_matrix,
                        coherent_state, creation_matrix, density_fidelity,
                        displacement_matrix_element, displacement_operator,
                        fock_state, loss_channel, loss_kraus, number_operator,
                        pure_state_fidelity, quadrature_wavefunctions,
                        trace_distance, wigner)

D = 20


def random_density(dim, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


def test_ladder_coefficients_exact():
    a = annihilation_matrix(D)
    adag = creation_matrix(D)
    for m in range(1, D):
        assert a[m - 1, m] == np.sqrt(m)
        assert adag[m, m - 1] == np.sqrt(m)
    # everything off the first diagonals vanishes
    assert np.count_nonzero(a) == D - 1
    assert np.array_equal(adag, a.conj().T)


def test_number_operator_is_adag_a():
    a = annihilation_matrix(D)
    assert np.allclose(number_operator(D), a.conj().T @ a)


def test_commutator_truncation_structure():
    a = annihilation_matrix(D)
    comm = a @ a.conj().T - a.conj().T @ a
    expect = np.eye(D)
    expect[-1, -1] = 1 - D  # cutoff absorbs the missing ladder step
    assert np.allclose(comm, expect)


def test_fock_state_bounds():
    psi = fock_state(3, 8)
    assert psi.amplitudes[3] == 1.0
    with pytest.raises(ValueError):
        fock_state(8, 8)


def test_coherent_state_poisson_statistics():
    alpha = 1.2
    psi = coherent_state(alpha, D)
    probs = np.abs(psi.amplitudes) ** 2
    n = np.arange(D)
    # independent Poisson oracle via scipy
    from scipy.stats import poisson
    assert np.allclose(probs, poisson.pmf(n, alpha ** 2), atol=1e-12)
    assert abs(probs @ n - alpha ** 2) < 1e-9


def test_coherent_state_is_ladder_eigenstate():
    psi = coherent_state(0.9, D).amplitudes
    out = annihilation_matrix(D) @ psi
    # truncation only touches the top component
    assert np.allclose(out[:-1], 0.9 * psi[:-1], atol=1e-9)
    # full-vector residual is set by the cutoff tail, even at the range edge
    big = coherent_state(1.7, 30).amplitudes
    resid = np.linalg.norm(annihilation_matrix(30) @ big - 1.7 * big)
    assert resid < 1e-6


def test_displacement_operator_generates_coherent_state():
    beta = 0.7 - 0.3j
    dop = displacement_operator(beta, D)
    assert np.allclose(dop @ dop.conj().T, np.eye(D), atol=1e-10)
    from_vacuum = dop @ fock_state(0, D).amplitudes
    direct = coherent_state(beta, D).amplitudes
    assert np.abs(np.vdot(from_vacuum, direct)) > 1 - 1e-9


def test_displacement_matrix_element_vs_expm():
    # exact closed form against the brute-force matrix exponential
    beta = 0.4 + 0.2j
    dim = 25
    a = annihilation_matrix(dim)
    u = expm(beta * a.conj().T - np.conj(beta) * a)
    for m, n in [(0, 0), (1, 0), (0, 1), (3, 2), (5, 5), (2, 7)]:
        assert abs(displacement_matrix_element(m, n, beta) - u[m, n]) < 1e-9


def test_loss_kraus_completeness():
    ks = loss_kraus(0.6, 12)
    total = sum(k.conj().T @ k for k in ks)
    assert np.allclose(total, np.eye(12), atol=1e-10)


def test_loss_channel_attenuates_coherent_state():
    eta = 0.55
    rho = coherent_state(1.1, D).density()
    out = loss_channel(rho, eta)
    target = coherent_state(np.sqrt(eta) * 1.1, D).density()
    assert density_fidelity(out, target) > 1 - 1e-8
    assert abs(out.trace() - 1.0) < 1e-10


def test_loss_channel_composes():
    for seed in range(3):
        rho = random_density(10, seed)
        twice = loss_channel(loss_channel(rho, 0.8), 0.6)
        once = loss_channel(rho, 0.8 * 0.6)
        assert np.abs(twice.elements - once.elements).max() < 1e-10


def test_quadrature_wavefunctions_orthonormal():
    xs = np.linspace(-10, 10, 4001)
    tab = quadrature_wavefunctions(5, xs)
    gram = tab @ tab.T * (xs[1] - xs[0])
    assert np.allclose(gram, np.eye(6), atol=1e-6)
    # vacuum variance 1/2 in these units
    var = np.trapezoid(xs ** 2 * tab[0] ** 2, xs)
    assert abs(var - 0.5) < 1e-8


def test_wigner_anchor_values():
    xs = np.linspace(-4, 4, 81)
    w0 = wigner(fock_state(0, 8).density(), xs, xs)
    w1 = wigner(fock_state(1, 8).density(), xs, xs)
    mid = 40  # xs[40] == 0
    assert abs(w0[mid, mid] - 1 / np.pi) < 1e-12
    assert abs(w1[mid, mid] + 1 / np.pi) < 1e-12
    step = xs[1] - xs[0]
    assert abs(w1.sum() * step * step - 1.0) < 1e-4


def test_wigner_integral_equals_trace():
    xs = np.linspace(-6, 6, 121)
    step = xs[1] - xs[0]
    for seed in range(3):
        rho = random_density(6, seed)
        w = wigner(rho, xs, xs)
        assert abs(w.sum() * step * step - 1.0) < 1e-3


def test_wigner_marginal_is_quadrature_pdf():
    from csqpt.homodyne import quadrature_pdf
    xs = np.linspace(-7, 7, 281)
    for seed in range(3):
        rho = random_density(5, seed)
        w = wigner(rho, xs, xs)
        marginal = np.trapezoid(w, xs, axis=0)  # integrate out p
        pdf = quadrature_pdf(rho, 0.0, xs)
        assert np.abs(marginal - pdf).max() < 1e-6


def test_comparison_metrics():
    rho0 = fock_state(0, 8).density()
    rho1 = fock_state(1, 8).density()
    assert abs(trace_distance(rho0, rho1) - 1.0) < 1e-12
    assert density_fidelity(rho0, rho1) < 1e-12
    assert abs(density_fidelity(rho0, rho0) - 1.0) < 1e-12
    # |<0|alpha>|^2 = exp(-|alpha|^2)
    alpha = 0.8
    fid = pure_state_fidelity(fock_state(0, D),
                              coherent_state(alpha, D).density())
    assert abs(fid - np.exp(-alpha ** 2)) < 1e-9


def test_metric_bounds_random_states():
    for seed in range(5):
        rho = random_density(7, seed)
        sig = random_density(7, seed + 100)
        td = trace_distance(rho, sig)
        fid = density_fidelity(rho, sig)
        assert 0.0 <= td <= 1.0 + 1e-12
        assert 0.0 <= fid <= 1.0 + 1e-12
        # Fuchs - van de Graaf inequalities
        assert 1.0 - np.sqrt(fid) <= td + 1e-9
        assert td <= np.sqrt(1.0 - fid) + 1e-9


def test_coherent_truncation_flag():
    psi = coherent_state(3.5, 6)
    assert psi.truncated_weight > 0.01
    assert psi.truncation_flag
    assert coherent_state(0.5, 12).truncated_weight < 1e-10


def test_displacement_warns_near_cutoff():
    with pytest.warns(TruncationWarning):
        displacement_operator(3.0, 5)
