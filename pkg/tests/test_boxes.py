"""Heralded black-box maps, imperfections and probe-run simulation."""

import numpy as np
import pytest

from csqpt.boxes import (BlackBoxKind, ImperfectionModel, apply_imperfections,
                         exact_two_mode_box, first_order_valid, herald_counts,
                         herald_probability_law, ideal_box_first_order,
                         simulate_probe_run, unheralded_state)
from csqpt.fock import (coherent_state, creation_matrix, density_fidelity,
                        fock_state, number_operator, pure_state_fidelity)

ANNIH = BlackBoxKind.ANNIHILATION
CREA = BlackBoxKind.CREATION
ZETA = 0.05


def test_herald_probability_law():
    assert herald_probability_law(0.0, ANNIH) == 0.0
    assert herald_probability_law(0.8, ANNIH) == pytest.approx(0.64)
    assert herald_probability_law(0.0, CREA) == 1.0
    assert herald_probability_law(0.8, CREA) == pytest.approx(1.64)


def test_annihilation_on_fock_states():
    for m in (1, 3, 5):
        out = ideal_box_first_order(fock_state(m, 10).density(), ANNIH, ZETA)
        assert out.herald_probability == pytest.approx(ZETA ** 2 * m)
        assert pure_state_fidelity(fock_state(m - 1, 10),
                                   out.conditional_state) > 1 - 1e-12
    silent = ideal_box_first_order(fock_state(0, 10).density(), ANNIH, ZETA)
    assert silent.herald_probability == 0.0
    assert silent.conditional_state is None


def test_annihilation_leaves_coherent_state_unchanged():
    alpha = 0.9
    probe = coherent_state(alpha, 20)
    out = ideal_box_first_order(probe.density(), ANNIH, ZETA)
    assert out.herald_probability == pytest.approx(ZETA ** 2 * alpha ** 2,
                                                  rel=1e-9)
    assert pure_state_fidelity(probe, out.conditional_state) > 1 - 1e-9


def test_creation_on_fock_states():
    out = ideal_box_first_order(fock_state(0, 10).density(), CREA, ZETA)
    assert out.herald_probability == pytest.approx(ZETA ** 2)
    assert pure_state_fidelity(fock_state(1, 10),
                               out.conditional_state) > 1 - 1e-12
    out3 = ideal_box_first_order(fock_state(3, 10).density(), CREA, ZETA)
    assert out3.herald_probability == pytest.approx(4 * ZETA ** 2)
    assert pure_state_fidelity(fock_state(4, 10),
                               out3.conditional_state) > 1 - 1e-12


def test_creation_on_coherent_gives_photon_added_state():
    alpha = 0.7
    dim = 24
    probe = coherent_state(alpha, dim)
    out = ideal_box_first_order(probe.density(), CREA, ZETA)
    assert out.herald_probability == pytest.approx(
        ZETA ** 2 * (1 + alpha ** 2), rel=1e-9)
    added = creation_matrix(dim) @ probe.amplitudes
    added /= np.linalg.norm(added)
    got = out.conditional_state.elements
    assert np.allclose(got, np.outer(added, added.conj()), atol=1e-9)


def test_exact_box_matches_first_order_at_small_zeta():
    zeta = 0.01
    probe = coherent_state(0.8, 16).density()
    for kind in (ANNIH, CREA):
        exact = exact_two_mode_box(probe, kind, zeta, trigger_dim=5)
        first = ideal_box_first_order(probe, kind, zeta)
        assert exact.herald_probability == pytest.approx(
            first.herald_probability, rel=2e-3)
        assert density_fidelity(exact.conditional_state,
                                first.conditional_state) > 1 - 1e-4
    assert first_order_valid(zeta, 0.64)


def test_exact_box_trigger_dim_validation():
    with pytest.raises(ValueError, match="trigger_dim"):
        exact_two_mode_box(coherent_state(0.5, 8).density(), ANNIH, 0.1,
                           trigger_dim=2)


def test_apply_imperfections_attenuates():
    t1 = 0.6
    model = ImperfectionModel(ANNIH, t1=t1)
    out = ideal_box_first_order(coherent_state(1.0, 20).density(), ANNIH, ZETA)
    dirty = apply_imperfections(out, model, 1.0)
    nbar = dirty.conditional_state.expect(number_operator(20)).real
    assert nbar == pytest.approx(t1 * 1.0, rel=1e-6)
    assert dirty.herald_probability == out.herald_probability


def test_imperfect_creation_on_vacuum_is_two_level_mixture():
    model = ImperfectionModel(CREA, t1=0.75, t2=0.79)
    out = ideal_box_first_order(fock_state(0, 12).density(), CREA, ZETA)
    rho = apply_imperfections(out, model, 0.0).conditional_state
    off_diag = rho.elements - np.diag(np.diag(rho.elements))
    assert np.abs(off_diag).max() < 1e-9
    pops = np.diag(rho.elements).real / rho.trace()
    assert pops[2:].max() < 1e-12  # only |0> and |1> are populated
    assert pops[1] == pytest.approx(0.75 * 0.79, rel=1e-9)


def test_apply_imperfections_creation_displacement():
    model = ImperfectionModel(CREA, t1=0.75, t2=0.79)
    alpha = 0.5
    out = ideal_box_first_order(coherent_state(
        model.effective_alpha(alpha), 20).density(), CREA, ZETA)
    dirty = apply_imperfections(out, model, alpha)
    xop = (creation_matrix(20) + creation_matrix(20).T) / np.sqrt(2.0)
    x_clean = np.sqrt(model.output_efficiency()) * \
        out.conditional_state.expect(xop).real
    x_dirty = dirty.conditional_state.expect(xop).real
    assert x_dirty - x_clean == pytest.approx(model.displacement(alpha),
                                              abs=1e-9)


def test_unheralded_state_amplitudes():
    annih = unheralded_state(0.8, ImperfectionModel(ANNIH, t1=0.75), dim=20)
    assert density_fidelity(
        annih, coherent_state(np.sqrt(0.75) * 0.8, 20).density()) > 1 - 1e-9
    crea = unheralded_state(0.8, ImperfectionModel(CREA, t1=0.75, t2=0.79),
                            dim=20)
    # sqrt(t1 t2) transmission applied to the sqrt(t2)-scaled box amplitude
    amp = np.sqrt(0.75 * 0.79) * np.sqrt(0.79) * 0.8
    assert density_fidelity(crea, coherent_state(amp, 20).density()) > 1 - 1e-9


def test_imperfection_model_validation():
    with pytest.raises(ValueError, match="t1"):
        ImperfectionModel(ANNIH, t1=0.0)
    with pytest.raises(ValueError, match="t2"):
        ImperfectionModel(CREA, t2=1.2)
    assert ImperfectionModel(ANNIH).output_efficiency() == 1.0
    assert ImperfectionModel(CREA, t1=0.5, t2=0.5).output_efficiency() == 0.25


def test_herald_counts_deterministic_and_silent_at_zero():
    model = ImperfectionModel(ANNIH)
    assert herald_counts(0.0, model, 0.1, 100000, seed=1) == 0
    c1 = herald_counts(0.9, model, 0.1, 100000, seed=1)
    assert c1 == herald_counts(0.9, model, 0.1, 100000, seed=1)
    expect = 0.1 ** 2 * 0.81 * 100000
    assert abs(c1 - expect) < 5 * np.sqrt(expect)


def test_simulate_probe_run_structure():
    model = ImperfectionModel(ANNIH)
    phases = np.linspace(0.0, np.pi, 4, endpoint=False)
    data = simulate_probe_run(0.6, model, 0.2, phases, 300, seed=5)
    assert len(data) == 4 * 300
    assert set(np.unique(data.theta)) == set(phases)
    for key in ("kind", "zeta", "seed", "alpha_in", "alpha_box", "delta_x",
                "herald_probability", "samples_per_phase"):
        assert key in data.metadata
    assert data.metadata["kind"] == "annihilation"
    again = simulate_probe_run(0.6, model, 0.2, phases, 300, seed=5)
    assert np.array_equal(data.x, again.x)
    assert np.array_equal(data.heralded, again.heralded)
    p = 0.2 ** 2 * 0.36
    assert abs(data.herald_count() - p * len(data)) < 5 * np.sqrt(p * len(data))


def test_simulate_probe_run_single_photon_texture():
    # creation on vacuum: heralded samples follow the one-photon quadrature law
    model = ImperfectionModel(CREA)
    data = simulate_probe_run(0.0, model, 0.3, [0.0], 3000, seed=9)
    xs = data.x[data.heralded]
    assert xs.size > 150
    assert abs(xs.mean()) < 0.15
    assert abs(xs.var() - 1.5) < 0.2  # Var X = 3/2 for a single photon
    assert abs(data.x[~data.heralded].var() - 0.5) < 0.05
