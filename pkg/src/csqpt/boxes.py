"""Heralded photon creation and annihilation black boxes.

A box couples the signal to a trigger mode; a trigger click heralds the
subtraction (beam-splitter coupling) or addition (parametric coupling) of one
photon.  To first order in the interaction strength zeta the conditional maps
are

    annihilation:  rho -> a rho a^dag,      pr = zeta^2 tr[a^dag a rho]
    creation:      rho -> a^dag rho a,      pr = zeta^2 tr[a a^dag rho]

The exact two-mode evolution is also available for validating the first-order
regime.  Experimental imperfections are captured by two transmissions: an
output attenuator T1 common to both processes and a mode-match factor T2 that
only the creation box sees (it rescales the effective input amplitude, adds
loss, and displaces the heralded output along X).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import expm

from . import homodyne
from .fock import (DensityMatrix, PureState, annihilation_matrix, coherent_state,
                   creation_matrix, displacement_operator, loss_channel)

# Fock cutoff used for simulation-side states; reconstruction uses its own,
# much smaller cutoff.
D_SIM = 20


class BlackBoxKind(Enum):
    ANNIHILATION = "annihilation"
    CREATION = "creation"


@dataclass(frozen=True)
class ImperfectionModel:
    """Linear-loss imperfection model of one black box.

    t1: transmission of the output attenuator.
    t2: mode-match transmission; affects the creation box only.
    """

    kind: BlackBoxKind
    t1: float = 1.0
    t2: float = 1.0

    def __post_init__(self):
        for name, val in (("t1", self.t1), ("t2", self.t2)):
            if not 0.0 < val <= 1.0:
                raise ValueError(f"{name} = {val} outside (0, 1]")

    def effective_alpha(self, alpha_in: float) -> float:
        """Amplitude the box itself sees (sqrt(t2)-scaled for creation)."""
        if self.kind is BlackBoxKind.CREATION:
            return float(np.sqrt(self.t2) * alpha_in)
        return float(alpha_in)

    def output_efficiency(self) -> float:
        """Net transmission between box output and detector."""
        if self.kind is BlackBoxKind.CREATION:
            return self.t1 * self.t2
        return self.t1

    def displacement(self, alpha_in: float) -> float:
        """Residual X-displacement of the heralded creation output."""
        if self.kind is BlackBoxKind.CREATION:
            return float(np.sqrt(2.0 * self.t1) * (1.0 - self.t2) * alpha_in)
        return 0.0


@dataclass
class HeraldedOutput:
    """Conditional state given a trigger click; the state is None when the
    click probability vanishes."""

    conditional_state: DensityMatrix | None
    herald_probability: float


def herald_probability_law(alpha: float, kind: BlackBoxKind) -> float:
    """Shape of the click rate versus probe amplitude (zeta^2 prefactor
    stripped): alpha^2 for annihilation, 1 + alpha^2 for creation."""
    if kind is BlackBoxKind.ANNIHILATION:
        return float(abs(alpha) ** 2)
    return float(1.0 + abs(alpha) ** 2)


def effective_box_amplitude(alpha_in: float, model: ImperfectionModel) -> float:
    return model.effective_alpha(alpha_in)


def first_order_valid(zeta: float, nbar: float) -> bool:
    """Rule of thumb for trusting the first-order conditional maps."""
    return zeta * nbar <= 0.1


def ideal_box_first_order(rho: DensityMatrix, kind: BlackBoxKind,
                          zeta: float) -> HeraldedOutput:
    """First-order heralded map of an ideal box."""
    if zeta < 0.0:
        raise ValueError("zeta must be nonnegative")
    op = annihilation_matrix(rho.dim) if kind is BlackBoxKind.ANNIHILATION \
        else creation_matrix(rho.dim)
    unnorm = op @ rho.elements @ op.conj().T
    prob = zeta ** 2 * float(np.trace(unnorm).real)
    if prob <= 0.0:
        return HeraldedOutput(None, 0.0)
    return HeraldedOutput(DensityMatrix(unnorm / np.trace(unnorm).real), prob)


def exact_two_mode_box(rho: DensityMatrix, kind: BlackBoxKind, zeta: float,
                       trigger_dim: int = 4) -> HeraldedOutput:
    """Exact signal-trigger evolution projected on a single trigger click.

    Evolves rho (x) |0><0| under exp(zeta K) with K = a_s a_t^dag - a_s^dag a_t
    (annihilation, beam splitter) or K = a_s^dag a_t^dag - a_s a_t (creation,
    parametric), projects the trigger on |1><1| and traces it out.
    """
    if trigger_dim < 3:
        raise ValueError("trigger_dim must be >= 3 to separate one- and "
                         "two-click amplitudes")
    ds, dt = rho.dim, trigger_dim
    a_s = np.kron(annihilation_matrix(ds), np.eye(dt))
    a_t = np.kron(np.eye(ds), annihilation_matrix(dt))
    if kind is BlackBoxKind.ANNIHILATION:
        gen = a_s @ a_t.conj().T - a_s.conj().T @ a_t
    else:
        gen = a_s.conj().T @ a_t.conj().T - a_s @ a_t
    u = expm(zeta * gen)
    joint = np.zeros((ds * dt, ds * dt), dtype=complex)
    idx = np.arange(ds) * dt  # trigger initially in vacuum
    joint[np.ix_(idx, idx)] = rho.elements
    evolved = u @ joint @ u.conj().T
    top = float(np.einsum("ii->", evolved.reshape(ds, dt, ds, dt)
                          [:, dt - 1, :, dt - 1]).real)
    if top > 1e-5:
        import warnings

        from .fock import TruncationWarning
        warnings.warn(f"trigger population {top:.2e} at the cutoff level; "
                      "increase trigger_dim", TruncationWarning, stacklevel=2)
    cond = evolved.reshape(ds, dt, ds, dt)[:, 1, :, 1]
    prob = float(np.trace(cond).real)
    if prob <= 0.0:
        return HeraldedOutput(None, 0.0)
    return HeraldedOutput(DensityMatrix(cond / prob), prob)


def apply_imperfections(out: HeraldedOutput, model: ImperfectionModel,
                        alpha_in: float) -> HeraldedOutput:
    """Degrade an ideal heralded output by the loss model.

    Annihilation: loss t1.  Creation: loss t1*t2 followed by a displacement of
    the mean X quadrature by model.displacement(alpha_in).  The herald
    probability itself is unaffected (trigger optics sit upstream).
    """
    if out.conditional_state is None:
        return HeraldedOutput(None, out.herald_probability)
    rho = loss_channel(out.conditional_state, model.output_efficiency())
    dx = model.displacement(alpha_in)
    if dx != 0.0:
        d = displacement_operator(dx / np.sqrt(2.0), rho.dim)
        rho = DensityMatrix(d @ rho.elements @ d.conj().T)
    return HeraldedOutput(rho, out.herald_probability)


def unheralded_state(alpha_in: float, model: ImperfectionModel,
                     dim: int = D_SIM) -> DensityMatrix:
    """State reaching the detector on no-click slots.

    Annihilation: the attenuated probe |sqrt(t1) alpha_in> (this is also what
    amplitude calibration measures).  Creation: the box-input probe with the
    full output loss and no displacement; this branch is a model
    extrapolation, not a measured property.
    """
    if model.kind is BlackBoxKind.ANNIHILATION:
        return coherent_state(np.sqrt(model.t1) * alpha_in, dim).density()
    amp = np.sqrt(model.output_efficiency()) * model.effective_alpha(alpha_in)
    return coherent_state(amp, dim).density()


# ---------------------------------------------------------------------------
# probe-run simulation

def _stream(seed: int, alpha_in: float, theta: float):
    """Independent deterministic RNG per (seed, alpha, theta)."""
    return np.random.default_rng(
        [int(seed), int(round(alpha_in * 1e9)) & 0x7FFFFFFF,
         int(round(theta * 1e9)) & 0x7FFFFFFF])


def herald_counts(alpha_in: float, model: ImperfectionModel, zeta: float,
                  n_slots: int, seed: int) -> int:
    """Number of trigger clicks in n_slots pulses (no quadrature sampling)."""
    p = zeta ** 2 * herald_probability_law(model.effective_alpha(alpha_in),
                                          model.kind)
    rng = np.random.default_rng([int(seed),
                                 int(round(alpha_in * 1e9)) & 0x7FFFFFFF])
    return int(rng.binomial(n_slots, min(p, 1.0)))


def simulate_probe_run(alpha_in: float, model: ImperfectionModel, zeta: float,
                       phases, samples_per_phase: int, seed: int,
                       dim: int = D_SIM) -> homodyne.QuadratureDataset:
    """Simulate one probe amplitude: herald draws plus homodyne samples.

    Each (phase, slot) is a pulse.  A slot heralds with probability
    zeta^2 * herald law of the effective amplitude; heralded slots sample the
    imperfect conditional state, the rest sample the unheralded channel.
    Slots are written in simulation order (heralded flag per record), with one
    deterministic random stream per (seed, alpha, theta).
    """
    phases = np.asarray(phases, dtype=float)
    alpha_box = model.effective_alpha(alpha_in)
    p_herald = min(zeta ** 2 * herald_probability_law(alpha_box, model.kind), 1.0)
    probe = coherent_state(alpha_box, dim).density()
    ideal = ideal_box_first_order(probe, model.kind, zeta)
    heralded = apply_imperfections(ideal, model, alpha_in)
    background = unheralded_state(alpha_in, model, dim)

    cols_a, cols_t, cols_x, cols_h = [], [], [], []
    for theta in phases:
        rng = _stream(seed, alpha_in, theta)
        flags = rng.random(samples_per_phase) < p_herald
        k = int(flags.sum())
        x = np.empty(samples_per_phase)
        if k:
            x[flags] = homodyne.sample_quadratures(
                heralded.conditional_state, theta, k, rng)
        if samples_per_phase - k:
            x[~flags] = homodyne.sample_quadratures(
                background, theta, samples_per_phase - k, rng)
        cols_a.append(np.full(samples_per_phase, alpha_in))
        cols_t.append(np.full(samples_per_phase, theta))
        cols_x.append(x)
        cols_h.append(flags)

    fmt = homodyne.FILE_FLOAT_FMT
    meta = {
        "kind": model.kind.value,
        "t1": fmt % model.t1,
        "t2": fmt % model.t2,
        "zeta": fmt % zeta,
        "seed": str(int(seed)),
        "alpha_in": fmt % alpha_in,
        "alpha_box": fmt % alpha_box,
        "delta_x": fmt % model.displacement(alpha_in),
        "n_phases": str(len(phases)),
        "samples_per_phase": str(int(samples_per_phase)),
        "herald_probability": fmt % p_herald,
        "unheralded_model": ("attenuated_probe"
                             if model.kind is BlackBoxKind.ANNIHILATION
                             else "extrapolated_lossy_probe"),
    }
    return homodyne.QuadratureDataset(
        np.concatenate(cols_a), np.concatenate(cols_t), np.concatenate(cols_x),
        np.concatenate(cols_h), meta)
