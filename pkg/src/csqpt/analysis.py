"""Derived reports on process tensors.

Photon-number transfer diagonals, worst-case fidelity over truncated input
subspaces, count-rate law fits, Wigner functions of the heralded outputs and
a scalar fidelity to the ideal map.  Everything here is a pure computation;
file output and rendering live in the command-line layer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .boxes import BlackBoxKind
from .fock import (DensityMatrix, annihilation_matrix, coherent_state,
                   creation_matrix, density_fidelity, wigner)
from .tomography import ProcessTensor, apply_process, ideal_process_tensor

log = logging.getLogger(__name__)

# Output traces at or below this are treated as "the process never heralds
# on this input" rather than as small numbers.
TRACE_FLOOR = 1e-12


def diagonal_elements(t: ProcessTensor, imag_tol: float = 1e-6) -> np.ndarray:
    """Real matrix D[m, k] = E^{mm}_{kk}: weight of output |k> given input |m>.

    The diagonal of a Hermitian tensor is real up to numerical noise; an
    imaginary part above ``imag_tol`` means the tensor is corrupt.
    """
    diag = np.einsum("mmkk->mk", t.elements)
    worst = float(np.abs(diag.imag).max()) if diag.size else 0.0
    if worst > imag_tol:
        raise ValueError(f"diagonal elements carry imaginary part {worst:.3e}")
    return np.ascontiguousarray(diag.real)


def off_target_mass(t: ProcessTensor, kind: BlackBoxKind) -> np.ndarray:
    """Per-row fraction 1 - D[m, target] / sum_k D[m, k] of the diagonal
    sitting away from the ideal output index (nan for empty rows)."""
    diag = diagonal_elements(t)
    d = t.dim_in
    shift = -1 if kind is BlackBoxKind.ANNIHILATION else 1
    out = np.full(d, np.nan)
    for m in range(d):
        k = m + shift
        total = diag[m].sum()
        if 0 <= k < t.dim_out and total > 0.0:
            out[m] = 1.0 - diag[m, k] / total
    return out


# ---------------------------------------------------------------------------
# worst-case fidelity

@dataclass
class FidelityReport:
    fidelity: float
    state: np.ndarray        # worst input state in the full Fock space
    n: int
    kind: BlackBoxKind
    restarts: int
    skipped: int             # candidates dropped for vanishing output trace


def _angles_to_state(params: np.ndarray, n: int) -> np.ndarray:
    """Unit vector in C^n from 2n - 2 hypersphere angles.

    c_0 = cos t_1, c_i = sin t_1 .. sin t_i cos t_{i+1} e^{i phi_i}; the
    leading coefficient is real, which fixes the global phase and leaves a
    redundancy-free chart for the descent.
    """
    c = np.zeros(n, dtype=complex)
    if n == 1:
        c[0] = 1.0
        return c
    polar, rel = params[:n - 1], params[n - 1:]
    amp = 1.0
    for i in range(n - 1):
        phase = np.exp(1j * rel[i - 1]) if i > 0 else 1.0
        c[i] = amp * np.cos(polar[i]) * phase
        amp *= np.sin(polar[i])
    c[n - 1] = amp * np.exp(1j * rel[n - 2])
    return c


def worst_case_fidelity(t: ProcessTensor, kind: BlackBoxKind, n: int,
                        seed: int, restarts: int = 64) -> FidelityReport:
    """Minimize <psi_t| E(|psi><psi|) |psi_t> / tr E(|psi><psi|) over the
    truncated input subspace.

    psi runs over unit vectors in span{|1>..|n>} for annihilation or
    span{|0>..|n-1>} for creation, and psi_t is the normalized ideal image
    (a or a^dag applied to psi).  Search: ``restarts`` Nelder-Mead descents
    on the hypersphere angles, each run to 1e-8 simplex convergence, best
    (lowest) value kept.  Candidates whose output trace falls below
    TRACE_FLOOR are skipped and logged rather than scored.
    """
    d = t.dim_in
    if not 1 <= n <= d - 1:
        raise ValueError(f"subspace size {n} outside [1, {d - 1}]")
    if kind is BlackBoxKind.ANNIHILATION:
        offset, ladder = 1, annihilation_matrix(d)
    else:
        offset, ladder = 0, creation_matrix(d)
    skipped = 0

    def score(params: np.ndarray) -> float:
        nonlocal skipped
        psi = np.zeros(d, dtype=complex)
        psi[offset:offset + n] = _angles_to_state(params, n)
        rho_out = apply_process(t, np.outer(psi, psi.conj())).elements
        tr = float(np.trace(rho_out).real)
        if tr <= TRACE_FLOOR:
            skipped += 1
            log.info("worst_case_fidelity: zero-trace candidate skipped "
                     "(n=%d, kind=%s)", n, kind.value)
            return 2.0
        target = ladder @ psi
        target /= np.linalg.norm(target)
        return float((target.conj() @ rho_out @ target).real) / tr

    if n == 1:
        best_x = np.empty(0)
        best = score(best_x)
        if best == 2.0:
            raise ValueError("output trace vanishes on the whole subspace")
    else:
        rng = np.random.default_rng(seed)
        best, best_x = np.inf, None
        for _ in range(restarts):
            x0 = np.concatenate([rng.uniform(0.0, np.pi, n - 1),
                                 rng.uniform(0.0, 2.0 * np.pi, n - 1)])
            res = optimize.minimize(
                score, x0, method="Nelder-Mead",
                options={"xatol": 1e-8, "fatol": 1e-10,
                         "maxiter": 6000, "maxfev": 6000})
            if res.fun < best:
                best, best_x = float(res.fun), res.x
        if best_x is None or best >= 2.0:
            raise ValueError("output trace vanishes on the whole subspace")
    psi = np.zeros(d, dtype=complex)
    psi[offset:offset + n] = _angles_to_state(best_x, n)
    return FidelityReport(fidelity=float(best), state=psi, n=n, kind=kind,
                          restarts=restarts if n > 1 else 1, skipped=skipped)


# ---------------------------------------------------------------------------
# count-rate fits

@dataclass(frozen=True)
class CountRateFit:
    kind: BlackBoxKind
    scale: float
    quad_coeff: float | None   # b in scale (1 + b alpha^2); None for the
    chi2: float                # b-free annihilation form scale alpha^2
    dof: int
    p_value: float
    alphas: np.ndarray
    fractions: np.ndarray

    def model(self, alpha) -> np.ndarray:
        a2 = np.asarray(alpha, dtype=float) ** 2
        if self.kind is BlackBoxKind.ANNIHILATION:
            return self.scale * a2
        return self.scale * (1.0 + self.quad_coeff * a2)


def fit_count_rates(rates, kind: BlackBoxKind) -> CountRateFit:
    """Weighted least-squares fit of click fraction versus probe amplitude.

    ``rates`` holds (alpha, count, total) triples, alpha being the effective
    box amplitude.  Model: scale * alpha^2 for annihilation, or
    scale * (1 + b alpha^2) for creation.  Weights are inverse binomial
    variances of the observed fractions, floored at the one-count level so
    zero-count points keep a finite weight.
    """
    arr = np.asarray(list(rates), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("rates must be (alpha, count, total) triples")
    alphas, counts, totals = arr.T
    if np.unique(alphas).size < 3:
        raise ValueError("need at least 3 distinct amplitudes")
    if np.any(totals <= 0) or np.any(counts < 0) or np.any(counts > totals):
        raise ValueError("counts outside [0, total]")
    frac = counts / totals
    var = np.maximum(frac * (1.0 - frac), 1.0 / totals) / totals
    sw = 1.0 / np.sqrt(var)
    if kind is BlackBoxKind.ANNIHILATION:
        design = (alphas ** 2)[:, None]
    else:
        design = np.column_stack([np.ones_like(alphas), alphas ** 2])
    coef, *_ = np.linalg.lstsq(design * sw[:, None], frac * sw, rcond=None)
    resid = (frac - design @ coef) * sw
    chi2 = float(resid @ resid)
    dof = alphas.size - design.shape[1]
    p_value = float(stats.chi2.sf(chi2, dof)) if dof > 0 else float("nan")
    if kind is BlackBoxKind.ANNIHILATION:
        scale, b = float(coef[0]), None
    else:
        scale = float(coef[0])
        if scale == 0.0:
            raise ValueError("degenerate fit: vanishing constant term")
        b = float(coef[1] / scale)
    return CountRateFit(kind=kind, scale=scale, quad_coeff=b, chi2=chi2,
                        dof=dof, p_value=p_value, alphas=alphas.copy(),
                        fractions=frac)


# ---------------------------------------------------------------------------
# Wigner functions of heralded outputs

@dataclass
class WignerEntry:
    alpha: float
    herald_weight: float       # unnormalized output trace
    field: np.ndarray | None   # None when the probe never heralds
    min_value: float | None
    min_x: float | None
    min_p: float | None
    note: str = ""


@dataclass
class WignerReport:
    xs: np.ndarray
    ps: np.ndarray
    entries: list


def wigner_report(t: ProcessTensor, alphas, xs, ps) -> WignerReport:
    """Wigner functions of the renormalized heralded outputs on coherent
    probes, with the minimum value and its phase-space location per probe.

    Probes with vanishing herald probability yield a skipped entry carrying
    an explanatory note instead of a field.
    """
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    entries = []
    for alpha in alphas:
        probe = coherent_state(alpha, t.dim_in).density()
        out = apply_process(t, probe)
        tr = out.trace()
        if tr <= TRACE_FLOOR:
            entries.append(WignerEntry(float(alpha), tr, None, None, None,
                                       None, "herald probability vanishes"))
            continue
        w = wigner(DensityMatrix(out.elements / tr), xs, ps)
        i, j = np.unravel_index(int(np.argmin(w)), w.shape)
        entries.append(WignerEntry(float(alpha), tr, w, float(w[i, j]),
                                   float(xs[j]), float(ps[i])))
    return WignerReport(xs=xs, ps=ps, entries=entries)


def process_fidelity_to_ideal(t: ProcessTensor, kind: BlackBoxKind) -> float:
    """Uhlmann fidelity between the unit-trace Jamiolkowski operators of the
    tensor and of the ideal first-order map of the given kind."""
    if t.dim_in != t.dim_out:
        raise ValueError("tensor input and output dimensions differ")
    ideal = ideal_process_tensor(kind, t.dim_in)
    return density_fidelity(DensityMatrix(t.choi_matrix()),
                            DensityMatrix(ideal.choi_matrix()))
