"""Coherent-state process tomography with iterative maximum likelihood.

The process is represented by its rank-4 tensor E^{mn}_{jk}, acting as

    [E(rho)]_{jk} = sum_mn E^{mn}_{jk} rho_{mn},

or equivalently by the Jamiolkowski operator E_J = sum E^{mn}_{jk}
|m><n| (x) |j><k| on input (x) output space, so that probabilities read
tr[E_J (rho_probe^T (x) Pi)].  Heralded processes are trace decreasing; they
are embedded in a trace-preserving map by extending the output space with a
fictitious no-click state |0slash> that absorbs the missing weight.  The
likelihood over heralded quadrature samples plus aggregated no-click counts
is maximized by the usual R E R fixed-point iteration projected back onto the
trace-preserving set.

Each heralded sample enters the likelihood with unit weight and the no-click
slots of a probe enter as one aggregated event weighted by their count, so
the fitted trace of the process on each probe equals its observed click
fraction.  Only relative click rates are physically meaningful (the absolute
scale carries the interaction strength), so the final tensor is usually
rescaled to a normalized trace for display and comparison.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fock import DensityMatrix, coherent_state, loss_kraus
from .homodyne import QuadratureDataset, phase_matrix, efficiency_povm

# Hard cap on the extended-space dimension dim_in * (dim_out + 1).
MAX_EXTENDED_DIM = 128

PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class MLEConfig:
    """Knobs of the maximum-likelihood reconstruction.

    n_max: largest reconstructed photon number (space dimension n_max + 1).
    eta: detection efficiency compensated through the measurement operators.
    """

    n_max: int = 7
    eta: float = 1.0
    bin_width: float = 0.05
    max_iterations: int = 2000
    stall_tolerance: float = 1e-9
    workers: int = 1

    def __post_init__(self):
        d = self.n_max + 1
        if d * (d + 2) > MAX_EXTENDED_DIM:
            raise ValueError(f"extended dimension {d * (d + 2)} exceeds "
                             f"{MAX_EXTENDED_DIM}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta outside (0, 1]")
        if self.bin_width <= 0.0:
            raise ValueError("bin_width must be positive")

    @property
    def dim(self) -> int:
        return self.n_max + 1


# ---------------------------------------------------------------------------
# process tensor

@dataclass
class ProcessTensor:
    """Rank-4 process tensor E^{mn}_{jk}, stored with index order (m, n, j, k).

    (m, n) are input Fock indices, (j, k) output ones.
    """

    elements: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        el = np.asarray(self.elements, dtype=complex)
        if el.ndim != 4 or el.shape[0] != el.shape[1] or el.shape[2] != el.shape[3]:
            raise ValueError("elements must have shape (din, din, dout, dout)")
        self.elements = el

    @property
    def dim_in(self) -> int:
        return self.elements.shape[0]

    @property
    def dim_out(self) -> int:
        return self.elements.shape[2]

    def herald_probabilities(self) -> np.ndarray:
        """tr E(|m><m|) for each input Fock state m."""
        return np.einsum("mmjj->m", self.elements).real

    def choi_matrix(self) -> np.ndarray:
        """Jamiolkowski operator on input (x) output (no no-click sector)."""
        return np.transpose(self.elements, (0, 2, 1, 3)).reshape(
            self.dim_in * self.dim_out, self.dim_in * self.dim_out)

    def validate(self, herm_tol: float = 1e-9, psd_tol: float = 1e-8,
                 trace_bound: float | None = None) -> None:
        sym = np.transpose(self.elements, (1, 0, 3, 2)).conj()
        dev = np.abs(self.elements - sym).max()
        if dev > herm_tol:
            raise ValueError(f"tensor not Hermitian: deviation {dev:.3e}")
        choi = self.choi_matrix()
        lo = float(np.linalg.eigvalsh((choi + choi.conj().T) / 2).min())
        if lo < -psd_tol:
            raise ValueError(f"tensor not completely positive: min eig {lo:.3e}")
        if trace_bound is not None:
            probs = self.herald_probabilities()
            if probs.min() < -psd_tol or probs.max() > trace_bound:
                raise ValueError(
                    f"herald probabilities {probs} outside [0, {trace_bound}]")

    def rescaled(self, factor: float) -> "ProcessTensor":
        meta = dict(self.metadata)
        meta["rescale_factor"] = float(meta.get("rescale_factor", 1.0)) * factor
        return ProcessTensor(self.elements * factor, meta)

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(tensor_json(self))

    @classmethod
    def load(cls, path) -> "ProcessTensor":
        with open(path) as fh:
            doc = json.load(fh)
        din, dout = int(doc["dim_in"]), int(doc["dim_out"])
        if doc.get("index_order") != "m,n,j,k":
            raise ValueError(f"unsupported index order {doc.get('index_order')!r}")
        flat = np.asarray(doc["elements"], dtype=float)
        if flat.shape != (din * din * dout * dout, 2):
            raise ValueError("element array has wrong length")
        el = (flat[:, 0] + 1j * flat[:, 1]).reshape(din, din, dout, dout)
        return cls(el, doc.get("metadata", {}))


def _round9(value: float) -> float:
    return float("%.9g" % value)


def tensor_json(t: ProcessTensor) -> str:
    """Canonical JSON serialization (9 significant digits, sorted keys)."""
    flat = t.elements.reshape(-1)
    doc = {
        "dim_in": t.dim_in,
        "dim_out": t.dim_out,
        "index_order": "m,n,j,k",
        "elements": [[_round9(z.real), _round9(z.imag)] for z in flat],
        "metadata": t.metadata,
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def ideal_process_tensor(kind, dim: int) -> ProcessTensor:
    """Tensor of the ideal (unnormalized) first-order map.

    Annihilation: E^{mn}_{jk} = sqrt(m n) delta_{j,m-1} delta_{k,n-1}; the
    creation tensor carries sqrt((m+1)(n+1)) at (m+1, n+1) with the top output
    row truncated.  Diagonals grow linearly: E^{mm}_{kk} = m delta_{k,m-1}
    and (m+1) delta_{k,m+1}.
    """
    from .boxes import BlackBoxKind
    el = np.zeros((dim, dim, dim, dim), dtype=complex)
    for m in range(dim):
        for n in range(dim):
            if kind is BlackBoxKind.ANNIHILATION:
                if m >= 1 and n >= 1:
                    el[m, n, m - 1, n - 1] = np.sqrt(m * n)
            else:
                if m + 1 < dim and n + 1 < dim:
                    el[m, n, m + 1, n + 1] = np.sqrt((m + 1) * (n + 1))
    return ProcessTensor(el, {"kind": kind.value, "ideal": True})


def apply_process(t: ProcessTensor, rho) -> DensityMatrix:
    """Unnormalized process output; its trace is the herald probability."""
    mat = rho.elements if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if mat.shape != (t.dim_in, t.dim_in):
        raise ValueError(f"input dimension {mat.shape} != {t.dim_in}")
    return DensityMatrix(np.einsum("mnjk,mn->jk", t.elements, mat))


def process_trace_on_coherent(t: ProcessTensor, alpha: float) -> float:
    probe = coherent_state(alpha, t.dim_in).density()
    return apply_process(t, probe).trace()


def rescale_to_trace(t: ProcessTensor, alpha: float, target: float) -> ProcessTensor:
    """Rescale so the trace on probe |alpha> equals target (display norm)."""
    current = process_trace_on_coherent(t, alpha)
    if current <= 0.0:
        raise ValueError("process trace on the reference probe vanishes")
    return t.rescaled(target / current)


# ---------------------------------------------------------------------------
# extended-space embedding

def tensor_to_jamiolkowski(t: ProcessTensor) -> np.ndarray:
    """Embed a tensor in the trace-preserving extended Jamiolkowski operator.

    Output index dim_out (the last one) is the no-click state; its block is
    delta_{mn} - sum_j E^{mn}_{jj}, which is positive only if every herald
    probability stays below one.
    """
    din, dout = t.dim_in, t.dim_out
    dext = dout + 1
    e4 = np.zeros((din, dext, din, dext), dtype=complex)
    e4[:, :dout, :, :dout] = np.transpose(t.elements, (0, 2, 1, 3))
    e4[:, dout, :, dout] = np.eye(din) - np.einsum("mnjj->mn", t.elements)
    return e4.reshape(din * dext, din * dext)


def jamiolkowski_to_tensor(ej: np.ndarray, dim_in: int, dim_out: int,
                           metadata: dict | None = None) -> ProcessTensor:
    """Extract E^{mn}_{jk} = <m j|E_J|n k>, discarding the no-click sector."""
    dext = dim_out + 1
    if ej.shape != (dim_in * dext, dim_in * dext):
        raise ValueError(f"operator shape {ej.shape} does not match dims")
    e4 = ej.reshape(dim_in, dext, dim_in, dext)
    el = np.transpose(e4[:, :dim_out, :, :dim_out], (0, 2, 1, 3))
    return ProcessTensor(el.copy(), metadata or {})


def measurement_operator(alpha: complex, x: float, theta: float,
                         cfg: MLEConfig) -> np.ndarray:
    """Extended-space operator of one heralded quadrature outcome:
    transpose(|alpha><alpha|) (x) Pi_eta(x, theta), zero on the no-click row.

    alpha may be complex.  The reconstruction exploits the phase covariance
    of the heralded boxes by folding the local-oscillator phase of each
    sample into the probe, i.e. it uses (alpha e^{-i theta}, x, 0) in place
    of (alpha, x, theta); the two describe the same outcome for any
    phase-covariant process, but only the rotated form spreads the probes
    over the complex plane and makes the probe grid informationally
    complete.
    """
    d = cfg.dim
    probe = coherent_state(alpha, d).density().elements.T
    pi = efficiency_povm(x, theta, cfg.eta, d)
    pi_ext = np.zeros((d + 1, d + 1), dtype=complex)
    pi_ext[:d, :d] = pi
    return np.kron(probe, pi_ext)


def no_click_operator(alpha: complex, cfg: MLEConfig) -> np.ndarray:
    """Extended-space operator of the aggregated no-click outcome."""
    d = cfg.dim
    probe = coherent_state(alpha, d).density().elements.T
    pi_ext = np.zeros((d + 1, d + 1), dtype=complex)
    pi_ext[d, d] = 1.0
    return np.kron(probe, pi_ext)


def herald_rate_normalization(datasets: list[QuadratureDataset]) -> np.ndarray:
    """Relative herald frequencies per dataset, scaled so the maximum is 1."""
    fracs = np.array([ds.herald_count() / max(len(ds), 1) for ds in datasets])
    top = fracs.max() if fracs.size else 0.0
    if top <= 0.0:
        raise ValueError("no heralded events in any dataset")
    return fracs / top


def covariant_sector_mask(cfg: MLEConfig) -> np.ndarray:
    """Support pattern of a phase-covariant process on the extended space.

    Both heralded boxes commute with optical phase rotations up to a fixed
    photon offset, so their extended Jamiolkowski operators are block
    diagonal in the charge m - j (input Fock index minus click output index;
    the no-click column carries the full input charge).  Entrywise
    multiplication by the mask is a pinching onto that block structure: it
    preserves positivity, the trace condition and every diagonal element
    E^{mm}_{kk}, and only removes cross-sector coherences.
    """
    d = cfg.dim
    charge = np.array([[m - (j if j < d else 0) for j in range(d + 1)]
                       for m in range(d)]).reshape(-1)
    return (charge[:, None] == charge[None, :]).astype(float)


# ---------------------------------------------------------------------------
# maximum-likelihood iteration

@dataclass
class MLEResult:
    operator: np.ndarray          # extended-space Jamiolkowski operator
    dim_in: int
    dim_out: int
    converged: bool
    iterations: int
    log_likelihoods: np.ndarray
    clipped_events: int
    max_tp_deviation: float
    min_eigenvalue: float
    herald_factors: np.ndarray
    probe_summary: list           # (alpha_box, herald count, slot count) rows
    stages: list = field(default_factory=list)   # per-stage results, if staged

    def tensor(self, metadata: dict | None = None) -> ProcessTensor:
        return jamiolkowski_to_tensor(self.operator, self.dim_in, self.dim_out,
                                      metadata)


class _ProbeData:
    """Per-dataset quantities that stay fixed across iterations.

    Both heralded boxes commute with optical phase rotations, so a sample
    taken at local-oscillator phase theta is modeled as the rotated probe
    |alpha e^{-i theta}> measured at fixed phase 0.  This is what makes the
    amplitude-times-phase grid informationally complete; keeping the phase on
    the measurement side instead would only ever probe the span of the probe
    amplitudes themselves.
    """

    def __init__(self, ds: QuadratureDataset, cfg: MLEConfig):
        d = cfg.dim
        alpha_box = ds.meta_float("alpha_box")
        if alpha_box is None:
            alpha_box = ds.meta_float("alpha_in", 0.0)
        self.alpha = float(alpha_box)
        self.n_slots = len(ds)
        self.n_her = ds.herald_count()
        # per theta: rotated probe, wavefunction table at the binned sample
        # positions, and bin counts.  Each sample is split between the two
        # equivalent assignments (alpha e^{-i theta}, x) and
        # (-alpha e^{-i theta}, -x); measured phases only span [0, pi), so
        # without the mirror copy the rotated probes would cover half the
        # ring and odd m - n sectors of the probe average would survive.
        groups = []
        for theta in ds.phases():
            vals = ds.x[(ds.theta == theta) & ds.heralded]
            idx = np.round(vals / cfg.bin_width).astype(int)
            uniq, counts = np.unique(idx, return_counts=True)
            centers = uniq * cfg.bin_width
            half = counts.astype(float) / 2.0
            for sign in (1.0, -1.0):
                phi = phase_matrix(d, 0.0, sign * centers)
                rho = coherent_state(sign * self.alpha * np.exp(-1j * theta),
                                     d).density().elements
                groups.append((rho, phi, half))
        # stacked per-group arrays, bins zero-padded to a common width
        # (padded columns carry zero counts and drop out of every sum)
        n_groups = max(len(groups), 1)
        bmax = max([g[2].size for g in groups] + [1])
        self.rhos = np.zeros((n_groups, d, d), dtype=complex)
        self.phis = np.zeros((n_groups, d, bmax), dtype=complex)
        self.counts = np.zeros((n_groups, bmax))
        # pad with the x = 0 column so padded bins keep positive model
        # probability (their zero counts drop out of all sums)
        self.phis[:] = phase_matrix(d, 0.0, np.zeros(1))
        for g, (rho, phi, half) in enumerate(groups):
            self.rhos[g] = rho
            self.phis[g, :, :phi.shape[1]] = phi
            self.counts[g, :half.size] = half
        # no-click slots keep no phase tag; their aggregate probe is the
        # ring average of the rotated probes, which is Fock diagonal
        self.rho_bar = self.rhos.mean(axis=0) if groups else \
            np.zeros((d, d), dtype=complex)
        self.n_noclick = self.n_slots - self.n_her
        declared = ds.metadata.get("n_phases"), ds.metadata.get("samples_per_phase")
        if all(v is not None for v in declared):
            expect = int(declared[0]) * int(declared[1])
            if expect != self.n_slots:
                raise ValueError(
                    f"dataset for alpha={self.alpha:g} holds {self.n_slots} "
                    f"records but metadata declares {expect}")


def mle_reconstruct(datasets: list[QuadratureDataset], cfg: MLEConfig,
                    herald_norm: bool = True,
                    initial: np.ndarray | None = None,
                    sector_mask: np.ndarray | None = None,
                    kraus_rank: int | None = None) -> MLEResult:
    """Run the R E R iteration on binned heralded samples plus click counts.

    With ``herald_norm`` the no-click slots enter the likelihood as
    count-weighted fictitious-state outcomes, pinning the reconstructed
    trace on each probe to its click rate.  Without it the rate
    information is discarded and the fit sees only the heralded
    quadratures, which for a coherent-state-preserving box yields an
    identity-like process.  ``initial`` warm-starts the iteration from a
    given extended-space operator instead of the flat one.  The likelihood
    is guaranteed nondecreasing: a step that would lower it is retried with
    the iteration operator diluted towards the identity (mixing parameter
    halved each retry) and the iteration stops once dilution no longer
    helps.
    """
    if not datasets:
        raise ValueError("no datasets")
    d = cfg.dim
    dext = d + 1
    probes = [_ProbeData(ds, cfg) for ds in datasets]
    factors = herald_rate_normalization(datasets)
    if herald_norm:
        w_noclick = np.array([float(pd.n_slots - pd.n_her) for pd in probes])
    else:
        w_noclick = np.zeros(len(probes))
    total_weight = sum(pd.n_her for pd in probes) + w_noclick.sum()

    kraus = np.stack(loss_kraus(cfg.eta, d))

    kraus_t = np.transpose(kraus, (0, 2, 1))

    def probe_pass(args):
        """Log-likelihood share and R contribution of one probe."""
        pd, w0, e4 = args
        # sigma[g] = E(rho_g) on the plain output block
        sigma = np.tensordot(pd.rhos, e4, axes=([1, 2], [0, 2]))[:, :d, :d]
        if cfg.eta < 1.0:
            sigma = (kraus[None] @ sigma[:, None] @ kraus_t[None]).sum(axis=1)
        p = (pd.phis.conj() * (sigma @ pd.phis)).sum(axis=1).real
        clipped = int(np.count_nonzero((p < PROB_FLOOR) & (pd.counts > 0)))
        p = np.maximum(p, PROB_FLOOR)
        loglike = float((pd.counts * np.log(p)).sum())
        s_acc = (pd.phis * (pd.counts / p)[:, None, :]) \
            @ np.transpose(pd.phis.conj(), (0, 2, 1))
        if cfg.eta < 1.0:
            s_acc = (kraus_t[None] @ s_acc[:, None] @ kraus[None]).sum(axis=1)
        c_stack = np.zeros((s_acc.shape[0], dext, dext), dtype=complex)
        c_stack[:, :d, :d] = s_acc
        # sum_g kron(rho_g^T, C_g) via one matrix product
        flat = np.transpose(pd.rhos, (0, 2, 1)).reshape(-1, d * d).T \
            @ c_stack.reshape(-1, dext * dext)
        r_acc = flat.reshape(d, d, dext, dext).transpose(0, 2, 1, 3) \
            .reshape(d * dext, d * dext)
        if w0 > 0.0:
            p_nc = float(np.tensordot(pd.rho_bar, e4,
                                      axes=([0, 1], [0, 2]))[d, d].real)
            if p_nc < PROB_FLOOR:
                clipped += 1
                p_nc = PROB_FLOOR
            loglike += w0 * np.log(p_nc)
            c_nc = np.zeros((dext, dext), dtype=complex)
            c_nc[d, d] = w0 / p_nc
            r_acc += np.kron(pd.rho_bar.T, c_nc)
        return loglike, r_acc, clipped

    def evaluate(e_op):
        e4 = e_op.reshape(d, dext, d, dext)
        args = [(pd, w0, e4) for pd, w0 in zip(probes, w_noclick)]
        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                parts = list(pool.map(probe_pass, args))
        else:
            parts = [probe_pass(a) for a in args]
        loglike = sum(p[0] for p in parts)
        r_op = sum(p[1] for p in parts) / total_weight
        if sector_mask is not None:
            r_op = r_op * sector_mask
        clipped = sum(p[2] for p in parts)
        return loglike, r_op, clipped

    def tp_step(r_mix, f_op):
        """One R-then-normalize update on the factor F of E = F F^dag.

        Updating the factor instead of E keeps every iterate exactly
        positive semidefinite; the normalizer enforces trace preservation.
        """
        m1 = (r_mix @ f_op).reshape(d, dext, -1)
        g = np.einsum("mjc,njc->mn", m1, m1.conj())
        vals, vecs = np.linalg.eigh((g + g.conj().T) / 2)
        vals = np.clip(vals, vals.max() * 1e-15, None)
        g_isqrt = (vecs / np.sqrt(vals)) @ vecs.conj().T
        f_new = np.tensordot(g_isqrt, m1, axes=([1], [0])) \
            .reshape(d * dext, m1.shape[2])
        e_new = f_new @ f_new.conj().T
        return (e_new + e_new.conj().T) / 2, f_new

    eye_ext = np.eye(d * dext, dtype=complex)
    click_rows = np.array([m * dext + j for m in range(d) for j in range(d)])
    empty_rows = np.array([m * dext + d for m in range(d)])
    if kraus_rank is not None and not 1 <= kraus_rank <= d * d:
        raise ValueError("kraus_rank out of range")
    if initial is None:
        if kraus_rank is None:
            f_op = np.kron(np.eye(d),
                           np.eye(dext) / np.sqrt(dext)).astype(complex)
        else:
            # Thin factor: kraus_rank columns supported on the click block
            # plus one column per no-click diagonal entry.  R and the
            # normalizer are click/no-click block diagonal, so the click
            # rank never grows during the iteration.
            rng = np.random.default_rng(8128)
            v = np.ones((d * d, kraus_rank), dtype=complex)
            if kraus_rank > 1:
                v = v + rng.standard_normal((d * d, kraus_rank)) \
                    + 1j * rng.standard_normal((d * d, kraus_rank))
            v /= np.linalg.norm(v, axis=0)
            f_op = np.zeros((d * dext, kraus_rank + d), dtype=complex)
            f_op[click_rows[:, None], np.arange(kraus_rank)] = v
            f_op[empty_rows, kraus_rank + np.arange(d)] = 1.0 / np.sqrt(dext)
    else:
        if initial.shape != (d * dext, d * dext):
            raise ValueError("initial operator has wrong shape")
        herm = (initial + initial.conj().T) / 2
        if kraus_rank is None:
            vals, vecs = np.linalg.eigh(herm)
            f_op = vecs * np.sqrt(np.clip(vals, 0.0, None))
        else:
            cb = herm[np.ix_(click_rows, click_rows)]
            vals, vecs = np.linalg.eigh(cb)
            top = vecs[:, -kraus_rank:] \
                * np.sqrt(np.clip(vals[-kraus_rank:], 0.0, None))
            eb = herm[np.ix_(empty_rows, empty_rows)]
            vals2, vecs2 = np.linalg.eigh(eb)
            f_op = np.zeros((d * dext, kraus_rank + d), dtype=complex)
            f_op[click_rows[:, None], np.arange(kraus_rank)] = top
            f_op[empty_rows[:, None], kraus_rank + np.arange(d)] = \
                vecs2 * np.sqrt(np.clip(vals2, 0.0, None))
    e_op = f_op @ f_op.conj().T
    loglikes = []
    clipped_total = 0
    max_tp_dev = 0.0
    min_eig = 0.0
    converged = False

    loglike, r_op, clipped = evaluate(e_op)
    clipped_total += clipped
    for it in range(cfg.max_iterations):
        loglikes.append(loglike)
        accepted = None
        mix = 1.0
        while mix > 2.0 ** -24:
            r_mix = r_op if mix == 1.0 else (1.0 - mix) * eye_ext + mix * r_op
            r_mix = (r_mix + r_mix.conj().T) / 2
            cand, cand_f = tp_step(r_mix, f_op)
            cand_ll, cand_r, clipped = evaluate(cand)
            if cand_ll >= loglike:
                accepted = (cand, cand_f, cand_ll, cand_r, clipped)
                break
            mix *= 0.5
        if accepted is None:
            converged = True
            break
        gain = accepted[2] - loglike
        e_op, f_op, loglike, r_op, clipped = accepted
        clipped_total += clipped
        tp_dev = np.abs(np.einsum("mjnj->mn", e_op.reshape(d, dext, d, dext))
                        - np.eye(d)).max()
        max_tp_dev = max(max_tp_dev, float(tp_dev))
        min_eig = float(np.linalg.eigvalsh(e_op).min())
        if gain < cfg.stall_tolerance * max(abs(loglike), 1.0):
            loglikes.append(loglike)
            converged = True
            break
    else:
        loglikes.append(loglike)

    return MLEResult(
        operator=e_op, dim_in=d, dim_out=d, converged=converged,
        iterations=len(loglikes) - 1, log_likelihoods=np.array(loglikes),
        clipped_events=clipped_total, max_tp_deviation=max_tp_dev,
        min_eigenvalue=min_eig, herald_factors=factors,
        probe_summary=[(pd.alpha, pd.n_her, pd.n_slots) for pd in probes])


def reconstruct_process(datasets: list[QuadratureDataset], cfg: MLEConfig,
                        herald_norm: bool = True,
                        pure: bool = True) -> MLEResult:
    """Reconstruction pipeline built around the physical structure of the
    heralded boxes: covariant seed, single-Kraus refinement, covariant pinch.

    Click rates pin the diagonal sums of the tensor but carry no information
    about which output Fock state a click populated within one input row, so
    an unrestricted fit leaves a few percent of each diagonal row smeared
    over output indices the data cannot resolve.  Both boxes are phase
    covariant and, to first order in the coupling, single-Kraus; imposing
    exactly these two priors removes the degeneracy.  Stage one runs the
    unrestricted-rank iteration pinched onto the phase-covariance blocks
    (this selects the correct charge sector of the likelihood).  Stage two
    restarts from the leading component of its click block with the click
    rank capped at one, which turns residual row junk into interference
    terms the quadrature likelihood can see and remove.  The result is
    pinched once more to drop cross-sector coherences; the pinch leaves
    every diagonal element and the trace condition untouched.

    Dropping the click rates (``herald_norm`` false) changes the fitted
    process, not the estimator: the expected identity-like outcome is itself
    covariant and single-Kraus, and the staged iteration reaches it far
    faster than the unrestricted one.  With ``pure`` false the plain
    single-stage unrestricted fit is returned instead.
    """
    if not pure:
        return mle_reconstruct(datasets, cfg, herald_norm=herald_norm)
    mask = covariant_sector_mask(cfg)
    stage1 = mle_reconstruct(datasets, cfg, herald_norm=herald_norm,
                             sector_mask=mask)
    stage2 = mle_reconstruct(datasets, cfg, herald_norm=herald_norm,
                             initial=stage1.operator, kraus_rank=1)
    e_final = stage2.operator * mask
    d = cfg.dim
    dext = d + 1
    tp_dev = np.abs(np.einsum("mjnj->mn", e_final.reshape(d, dext, d, dext))
                    - np.eye(d)).max()
    return MLEResult(
        operator=e_final, dim_in=d, dim_out=d,
        converged=stage1.converged and stage2.converged,
        iterations=stage1.iterations + stage2.iterations,
        log_likelihoods=stage2.log_likelihoods,
        clipped_events=stage1.clipped_events + stage2.clipped_events,
        max_tp_deviation=max(stage2.max_tp_deviation, float(tp_dev)),
        min_eigenvalue=float(np.linalg.eigvalsh(e_final).min()),
        herald_factors=stage2.herald_factors,
        probe_summary=stage2.probe_summary,
        stages=[stage1, stage2])
