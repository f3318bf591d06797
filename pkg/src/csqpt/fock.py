"""Truncated Fock-space linear algebra for continuous-variable optics.

Conventions used throughout the package:

    X = (a + a^dag) / sqrt(2),  P = i (a^dag - a) / sqrt(2)

so the vacuum quadrature variance is 1/2 and a coherent state |alpha> has
<X_theta> = sqrt(2) |alpha| cos(theta - arg alpha).  Wigner functions are
normalized so that the (x, p) integral equals the trace of the state.

Everything lives in a Fock space truncated at ``dim`` levels (photon numbers
0 .. dim-1).  Operators are plain complex ndarrays; states come wrapped in
small dataclasses that carry validation helpers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammaln

# Weight above the cutoff at which truncated states get flagged.
TRUNCATION_WEIGHT_WARN = 1e-4


class TruncationWarning(UserWarning):
    """Raised when a truncated object lost non-negligible weight."""


@dataclass(frozen=True, eq=False)
class PureState:
    """State vector on the truncated Fock space.

    ``truncated_weight`` records probability mass that fell above the cutoff
    during construction (before renormalization); it is 0.0 for states built
    directly from amplitudes.
    """

    amplitudes: np.ndarray
    truncated_weight: float = 0.0

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.ndim != 1 or amp.size < 1:
            raise ValueError("amplitudes must be a non-empty 1-d array")
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def truncation_flag(self) -> bool:
        return self.truncated_weight > TRUNCATION_WEIGHT_WARN

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "PureState":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return PureState(self.amplitudes / n, self.truncated_weight)

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian positive operator with trace in (0, 1]."""

    elements: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.elements, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("elements must be a square matrix")
        object.__setattr__(self, "elements", mat)

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.elements).real)

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(self.elements @ op))

    def normalized(self) -> "DensityMatrix":
        t = self.trace()
        if t <= 0.0:
            raise ValueError("cannot normalize a non-positive-trace operator")
        return DensityMatrix(self.elements / t)

    def validate(self, herm_tol: float = 1e-10, psd_tol: float = 1e-9,
                 max_trace: float = 1.0 + 1e-9) -> None:
        """Raise ValueError unless Hermitian, positive and trace in (0, max]."""
        dev = np.abs(self.elements - self.elements.conj().T).max()
        if dev > herm_tol:
            raise ValueError(f"not Hermitian: max deviation {dev:.3e}")
        t = self.trace()
        if not (0.0 < t <= max_trace):
            raise ValueError(f"trace {t:.6g} outside (0, {max_trace:.6g}]")
        lo = float(np.linalg.eigvalsh((self.elements + self.elements.conj().T) / 2).min())
        if lo < -psd_tol:
            raise ValueError(f"not positive semidefinite: min eigenvalue {lo:.3e}")


# ---------------------------------------------------------------------------
# states

def fock_state(n: int, dim: int) -> PureState:
    if not 0 <= n < dim:
        raise ValueError(f"photon number {n} outside [0, {dim})")
    amp = np.zeros(dim, dtype=complex)
    amp[n] = 1.0
    return PureState(amp)


def coherent_state(alpha: complex, dim: int) -> PureState:
    """Truncated, renormalized coherent state.

    The untruncated amplitudes are exp(-|alpha|^2/2) alpha^n / sqrt(n!); the
    truncated vector is renormalized and the discarded weight recorded (states
    losing more than TRUNCATION_WEIGHT_WARN have ``truncation_flag`` set).
    """
    amp = np.empty(dim, dtype=complex)
    amp[0] = np.exp(-abs(alpha) ** 2 / 2.0)
    for n in range(1, dim):
        amp[n] = amp[n - 1] * alpha / np.sqrt(n)
    kept = float(np.sum(np.abs(amp) ** 2))
    lost = max(0.0, 1.0 - kept)
    return PureState(amp / np.sqrt(kept), truncated_weight=lost)


# ---------------------------------------------------------------------------
# operators

def annihilation_matrix(dim: int) -> np.ndarray:
    """Matrix of a with a[m-1, m] = sqrt(m)."""
    if dim < 2:
        raise ValueError("need dim >= 2 for a ladder operator")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def creation_matrix(dim: int) -> np.ndarray:
    """Conjugate transpose of the annihilation matrix."""
    return annihilation_matrix(dim).conj().T


def number_operator(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def displacement_operator(beta: complex, dim: int) -> np.ndarray:
    """exp(beta a^dag - beta* a) on the truncated space.

    Exactly unitary (the truncated generator is still anti-Hermitian) but only
    approximates the infinite-dimensional displacement; accurate while
    |beta|^2 stays well below dim.
    """
    if abs(beta) ** 2 > dim / 4.0:
        warnings.warn(
            f"displacement |beta|^2 = {abs(beta)**2:.3g} is large for dim {dim}; "
            "expect truncation error", TruncationWarning, stacklevel=2)
    a = annihilation_matrix(dim)
    return expm(beta * a.conj().T - np.conj(beta) * a)


def displacement_matrix_element(m: int, n: int, beta: complex) -> complex:
    """<m|D(beta)|n> of the untruncated displacement operator.

    Closed form via associated Laguerre polynomials; exact for any m, n, so it
    carries no Fock truncation error (unlike the matrix exponential route).
    """
    if m < 0 or n < 0:
        raise ValueError("negative Fock index")
    if n > m:
        # <m|D(b)|n> = conj(<n|D(-b)|m>) reduces to the m >= n branch
        m, n = n, m
        beta = -np.conj(beta)
    b2 = abs(beta) ** 2
    logpref = 0.5 * (gammaln(n + 1) - gammaln(m + 1))
    val = np.exp(logpref - b2 / 2.0) * beta ** (m - n) * eval_genlaguerre(n, m - n, b2)
    return complex(val)


# ---------------------------------------------------------------------------
# channels

def loss_kraus(eta: float, dim: int) -> list[np.ndarray]:
    """Kraus operators of the transmission-eta loss channel.

    K_k maps |n> to sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k>; built element-wise
    so the set is exactly trace preserving on the truncated space.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmission {eta} outside [0, 1]")
    ks = []
    ns = np.arange(dim)
    for k in range(dim):
        mat = np.zeros((dim, dim))
        if eta == 0.0:
            if k < dim:
                mat[0, k] = 1.0
        else:
            valid = ns >= k
            n = ns[valid]
            logc = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
            amp2 = np.exp(logc + (n - k) * np.log(eta)) * (1.0 - eta) ** k
            mat[n - k, n] = np.sqrt(amp2)
        ks.append(mat)
    return ks


def loss_channel(rho: DensityMatrix, eta: float) -> DensityMatrix:
    """Beam-splitter loss with transmission eta (vacuum in the idle port)."""
    out = np.zeros_like(rho.elements)
    for k in loss_kraus(eta, rho.dim):
        out += k @ rho.elements @ k.T
    return DensityMatrix(out)


# ---------------------------------------------------------------------------
# quadrature wavefunctions

def quadrature_wavefunctions(nmax: int, x: np.ndarray) -> np.ndarray:
    """Harmonic-oscillator wavefunctions psi_n(x) for n = 0..nmax.

    psi_n(x) = pi^(-1/4) (2^n n!)^(-1/2) H_n(x) exp(-x^2/2), evaluated with the
    stable two-term recurrence (no explicit factorials, safe for large n).
    Returns an array of shape (nmax + 1, len(x)).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((nmax + 1, x.size))
    out[0] = np.pi ** -0.25 * np.exp(-x ** 2 / 2.0)
    if nmax >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(2, nmax + 1):
        out[n] = np.sqrt(2.0 / n) * x * out[n - 1] - np.sqrt((n - 1.0) / n) * out[n - 2]
    return out


def quadrature_wavefunction(n: int, x) -> np.ndarray | float:
    scalar = np.isscalar(x)
    vals = quadrature_wavefunctions(n, np.atleast_1d(x))[n]
    return float(vals[0]) if scalar else vals


# ---------------------------------------------------------------------------
# Wigner function

def wigner(rho: DensityMatrix, xs: np.ndarray, ps: np.ndarray) -> np.ndarray:
    """Wigner function W(x, p) on the tensor grid xs x ps.

    Uses the displaced-parity form W = (1/pi) tr[rho Pi D(-2 alpha)] with
    alpha = (x + i p)/sqrt(2), evaluated through exact untruncated
    displacement matrix elements, so states supported inside the cutoff get an
    exact Wigner function.  Output shape is (len(ps), len(xs)), rows indexed
    by p; integral over dx dp equals tr rho.
    """
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    xg, pg = np.meshgrid(xs, ps)
    beta = -2.0 * (xg + 1j * pg) / np.sqrt(2.0)
    b2 = np.abs(beta) ** 2
    gauss = np.exp(-b2 / 2.0)
    dim = rho.dim
    w = np.zeros_like(xg)
    for n in range(dim):
        for m in range(dim):
            r = rho.elements[m, n]
            if r == 0.0:
                continue
            # (-1)^n <n|D(beta)|m>, closed form, n >= m branch after swap
            if m > n:
                nn, mm, bb = m, n, -np.conj(beta)
            else:
                nn, mm, bb = n, m, beta
            logpref = 0.5 * (gammaln(mm + 1) - gammaln(nn + 1))
            elem = np.exp(logpref) * gauss * bb ** (nn - mm) \
                * eval_genlaguerre(mm, nn - mm, b2)
            w += ((-1) ** n * r * elem).real
    return w / np.pi


# ---------------------------------------------------------------------------
# comparisons

def pure_state_fidelity(psi: PureState, rho: DensityMatrix) -> float:
    """<psi|rho|psi> / tr rho for a normalized psi."""
    t = rho.trace()
    if t <= 0.0:
        raise ValueError("state has non-positive trace")
    amp = psi.normalized().amplitudes
    return float(np.real(amp.conj() @ rho.elements @ amp) / t)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """(1/2) ||rho - sigma||_1 for trace-normalized inputs."""
    diff = rho.normalized().elements - sigma.normalized().elements
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


def density_fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, trace-normalized."""
    r = rho.normalized().elements
    s = sigma.normalized().elements
    vals, vecs = np.linalg.eigh((r + r.conj().T) / 2)
    root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T
    inner = root @ s @ root
    ev = np.clip(np.linalg.eigvalsh((inner + inner.conj().T) / 2), 0.0, None)
    return float(np.sum(np.sqrt(ev)) ** 2)
