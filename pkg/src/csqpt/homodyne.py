"""Synthetic balanced homodyne detection.

Generates quadrature samples pr(x|theta) = sum_mn rho_mn e^{i(n-m)theta}
psi_m(x) psi_n(x) by inverse-CDF lookup on a fine grid, models detection
efficiency through the adjoint-loss POVM, and handles the on-disk sample
format (comma-separated records with a '#' metadata header).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .fock import DensityMatrix, loss_kraus, quadrature_wavefunctions

# Inverse-CDF lookup grid: step and the half-width margin beyond the
# classically allowed region sqrt(2 dim).
PDF_GRID_STEP = 1e-3
PDF_GRID_MARGIN = 4.0

FILE_FLOAT_FMT = "%.9g"


def phase_matrix(dim: int, theta: float, x: np.ndarray) -> np.ndarray:
    """Matrix Phi[n, i] = psi_n(x_i) e^{i n theta} so that
    pr(x_i|theta) = sum_mn conj(Phi[m, i]) rho_mn Phi[n, i]."""
    tab = quadrature_wavefunctions(dim - 1, x)
    return tab * np.exp(1j * theta * np.arange(dim))[:, None]


def quadrature_pdf(rho: DensityMatrix, theta: float, x: np.ndarray) -> np.ndarray:
    """Probability density of quadrature outcomes at local-oscillator phase theta."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    phi = phase_matrix(rho.dim, theta, x)
    pdf = np.einsum("mi,mn,ni->i", phi.conj(), rho.elements, phi).real
    return np.clip(pdf, 0.0, None)


def _sample_grid(dim: int) -> np.ndarray:
    xmax = np.sqrt(2.0 * dim) + PDF_GRID_MARGIN
    n = int(np.ceil(2.0 * xmax / PDF_GRID_STEP)) + 1
    return np.linspace(-xmax, xmax, n)


def sample_quadratures(rho: DensityMatrix, theta: float, n_samples: int,
                       rng) -> np.ndarray:
    """Draw quadrature samples by inverse-CDF interpolation.

    ``rng`` is a numpy Generator (or an int seed).  The CDF is built by
    trapezoidal accumulation on a grid with step PDF_GRID_STEP and linear
    interpolation between knots, so results are deterministic given the seed.
    """
    if np.isscalar(rng) or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    if n_samples == 0:
        return np.empty(0)
    xs = _sample_grid(rho.dim)
    pdf = quadrature_pdf(rho, theta, xs)
    cdf = np.concatenate(([0.0], np.cumsum((pdf[1:] + pdf[:-1]) / 2.0))) \
        * (xs[1] - xs[0])
    total = cdf[-1]
    if total <= 0.0:
        raise ValueError("state has vanishing probability mass on the grid")
    u = rng.random(n_samples) * total
    return np.interp(u, cdf, xs)


def efficiency_povm(x: float, theta: float, eta: float, dim: int) -> np.ndarray:
    """POVM density for quadrature value x at phase theta with efficiency eta.

    Adjoint of the transmission-eta loss channel applied to the ideal
    projector |x_theta><x_theta|, so that tr[rho Pi_eta] equals the pdf of the
    lossy state at x.  eta = 1 returns the ideal projector.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"efficiency {eta} outside (0, 1]")
    phi = phase_matrix(dim, theta, np.atleast_1d(float(x)))[:, 0]
    proj = np.outer(phi, phi.conj())
    if eta == 1.0:
        return proj
    out = np.zeros_like(proj)
    for k in loss_kraus(eta, dim):
        out += k.T @ proj @ k
    return out


# ---------------------------------------------------------------------------
# datasets

@dataclass
class QuadratureDataset:
    """Column store of homodyne records (alpha_in, theta, x, heralded).

    ``metadata`` is a flat str -> str mapping persisted in the file header.
    """

    alpha_in: np.ndarray
    theta: np.ndarray
    x: np.ndarray
    heralded: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.alpha_in = np.asarray(self.alpha_in, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.heralded = np.asarray(self.heralded, dtype=bool)
        n = self.alpha_in.size
        if not (self.theta.size == self.x.size == self.heralded.size == n):
            raise ValueError("column lengths differ")
        if n and not np.all(np.isfinite(self.x)):
            raise ValueError("non-finite quadrature value")
        if n and (self.theta.min() < 0.0 or self.theta.max() >= np.pi):
            raise ValueError("phase outside the principal range [0, pi)")

    def __len__(self) -> int:
        return self.x.size

    def phases(self) -> np.ndarray:
        return np.unique(self.theta)

    def herald_count(self) -> int:
        return int(self.heralded.sum())

    def select(self, heralded=None, theta=None) -> "QuadratureDataset":
        mask = np.ones(len(self), dtype=bool)
        if heralded is not None:
            mask &= self.heralded == heralded
        if theta is not None:
            mask &= self.theta == theta
        return QuadratureDataset(self.alpha_in[mask], self.theta[mask],
                                 self.x[mask], self.heralded[mask],
                                 dict(self.metadata))

    def meta_float(self, key: str, default=None) -> float | None:
        if key in self.metadata:
            return float(self.metadata[key])
        return default

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        with open(path, "w") as fh:
            for key in sorted(self.metadata):
                fh.write(f"# {key}={self.metadata[key]}\n")
            cols = np.column_stack([self.alpha_in, self.theta, self.x,
                                    self.heralded.astype(int)])
            np.savetxt(fh, cols, fmt=[FILE_FLOAT_FMT] * 3 + ["%d"],
                       delimiter=",")

    @classmethod
    def load(cls, path) -> "QuadratureDataset":
        metadata: dict = {}
        rows = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if "=" in body:
                        key, _, val = body.partition("=")
                        metadata[key.strip()] = val.strip()
                    continue
                parts = line.split(",")
                if len(parts) != 4:
                    raise ValueError(
                        f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
                try:
                    rows.append((float(parts[0]), float(parts[1]),
                                 float(parts[2]), int(parts[3])))
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
        arr = np.array(rows, dtype=float) if rows else np.empty((0, 4))
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3] != 0, metadata)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# corrections and calibration

def displacement_correct(data: QuadratureDataset, delta_x: float) -> QuadratureDataset:
    """Subtract delta_x * cos(theta) from every sample.

    Undoes a displacement of the state along the +X axis; the applied
    correction is accumulated in metadata under ``displacement_correction``.
    """
    prev = data.meta_float("displacement_correction", 0.0)
    meta = dict(data.metadata)
    meta["displacement_correction"] = FILE_FLOAT_FMT % (prev + delta_x)
    return QuadratureDataset(data.alpha_in, data.theta,
                             data.x - delta_x * np.cos(data.theta),
                             data.heralded, meta)


@dataclass(frozen=True)
class AmplitudeEstimate:
    amplitude: float
    phase: float
    residual_variance: float
    std_error: float


def estimate_amplitude(data: QuadratureDataset) -> AmplitudeEstimate:
    """Coherent-amplitude estimate from per-phase sample means.

    Fits mean(theta) = sqrt(2) A cos(theta - phi) by linear least squares in
    (A cos phi, A sin phi).  Needs at least 3 distinct phases; the reported
    standard error is for the amplitude itself.
    """
    thetas = data.phases()
    if thetas.size < 3:
        raise ValueError(f"need >= 3 distinct phases, got {thetas.size}")
    means = np.empty(thetas.size)
    sem2 = np.empty(thetas.size)
    for i, th in enumerate(thetas):
        vals = data.x[data.theta == th]
        if vals.size == 0:
            raise ValueError("empty phase group")
        means[i] = vals.mean()
        sem2[i] = vals.var(ddof=1) / vals.size if vals.size > 1 else np.inf
    design = np.column_stack([np.cos(thetas), np.sin(thetas)])
    coef, *_ = np.linalg.lstsq(design, means, rcond=None)
    resid = means - design @ coef
    dof = max(thetas.size - 2, 1)
    resid_var = float(resid @ resid / dof)
    # covariance of (a, b) from the unweighted fit, then propagate to A
    cov = np.linalg.inv(design.T @ design) * max(resid_var, float(np.mean(sem2[np.isfinite(sem2)])))
    a, b = coef
    amp2 = a * a + b * b
    if amp2 == 0.0:
        grad = np.array([1.0, 1.0]) / np.sqrt(2.0)
    else:
        grad = np.array([a, b]) / np.sqrt(amp2)
    var_amp = float(grad @ cov @ grad)
    return AmplitudeEstimate(amplitude=float(np.sqrt(amp2) / np.sqrt(2.0)),
                             phase=float(np.arctan2(b, a)),
                             residual_variance=resid_var,
                             std_error=float(np.sqrt(max(var_amp, 0.0)) / np.sqrt(2.0)))
