"""Run configuration: flat key-value files with a stable canonical hash.

A config fully determines a simulation-plus-reconstruction run.  The
canonical serialization renders every number with 9 significant digits in a
fixed key order, so equal configs hash equally and a written file re-parses
to the same hash.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .boxes import BlackBoxKind, ImperfectionModel

FLOAT_FMT = "%.9g"

# 12 probe amplitudes spanning the useful range; values are pre-rounded to
# the serialization precision so defaults survive a save/load round trip.
DEFAULT_ALPHAS = tuple(float(FLOAT_FMT % a) for a in np.linspace(0.0, 1.7, 12))

_KEY_ORDER = ("kind", "zeta", "t1", "t2", "alphas", "n_phases",
              "samples_per_phase", "seed", "n_max", "eta", "output_dir")


@dataclass(frozen=True)
class RunConfig:
    """All knobs of one acquisition run.

    ``eta`` is the detection efficiency compensated during reconstruction;
    None means "derive from the imperfection model" (t1 for annihilation,
    t1 t2 for creation).
    """

    kind: BlackBoxKind = BlackBoxKind.ANNIHILATION
    zeta: float = 0.05
    t1: float = 1.0
    t2: float = 1.0
    alphas: tuple = DEFAULT_ALPHAS
    n_phases: int = 12
    samples_per_phase: int = 10000
    seed: int = 10
    n_max: int = 7
    eta: float | None = None
    output_dir: str = "."

    def __post_init__(self):
        object.__setattr__(self, "alphas",
                           tuple(float(a) for a in self.alphas))
        if not isinstance(self.kind, BlackBoxKind):
            object.__setattr__(self, "kind", BlackBoxKind(self.kind))
        if not 0.0 < self.zeta <= 0.5:
            raise ValueError(f"zeta {self.zeta} outside (0, 0.5]")
        for name in ("t1", "t2"):
            val = getattr(self, name)
            if not 0.0 < val <= 1.0:
                raise ValueError(f"{name} {val} outside (0, 1]")
        if not self.alphas:
            raise ValueError("empty amplitude list")
        if min(self.alphas) < 0.0 or not all(np.isfinite(self.alphas)):
            raise ValueError("amplitudes must be finite and nonnegative")
        if self.n_phases < 1:
            raise ValueError("n_phases must be positive")
        if self.samples_per_phase < 1:
            raise ValueError("samples_per_phase must be positive")
        if self.n_max < 1:
            raise ValueError("n_max must be positive")
        if self.eta is not None and not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta {self.eta} outside (0, 1]")

    # -- derived quantities --------------------------------------------------

    def imperfection_model(self) -> ImperfectionModel:
        return ImperfectionModel(self.kind, self.t1, self.t2)

    def resolved_eta(self) -> float:
        """Efficiency for the reconstruction POVM: explicit value, or the
        net output transmission of the imperfection model."""
        if self.eta is not None:
            return self.eta
        return self.imperfection_model().output_efficiency()

    def phases(self) -> np.ndarray:
        """Local-oscillator phases: n_phases points evenly covering [0, pi)."""
        return np.linspace(0.0, np.pi, self.n_phases, endpoint=False)

    # -- serialization -------------------------------------------------------

    def canonical_text(self) -> str:
        vals = {
            "kind": self.kind.value,
            "zeta": FLOAT_FMT % self.zeta,
            "t1": FLOAT_FMT % self.t1,
            "t2": FLOAT_FMT % self.t2,
            "alphas": ",".join(FLOAT_FMT % a for a in self.alphas),
            "n_phases": str(self.n_phases),
            "samples_per_phase": str(self.samples_per_phase),
            "seed": str(self.seed),
            "n_max": str(self.n_max),
            "eta": "auto" if self.eta is None else FLOAT_FMT % self.eta,
            "output_dir": self.output_dir,
        }
        return "".join(f"{k} = {vals[k]}\n" for k in _KEY_ORDER)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.canonical_text())


def parse_config(text: str) -> RunConfig:
    """Parse flat ``key = value`` lines ('#' comments and blanks ignored).

    Unknown or repeated keys are errors; every key is optional and falls
    back to the documented default.
    """
    fields: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _KEY_ORDER:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in fields:
            raise ValueError(f"line {lineno}: repeated key {key!r}")
        try:
            fields[key] = _convert(key, val)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return RunConfig(**fields)


def _convert(key: str, val: str):
    if key == "kind":
        try:
            return BlackBoxKind(val)
        except ValueError:
            raise ValueError(f"unknown process kind {val!r}") from None
    if key in ("zeta", "t1", "t2"):
        return float(val)
    if key in ("n_phases", "samples_per_phase", "seed", "n_max"):
        return int(val)
    if key == "alphas":
        return tuple(float(p) for p in val.split(",") if p.strip())
    if key == "eta":
        return None if val == "auto" else float(val)
    return val  # output_dir


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())
