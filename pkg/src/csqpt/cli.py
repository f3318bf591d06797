"""Command-line pipeline with file-based handoffs.

Four subcommands mirror the offline acquire-then-reconstruct workflow:
``simulate`` writes one quadrature dataset per probe amplitude plus a click
rate summary, ``reconstruct`` turns a dataset directory into a process
tensor file, ``analyze`` derives CSV reports (with companion figures) from a
tensor file, and ``calibrate`` recovers probe amplitudes from unheralded
records.  Every output file embeds the producing config hash; analysis
filenames derive from the tensor file's own content hash.

Exit codes: 0 on success (including a non-converged reconstruction, which
is data, not a failure), 2 for configuration, format or I/O problems.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, figures
from .boxes import BlackBoxKind, simulate_probe_run, herald_probability_law
from .config import FLOAT_FMT, RunConfig, load_config
from .homodyne import QuadratureDataset, displacement_correct, file_sha256
from .tomography import (MLEConfig, ProcessTensor, reconstruct_process,
                         rescale_to_trace)

WIGNER_DEFAULT_ALPHAS = "0,0.5,1"


def _dataset_files(data_dir: Path) -> list[Path]:
    files = sorted(data_dir.glob("probe_*.csv"))
    if not files:
        raise ValueError(f"no probe_*.csv datasets in {data_dir}")
    return files


def _require_kind(meta: dict, source: str) -> BlackBoxKind:
    try:
        return BlackBoxKind(meta["kind"])
    except (KeyError, ValueError):
        raise ValueError(f"{source} does not declare a valid process kind") \
            from None


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out if args.out else cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chash = cfg.config_hash()
    model = cfg.imperfection_model()
    phases = cfg.phases()
    rates = []
    for i, alpha in enumerate(cfg.alphas):
        ds = simulate_probe_run(alpha, model, cfg.zeta, phases,
                                cfg.samples_per_phase, cfg.seed)
        ds.metadata["config_hash"] = chash
        ds.save(out_dir / f"probe_{i:02d}.csv")
        rates.append((alpha, ds.herald_count(), len(ds)))
    rates_path = out_dir / "rates.csv"
    with open(rates_path, "w") as fh:
        fh.write(f"# config_hash={chash}\n")
        fh.write(f"# kind={cfg.kind.value}\n")
        fh.write("# columns=alpha_in,heralded,total\n")
        for alpha, her, tot in rates:
            fh.write(f"{FLOAT_FMT % alpha},{her},{tot}\n")
    print(f"wrote {len(cfg.alphas)} datasets and {rates_path.name} "
          f"to {out_dir} (config {chash[:12]})")
    return 0


# ---------------------------------------------------------------------------
# reconstruct

def _load_probe_data(data_dir: Path, cfg: RunConfig):
    """Datasets sorted by box amplitude, displacement corrected for creation,
    plus per-file provenance rows."""
    entries = []
    for path in _dataset_files(data_dir):
        ds = QuadratureDataset.load(path)
        kind = _require_kind(ds.metadata, path.name)
        if kind is not cfg.kind:
            raise ValueError(f"{path.name} holds {kind.value} data but the "
                             f"config requests {cfg.kind.value}")
        corrected = 0.0
        if cfg.kind is BlackBoxKind.CREATION:
            dx = ds.meta_float("delta_x", 0.0)
            if dx != 0.0:
                ds = displacement_correct(ds, dx)
                corrected = dx
        alpha_box = ds.meta_float("alpha_box")
        if alpha_box is None:
            alpha_box = ds.meta_float("alpha_in", 0.0)
        entries.append((alpha_box, ds,
                        {"file": path.name, "sha256": file_sha256(path),
                         "displacement_correction": FLOAT_FMT % corrected}))
    entries.sort(key=lambda e: e[0])
    return ([e[1] for e in entries], [e[2] for e in entries],
            max(e[0] for e in entries))


def cmd_reconstruct(args) -> int:
    cfg = load_config(args.config)
    datasets, provenance, alpha_top = _load_probe_data(Path(args.data), cfg)
    eta = cfg.resolved_eta()
    workers = args.workers if args.workers else (os.cpu_count() or 1)
    mle_cfg = MLEConfig(n_max=cfg.n_max, eta=eta, workers=workers)
    herald_norm = not args.no_herald_norm
    result = reconstruct_process(datasets, mle_cfg, herald_norm=herald_norm)
    meta = {
        "kind": cfg.kind.value,
        "config_hash": cfg.config_hash(),
        "n_max": cfg.n_max,
        "eta": FLOAT_FMT % eta,
        "zeta": FLOAT_FMT % cfg.zeta,
        "t1": FLOAT_FMT % cfg.t1,
        "t2": FLOAT_FMT % cfg.t2,
        "seed": cfg.seed,
        "herald_norm": herald_norm,
        "converged": result.converged,
        "iterations": result.iterations,
        "stage_iterations": [s.iterations for s in result.stages]
                            or [result.iterations],
        "final_log_likelihood": FLOAT_FMT % result.log_likelihoods[-1],
        "clipped_events": result.clipped_events,
        "max_tp_deviation": "%.3e" % result.max_tp_deviation,
        "min_eigenvalue": "%.3e" % result.min_eigenvalue,
        "probe_summary": [[FLOAT_FMT % a, int(h), int(n)]
                          for a, h, n in result.probe_summary],
        "datasets": provenance,
    }
    tensor = result.tensor(meta)
    if herald_norm:
        # display normalization: match the ideal click rate at the largest
        # probe so diagonals are directly comparable to m and m + 1
        tensor = rescale_to_trace(
            tensor, alpha_top, herald_probability_law(alpha_top, cfg.kind))
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    tensor.save(out)
    print(f"tensor written to {out} (converged={result.converged}, "
          f"iterations={result.iterations}, "
          f"log-likelihood={FLOAT_FMT % result.log_likelihoods[-1]})")
    return 0


# ---------------------------------------------------------------------------
# analyze

def _write_rows(path: Path, comments: list[str], rows: list[str]) -> None:
    with open(path, "w") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        for r in rows:
            fh.write(r + "\n")


def _provenance_comments(tensor: ProcessTensor, thash: str) -> list[str]:
    return [f"config_hash={tensor.metadata.get('config_hash', '')}",
            f"tensor_sha256={thash}",
            f"kind={tensor.metadata.get('kind', '')}"]


def _analyze_diag(tensor, kind, thash, out_dir) -> list[Path]:
    diag = analysis.diagonal_elements(tensor)
    rows = [f"{m},{k},{FLOAT_FMT % diag[m, k]}"
            for m in range(diag.shape[0]) for k in range(diag.shape[1])]
    csv = out_dir / f"diag_{thash}.csv"
    _write_rows(csv, _provenance_comments(tensor, thash)
                + ["columns=m,k,value"], rows)
    png = out_dir / f"diag_{thash}.png"
    figures.render_diagonals(diag, png, title=f"{kind.value} diagonals")
    return [csv, png]


def _analyze_fidelity(tensor, kind, thash, out_dir, seed) -> list[Path]:
    ns = range(1, tensor.dim_in)
    reports = [analysis.worst_case_fidelity(tensor, kind, n, seed)
               for n in ns]
    rows = [f"{r.n},{FLOAT_FMT % r.fidelity},{r.skipped}" for r in reports]
    csv = out_dir / f"fidelity_{thash}.csv"
    _write_rows(csv, _provenance_comments(tensor, thash)
                + [f"seed={seed}", "columns=n,worst_case_fidelity,skipped"],
                rows)
    png = out_dir / f"fidelity_{thash}.png"
    figures.render_fidelity_curve(list(ns), [r.fidelity for r in reports],
                                  png, title=f"{kind.value} worst case")
    return [csv, png]


def _rates_from_metadata(tensor) -> list[tuple]:
    summary = tensor.metadata.get("probe_summary")
    if not summary:
        raise ValueError("tensor carries no probe summary; pass --rates")
    return [(float(a), float(h), float(n)) for a, h, n in summary]


def _rates_from_file(path: Path, tensor, force: bool) -> list[tuple]:
    meta: dict = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    meta[key.strip()] = val.strip()
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"{path}: expected alpha,heralded,total rows")
            rows.append((float(parts[0]), float(parts[1]), float(parts[2])))
    own = tensor.metadata.get("config_hash", "")
    other = meta.get("config_hash", "")
    if own and other and own != other and not force:
        raise ValueError(
            f"{path} was produced by config {other[:12]} but the tensor "
            f"comes from {own[:12]}; pass --force to analyze anyway")
    # rates files record the nominal input amplitude; the fit wants the
    # effective box amplitude
    t2 = float(tensor.metadata.get("t2", 1.0))
    kind = _require_kind(tensor.metadata, "tensor")
    if kind is BlackBoxKind.CREATION and t2 < 1.0:
        rows = [(np.sqrt(t2) * a, h, n) for a, h, n in rows]
    return rows


def _analyze_rates(tensor, kind, thash, out_dir, rates_path, force):
    if rates_path:
        rows = _rates_from_file(Path(rates_path), tensor, force)
    else:
        rows = _rates_from_metadata(tensor)
    fit = analysis.fit_count_rates(rows, kind)
    b = "" if fit.quad_coeff is None else FLOAT_FMT % fit.quad_coeff
    header = [f"scale={FLOAT_FMT % fit.scale}", f"quad_coeff={b}",
              f"chi2={FLOAT_FMT % fit.chi2}", f"dof={fit.dof}",
              f"p_value={FLOAT_FMT % fit.p_value}",
              "columns=alpha,fraction,model"]
    rows_out = [f"{FLOAT_FMT % a},{FLOAT_FMT % f},{FLOAT_FMT % m}"
                for a, f, m in zip(fit.alphas, fit.fractions,
                                   fit.model(fit.alphas))]
    csv = out_dir / f"rates_fit_{thash}.csv"
    _write_rows(csv, _provenance_comments(tensor, thash) + header, rows_out)
    png = out_dir / f"rates_fit_{thash}.png"
    figures.render_rate_fit(fit, png, title=f"{kind.value} click rate")
    return [csv, png]


def _analyze_wigner(tensor, kind, thash, out_dir, alphas, grid_max,
                    grid_points) -> list[Path]:
    xs = np.linspace(-grid_max, grid_max, grid_points)
    report = analysis.wigner_report(tensor, alphas, xs, xs)
    outputs = []
    summary_rows = []
    grid_paths = []
    for i, entry in enumerate(report.entries):
        if entry.field is None:
            summary_rows.append(f"{FLOAT_FMT % entry.alpha},,,,{entry.note}")
            grid_paths.append(None)
            continue
        summary_rows.append(
            f"{FLOAT_FMT % entry.alpha},{FLOAT_FMT % entry.min_value},"
            f"{FLOAT_FMT % entry.min_x},{FLOAT_FMT % entry.min_p},")
        grid_csv = out_dir / f"wigner_{thash}_a{i}.csv"
        with open(grid_csv, "w") as fh:
            fh.write(f"# alpha={FLOAT_FMT % entry.alpha}\n")
            fh.write(f"# rows=p ({FLOAT_FMT % xs[0]}..{FLOAT_FMT % xs[-1]}), "
                     f"columns=x (same range)\n")
            np.savetxt(fh, entry.field, fmt=FLOAT_FMT, delimiter=",")
        outputs.append(grid_csv)
        grid_paths.append(out_dir / f"wigner_{thash}_a{i}.png")
    summary = out_dir / f"wigner_{thash}.csv"
    _write_rows(summary, _provenance_comments(tensor, thash)
                + ["columns=alpha,min_value,min_x,min_p,note"], summary_rows)
    figures.render_wigner(report, grid_paths)
    return [summary] + outputs + [p for p in grid_paths if p is not None]


def cmd_analyze(args) -> int:
    tensor_path = Path(args.tensor)
    tensor = ProcessTensor.load(tensor_path)
    kind = _require_kind(tensor.metadata, "tensor")
    thash = file_sha256(tensor_path)[:12]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.mode == "diag":
        outputs = _analyze_diag(tensor, kind, thash, out_dir)
    elif args.mode == "fidelity":
        seed = args.seed if args.seed is not None \
            else int(tensor.metadata.get("seed", 10))
        outputs = _analyze_fidelity(tensor, kind, thash, out_dir, seed)
    elif args.mode == "rates":
        outputs = _analyze_rates(tensor, kind, thash, out_dir, args.rates,
                                 args.force)
    else:
        alphas = [float(p) for p in args.alphas.split(",") if p.strip()]
        outputs = _analyze_wigner(tensor, kind, thash, out_dir, alphas,
                                  args.grid_max, args.grid_points)
    for path in outputs:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# calibrate

def cmd_calibrate(args) -> int:
    from .homodyne import estimate_amplitude
    rows = []
    chash = ""
    for path in _dataset_files(Path(args.data)):
        ds = QuadratureDataset.load(path)
        chash = ds.metadata.get("config_hash", chash)
        unheralded = ds.select(heralded=False)
        if len(unheralded) == 0:
            raise ValueError(f"{path.name} has no unheralded records")
        est = estimate_amplitude(unheralded)
        t1 = ds.meta_float("t1", 1.0)
        recovered = est.amplitude / np.sqrt(t1)
        err = est.std_error / np.sqrt(t1)
        rows.append((ds.meta_float("alpha_in", 0.0), recovered, err))
    nominal = np.array([r[0] for r in rows])
    recovered = np.array([r[1] for r in rows])
    denom = float(nominal @ nominal)
    slope = float(nominal @ recovered) / denom if denom > 0 else float("nan")
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write(f"# config_hash={chash}\n")
        fh.write(f"# slope={FLOAT_FMT % slope}\n")
        fh.write("# columns=alpha_nominal,alpha_recovered,std_error\n")
        for nom, rec, err in rows:
            fh.write(f"{FLOAT_FMT % nom},{FLOAT_FMT % rec},"
                     f"{FLOAT_FMT % err}\n")
    worst = float(np.abs(recovered - nominal).max()) if rows else 0.0
    print(f"calibration table written to {out} "
          f"(slope={slope:.4f}, worst deviation={worst:.4f})")
    return 0


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csqpt",
        description="simulate, reconstruct and analyze heralded photon "
                    "creation/annihilation processes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write quadrature datasets")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output directory "
                   "(default: the config's output_dir)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="fit a process tensor")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-herald-norm", action="store_true",
                   help="debug: drop the click-rate information from the "
                   "likelihood")
    p.add_argument("--workers", type=int, default=0,
                   help="parallel probe evaluations (0 = all cores)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("analyze", help="derive CSV reports and figures")
    p.add_argument("--tensor", required=True)
    p.add_argument("--mode", required=True,
                   choices=["diag", "fidelity", "rates", "wigner"])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="fidelity search seed (default: tensor metadata)")
    p.add_argument("--rates", default=None,
                   help="rates summary CSV (default: tensor metadata)")
    p.add_argument("--force", action="store_true",
                   help="analyze despite mismatched provenance")
    p.add_argument("--alphas", default=WIGNER_DEFAULT_ALPHAS,
                   help="comma-separated probe amplitudes for wigner mode")
    p.add_argument("--grid-max", type=float, default=4.0)
    p.add_argument("--grid-points", type=int, default=161)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("calibrate", help="recover probe amplitudes from "
                       "unheralded records")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
