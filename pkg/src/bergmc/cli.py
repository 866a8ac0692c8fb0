"""``bergmc <subcommand> --config PATH [--workers N] [--fresh-seed]``.

Exit status: 0 success, 1 validation failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import secrets
import sys
import time
from pathlib import Path

import numpy as np

from . import acceptance
from .bergman import BasisSpec, kernel_series, semigroup_matrix, toeplitz_matrix
from .bundle import BundleData
from .config import RunConfig, load_config
from .dk import (
    DLadder,
    MCConfig,
    dk_extrapolate,
    finite_d_kernel,
    finite_d_matrix,
    kato_kappa,
    kato_probes,
    khasminskii_check,
)
from .errors import BergmcError, ConfigError, UnsupportedModelError
from .geometry import PLANE
from .magnetic import magnetic_oracle_plane
from .store import ResultStore, emit_plot_data, make_record, write_ladder_csv, write_matrix_csv

SUBCOMMANDS = ("oracle", "kernel", "matelem", "extrap", "kato", "validate")


def _basis(cfg: RunConfig, b: BundleData) -> BasisSpec:
    o = cfg.oracle
    return BasisSpec(b, N=o.N, n_radial=o.n_radial, n_angular=o.n_angular, n_polar=o.n_polar,
                     n_azimuth=o.n_azimuth).orthonormalize()


def _mc(cfg: RunConfig, workers: int) -> MCConfig:
    return MCConfig(cfg.mc.n_paths, cfg.mc.n_steps, cfg.mc.seed, workers)


def _outdir(cfg: RunConfig) -> Path:
    d = Path(cfg.output.dir)
    if not d.is_absolute() and cfg.source:
        d = Path(cfg.source).resolve().parent / d
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(payload, indent=1, sort_keys=True))
    return path


def cmd_oracle(cfg: RunConfig, workers: int) -> int:
    """Noise-free references: Toeplitz semigroup matrix, Bergman kernel, lattice kernel per D."""
    b = BundleData(cfg.kahler_model())
    f = cfg.symbol_spec()
    basis = _basis(cfg, b)
    out = _outdir(cfg)
    store = ResultStore(out / cfg.output.results)
    T = toeplitz_matrix(f, basis)
    E = semigroup_matrix(T, cfg.mc.t)
    write_matrix_csv(out / "oracle_matrix.csv", E, np.zeros(E.shape))
    for a in range(E.shape[0]):
        for c in range(E.shape[1]):
            store.append(make_record(cfg, D=None, value=E[a, c], stderr=0.0, n_paths=0, n_steps=0, wall_ms=0.0,
                                     element=(a, c), source="toeplitz"))
    x, y = cfg.x_point(), cfg.y_point()
    if cfg.kahler_model().kind == PLANE:
        K = kernel_series(basis, x, y)
        store.append(make_record(cfg, D=None, value=K.value, stderr=0.0, n_paths=0, n_steps=0, wall_ms=0.0,
                                 x=x.u, y=y.u, source="bergman"))
        vals = []
        for D in cfg.ladder():
            t0 = time.perf_counter()
            o = magnetic_oracle_plane(b, D, cfg.mc.t, x, y, f, cfg.oracle.grid_L, cfg.oracle.grid_n, cfg.oracle.tol)
            vals.append(o.value)
            store.append(make_record(cfg, D=D, value=o.value, stderr=0.0, n_paths=0, n_steps=0,
                                     wall_ms=1e3 * (time.perf_counter() - t0), x=x.u, y=y.u, source="lattice"))
            print(f"D = {D:g}: lattice kernel {o.value:.8g}")
        if vals:
            _ladder_artifact(out / "oracle_ladder", list(cfg.ladder()), vals, [0.0] * len(vals))
    if E.shape[0] <= 4:
        print(f"exp(-t T_f) =\n{np.array2string(E, precision=6, suppress_small=True)}")
    else:
        print(f"diag exp(-t T_f) = {np.array2string(np.real(np.diag(E)), precision=6)}")
    return 0


def _ladder_artifact(stem: Path, D, vals, errs) -> None:
    fit = None
    payload = dict(kind="ladder", D=list(D), value_re=[float(np.real(v)) for v in vals],
                   value_im=[float(np.imag(v)) for v in vals], stderr=[float(s) for s in errs],
                   limit_re=None, limit_im=None, limit_stderr=None, residual=None)
    if len(D) >= 3:
        ex = dk_extrapolate(DLadder(list(D), list(vals), list(errs)))
        fit = (ex.limit, ex.stderr)
        payload.update(limit_re=ex.limit.real, limit_im=ex.limit.imag, limit_stderr=ex.stderr,
                       residual=ex.max_residual)
    _write_json(stem.with_suffix(".json"), payload)
    write_ladder_csv(stem.with_suffix(".csv"), D, vals, errs, fit)


def cmd_kernel(cfg: RunConfig, workers: int) -> int:
    """Monte Carlo finite-D kernel Q_D(t, x, y) on the plane for each D in the ladder."""
    b = BundleData(cfg.kahler_model())
    if b.model.kind != PLANE:
        raise UnsupportedModelError("kernel runs need the plane model; use matelem on the sphere")
    f = cfg.symbol_spec()
    out = _outdir(cfg)
    store = ResultStore(out / cfg.output.results)
    x, y = cfg.x_point(), cfg.y_point()
    ests = []
    for D in cfg.ladder():
        t0 = time.perf_counter()
        e = finite_d_kernel(b, f, D, cfg.mc.t, x, y, _mc(cfg, workers))
        store.append(make_record(cfg, D=D, value=e.value, stderr=e.stderr, n_paths=e.n_paths, n_steps=e.n_steps,
                                 wall_ms=1e3 * (time.perf_counter() - t0), x=x.u, y=y.u, rejected=e.rejected))
        ests.append(e)
        print(f"D = {D:g}: Q_D = {e.value:.6g} +- {e.stderr:.2g}")
    if len(ests) > 1:
        _ladder_artifact(out / "kernel_ladder", [e.D for e in ests], [e.value for e in ests],
                         [e.stderr for e in ests])
    return 0


def cmd_matelem(cfg: RunConfig, workers: int) -> int:
    """Monte Carlo matrix elements <eta_a, exp(-t S_D) eta_b> for each D in the ladder."""
    b = BundleData(cfg.kahler_model())
    f = cfg.symbol_spec()
    basis = _basis(cfg, b)
    out = _outdir(cfg)
    store = ResultStore(out / cfg.output.results)
    pairs = None if cfg.mc.elements == "all" else [tuple(int(v) for v in cfg.mc.elements.split(","))]
    for D in cfg.ladder():
        t0 = time.perf_counter()
        m = finite_d_matrix(b, f, D, cfg.mc.t, basis, _mc(cfg, workers), cfg.mc.n_nodes)
        ms = 1e3 * (time.perf_counter() - t0)
        idx = pairs or [(a, c) for a in range(basis.N) for c in range(basis.N)]
        for a, c in idx:
            store.append(make_record(cfg, D=D, value=m.values[a, c], stderr=m.stderr[a, c], n_paths=m.n_paths,
                                     n_steps=m.n_steps, wall_ms=ms, element=(a, c), n_nodes=m.n_nodes))
        _write_json(out / f"matrix_D{D:g}.json", dict(kind="matrix", D=D, value_re=m.values.real.tolist(),
                                                     value_im=m.values.imag.tolist(), stderr=m.stderr.tolist()))
        write_matrix_csv(out / f"matrix_D{D:g}.csv", m.values, m.stderr)
        print(f"D = {D:g}:\n{np.array2string(m.values, precision=5)}")
    return 0


def cmd_extrap(cfg: RunConfig, workers: int) -> int:
    """Run the ladder (kernel on the plane, matrix elements on the sphere) and extrapolate."""
    if len(cfg.ladder()) < 3:
        raise ConfigError("[mc] extrap needs D_ladder with at least three values")
    b = BundleData(cfg.kahler_model())
    out = _outdir(cfg)
    if b.model.kind == PLANE:
        cmd_kernel(cfg, workers)
        data = json.loads((out / "kernel_ladder.json").read_text())
        x, y = cfg.x_point(), cfg.y_point()
        if cfg.symbol_spec().name == "zero":
            K = kernel_series(_basis(cfg, b), x, y).value * np.exp(-cfg.symbol_spec().shift * cfg.mc.t)
            print(f"limit {complex(data['limit_re'], data['limit_im']):.6g} +- {data['limit_stderr']:.2g}; "
                  f"reproducing kernel {K:.6g}")
        else:
            print(f"limit {complex(data['limit_re'], data['limit_im']):.6g} +- {data['limit_stderr']:.2g}")
        return 0
    cmd_matelem(cfg, workers)
    Ds = list(cfg.ladder())
    mats = [json.loads((out / f"matrix_D{D:g}.json").read_text()) for D in Ds]
    N = len(mats[0]["value_re"])
    lim = np.zeros((N, N), dtype=complex)
    err = np.zeros((N, N))
    for a in range(N):
        for c in range(N):
            vals = [complex(m["value_re"][a][c], m["value_im"][a][c]) for m in mats]
            ex = dk_extrapolate(DLadder(Ds, vals, [m["stderr"][a][c] for m in mats]))
            lim[a, c], err[a, c] = ex.limit, ex.stderr
    _write_json(out / "matrix_limit.json", dict(kind="matrix", D=None, value_re=lim.real.tolist(),
                                                 value_im=lim.imag.tolist(), stderr=err.tolist()))
    write_matrix_csv(out / "matrix_limit.csv", lim, err)
    E = semigroup_matrix(toeplitz_matrix(cfg.symbol_spec(), _basis(cfg, b)), cfg.mc.t)
    print(f"extrapolated matrix:\n{np.array2string(lim, precision=5)}\noracle exp(-t T_f):\n"
          f"{np.array2string(E, precision=5)}")
    return 0


def cmd_kato(cfg: RunConfig, workers: int) -> int:
    """Kato constant of the symbol as a potential and the Khasminskii bound check."""
    m = cfg.kahler_model()
    q = cfg.symbol_spec()
    mc = _mc(cfg, workers)
    D = cfg.ladder()[0] if cfg.ladder() else 1.0
    out = _outdir(cfg)
    store = ResultStore(out / cfg.output.results)
    kh = khasminskii_check(m, q, D, cfg.mc.t, cfg.x_point(), mc)
    msg = "hypothesis violated (kappa >= 1)" if not kh.hypothesis_ok else f"pass = {kh.passed}"
    print(f"Khasminskii: E[exp(int q)] = {kh.lhs:.6g} +- {kh.lhs_stderr:.2g}, bound {kh.bound:.6g}, "
          f"kappa {kh.kappa:.4g}: {msg}")
    store.append(make_record(cfg, D=D, value=kh.lhs, stderr=kh.lhs_stderr, n_paths=mc.n_paths, n_steps=mc.n_steps,
                             wall_ms=0.0, x=cfg.mc.x, y=None, quantity="khasminskii_lhs", bound=kh.bound,
                             kappa=kh.kappa))
    probes = kato_probes(m)
    for t in cfg.mc.kato_t or ():
        k = kato_kappa(m, q, D, t, probes, mc)
        print(f"kappa(t = {t:g}) = {k.kappa:.6g} +- {k.stderr:.2g} (probe max at u = {k.argmax.u})")
        store.append(make_record(cfg, D=D, value=k.kappa, stderr=k.stderr, n_paths=mc.n_paths, n_steps=mc.n_steps,
                                 wall_ms=0.0, x=k.argmax.u, y=None, quantity="kappa", kato_t=t))
    return 0


def cmd_validate(cfg: RunConfig, workers: int) -> int:
    """Run the eight acceptance checks and write a PASS/FAIL report."""
    out = _outdir(cfg)
    report = out / cfg.output.report
    lines = [f"bergmc validation report (profile = {cfg.validate.profile}, config {cfg.config_hash})"]

    def emit(line):
        print(line, flush=True)
        lines.append(line)

    results = acceptance.run_all(cfg.validate.profile, workers, emit)
    ok = all(r.passed for r in results)
    lines.append(f"overall: {'PASS' if ok else 'FAIL'} ({sum(r.passed for r in results)}/{len(results)})")
    report.write_text("\n".join(lines) + "\n")
    print(lines[-1])
    return 0 if ok else 1


COMMANDS = dict(oracle=cmd_oracle, kernel=cmd_kernel, matelem=cmd_matelem, extrap=cmd_extrap, kato=cmd_kato,
                validate=cmd_validate)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bergmc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name, help=(COMMANDS[name].__doc__ or name).strip().splitlines()[0])
        s.add_argument("--config", required=True, help="INI run configuration")
        s.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
        s.add_argument("--fresh-seed", action="store_true", help="draw a random seed instead of [mc] seed")
    e = sub.add_parser("plot-data", help="convert a ladder or matrix JSON artifact to CSV")
    e.add_argument("artifact")
    e.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot-data":
            print(emit_plot_data(args.artifact, args.out))
            return 0
        cfg = load_config(args.config)
        if args.fresh_seed:
            cfg = cfg.with_seed(secrets.randbits(32))
            print(f"fresh seed {cfg.mc.seed}")
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        return COMMANDS[args.command](cfg, args.workers)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except UnsupportedModelError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except BergmcError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
