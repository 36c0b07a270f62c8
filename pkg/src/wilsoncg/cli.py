"""Command-line front end.

Subcommands: solve, bench, trace, verify, gen.  Exit codes: 0 success,
2 usage/config/domain error, 3 file I/O error, 4 solver ran but did not
converge, 5 solver breakdown or stagnation, 6 verification failure.
"""

import argparse
import sys
import time

import numpy as np

from . import backend, io, lattice, solver, stream, wilson
from .errors import (
    BreakdownError,
    ConfigError,
    DomainError,
    FieldFormatError,
    StagnationError,
    WilsonCGError,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NOCONV = 4
EXIT_BREAKDOWN = 5
EXIT_VERIFY = 6


def _fail(code, msg):
    print(f"error: {msg}", file=sys.stderr)
    return code


def _load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise _IOFailure(str(exc)) from exc
    return io.parse_config(text)


class _IOFailure(Exception):
    pass


def _read_gauge_for(cfg):
    if cfg.gauge:
        try:
            u = io.read_gauge(cfg.gauge)
        except OSError as exc:
            raise _IOFailure(str(exc)) from exc
        if u.geometry.dims != cfg.dims:
            raise DomainError(
                f"gauge file is {u.geometry.dims}, config says {cfg.dims}"
            )
        return u
    return io.generate_gauge(cfg.dims, cfg.seed)


def cmd_solve(args):
    cfg = _load_config(args.config)
    if not cfg.source and not args.point_source:
        raise ConfigError("solve needs a source file or --point-source",
                          key="source")
    if not cfg.output:
        raise ConfigError("solve needs an output path", key="output")

    u = _read_gauge_for(cfg)
    geom = cfg.geometry
    if cfg.source:
        try:
            b = io.read_spinor(cfg.source)
        except OSError as exc:
            raise _IOFailure(str(exc)) from exc
        if b.geometry.dims != cfg.dims:
            raise DomainError(
                f"source file is {b.geometry.dims}, config says {cfg.dims}"
            )
        b = b.astype(lattice.HIGH)
    else:
        b = lattice.SpinorField.point_source(geom, dtype=lattice.HIGH)

    params = wilson.WilsonParams(cfg.kappa, cfg.antiperiodic_t)
    u = u.astype(lattice.HIGH)
    t0 = time.perf_counter()
    if args.mode == "mixed":
        x, rep = solver.mixed_cg(u, u.astype(cfg.low_dtype), b, params,
                                 cfg.solver)
    else:
        x, rep = solver.cgnr_solve(u, b, params, cfg.solver)
    elapsed = time.perf_counter() - t0

    tr = solver.true_residual(u, x, b, params)
    try:
        io.write_spinor(cfg.output, x)
    except OSError as exc:
        raise _IOFailure(str(exc)) from exc

    print(f"backend            : {backend.active()}")
    print(f"mode               : {args.mode}")
    print(f"lattice            : {'x'.join(map(str, cfg.dims))}")
    print(f"kappa              : {cfg.kappa}")
    print(f"converged          : {rep.converged}")
    print(f"iterations (low)   : {rep.iterations_low}")
    print(f"iterations (high)  : {rep.iterations_high}")
    print(f"iterations (total) : {rep.iterations_total}")
    label = "absolute" if tr.absolute else "relative"
    print(f"true residual      : {tr.value:.6e} ({label})")
    print(f"wall time          : {elapsed:.3f} s")
    print(f"solution written   : {cfg.output}")
    if not rep.converged:
        print("warning: tolerance not reached within iteration budget",
              file=sys.stderr)
        return EXIT_NOCONV
    return EXIT_OK


def _time_sweeps(fn, sweeps):
    # warm once so jit compilation never lands in the timed region
    fn()
    t0 = time.perf_counter()
    for _ in range(sweeps):
        fn()
    return (time.perf_counter() - t0) / sweeps


def cmd_bench(args):
    cfg = _load_config(args.config)
    geom = cfg.geometry
    params = wilson.WilsonParams(cfg.kappa, cfg.antiperiodic_t)
    u = _read_gauge_for(cfg).astype(lattice.HIGH)
    psi = lattice.random_spinor_field(geom, cfg.seed + 1, lattice.HIGH)
    sweeps = args.sweeps
    flops = wilson.count_flops(geom)
    total = flops.flops_total * sweeps

    print(f"lattice {('x'.join(map(str, cfg.dims)))}, volume {geom.volume}, "
          f"{flops.flops_per_site} flops/site")
    print(f"flops_total = {flops.flops_total} per sweep x {sweeps} sweeps "
          f"= {total}")
    rows = []
    for name in backend.available():
        kern = backend.kernels(name)
        nbr = lattice.neighbor_table(geom)
        links = wilson.effective_links(u, params)

        def ref(kern=kern):
            kern.apply_field(psi.sites, links, nbr, params.kappa, False)

        dt = _time_sweeps(ref, sweeps)
        rows.append((f"reference/{name}", dt,
                     flops.flops_total / dt / 1e9))
        if all(d >= 4 for d in geom.dims):
            cap = stream.buffer_capacity(geom)

            def strm(kern=kern):
                kern.stream_field(psi.sites, links, nbr, params.kappa,
                                  geom.spatial_volume, cap)

            dt = _time_sweeps(strm, sweeps)
            rows.append((f"stream/{name}", dt,
                         flops.flops_total / dt / 1e9))

    for label, dt, rate in rows:
        print(f"{label:<20} {dt * 1e3:10.3f} ms/sweep {rate:10.3f} GFLOP/s")
    modeled = stream.model_throughput(flops.flops_per_site, cfg.pipeline)
    print(f"{'modeled/pipeline':<20} {'':>10}          {modeled:10.3f} GFLOP/s"
          f"  (ii={cfg.pipeline.initiation_interval}, "
          f"kernels={cfg.pipeline.kernels}, "
          f"f={cfg.pipeline.frequency_hz / 1e6:g} MHz)")
    return EXIT_OK


def cmd_trace(args):
    cfg = _load_config(args.config)
    events, total = stream.simulate_trace(cfg.geometry, cfg.pipeline)
    try:
        io.write_trace(args.out, events, total, cfg.pipeline)
    except OSError as exc:
        raise _IOFailure(str(exc)) from exc
    print(f"trace written      : {args.out}")
    print(f"events             : {len(events)}")
    print(f"total cycles       : {total}")
    print(f"modeled throughput : "
          f"{stream.model_throughput(wilson.count_flops(cfg.geometry).flops_per_site, cfg.pipeline):.3f}"
          f" GFLOP/s")
    return EXIT_OK


def _verify_unitarity(u):
    links = u.links.reshape(-1, 3, 3)
    eye = np.eye(3, dtype=links.dtype)
    gram = np.einsum("nba,nbc->nac", links.conj(), links)
    dev = np.max(np.abs(gram - eye))
    det_dev = np.max(np.abs(np.linalg.det(links) - 1.0))
    eps = lattice.machine_eps(u.dtype)
    ok = dev <= 10 * eps and det_dev <= 100 * eps
    return ok, f"max |U^dag U - 1| = {dev:.3e}, max |det - 1| = {det_dev:.3e}"


def _verify_gamma5(u, params, seed):
    # gamma5 D gamma5 must equal D^dagger, vector by vector
    geom = u.geometry
    worst = 0.0
    for trial in range(5):
        b = lattice.random_spinor_field(geom, seed + trial, lattice.HIGH)
        g5b = lattice.SpinorField(geom, lattice.gamma_apply(5, b.sites))
        m1 = lattice.gamma_apply(5, wilson.apply_wilson(u, g5b, params).sites)
        m2 = wilson.apply_wilson_dagger(u, b, params).sites
        worst = max(worst, float(np.linalg.norm(m1 - m2)
                                 / np.linalg.norm(m2)))
    return worst <= 1e-12, f"max relative defect = {worst:.3e}"


def _verify_stream(u, params, seed):
    geom = u.geometry
    if any(d < 4 for d in geom.dims):
        return None, "skipped (needs every dimension >= 4)"
    psi = lattice.random_spinor_field(geom, seed + 11, lattice.HIGH)
    a = wilson.apply_wilson(u, psi, params)
    s, _loads = stream.stream_apply(u, psi, params)
    same = np.array_equal(
        a.sites.view(np.float64), s.sites.view(np.float64)
    )
    return bool(same), "bitwise equal" if same else "outputs differ"


def _verify_dense(u, params, seed):
    geom = u.geometry
    n = 12 * geom.volume
    if n > wilson.DENSE_LIMIT:
        return None, f"skipped (12V = {n} > {wilson.DENSE_LIMIT})"
    dense = wilson.to_dense(u, params)
    psi = lattice.random_spinor_field(geom, seed + 23, lattice.HIGH)
    direct = wilson.apply_wilson(u, psi, params).sites.reshape(-1)
    via = dense @ psi.sites.reshape(-1)
    rel = np.linalg.norm(via - direct) / np.linalg.norm(direct)
    return bool(rel <= 1e-12), f"relative defect = {rel:.3e}"


def cmd_verify(args):
    cfg = _load_config(args.config)
    params = wilson.WilsonParams(cfg.kappa, cfg.antiperiodic_t)
    u = _read_gauge_for(cfg).astype(lattice.HIGH)
    checks = [
        ("unitarity", lambda: _verify_unitarity(u)),
        ("gamma5-hermiticity", lambda: _verify_gamma5(u, params, cfg.seed)),
        ("stream-vs-reference", lambda: _verify_stream(u, params, cfg.seed)),
        ("dense-oracle", lambda: _verify_dense(u, params, cfg.seed)),
    ]
    failed = 0
    for name, fn in checks:
        ok, detail = fn()
        if ok is None:
            status = "SKIP"
        elif ok:
            status = "PASS"
        else:
            status = "FAIL"
            failed += 1
        print(f"{status:4}  {name:<22} {detail}")
    if failed:
        print(f"{failed} verification check(s) failed")
        return EXIT_VERIFY
    print("all verification checks passed")
    return EXIT_OK


def cmd_gen(args):
    geom = lattice.LatticeGeometry(tuple(args.lattice))
    dtype = lattice.precision_dtype(args.precision)
    u = io.generate_gauge(geom.dims, args.seed, dtype)
    try:
        io.write_gauge(args.out, u)
    except OSError as exc:
        raise _IOFailure(str(exc)) from exc
    print(f"gauge written      : {args.out}")
    print(f"lattice            : {'x'.join(map(str, geom.dims))}")
    print(f"seed               : {args.seed}")
    print(f"precision          : {lattice.precision_name(dtype)}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="wilsoncg",
        description="Streaming nearest-neighbor fermion operator with "
                    "mixed-precision CG and a pipeline cost model.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve D x = b from a config file")
    ps.add_argument("config")
    ps.add_argument("--mode", choices=("mixed", "high"), default="mixed",
                    help="mixed-precision defect correction (default) or "
                         "all-high CGNR")
    ps.add_argument("--point-source", action="store_true",
                    help="use a unit point source instead of a source file")
    ps.set_defaults(fn=cmd_solve)

    pb = sub.add_parser("bench", help="time operator sweeps on each backend")
    pb.add_argument("config")
    pb.add_argument("--sweeps", type=int, default=5)
    pb.set_defaults(fn=cmd_bench)

    pt = sub.add_parser("trace", help="write the pipeline trace file")
    pt.add_argument("config")
    pt.add_argument("--out", required=True)
    pt.set_defaults(fn=cmd_trace)

    pv = sub.add_parser("verify", help="run operator self-checks")
    pv.add_argument("config")
    pv.set_defaults(fn=cmd_verify)

    pg = sub.add_parser("gen", help="generate a deterministic gauge field")
    pg.add_argument("--lattice", type=int, nargs=4, required=True,
                    metavar=("LX", "LY", "LZ", "LT"))
    pg.add_argument("--seed", type=int, default=1)
    pg.add_argument("--out", required=True)
    pg.add_argument("--precision", default="double",
                    choices=("single", "double"))
    pg.set_defaults(fn=cmd_gen)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, 0 on --help; pass both through
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except _IOFailure as exc:
        return _fail(EXIT_IO, exc)
    except FieldFormatError as exc:
        return _fail(EXIT_IO, exc)
    except (BreakdownError, StagnationError) as exc:
        return _fail(EXIT_BREAKDOWN, exc)
    except ConfigError as exc:
        return _fail(EXIT_USAGE, exc)
    except DomainError as exc:
        return _fail(EXIT_USAGE, exc)
    except WilsonCGError as exc:
        return _fail(EXIT_USAGE, exc)


if __name__ == "__main__":
    sys.exit(main())
