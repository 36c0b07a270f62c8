"""Command-line behavior: exit codes, report output, file side effects."""

import os
import subprocess
import sys

import numpy as np
import pytest

from wilsoncg import backend, cli, io, lattice, solver, wilson


def _write(path, text):
    path.write_text(text)
    return str(path)


def _base_config(tmp_path, dims="2 2 2 2", extra=""):
    return _write(
        tmp_path / "run.cfg",
        f"lattice = {dims}\nkappa = 0.12\nseed = 2024\n"
        f"gauge = {tmp_path / 'u.wqcd'}\noutput = {tmp_path / 'x.wqcd'}\n"
        + extra,
    )


def _gen(tmp_path, dims=("2", "2", "2", "2"), seed="2024"):
    rc = cli.main(["gen", "--lattice", *dims, "--seed", seed,
                   "--out", str(tmp_path / "u.wqcd")])
    assert rc == cli.EXIT_OK
    return tmp_path / "u.wqcd"


# ------------------------------------------------------------------- gen

def test_gen_writes_readable_field(tmp_path, capsys):
    path = _gen(tmp_path)
    out = capsys.readouterr().out
    assert "gauge written" in out
    u = io.read_gauge(path)
    assert u.geometry.dims == (2, 2, 2, 2)
    assert u.dtype == lattice.HIGH


def test_gen_single_precision(tmp_path):
    rc = cli.main(["gen", "--lattice", "2", "2", "2", "2",
                   "--precision", "single",
                   "--out", str(tmp_path / "u32.wqcd")])
    assert rc == cli.EXIT_OK
    assert io.read_gauge(tmp_path / "u32.wqcd").dtype == lattice.LOW


# ----------------------------------------------------------------- solve

def test_solve_mixed_point_source(tmp_path, capsys):
    _gen(tmp_path)
    cfg = _base_config(tmp_path)
    rc = cli.main(["solve", cfg, "--point-source"])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_OK
    assert "converged          : True" in out
    assert "mode               : mixed" in out
    x = io.read_spinor(tmp_path / "x.wqcd")
    u = io.read_gauge(tmp_path / "u.wqcd")
    b = lattice.SpinorField.point_source(x.geometry)
    tr = solver.true_residual(u, x, b, wilson.WilsonParams(0.12))
    assert tr.value <= 1e-10


def test_solve_high_mode(tmp_path, capsys):
    _gen(tmp_path)
    cfg = _base_config(tmp_path)
    rc = cli.main(["solve", cfg, "--mode", "high", "--point-source"])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_OK
    assert "iterations (low)   : 0" in out


def test_solve_source_file_recovers_known_solution(tmp_path):
    path = _gen(tmp_path)
    u = io.read_gauge(path)
    x_known = lattice.random_spinor_field(u.geometry, 123)
    b = wilson.apply_wilson(u, x_known, wilson.WilsonParams(0.12))
    io.write_spinor(tmp_path / "b.wqcd", b)
    cfg = _base_config(tmp_path, extra=f"source = {tmp_path / 'b.wqcd'}\n")
    rc = cli.main(["solve", cfg])
    assert rc == cli.EXIT_OK
    x = io.read_spinor(tmp_path / "x.wqcd")
    err = np.linalg.norm(x.sites - x_known.sites) / np.linalg.norm(x_known.sites)
    assert err <= 1e-6


def test_solve_missing_gauge_is_io_error(tmp_path, capsys):
    cfg = _base_config(tmp_path)
    rc = cli.main(["solve", cfg, "--point-source"])
    assert rc == cli.EXIT_IO
    assert capsys.readouterr().err.strip()


def test_solve_corrupt_gauge_is_io_error(tmp_path):
    (tmp_path / "u.wqcd").write_bytes(b"not a field file at all")
    cfg = _base_config(tmp_path)
    rc = cli.main(["solve", cfg, "--point-source"])
    assert rc == cli.EXIT_IO


def test_solve_dims_mismatch_is_usage_error(tmp_path):
    _gen(tmp_path, dims=("2", "2", "2", "4"))
    cfg = _base_config(tmp_path)  # config says 2 2 2 2
    rc = cli.main(["solve", cfg, "--point-source"])
    assert rc == cli.EXIT_USAGE


def test_solve_without_source_is_config_error(tmp_path):
    _gen(tmp_path)
    cfg = _base_config(tmp_path)
    rc = cli.main(["solve", cfg])
    assert rc == cli.EXIT_USAGE


def test_solve_unreachable_tolerance_writes_report_anyway(tmp_path, capsys):
    _gen(tmp_path)
    cfg = _base_config(tmp_path, extra="max_outer = 1\nmax_inner = 2\n")
    rc = cli.main(["solve", cfg, "--point-source"])
    captured = capsys.readouterr()
    assert rc == cli.EXIT_NOCONV
    assert "converged          : False" in captured.out
    assert (tmp_path / "x.wqcd").exists()  # best effort is still written


def test_solve_stagnation_maps_to_breakdown_exit(tmp_path, monkeypatch):
    _gen(tmp_path)
    cfg = _base_config(tmp_path)

    def stuck(_u, r, _params, _cfg):
        zero = lattice.SpinorField.zeros(r.geometry, r.dtype)
        return zero, solver.SolveReport(False, 3, 0, 1.0, [1.0])

    monkeypatch.setattr(solver, "cgnr_solve", stuck)
    rc = cli.main(["solve", cfg, "--point-source"])
    assert rc == cli.EXIT_BREAKDOWN


def test_bad_config_is_usage_error(tmp_path):
    cfg = _write(tmp_path / "bad.cfg", "lattice = 4 4 4 4\nwat = 1\n")
    assert cli.main(["solve", cfg, "--point-source"]) == cli.EXIT_USAGE
    missing = str(tmp_path / "nope.cfg")
    assert cli.main(["solve", missing, "--point-source"]) == cli.EXIT_IO


# ---------------------------------------------------------------- verify

def test_verify_passes_on_clean_field(tmp_path, capsys):
    _gen(tmp_path, dims=("4", "4", "4", "4"))
    cfg = _base_config(tmp_path, dims="4 4 4 4")
    rc = cli.main(["verify", cfg])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_OK
    for name in ("unitarity", "gamma5-hermiticity", "stream-vs-reference",
                 "dense-oracle"):
        assert f"PASS  {name}" in out
    assert "all verification checks passed" in out


def test_verify_skips_stream_on_small_lattice(tmp_path, capsys):
    _gen(tmp_path)
    cfg = _base_config(tmp_path)
    rc = cli.main(["verify", cfg])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_OK
    assert "SKIP  stream-vs-reference" in out


def test_verify_flags_corrupted_link(tmp_path, capsys):
    path = _gen(tmp_path, dims=("4", "4", "4", "4"))
    u = io.read_gauge(path)
    u.links[5, 2, 0, 0] = 3.0 + 0.5j  # break one link's unitarity
    io.write_gauge(path, u)
    cfg = _base_config(tmp_path, dims="4 4 4 4")
    rc = cli.main(["verify", cfg])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_VERIFY
    assert "FAIL  unitarity" in out
    assert "verification check(s) failed" in out


# ----------------------------------------------------------- trace/bench

def test_trace_writes_file(tmp_path, capsys):
    cfg = _write(tmp_path / "t.cfg",
                 "lattice = 4 4 4 4\nkappa = 0.12\n"
                 "ii = 2\nkernels = 3\nlatency = 142\n")
    out_path = tmp_path / "trace.csv"
    rc = cli.main(["trace", cfg, "--out", str(out_path)])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_OK
    assert "total cycles" in out
    head = out_path.read_text().splitlines()[0]
    assert "total_cycles=312" in head  # 142 + 2 * (ceil(256/3) - 1)
    assert "kernels=3" in head


def test_bench_reports_measured_and_modeled(tmp_path, capsys):
    _gen(tmp_path, dims=("4", "4", "4", "4"))
    cfg = _base_config(tmp_path, dims="4 4 4 4")
    rc = cli.main(["bench", cfg, "--sweeps", "2"])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_OK
    assert "flops_total = 350208 per sweep x 2 sweeps" in out
    for name in backend.available():
        assert f"reference/{name}" in out
        assert f"stream/{name}" in out
    assert "modeled/pipeline" in out
    assert "GFLOP/s" in out


def test_bench_skips_stream_rows_below_streamable_size(tmp_path, capsys):
    _gen(tmp_path)
    cfg = _base_config(tmp_path)
    rc = cli.main(["bench", cfg, "--sweeps", "1"])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_OK
    assert "reference/" in out
    assert "stream/" not in out


# ------------------------------------------------------ usage and backend

def test_usage_errors_exit_2(capsys):
    assert cli.main([]) == 2
    assert cli.main(["frobnicate"]) == 2
    capsys.readouterr()  # swallow argparse noise


def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == 0
    assert "solve" in capsys.readouterr().out


def test_backend_resolution(monkeypatch):
    monkeypatch.setenv(backend.BACKEND_ENV, "numpy")
    assert backend._resolve() == "numpy"
    monkeypatch.setenv(backend.BACKEND_ENV, "auto")
    assert backend._resolve() in backend.available()
    monkeypatch.setenv(backend.BACKEND_ENV, "bogus")
    with pytest.warns(UserWarning):
        assert backend._resolve() in backend.available()
    monkeypatch.delenv(backend.BACKEND_ENV)
    assert backend._resolve() in backend.available()


def test_backend_kernels_lookup():
    assert backend.kernels("numpy").__name__.endswith("_kernels_numpy")
    with pytest.raises(ValueError):
        backend.kernels("fortran")


def test_backend_env_honored_in_subprocess(tmp_path):
    """A child process started with WILSONCG_BACKEND=numpy must say so."""
    _gen(tmp_path)
    cfg = _base_config(tmp_path)
    env = dict(os.environ, WILSONCG_BACKEND="numpy")
    proc = subprocess.run(
        [sys.executable, "-m", "wilsoncg.cli", "solve", cfg,
         "--point-source", "--mode", "high"],
        capture_output=True, text=True, env=env, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    assert "backend            : numpy" in proc.stdout
