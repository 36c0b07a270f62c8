"""Conjugate-gradient solvers for the operator's normal equations.

The operator itself is non-Hermitian, so plain CG runs on the normal
system D^dag D x = D^dag b (CGNR).  The mixed-precision variant applies
defect correction: outer true residuals in high precision, inner CGNR
corrections in low precision.  Inner products are always accumulated in
high precision regardless of the field precision.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import lattice, wilson
from .errors import BreakdownError, DomainError, StagnationError


@dataclass(frozen=True)
class SolverConfig:
    tol_outer: float = 1e-10
    tol_inner: float = 0.1
    max_outer: int = 50
    max_inner: int = None  # None -> 10 * sqrt(12 V), rounded up

    def __post_init__(self):
        if not 0 < self.tol_outer < 1:
            raise DomainError(f"tol_outer must be in (0, 1), got {self.tol_outer}")
        if not 0 < self.tol_inner < 1:
            raise DomainError(f"tol_inner must be in (0, 1), got {self.tol_inner}")
        if self.max_outer < 1:
            raise DomainError(f"max_outer must be >= 1, got {self.max_outer}")
        if self.max_inner is not None and self.max_inner < 1:
            raise DomainError(f"max_inner must be >= 1, got {self.max_inner}")

    def resolved_max_inner(self, geom):
        if self.max_inner is not None:
            return int(self.max_inner)
        return math.ceil(10.0 * math.sqrt(12.0 * geom.volume))


@dataclass
class SolveReport:
    converged: bool
    iterations_low: int
    iterations_high: int
    final_relative_residual: float
    residual_history: list = field(default_factory=list)

    @property
    def iterations_total(self):
        return self.iterations_low + self.iterations_high


def dot(a, b):
    """<a, b> with the first argument conjugated, accumulated in high."""
    if a.geometry != b.geometry:
        raise DomainError("dot: geometry mismatch")
    ah = a.sites if a.dtype == lattice.HIGH else a.sites.astype(lattice.HIGH)
    bh = b.sites if b.dtype == lattice.HIGH else b.sites.astype(lattice.HIGH)
    return complex(np.vdot(ah, bh))


def norm(a):
    return math.sqrt(dot(a, a).real)


def axpy(alpha, x, y):
    """alpha*x + y at the fields' own precision (alpha is cast down)."""
    if x.geometry != y.geometry:
        raise DomainError("axpy: geometry mismatch")
    if x.dtype != y.dtype:
        raise DomainError("axpy: precision mismatch")
    a = x.sites.dtype.type(alpha)
    return lattice.SpinorField(x.geometry, a * x.sites + y.sites)


def _make_report(converged, iters, dtype, rel, history):
    """Iterations are filed under low or high by operand precision."""
    if np.dtype(dtype) == lattice.LOW:
        return SolveReport(converged, iters, 0, rel, history)
    return SolveReport(converged, 0, iters, rel, history)


def cg(apply_a, b, x0=None, cfg=None, tol=None, max_iter=None, callback=None):
    """Conjugate gradients on a Hermitian positive definite operator.

    Stops when the recursively updated residual norm falls below
    tol * ||b||.  Returns (x, SolveReport); the report's history holds
    the relative recursive residual at every step, starting from x0.
    Raises BreakdownError when <p, A p> is not safely positive.
    """
    cfg = cfg or SolverConfig()
    tol = cfg.tol_outer if tol is None else float(tol)
    max_iter = (
        cfg.resolved_max_inner(b.geometry) if max_iter is None else int(max_iter)
    )
    eps = lattice.machine_eps(b.dtype)

    b_norm = norm(b)
    if b_norm == 0.0:
        x = lattice.SpinorField.zeros(b.geometry, b.dtype)
        return x, _make_report(True, 0, b.dtype, 0.0, [0.0])

    if x0 is None:
        x = lattice.SpinorField.zeros(b.geometry, b.dtype)
        r = b.copy()
    else:
        x = x0
        r = axpy(-1.0, apply_a(x0), b)
    rr = dot(r, r).real
    rel = math.sqrt(rr) / b_norm
    history = [rel]
    if rel <= tol:
        return x, _make_report(True, 0, b.dtype, rel, history)

    p = r.copy()
    converged = False
    iters = 0
    for it in range(1, max_iter + 1):
        iters = it
        ap = apply_a(p)
        pap = dot(p, ap).real
        pp = dot(p, p).real
        if not math.isfinite(pap) or pap <= 100.0 * eps * pp:
            raise BreakdownError(it, pap)
        alpha = rr / pap
        x = axpy(alpha, p, x)
        r = axpy(-alpha, ap, r)
        rr_new = dot(r, r).real
        rel = math.sqrt(rr_new) / b_norm
        history.append(rel)
        if callback is not None:
            callback(it, x, rel)
        if rel <= tol:
            converged = True
            break
        p = axpy(rr_new / rr, p, r)
        rr = rr_new

    return x, _make_report(converged, iters, b.dtype, rel, history)


class ResidualValue(NamedTuple):
    """Residual norm; relative unless b = 0, then absolute with the flag set."""

    value: float
    absolute: bool


def true_residual(u, x, b, params):
    """||b - D x|| / ||b||, computed entirely in high precision.

    Low-precision inputs are promoted first.  A zero right-hand side
    makes the ratio meaningless, so the norm is returned unscaled with
    absolute=True.
    """
    uh = u.astype(lattice.HIGH)
    xh = x.astype(lattice.HIGH)
    bh = b.astype(lattice.HIGH)
    r = axpy(-1.0, wilson.apply_wilson(uh, xh, params), bh)
    rn = norm(r)
    bn = norm(bh)
    if bn == 0.0:
        return ResidualValue(rn, True)
    return ResidualValue(rn / bn, False)


def cgnr_solve(u, b, params, cfg=None):
    """Solve D x = b by CG on the normal equations, all in b's precision.

    The CG tolerance refers to the normal-equation residual, which can
    sit above the true residual of the original system; after each CG
    pass the true residual is measured, and the pass is restarted with a
    tighter tolerance until the true residual meets cfg.tol_outer (or
    the iteration budget runs out).
    """
    cfg = cfg or SolverConfig()
    wilson._check_pair(u, b)
    geom = b.geometry

    b_norm = norm(b)
    if b_norm == 0.0:
        x = lattice.SpinorField.zeros(geom, b.dtype)
        return x, _make_report(True, 0, b.dtype, 0.0, [0.0])

    ne_b = wilson.apply_wilson_dagger(u, b, params)

    def apply_a(v):
        return wilson.apply_normal(u, v, params)

    budget = cfg.resolved_max_inner(geom)
    x = None
    total = 0
    tol = cfg.tol_outer
    history = [1.0]
    converged = False
    for _ in range(6):
        if total >= budget:
            break
        x, rep = cg(apply_a, ne_b, x0=x, cfg=cfg, tol=tol,
                    max_iter=budget - total)
        total += rep.iterations_total
        tr = true_residual(u, x, b, params).value
        history.append(tr)
        if tr <= cfg.tol_outer:
            converged = True
            break
        if rep.iterations_total == 0:
            break  # CG can't improve on this tolerance; don't spin
        tol *= 0.1
    return x, _make_report(converged, total, b.dtype, history[-1], history)


def mixed_cg(u_high, u_low, b, params, cfg=None):
    """Defect-correction solve: high-precision residuals, low-precision CG.

    Each outer cycle measures the true residual r = b - D x in high
    precision, then runs a low-precision CGNR pass for a correction d
    with ||r - D d|| <= cfg.tol_inner * ||r||.  All Krylov iterations
    happen at low precision and are filed under iterations_low; the
    outer cycles are residual assembly, not iterations, and show up as
    entries of residual_history instead (iterations_high stays 0 unless
    a high-precision Krylov stage ever runs).  Raises StagnationError
    after two consecutive cycles where the inner CG hit its iteration
    cap and the outer residual did not improve.
    """
    cfg = cfg or SolverConfig()
    wilson._check_pair(u_high, b)
    if u_high.dtype != lattice.HIGH:
        raise DomainError("mixed_cg needs a high-precision gauge field")
    if u_low.dtype != lattice.LOW:
        raise DomainError("mixed_cg needs a low-precision gauge twin")
    if u_low.geometry != u_high.geometry:
        raise DomainError("mixed_cg gauge twins disagree on geometry")
    if b.dtype != lattice.HIGH:
        raise DomainError("mixed_cg right-hand side must be high precision")
    geom = b.geometry

    b_norm = norm(b)
    if b_norm == 0.0:
        x = lattice.SpinorField.zeros(geom, lattice.HIGH)
        return x, SolveReport(True, 0, 0, 0.0, [0.0])

    inner_cfg = SolverConfig(tol_outer=cfg.tol_inner, tol_inner=cfg.tol_inner,
                             max_outer=cfg.max_outer,
                             max_inner=cfg.max_inner)
    x = lattice.SpinorField.zeros(geom, lattice.HIGH)
    history = []
    it_low = 0
    it_high = 0
    converged = False
    prev_rel = math.inf
    stalled = 0
    inner_maxed = False
    for _ in range(cfg.max_outer):
        r = axpy(-1.0, wilson.apply_wilson(u_high, x, params), b)
        rel = norm(r) / b_norm
        history.append(rel)
        if rel <= cfg.tol_outer:
            converged = True
            break
        if inner_maxed and rel >= prev_rel:
            stalled += 1
            if stalled >= 2:
                raise StagnationError(
                    f"outer residual stuck at {rel:.3e} while the inner CG "
                    f"keeps hitting its cap; loosen tol_inner or raise "
                    f"max_inner"
                )
        else:
            stalled = 0
        prev_rel = rel

        # inner solve: D d = r at low precision, true inner residual
        # verified down to tol_inner by the restart-tightening CGNR pass
        r_low = r.astype(lattice.LOW)
        d, rep = cgnr_solve(u_low, r_low, params, inner_cfg)
        it_low += rep.iterations_total
        inner_maxed = not rep.converged
        x = axpy(1.0, d.astype(lattice.HIGH), x)

    final = history[-1] if history else 0.0
    return x, SolveReport(converged, it_low, it_high, final, history)
