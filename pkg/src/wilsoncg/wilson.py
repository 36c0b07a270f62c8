"""Nearest-neighbor fermion operator and derived conveniences.

The operator acts on a spinor field as

    (D psi)(x) = psi(x) - kappa * sum_mu [ (1 - gamma_mu) U_mu(x) psi(x+mu)
                                         + (1 + gamma_mu) U_mu(x-mu)^dag psi(x-mu) ]

with kappa restricted to (0, 0.25).  The adjoint swaps the projector
signs and nothing else.  With antiperiodic_t set, links crossing the
t = Lt-1 boundary in direction 3 pick up a -1 phase; that is folded into
an adjusted link copy so the kernels never branch on position.
"""

import functools
from dataclasses import dataclass

import numpy as np

from . import _stencil, backend, lattice
from .errors import DomainError


@dataclass(frozen=True)
class WilsonParams:
    """Operator parameters: hopping strength and time boundary."""

    kappa: float
    antiperiodic_t: bool = False

    def __post_init__(self):
        k = float(self.kappa)
        if not 0.0 < k < 0.25:
            raise DomainError(f"kappa must lie in (0, 0.25), got {self.kappa}")
        object.__setattr__(self, "kappa", k)
        object.__setattr__(self, "antiperiodic_t", bool(self.antiperiodic_t))


@dataclass(frozen=True)
class FlopReport:
    """Real add/mul counts for one operator application."""

    flops_per_site: int
    flops_total: int
    volume: int
    adds_per_site: int
    muls_per_site: int


def _check_pair(u, psi):
    if u.geometry != psi.geometry:
        raise DomainError(
            f"geometry mismatch: gauge {u.geometry.dims} vs "
            f"spinor {psi.geometry.dims}"
        )
    if u.dtype != psi.dtype:
        raise DomainError(
            f"precision mismatch: gauge {u.dtype} vs spinor {psi.dtype}"
        )


def effective_links(u, params):
    """Link array with the time-boundary sign applied (copy only if needed)."""
    if not params.antiperiodic_t:
        return u.links
    geom = u.geometry
    links = u.links.copy()
    # t = Lt-1 occupies the last spatial_volume sites in index order
    links[geom.volume - geom.spatial_volume :, 3] *= -1
    return links


def _apply(u, psi, params, dagger):
    _check_pair(u, psi)
    geom = psi.geometry
    nbr = lattice.neighbor_table(geom)
    out = backend.kernels().apply_field(
        psi.sites, effective_links(u, params), nbr, params.kappa, dagger
    )
    return lattice.SpinorField(geom, out)


def apply_wilson(u, psi, params):
    """D psi."""
    return _apply(u, psi, params, False)


def apply_wilson_dagger(u, psi, params):
    """D^dagger psi."""
    return _apply(u, psi, params, True)


def apply_normal(u, psi, params):
    """D^dagger D psi (Hermitian positive definite for valid kappa)."""
    return _apply(u, _apply(u, psi, params, False), params, True)


DENSE_LIMIT = 4096


def to_dense(u, params):
    """Operator as a dense (12V, 12V) complex matrix, columns by basis hits.

    Refused above 12V = 4096 entries per side; dense work is only for
    small-lattice verification.
    """
    geom = u.geometry
    n = 12 * geom.volume
    if n > DENSE_LIMIT:
        raise DomainError(
            f"dense operator would be {n}x{n}; refusing above "
            f"{DENSE_LIMIT} (use the matrix-free form)"
        )
    uh = u.astype(lattice.HIGH)
    mat = np.empty((n, n), dtype=np.complex128)
    basis = lattice.SpinorField.zeros(geom, lattice.HIGH)
    flat = basis.sites.reshape(-1)
    for col in range(n):
        flat[col] = 1.0
        mat[:, col] = apply_wilson(uh, basis, params).sites.reshape(-1)
        flat[col] = 0.0
    return mat


@functools.lru_cache(maxsize=1)
def _site_flops():
    adds, muls = _stencil.count_site_flops()
    return adds, muls


def count_flops(geom):
    """Exact real-arithmetic cost of one operator application.

    Counts every real add and multiply in the per-site DAG (negations
    and data movement are free) and scales by the volume.
    """
    adds, muls = _site_flops()
    per_site = adds + muls
    return FlopReport(
        flops_per_site=per_site,
        flops_total=per_site * geom.volume,
        volume=geom.volume,
        adds_per_site=adds,
        muls_per_site=muls,
    )
