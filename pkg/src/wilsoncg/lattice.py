"""Lattice geometry, gamma matrices, SU(3) helpers, and field containers.

Site layout is fixed everywhere in the package: for coordinates
(x, y, z, t) on an (Lx, Ly, Lz, Lt) lattice,

    index = x + Lx * (y + Ly * (z + Lz * t))

so x is the fastest axis and t the slowest.  All boundaries wrap
periodically at this layer; the antiperiodic time option is applied by
the operator as a sign on the t-boundary links.
"""

import functools
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

HIGH = np.dtype(np.complex128)
LOW = np.dtype(np.complex64)

_PRECISION_NAMES = {HIGH: "double", LOW: "single"}


def precision_dtype(name):
    """Map a precision name ('single'/'double' and aliases) to a dtype."""
    key = str(name).strip().lower()
    if key in ("single", "float32", "low"):
        return LOW
    if key in ("double", "float64", "high"):
        return HIGH
    raise DomainError(f"unknown precision {name!r}")


def precision_name(dtype):
    dt = np.dtype(dtype)
    try:
        return _PRECISION_NAMES[dt]
    except KeyError:
        raise DomainError(f"unsupported field dtype {dt}") from None


def real_dtype(dtype):
    """The real scalar dtype backing a complex field dtype."""
    return np.dtype(np.dtype(dtype).char.replace("D", "d").replace("F", "f"))


def machine_eps(dtype):
    return float(np.finfo(np.dtype(dtype)).eps)


@dataclass(frozen=True)
class LatticeGeometry:
    """Four periodic dimensions, each at least 2."""

    dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 4:
            raise DomainError(f"need 4 dimensions, got {len(dims)}")
        if any(d < 2 for d in dims):
            raise DomainError(f"each dimension must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def volume(self):
        lx, ly, lz, lt = self.dims
        return lx * ly * lz * lt

    @property
    def spatial_volume(self):
        lx, ly, lz, _ = self.dims
        return lx * ly * lz

    def site_index(self, coords):
        if len(coords) != 4:
            raise DomainError(f"need 4 coordinates, got {len(coords)}")
        idx = 0
        for axis in (3, 2, 1, 0):
            c = int(coords[axis])
            if not 0 <= c < self.dims[axis]:
                raise DomainError(
                    f"coordinate {c} out of range on axis {axis} "
                    f"(dims {self.dims})"
                )
            idx = idx * self.dims[axis] + c
        return idx

    def site_coords(self, index):
        if not 0 <= index < self.volume:
            raise DomainError(f"site index {index} out of range")
        coords = []
        rem = int(index)
        for d in self.dims:
            coords.append(rem % d)
            rem //= d
        return tuple(coords)

    def neighbor(self, index, mu, sign):
        """Index of the site one step along +/-mu, wrapping periodically."""
        if mu not in (0, 1, 2, 3):
            raise DomainError(f"direction mu must be 0..3, got {mu}")
        if sign not in (1, -1):
            raise DomainError(f"sign must be +1 or -1, got {sign}")
        coords = list(self.site_coords(index))
        coords[mu] = (coords[mu] + sign) % self.dims[mu]
        return self.site_index(coords)


@functools.lru_cache(maxsize=32)
def neighbor_table(geom):
    """(V, 8) int64 table of neighbor indices.

    Column k is direction k per the package convention: mu = k // 2,
    forward (+mu) for even k, backward (-mu) for odd k.
    """
    dims = np.array(geom.dims, dtype=np.int64)
    idx = np.arange(geom.volume, dtype=np.int64)
    coords = np.empty((geom.volume, 4), dtype=np.int64)
    rem = idx.copy()
    for mu in range(4):
        coords[:, mu] = rem % dims[mu]
        rem //= dims[mu]
    strides = np.array(
        [1, dims[0], dims[0] * dims[1], dims[0] * dims[1] * dims[2]],
        dtype=np.int64,
    )
    table = np.empty((geom.volume, 8), dtype=np.int64)
    for mu in range(4):
        for sgn, col in ((1, 2 * mu), (-1, 2 * mu + 1)):
            shifted = coords.copy()
            shifted[:, mu] = (coords[:, mu] + sgn) % dims[mu]
            table[:, col] = shifted @ strides
    table.setflags(write=False)
    return table


# Gamma matrices, chiral basis.  Entries are exact (0, +-1, +-i), and
# gamma5 = gamma0.gamma1.gamma2.gamma3 = diag(1, 1, -1, -1) holds exactly
# in floating point (every product below lands on representable values).
GAMMA = np.zeros((4, 4, 4), dtype=np.complex128)
GAMMA[0, 0, 3] = 1j
GAMMA[0, 1, 2] = 1j
GAMMA[0, 2, 1] = -1j
GAMMA[0, 3, 0] = -1j
GAMMA[1, 0, 3] = -1
GAMMA[1, 1, 2] = 1
GAMMA[1, 2, 1] = 1
GAMMA[1, 3, 0] = -1
GAMMA[2, 0, 2] = 1j
GAMMA[2, 1, 3] = -1j
GAMMA[2, 2, 0] = -1j
GAMMA[2, 3, 1] = 1j
GAMMA[3, 0, 2] = 1
GAMMA[3, 1, 3] = 1
GAMMA[3, 2, 0] = 1
GAMMA[3, 3, 1] = 1
GAMMA.setflags(write=False)

GAMMA5 = np.diag([1.0, 1.0, -1.0, -1.0]).astype(np.complex128)
GAMMA5.setflags(write=False)


def gamma_apply(mu, psi):
    """Apply gamma_mu (mu in 0..3) or gamma5 (mu = 5) to a (4, 3) spinor."""
    psi = np.asarray(psi)
    if psi.shape[-2:] != (4, 3):
        raise DomainError(f"spinor must have shape (..., 4, 3), got {psi.shape}")
    if mu == 5:
        g = GAMMA5
    elif mu in (0, 1, 2, 3):
        g = GAMMA[mu]
    else:
        raise DomainError(f"gamma index must be 0..3 or 5, got {mu}")
    # tensordot over the spin axis; exact for these matrices
    return np.moveaxis(np.tensordot(g, psi, axes=([1], [-2])), 0, -2)


def su3_mulvec(u, v, dagger=False):
    """3x3 complex matrix times color vector, u v or u^dagger v.

    Evaluated with the same fixed-order real arithmetic the kernels use,
    so results are reproducible to the bit across call sites.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != (3, 3) or v.shape != (3,):
        raise DomainError("su3_mulvec expects shapes (3, 3) and (3,)")
    from . import _stencil

    cdt = np.promote_types(u.dtype, np.promote_types(v.dtype, np.complex64))
    uv = np.ascontiguousarray(u, dtype=cdt)
    vv = np.ascontiguousarray(v, dtype=cdt)
    rdt = real_dtype(cdt)
    uview = uv.view(rdt).reshape(3, 3, 2)
    # feed the shared matvec with a single half-spinor row
    fview = np.zeros((2, 3, 2), dtype=rdt)
    fview[0] = vv.view(rdt).reshape(3, 2)
    chi = np.empty_like(fview)
    _stencil._su3_matvec(uview, fview, chi, bool(dagger))
    return chi[0].copy().view(cdt).reshape(3)


def _orthonormalize_columns(m):
    """Modified Gram-Schmidt; None when a column (numerically) collapses."""
    q = m.astype(np.complex128, copy=True)
    for c in range(3):
        for prev in range(c):
            q[:, c] -= np.vdot(q[:, prev], q[:, c]) * q[:, prev]
        nrm = np.sqrt(np.vdot(q[:, c], q[:, c]).real)
        if nrm < 1e-8:
            return None
        q[:, c] /= nrm
    return q


def random_su3(seed):
    """Deterministic Haar-ish SU(3) matrix from an integer seed.

    Gram-Schmidt on a seeded complex Gaussian 3x3 — run twice, since a
    single pass leaves O(eps * conditioning) in U^dag U - 1 and the
    fields promise 10*eps — then the last column is rotated by the
    conjugate determinant phase so det = 1.
    """
    for attempt in range(8):
        rng = np.random.default_rng(np.random.PCG64(seed + attempt * 0x9E3779B9))
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        q = _orthonormalize_columns(a)
        if q is not None:
            q = _orthonormalize_columns(q)
        if q is None:
            continue
        det = np.linalg.det(q)
        q[:, 2] *= det.conjugate() / abs(det)
        return q
    raise DomainError(f"could not orthonormalize a random draw for seed {seed}")


@dataclass(frozen=True)
class GaugeField:
    """SU(3) link variables, one per site and direction: (V, 4, 3, 3)."""

    geometry: LatticeGeometry
    links: np.ndarray

    def __post_init__(self):
        want = (self.geometry.volume, 4, 3, 3)
        if self.links.shape != want:
            raise DomainError(
                f"gauge links shape {self.links.shape}, expected {want}"
            )
        if self.links.dtype not in (HIGH, LOW):
            raise DomainError(f"unsupported gauge dtype {self.links.dtype}")
        if not self.links.flags.c_contiguous:
            object.__setattr__(self, "links", np.ascontiguousarray(self.links))

    @property
    def dtype(self):
        return self.links.dtype

    def astype(self, dtype):
        dt = np.dtype(dtype)
        if dt == self.links.dtype:
            return self
        return GaugeField(self.geometry, self.links.astype(dt))

    @classmethod
    def identity(cls, geom, dtype=HIGH):
        links = np.zeros((geom.volume, 4, 3, 3), dtype=np.dtype(dtype))
        links[..., 0, 0] = 1
        links[..., 1, 1] = 1
        links[..., 2, 2] = 1
        return cls(geom, links)


@dataclass(frozen=True)
class SpinorField:
    """Spinor per site: (V, 4, 3), spin-major within a site."""

    geometry: LatticeGeometry
    sites: np.ndarray

    def __post_init__(self):
        want = (self.geometry.volume, 4, 3)
        if self.sites.shape != want:
            raise DomainError(
                f"spinor field shape {self.sites.shape}, expected {want}"
            )
        if self.sites.dtype not in (HIGH, LOW):
            raise DomainError(f"unsupported spinor dtype {self.sites.dtype}")
        if not self.sites.flags.c_contiguous:
            object.__setattr__(self, "sites", np.ascontiguousarray(self.sites))

    @property
    def dtype(self):
        return self.sites.dtype

    def astype(self, dtype):
        dt = np.dtype(dtype)
        if dt == self.sites.dtype:
            return self
        return SpinorField(self.geometry, self.sites.astype(dt))

    def copy(self):
        return SpinorField(self.geometry, self.sites.copy())

    @classmethod
    def zeros(cls, geom, dtype=HIGH):
        return cls(geom, np.zeros((geom.volume, 4, 3), dtype=np.dtype(dtype)))

    @classmethod
    def point_source(cls, geom, site=0, spin=0, color=0, dtype=HIGH):
        f = cls.zeros(geom, dtype)
        f.sites[site, spin, color] = 1
        return f


def random_spinor_field(geom, seed, dtype=HIGH):
    """Seeded Gaussian spinor field, drawn in high precision then cast."""
    rng = np.random.default_rng(np.random.PCG64(seed))
    data = rng.standard_normal((geom.volume, 4, 3)) + 1j * rng.standard_normal(
        (geom.volume, 4, 3)
    )
    return SpinorField(geom, data.astype(np.dtype(dtype)))


_M64 = (1 << 64) - 1


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def link_seed(seed, site, mu):
    """Fixed integer mix giving every (seed, site, mu) its own sub-seed."""
    return _splitmix64(_splitmix64(seed & _M64) ^ ((site << 2) | mu))


def random_gauge_field(geom, seed, dtype=HIGH):
    """Seeded gauge field; per-link seeds come from a fixed integer mix."""
    links = np.empty((geom.volume, 4, 3, 3), dtype=np.complex128)
    for site in range(geom.volume):
        for mu in range(4):
            links[site, mu] = random_su3(link_seed(seed, site, mu))
    return GaugeField(geom, links.astype(np.dtype(dtype)))
