"""Per-site hopping stencil as an explicit real-arithmetic DAG.

Everything value-bearing in the operator is written here as individual
real adds/muls on (re, im) pairs, in a fixed evaluation order.  Real
float adds and muls are exactly rounded, so any route through this DAG
produces bit-identical results regardless of vectorization.  The same
code body therefore serves three purposes:

* the vectorized numpy backend calls :func:`site_stencil` on float views
  of whole fields (leading axis = sites),
* the flop counter runs it on counting scalars (object arrays),
* tests run it per site as the reference the jitted kernels in
  ``_kernels_numba`` (a line-for-line njit transcription) must match
  bit for bit.

Direction index convention used throughout the package: ``k = 0..7``
maps to (mu, forward/backward) as ``mu = k // 2``, forward for even k.

Spin structure: each hop applies (1 + s*gamma_mu) with s = -1 on forward
hops and +1 on backward hops (swapped for the adjoint operator).  These
projectors have rank two: the lower two spin components of the result
are phase-multiples of the upper two, so only two color vectors are
transported per hop.  The phase tables below encode that coupling;
codes mean 0:+1, 1:-1, 2:+i, 3:-i, and flipping the sign of s toggles
code -> code ^ 1.
"""

import numpy as np

# Upper-half projection: f_j = psi_j + phase * psi_partner  (j = 0, 1).
# Tables are for s = +1; xor the code with 1 for s = -1.
PROJ_PARTNER = np.array([[3, 2], [3, 2], [2, 3], [2, 3]], dtype=np.int64)
PROJ_CODE = np.array([[2, 2], [1, 0], [2, 3], [0, 0]], dtype=np.int64)

# Lower-half reconstruction: h_{2+j} += phase * chi_src.
RECON_SRC = np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=np.int64)
RECON_CODE = np.array([[3, 3], [0, 1], [3, 2], [0, 0]], dtype=np.int64)


def _cadd_ph(ar, ai, br, bi, code):
    """a + phase*b on (re, im) pairs; phase picked by `code`."""
    if code == 0:
        return ar + br, ai + bi
    if code == 1:
        return ar - br, ai - bi
    if code == 2:
        return ar - bi, ai + br
    return ar + bi, ai - br


def _cset_ph(br, bi, code):
    """phase*b on (re, im) pairs (pure shuffle/negation, no flops)."""
    if code == 0:
        return br, bi
    if code == 1:
        return -br, -bi
    if code == 2:
        return -bi, br
    return bi, -br


def _su3_matvec(u, f, chi, dag):
    """chi = U f (or U^dagger f), 3x3 complex times two-row half-spinor.

    u: (..., 3, 3, 2), f/chi: (..., 2?, 3, 2) -- operates on one color
    row layout (..., 3, 2) per call site; here f and chi carry the color
    axis second-to-last.  Accumulation order is fixed: b = 0, then 1,
    then 2, left to right.
    """
    for j in range(2):
        for a in range(3):
            if dag:
                u0r, u0i = u[..., 0, a, 0], u[..., 0, a, 1]
                u1r, u1i = u[..., 1, a, 0], u[..., 1, a, 1]
                u2r, u2i = u[..., 2, a, 0], u[..., 2, a, 1]
                rr = u0r * f[..., j, 0, 0] + u0i * f[..., j, 0, 1]
                ri = u0r * f[..., j, 0, 1] - u0i * f[..., j, 0, 0]
                rr = rr + (u1r * f[..., j, 1, 0] + u1i * f[..., j, 1, 1])
                ri = ri + (u1r * f[..., j, 1, 1] - u1i * f[..., j, 1, 0])
                rr = rr + (u2r * f[..., j, 2, 0] + u2i * f[..., j, 2, 1])
                ri = ri + (u2r * f[..., j, 2, 1] - u2i * f[..., j, 2, 0])
            else:
                u0r, u0i = u[..., a, 0, 0], u[..., a, 0, 1]
                u1r, u1i = u[..., a, 1, 0], u[..., a, 1, 1]
                u2r, u2i = u[..., a, 2, 0], u[..., a, 2, 1]
                rr = u0r * f[..., j, 0, 0] - u0i * f[..., j, 0, 1]
                ri = u0r * f[..., j, 0, 1] + u0i * f[..., j, 0, 0]
                rr = rr + (u1r * f[..., j, 1, 0] - u1i * f[..., j, 1, 1])
                ri = ri + (u1r * f[..., j, 1, 1] + u1i * f[..., j, 1, 0])
                rr = rr + (u2r * f[..., j, 2, 0] - u2i * f[..., j, 2, 1])
                ri = ri + (u2r * f[..., j, 2, 1] + u2i * f[..., j, 2, 0])
            chi[..., j, a, 0] = rr
            chi[..., j, a, 1] = ri


def site_stencil(center, nbrs, links, kappa, dagger=False):
    """One application of the hopping stencil at a site (or all sites).

    center : (..., 4, 3, 2) float -- spinor at the site
    nbrs   : (..., 8, 4, 3, 2)    -- neighbor spinors, direction order k
    links  : (..., 8, 3, 3, 2)    -- U_mu(x) for even k, U_mu(x-mu) for odd
    kappa  : scalar of matching real dtype
    Returns (..., 4, 3, 2).  Leading axes broadcast over sites.
    """
    h = np.empty_like(center)
    f = np.empty(center.shape[:-3] + (2, 3, 2), dtype=center.dtype)
    chi = np.empty_like(f)

    for k in range(8):
        mu = k // 2
        fwd = (k % 2) == 0
        s_pos = fwd == dagger  # sign of s in (1 + s*gamma_mu)

        for j in range(2):
            part = PROJ_PARTNER[mu, j]
            code = PROJ_CODE[mu, j] if s_pos else PROJ_CODE[mu, j] ^ 1
            for c in range(3):
                rr, ri = _cadd_ph(
                    nbrs[..., k, j, c, 0],
                    nbrs[..., k, j, c, 1],
                    nbrs[..., k, part, c, 0],
                    nbrs[..., k, part, c, 1],
                    code,
                )
                f[..., j, c, 0] = rr
                f[..., j, c, 1] = ri

        # Backward hops transport with the adjoint link.
        _su3_matvec(links[..., k, :, :, :], f, chi, not fwd)

        if k == 0:
            for j in range(2):
                src = RECON_SRC[mu, j]
                code = RECON_CODE[mu, j] if s_pos else RECON_CODE[mu, j] ^ 1
                for c in range(3):
                    h[..., j, c, 0] = chi[..., j, c, 0]
                    h[..., j, c, 1] = chi[..., j, c, 1]
                    lr, li = _cset_ph(
                        chi[..., src, c, 0], chi[..., src, c, 1], code
                    )
                    h[..., 2 + j, c, 0] = lr
                    h[..., 2 + j, c, 1] = li
        else:
            for j in range(2):
                src = RECON_SRC[mu, j]
                code = RECON_CODE[mu, j] if s_pos else RECON_CODE[mu, j] ^ 1
                for c in range(3):
                    h[..., j, c, 0] = h[..., j, c, 0] + chi[..., j, c, 0]
                    h[..., j, c, 1] = h[..., j, c, 1] + chi[..., j, c, 1]
                    lr, li = _cadd_ph(
                        h[..., 2 + j, c, 0],
                        h[..., 2 + j, c, 1],
                        chi[..., src, c, 0],
                        chi[..., src, c, 1],
                        code,
                    )
                    h[..., 2 + j, c, 0] = lr
                    h[..., 2 + j, c, 1] = li

    out = np.empty_like(center)
    for sp in range(4):
        for c in range(3):
            out[..., sp, c, 0] = center[..., sp, c, 0] - kappa * h[..., sp, c, 0]
            out[..., sp, c, 1] = center[..., sp, c, 1] - kappa * h[..., sp, c, 1]
    return out


class _OpCounter:
    __slots__ = ("adds", "muls")

    def __init__(self):
        self.adds = 0
        self.muls = 0


class _CountingScalar:
    """Stand-in float that counts adds/muls; negation and copies are free."""

    __slots__ = ("_ctr",)

    def __init__(self, ctr):
        self._ctr = ctr

    def __add__(self, other):
        self._ctr.adds += 1
        return self

    def __sub__(self, other):
        self._ctr.adds += 1
        return self

    def __mul__(self, other):
        self._ctr.muls += 1
        return self

    def __neg__(self):
        return self


def count_site_flops():
    """Run the stencil symbolically and return (adds, muls) per site."""
    ctr = _OpCounter()

    def blank(shape):
        a = np.empty(shape, dtype=object)
        flat = a.reshape(-1)
        for i in range(flat.size):
            flat[i] = _CountingScalar(ctr)
        return a

    site_stencil(
        blank((4, 3, 2)),
        blank((8, 4, 3, 2)),
        blank((8, 3, 3, 2)),
        _CountingScalar(ctr),
    )
    return ctr.adds, ctr.muls
