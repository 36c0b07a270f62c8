"""Jitted kernels: njit transcription of the DAG in ``_stencil``.

The arithmetic here must stay a line-for-line copy of
``_stencil.site_stencil`` (same operations, same evaluation order) so the
two backends agree bit for bit; the bitwise cross-checks in the test
suite exist to keep it that way.  Scratch buffers are allocated once per
sweep and reused site to site.
"""

import numpy as np
from numba import njit

from ._stencil import PROJ_CODE, PROJ_PARTNER, RECON_CODE, RECON_SRC


@njit(cache=True)
def _cadd_ph(ar, ai, br, bi, code):
    if code == 0:
        return ar + br, ai + bi
    elif code == 1:
        return ar - br, ai - bi
    elif code == 2:
        return ar - bi, ai + br
    else:
        return ar + bi, ai - br


@njit(cache=True)
def _cset_ph(br, bi, code):
    if code == 0:
        return br, bi
    elif code == 1:
        return -br, -bi
    elif code == 2:
        return -bi, br
    else:
        return bi, -br


@njit(cache=True)
def _site(out, center, nbrs, links, kappa, dagger, f, chi, h):
    # out/center/h: (4,3,2); nbrs: (8,4,3,2); links: (8,3,3,2); f/chi: (2,3,2)
    for k in range(8):
        mu = k // 2
        fwd = (k % 2) == 0
        s_pos = fwd == dagger

        for j in range(2):
            part = PROJ_PARTNER[mu, j]
            code = PROJ_CODE[mu, j] if s_pos else PROJ_CODE[mu, j] ^ 1
            for c in range(3):
                rr, ri = _cadd_ph(
                    nbrs[k, j, c, 0],
                    nbrs[k, j, c, 1],
                    nbrs[k, part, c, 0],
                    nbrs[k, part, c, 1],
                    code,
                )
                f[j, c, 0] = rr
                f[j, c, 1] = ri

        dag = not fwd
        for j in range(2):
            for a in range(3):
                if dag:
                    u0r, u0i = links[k, 0, a, 0], links[k, 0, a, 1]
                    u1r, u1i = links[k, 1, a, 0], links[k, 1, a, 1]
                    u2r, u2i = links[k, 2, a, 0], links[k, 2, a, 1]
                    rr = u0r * f[j, 0, 0] + u0i * f[j, 0, 1]
                    ri = u0r * f[j, 0, 1] - u0i * f[j, 0, 0]
                    rr = rr + (u1r * f[j, 1, 0] + u1i * f[j, 1, 1])
                    ri = ri + (u1r * f[j, 1, 1] - u1i * f[j, 1, 0])
                    rr = rr + (u2r * f[j, 2, 0] + u2i * f[j, 2, 1])
                    ri = ri + (u2r * f[j, 2, 1] - u2i * f[j, 2, 0])
                else:
                    u0r, u0i = links[k, a, 0, 0], links[k, a, 0, 1]
                    u1r, u1i = links[k, a, 1, 0], links[k, a, 1, 1]
                    u2r, u2i = links[k, a, 2, 0], links[k, a, 2, 1]
                    rr = u0r * f[j, 0, 0] - u0i * f[j, 0, 1]
                    ri = u0r * f[j, 0, 1] + u0i * f[j, 0, 0]
                    rr = rr + (u1r * f[j, 1, 0] - u1i * f[j, 1, 1])
                    ri = ri + (u1r * f[j, 1, 1] + u1i * f[j, 1, 0])
                    rr = rr + (u2r * f[j, 2, 0] - u2i * f[j, 2, 1])
                    ri = ri + (u2r * f[j, 2, 1] + u2i * f[j, 2, 0])
                chi[j, a, 0] = rr
                chi[j, a, 1] = ri

        if k == 0:
            for j in range(2):
                src = RECON_SRC[mu, j]
                code = RECON_CODE[mu, j] if s_pos else RECON_CODE[mu, j] ^ 1
                for c in range(3):
                    h[j, c, 0] = chi[j, c, 0]
                    h[j, c, 1] = chi[j, c, 1]
                    lr, li = _cset_ph(chi[src, c, 0], chi[src, c, 1], code)
                    h[2 + j, c, 0] = lr
                    h[2 + j, c, 1] = li
        else:
            for j in range(2):
                src = RECON_SRC[mu, j]
                code = RECON_CODE[mu, j] if s_pos else RECON_CODE[mu, j] ^ 1
                for c in range(3):
                    h[j, c, 0] = h[j, c, 0] + chi[j, c, 0]
                    h[j, c, 1] = h[j, c, 1] + chi[j, c, 1]
                    lr, li = _cadd_ph(
                        h[2 + j, c, 0],
                        h[2 + j, c, 1],
                        chi[src, c, 0],
                        chi[src, c, 1],
                        code,
                    )
                    h[2 + j, c, 0] = lr
                    h[2 + j, c, 1] = li

    for sp in range(4):
        for c in range(3):
            out[sp, c, 0] = center[sp, c, 0] - kappa * h[sp, c, 0]
            out[sp, c, 1] = center[sp, c, 1] - kappa * h[sp, c, 1]


@njit(cache=True)
def _sweep(out, psi, links, nbr, kappa, dagger):
    vol = psi.shape[0]
    nbrs = np.empty((8, 4, 3, 2), psi.dtype)
    lks = np.empty((8, 3, 3, 2), psi.dtype)
    f = np.empty((2, 3, 2), psi.dtype)
    chi = np.empty((2, 3, 2), psi.dtype)
    h = np.empty((4, 3, 2), psi.dtype)
    for i in range(vol):
        for k in range(8):
            n = nbr[i, k]
            mu = k // 2
            nbrs[k] = psi[n]
            if k % 2 == 0:
                lks[k] = links[i, mu]
            else:
                lks[k] = links[n, mu]
        _site(out[i], psi[i], nbrs, lks, kappa, dagger, f, chi, h)


@njit(cache=True)
def _stream_sweep(out, psi, links, nbr, kappa, spatial_volume, capacity):
    """Single streaming pass with a cyclic site buffer.

    Sites are loaded in index order, one per step, for volume + capacity
    steps (the first `capacity` sites stream through again at the end to
    serve wrapped neighbors).  Once the buffer is full, each step emits
    one output site, offset so every stencil read hits the buffer.
    Returns the number of site loads performed.
    """
    vol = psi.shape[0]
    slots = np.empty((capacity, 4, 3, 2), psi.dtype)
    slot_site = np.full(capacity, -1, np.int64)
    nbrs = np.empty((8, 4, 3, 2), psi.dtype)
    lks = np.empty((8, 3, 3, 2), psi.dtype)
    f = np.empty((2, 3, 2), psi.dtype)
    chi = np.empty((2, 3, 2), psi.dtype)
    h = np.empty((4, 3, 2), psi.dtype)
    loads = 0
    for p in range(vol + capacity):
        site = p % vol
        slots[p % capacity] = psi[site]
        slot_site[p % capacity] = site
        loads += 1
        k = p - (capacity - 1)
        if k < 0 or k >= vol:
            continue
        i = (spatial_volume + k) % vol
        q = i if i >= k else i + vol
        sl = q % capacity
        if slot_site[sl] != i:
            raise RuntimeError("cyclic buffer missed the center site")
        center = slots[sl]
        for d in range(8):
            n = nbr[i, d]
            q = n if n >= k else n + vol
            sl = q % capacity
            if slot_site[sl] != n:
                raise RuntimeError("cyclic buffer missed a neighbor site")
            nbrs[d] = slots[sl]
            mu = d // 2
            if d % 2 == 0:
                lks[d] = links[i, mu]
            else:
                lks[d] = links[n, mu]
        _site(out[i], center, nbrs, lks, kappa, False, f, chi, h)
    return loads


def _float_view(a):
    a = np.ascontiguousarray(a)
    return a.view(real_dtype_of(a)).reshape(a.shape + (2,))


def real_dtype_of(a):
    return np.float32 if a.dtype == np.complex64 else np.float64


def apply_field(psi, links, nbr, kappa, dagger):
    """psi (V,4,3) complex, links (V,4,3,3) complex -> (V,4,3) complex."""
    out = np.empty_like(psi, order="C")
    rdt = real_dtype_of(psi)
    _sweep(
        _float_view(out), _float_view(psi), _float_view(links), nbr,
        rdt(kappa), bool(dagger),
    )
    return out


def stream_field(psi, links, nbr, kappa, spatial_volume, capacity):
    out = np.empty_like(psi, order="C")
    rdt = real_dtype_of(psi)
    loads = _stream_sweep(
        _float_view(out), _float_view(psi), _float_view(links), nbr,
        rdt(kappa), spatial_volume, capacity,
    )
    return out, int(loads)


def site(center, nbrs, links, kappa, dagger):
    """Single-site stencil on (4,3) / (8,4,3) / (8,3,3) complex arrays."""
    out = np.empty_like(np.ascontiguousarray(center))
    rdt = real_dtype_of(center)
    f = np.empty((2, 3, 2), rdt)
    chi = np.empty((2, 3, 2), rdt)
    h = np.empty((4, 3, 2), rdt)
    _site(
        _float_view(out), _float_view(center), _float_view(nbrs),
        _float_view(links), rdt(kappa), bool(dagger), f, chi, h,
    )
    return out
