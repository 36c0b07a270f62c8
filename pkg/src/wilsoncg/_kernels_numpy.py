"""Pure-numpy kernels: the ``_stencil`` DAG vectorized over sites.

Neighbor spinors are gathered into a staging array (pure data movement),
then a single :func:`_stencil.site_stencil` call evaluates all sites at
once on float views.  Since gathering copies bits and the stencil is the
same fixed-order real arithmetic, outputs match the jitted backend
exactly.
"""

import numpy as np

from . import _stencil


def real_dtype_of(a):
    return np.float32 if a.dtype == np.complex64 else np.float64


def _float_view(a):
    a = np.ascontiguousarray(a)
    return a.view(real_dtype_of(a)).reshape(a.shape + (2,))


def _to_complex(view, like):
    return np.ascontiguousarray(view).view(like.dtype).reshape(view.shape[:-1])


def _gather_links(lv, nbr):
    vol = lv.shape[0]
    lks = np.empty((vol, 8, 3, 3, 2), lv.dtype)
    for mu in range(4):
        lks[:, 2 * mu] = lv[:, mu]
        lks[:, 2 * mu + 1] = lv[nbr[:, 2 * mu + 1], mu]
    return lks


def apply_field(psi, links, nbr, kappa, dagger):
    """psi (V,4,3) complex, links (V,4,3,3) complex -> (V,4,3) complex."""
    pv = _float_view(psi)
    lv = _float_view(links)
    rdt = real_dtype_of(psi)
    nbrs = pv[nbr]  # (V, 8, 4, 3, 2)
    lks = _gather_links(lv, nbr)
    ov = _stencil.site_stencil(pv, nbrs, lks, rdt(kappa), bool(dagger))
    return _to_complex(ov, psi)


def stream_field(psi, links, nbr, kappa, spatial_volume, capacity):
    """Streaming pass over the cyclic buffer; see the jitted twin.

    The buffer discipline (load order, slot reuse, emission offset) is
    identical; spinor reads for every emitted site go through the buffer
    slots into a staging array, and one shared stencil call evaluates the
    whole batch.
    """
    pv = _float_view(psi)
    lv = _float_view(links)
    rdt = real_dtype_of(psi)
    vol = pv.shape[0]
    slots = np.empty((capacity, 4, 3, 2), pv.dtype)
    slot_site = np.full(capacity, -1, np.int64)
    centers = np.empty_like(pv)
    nbrs = np.empty((vol, 8, 4, 3, 2), pv.dtype)
    loads = 0
    for p in range(vol + capacity):
        site = p % vol
        slots[p % capacity] = pv[site]
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
        centers[i] = slots[sl]
        for d in range(8):
            n = nbr[i, d]
            q = n if n >= k else n + vol
            sl = q % capacity
            if slot_site[sl] != n:
                raise RuntimeError("cyclic buffer missed a neighbor site")
            nbrs[i, d] = slots[sl]
    lks = _gather_links(lv, nbr)
    ov = _stencil.site_stencil(centers, nbrs, lks, rdt(kappa), False)
    return _to_complex(ov, psi), int(loads)


def site(center, nbrs, links, kappa, dagger):
    """Single-site stencil on (4,3) / (8,4,3) / (8,3,3) complex arrays."""
    rdt = real_dtype_of(np.asarray(center))
    ov = _stencil.site_stencil(
        _float_view(center), _float_view(nbrs), _float_view(links),
        rdt(kappa), bool(dagger),
    )
    return _to_complex(ov, np.asarray(center))
