"""Streaming evaluation and the pipeline cost/trace model.

The streaming form walks sites in index order through a cyclic buffer
sized so that by the time a site is emitted, all eight stencil neighbors
(periodic wrap included) are resident.  With x fastest in the site
order, the worst-case index span between a site and its neighbors is
one step in +-t, i.e. two spatial volumes, plus the analogous z, y and x
margins; hence

    capacity = 2*Lx*Ly*Lz + 2*Lx*Ly + 2*Lx + 3.

Each of the volume + capacity steps loads exactly one site (the first
`capacity` sites stream through twice so wrapped neighbors are served),
which the load counter makes observable.

The trace model describes the same pass as a hardware pipeline:
``kernels`` lanes each process ceil(V / kernels) sites at one site per
``initiation_interval`` cycles after a fill ``latency``.
"""

from dataclasses import dataclass

import numpy as np

from . import backend, lattice, wilson
from .errors import DomainError


def buffer_capacity(geom):
    """Cyclic-buffer slots needed for a single-pass stencil sweep."""
    lx, ly, lz, _ = geom.dims
    return 2 * (lx * ly * lz) + 2 * (lx * ly) + 2 * lx + 3


def _check_streamable(geom):
    if any(d < 4 for d in geom.dims):
        raise DomainError(
            f"streaming needs every dimension >= 4, got {geom.dims}; "
            "smaller lattices would fold a neighbor onto the site itself "
            "within the buffer window"
        )


def stream_apply(u, psi, params):
    """Operator application via the streaming pass.

    Returns (result field, load count).  The result is bit-identical to
    :func:`wilson.apply_wilson`; the load count equals volume + capacity.
    """
    wilson._check_pair(u, psi)
    geom = psi.geometry
    _check_streamable(geom)
    cap = buffer_capacity(geom)
    nbr = lattice.neighbor_table(geom)
    out, loads = backend.kernels().stream_field(
        psi.sites,
        wilson.effective_links(u, params),
        nbr,
        params.kappa,
        geom.spatial_volume,
        cap,
    )
    return lattice.SpinorField(geom, out), loads


def stencil_kernel(center, neighbors, links, params, dagger=False):
    """One site of the stencil, stated explicitly for reuse and testing.

    center: (4, 3) spinor; neighbors: (8, 4, 3) in direction order
    (mu = k // 2, forward for even k); links: (8, 3, 3) with U_mu(x) at
    even k and U_mu(x - mu) at odd k.  Returns the (4, 3) result.
    """
    center = np.asarray(center)
    neighbors = np.asarray(neighbors)
    links = np.asarray(links)
    if center.shape != (4, 3) or neighbors.shape != (8, 4, 3) or links.shape != (
        8,
        3,
        3,
    ):
        raise DomainError("stencil_kernel shapes: (4,3), (8,4,3), (8,3,3)")
    return backend.kernels().site(
        center, neighbors, links, params.kappa, dagger
    )


@dataclass(frozen=True)
class PipelineSpec:
    """Pipeline shape for the cost model."""

    initiation_interval: int = 1
    latency: int = 142
    kernels: int = 1
    input_channels: int = 3
    output_channels: int = 1
    frequency_hz: float = 300e6

    def __post_init__(self):
        for name in ("initiation_interval", "latency", "kernels",
                     "input_channels", "output_channels"):
            v = getattr(self, name)
            if int(v) != v or int(v) < 1:
                raise DomainError(f"{name} must be a positive integer, got {v}")
            object.__setattr__(self, name, int(v))
        if not self.frequency_hz > 0:
            raise DomainError(f"frequency_hz must be > 0, got {self.frequency_hz}")
        object.__setattr__(self, "frequency_hz", float(self.frequency_hz))


@dataclass(frozen=True)
class TraceEvent:
    """Half-open-free cycle span [start_cycle, end_cycle] on one channel."""

    channel_id: str
    kind: str
    start_cycle: int
    end_cycle: int

    def __post_init__(self):
        if self.kind not in ("input", "compute", "output"):
            raise DomainError(f"unknown event kind {self.kind!r}")
        if self.start_cycle < 0 or self.end_cycle < self.start_cycle:
            raise DomainError(
                f"bad cycle span [{self.start_cycle}, {self.end_cycle}]"
            )


def simulate_trace(geom, spec):
    """Cycle-level event list for one streaming pass.

    `geom` may be a LatticeGeometry or a bare positive site count (the
    model only needs the volume).  Work is split evenly over
    `spec.kernels` lanes, n = ceil(V / kernels) sites each; a lane
    accepts one site per initiation_interval cycles and produces its
    first result after `latency` cycles.  Returns (events, total_cycles)
    with

        total_cycles = latency + initiation_interval * (n_max - 1).

    Input streams occupy one channel per input_channels; outputs leave on
    one merged channel after the fill latency.
    """
    if not isinstance(spec, PipelineSpec):
        raise DomainError("simulate_trace needs a PipelineSpec")
    vol = geom if isinstance(geom, int) else geom.volume
    if vol < 1:
        raise DomainError(f"volume must be >= 1, got {vol}")
    lanes = spec.kernels
    n_max = -(-vol // lanes)  # ceil
    ii = spec.initiation_interval
    total = spec.latency + ii * (n_max - 1)
    in_end = ii * (n_max - 1)
    events = []
    for ch in range(spec.input_channels):
        events.append(TraceEvent(f"HBM{ch}", "input", 0, in_end))
    left = vol
    for lane in range(lanes):
        n_here = min(n_max, left)
        left -= n_here
        if n_here <= 0:
            break
        events.append(
            TraceEvent(
                f"kernel{lane}",
                "compute",
                0,
                spec.latency + ii * (n_here - 1),
            )
        )
    events.append(
        TraceEvent(f"HBM{spec.input_channels}", "output", spec.latency, total)
    )
    return events, total


def model_throughput(flops_per_site, spec):
    """Modeled arithmetic rate in GFLOP/s for a pipeline at steady state.

    Each lane retires one site per initiation_interval cycles, so the
    model is flops_per_site * kernels * frequency / II, scaled to 1e9.
    """
    if flops_per_site <= 0:
        raise DomainError(f"flops_per_site must be > 0, got {flops_per_site}")
    if not isinstance(spec, PipelineSpec):
        raise DomainError("model_throughput needs a PipelineSpec")
    return (
        flops_per_site * spec.kernels * spec.frequency_hz
        / spec.initiation_interval / 1e9
    )


def flops_per_site():
    """Per-site cost of the operator (delegates to the exact counter)."""
    return wilson.count_flops(
        lattice.LatticeGeometry((4, 4, 4, 4))
    ).flops_per_site


__all__ = [
    "buffer_capacity",
    "stream_apply",
    "stencil_kernel",
    "PipelineSpec",
    "TraceEvent",
    "simulate_trace",
    "model_throughput",
    "flops_per_site",
]
