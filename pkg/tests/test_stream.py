"""Streaming pass equivalence, load accounting, and the pipeline model."""

import numpy as np
import pytest

from wilsoncg import backend, lattice, stream, wilson
from wilsoncg.errors import DomainError


def _bits(field):
    return field.sites.view(lattice.real_dtype(field.dtype))


# ------------------------------------------------- streaming equivalence

@pytest.mark.parametrize("dims", [(4, 4, 4, 4), (6, 4, 4, 4), (4, 4, 4, 6),
                                  (4, 6, 8, 4)])
@pytest.mark.parametrize("dtype", [lattice.HIGH, lattice.LOW])
def test_stream_matches_reference_bitwise(dims, dtype):
    """The cyclic-buffer sweep reproduces the plain sweep bit for bit."""
    geom = lattice.LatticeGeometry(dims)
    u = lattice.random_gauge_field(geom, 31).astype(dtype)
    psi = lattice.random_spinor_field(geom, 32, dtype)
    params = wilson.WilsonParams(0.15)
    ref = wilson.apply_wilson(u, psi, params)
    got, _loads = stream.stream_apply(u, psi, params)
    assert np.array_equal(_bits(got), _bits(ref))


def test_stream_matches_reference_antiperiodic():
    geom = lattice.LatticeGeometry((4, 4, 4, 4))
    u = lattice.random_gauge_field(geom, 33)
    psi = lattice.random_spinor_field(geom, 34)
    params = wilson.WilsonParams(0.12, antiperiodic_t=True)
    ref = wilson.apply_wilson(u, psi, params)
    got, _loads = stream.stream_apply(u, psi, params)
    assert np.array_equal(_bits(got), _bits(ref))


@pytest.mark.parametrize("dtype", [lattice.HIGH, lattice.LOW])
def test_backends_agree_bitwise(dtype):
    """Jit and plain-array kernels produce identical bits, both sweeps."""
    if len(backend.available()) < 2:
        pytest.skip("only one backend present")
    geom = lattice.LatticeGeometry((4, 4, 4, 4))
    u = lattice.random_gauge_field(geom, 35).astype(dtype)
    psi = lattice.random_spinor_field(geom, 36, dtype)
    nbr = lattice.neighbor_table(geom)
    cap = stream.buffer_capacity(geom)
    outs = {}
    for name in backend.available():
        kern = backend.kernels(name)
        for dagger in (False, True):
            outs[name, "apply", dagger] = kern.apply_field(
                psi.sites, u.links, nbr, 0.15, dagger
            )
        outs[name, "stream"] = kern.stream_field(
            psi.sites, u.links, nbr, 0.15, geom.spatial_volume, cap
        )[0]
    first, second = backend.available()
    for key in (("apply", False), ("apply", True), ("stream",)):
        a = outs[(first, *key)]
        b = outs[(second, *key)]
        assert np.array_equal(a.view(np.uint8), b.view(np.uint8)), key


# ------------------------------------------------------- load contract

@pytest.mark.parametrize("dims,cap", [
    ((4, 4, 4, 4), 171),
    ((6, 4, 4, 4), 255),
    ((4, 4, 4, 6), 171),
    ((4, 6, 8, 4), 443),  # asymmetric y/z: 2*192 + 2*24 + 2*4 + 3
    ((8, 8, 8, 8), 1171),
])
def test_buffer_capacity_formula(dims, cap):
    geom = lattice.LatticeGeometry(dims)
    lx, ly, lz, _ = dims
    assert stream.buffer_capacity(geom) == cap
    assert cap == 2 * lx * ly * lz + 2 * lx * ly + 2 * lx + 3


@pytest.mark.parametrize("dims", [(4, 4, 4, 4), (6, 4, 4, 4), (4, 4, 4, 6)])
def test_single_load_contract(dims):
    """Each sweep reads exactly volume + capacity sites from the field."""
    geom = lattice.LatticeGeometry(dims)
    u = lattice.random_gauge_field(geom, 37)
    psi = lattice.random_spinor_field(geom, 38)
    _out, loads = stream.stream_apply(u, psi, wilson.WilsonParams(0.1))
    assert loads == geom.volume + stream.buffer_capacity(geom)


def test_stream_refuses_small_dims():
    geom = lattice.LatticeGeometry((4, 4, 4, 2))
    u = lattice.GaugeField.identity(geom)
    psi = lattice.SpinorField.zeros(geom)
    with pytest.raises(DomainError):
        stream.stream_apply(u, psi, wilson.WilsonParams(0.1))


# ------------------------------------------------------- stencil kernel

def test_stencil_kernel_matches_sweep(u44):
    """Feeding one site's neighborhood reproduces that site's output."""
    geom = u44.geometry
    psi = lattice.random_spinor_field(geom, 39)
    params = wilson.WilsonParams(0.13)
    ref = wilson.apply_wilson(u44, psi, params)
    nbr = lattice.neighbor_table(geom)
    for site in (0, 5, geom.volume - 1):
        nbrs = psi.sites[nbr[site]]
        links = np.empty((8, 3, 3), dtype=u44.dtype)
        for k in range(8):
            mu = k // 2
            src = site if k % 2 == 0 else nbr[site, k]
            links[k] = u44.links[src, mu]
        got = stream.stencil_kernel(psi.sites[site], nbrs, links, params)
        assert np.array_equal(got, ref.sites[site])


def test_stencil_kernel_shape_checks(u44):
    params = wilson.WilsonParams(0.1)
    with pytest.raises(DomainError):
        stream.stencil_kernel(np.zeros((4, 3), dtype=np.complex128),
                              np.zeros((7, 4, 3), dtype=np.complex128),
                              np.zeros((8, 3, 3), dtype=np.complex128), params)
    with pytest.raises(DomainError):
        stream.stencil_kernel(np.zeros((4, 3), dtype=np.complex128),
                              np.zeros((8, 4, 3), dtype=np.complex128),
                              np.zeros((8, 3), dtype=np.complex128), params)


# ------------------------------------------------------- pipeline model

def test_pipeline_spec_defaults_and_validation():
    spec = stream.PipelineSpec()
    assert spec.initiation_interval == 1
    assert spec.latency == 142
    assert spec.kernels == 1
    assert spec.input_channels == 3
    assert spec.output_channels == 1
    assert spec.frequency_hz == 300e6
    with pytest.raises(DomainError):
        stream.PipelineSpec(initiation_interval=0)
    with pytest.raises(DomainError):
        stream.PipelineSpec(latency=-1)
    with pytest.raises(DomainError):
        stream.PipelineSpec(kernels=0)
    with pytest.raises(DomainError):
        stream.PipelineSpec(frequency_hz=0)


@pytest.mark.parametrize("volume", [1, 16, 256, 4096])
def test_trace_total_cycles_single_lane(volume):
    """One lane at II = 1: fill latency plus one site per later cycle."""
    spec = stream.PipelineSpec()
    events, total = stream.simulate_trace(volume, spec)
    assert total == 142 + (volume - 1)
    out = [e for e in events if e.kind == "output"]
    assert len(out) == 1
    assert out[0].start_cycle == 142
    assert out[0].end_cycle == total


def test_trace_event_structure(geom44):
    spec = stream.PipelineSpec(kernels=3, initiation_interval=2)
    events, total = stream.simulate_trace(geom44, spec)
    kinds = {}
    for ev in events:
        kinds.setdefault(ev.kind, []).append(ev)
    assert len(kinds["input"]) == spec.input_channels
    assert len(kinds["compute"]) == 3
    assert len(kinds["output"]) == 1
    n_max = -(-geom44.volume // 3)
    assert total == spec.latency + 2 * (n_max - 1)
    compute_end = max(e.end_cycle for e in kinds["compute"])
    for ev in kinds["input"]:
        assert ev.start_cycle == 0
        assert ev.end_cycle <= compute_end
    assert kinds["output"][0].start_cycle == spec.latency
    # uneven split: last lane gets the remainder and finishes first
    n_last = geom44.volume - 2 * n_max
    assert kinds["compute"][-1].end_cycle == spec.latency + 2 * (n_last - 1)


def test_trace_no_intra_channel_overlap(geom44):
    spec = stream.PipelineSpec(kernels=3, initiation_interval=2)
    events, _total = stream.simulate_trace(geom44, spec)
    by_channel = {}
    for ev in events:
        by_channel.setdefault(ev.channel_id, []).append(ev)
    for channel, evs in by_channel.items():
        evs.sort(key=lambda e: e.start_cycle)
        for prev, cur in zip(evs, evs[1:]):
            assert cur.start_cycle >= prev.end_cycle, channel


def test_trace_cost_monotonicity():
    """total_cycles falls with kernels, rises with ii and volume."""
    volumes = (64, 256, 1024)
    iis = (1, 2, 3)
    lanes = (1, 2, 4)
    def total(v, ii, k):
        spec = stream.PipelineSpec(initiation_interval=ii, kernels=k)
        return stream.simulate_trace(v, spec)[1]
    for v in volumes:
        for ii in iis:
            ts = [total(v, ii, k) for k in lanes]
            assert ts == sorted(ts, reverse=True), (v, ii, ts)
        for k in lanes:
            ts = [total(v, ii, k) for ii in iis]
            assert ts == sorted(ts), (v, k, ts)
    for ii in iis:
        for k in lanes:
            ts = [total(v, ii, k) for v in volumes]
            assert ts == sorted(ts), (ii, k, ts)


def test_trace_validation(geom44):
    with pytest.raises(DomainError):
        stream.simulate_trace(0, stream.PipelineSpec())
    with pytest.raises(DomainError):
        stream.simulate_trace(geom44, "not a spec")


def test_trace_event_validation():
    with pytest.raises(DomainError):
        stream.TraceEvent("ch", "compute", 5, 4)
    with pytest.raises(DomainError):
        stream.TraceEvent("ch", "sleep", 0, 1)


def test_model_throughput():
    """Per-lane retire rate times lanes, scaled to GFLOP/s."""
    spec = stream.PipelineSpec(kernels=3, initiation_interval=2,
                               frequency_hz=300e6)
    got = stream.model_throughput(1368, spec)
    assert got == pytest.approx(615.6)
    one = stream.model_throughput(1368, stream.PipelineSpec())
    assert one == pytest.approx(410.4)
    with pytest.raises(DomainError):
        stream.model_throughput(0, spec)
    with pytest.raises(DomainError):
        stream.model_throughput(1368, 7)


def test_flops_per_site_helper():
    assert stream.flops_per_site() == 1368
