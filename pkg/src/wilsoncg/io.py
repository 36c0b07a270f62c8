"""Config text, binary field files, gauge generation, and trace output.

Field files are little-endian: 4-byte magic ``WQCD``, then seven u32
words (version, four dimensions, precision tag, payload kind), then the
raw payload as (re, im) pairs.  Gauge payloads store each site's four
links row-major; spinor payloads store four spin rows of three colors.
Precision tags: 0 = double, 1 = single.  Payload kinds: 0 = gauge,
1 = spinor.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import lattice
from .errors import (
    BadMagicError,
    ConfigError,
    HeaderMismatchError,
    TruncatedPayloadError,
)
from .solver import SolverConfig
from .stream import PipelineSpec

MAGIC = b"WQCD"
VERSION = 1
_KIND_GAUGE = 0
_KIND_SPINOR = 1
_PRECISION_TAG = {lattice.HIGH: 0, lattice.LOW: 1}
_TAG_PRECISION = {0: lattice.HIGH, 1: lattice.LOW}
_HEADER = struct.Struct("<4sIIIIIII")


# ---------------------------------------------------------------- config

_BOOL_WORDS = {
    "true": True, "yes": True, "on": True, "1": True,
    "false": False, "no": False, "off": False, "0": False,
}

_KNOWN_KEYS = (
    "lattice", "kappa", "antiperiodic_t",
    "tol_outer", "tol_inner", "max_outer", "max_inner",
    "gauge", "source", "output", "seed",
    "ii", "latency", "kernels", "channels", "freq_mhz",
    "precision_low",
)


@dataclass(frozen=True)
class RunConfig:
    """Everything a command run needs, straight from config text."""

    dims: tuple
    kappa: float
    solver: SolverConfig = SolverConfig()
    pipeline: PipelineSpec = PipelineSpec()
    gauge: str = ""
    source: str = ""
    output: str = ""
    seed: int = 1
    precision_low: str = "single"
    antiperiodic_t: bool = False

    @property
    def geometry(self):
        return lattice.LatticeGeometry(self.dims)

    @property
    def low_dtype(self):
        return lattice.precision_dtype(self.precision_low)


def _parse_bool(text, lineno, key):
    try:
        return _BOOL_WORDS[text.strip().lower()]
    except KeyError:
        raise ConfigError(f"not a boolean: {text!r}", lineno, key) from None


def _parse_int(text, lineno, key, minimum=None):
    try:
        v = int(text.strip())
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}", lineno, key) from None
    if minimum is not None and v < minimum:
        raise ConfigError(f"must be >= {minimum}, got {v}", lineno, key)
    return v


def _parse_float(text, lineno, key):
    try:
        return float(text.strip())
    except ValueError:
        raise ConfigError(f"not a number: {text!r}", lineno, key) from None


def parse_config(text):
    """Parse ``key = value`` config text into a RunConfig.

    Unknown keys, duplicate keys, and out-of-range values are errors that
    name the offending line and key.  ``#`` starts a comment anywhere.
    """
    raw = {}
    lines = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected key = value, got {line.strip()!r}",
                              lineno)
        key, _, value = body.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError("unknown key", lineno, key)
        if key in raw:
            raise ConfigError(f"duplicate key (first on line {lines[key]})",
                              lineno, key)
        raw[key] = value
        lines[key] = lineno

    for req in ("lattice", "kappa"):
        if req not in raw:
            raise ConfigError("required key missing", key=req)

    ln = lines.get("lattice")
    parts = raw["lattice"].split()
    if len(parts) != 4:
        raise ConfigError(
            f"lattice needs 4 extents, got {len(parts)}", ln, "lattice"
        )
    dims = tuple(_parse_int(p, ln, "lattice", minimum=2) for p in parts)

    kappa = _parse_float(raw["kappa"], lines.get("kappa"), "kappa")
    if not 0.0 < kappa < 0.25:
        raise ConfigError(f"kappa must be in (0, 0.25), got {kappa}",
                          lines.get("kappa"), "kappa")

    def opt(key, fn, default, **kw):
        if key not in raw:
            return default
        return fn(raw[key], lines[key], key, **kw)

    tol_outer = opt("tol_outer", _parse_float, 1e-10)
    tol_inner = opt("tol_inner", _parse_float, 0.1)
    for key, value in (("tol_outer", tol_outer), ("tol_inner", tol_inner)):
        if not 0 < value < 1:
            raise ConfigError(f"must be in (0, 1), got {value}",
                              lines.get(key), key)
    max_outer = opt("max_outer", _parse_int, 50, minimum=1)
    max_inner = opt("max_inner", _parse_int, None, minimum=1)

    ii = opt("ii", _parse_int, 1, minimum=1)
    latency = opt("latency", _parse_int, 142, minimum=1)
    kernels = opt("kernels", _parse_int, 1, minimum=1)
    channels = opt("channels", _parse_int, 3, minimum=1)
    freq_mhz = opt("freq_mhz", _parse_float, 300.0)
    if not freq_mhz > 0:
        raise ConfigError(f"must be > 0, got {freq_mhz}",
                          lines.get("freq_mhz"), "freq_mhz")

    precision_low = "single"
    if "precision_low" in raw:
        ln = lines["precision_low"]
        try:
            dt = lattice.precision_dtype(raw["precision_low"])
        except Exception:
            raise ConfigError(f"unknown precision {raw['precision_low']!r}",
                              ln, "precision_low") from None
        precision_low = lattice.precision_name(dt)

    return RunConfig(
        dims=dims,
        kappa=kappa,
        solver=SolverConfig(tol_outer=tol_outer, tol_inner=tol_inner,
                            max_outer=max_outer, max_inner=max_inner),
        pipeline=PipelineSpec(initiation_interval=ii, latency=latency,
                              kernels=kernels, input_channels=channels,
                              frequency_hz=freq_mhz * 1e6),
        gauge=raw.get("gauge", ""),
        source=raw.get("source", ""),
        output=raw.get("output", ""),
        seed=opt("seed", _parse_int, 1, minimum=0),
        precision_low=precision_low,
        antiperiodic_t=opt("antiperiodic_t", _parse_bool, False),
    )


def render_config(cfg):
    """Canonical config text; parse(render(cfg)) reproduces cfg exactly."""
    out = [
        "lattice = {} {} {} {}".format(*cfg.dims),
        f"kappa = {cfg.kappa!r}",
        f"antiperiodic_t = {'true' if cfg.antiperiodic_t else 'false'}",
        f"tol_outer = {cfg.solver.tol_outer!r}",
        f"tol_inner = {cfg.solver.tol_inner!r}",
        f"max_outer = {cfg.solver.max_outer}",
    ]
    if cfg.solver.max_inner is not None:
        out.append(f"max_inner = {cfg.solver.max_inner}")
    out += [
        f"ii = {cfg.pipeline.initiation_interval}",
        f"latency = {cfg.pipeline.latency}",
        f"kernels = {cfg.pipeline.kernels}",
        f"channels = {cfg.pipeline.input_channels}",
        f"freq_mhz = {cfg.pipeline.frequency_hz / 1e6!r}",
        f"seed = {cfg.seed}",
        f"precision_low = {cfg.precision_low}",
    ]
    for key, val in (("gauge", cfg.gauge), ("source", cfg.source),
                     ("output", cfg.output)):
        if val:
            out.append(f"{key} = {val}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------- binary fields

def _write_field(path, dims, dtype, kind, payload):
    header = _HEADER.pack(MAGIC, VERSION, *dims, _PRECISION_TAG[dtype], kind)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def _read_field(path, kind_wanted, per_site):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size or blob[:4] != MAGIC:
        raise BadMagicError(
            f"{path}: not a field file (magic {blob[:4]!r})"
        )
    magic, version, lx, ly, lz, lt, tag, kind = _HEADER.unpack_from(blob)
    if version != VERSION:
        raise HeaderMismatchError(f"{path}: unsupported version {version}")
    if tag not in _TAG_PRECISION:
        raise HeaderMismatchError(f"{path}: unknown precision tag {tag}")
    if kind != kind_wanted:
        names = {_KIND_GAUGE: "gauge", _KIND_SPINOR: "spinor"}
        raise HeaderMismatchError(
            f"{path}: payload is {names.get(kind, kind)}, "
            f"expected {names[kind_wanted]}"
        )
    try:
        geom = lattice.LatticeGeometry((lx, ly, lz, lt))
    except Exception as exc:
        raise HeaderMismatchError(f"{path}: bad dimensions: {exc}") from None
    dtype = _TAG_PRECISION[tag]
    expected = geom.volume * per_site * np.dtype(dtype).itemsize
    actual = len(blob) - _HEADER.size
    if actual != expected:
        raise TruncatedPayloadError(expected, actual)
    le = "<c16" if dtype == lattice.HIGH else "<c8"
    data = np.frombuffer(blob, dtype=le, offset=_HEADER.size).astype(dtype)
    return geom, dtype, data


def write_gauge(path, field):
    """Write a gauge field; links go out per site, mu-major, row-major."""
    le = "<c16" if field.dtype == lattice.HIGH else "<c8"
    _write_field(path, field.geometry.dims, field.dtype, _KIND_GAUGE,
                 np.ascontiguousarray(field.links, dtype=le))


def read_gauge(path):
    geom, dtype, data = _read_field(path, _KIND_GAUGE, 4 * 9)
    return lattice.GaugeField(geom, data.reshape(geom.volume, 4, 3, 3))


def write_spinor(path, field):
    """Write a spinor field; sites go out spin-major, color within spin."""
    le = "<c16" if field.dtype == lattice.HIGH else "<c8"
    _write_field(path, field.geometry.dims, field.dtype, _KIND_SPINOR,
                 np.ascontiguousarray(field.sites, dtype=le))


def read_spinor(path):
    geom, dtype, data = _read_field(path, _KIND_SPINOR, 12)
    return lattice.SpinorField(geom, data.reshape(geom.volume, 4, 3))


def generate_gauge(dims, seed, dtype=lattice.HIGH):
    """Deterministic pseudo-random gauge field for the given seed."""
    geom = lattice.LatticeGeometry(tuple(dims))
    return lattice.random_gauge_field(geom, seed, dtype)


# ----------------------------------------------------------------- trace

def write_trace(path, events, total_cycles, spec):
    """CSV-ish trace: a key=value header line, then one row per event.

    Rows are ``channel_id,kind,start_cycle,end_cycle`` sorted by channel
    then start cycle, so plotting tools can consume the file directly.
    """
    head = ",".join(
        [
            f"total_cycles={int(total_cycles)}",
            f"ii={spec.initiation_interval}",
            f"latency={spec.latency}",
            f"kernels={spec.kernels}",
            f"input_channels={spec.input_channels}",
            f"output_channels={spec.output_channels}",
            f"frequency_hz={spec.frequency_hz!r}",
        ]
    )
    rows = sorted(events, key=lambda e: (e.channel_id, e.start_cycle))
    with open(path, "w") as fh:
        fh.write(head + "\n")
        for ev in rows:
            fh.write(f"{ev.channel_id},{ev.kind},{ev.start_cycle},"
                     f"{ev.end_cycle}\n")
