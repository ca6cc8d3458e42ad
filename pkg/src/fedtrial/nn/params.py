"""Architecture descriptors, flat parameter vectors and their binary format.

Canonical layouts (row-major, float64):

FCN ``input_dim -> hidden_dims[0] -> ... -> hidden_dims[-1] -> 1``
    for each layer in order: weight matrix ``(fan_in, fan_out)`` then bias ``(fan_out,)``.

GRU ``input_dim`` tokens, embedding ``E``, hidden size ``H``
    embedding ``(input_dim, E)``;
    input weights ``(E, 3H)``; recurrent weights ``(H, 3H)``; gate biases ``(3H,)``;
    readout weight ``(H, 1)``; readout bias ``(1,)``.
    The ``3H`` axis holds the gates in the order update, reset, candidate.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError

FCN = "FCN"
GRU = "GRU"

MAGIC = b"FTPARAM\x00"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ArchitectureSpec:
    kind: str
    input_dim: int
    hidden_dims: tuple[int, ...] = (64,)
    embedding_dim: int = 32
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        self.validate()

    def validate(self):
        if self.kind not in (FCN, GRU):
            raise ConfigError(f"unknown architecture kind {self.kind!r}")
        if int(self.input_dim) < 1:
            raise ConfigError(f"input_dim must be positive, got {self.input_dim}")
        if not self.hidden_dims or any(h < 1 for h in self.hidden_dims):
            raise ConfigError(f"hidden_dims must be non-empty positive sizes, got {self.hidden_dims}")
        if self.kind == GRU:
            if len(self.hidden_dims) != 1:
                raise ConfigError("GRU takes exactly one hidden size")
            if self.embedding_dim < 1:
                raise ConfigError(f"embedding_dim must be >= 1, got {self.embedding_dim}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def hidden_size(self) -> int:
        return self.hidden_dims[0]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureSpec":
        return cls(
            kind=d["kind"],
            input_dim=int(d["input_dim"]),
            hidden_dims=tuple(d["hidden_dims"]),
            embedding_dim=int(d.get("embedding_dim", 32)),
            seed=int(d.get("seed", 0)),
        )


def parameter_shapes(spec: ArchitectureSpec) -> list[tuple[str, tuple[int, ...]]]:
    """Named blocks of the canonical layout, in storage order."""
    if spec.kind == FCN:
        dims = [spec.input_dim, *spec.hidden_dims, 1]
        shapes = []
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            shapes.append((f"W{i}", (a, b)))
            shapes.append((f"b{i}", (b,)))
        return shapes
    h, e = spec.hidden_size, spec.embedding_dim
    return [
        ("embedding", (spec.input_dim, e)),
        ("W", (e, 3 * h)),
        ("U", (h, 3 * h)),
        ("b", (3 * h,)),
        ("w_out", (h, 1)),
        ("b_out", (1,)),
    ]


def parameter_count(spec: ArchitectureSpec) -> int:
    return sum(int(np.prod(shape)) for _, shape in parameter_shapes(spec))


def unpack(spec: ArchitectureSpec, values: np.ndarray) -> dict[str, np.ndarray]:
    """Views (not copies) of each block of ``values``."""
    out = {}
    offset = 0
    for name, shape in parameter_shapes(spec):
        n = int(np.prod(shape))
        out[name] = values[offset:offset + n].reshape(shape)
        offset += n
    return out


@dataclass
class ModelParameters:
    spec: ArchitectureSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        expected = parameter_count(self.spec)
        if self.values.shape != (expected,):
            raise ConfigError(f"expected {expected} parameters for {self.spec.kind}, got shape {self.values.shape}")

    def copy(self) -> "ModelParameters":
        return ModelParameters(self.spec, self.values.copy())

    def blocks(self) -> dict[str, np.ndarray]:
        return unpack(self.spec, self.values)

    def to_bytes(self) -> bytes:
        return params_to_bytes(self)

    def save(self, path):
        Path(path).write_bytes(params_to_bytes(self))

    @classmethod
    def load(cls, path) -> "ModelParameters":
        return params_from_bytes(Path(path).read_bytes())


def init_parameters(spec: ArchitectureSpec) -> ModelParameters:
    """Scaled-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.

    GRU gate blocks are initialized per gate, each with its own fan-out ``H``.
    Draws happen in layout order from a generator seeded with ``spec.seed``.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    values = np.zeros(parameter_count(spec))
    blocks = unpack(spec, values)
    if spec.kind == FCN:
        for name, block in blocks.items():
            if name.startswith("W"):
                fan_in, fan_out = block.shape
                block[...] = _uniform(rng, fan_in, fan_out, block.shape)
    else:
        h = spec.hidden_size
        emb = blocks["embedding"]
        emb[...] = _uniform(rng, *emb.shape, emb.shape)
        for name in ("W", "U"):
            block = blocks[name]
            fan_in = block.shape[0]
            for g in range(3):
                block[:, g * h:(g + 1) * h] = _uniform(rng, fan_in, h, (fan_in, h))
        blocks["w_out"][...] = _uniform(rng, h, 1, (h, 1))
    return ModelParameters(spec, values)


def _uniform(rng, fan_in, fan_out, shape):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def params_to_bytes(params: ModelParameters) -> bytes:
    """Serialize as ``MAGIC | u32 version | u32 len | spec JSON | u64 n | n x <f8``."""
    header = json.dumps(params.spec.to_dict(), sort_keys=True).encode("utf-8")
    values = np.ascontiguousarray(params.values, dtype="<f8")
    return b"".join([
        MAGIC,
        struct.pack("<II", FORMAT_VERSION, len(header)),
        header,
        struct.pack("<Q", values.size),
        values.tobytes(),
    ])


def params_from_bytes(blob: bytes) -> ModelParameters:
    if blob[:len(MAGIC)] != MAGIC:
        raise ConfigError("not a parameter file (bad magic)")
    pos = len(MAGIC)
    version, hlen = struct.unpack_from("<II", blob, pos)
    if version != FORMAT_VERSION:
        raise ConfigError(f"unsupported parameter format version {version}")
    pos += 8
    spec = ArchitectureSpec.from_dict(json.loads(blob[pos:pos + hlen].decode("utf-8")))
    pos += hlen
    (n,) = struct.unpack_from("<Q", blob, pos)
    pos += 8
    values = np.frombuffer(blob, dtype="<f8", count=n, offset=pos).astype(np.float64)
    return ModelParameters(spec, values)
