"""The embedding network: 28x28 input -> conv(20 maps) -> 2x2 pool ->
conv(50 maps) -> 2x2 pool -> fully-connected 500 + ReLU -> linear output of
dimension d. Whole-network forward/backward plus a binary checkpoint format.

Shape chain: 1x28x28 -> 20x24x24 -> 20x12x12 -> 50x8x8 -> 50x4x4 -> 500 -> d.
"""

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from . import layers

KERNEL = 5
POOL = 2

CONV = "conv"
MAXPOOL = "maxpool"
FC = "fullyconnected"
RELU = "relu"

CHECKPOINT_MAGIC = b"TRISIMCK"
CHECKPOINT_VERSION = 1

_KIND_CODES = {CONV: 0, MAXPOOL: 1, FC: 2, RELU: 3}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


class CheckpointError(ValueError):
    """Checkpoint file is not parseable as a network."""


@dataclass
class LayerSpec:
    kind: str
    in_maps: int = 0
    out_maps: int = 0
    kernel: int = 0
    pool: int = 0
    in_size: int = 0
    out_size: int = 0


def conv_spec(in_maps, out_maps):
    return LayerSpec(CONV, in_maps=in_maps, out_maps=out_maps, kernel=KERNEL)


def pool_spec():
    return LayerSpec(MAXPOOL, pool=POOL)


def fc_spec(in_size, out_size):
    return LayerSpec(FC, in_size=in_size, out_size=out_size)


def relu_spec():
    return LayerSpec(RELU)


@dataclass
class NetworkState:
    """Layer specs plus one shared parameter store (weights, biases, momenta).

    Both siamese branches read the same ``weights`` lists; there is never a
    second copy to drift out of sync.
    """

    specs: list
    weights: list          # per layer: {'w': ..., 'b': ...} or None
    momenta: list          # same structure as weights, zeros at build time
    out_dim: int
    seed: int
    input_hw: int
    dtype: np.dtype = field(default=np.dtype(np.float64))

    def named_params(self):
        for i, p in enumerate(self.weights):
            if p is not None:
                yield i, "w", p["w"]
                yield i, "b", p["b"]


def _init_params(specs, seed, dtype):
    """Fan-in scaled uniform weights, zero biases, zero momentum buffers."""
    rng = np.random.default_rng(seed)
    weights = []
    momenta = []
    for spec in specs:
        if spec.kind == CONV:
            fan_in = spec.in_maps * spec.kernel * spec.kernel
            limit = np.sqrt(3.0 / fan_in)
            w = rng.uniform(-limit, limit,
                            (spec.out_maps, spec.in_maps, spec.kernel, spec.kernel))
            b = np.zeros(spec.out_maps)
        elif spec.kind == FC:
            limit = np.sqrt(3.0 / spec.in_size)
            w = rng.uniform(-limit, limit, (spec.out_size, spec.in_size))
            b = np.zeros(spec.out_size)
        else:
            weights.append(None)
            momenta.append(None)
            continue
        weights.append({"w": w.astype(dtype), "b": b.astype(dtype)})
        momenta.append({"w": np.zeros_like(w, dtype=dtype),
                        "b": np.zeros_like(b, dtype=dtype)})
    return weights, momenta


def _standard_specs(d, input_hw=28, conv1_maps=20, conv2_maps=50, hidden=500):
    after_conv1 = input_hw - KERNEL + 1
    after_pool1 = after_conv1 // POOL
    after_conv2 = after_pool1 - KERNEL + 1
    after_pool2 = after_conv2 // POOL
    if after_conv1 < 1 or after_conv2 < 1 or after_conv1 % POOL or after_conv2 % POOL:
        raise ValueError(f"input extent {input_hw} does not fit the layer chain")
    flat = conv2_maps * after_pool2 * after_pool2
    return [
        conv_spec(1, conv1_maps),
        pool_spec(),
        conv_spec(conv1_maps, conv2_maps),
        pool_spec(),
        fc_spec(flat, hidden),
        relu_spec(),
        fc_spec(hidden, d),
    ]


def build_network(d, seed=0, dtype=np.float64) -> NetworkState:
    """The full-size network with output dimension ``d``."""
    if d < 1:
        raise ValueError("output dimension must be >= 1")
    specs = _standard_specs(d)
    weights, momenta = _init_params(specs, seed, np.dtype(dtype))
    return NetworkState(specs, weights, momenta, d, seed, 28, np.dtype(dtype))


def build_gradcheck_network(d=2, seed=0) -> NetworkState:
    """Shrunken variant for whole-network finite-difference checks.

    Same layer kinds and kernel/pool extents as the full network, tiny map
    counts (2/3), hidden size 7, 16x16 input; 64-bit because the
    finite-difference tolerances are unreachable in 32-bit.
    """
    specs = _standard_specs(d, input_hw=16, conv1_maps=2, conv2_maps=3, hidden=7)
    weights, momenta = _init_params(specs, seed, np.dtype(np.float64))
    return NetworkState(specs, weights, momenta, d, seed, 16, np.dtype(np.float64))


def _as_batch(net, images):
    x = np.asarray(images)
    hw = net.input_hw
    if x.ndim == 2 and x.shape == (hw, hw):
        x = x[None, None]
    elif x.ndim == 3 and x.shape[1:] == (hw, hw):
        x = x[:, None]
    elif x.ndim == 3 and x.shape == (1, hw, hw):
        x = x[None]
    elif x.ndim != 4 or x.shape[1:] != (1, hw, hw):
        raise ValueError(f"expected {hw}x{hw} image(s), got shape {x.shape}")
    return np.ascontiguousarray(x, dtype=net.dtype)


def forward_batch(net, images, need_trace=True):
    """Run a batch of images through the network.

    Returns (embeddings, trace); the trace holds the per-layer caches that
    :func:`backward_batch` consumes, or None when ``need_trace`` is false
    (inference-only, keeps memory flat).
    """
    x = _as_batch(net, images)
    trace = [] if need_trace else None
    for i, spec in enumerate(net.specs):
        if spec.kind == CONV:
            p = net.weights[i]
            x, cache = layers.conv_forward(x, p["w"], p["b"])
        elif spec.kind == MAXPOOL:
            x, cache = layers.maxpool_forward(x)
        elif spec.kind == FC:
            if x.ndim > 2:
                if need_trace:
                    trace.append(("flatten", x.shape))
                x = x.reshape(x.shape[0], -1)
            p = net.weights[i]
            x, cache = layers.fc_forward(x, p["w"], p["b"])
        elif spec.kind == RELU:
            x, cache = layers.relu_forward(x)
        else:
            raise ValueError(f"unknown layer kind {spec.kind}")
        if need_trace:
            trace.append((spec.kind, i, cache))
    return x, trace


def backward_batch(net, trace, output_grad):
    """Backpropagate ``output_grad`` (one row per sample) through the trace.

    Returns per-layer parameter gradients in the same structure as
    ``net.weights``. Gradients are plain sums over the batch; any averaging
    is the caller's job (scale ``output_grad`` beforehand).
    """
    if trace is None:
        raise ValueError("forward was run without a trace")
    g = np.asarray(output_grad, dtype=net.dtype)
    if g.ndim != 2:
        raise ValueError("output_grad must be (batch, d)")
    grads = [None if p is None else {} for p in net.weights]
    for entry in reversed(trace):
        if entry[0] == "flatten":
            g = g.reshape(entry[1])
            continue
        kind, i, cache = entry
        if kind == CONV:
            # the first layer's input gradient has no consumer
            g, gw, gb = layers.conv_backward(cache, g,
                                             need_input_grad=(i != 0))
            grads[i] = {"w": gw, "b": gb}
        elif kind == MAXPOOL:
            g = layers.maxpool_backward(cache, g)
        elif kind == FC:
            g, gw, gb = layers.fc_backward(cache, g)
            grads[i] = {"w": gw, "b": gb}
        elif kind == RELU:
            g = layers.relu_backward(cache, g)
    return grads


def forward(net, image):
    """Embed a single image; returns (embedding, trace) for backward."""
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[None]
    if image.ndim != 3 or image.shape[0] != 1:
        raise ValueError("forward takes exactly one image; use forward_batch")
    emb, trace = forward_batch(net, image)
    return emb[0], trace


def backward(net, trace, output_grad):
    """Parameter gradients for a single-sample trace."""
    g = np.asarray(output_grad)
    if g.ndim != 1 or g.shape[0] != net.out_dim:
        raise ValueError(f"output_grad must be a {net.out_dim}-vector")
    return backward_batch(net, trace, g[None])


def embed_dataset(net, images, batch=256):
    """Embeddings for many images, batched, no traces kept."""
    images = np.asarray(images)
    out = np.empty((images.shape[0], net.out_dim), dtype=net.dtype)
    for lo in range(0, images.shape[0], batch):
        hi = min(lo + batch, images.shape[0])
        emb, _ = forward_batch(net, images[lo:hi], need_trace=False)
        out[lo:hi] = emb
    return out


def flat_params(net):
    """All parameters concatenated into one float64 vector (oracle plumbing)."""
    return np.concatenate([p.ravel().astype(np.float64)
                           for _, _, p in net.named_params()])


def set_flat_params(net, vec):
    """Write a flat vector back into the parameter store."""
    vec = np.asarray(vec)
    pos = 0
    for i, name, p in net.named_params():
        n = p.size
        net.weights[i][name] = vec[pos:pos + n].reshape(p.shape).astype(net.dtype)
        pos += n
    if pos != vec.size:
        raise ValueError(f"expected {pos} parameters, got {vec.size}")


def flat_grads(net, grads):
    """Flatten a gradient structure in the same order as :func:`flat_params`."""
    parts = []
    for i, name, p in net.named_params():
        parts.append(np.asarray(grads[i][name]).ravel().astype(np.float64))
    return np.concatenate(parts)


def _spec_record(spec):
    code = _KIND_CODES[spec.kind]
    if spec.kind == CONV:
        return struct.pack("<BIII", code, spec.in_maps, spec.out_maps, spec.kernel)
    if spec.kind == MAXPOOL:
        return struct.pack("<BI", code, spec.pool)
    if spec.kind == FC:
        return struct.pack("<BII", code, spec.in_size, spec.out_size)
    return struct.pack("<B", code)


def save_params(net, path):
    """Write the checkpoint: magic, version, d, seed, input extent, layer list
    with shapes, then little-endian float32 parameter payloads in layer order
    (weights before bias). Momentum buffers are not persisted.
    """
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<IIqI", CHECKPOINT_VERSION, net.out_dim,
                          net.seed, net.input_hw))
    buf.write(struct.pack("<I", len(net.specs)))
    for spec in net.specs:
        buf.write(_spec_record(spec))
    for p in net.weights:
        if p is not None:
            buf.write(np.ascontiguousarray(p["w"], dtype="<f4").tobytes())
            buf.write(np.ascontiguousarray(p["b"], dtype="<f4").tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def _read_exact(f, n, what):
    data = f.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def load_params(path) -> NetworkState:
    """Read a checkpoint written by :func:`save_params`.

    The returned network carries float32 parameters (the payload precision)
    and freshly zeroed momentum buffers.
    """
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"bad magic {magic!r}: not a checkpoint file")
        version, d, seed, input_hw = struct.unpack(
            "<IIqI", _read_exact(f, 20, "header"))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (n_layers,) = struct.unpack("<I", _read_exact(f, 4, "layer count"))
        specs = []
        for li in range(n_layers):
            (code,) = struct.unpack("<B", _read_exact(f, 1, f"layer {li} kind"))
            kind = _CODE_KINDS.get(code)
            if kind is None:
                raise CheckpointError(f"unknown layer kind code {code}")
            if kind == CONV:
                im, om, k = struct.unpack("<III", _read_exact(f, 12, "conv spec"))
                specs.append(LayerSpec(CONV, in_maps=im, out_maps=om, kernel=k))
            elif kind == MAXPOOL:
                (pool,) = struct.unpack("<I", _read_exact(f, 4, "pool spec"))
                specs.append(LayerSpec(MAXPOOL, pool=pool))
            elif kind == FC:
                si, so = struct.unpack("<II", _read_exact(f, 8, "fc spec"))
                specs.append(LayerSpec(FC, in_size=si, out_size=so))
            else:
                specs.append(LayerSpec(RELU))
        weights = []
        momenta = []
        for spec in specs:
            if spec.kind == CONV:
                wshape = (spec.out_maps, spec.in_maps, spec.kernel, spec.kernel)
                bshape = (spec.out_maps,)
            elif spec.kind == FC:
                wshape = (spec.out_size, spec.in_size)
                bshape = (spec.out_size,)
            else:
                weights.append(None)
                momenta.append(None)
                continue
            nw = int(np.prod(wshape))
            nb = bshape[0]
            w = np.frombuffer(_read_exact(f, 4 * nw, "weights"), dtype="<f4")
            b = np.frombuffer(_read_exact(f, 4 * nb, "bias"), dtype="<f4")
            weights.append({"w": w.reshape(wshape).astype(np.float32),
                            "b": b.astype(np.float32)})
            momenta.append({"w": np.zeros(wshape, dtype=np.float32),
                            "b": np.zeros(bshape, dtype=np.float32)})
        if f.read(1):
            raise CheckpointError("trailing bytes after parameter payload")
    net = NetworkState(specs, weights, momenta, d, seed, input_hw,
                       np.dtype(np.float32))
    _validate_chain(net)
    return net


def _validate_chain(net):
    """Recompute the shape chain and fail loudly if the specs are inconsistent."""
    maps, hw = 1, net.input_hw
    flat = None
    for spec in net.specs:
        if spec.kind == CONV:
            if spec.in_maps != maps:
                raise CheckpointError(f"conv expects {spec.in_maps} maps, chain has {maps}")
            hw = hw - spec.kernel + 1
            maps = spec.out_maps
            if hw < 1:
                raise CheckpointError("conv shrinks spatial extent below 1")
        elif spec.kind == MAXPOOL:
            if hw % spec.pool:
                raise CheckpointError(f"pool on odd extent {hw}")
            hw //= spec.pool
        elif spec.kind == FC:
            expect = flat if flat is not None else maps * hw * hw
            if spec.in_size != expect:
                raise CheckpointError(f"fc expects {spec.in_size} inputs, chain has {expect}")
            flat = spec.out_size
    if flat != net.out_dim:
        raise CheckpointError(f"final layer size {flat} != recorded dimension {net.out_dim}")
