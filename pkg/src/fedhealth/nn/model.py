"""Architecture description, parameter snapshots and the forward/backward engine."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping

import numpy as np

from ..exceptions import ConfigurationError, InvalidInputError, StateError
from . import layers as L

CONV = "conv1d"
POOL = "maxpool1d"
FC = "fully_connected"
ALIGN = "alignment"
LAYER_KINDS = (CONV, POOL, FC, ALIGN)
PARAMETRIC = (CONV, FC, ALIGN)


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the network.

    ``in_size``/``out_size`` are channel counts for convolutions and feature
    dimensions for dense layers. ``kernel_size`` doubles as the pooling window.
    """

    name: str
    kind: str
    in_size: int = 0
    out_size: int = 0
    kernel_size: int = 1
    stride: int = 1
    activation: str = "relu"
    frozen: bool = False

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigurationError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ("relu", "none"):
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if self.kernel_size < 1 or self.stride < 1:
            raise ConfigurationError(f"{self.name}: kernel size and stride must be >= 1")

    @property
    def has_params(self):
        return self.kind in PARAMETRIC

    def weight_shape(self):
        if self.kind == CONV:
            return (self.out_size, self.in_size, self.kernel_size)
        if self.kind in (FC, ALIGN):
            return (self.out_size, self.in_size)
        return (0,)

    def signature(self):
        return [self.name, self.kind, self.in_size, self.out_size, self.kernel_size, self.stride, self.activation]


def architecture_fingerprint(specs, input_shape):
    """SHA-256 over layer structure and input shape. Frozen flags are excluded."""
    payload = json.dumps({"input": list(input_shape), "layers": [s.signature() for s in specs]})
    return hashlib.sha256(payload.encode()).hexdigest()


def har_architecture(
    n_channels=9,
    length=128,
    n_classes=6,
    conv_channels=(32, 64),
    kernel_size=9,
    pool_size=2,
    hidden=(128, 64),
):
    """conv1-pool1-conv2-pool2-fc1-fc2-output, with softmax applied by the loss."""
    c1, c2 = conv_channels
    h1, h2 = hidden
    t = length
    specs = [LayerSpec("conv1", CONV, n_channels, c1, kernel_size)]
    t = L.conv_output_length(t, kernel_size, 1)
    specs.append(LayerSpec("pool1", POOL, c1, c1, pool_size, pool_size, "none"))
    t = L.conv_output_length(t, pool_size, pool_size)
    specs.append(LayerSpec("conv2", CONV, c1, c2, kernel_size))
    t = L.conv_output_length(t, kernel_size, 1)
    specs.append(LayerSpec("pool2", POOL, c2, c2, pool_size, pool_size, "none"))
    t = L.conv_output_length(t, pool_size, pool_size)
    if t < 1:
        raise ConfigurationError(f"input length {length} too short for this architecture")
    specs += [
        LayerSpec("fc1", FC, c2 * t, h1),
        LayerSpec("fc2", FC, h1, h2),
        LayerSpec("output", FC, h2, n_classes, activation="none"),
    ]
    return tuple(specs)


def _readonly(a):
    if isinstance(a, np.ndarray) and a.dtype == np.float64 and not a.flags.writeable and a.base is None:
        return a
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelParams:
    """Immutable snapshot of a network's parameters.

    ``tensors`` maps each parametric layer name to ``(weight, bias)``.
    ``references`` holds the frozen reference weights of alignment layers.
    """

    specs: tuple
    input_shape: tuple
    tensors: Mapping[str, tuple]
    references: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        tensors = {}
        for spec in self.specs:
            if not spec.has_params:
                continue
            if spec.name not in self.tensors:
                raise ConfigurationError(f"missing parameters for layer {spec.name}")
            w, b = self.tensors[spec.name]
            w, b = _readonly(w), _readonly(b)
            if w.shape != spec.weight_shape() or b.shape != (spec.out_size,):
                raise ConfigurationError(
                    f"{spec.name}: got weight {w.shape}/bias {b.shape}, expected {spec.weight_shape()}"
                )
            tensors[spec.name] = (w, b)
        refs = {k: _readonly(v) for k, v in self.references.items()}
        for name, ref in refs.items():
            if name not in tensors or ref.shape != tensors[name][0].shape:
                raise ConfigurationError(f"reference weights for {name} do not match its weight shape")
        object.__setattr__(self, "specs", tuple(self.specs))
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "tensors", MappingProxyType(tensors))
        object.__setattr__(self, "references", MappingProxyType(refs))

    def __reduce__(self):
        return (ModelParams, (self.specs, self.input_shape, dict(self.tensors), dict(self.references)))

    def __deepcopy__(self, memo):
        return self  # immutable

    @property
    def fingerprint(self):
        return architecture_fingerprint(self.specs, self.input_shape)

    @property
    def layers(self):
        """``(name, weight, bias, frozen)`` for each layer; pools carry ``None`` tensors."""
        out = []
        for spec in self.specs:
            w, b = self.tensors.get(spec.name, (None, None))
            out.append((spec.name, w, b, spec.frozen))
        return out

    def spec(self, name):
        for s in self.specs:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def frozen_layers(self):
        return [s.name for s in self.specs if s.frozen]

    @property
    def size(self):
        return sum(w.size + b.size for w, b in self.tensors.values())

    def flatten(self):
        """Concatenate weights then biases of every parametric layer, in layer order."""
        parts = []
        for spec in self.specs:
            if spec.has_params:
                w, b = self.tensors[spec.name]
                parts += [w.ravel(), b]
        return np.concatenate(parts) if parts else np.zeros(0)

    def unflatten(self, vector):
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.size,):
            raise ConfigurationError(f"vector of length {vector.size} does not fit {self.size} parameters")
        tensors, pos = {}, 0
        for spec in self.specs:
            if not spec.has_params:
                continue
            w, b = self.tensors[spec.name]
            nw = vector[pos:pos + w.size].reshape(w.shape)
            pos += w.size
            nb = vector[pos:pos + b.size]
            pos += b.size
            tensors[spec.name] = (nw, nb)
        return self.with_tensors(tensors)

    def with_tensors(self, tensors):
        merged = dict(self.tensors)
        merged.update(tensors)
        return ModelParams(self.specs, self.input_shape, merged, self.references)

    def with_frozen(self, names):
        names = set(names)
        unknown = names - {s.name for s in self.specs}
        if unknown:
            raise ConfigurationError(f"unknown layers {sorted(unknown)}")
        specs = tuple(replace(s, frozen=s.name in names) for s in self.specs)
        return ModelParams(specs, self.input_shape, self.tensors, self.references)

    def digest(self):
        """SHA-256 over architecture and raw parameter bytes."""
        h = hashlib.sha256(self.fingerprint.encode())
        h.update(self.flatten().tobytes())
        return h.hexdigest()

    def equals(self, other):
        """Bit-exact equality of structure and values."""
        if self.fingerprint != other.fingerprint or self.frozen_layers != other.frozen_layers:
            return False
        return all(
            np.array_equal(self.tensors[k][0], other.tensors[k][0])
            and np.array_equal(self.tensors[k][1], other.tensors[k][1])
            for k in self.tensors
        )


def init_params(specs, input_shape, seed=0):
    """Glorot-uniform weights in ``±sqrt(6 / (fan_in + fan_out))`` and zero biases."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for spec in specs:
        if not spec.has_params:
            continue
        k = spec.kernel_size if spec.kind == CONV else 1
        limit = np.sqrt(6.0 / (spec.in_size * k + spec.out_size * k))
        tensors[spec.name] = (
            rng.uniform(-limit, limit, size=spec.weight_shape()),
            np.zeros(spec.out_size),
        )
    params = ModelParams(tuple(specs), input_shape, tensors)
    _check_shapes(params)
    return params


def _check_shapes(params):
    c, t = params.input_shape
    flat = None
    for spec in params.specs:
        if spec.kind == CONV:
            if flat is not None or spec.in_size != c:
                raise ConfigurationError(f"{spec.name}: expects {spec.in_size} channels, receives {c}")
            c, t = spec.out_size, L.conv_output_length(t, spec.kernel_size, spec.stride)
        elif spec.kind == POOL:
            t = L.conv_output_length(t, spec.kernel_size, spec.stride)
        else:
            d = flat if flat is not None else c * t
            if spec.in_size != d:
                raise ConfigurationError(f"{spec.name}: expects {spec.in_size} inputs, receives {d}")
            flat = spec.out_size
        if t < 1:
            raise ConfigurationError(f"{spec.name}: input length collapses to {t}")


# ----------------------------------------------------------------------------
# forward / backward
# ----------------------------------------------------------------------------


def check_input(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[np.newaxis]
    if x.ndim != 3 or x.shape[1:] != params.input_shape:
        raise InvalidInputError(f"expected windows of shape {params.input_shape}, got {x.shape}")
    return x


def forward(params, x, start=0, stop=None, cache=None):
    """Run layers ``start:stop``. Fills ``cache`` (a list) when given."""
    h = x
    specs = params.specs[start:stop]
    for spec in specs:
        entry = {"input_shape": h.shape}
        if spec.kind == CONV:
            w, b = params.tensors[spec.name]
            entry["x"] = h
            h = L.conv1d_forward(h, w, b, spec.stride)
        elif spec.kind == POOL:
            h, entry["argmax"] = L.maxpool1d_forward(h, spec.kernel_size, spec.stride)
        else:
            if h.ndim > 2:
                h = h.reshape(h.shape[0], -1)
            w, b = params.tensors[spec.name]
            entry["x"] = h
            h = L.fc_forward(h, w, b)
        if spec.activation == "relu":
            entry["mask"] = h > 0
            h = h * entry["mask"]
        if cache is not None:
            cache.append(entry)
    return h


def backward(params, cache, dout, start=0):
    """Back-propagate ``dout`` through the cached layers; frozen layers get no entry."""
    grads = {}
    specs = params.specs[start:start + len(cache)]
    # gradients stop once every remaining earlier layer is frozen
    first_trainable = next((i for i, s in enumerate(specs) if s.has_params and not s.frozen), len(specs))
    g = dout
    for i in range(len(specs) - 1, first_trainable - 1, -1):
        spec, entry = specs[i], cache[i]
        if spec.activation == "relu":
            g = g * entry["mask"]
        need_dx = i > first_trainable
        if spec.kind == CONV:
            w, _ = params.tensors[spec.name]
            dx, dw, db = L.conv1d_backward(g, entry["x"], w, spec.stride, need_dx=need_dx)
            if not spec.frozen:
                grads[spec.name] = (dw, db)
            g = dx
        elif spec.kind == POOL:
            if need_dx:
                g = L.maxpool1d_backward(g, entry["argmax"], entry["input_shape"][2], spec.kernel_size, spec.stride)
        else:
            w, _ = params.tensors[spec.name]
            dx, dw, db = L.fc_backward(g, entry["x"], w)
            if not spec.frozen:
                grads[spec.name] = (dw, db)
            g = dx.reshape(entry["input_shape"])
    return grads


def loss_and_gradients(params, x, labels, penalty=None):
    """Mean cross-entropy (plus optional penalty) and gradients for trainable layers."""
    x = check_input(params, x)
    cache = []
    logits = forward(params, x, cache=cache)
    loss, dlogits = L.softmax_cross_entropy(logits, labels)
    grads = backward(params, cache, dlogits)
    if penalty is not None:
        loss = add_penalty(params, grads, penalty, loss)
    return loss, grads


def add_penalty(params, grads, penalty, loss):
    value, pgrads = penalty(params)
    for name, (dw, db) in pgrads.items():
        if params.spec(name).frozen:
            continue
        if name in grads:
            gw, gb = grads[name]
            grads[name] = (gw + dw, gb + db)
        else:
            grads[name] = (dw, db)
    return loss + value


def predict_proba(params, x, batch_size=512):
    x = check_input(params, x)
    out = [L.softmax(forward(params, x[i:i + batch_size])) for i in range(0, len(x), batch_size)]
    return np.concatenate(out) if out else np.zeros((0, params.specs[-1].out_size))


class Network:
    """Stateful wrapper that remembers the last forward pass for backprop."""

    def __init__(self, params: ModelParams):
        self.params = params
        self._cache = None

    def forward(self, x):
        x = check_input(self.params, x)
        self._cache = []
        self._logits = forward(self.params, x, cache=self._cache)
        return self._logits

    def predict_proba(self, x):
        return predict_proba(self.params, x)

    def backward(self, labels, penalty=None):
        """Loss and gradients for the batch seen by the last :meth:`forward`."""
        if self._cache is None:
            raise StateError("backward called before forward")
        loss, dlogits = L.softmax_cross_entropy(self._logits, np.atleast_1d(labels))
        grads = backward(self.params, self._cache, dlogits)
        if penalty is not None:
            loss = add_penalty(self.params, grads, penalty, loss)
        self._cache = None
        return loss, grads

