"""Small fully connected networks in numpy with hand-written backprop.

Layers compute ``h @ W + b`` with ``W`` of shape ``(fan_in, fan_out)``; hidden
layers use ReLU and the output is either tanh-bounded or linear.  Inputs may be a
single vector ``(I,)`` or a batch ``(B, I)``; gradients of a batch are summed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CHECKPOINT_FORMAT = "uavris-mlp-v1"


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    output_activation: str = "identity"  # or "tanh"

    def __post_init__(self):
        if self.output_activation not in ("identity", "tanh"):
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("all layer widths must be >= 1")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim, *self.hidden, self.output_dim]

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "hidden": list(self.hidden),
                "output_dim": self.output_dim, "output_activation": self.output_activation}


class Mlp:
    def __init__(self, spec: MlpSpec, params: list[np.ndarray]):
        sizes = spec.layer_sizes
        if len(params) != 2 * (len(sizes) - 1):
            raise ValueError("parameter list does not match the layer layout")
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if params[2 * i].shape != (fan_in, fan_out) or params[2 * i + 1].shape != (fan_out,):
                raise ValueError(f"layer {i}: parameter shapes do not match the layer layout")
        self.spec = spec
        self.params = params

    @classmethod
    def init(cls, spec: MlpSpec, rng: np.random.Generator, final_scale: float = 1.0) -> "Mlp":
        """Uniform fan-in initialisation, ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
        sizes = spec.layer_sizes
        params = []
        n_layers = len(sizes) - 1
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            if i == n_layers - 1:
                bound *= final_scale
            params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            params.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(spec, params)

    @classmethod
    def zeros(cls, spec: MlpSpec) -> "Mlp":
        sizes = spec.layer_sizes
        params = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            params += [np.zeros((fan_in, fan_out)), np.zeros(fan_out)]
        return cls(spec, params)

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    def copy(self) -> "Mlp":
        return Mlp(self.spec, [p.copy() for p in self.params])

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.spec.input_dim or x.ndim not in (1, 2):
            raise ValueError(f"expected input of width {self.spec.input_dim}, got shape {x.shape}")
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = self._check_input(x)
        last = self.n_layers - 1
        for i in range(self.n_layers):
            h = h @ self.params[2 * i] + self.params[2 * i + 1]
            if i < last:
                h = np.maximum(h, 0.0)
        if self.spec.output_activation == "tanh":
            h = np.tanh(h)
        return h

    __call__ = forward

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Forward pass that also returns the layer inputs needed by :meth:`backward`."""
        h = self._check_input(x)
        inputs = []
        last = self.n_layers - 1
        for i in range(self.n_layers):
            inputs.append(h)
            h = h @ self.params[2 * i] + self.params[2 * i + 1]
            if i < last:
                h = np.maximum(h, 0.0)
        if self.spec.output_activation == "tanh":
            h = np.tanh(h)
        inputs.append(h)
        return h, inputs

    def backward(self, inputs: list[np.ndarray], upstream: np.ndarray
                 ) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of ``sum(upstream * output)`` w.r.t. parameters and input."""
        out = inputs[-1]
        delta = np.asarray(upstream, dtype=float)
        if delta.shape != out.shape:
            raise ValueError(f"upstream shape {delta.shape} != output shape {out.shape}")
        if self.spec.output_activation == "tanh":
            delta = delta * (1.0 - out * out)
        grads: list[np.ndarray] = [None] * len(self.params)  # type: ignore[list-item]
        for i in range(self.n_layers - 1, -1, -1):
            h_in = inputs[i]
            W = self.params[2 * i]
            if h_in.ndim == 1:
                grads[2 * i] = np.outer(h_in, delta)
                grads[2 * i + 1] = delta.copy()
            else:
                grads[2 * i] = h_in.T @ delta
                grads[2 * i + 1] = delta.sum(axis=0)
            delta = delta @ W.T
            if i > 0:
                # h_in is the ReLU output of the previous layer
                delta = delta * (h_in > 0)
        return grads, delta


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    return net.forward(x)


def gradient(net: Mlp, x: np.ndarray, upstream: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    _, inputs = net.forward_cached(x)
    return net.backward(inputs, upstream)


class Adam:
    """Bias-corrected Adam acting in place on a list of parameter arrays.

    Uses the folded form ``lr_t = lr * sqrt(1 - b2^t) / (1 - b1^t)`` with the
    epsilon scaled to match, which avoids materialising the corrected moments.
    """

    def __init__(self, params: list[np.ndarray], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self._buf = [np.empty_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        root_c2 = np.sqrt(1.0 - b2 ** self.t)
        lr_t = self.lr * root_c2 / (1.0 - b1 ** self.t)
        eps_t = self.eps * root_c2
        for p, g, m, v, buf in zip(params, grads, self.m, self.v, self._buf):
            m *= b1
            np.multiply(g, 1.0 - b1, out=buf)
            m += buf
            v *= b2
            np.multiply(g, g, out=buf)
            buf *= 1.0 - b2
            v += buf
            np.sqrt(v, out=buf)
            buf += eps_t
            np.divide(m, buf, out=buf)
            buf *= lr_t
            p -= buf


def soft_update(target: Mlp, online: Mlp, rho: float) -> None:
    """``target <- rho * online + (1 - rho) * target`` for every parameter."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    for t, o in zip(target.params, online.params):
        t *= 1.0 - rho
        t += rho * o


def save_checkpoint(path: str | Path, nets: dict[str, Mlp], meta: dict | None = None) -> None:
    """Store networks in one ``.npz``; the header is a JSON string entry.

    Arrays are stored as raw float64 so a save/load round trip is bit-exact.
    """
    header = {"format": CHECKPOINT_FORMAT, "meta": meta or {},
              "nets": {name: net.spec.to_dict() for name, net in nets.items()}}
    arrays = {"__header__": np.array(json.dumps(header, sort_keys=True))}
    for name, net in nets.items():
        for i, p in enumerate(net.params):
            arrays[f"{name}/{i}"] = p
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path: str | Path) -> tuple[dict[str, Mlp], dict]:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["__header__"]))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: unsupported checkpoint format {header.get('format')!r}")
        nets = {}
        for name, spec_d in header["nets"].items():
            spec = MlpSpec(spec_d["input_dim"], tuple(spec_d["hidden"]),
                           spec_d["output_dim"], spec_d["output_activation"])
            n = 2 * (len(spec.layer_sizes) - 1)
            nets[name] = Mlp(spec, [data[f"{name}/{i}"].copy() for i in range(n)])
    return nets, header["meta"]
