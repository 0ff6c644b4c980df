"""MLP classifier split into a g-stage, an h-stage and a linear head.

The feature extractor is an MLP whose hidden layers are partitioned at
``injection_index``: layers before it form g (whose output is the
intermediate feature that gets mixed during training), layers from it
onward form h.  The head is a bias-free linear map onto class scores.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tape, Var
from .rng import RngState

__all__ = ["ModelConfig", "ModelParams", "init_params", "features_g", "head_h",
           "logits", "forward", "predict", "save_checkpoint", "load_checkpoint"]


@dataclass
class ModelConfig:
    input_dim: int
    layer_widths: list[int]
    num_classes: int
    injection_index: int = 0
    bias: bool = True

    def __post_init__(self):
        if self.input_dim < 1 or self.num_classes < 2:
            raise ValueError("need input_dim >= 1 and num_classes >= 2")
        if any(w < 1 for w in self.layer_widths):
            raise ValueError(f"layer widths must be positive: {self.layer_widths}")
        if not 0 <= self.injection_index <= len(self.layer_widths):
            raise ValueError(
                f"injection_index {self.injection_index} outside [0, {len(self.layer_widths)}]")

    @property
    def feature_dim(self) -> int:
        return self.layer_widths[-1] if self.layer_widths else self.input_dim

    @property
    def injection_dim(self) -> int:
        """Width of the intermediate feature that mixing acts on."""
        if self.injection_index == 0:
            return self.input_dim
        return self.layer_widths[self.injection_index - 1]


@dataclass
class ModelParams:
    config: ModelConfig
    weights: list[np.ndarray]   # one [d_in, d_out] per hidden layer
    biases: list[np.ndarray]    # one [d_out] per hidden layer
    head: np.ndarray            # [feature_dim, C], no bias

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.weights + self.biases + [self.head]])

    def unflatten_into(self, vec: np.ndarray) -> None:
        pos = 0
        for arr in self.weights + self.biases + [self.head]:
            n = arr.size
            arr.ravel()[:] = vec[pos:pos + n]
            pos += n

    def copy(self) -> "ModelParams":
        return ModelParams(self.config,
                           [w.copy() for w in self.weights],
                           [b.copy() for b in self.biases],
                           self.head.copy())


def init_params(config: ModelConfig, rng: RngState) -> ModelParams:
    """Fan-in-scaled Gaussian weights (variance 2/fan_in), zero biases."""
    gen = rng.generator()
    dims = [config.input_dim] + list(config.layer_widths)
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        weights.append(gen.normal(0.0, np.sqrt(2.0 / d_in), size=(d_in, d_out)))
        biases.append(np.zeros(d_out))
    head = gen.normal(0.0, np.sqrt(2.0 / dims[-1]), size=(dims[-1], config.num_classes))
    return ModelParams(config, weights, biases, head)


def _leaves(params: ModelParams, tape: Tape):
    ws = [tape.leaf(w) for w in params.weights]
    bs = [tape.leaf(b) for b in params.biases] if params.config.bias else [None] * len(ws)
    head = tape.leaf(params.head)
    return ws, bs, head


class TapedModel:
    """Params registered as leaves on one tape, for a single batch."""

    def __init__(self, params: ModelParams, tape: Tape):
        self.config = params.config
        self.tape = tape
        self.w_vars, self.b_vars, self.head_var = _leaves(params, tape)

    def features_g(self, x: np.ndarray) -> Var:
        """Forward through layers before the injection point (identity if 0)."""
        cfg = self.config
        if x.shape[1] != cfg.input_dim:
            raise ValueError(f"input has {x.shape[1]} columns, expected {cfg.input_dim}")
        z = self.tape.leaf(x)
        for i in range(cfg.injection_index):
            z = self.tape.affine(z, self.w_vars[i], self.b_vars[i])
            z = self.tape.relu(z)
        return z

    def head_h(self, z: Var) -> Var:
        """Forward through the remaining hidden layers."""
        cfg = self.config
        if z.shape[1] != cfg.injection_dim:
            raise ValueError(f"feature has {z.shape[1]} columns, expected {cfg.injection_dim}")
        f = z
        for i in range(cfg.injection_index, len(cfg.layer_widths)):
            f = self.tape.affine(f, self.w_vars[i], self.b_vars[i])
            f = self.tape.relu(f)
        return f

    def logits(self, f: Var) -> Var:
        if f.shape[1] != self.config.feature_dim:
            raise ValueError(f"feature has {f.shape[1]} columns, expected {self.config.feature_dim}")
        return self.tape.affine(f, self.head_var)

    def param_vars(self) -> list[Var]:
        vs = list(self.w_vars)
        if self.config.bias:
            vs += list(self.b_vars)
        vs.append(self.head_var)
        return vs

    def param_grads(self, adjoints) -> list[np.ndarray]:
        return [adjoints[v.idx] for v in self.param_vars()]


def features_g(params: ModelParams, x: np.ndarray, tape: Tape) -> Var:
    return TapedModel(params, tape).features_g(x)


def head_h(params: ModelParams, z: Var, tape: Tape) -> Var:
    m = TapedModel(params, tape)
    return m.head_h(z)


def logits(params: ModelParams, f: Var, tape: Tape) -> Var:
    m = TapedModel(params, tape)
    return m.logits(f)


def forward(params: ModelParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluation pass with no mixing: returns (features, logits) arrays."""
    tape = Tape()
    m = TapedModel(params, tape)
    f = m.head_h(m.features_g(np.asarray(x, dtype=np.float64)))
    return f.value, m.logits(f).value


def predict(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties go to the lowest class index."""
    _, scores = forward(params, x)
    return np.argmax(scores, axis=1)


# -- checkpoint format: JSON with explicit shapes ---------------------------

def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    cfg = params.config
    doc = {
        "format": "mfwlab-checkpoint-v1",
        "config": {
            "input_dim": cfg.input_dim,
            "layer_widths": list(cfg.layer_widths),
            "num_classes": cfg.num_classes,
            "injection_index": cfg.injection_index,
            "bias": cfg.bias,
        },
        "tensors": {},
    }
    def put(name, arr):
        doc["tensors"][name] = {"shape": list(arr.shape), "data": arr.ravel().tolist()}
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        put(f"layer{i}.weight", w)
        put(f"layer{i}.bias", b)
    put("head.weight", params.head)
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path: str | Path) -> ModelParams:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "mfwlab-checkpoint-v1":
        raise ValueError(f"unknown checkpoint format: {doc.get('format')!r}")
    cfg = ModelConfig(**doc["config"])
    def get(name):
        t = doc["tensors"][name]
        return np.array(t["data"], dtype=np.float64).reshape(t["shape"])
    weights = [get(f"layer{i}.weight") for i in range(len(cfg.layer_widths))]
    biases = [get(f"layer{i}.bias") for i in range(len(cfg.layer_widths))]
    return ModelParams(cfg, weights, biases, get("head.weight"))
