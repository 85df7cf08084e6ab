"""Model variants built on the autodiff engine, plus the single-file model format.

Every variant maps a batch of global joint positions (B, T, J, 3) to
per-frame outputs of the same length T.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from ..core import ValidationError
from . import autodiff as ad

VARIANTS = ("vgrf", "contact", "dual", "mlp3", "linear", "linear-feet")
CONV_VARIANTS = ("vgrf", "contact", "dual")
MAGIC = b"FFMODEL1"
VGRF_OUT = 2 * 16
CONTACT_OUT = 2 * 2
MLP_WIDTH = 128
MLP_LAYERS = 3
INIT_CELL_BW = 1.0 / 32
OUTPUT_INIT_SCALE = 0.1


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "vgrf"
    n_joints: int = 23
    conv_channels: tuple = (128, 128, 256, 256)
    kernel: int = 7
    fc_width: int = 256
    fc_layers: int = 3
    dropout_p: float = 0.2
    width_scale: float = 1.0
    foot_joints: tuple = (21, 22, 17, 18)  # used by mlp3 and linear-feet
    rate_hz: float = 100.0  # velocity features of the per-frame baselines

    def __post_init__(self):
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        object.__setattr__(self, "foot_joints", tuple(int(j) for j in self.foot_joints))
        self.validate()

    def validate(self):
        errs = []
        if self.variant not in VARIANTS:
            errs.append(f"unknown variant {self.variant!r}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            errs.append("kernel must be odd and positive")
        if not self.conv_channels or any(c <= 0 for c in self.conv_channels):
            errs.append("channels must be positive")
        if self.fc_width <= 0 or self.fc_layers < 1:
            errs.append("fc_width and fc_layers must be positive")
        if not 0 <= self.dropout_p < 1:
            errs.append("dropout_p must lie in [0, 1)")
        if not self.width_scale > 0:
            errs.append("width_scale must be > 0")
        if self.n_joints < 1:
            errs.append("n_joints must be positive")
        if any(not 0 <= j < self.n_joints for j in self.foot_joints):
            errs.append("foot_joints out of range")
        if self.rate_hz <= 0:
            errs.append("rate_hz must be positive")
        if errs:
            raise ValidationError(errs)

    def scaled(self, n):
        return max(1, int(round(n * self.width_scale)))

    @property
    def outputs(self):
        if self.variant == "vgrf":
            return ("vgrf",)
        if self.variant == "dual":
            return ("vgrf", "contact")
        return ("contact",)

    def to_dict(self):
        d = asdict(self)
        d["conv_channels"] = list(self.conv_channels)
        d["foot_joints"] = list(self.foot_joints)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class Model:
    config: ModelConfig
    params: dict = field(default_factory=dict)  # name -> Tensor
    training: bool = False

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        return self

    def n_parameters(self):
        return int(sum(p.data.size for p in self.params.values()))

    def state(self):
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state(self, state):
        for k, v in state.items():
            self.params[k].data = np.array(v, dtype=self.params[k].dtype)


def param_shapes(cfg):
    """Ordered {name: shape} for a configuration."""
    shapes = {}
    J = cfg.n_joints
    if cfg.variant in CONV_VARIANTS:
        c_in = 3 * J
        for i, c in enumerate(cfg.conv_channels):
            c = cfg.scaled(c)
            shapes[f"conv{i}.w"] = (cfg.kernel, c_in, c)
            shapes[f"conv{i}.b"] = (c,)
            c_in = c
        heads = [("fc", VGRF_OUT if cfg.variant == "vgrf" else CONTACT_OUT)]
        if cfg.variant == "dual":
            heads = [("fcF", VGRF_OUT), ("fcC", CONTACT_OUT)]
        width = cfg.scaled(cfg.fc_width)
        for prefix, n_out in heads:
            d = c_in
            for i in range(cfg.fc_layers):
                o = n_out if i == cfg.fc_layers - 1 else width
                shapes[f"{prefix}{i}.w"] = (d, o)
                shapes[f"{prefix}{i}.b"] = (o,)
                d = o
    else:
        n_in = 6 * (J if cfg.variant == "linear" else len(cfg.foot_joints))
        widths = [cfg.scaled(MLP_WIDTH)] * MLP_LAYERS if cfg.variant == "mlp3" else []
        d = n_in
        for i, o in enumerate(widths + [CONTACT_OUT]):
            shapes[f"fc{i}.w"] = (d, o)
            shapes[f"fc{i}.b"] = (o,)
            d = o
    return shapes


def _output_layers(cfg):
    """Names of the last dense layer of every head."""
    if cfg.variant in CONV_VARIANTS:
        prefixes = ["fcF", "fcC"] if cfg.variant == "dual" else ["fc"]
        return {f"{p}{cfg.fc_layers - 1}" for p in prefixes}
    return {f"fc{MLP_LAYERS if cfg.variant == 'mlp3' else 0}"}


def build_model(cfg, rng, dtype=np.float32):
    """Fresh model: weights uniform in +-sqrt(6 / fan_in), zero biases.

    Output layers are drawn with a tenth of that bound, and the vGRF head's
    bias starts where softplus gives 1/32 BW per cell, i.e. body weight
    spread evenly over both insoles. Starting from tiny, evenly spread
    forces avoids an early phase of large gradients that drives the softplus
    into its flat region and inflates Adam's second-moment estimates.
    """
    model = Model(cfg)
    outputs = _output_layers(cfg)
    for name, shape in param_shapes(cfg).items():
        layer = name.rsplit(".", 1)[0]
        if name.endswith(".b"):
            data = np.zeros(shape)
            if layer in outputs and shape[0] == VGRF_OUT:
                data[:] = INIT_CELL_BW + np.log(-np.expm1(-INIT_CELL_BW))
        else:
            fan_in = int(np.prod(shape[:-1]))
            bound = np.sqrt(6.0 / fan_in) * (OUTPUT_INIT_SCALE if layer in outputs else 1.0)
            data = rng.uniform(-bound, bound, size=shape)
        model.params[name] = ad.Tensor(data.astype(dtype), requires_grad=True, name=name)
    return model


def _as_batch(X, J):
    x = np.asarray(getattr(X, "positions", X))
    if x.ndim == 3 and x.shape[-1] == 3 and x.shape[1] == J:
        x = x[None]
    if x.ndim == 3 and x.shape[-1] == 3 * J:
        x = x.reshape(x.shape[0], x.shape[1], J, 3)
    if x.ndim != 4 or x.shape[2:] != (J, 3):
        raise ValidationError(f"input shape {x.shape} does not match {J} joints")
    if x.shape[1] < 1:
        raise ValidationError("input must have at least one frame")
    return x


def kinematic_features(x, rate_hz):
    """Positions and central-difference velocities, (B, T, J, 6)."""
    if x.shape[1] > 1:
        v = np.gradient(x, axis=1) * rate_hz
    else:
        v = np.zeros_like(x)
    return np.concatenate([x, v.astype(x.dtype)], axis=-1)


def forward(model, X, rng=None):
    """Outputs {'vgrf': (B, T, 2, 16) Tensor, 'contact': (B, T, 2, 2) logits}.

    ``X`` is (B, T, J, 3), (B, T, 3J) or a single (T, J, 3) sequence. Dropout
    is active only in training mode and then needs ``rng``.
    """
    cfg, p = model.config, model.params
    dtype = next(iter(p.values())).dtype
    x = _as_batch(X, cfg.n_joints).astype(dtype, copy=False)
    B, T = x.shape[:2]
    drop_rng = rng if model.training else None
    if model.training and cfg.dropout_p > 0 and rng is None and cfg.variant in CONV_VARIANTS:
        raise ValidationError("training-mode forward needs an rng for dropout")
    out = {}
    if cfg.variant in CONV_VARIANTS:
        h = ad.Tensor(x.reshape(B, T, -1))
        for i in range(len(cfg.conv_channels)):
            h = ad.elu(ad.conv1d(h, p[f"conv{i}.w"], p[f"conv{i}.b"]))
        heads = {"vgrf": "fc", "contact": "fc"}
        if cfg.variant == "dual":
            heads = {"vgrf": "fcF", "contact": "fcC"}
        for kind in cfg.outputs:
            prefix = heads[kind]
            z = h
            for i in range(cfg.fc_layers):
                z = ad.dropout(z, cfg.dropout_p, drop_rng)
                z = ad.dense(z, p[f"{prefix}{i}.w"], p[f"{prefix}{i}.b"])
                if i < cfg.fc_layers - 1:
                    z = ad.elu(z)
            if kind == "vgrf":
                out["vgrf"] = ad.reshape(ad.softplus(z), (B, T, 2, 16))
            else:
                out["contact"] = ad.reshape(z, (B, T, 2, 2))
        return out
    if cfg.variant != "linear":
        x = x[:, :, list(cfg.foot_joints)]
    z = ad.Tensor(kinematic_features(x, cfg.rate_hz).reshape(B, T, -1))
    n = MLP_LAYERS if cfg.variant == "mlp3" else 0
    for i in range(n + 1):
        z = ad.dense(z, p[f"fc{i}.w"], p[f"fc{i}.b"])
        if i < n:
            z = ad.relu(z)
    out["contact"] = ad.reshape(z, (B, T, 2, 2))
    return out


def predict(model, X):
    """Eval-mode numpy outputs; contact probabilities pass through a sigmoid."""
    was = model.training
    model.eval()
    try:
        out = forward(model, X)
    finally:
        model.training = was
    res = {}
    if "vgrf" in out:
        res["vgrf"] = out["vgrf"].data
    if "contact" in out:
        res["contact_prob"] = ad.sigmoid(out["contact"]).data
    return res


# -- file format ----------------------------------------------------------------

def save_model(model, path):
    """Magic, header length (u64 LE), JSON header, float32 LE parameter blob."""
    manifest = [{"name": k, "shape": list(v.shape)} for k, v in model.params.items()]
    header = json.dumps({"config": model.config.to_dict(), "params": manifest}).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for v in model.params.values():
            f.write(np.ascontiguousarray(v.data, dtype="<f4").tobytes())


def load_model(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:len(MAGIC)] != MAGIC:
        raise ValidationError(f"{path}: not a model file")
    off = len(MAGIC)
    if len(raw) < off + 8:
        raise ValidationError(f"{path}: truncated header")
    (n,) = struct.unpack("<Q", raw[off:off + 8])
    off += 8
    try:
        header = json.loads(raw[off:off + n].decode("utf-8"))
        cfg = ModelConfig.from_dict(header["config"])
        manifest = header["params"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise ValidationError(f"{path}: bad header ({e})") from e
    off += n
    expected = param_shapes(cfg)
    got = {m["name"]: tuple(m["shape"]) for m in manifest}
    if got != expected:
        bad = sorted(k for k in set(got) | set(expected) if got.get(k) != expected.get(k))
        raise ValidationError(f"{path}: parameter shapes do not match the {cfg.variant} "
                              f"config: {', '.join(bad[:5])}")
    size = sum(int(np.prod(s)) for s in expected.values()) * 4
    if len(raw) - off != size:
        raise ValidationError(f"{path}: blob holds {len(raw) - off} bytes, manifest needs {size}")
    blob = np.frombuffer(raw, dtype="<f4", offset=off)
    model = Model(cfg)
    i = 0
    for m in manifest:
        k = int(np.prod(m["shape"]))
        data = blob[i:i + k].reshape(m["shape"]).astype(np.float32)
        model.params[m["name"]] = ad.Tensor(data, requires_grad=True, name=m["name"])
        i += k
    return model
