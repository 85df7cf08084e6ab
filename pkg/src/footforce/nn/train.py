"""Losses per variant, the Adam optimizer, the training loop and gradient checking."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..core import ValidationError
from . import autodiff as ad
from .model import forward

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Raised when the loss or a gradient becomes non-finite."""


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 3e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64

    def __post_init__(self):
        errs = []
        if not self.learning_rate >= 0:
            errs.append("learning_rate must be >= 0")
        for b in (self.beta1, self.beta2):
            if not 0 <= b < 1:
                errs.append("betas must lie in [0, 1)")
        if not self.eps > 0:
            errs.append("eps must be > 0")
        if self.batch_size < 1:
            errs.append("batch_size must be >= 1")
        if errs:
            raise ValidationError(errs)


class Adam:
    """Adam with bias correction over a dict of parameter tensors."""

    def __init__(self, params, cfg):
        self.params = params
        self.cfg = cfg
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self):
        c = self.cfg
        self.t += 1
        if c.learning_rate == 0:
            return
        b1t = 1.0 - c.beta1 ** self.t
        b2t = 1.0 - c.beta2 ** self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m, v = self.m[k], self.v[k]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * (g * g)
            step = c.learning_rate * (m / b1t) / (np.sqrt(v / b2t) + c.eps)
            p.data -= step.astype(p.dtype)


def loss_terms(model, out, F, C):
    """Scalar loss Tensor: MSLE for vGRF outputs, BCE for contact logits, summed."""
    terms = []
    if "vgrf" in out:
        terms.append(ad.msle(out["vgrf"], np.asarray(F, dtype=out["vgrf"].dtype)))
    if "contact" in out:
        terms.append(ad.bce_logits(out["contact"], np.asarray(C, dtype=out["contact"].dtype)))
    loss = terms[0]
    for t in terms[1:]:
        loss = ad.add(loss, t)
    return loss


def _zero_grads(model):
    for p in model.params.values():
        p.grad = None


def _check_finite(loss, model, iteration):
    if not math.isfinite(float(loss.data)):
        bad = next((k for k, p in model.params.items()
                    if p.grad is not None and not np.all(np.isfinite(p.grad))), None)
        where = f"; first non-finite gradient in {bad}" if bad else ""
        raise TrainingError(f"non-finite loss at iteration {iteration}{where}")
    for k, p in model.params.items():
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise TrainingError(f"non-finite gradient at iteration {iteration} in parameter {k}")


def train_step(model, opt, X, F, C, rng, iteration=0):
    """One optimizer step on a batch; returns the loss value."""
    model.train()
    _zero_grads(model)
    out = forward(model, X, rng)
    loss = loss_terms(model, out, F, C)
    loss.backward()
    _check_finite(loss, model, iteration)
    opt.step()
    return float(loss.data)


def evaluate_loss(model, data, batch_size=64):
    """Mean eval-mode loss over the windows of ``data`` (element-weighted per window)."""
    model.eval()
    tot, n = 0.0, 0
    for i in range(0, len(data), batch_size):
        idx = list(range(i, min(len(data), i + batch_size)))
        X, F, C = data.batch(0, idx)
        out = forward(model, X)
        tot += float(loss_terms(model, out, F, C).data) * len(idx)
        n += len(idx)
    return tot / max(n, 1)


@dataclass
class History:
    rows: list = field(default_factory=list)  # dicts: epoch, train_loss, val_loss
    best_epoch: int = -1
    best_val: float = math.inf
    stopped_early: bool = False

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.DictWriter(f, fieldnames=["epoch", "train_loss", "val_loss"])
            w.writeheader()
            for r in self.rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def train(model, data, opt_cfg, epochs, val=None, patience=None, seed=0,
          history_path=None, steps_per_epoch=None):
    """Adam training with per-epoch validation and early stopping.

    The window order of epoch ``e`` and the dropout masks of every step are
    drawn from generators keyed by ``(seed, e)`` and ``(seed, e, step)``;
    augmentation uses the dataset's own per-window streams. With ``val``
    given, the parameters of the best validation epoch are restored at the
    end and training stops after ``patience`` epochs without improvement.
    """
    if len(data) == 0:
        raise ValidationError("train: no training windows")
    opt = Adam(model.params, opt_cfg)
    hist = History()
    best_state = None
    since_best = 0
    it = 0
    for epoch in range(epochs):
        order = np.random.default_rng([seed, epoch, 0]).permutation(len(data))
        if steps_per_epoch is not None:
            order = order[:steps_per_epoch * opt_cfg.batch_size]
        losses = []
        for b, i in enumerate(range(0, len(order), opt_cfg.batch_size)):
            idx = order[i:i + opt_cfg.batch_size]
            X, F, C = data.batch(epoch, idx)
            rng = np.random.default_rng([seed, epoch, b + 1])
            losses.append(train_step(model, opt, X, F, C, rng, it) * len(idx))
            it += 1
        tr = float(sum(losses) / len(order))
        vl = evaluate_loss(model, val, opt_cfg.batch_size) if val is not None else math.nan
        hist.rows.append({"epoch": epoch, "train_loss": tr, "val_loss": vl})
        log.info("epoch %d train %.5f val %.5f", epoch, tr, vl)
        if val is not None:
            if vl < hist.best_val:
                hist.best_val, hist.best_epoch = vl, epoch
                best_state = model.state()
                since_best = 0
            else:
                since_best += 1
                if patience is not None and since_best >= patience:
                    hist.stopped_early = True
                    break
    if best_state is not None:
        model.load_state(best_state)
    model.eval()
    if history_path is not None:
        hist.write_csv(history_path)
    return hist


# -- gradient checking ----------------------------------------------------------

def grad_check(fn, inputs, n_checks=20, h=1e-4, rng=None, numeric_dtype=None):
    """Max relative error between reverse-mode and central-difference gradients.

    ``fn`` maps the list of Tensors ``inputs`` to a scalar Tensor. Up to
    ``n_checks`` randomly chosen entries of every input are perturbed by
    +-h and +-2h (fourth-order central difference).
    The relative error is |a - n| / max(|a|, |n|, 1e-8). With
    ``numeric_dtype`` the finite differences run on copies of the inputs in
    that dtype, which is how float32 gradients are checked: float32 function
    values are too coarse for central differences.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    for t in inputs:
        t.requires_grad = True
        t.grad = None
    fn(inputs).backward()
    probes = inputs
    if numeric_dtype is not None:
        probes = [ad.Tensor(t.data.astype(numeric_dtype)) for t in inputs]
    worst = 0.0
    for t, probe in zip(inputs, probes):
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        flat = probe.data.reshape(-1)
        picks = rng.choice(flat.size, size=min(n_checks, flat.size), replace=False)
        for i in picks:
            old = flat[i]
            f = {}
            for k in (-2, -1, 1, 2):
                flat[i] = old + k * h
                f[k] = float(fn(probes).data)
            flat[i] = old
            # fourth-order central difference
            num = (8.0 * (f[1] - f[-1]) - (f[2] - f[-2])) / (12.0 * h)
            a = float(analytic.reshape(-1)[i])
            err = abs(a - num) / max(abs(a), abs(num), 1e-8)
            worst = max(worst, err)
    return worst


def model_grad_check(model, X, F, C, n_checks=10, h=1e-4, rng=None, numeric_dtype=None):
    """grad_check of the training loss w.r.t. every parameter, in eval mode."""
    model.eval()
    names = list(model.params)
    params = [model.params[k] for k in names]

    def fn(ts):
        saved = [p.data for p in params]
        for p, t in zip(params, ts):
            p.data = t.data
        try:
            return loss_terms(model, forward(model, X), F, C)
        finally:
            for p, d in zip(params, saved):
                p.data = d
    return grad_check(fn, params, n_checks, h, rng, numeric_dtype)
