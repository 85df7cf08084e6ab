"""End-to-end helpers shared by the command line and the experiments."""
from __future__ import annotations

import logging

import numpy as np

from .augment import AugmentConfig, WindowDataset, build_skeleton_basis
from .core import ContactSequence, ValidationError, VgrfSequence
from .grf import ContactParams, contact_labels
from .nn import ModelConfig, OptimizerConfig, build_model, predict, train

log = logging.getLogger(__name__)


def split_by_take(takes, val_fraction, seed):
    """(train, val) lists; whole takes go to validation, at least one when possible."""
    takes = list(takes)
    if not 0 <= val_fraction < 1:
        raise ValidationError("val_fraction must lie in [0, 1)")
    n_val = int(round(val_fraction * len(takes)))
    if val_fraction > 0 and n_val == 0 and len(takes) > 1:
        n_val = 1
    order = np.random.default_rng([seed, 7]).permutation(len(takes))
    val = [takes[i] for i in sorted(order[:n_val])]
    tr = [takes[i] for i in sorted(order[n_val:])]
    return tr, val


def skeleton_basis_of(takes):
    sks = [t.skeleton for t in takes]
    distinct = {t.skeleton.offset.tobytes() for t in takes}
    return build_skeleton_basis(sks) if len(distinct) >= 2 else None


def train_model(takes, model_cfg=ModelConfig(), opt_cfg=OptimizerConfig(),
                aug_cfg=AugmentConfig(), epochs=10, patience=None, seed=0, val_fraction=0.1,
                history_path=None, steps_per_epoch=None):
    """Build and train a model on synchronized takes; returns (model, history).

    Augmented skeletons are drawn from the SVD basis of the training takes'
    skeletons when they differ, otherwise the take's own skeleton is edited.
    """
    tr, val = split_by_take(takes, val_fraction, seed)
    if not tr:
        raise ValidationError("no training takes left after the validation split")
    aug = AugmentConfig.from_dict({**aug_cfg.to_dict(), "seed": seed})
    data = WindowDataset(tr, aug, skeleton_basis_of(tr))
    vdata = WindowDataset(val, aug, augment=False) if val else None
    if vdata is not None and len(vdata) == 0:
        vdata = None
    model = build_model(model_cfg, np.random.default_rng([seed, 1]))
    hist = train(model, data, opt_cfg, epochs, val=vdata, patience=patience, seed=seed,
                 history_path=history_path, steps_per_epoch=steps_per_epoch)
    return model, hist


def estimate_vgrf(model, poses):
    """VgrfSequence estimated from one pose sequence."""
    out = predict(model, np.asarray(poses.positions, dtype=np.float32))
    if "vgrf" not in out:
        raise ValidationError(f"model variant {model.config.variant!r} does not output vGRF")
    return VgrfSequence(out["vgrf"][0].astype(np.float64), poses.rate_hz)


def estimate_contacts(model, poses, layout, params=ContactParams()):
    """Contacts from a model: through the contact function for vGRF outputs,
    by thresholding the logits (probability > 0.5) otherwise."""
    if "vgrf" in model.config.outputs and model.config.variant != "dual":
        return contact_labels(estimate_vgrf(model, poses), layout, params)
    out = predict(model, np.asarray(poses.positions, dtype=np.float32))
    return ContactSequence((out["contact_prob"][0] > 0.5).astype(np.uint8), poses.rate_hz)

