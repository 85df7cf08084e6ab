"""Footskate cleanup: contact constraints from (estimated) vGRF and an IK solve.

The IK energy has three terms:

    E = w_constraint * sum_c weight_c * sum_{t in run_c} |FK_j(t) - anchor_c|^2
      + w_pose * sum_{t, j} angle(q_tj, q0_tj)^2
      + w_smooth * sum_{t, j} |D2 (p_j - p0_j)(t)|^2

where D2 is the second temporal difference and p0 the input positions, so
the smoothness term penalizes only jitter added by the correction and the
input motion is the minimum when there are no constraints.

It is minimized with Adam over the local rotations and the root translation,
with a halving step-size backoff so that accepted iterates never increase E.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import quaternion as quat
from .core import ContactSequence, LocalMotion, ValidationError, VgrfSequence
from .grf import ContactParams, contact_intermediates, contact_labels
from .kinematics import forward_kinematics
from .metrics import _runs, footskate
from .nn import autodiff as ad
from .nn.model import predict

log = logging.getLogger(__name__)

DIVERGENCE_STEPS = 50
STATIONARY_GRAD = 1e-8


@dataclass(frozen=True)
class ContactConstraint:
    foot: int
    location: int  # 0 heel (ankle joint), 1 toe (toe joint)
    t0: int
    t1: int  # inclusive
    anchor: tuple
    weight: float

    def __post_init__(self):
        if self.t0 > self.t1:
            raise ValidationError("constraint interval must satisfy t0 <= t1")
        if not np.all(np.isfinite(self.anchor)) or len(self.anchor) != 3:
            raise ValidationError("constraint anchor must be a finite 3-vector")
        if self.weight < 0:
            raise ValidationError("constraint weight must be >= 0")

    def to_dict(self):
        d = asdict(self)
        d["anchor"] = list(self.anchor)
        return d


@dataclass(frozen=True)
class IkWeights:
    w_constraint: float = 100.0
    w_pose: float = 0.1
    w_smooth: float = 1.0
    iterations: int = 500
    step: float = 1e-2
    tol: float = 1e-6

    def __post_init__(self):
        ws = (self.w_constraint, self.w_pose, self.w_smooth)
        if any(w < 0 for w in ws) or not any(w > 0 for w in ws):
            raise ValidationError("IK weights must be >= 0 with at least one positive")
        if self.iterations < 0 or not self.step > 0:
            raise ValidationError("iterations must be >= 0 and step > 0")

    def to_dict(self):
        return asdict(self)


class IkDivergence(RuntimeError):
    pass


def _location_weights(vgrf, layout, params):
    heel, toe, _ = contact_intermediates(vgrf, layout, params)
    return np.stack([heel, toe], axis=-1)  # (T, 2, 2)


def derive_constraints(contacts, poses, skeleton, vgrf=None, layout=None,
                       params=ContactParams(), rigid=True):
    """One constraint per maximal contact run of every (foot, location).

    The anchor is the force-weighted mean of the joint position over the run
    and the constraint weight the mean location force. Without ``vgrf`` every
    frame weighs 1. Anchors are kept at or above the ground plane. With
    ``rigid`` the heel and toe anchors of overlapping runs are made
    compatible with the foot length (see ``_rigid_pairs``).
    """
    lab = np.asarray(getattr(contacts, "labels", contacts)).astype(bool)
    p = np.asarray(poses.positions, dtype=np.float64)
    if lab.shape != (p.shape[0], 2, 2):
        raise ValidationError(f"contacts {lab.shape} do not match {p.shape[0]} frames")
    if vgrf is not None:
        if layout is None:
            raise ValidationError("derive_constraints: vgrf needs a layout")
        if len(vgrf) != p.shape[0]:
            raise ValidationError("derive_constraints: vgrf length differs from poses")
        w_all = np.maximum(_location_weights(vgrf, layout, params), 0.0)
    else:
        w_all = np.ones(lab.shape)
    out = []
    for f in range(2):
        for loc in range(2):
            j = skeleton.foot_joints[f, loc]
            for s, e in _runs(lab[:, f, loc]):
                w = w_all[s:e, f, loc]
                pos = p[s:e, j]
                if w.sum() > 0:
                    anchor = (w[:, None] * pos).sum(axis=0) / w.sum()
                else:
                    anchor = pos.mean(axis=0)
                anchor[1] = max(anchor[1], 0.0)
                out.append(ContactConstraint(f, loc, int(s), int(e - 1),
                                             tuple(float(a) for a in anchor), float(w.mean())))
    return _rigid_pairs(out, p, skeleton) if rigid else out


def _rigid_pairs(cons, p, skeleton):
    """Respace overlapping heel/toe anchors of one foot to the foot's length.

    Both anchors move symmetrically along their horizontal connecting line
    until their distance equals the median horizontal ankle-toe distance of
    the input over the overlap, so a rigid foot can meet both at once.
    """
    cons = list(cons)
    for f in range(2):
        ja, jt = skeleton.foot_joints[f]
        heels = [i for i, c in enumerate(cons) if c.foot == f and c.location == 0]
        toes = [i for i, c in enumerate(cons) if c.foot == f and c.location == 1]
        for i in heels:
            for k in toes:
                h, t = cons[i], cons[k]
                lo, hi = max(h.t0, t.t0), min(h.t1, t.t1)
                if lo > hi:
                    continue
                seg = p[lo:hi + 1, jt][:, [0, 2]] - p[lo:hi + 1, ja][:, [0, 2]]
                length = float(np.median(np.linalg.norm(seg, axis=1)))
                ah, at = np.array(h.anchor), np.array(t.anchor)
                d = at[[0, 2]] - ah[[0, 2]]
                n = np.linalg.norm(d)
                if n < 1e-9:
                    continue
                mid = 0.5 * (at[[0, 2]] + ah[[0, 2]])
                ah[[0, 2]] = mid - 0.5 * length * d / n
                at[[0, 2]] = mid + 0.5 * length * d / n
                cons[i] = replace(h, anchor=tuple(float(x) for x in ah))
                cons[k] = replace(t, anchor=tuple(float(x) for x in at))
    return cons


class _Energy:
    def __init__(self, motion, skeleton, constraints, weights):
        self.parents = skeleton.parent
        self.offsets = skeleton.offset
        self.q0 = quat.normalize(np.asarray(motion.rotations, dtype=np.float64))
        self.w = weights
        # reference positions from the same float64 state the solver starts at
        root0 = np.asarray(motion.root_translation, dtype=np.float64)
        self.p0 = forward_kinematics(skeleton, LocalMotion(root0, self.q0, motion.rate_hz)).positions
        T = len(motion)
        rows, joints, anchors, cw = [], [], [], []
        for c in constraints:
            if not 0 <= c.t0 <= c.t1 < T:
                raise ValidationError(f"constraint frames [{c.t0}, {c.t1}] outside 0..{T - 1}")
            j = int(skeleton.foot_joints[c.foot, c.location])
            n = c.t1 - c.t0 + 1
            rows += range(c.t0, c.t1 + 1)
            joints += [j] * n
            anchors += [c.anchor] * n
            cw += [c.weight] * n
        self.rows = np.asarray(rows, dtype=np.int64)
        self.joints = np.asarray(joints, dtype=np.int64)
        self.anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 3)
        self.cw = np.asarray(cw, dtype=np.float64)[:, None]

    def __call__(self, root, q):
        w = self.w
        pos = ad.forward_kinematics(self.parents, self.offsets, root, q)
        terms = []
        if len(self.rows) and w.w_constraint > 0:
            sel = _gather(pos, self.rows, self.joints)
            d = ad.sub(sel, self.anchors)
            terms.append(ad.mul(ad.total(ad.mul(ad.square(d), self.cw)), w.w_constraint))
        if w.w_pose > 0:
            terms.append(ad.mul(ad.total(ad.geodesic_sq(q, self.q0)), w.w_pose))
        if w.w_smooth > 0 and pos.shape[0] >= 3:
            terms.append(ad.mul(ad.total(ad.square(ad.diff2(ad.sub(pos, self.p0)))), w.w_smooth))
        if not terms:
            return ad.Tensor(np.zeros(()))
        e = terms[0]
        for t in terms[1:]:
            e = ad.add(e, t)
        return e


def _gather(pos, rows, joints):
    shape = pos.shape

    def back(g):
        out = np.zeros(shape, dtype=g.dtype)
        np.add.at(out, (rows, joints), g)
        return (out,)
    return ad._make(pos.data[rows, joints], (pos,), back)


def ik_energy(motion, skeleton, constraints, weights):
    """Callable (root Tensor, quats Tensor) -> scalar energy Tensor."""
    return _Energy(motion, skeleton, constraints, weights)


def solve_ik(motion, skeleton, constraints, weights=IkWeights(), return_info=False):
    """Minimize the cleanup energy; returns the corrected LocalMotion.

    Each iteration proposes an Adam step, renormalizes the rotations and
    accepts the proposal only if the energy does not increase; otherwise the
    step is halved and the Adam moments restart from the current gradient.
    Accepted steps let the step size grow back towards ``weights.step``.
    Stops after ``weights.iterations`` iterations or once an accepted step
    lowers the energy by less than ``tol`` relative. Fifty consecutive
    rejections count as convergence at a stationary point and as divergence
    (``IkDivergence``) anywhere else.
    """
    energy = _Energy(motion, skeleton, constraints, weights)
    root = np.array(motion.root_translation, dtype=np.float64)
    q = quat.normalize(np.array(motion.rotations, dtype=np.float64))

    def eval_(r, qq):
        rt = ad.Tensor(r, requires_grad=True)
        qt = ad.Tensor(qq, requires_grad=True)
        e = energy(rt, qt)
        if e._backward is not None or e.requires_grad:
            e.backward()
        gr = rt.grad if rt.grad is not None else np.zeros_like(r)
        gq = qt.grad if qt.grad is not None else np.zeros_like(qq)
        # rotations live on the unit sphere: drop the radial gradient component
        gq = gq - np.sum(gq * qq, axis=-1, keepdims=True) * qq
        return float(e.data), gr, gq

    e, gr, gq = eval_(root, q)
    e_start = e
    history = [e]
    lr = weights.step
    b1, b2, eps = 0.9, 0.999, 1e-8
    m = [np.zeros_like(root), np.zeros_like(q)]
    v = [np.zeros_like(root), np.zeros_like(q)]
    t = 0
    rejected = 0
    it = 0
    steps = None
    for it in range(1, weights.iterations + 1):
        if e == 0:
            break
        if steps is None:
            # Adam direction at the current (accepted) point
            t += 1
            steps = []
            for i, g in enumerate((gr, gq)):
                m[i] = b1 * m[i] + (1 - b1) * g
                v[i] = b2 * v[i] + (1 - b2) * g * g
                steps.append((m[i] / (1 - b1 ** t)) / (np.sqrt(v[i] / (1 - b2 ** t)) + eps))
        r_new = root - lr * steps[0]
        q_new = quat.normalize(q - lr * steps[1])
        e_new, gr_new, gq_new = eval_(r_new, q_new)
        if not np.isfinite(e_new):
            raise IkDivergence(f"non-finite energy at iteration {it}")
        if e_new <= e:
            rel = (e - e_new) / max(e, 1e-300)
            root, q, e, gr, gq = r_new, q_new, e_new, gr_new, gq_new
            history.append(e)
            rejected = 0
            steps = None
            lr = min(2.0 * lr, weights.step)
            if rel < weights.tol:
                break
        else:
            # momentum can point uphill; restart Adam from the current gradient
            lr *= 0.5
            m = [np.zeros_like(root), np.zeros_like(q)]
            v = [np.zeros_like(root), np.zeros_like(q)]
            t = 0
            steps = None
            rejected += 1
            if rejected >= DIVERGENCE_STEPS:
                gnorm = float(np.sqrt(np.sum(gr * gr) + np.sum(gq * gq)))
                if gnorm <= STATIONARY_GRAD * (1.0 + abs(e)):
                    # every step rejected at a stationary point: converged to round-off
                    break
                raise IkDivergence(f"energy increased for {rejected} consecutive steps "
                                   f"(iteration {it}, energy {e:.6g}, step {lr:.3g})")
    out = LocalMotion(root, q, motion.rate_hz)
    if return_info:
        return out, {"iterations": it, "initial_energy": e_start, "final_energy": e,
                     "accepted": len(history) - 1, "final_step": lr}
    return out


def cleanup_pipeline(motion, skeleton, model=None, layout=None, params=ContactParams(),
                     weights=IkWeights(), contacts=None, vgrf=None):
    """Estimate vGRF, derive contacts and constraints, solve IK.

    Pass ``contacts`` (and optionally ``vgrf``) to bypass the network.
    Returns ``(corrected motion, report dict)``.
    """
    poses = forward_kinematics(skeleton, motion)
    if contacts is None:
        if vgrf is None:
            if model is None or "vgrf" not in model.config.outputs:
                raise ValidationError("cleanup_pipeline needs a vGRF model, vgrf or contacts")
            vgrf = VgrfSequence(predict(model, poses.positions)["vgrf"][0].astype(np.float64),
                                motion.rate_hz)
        if layout is None:
            raise ValidationError("cleanup_pipeline: a layout is needed to derive contacts")
        contacts = contact_labels(vgrf, layout, params)
    if not isinstance(contacts, ContactSequence):
        contacts = ContactSequence(contacts, motion.rate_hz)
    cons = derive_constraints(contacts, poses, skeleton, vgrf, layout, params)
    fixed, info = solve_ik(motion, skeleton, cons, weights, return_info=True)
    after = forward_kinematics(skeleton, fixed)
    dev = np.linalg.norm(after.positions - poses.positions, axis=-1).mean()
    report = {
        "footskate_before_mps": footskate(poses, contacts, skeleton),
        "footskate_after_mps": footskate(after, contacts, skeleton),
        "mean_joint_deviation_m": float(dev),
        "n_constraints": len(cons),
        **info,
        "weights": weights.to_dict(),
    }
    return fixed, report


def write_report(report, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
