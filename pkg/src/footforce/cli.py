"""Command-line interface: ``footforce <command> ...``.

Exit codes: 0 success, 1 validation error, 2 I/O or usage error. Logs go
to standard error; data only to the files named by the flags. Outputs of a
failed command are removed.
"""
from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from .augment import AugmentConfig
from .baselines import OtSearch, apply_ot, fit_ot, load_thresholds, save_thresholds
from .cleanup import IkWeights, cleanup_pipeline, write_report as write_cleanup_report
from .core import (ContactSequence, InsoleLayout, Take, ValidationError, VgrfSequence, load_take,
                   save_take)
from .grf import ContactParams, contact_labels
from .kinematics import forward_kinematics
from .metrics import (contact_report, cop_mad, footskate, offcontact_fp_profile, vgrf_report,
                      write_report)
from .nn import ModelConfig, OptimizerConfig, build_model, load_model, save_model
from .perturb import add_noise, align_to, blend, blend_contacts, mine_blend_pairs
from .pipeline import estimate_contacts, estimate_vgrf, train_model
from .synth import generate_gait, generate_unsynchronized, random_gait_config
from .sync import synchronize

log = logging.getLogger("footforce")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


class _Outputs:
    """Tracks output paths so a failed command can remove what it wrote."""

    def __init__(self):
        self.paths = []

    def add(self, path):
        path = Path(path)
        if not path.exists():
            self.paths.append(path)
        return path

    def remove(self):
        for p in reversed(self.paths):
            if p.is_dir():
                shutil.rmtree(p, ignore_errors=True)
            elif p.exists():
                p.unlink()


# -- loading helpers --------------------------------------------------------------

def _take_dirs(paths):
    """Expand each path into take directories: itself, or its sorted children."""
    out = []
    for p in map(Path, paths):
        if (p / "meta.json").exists():
            out.append(p)
            continue
        if not p.is_dir():
            raise FileNotFoundError(f"{p}: not a take directory")
        kids = sorted(c for c in p.iterdir() if (c / "meta.json").exists())
        if not kids:
            raise FileNotFoundError(f"{p}: contains no takes")
        out += kids
    return out


def _load_takes(paths):
    return [load_take(d) for d in _take_dirs(paths)]


def _read_blob(path, dtype, tail):
    raw = Path(path).read_bytes()
    item = int(np.prod(tail)) * np.dtype(dtype).itemsize
    if len(raw) % item:
        raise ValidationError(f"{path}: size {len(raw)} is not a multiple of {item} bytes")
    return np.frombuffer(raw, dtype=dtype).reshape((-1,) + tuple(tail)).copy()


def _layout(args, take=None):
    if getattr(args, "layout", None):
        return InsoleLayout.from_json(args.layout)
    if take is not None and take.layout is not None:
        return take.layout
    return InsoleLayout.default()


def _vgrf_source(path, rate):
    p = Path(path)
    if p.suffix == ".f32":
        return VgrfSequence(_read_blob(p, "<f4", (2, 16)).astype(np.float64), rate), None
    take = load_take(p)
    if take.vgrf is None:
        raise ValidationError(f"{p}: take has no vGRF")
    return take.vgrf, take


def _contact_source(path, rate, layout, params):
    p = Path(path)
    if p.suffix == ".u8":
        return ContactSequence(_read_blob(p, "u1", (2, 2)), rate)
    if p.suffix == ".f32":
        vg, _ = _vgrf_source(p, rate)
        return contact_labels(vg, layout, params)
    take = load_take(p)
    if take.contacts is None:
        raise ValidationError(f"{p}: take has no contacts")
    return take.contacts


def _contact_params(args):
    return ContactParams(args.sigma_s, args.raw_bw, args.gate_bw, args.min_phase_s)


def _write_blob(path, arr, dtype):
    Path(path).write_bytes(np.ascontiguousarray(arr, dtype=dtype).tobytes())


# -- commands ----------------------------------------------------------------------

def cmd_synth(args, outs):
    rng = np.random.default_rng(args.seed)
    out = outs.add(args.out)
    remaining, k = args.minutes * 60.0, 0
    while remaining > 1e-9:
        dur = min(args.take_seconds, remaining)
        if dur < 20.0 and k:
            break
        cfg = random_gait_config(rng, duration_s=dur, rate_hz=args.rate, subject_id=f"S{k:03d}",
                                 jump_markers=args.jump_markers)
        if args.jump_markers:
            off = int(rng.integers(-args.max_offset, args.max_offset + 1))
            take = generate_unsynchronized(cfg, off)
        else:
            take = generate_gait(cfg)
        save_take(take, out / f"take_{k:03d}")
        log.info("wrote %s (%.1f s)", out / f"take_{k:03d}", dur)
        remaining -= dur
        k += 1


def cmd_sync(args, outs):
    take = load_take(args.take)
    synced, est = synchronize(take, args.max_lag_s)
    if est.low_confidence:
        log.warning("low correlation peak %.3f; the offset may be wrong", est.peak)
    save_take(synced, outs.add(args.out))
    log.info("offset %d samples (peak %.3f)", int(est), est.peak)


def cmd_label(args, outs):
    take = load_take(args.take)
    if take.vgrf is None:
        raise ValidationError("take has no vGRF")
    lab = contact_labels(take.vgrf, _layout(args, take), _contact_params(args))
    out = outs.add(args.out)
    if out.suffix == ".u8":
        _write_blob(out, lab.labels, "u1")
    else:
        save_take(take.replace(contacts=lab), out)


def cmd_ot(args, outs):
    if args.ot_cmd == "fit":
        takes = _load_takes(args.data)
        thr, f, hist = fit_ot(takes, OtSearch(grid=args.grid, levels=args.levels))
        save_thresholds(thr, outs.add(args.out))
        log.info("fitted %s, F1 %.4f", thr, f)
        return
    thr = load_thresholds(args.thresholds)
    take = load_take(args.take)
    lab = apply_ot(take.poses, take.skeleton, thr)
    out = outs.add(args.out)
    if out.suffix == ".u8":
        _write_blob(out, lab.labels, "u1")
    else:
        save_take(take.replace(contacts=lab), out)


def cmd_train(args, outs):
    takes = _load_takes(args.data)
    if any(not t.synchronized for t in takes):
        raise ValidationError("train needs synchronized takes; run sync first")
    cfg = ModelConfig(variant=args.variant, n_joints=takes[0].skeleton.n_joints,
                      width_scale=args.width_scale, dropout_p=args.dropout,
                      foot_joints=tuple(int(j) for j in takes[0].skeleton.foot_joints.ravel()),
                      rate_hz=takes[0].rate_hz)
    opt = OptimizerConfig(args.lr, batch_size=args.batch_size)
    aug = AugmentConfig(window=args.window, stride=args.stride)
    out = outs.add(args.out)
    hist_path = outs.add(args.history) if args.history else None
    if args.epochs == 0:
        save_model(build_model(cfg, np.random.default_rng([args.seed, 1])), out)
        return
    model, hist = train_model(takes, cfg, opt, aug, args.epochs, args.patience, args.seed,
                              args.val_split, hist_path, args.steps_per_epoch)
    save_model(model, out)
    log.info("best epoch %d, validation loss %.5f", hist.best_epoch, hist.best_val)


def cmd_estimate(args, outs):
    model = load_model(args.model)
    take = load_take(args.take)
    out = outs.add(args.out)
    if out.suffix == ".u8" or "vgrf" not in model.config.outputs:
        lab = estimate_contacts(model, take.poses, _layout(args, take))
        _write_blob(out, lab.labels, "u1")
    else:
        _write_blob(out, estimate_vgrf(model, take.poses).values, "<f4")


def _pairs(args):
    if len(args.pred) != len(args.truth):
        raise ValidationError("--pred and --truth need the same number of entries")
    return list(zip(args.pred, args.truth))


def cmd_eval(args, outs):
    layout = _layout(args)
    params = _contact_params(args)
    rows = []
    if args.eval_cmd == "contacts":
        items, ps, ts = [], [], []
        for p, t in _pairs(args):
            truth = _contact_source(t, args.rate, layout, params)
            pred = _contact_source(p, truth.rate_hz, layout, params)
            items.append((str(p), pred, truth))
            ps.append(pred.labels)
            ts.append(truth.labels)
        rows = contact_report(items, args.tolerance_max)
        if args.bins:
            prof = offcontact_fp_profile(np.concatenate(ps), np.concatenate(ts), args.bins)
            for r in rows:
                if r["take"] == "ALL":
                    r.update({f"fp_bin{i}": float(v) for i, v in enumerate(prof)})
    elif args.eval_cmd in ("vgrf", "cop"):
        items = []
        for p, t in _pairs(args):
            truth, _ = _vgrf_source(t, args.rate)
            pred, _ = _vgrf_source(p, truth.rate_hz)
            items.append((str(p), pred, truth))
        if args.eval_cmd == "vgrf":
            rows = vgrf_report(items, layout, args.gate_bw)
        else:
            for name, pred, truth in items:
                mad = cop_mad(pred, truth, layout, args.gate_bw)
                rows.append({"take": name, "cop_mad_left_mm": mad[0], "cop_mad_right_mm": mad[1]})
    else:
        for p, t in _pairs(args):
            take = load_take(p)
            truth = _contact_source(t, take.rate_hz, layout, params)
            rows.append({"take": str(p),
                         "footskate_mps": footskate(take.poses, truth, take.skeleton)})
    write_report(rows, outs.add(args.out))


def cmd_perturb(args, outs):
    out = outs.add(args.out)
    if args.perturb_cmd == "noise":
        take = load_take(args.take)
        rng = np.random.default_rng(args.seed)
        save_take(take.replace(poses=add_noise(take.poses, args.sigma_m, rng), local_motion=None,
                               attrs={**take.attrs, "noise_sigma_m": args.sigma_m}), out)
        return
    takes = _load_takes(args.data)
    for t in takes:
        if t.local_motion is None or t.contacts is None:
            raise ValidationError("blend needs takes with local motion and contacts")
        if len(t.local_motion) != len(t.contacts):
            raise ValidationError("blend needs synchronized takes")
    pairs = mine_blend_pairs([t.contacts for t in takes], args.window, args.stride)
    pairs = [p for p in pairs if p.a[0] != p.b[0]] or pairs
    if not pairs:
        raise ValidationError("no window pairs with a shared contact pattern")
    rng = np.random.default_rng(args.seed)
    pick = rng.choice(len(pairs), size=min(args.count, len(pairs)), replace=False)
    w = args.window
    for n, i in enumerate(sorted(pick)):
        p = pairs[i]
        (ta, sa), (tb, sb) = p.a, p.b
        A, B = takes[ta], takes[tb]
        ma = A.local_motion.slice(sa, sa + w)
        mb = align_to(B.local_motion.slice(sb, sb + w), ma)
        m = blend(ma, mb)
        c = blend_contacts(A.contacts.slice(sa, sa + w), B.contacts.slice(sb, sb + w), p.foot)
        take = Take(skeleton=A.skeleton, poses=forward_kinematics(A.skeleton, m), meta=A.meta,
                    local_motion=m, contacts=c, layout=A.layout,
                    attrs={"blend": {"a": list(p.a), "b": list(p.b), "foot": p.foot}})
        save_take(take, out / f"blend_{n:03d}")


def _weights(args):
    kw = {}
    for item in args.weights or []:
        k, _, v = item.partition("=")
        if k not in IkWeights.__dataclass_fields__:
            raise ValidationError(f"unknown IK weight {k!r}")
        kw[k] = int(v) if k == "iterations" else float(v)
    return IkWeights(**kw)


def cmd_cleanup(args, outs):
    take = load_take(args.take)
    if take.local_motion is None:
        raise ValidationError("cleanup needs a take with local motion")
    if len(take.local_motion) != len(take.poses) or take.local_motion.rate_hz != take.rate_hz:
        raise ValidationError("cleanup needs local motion at the pose rate")
    weights = _weights(args)
    params = _contact_params(args)
    if args.model:
        model = load_model(args.model)
        fixed, report = cleanup_pipeline(take.local_motion, take.skeleton, model,
                                         _layout(args, take), params, weights)
    else:
        if take.contacts is None:
            raise ValidationError("cleanup without --model needs contacts in the take")
        fixed, report = cleanup_pipeline(take.local_motion, take.skeleton, contacts=take.contacts,
                                         weights=weights, params=params)
    out = outs.add(args.out)
    save_take(take.replace(local_motion=fixed, poses=forward_kinematics(take.skeleton, fixed),
                           attrs={**take.attrs, "cleanup": report}), out)
    write_cleanup_report(report, out / "cleanup_report.json")


# -- parser ------------------------------------------------------------------------

def _contact_flags(p):
    d = ContactParams()
    p.add_argument("--sigma-s", type=float, default=d.smooth_sigma_s, help="smoothing std (s)")
    p.add_argument("--raw-bw", type=float, default=d.raw_threshold_bw,
                   help="per-location threshold (BW)")
    p.add_argument("--gate-bw", type=float, default=d.gate_threshold_bw, help="per-foot gate (BW)")
    p.add_argument("--min-phase-s", type=float, default=d.min_phase_s, help="shortest phase kept (s)")
    p.add_argument("--layout", help="insole layout JSON (default: built-in layout)")


def build_parser():
    ap = argparse.ArgumentParser(prog="footforce", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("synth", help="generate synthetic gait takes")
    p.add_argument("--minutes", type=float, default=1.0)
    p.add_argument("--rate", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jump-markers", action="store_true",
                   help="add control jumps and write unsynchronized 240 Hz captures")
    p.add_argument("--max-offset", type=int, default=200, help="largest injected offset (samples)")
    p.add_argument("--take-seconds", type=float, default=60.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sync", help="align insole and motion capture data")
    p.add_argument("--take", required=True)
    p.add_argument("--max-lag-s", type=float, default=3.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sync)

    p = sub.add_parser("label", help="contact labels from vGRF")
    p.add_argument("--take", required=True)
    _contact_flags(p)
    p.add_argument("--out", required=True, help="take directory or .u8 label file")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("ot", help="optimal-thresholds baseline")
    osub = p.add_subparsers(dest="ot_cmd", required=True)
    q = osub.add_parser("fit")
    q.add_argument("--data", nargs="+", required=True)
    q.add_argument("--grid", type=int, default=17)
    q.add_argument("--levels", type=int, default=3)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_ot)
    q = osub.add_parser("apply")
    q.add_argument("--thresholds", required=True)
    q.add_argument("--take", required=True)
    q.add_argument("--out", required=True, help="take directory or .u8 label file")
    q.set_defaults(func=cmd_ot)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--variant", default="vgrf",
                   choices=["vgrf", "contact", "dual", "mlp3", "linear", "linear-feet"])
    p.add_argument("--width-scale", type=float, default=1.0)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--steps-per-epoch", type=int, default=None)
    p.add_argument("--lr", type=float, default=3e-5)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--window", type=int, default=240)
    p.add_argument("--stride", type=int, default=60)
    p.add_argument("--val-split", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--history", help="CSV of per-epoch losses")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("estimate", help="run a model on a take")
    p.add_argument("--model", required=True)
    p.add_argument("--take", required=True)
    p.add_argument("--layout")
    p.add_argument("--out", required=True, help=".f32 vGRF or .u8 contacts")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("eval", help="evaluation reports")
    esub = p.add_subparsers(dest="eval_cmd", required=True)
    for name in ("contacts", "vgrf", "cop", "footskate"):
        q = esub.add_parser(name)
        q.add_argument("--pred", nargs="+", required=True)
        q.add_argument("--truth", nargs="+", required=True)
        q.add_argument("--rate", type=float, default=100.0, help="rate of bare .f32/.u8 files")
        q.add_argument("--tolerance-max", type=int, default=10)
        q.add_argument("--bins", type=int, default=0)
        _contact_flags(q)
        q.add_argument("--out", required=True, help=".csv or .json")
        q.set_defaults(func=cmd_eval)

    p = sub.add_parser("perturb", help="perturbed motions")
    psub = p.add_subparsers(dest="perturb_cmd", required=True)
    q = psub.add_parser("noise")
    q.add_argument("--take", required=True)
    q.add_argument("--sigma-m", type=float, required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_perturb)
    q = psub.add_parser("blend")
    q.add_argument("--data", nargs="+", required=True)
    q.add_argument("--window", type=int, default=80)
    q.add_argument("--stride", type=int, default=10)
    q.add_argument("--count", type=int, default=50)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_perturb)

    p = sub.add_parser("cleanup", help="remove footskate with IK")
    p.add_argument("--model", help="vGRF model; without it the take's contacts are used")
    p.add_argument("--take", required=True)
    p.add_argument("--weights", nargs="*", metavar="KEY=VALUE",
                   help="IK settings, e.g. w_constraint=100 iterations=500")
    _contact_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cleanup)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    outs = _Outputs()
    try:
        args.func(args, outs)
    except ValidationError as e:
        outs.remove()
        log.error("%s", e)
        return EXIT_VALIDATION
    except OSError as e:
        outs.remove()
        log.error("%s", e)
        return EXIT_IO
    except BaseException:
        outs.remove()
        raise
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
