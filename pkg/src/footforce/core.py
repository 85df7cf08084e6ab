"""Domain types and the on-disk take container.

Conventions used throughout the package: meters, seconds, Y-up with the
ground plane at y = 0, pressure in N/cm^2, vGRF as a fraction of body weight,
quaternions (w, x, y, z) local to the parent joint. Foot axis order is
(left, right); contact location order is (heel, toe).

A take directory holds ``meta.json`` plus one raw little-endian blob per
array (``.f32`` for float32, ``.u8`` for labels).
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

FORMAT = "footforce.take"
FORMAT_VERSION = 1
GRAVITY = 9.81
N_CELLS = 16
QUAT_NORM_TOL = 1e-6


class ValidationError(ValueError):
    """Raised when data violates a documented invariant."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


# -- types -------------------------------------------------------------------

JOINT_NAMES = (
    "Pelvis", "L5", "L3", "T12", "T8", "Neck", "Head",
    "RightShoulder", "RightUpperArm", "RightForeArm", "RightHand",
    "LeftShoulder", "LeftUpperArm", "LeftForeArm", "LeftHand",
    "RightUpperLeg", "RightLowerLeg", "RightFoot", "RightToe",
    "LeftUpperLeg", "LeftLowerLeg", "LeftFoot", "LeftToe",
)
JOINT_PARENTS = (-1, 0, 1, 2, 3, 4, 5, 4, 7, 8, 9, 4, 11, 12, 13, 0, 15, 16, 17, 0, 19, 20, 21)


@dataclass(frozen=True, eq=False)
class Skeleton:
    parent: np.ndarray
    offset: np.ndarray
    names: tuple
    foot_joints: np.ndarray  # (2, 2): [[L ankle, L toe], [R ankle, R toe]]

    def __post_init__(self):
        object.__setattr__(self, "parent", np.asarray(self.parent, dtype=np.int64))
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=np.float64))
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "foot_joints", np.asarray(self.foot_joints, dtype=np.int64).reshape(2, 2))

    @property
    def n_joints(self):
        return len(self.parent)

    def with_offsets(self, offset):
        return replace(self, offset=np.asarray(offset, dtype=np.float64))

    def index(self, name):
        return self.names.index(name)


def humanoid_skeleton(height_m=1.75, leg_ratio=1.0, hip_width=0.09, foot_length=0.15):
    """The reduced 23-joint humanoid used by the generator and the tests.

    Leg bones are vertical and the foot bone points forward (+z) in the rest
    pose, so the ankle and toe joints of a flat foot share the same height.
    """
    s = height_m / 1.75
    leg = 0.43 * s * leg_ratio
    off = {
        "Pelvis": (0, 0, 0),
        "L5": (0, 0.10 * s, 0), "L3": (0, 0.10 * s, 0), "T12": (0, 0.10 * s, 0),
        "T8": (0, 0.10 * s, 0), "Neck": (0, 0.20 * s, 0), "Head": (0, 0.10 * s, 0),
        "RightShoulder": (-0.04 * s, 0.15 * s, 0), "RightUpperArm": (-0.13 * s, 0, 0),
        "RightForeArm": (0, -0.28 * s, 0), "RightHand": (0, -0.25 * s, 0),
        "LeftShoulder": (0.04 * s, 0.15 * s, 0), "LeftUpperArm": (0.13 * s, 0, 0),
        "LeftForeArm": (0, -0.28 * s, 0), "LeftHand": (0, -0.25 * s, 0),
        "RightUpperLeg": (-hip_width * s, -0.02 * s, 0), "RightLowerLeg": (0, -leg, 0),
        "RightFoot": (0, -leg * 0.98, 0), "RightToe": (0, 0, foot_length * s),
        "LeftUpperLeg": (hip_width * s, -0.02 * s, 0), "LeftLowerLeg": (0, -leg, 0),
        "LeftFoot": (0, -leg * 0.98, 0), "LeftToe": (0, 0, foot_length * s),
    }
    offsets = np.array([off[n] for n in JOINT_NAMES], dtype=np.float64)
    feet = [[JOINT_NAMES.index("LeftFoot"), JOINT_NAMES.index("LeftToe")],
            [JOINT_NAMES.index("RightFoot"), JOINT_NAMES.index("RightToe")]]
    return Skeleton(JOINT_PARENTS, offsets, JOINT_NAMES, feet)


@dataclass(frozen=True, eq=False)
class LocalMotion:
    root_translation: np.ndarray  # (T, 3)
    rotations: np.ndarray  # (T, J, 4)
    rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "root_translation", np.asarray(self.root_translation))
        object.__setattr__(self, "rotations", np.asarray(self.rotations))
        object.__setattr__(self, "rate_hz", float(self.rate_hz))

    def __len__(self):
        return self.rotations.shape[0]

    def slice(self, start, stop):
        return LocalMotion(self.root_translation[start:stop], self.rotations[start:stop], self.rate_hz)


@dataclass(frozen=True, eq=False)
class PoseSequence:
    positions: np.ndarray  # (T, J, 3)
    rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions))
        object.__setattr__(self, "rate_hz", float(self.rate_hz))

    def __len__(self):
        return self.positions.shape[0]

    def slice(self, start, stop):
        return PoseSequence(self.positions[start:stop], self.rate_hz)


@dataclass(frozen=True, eq=False)
class PressureSequence:
    values: np.ndarray  # (T, 2, 16), N/cm^2
    rate_hz: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values))
        object.__setattr__(self, "rate_hz", float(self.rate_hz))

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class VgrfSequence:
    values: np.ndarray  # (T, 2, 16), body-weight fraction
    rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values))
        object.__setattr__(self, "rate_hz", float(self.rate_hz))

    def __len__(self):
        return self.values.shape[0]

    def slice(self, start, stop):
        return VgrfSequence(self.values[start:stop], self.rate_hz)


@dataclass(frozen=True, eq=False)
class ContactSequence:
    labels: np.ndarray  # (T, 2, 2) uint8: (frame, foot L/R, heel/toe)
    rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.uint8))
        object.__setattr__(self, "rate_hz", float(self.rate_hz))

    def __len__(self):
        return self.labels.shape[0]

    def slice(self, start, stop):
        return ContactSequence(self.labels[start:stop], self.rate_hz)


@dataclass(frozen=True)
class SubjectMeta:
    weight_kg: float
    height_m: float
    id: str = "S0"


GROUPS = ("heel", "toe", "gray")


@dataclass(frozen=True, eq=False)
class InsoleLayout:
    """Geometry of the 16 pressure cells of each insole.

    ``position`` is (2, 16, 2): per foot, per cell, (lateral, forward) meters
    in the foot frame with the origin at the rear of the heel. Lateral is
    positive towards the outside of each foot, so the two feet share one
    cell numbering.
    """

    area_cm2: np.ndarray  # (16,)
    position: np.ndarray  # (2, 16, 2)
    group: tuple  # 16 entries in GROUPS

    def __post_init__(self):
        object.__setattr__(self, "area_cm2", np.asarray(self.area_cm2, dtype=np.float64))
        pos = np.asarray(self.position, dtype=np.float64)
        if pos.ndim == 2:
            pos = np.stack([pos, pos])
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "group", tuple(self.group))

    def mask(self, name):
        return np.array([g == name for g in self.group])

    @classmethod
    def default(cls):
        """Approximate 16-cell layout on a 0.25 m foot outline.

        The real insole geometry is only published as a figure; these cell
        centres and areas are a hand-made approximation: 4 heel cells at the
        rear, 4 gray midfoot cells, 8 toe/forefoot cells at the front.
        """
        heel = [(-0.015, 0.025), (0.015, 0.025), (-0.015, 0.055), (0.015, 0.055)]
        gray = [(-0.02, 0.095), (0.02, 0.095), (-0.02, 0.125), (0.025, 0.125)]
        toe = [(-0.03, 0.16), (0.0, 0.16), (0.03, 0.16), (-0.03, 0.19), (0.0, 0.19),
               (0.035, 0.19), (-0.025, 0.225), (0.015, 0.225)]
        position = np.array(heel + gray + toe)
        area = np.array([6.5, 6.5, 6.0, 6.0, 5.0, 5.0, 5.0, 5.0,
                         4.5, 4.5, 4.5, 4.5, 4.5, 4.5, 5.5, 4.0])
        group = ("heel",) * 4 + ("gray",) * 4 + ("toe",) * 8
        return cls(area, position, group)

    def to_dict(self):
        return {"area_cm2": self.area_cm2.tolist(), "position": self.position.tolist(),
                "group": list(self.group)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["area_cm2"], d["position"], d["group"])

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True, eq=False)
class Take:
    skeleton: Skeleton
    poses: PoseSequence
    meta: SubjectMeta
    local_motion: LocalMotion | None = None
    pressure: PressureSequence | None = None
    vgrf: VgrfSequence | None = None
    contacts: ContactSequence | None = None
    imu_accel: np.ndarray | None = None  # (T, 2, 3) m/s^2 at the insole rate
    layout: InsoleLayout | None = None
    poses_original: PoseSequence | None = None  # capture-rate poses kept alongside
    synchronized: bool = True
    attrs: dict = field(default_factory=dict)

    @property
    def rate_hz(self):
        return self.poses.rate_hz

    @property
    def insole_rate_hz(self):
        for s in (self.vgrf, self.pressure):
            if s is not None:
                return s.rate_hz
        return self.poses.rate_hz

    def __len__(self):
        return len(self.poses)

    def replace(self, **kw):
        return replace(self, **kw)


# -- validation --------------------------------------------------------------

def validate_skeleton(sk):
    out = []
    J = len(sk.parent)
    if sk.offset.shape != (J, 3):
        out.append(f"skeleton: offset shape {sk.offset.shape} != ({J}, 3)")
    if len(sk.names) != J:
        out.append(f"skeleton: {len(sk.names)} names for {J} joints")
    roots = np.flatnonzero(sk.parent < 0)
    if len(roots) != 1 or (J and sk.parent[0] != -1):
        out.append(f"skeleton: expected exactly one root at index 0, got {roots.tolist()}")
    for i in range(1, J):
        if not (0 <= sk.parent[i] < i):
            out.append(f"skeleton: joint {i} parent {sk.parent[i]} is not topologically ordered")
    if sk.offset.size and not np.all(np.isfinite(sk.offset)):
        out.append("skeleton: non-finite offsets")
    fj = sk.foot_joints.ravel()
    if len(set(fj.tolist())) != 4 or np.any(fj < 0) or np.any(fj >= J):
        out.append(f"skeleton: foot_joints {fj.tolist()} must be four distinct valid joints")
    return out


def validate_layout(layout):
    out = []
    a = layout.area_cm2
    if a.shape != (N_CELLS,):
        out.append(f"layout: expected {N_CELLS} cell areas, got {a.shape}")
    else:
        for c in np.flatnonzero(~(a > 0)):
            out.append(f"layout: cell {c} has non-positive area {a[c]}")
    if layout.position.shape != (2, N_CELLS, 2):
        out.append(f"layout: position shape {layout.position.shape} != (2, {N_CELLS}, 2)")
    if len(layout.group) != N_CELLS or any(g not in GROUPS for g in layout.group):
        out.append("layout: group must list heel/toe/gray for each of 16 cells")
    for g in ("heel", "toe"):
        if g not in layout.group:
            out.append(f"layout: {g} group is empty")
    return out


def _check_series(name, arr, tail, out, nonneg=False):
    if arr.ndim != 1 + len(tail) or arr.shape[1:] != tail:
        out.append(f"{name}: shape {arr.shape} does not end with {tail}")
        return
    if arr.shape[0] < 1:
        out.append(f"{name}: no frames")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        out.append(f"{name}: non-finite value at index {tuple(bad.tolist())}")
    elif nonneg and np.any(arr < 0):
        bad = np.argwhere(arr < 0)[0]
        out.append(f"{name}: negative value at index {tuple(bad.tolist())}")


def validate_take(take, max_items=10):
    """List the invariants the take violates; empty when valid."""
    out = validate_skeleton(take.skeleton)
    J = take.skeleton.n_joints
    m = take.meta
    if not (20 <= m.weight_kg <= 300):
        out.append(f"meta: weight_kg {m.weight_kg} outside [20, 300]")
    if not (1.0 <= m.height_m <= 2.5):
        out.append(f"meta: height_m {m.height_m} outside [1.0, 2.5]")

    _check_series("poses", take.poses.positions, (J, 3), out)
    if take.poses_original is not None:
        _check_series("poses_original", take.poses_original.positions, (J, 3), out)
    lm = take.local_motion
    if lm is not None:
        _check_series("local_motion.rotations", lm.rotations, (J, 4), out)
        _check_series("local_motion.root_translation", lm.root_translation, (3,), out)
        if lm.rotations.ndim == 3 and lm.rotations.shape[1:] == (J, 4):
            norms = np.linalg.norm(lm.rotations.astype(np.float64), axis=-1)
            bad = np.argwhere(np.abs(norms - 1.0) > QUAT_NORM_TOL)
            for t, j in bad[:max_items]:
                out.append(f"local_motion: quaternion norm {norms[t, j]:.6f} at frame {t}, joint {j}")
            if len(bad) > max_items:
                out.append(f"local_motion: {len(bad) - max_items} more non-unit quaternions")
        if len(lm.root_translation) != len(lm.rotations):
            out.append("local_motion: root_translation and rotations differ in length")
    if take.pressure is not None:
        _check_series("pressure", take.pressure.values, (2, N_CELLS), out, nonneg=True)
    if take.vgrf is not None:
        _check_series("vgrf", take.vgrf.values, (2, N_CELLS), out, nonneg=True)
    if take.contacts is not None:
        lab = take.contacts.labels
        _check_series("contacts", lab, (2, 2), out)
        if lab.size and lab.max() > 1:
            out.append("contacts: labels must be 0 or 1")
    if take.imu_accel is not None:
        _check_series("imu_accel", np.asarray(take.imu_accel), (2, 3), out)
    if take.layout is not None:
        out.extend(validate_layout(take.layout))

    rated = [("poses", take.poses)]
    for name in ("local_motion", "pressure", "vgrf", "contacts"):
        s = getattr(take, name)
        if s is not None:
            rated.append((name, s))
    for name, s in rated:
        if not s.rate_hz > 0:
            out.append(f"{name}: rate_hz must be positive")
    if take.synchronized:
        T = len(take.poses)
        for name, s in rated:
            if len(s) != T:
                out.append(f"{name}: {len(s)} frames but poses has {T} (synchronized take)")
            if s.rate_hz != take.poses.rate_hz:
                out.append(f"{name}: rate {s.rate_hz} Hz differs from poses {take.poses.rate_hz} Hz")
        if take.imu_accel is not None and len(take.imu_accel) != T:
            out.append(f"imu_accel: {len(take.imu_accel)} frames but poses has {T} (synchronized take)")
    else:
        ins = [s for s in (take.pressure, take.vgrf, take.contacts) if s is not None]
        for s in ins[1:]:
            if len(s) != len(ins[0]) or s.rate_hz != ins[0].rate_hz:
                out.append("insole series disagree in length or rate")
    return out


def check_take(take):
    problems = validate_take(take)
    if problems:
        raise ValidationError(problems)


# -- container ---------------------------------------------------------------

_F32 = np.dtype("<f4")
_U8 = np.dtype("u1")


def _arrays_of(take):
    """(name, array, dtype, rate, units) for every array the take carries."""
    items = [("skeleton_offset", take.skeleton.offset, _F32, None, "m"),
             ("poses", take.poses.positions, _F32, take.poses.rate_hz, "m")]
    if take.poses_original is not None:
        items.append(("poses_original", take.poses_original.positions, _F32,
                      take.poses_original.rate_hz, "m"))
    lm = take.local_motion
    if lm is not None:
        items.append(("root_translation", lm.root_translation, _F32, lm.rate_hz, "m"))
        items.append(("rotations", lm.rotations, _F32, lm.rate_hz, "quaternion wxyz"))
    if take.pressure is not None:
        items.append(("pressure", take.pressure.values, _F32, take.pressure.rate_hz, "N/cm^2"))
    if take.vgrf is not None:
        items.append(("vgrf", take.vgrf.values, _F32, take.vgrf.rate_hz, "body weight"))
    if take.contacts is not None:
        items.append(("contacts", take.contacts.labels, _U8, take.contacts.rate_hz, "binary"))
    if take.imu_accel is not None:
        items.append(("imu_accel", take.imu_accel, _F32, take.insole_rate_hz, "m/s^2"))
    return items


def save_take(take, path):
    """Write ``take`` to directory ``path`` (created if needed)."""
    check_take(take)
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    arrays = {}
    for name, arr, dtype, rate, units in _arrays_of(take):
        ext = ".u8" if dtype == _U8 else ".f32"
        data = np.ascontiguousarray(np.asarray(arr), dtype=dtype)
        (path / (name + ext)).write_bytes(data.tobytes(order="C"))
        arrays[name] = {"file": name + ext, "dtype": dtype.str, "shape": list(data.shape),
                        "rate_hz": rate, "units": units}
    sk = take.skeleton
    meta = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "synchronized": bool(take.synchronized),
        "subject": {"id": take.meta.id, "weight_kg": take.meta.weight_kg,
                    "height_m": take.meta.height_m},
        "skeleton": {"names": list(sk.names), "parent": sk.parent.tolist(),
                     "foot_joints": sk.foot_joints.tolist()},
        "layout": take.layout.to_dict() if take.layout is not None else None,
        "arrays": arrays,
        "fields": sorted(arrays),
        "attrs": take.attrs,
        "conventions": {"up_axis": "y", "ground_y": 0.0, "byte_order": "little",
                        "quaternion": "wxyz local-to-parent", "layout": "row-major"},
    }
    tmp = path / "meta.json.tmp"
    tmp.write_text(json.dumps(meta, indent=1, sort_keys=True), encoding="utf-8")
    os.replace(tmp, path / "meta.json")


def _read_array(path, spec):
    fp = Path(path) / spec["file"]
    if not fp.exists():
        raise FileNotFoundError(f"missing array file {fp}")
    dtype = np.dtype(spec["dtype"])
    shape = tuple(spec["shape"])
    raw = fp.read_bytes()
    expected = int(np.prod(shape)) * dtype.itemsize
    if len(raw) != expected:
        raise ValidationError(f"{spec['file']}: {len(raw)} bytes, meta.json shape {list(shape)} "
                              f"needs {expected}")
    arr = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    if dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise ValidationError(f"{spec['file']}: non-finite values")
    return arr


def load_take(path):
    path = Path(path)
    mp = path / "meta.json"
    if not mp.exists():
        raise FileNotFoundError(f"missing {mp}")
    meta = json.loads(mp.read_text(encoding="utf-8"))
    if meta.get("format") != FORMAT:
        raise ValidationError(f"{mp}: not a take container")
    specs = meta["arrays"]
    a = {name: _read_array(path, spec) for name, spec in specs.items()}
    rate = {name: spec["rate_hz"] for name, spec in specs.items()}
    sk = meta["skeleton"]
    skeleton = Skeleton(sk["parent"], a["skeleton_offset"], sk["names"], sk["foot_joints"])
    subj = meta["subject"]
    kw = {}
    if "root_translation" in a:
        kw["local_motion"] = LocalMotion(a["root_translation"], a["rotations"], rate["rotations"])
    if "pressure" in a:
        kw["pressure"] = PressureSequence(a["pressure"], rate["pressure"])
    if "vgrf" in a:
        kw["vgrf"] = VgrfSequence(a["vgrf"], rate["vgrf"])
    if "contacts" in a:
        kw["contacts"] = ContactSequence(a["contacts"], rate["contacts"])
    if "imu_accel" in a:
        kw["imu_accel"] = a["imu_accel"]
    if "poses_original" in a:
        kw["poses_original"] = PoseSequence(a["poses_original"], rate["poses_original"])
    if meta.get("layout"):
        kw["layout"] = InsoleLayout.from_dict(meta["layout"])
    take = Take(skeleton=skeleton, poses=PoseSequence(a["poses"], rate["poses"]),
                meta=SubjectMeta(subj["weight_kg"], subj["height_m"], subj["id"]),
                synchronized=meta["synchronized"], attrs=meta.get("attrs") or {}, **kw)
    check_take(take)
    return take


def body_weight_newtons(meta):
    return meta.weight_kg * GRAVITY


def ceil_frames(seconds, rate_hz):
    """Number of frames covering ``seconds``, robust to float noise."""
    return int(math.ceil(round(seconds * rate_hz, 9)))
