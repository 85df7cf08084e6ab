"""Procedural gait generator.

Produces takes whose poses, per-cell vGRF and contact labels agree by
construction. The character walks on a circle (or a straight line) so long
takes stay near the origin. Each foot alternates stance and swing on a fixed
schedule; within a stance the heel (ankle joint) is pinned on the ground
first, the foot rolls flat, then pivots on the pinned toe until toe-off. The
ankle joint doubles as the heel contact point, so pinned joints sit exactly
at y = 0.

The vGRF profile is synthetic: a double hump per stance shifting from heel
cells to toe cells. Linear ramps put every label transition exactly where
the unsmoothed forces cross the contact thresholds.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import quaternion as quat
from .core import (ContactSequence, InsoleLayout, LocalMotion, PoseSequence, SubjectMeta,
                   Take, ValidationError, VgrfSequence, humanoid_skeleton)
from .grf import vgrf_to_pressure
from .kinematics import forward_kinematics_full

GRAVITY = 9.81
UP = np.array([0.0, 1.0, 0.0])

EDGE_BW = 0.2  # force step at contact edges; smoothing halves it to the gate
EDGE_S = 0.08  # flat stretch after/before the step keeps the halving exact
VALLEY_FILL = 0.55
GATE_BW = 0.10
RAW_BW = 0.05
HEEL_OFF = 0.65  # fraction of the contact interval with heel contact
TOE_ON = 0.2
STRIKE_PITCH = 0.45  # rad, toe up at heel strike
TOEOFF_PITCH = 1.0  # rad, heel up at toe-off
JUMP_AT_S = 3.0  # first take-off; the last landing is this far from the end
FLIGHT_S = 0.45
# standing gaps between consecutive hops; all distinct so that no hop lines
# up with another one under a wrong lag
HOP_GAPS_START = (0.5, 0.8)
HOP_GAPS_END = (0.65, 0.95)
JUMP_HOPS = len(HOP_GAPS_START) + 1
SETTLE_S = 1.5
JUMP_BLOCK_S = (JUMP_AT_S + JUMP_HOPS * FLIGHT_S + max(sum(HOP_GAPS_START), sum(HOP_GAPS_END))
                + SETTLE_S)
BLUR_TOE_ON_S = 0.005
BLUR_HEEL_OFF_S = 0.005


@dataclass(frozen=True)
class GaitConfig:
    duration_s: float = 60.0
    rate_hz: float = 100.0
    speed_mps: float = 1.1
    cycle_s: float = 1.05
    duty_factor: float = 0.6
    weight_kg: float = 75.0
    height_m: float = 1.75
    leg_ratio: float = 1.0
    jump_markers: bool = False
    seed: int = 0
    path_radius_m: float | None = 4.0  # None walks a straight line
    turn: int = 1
    arm_swing: float = 0.35
    trunk_lean: float = 0.06
    step_height: float = 0.08
    pelvis_bob: float = 0.02
    phase_s: float = 0.0
    subject_id: str = "S0"

    def validate(self):
        problems = []
        if not 0 < self.duty_factor < 1:
            problems.append("duty_factor must be in (0, 1)")
        if self.duration_s < 2 * self.cycle_s:
            problems.append("duration must cover at least two gait cycles")
        if self.jump_markers and self.duration_s < 2 * JUMP_BLOCK_S + 2 * self.cycle_s:
            problems.append(f"jump markers need duration >= {2 * JUMP_BLOCK_S + 2 * self.cycle_s:.1f} s")
        if self.rate_hz <= 0 or self.cycle_s <= 0 or self.speed_mps < 0:
            problems.append("rate, cycle and speed must be positive")
        if (self.duty_factor * self.cycle_s) < 2 * EDGE_S + 0.2:
            problems.append("stance too short for the load ramps")
        if problems:
            raise ValidationError(problems)


def random_gait_config(rng, **overrides):
    """A plausible randomized walker; ``overrides`` win over sampled values."""
    height = rng.uniform(1.62, 1.9)
    leg_ratio = rng.uniform(0.96, 1.04)
    speed = rng.uniform(0.85, 1.3)
    cycle = rng.uniform(0.95, 1.15)
    # stride length beyond ~1.4 leg lengths forces deep crouching
    leg = 0.85 * height / 1.75 * leg_ratio
    cycle = min(cycle, 1.4 * leg / speed)
    kw = dict(
        speed_mps=speed, cycle_s=cycle, duty_factor=rng.uniform(0.58, 0.65),
        weight_kg=rng.uniform(60.0, 95.0), height_m=height,
        leg_ratio=leg_ratio, path_radius_m=rng.uniform(3.0, 5.0),
        turn=int(rng.choice([-1, 1])), arm_swing=rng.uniform(0.2, 0.5),
        trunk_lean=rng.uniform(0.0, 0.12), step_height=rng.uniform(0.06, 0.11),
        pelvis_bob=rng.uniform(0.01, 0.03), phase_s=rng.uniform(0.0, cycle),
        seed=int(rng.integers(2**31)),
    )
    kw.update(overrides)
    return GaitConfig(**kw)


# -- helpers -----------------------------------------------------------------

def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def _min_jerk(u):
    """Rest-to-rest profile with zero end velocity and acceleration."""
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)


def _bump(t, center, half_width):
    """Raised cosine of height 1, zero outside center +- half_width."""
    x = np.clip((t - center) / half_width, -1.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * x))


def _frame(y=None, z=None, ref=None):
    """Rotation matrices from a prescribed axis and a reference direction."""
    if y is not None:
        x = np.cross(y, ref)
        x /= np.linalg.norm(x, axis=-1, keepdims=True)
        z = np.cross(x, y)
    else:
        x = np.cross(ref, z)
        x /= np.linalg.norm(x, axis=-1, keepdims=True)
        y = np.cross(z, x)
    return np.stack([x, y, z], axis=-1)


@dataclass
class _Support:
    """One ground contact of one foot."""

    kind: str  # "walk" or "stand"
    c0: float  # contact interval (labels)
    c1: float
    anchor: np.ndarray  # flat-foot ankle position, y = 0
    yaw: float
    push: bool = False  # stand ends with a jump take-off
    land: bool = False  # stand starts with a jump landing

    @property
    def pin_start(self):
        return self.c0

    @property
    def pin_end(self):
        return self.c1


class GaitModel:
    """Continuous-time description of one synthetic take."""

    def __init__(self, cfg: GaitConfig):
        cfg.validate()
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        self.skeleton = humanoid_skeleton(cfg.height_m, cfg.leg_ratio)
        sk = self.skeleton
        self.lf = float(np.linalg.norm(sk.offset[sk.index("LeftToe")]))
        self.l1 = float(np.linalg.norm(sk.offset[sk.index("LeftLowerLeg")]))
        self.l2 = float(np.linalg.norm(sk.offset[sk.index("LeftFoot")]))
        self.hip_drop = -float(sk.offset[sk.index("LeftUpperLeg"), 1])
        self.lateral = 0.5 * abs(float(sk.offset[sk.index("LeftUpperLeg"), 0]) * 2.0) * 1.05
        self.stand_height = self.hip_drop + 0.97 * (self.l1 + self.l2)
        self.walk_height = self.hip_drop + 0.93 * (self.l1 + self.l2)

        if cfg.path_radius_m is None:
            self.center = None
            self.heading0 = rng.uniform(-np.pi, np.pi)
            self.origin = np.array([rng.uniform(-1, 1), 0.0, rng.uniform(-1, 1)])
        else:
            self.center = np.array([rng.uniform(-1, 1), 0.0, rng.uniform(-1, 1)])
            self.alpha0 = rng.uniform(-np.pi, np.pi)
        w = rng.uniform(0.8, 1.2, 4)
        self.heel_w = w / w.sum()
        w = rng.uniform(0.7, 1.3, 8)
        self.toe_w = w / w.sum()
        w = rng.uniform(0.8, 1.2, 4)
        self.gray_w = w / w.sum()
        self._build_schedule()

    # -- path --------------------------------------------------------------
    def _path(self, u):
        u = np.asarray(u, dtype=np.float64)
        cfg = self.cfg
        if self.center is None:
            d = np.array([np.sin(self.heading0), 0.0, np.cos(self.heading0)])
            pos = self.origin + u[..., None] * d
            yaw = np.full(u.shape, self.heading0)
        else:
            R = cfg.path_radius_m
            a = self.alpha0 + cfg.turn * u / R
            pos = self.center + R * np.stack([np.cos(a), np.zeros_like(a), np.sin(a)], axis=-1)
            hx, hz = -cfg.turn * np.sin(a), cfg.turn * np.cos(a)
            yaw = np.arctan2(hx, hz)
        return pos, yaw

    def _arclength(self, t):
        """Distance travelled along the path at time t (speed ramps at the jump blocks)."""
        t = np.asarray(t, dtype=np.float64)
        v = self.cfg.speed_mps
        if not self.cfg.jump_markers:
            return v * t
        a, b, ramp = self.walk_t0, self.walk_t1, self.cfg.cycle_s

        def integ(x, start):  # integral of smoothstep ramp from start, width ramp
            y = np.clip((x - start) / ramp, 0.0, 1.0)
            return ramp * (y ** 3 - 0.5 * y ** 4) + np.maximum(x - start - ramp, 0.0)

        return v * (integ(t, a) - integ(t, b - ramp))

    # -- schedule ----------------------------------------------------------
    def _anchor_at(self, t_center, side):
        pos, yaw = self._path(self._arclength(t_center))
        fwd = np.array([np.sin(yaw), 0.0, np.cos(yaw)])
        left = np.cross(UP, fwd)
        sign = 1.0 if side == 0 else -1.0
        anchor = pos + sign * self.lateral * left - 0.3 * self.lf * fwd
        anchor[1] = 0.0
        return anchor, float(yaw)

    def _stand_anchor(self, t, side):
        anchor, yaw = self._anchor_at(t, side)
        anchor = anchor + 0.3 * self.lf * np.array([np.sin(yaw), 0.0, np.cos(yaw)])
        anchor[1] = 0.0
        return anchor, yaw

    def _build_schedule(self):
        cfg = self.cfg
        C, d = cfg.cycle_s, cfg.duty_factor
        S = d * C
        self.stance_s = S
        sw = (1.0 - d) * C
        supports = [[], []]
        if cfg.jump_markers:
            starts = [JUMP_AT_S]
            for gap in HOP_GAPS_START:
                starts.append(starts[-1] + FLIGHT_S + gap)
            ends = [cfg.duration_s - JUMP_AT_S - FLIGHT_S]
            for gap in HOP_GAPS_END[::-1]:
                ends.insert(0, ends[0] - FLIGHT_S - gap)
            self.jump_times = [(t, t + FLIGHT_S) for t in starts + ends]
            self.walk_t0 = starts[-1] + FLIGHT_S + SETTLE_S + sw
            first_strike = self.walk_t0
            self.walk_t1 = ends[0] - SETTLE_S - 1.2
            last_c0 = self.walk_t1
        else:
            self.jump_times = []
            first_strike = cfg.phase_s - 3 * C
            last_c0 = cfg.duration_s + 2 * C

        def hops(first_c0, last_c1, times, anchor, yaw):
            """Stand supports around the given (take-off, landing) pairs."""
            out, c0, land = [], first_c0, False
            for take_off, landing in times:
                out.append(_Support("stand", c0, take_off, anchor, yaw, push=True, land=land))
                c0, land = landing, True
            out.append(_Support("stand", c0, last_c1, anchor, yaw, land=True))
            return out

        for side in (0, 1):
            c0 = first_strike + side * 0.5 * C
            walk = []
            while c0 <= last_c0:
                ankle_mid = c0 + 0.5 * HEEL_OFF * S
                anchor, yaw = self._anchor_at(ankle_mid, side)
                walk.append(_Support("walk", c0, c0 + S, anchor, yaw))
                c0 += C
            if cfg.jump_markers:
                start_anchor, yaw0 = self._stand_anchor(0.0, side)
                end_anchor, yaw1 = self._stand_anchor(cfg.duration_s, side)
                pre = hops(-np.inf, walk[0].c0 - sw, self.jump_times[:JUMP_HOPS],
                           start_anchor, yaw0)
                post = hops(walk[-1].c1 + sw, np.inf, self.jump_times[JUMP_HOPS:],
                            end_anchor, yaw1)
                supports[side] = pre + walk + post
            else:
                supports[side] = walk
        self.supports = supports
        self._pin_starts = [np.array([s.pin_start for s in sup]) for sup in supports]

        # lobe height so both feet carry one body weight on average; each
        # raised cosine of half-width 0.25 integrates to 0.25
        L = S - 2 * EDGE_S
        self.hump_scale = (0.5 * C - EDGE_BW * S) / (0.25 * (2.0 + VALLEY_FILL) * L)

    # -- feet ----------------------------------------------------------------
    def _stance_state(self, sup, t):
        """Ankle position, pitch for times inside the pinned window of ``sup``."""
        t = np.asarray(t, dtype=np.float64)
        fwd = np.array([np.sin(sup.yaw), 0.0, np.cos(sup.yaw)])
        n = t.shape[0]
        ankle = np.broadcast_to(sup.anchor, (n, 3)).copy()
        pitch = np.zeros(n)
        if sup.kind == "walk":
            S = sup.c1 - sup.c0
            t_on = sup.c0 + TOE_ON * S
            t_off = sup.c0 + HEEL_OFF * S
            a = t < t_on
            x = (t[a] - sup.pin_start) / (t_on - sup.pin_start)
            pitch[a] = STRIKE_PITCH * 0.5 * (1.0 + np.cos(np.pi * np.clip(x, 0, 1)))
            b = t > t_off
            x = (t[b] - t_off) / (sup.pin_end - t_off)
            pitch[b] = -TOEOFF_PITCH * 0.5 * (1.0 - np.cos(np.pi * np.clip(x, 0, 1)))
            toe = sup.anchor + self.lf * fwd
            dirs = np.cos(pitch[b])[:, None] * fwd + np.sin(pitch[b])[:, None] * UP
            ankle[b] = toe - self.lf * dirs
        return ankle, pitch

    def _foot_state(self, side, t):
        """Ankle (n, 3), toe (n, 3) for one foot at times ``t``."""
        t = np.asarray(t, dtype=np.float64)
        sups = self.supports[side]
        starts = self._pin_starts[side]
        idx = np.searchsorted(starts, t, side="right") - 1
        ankle = np.zeros((len(t), 3))
        pitch = np.zeros(len(t))
        yaw = np.zeros(len(t))
        for i in np.unique(idx):
            m = idx == i
            tt = t[m]
            if i < 0:
                # before the first support: extrapolate the stance backwards (pinned)
                a, p = self._stance_state(sups[0], np.full(len(tt), sups[0].pin_start))
                ankle[m], pitch[m], yaw[m] = a, p, sups[0].yaw
                continue
            sup = sups[i]
            inside = tt <= sup.pin_end
            if np.any(inside):
                a, p = self._stance_state(sup, tt[inside])
                mi = np.flatnonzero(m)[inside]
                ankle[mi], pitch[mi], yaw[mi] = a, p, sup.yaw
            out = ~inside
            if np.any(out):
                mi = np.flatnonzero(m)[out]
                if i + 1 >= len(sups):
                    a, p = self._stance_state(sup, np.full(out.sum(), sup.pin_end))
                    ankle[mi], pitch[mi], yaw[mi] = a, p, sup.yaw
                    continue
                nxt = sups[i + 1]
                t0, t1 = sup.pin_end, nxt.pin_start
                a0, p0 = self._stance_state(sup, np.array([t0]))
                a1, p1 = self._stance_state(nxt, np.array([t1]))
                u = np.clip((tt[out] - t0) / (t1 - t0), 0.0, 1.0)
                s = _min_jerk(u)
                pos = a0 + s[:, None] * (a1 - a0)
                if sup.push and nxt.land:
                    tau = tt[out] - t0
                    dur = t1 - t0
                    v0 = 0.5 * GRAVITY * dur
                    pos[:, 1] = np.maximum(v0 * tau - 0.5 * GRAVITY * tau ** 2, 0.0)
                    pos[:, [0, 2]] = a0[:, [0, 2]]
                else:
                    pos[:, 1] = (1 - s) * a0[0, 1] + s * a1[0, 1] + self.cfg.step_height * np.sin(np.pi * u) ** 2
                ankle[mi] = pos
                pitch[mi] = (1 - s) * p0[0] + s * p1[0]
                dyaw = (nxt.yaw - sup.yaw + np.pi) % (2 * np.pi) - np.pi
                yaw[mi] = sup.yaw + s * dyaw
        fwd = np.stack([np.sin(yaw), np.zeros_like(yaw), np.cos(yaw)], axis=-1)
        dirs = np.cos(pitch)[:, None] * fwd + np.sin(pitch)[:, None] * UP
        toe = ankle + self.lf * dirs
        return ankle, toe

    def feet(self, t):
        """Ankle and toe positions, each (n, 2, 3)."""
        a0, t0 = self._foot_state(0, t)
        a1, t1 = self._foot_state(1, t)
        return np.stack([a0, a1], axis=1), np.stack([t0, t1], axis=1)

    # -- body --------------------------------------------------------------
    def _gait_phase(self, t):
        first = self.supports[0][0]
        ref = first.c0 if np.isfinite(first.c0) else self.supports[0][2].c0
        return 2.0 * np.pi * (np.asarray(t) - ref) / self.cfg.cycle_s

    def _jump_offset(self, t):
        """Pelvis height change from crouching and flight."""
        t = np.asarray(t, dtype=np.float64)
        dy = np.zeros_like(t)
        for take_off, landing in self.jump_times:
            dy -= 0.10 * _bump(t, take_off - 0.25, 0.2)
            dy -= 0.12 * _bump(t, landing + 0.15, 0.25)
            tau = t - take_off
            dur = landing - take_off
            inflight = (tau > 0) & (tau < dur)
            v0 = 0.5 * GRAVITY * dur
            dy[inflight] += v0 * tau[inflight] - 0.5 * GRAVITY * tau[inflight] ** 2
        return dy

    def motion(self, t):
        """Local motion arrays (root (n, 3), rotations (n, J, 4)) at times ``t``."""
        cfg = self.cfg
        sk = self.skeleton
        t = np.asarray(t, dtype=np.float64)
        n = len(t)
        ankle, toe = self.feet(t)
        u = self._arclength(t)
        pos, yaw = self._path(u)
        phase = self._gait_phase(t)
        walking = np.ones(n)
        if cfg.jump_markers:
            u_end = float(self._arclength(cfg.duration_s))
            walking = _smoothstep(u / 0.3) * _smoothstep((u_end - u) / 0.3)

        fwd = np.stack([np.sin(yaw), np.zeros(n), np.cos(yaw)], axis=-1)
        left = np.cross(UP, fwd)
        pelvis = pos + (0.02 * walking * np.sin(phase))[:, None] * left
        q_yaw = quat.yaw(yaw + 0.06 * walking * np.sin(phase))
        q_tilt = quat.from_axis_angle(np.array([0.0, 0.0, 1.0]), 0.03 * walking * np.sin(phase))
        q_pelvis = quat.mul(q_yaw, q_tilt)
        height = np.where(walking > 0, self.walk_height * walking + self.stand_height * (1 - walking),
                          self.stand_height)
        height = height + cfg.pelvis_bob * walking * np.cos(2 * phase) + self._jump_offset(t)

        # keep both ankles reachable by lowering the pelvis where needed
        reach = (self.l1 + self.l2) * 0.999
        hips = []
        for side in (0, 1):
            j = sk.index("LeftUpperLeg" if side == 0 else "RightUpperLeg")
            hips.append(quat.rotate(q_pelvis, sk.offset[j]))
        limit = np.full(n, np.inf)
        for side in (0, 1):
            hoff = hips[side]
            dh = np.linalg.norm((pelvis + hoff - ankle[:, side])[:, [0, 2]], axis=-1)
            if np.any(dh >= reach):
                raise ValidationError("stride too long for the leg length; lower speed or cycle")
            limit = np.minimum(limit, ankle[:, side, 1] + np.sqrt(reach ** 2 - dh ** 2) - hoff[:, 1])
        pelvis[:, 1] = np.minimum(height, limit)

        rot = quat.identity((n, sk.n_joints))
        rot[:, 0] = q_pelvis
        lean = cfg.trunk_lean * 0.25
        xaxis = np.array([1.0, 0.0, 0.0])
        yaxis = np.array([0.0, 1.0, 0.0])
        for name in ("L5", "L3", "T12", "T8"):
            rot[:, sk.index(name)] = quat.mul(quat.from_axis_angle(xaxis, np.full(n, lean)),
                                              quat.yaw(-0.02 * walking * np.sin(phase)))
        rot[:, sk.index("Neck")] = quat.from_axis_angle(xaxis, np.full(n, -cfg.trunk_lean * 0.5))
        swing = cfg.arm_swing * walking * np.cos(phase)
        rot[:, sk.index("LeftUpperArm")] = quat.from_axis_angle(xaxis, swing)
        rot[:, sk.index("RightUpperArm")] = quat.from_axis_angle(xaxis, -swing)
        for name in ("LeftForeArm", "RightForeArm"):
            rot[:, sk.index(name)] = quat.from_axis_angle(xaxis, np.full(n, -0.25))

        # legs: analytic two-bone IK towards the scheduled ankle and toe
        g_pelvis = quat.to_matrix(q_pelvis)
        pole = g_pelvis[:, :, 2]
        for side, pre in ((0, "Left"), (1, "Right")):
            hip = pelvis + hips[side]
            A = ankle[:, side]
            Tt = toe[:, side]
            v = A - hip
            d = np.linalg.norm(v, axis=-1)
            un = v / d[:, None]
            p = pole - np.sum(pole * un, axis=-1, keepdims=True) * un
            p /= np.linalg.norm(p, axis=-1, keepdims=True)
            dd = np.minimum(d, self.l1 + self.l2)
            cos_a = np.clip((self.l1 ** 2 + dd ** 2 - self.l2 ** 2) / (2 * self.l1 * dd), -1, 1)
            knee = hip + self.l1 * (cos_a[:, None] * un + np.sqrt(1 - cos_a ** 2)[:, None] * p)
            g_upper = _frame(y=(hip - knee) / self.l1, ref=pole)
            g_lower = _frame(y=(knee - A) / np.linalg.norm(knee - A, axis=-1, keepdims=True), ref=pole)
            zf = (Tt - A) / np.linalg.norm(Tt - A, axis=-1, keepdims=True)
            g_foot = _frame(z=zf, ref=np.broadcast_to(UP, zf.shape))
            rot[:, sk.index(pre + "UpperLeg")] = quat.from_matrix(np.swapaxes(g_pelvis, -1, -2) @ g_upper)
            rot[:, sk.index(pre + "LowerLeg")] = quat.from_matrix(np.swapaxes(g_upper, -1, -2) @ g_lower)
            rot[:, sk.index(pre + "Foot")] = quat.from_matrix(np.swapaxes(g_lower, -1, -2) @ g_foot)
        rot = make_continuous(quat.normalize(rot))
        return pelvis, rot

    # -- forces ------------------------------------------------------------
    def _walk_total(self, sup, t):
        S = sup.c1 - sup.c0
        u = (t - sup.c0 - EDGE_S) / (S - 2 * EDGE_S)
        A = self.hump_scale
        lobes = _bump(u, 0.25, 0.25) + _bump(u, 0.75, 0.25) + VALLEY_FILL * _bump(u, 0.5, 0.25)
        return EDGE_BW + A * lobes

    def _support_force(self, sup, t):
        """Total force, rescaled heel share and gray ratio for one support."""
        t = np.asarray(t, dtype=np.float64)
        f = np.zeros_like(t)
        wh = np.zeros_like(t)
        gamma = np.zeros_like(t)
        m = (t >= sup.c0) & (t <= sup.c1)
        if not np.any(m):
            return f, wh, gamma
        tt = t[m]
        if sup.kind == "walk":
            S = sup.c1 - sup.c0
            f[m] = self._walk_total(sup, tt)
            t_on, t_off = sup.c0 + TOE_ON * S, sup.c0 + HEEL_OFF * S
            # the smoothing inside the contact function delays heel-off and
            # advances toe-on; place the raw crossings to cancel that blur
            t_on, t_off = t_on + BLUR_TOE_ON_S, t_off - BLUR_HEEL_OFF_S
            f_on, f_off = self._walk_total(sup, np.array([t_on, t_off]))
            w_on, w_off = 1.0 - RAW_BW / f_on, RAW_BW / f_off
            w = w_on + (tt - t_on) * (w_off - w_on) / (t_off - t_on)
            wh[m] = np.clip(w, 0.0, 1.0)
            gamma[m] = 0.12 * np.sin(np.pi * (tt - sup.c0) / S)
        else:
            env = np.ones_like(tt)
            if np.isfinite(sup.c0):
                env *= _smoothstep((tt - sup.c0 - EDGE_S) / 0.1)
            if np.isfinite(sup.c1):
                env *= _smoothstep((sup.c1 - EDGE_S - tt) / 0.1)
            body = EDGE_BW + 0.3 * env
            if sup.push:
                end = sup.c1 - EDGE_S
                body = body + 0.6 * _bump(tt, end - 0.17, 0.14)
                if not sup.land:
                    body = body - 0.12 * _bump(tt, end - 0.42, 0.12)
            if sup.land:
                start = sup.c0 + EDGE_S
                body = body + 0.9 * _bump(tt, start + 0.12, 0.1) - 0.1 * _bump(tt, start + 0.32, 0.1)
            f[m] = body
            wh[m] = 0.5
            gamma[m] = 0.1
        return f, wh, gamma

    def vgrf(self, t):
        """(n, 2, 16) per-cell vGRF at times ``t``."""
        t = np.asarray(t, dtype=np.float64)
        out = np.zeros((len(t), 2, 16))
        layout = InsoleLayout.default()
        heel_idx = np.flatnonzero(layout.mask("heel"))
        toe_idx = np.flatnonzero(layout.mask("toe"))
        gray_idx = np.flatnonzero(layout.mask("gray"))
        for side in (0, 1):
            for sup in self._supports_near(side, t):
                f, wh, gamma = self._support_force(sup, t)
                ht = f / (1.0 + gamma)
                out[:, side, heel_idx] += (wh * ht)[:, None] * self.heel_w
                out[:, side, toe_idx] += ((1.0 - wh) * ht)[:, None] * self.toe_w
                out[:, side, gray_idx] += (gamma * ht)[:, None] * self.gray_w
        return out

    def _supports_near(self, side, t):
        lo, hi = np.min(t), np.max(t)
        return [s for s in self.supports[side] if s.pin_end >= lo and s.pin_start <= hi]

    def contacts(self, t):
        """(n, 2, 2) ground-truth labels from the schedule."""
        t = np.asarray(t, dtype=np.float64)
        lab = np.zeros((len(t), 2, 2), dtype=np.uint8)
        for side in (0, 1):
            for sup in self._supports_near(side, t):
                if sup.kind == "walk":
                    S = sup.c1 - sup.c0
                    heel = (t >= sup.c0) & (t <= sup.c0 + HEEL_OFF * S)
                    toe = (t >= sup.c0 + TOE_ON * S) & (t <= sup.c1)
                else:
                    heel = toe = (t >= sup.c0) & (t <= sup.c1)
                lab[:, side, 0] |= heel.astype(np.uint8)
                lab[:, side, 1] |= toe.astype(np.uint8)
        return lab

    def imu_accel(self, t, rate_hz):
        """Specific force (n, 2, 3) at the insole centre, by second differences."""
        t = np.asarray(t, dtype=np.float64)
        h = 1.0 / rate_hz
        pts = []
        for dt in (-h, 0.0, h):
            a, b = self.feet(t + dt)
            pts.append(0.5 * (a + b))
        acc = (pts[2] - 2 * pts[1] + pts[0]) / h ** 2
        return acc + GRAVITY * UP


def make_continuous(q):
    """Flip quaternion signs along time so consecutive frames are on one hemisphere."""
    q = np.array(q, copy=True)
    dots = np.sum(q[1:] * q[:-1], axis=-1)
    flips = np.cumprod(np.where(dots < 0, -1.0, 1.0), axis=0)
    q[1:] *= flips[..., None]
    return q


def _times(n, rate):
    return np.arange(n) / rate


def _meta(cfg):
    return SubjectMeta(float(cfg.weight_kg), float(cfg.height_m), cfg.subject_id)


def _attrs(cfg, **extra):
    a = {"generator": "footforce.synth", "config": asdict(cfg)}
    a.update(extra)
    return a


def generate_gait(cfg: GaitConfig):
    """A synchronized take sampled at ``cfg.rate_hz``."""
    model = GaitModel(cfg)
    n = int(round(cfg.duration_s * cfg.rate_hz))
    t = _times(n, cfg.rate_hz)
    root, rot = model.motion(t)
    pos, _ = forward_kinematics_full(model.skeleton, root, rot)
    f = model.vgrf(t)
    layout = InsoleLayout.default()
    meta = _meta(cfg)
    vg = VgrfSequence(f.astype(np.float32), cfg.rate_hz)
    return Take(
        skeleton=model.skeleton,
        poses=PoseSequence(pos.astype(np.float32), cfg.rate_hz),
        meta=meta,
        local_motion=LocalMotion(root.astype(np.float32), rot.astype(np.float32), cfg.rate_hz),
        pressure=vgrf_to_pressure(vg, layout, meta).__class__(
            vgrf_to_pressure(vg, layout, meta).values.astype(np.float32), cfg.rate_hz),
        vgrf=vg,
        contacts=ContactSequence(model.contacts(t), cfg.rate_hz),
        imu_accel=model.imu_accel(t, cfg.rate_hz).astype(np.float32),
        layout=layout,
        attrs=_attrs(cfg),
    )


def generate_unsynchronized(cfg: GaitConfig, offset_samples: int, mocap_rate_hz=240.0):
    """Motion at ``mocap_rate_hz`` plus insole data that lags by ``offset_samples``.

    Insole sample ``i`` records the state at motion time
    ``(i + offset_samples) / cfg.rate_hz``, so the motion-derived series is the
    insole series delayed by ``offset_samples``.
    """
    model = GaitModel(cfg)
    n_m = int(round(cfg.duration_s * mocap_rate_hz))
    tm = _times(n_m, mocap_rate_hz)
    root, rot = model.motion(tm)
    pos, _ = forward_kinematics_full(model.skeleton, root, rot)
    n_i = int(round(cfg.duration_s * cfg.rate_hz))
    ti = (np.arange(n_i) + offset_samples) / cfg.rate_hz
    layout = InsoleLayout.default()
    meta = _meta(cfg)
    vg = VgrfSequence(model.vgrf(ti).astype(np.float32), cfg.rate_hz)
    pr = vgrf_to_pressure(vg, layout, meta)
    return Take(
        skeleton=model.skeleton,
        poses=PoseSequence(pos.astype(np.float32), mocap_rate_hz),
        meta=meta,
        local_motion=LocalMotion(root.astype(np.float32), rot.astype(np.float32), mocap_rate_hz),
        pressure=pr.__class__(pr.values.astype(np.float32), cfg.rate_hz),
        vgrf=vg,
        contacts=ContactSequence(model.contacts(ti), cfg.rate_hz),
        imu_accel=model.imu_accel(ti, cfg.rate_hz).astype(np.float32),
        layout=layout,
        synchronized=False,
        attrs=_attrs(cfg, injected_offset=int(offset_samples),
                     jump_times=[list(j) for j in model.jump_times]),
    )


def generate_blend_ground_truth(cfg: GaitConfig, rng):
    """Two takes with one contact schedule but different speeds and styles."""
    factor = rng.uniform(1.25, 1.45)
    base = replace(cfg, jump_markers=False)
    slow = replace(base, speed_mps=base.speed_mps / math.sqrt(factor))
    fast = replace(base, speed_mps=min(base.speed_mps * math.sqrt(factor), 1.3 / base.cycle_s),
                   arm_swing=base.arm_swing * rng.uniform(1.4, 1.8),
                   trunk_lean=base.trunk_lean + rng.uniform(0.05, 0.1),
                   step_height=base.step_height * rng.uniform(1.2, 1.4),
                   pelvis_bob=base.pelvis_bob * rng.uniform(1.3, 1.8))
    return generate_gait(slow), generate_gait(fast)


def gait_dataset(seconds, seed, take_s=60.0, **overrides):
    """Several randomized walkers totalling about ``seconds`` of motion."""
    rng = np.random.default_rng(seed)
    takes = []
    remaining = seconds
    k = 0
    while remaining > 1e-9:
        dur = min(take_s, remaining)
        if dur < 10.0 and takes:
            break
        cfg = random_gait_config(rng, duration_s=dur, subject_id=f"S{seed}_{k}", **overrides)
        takes.append(generate_gait(cfg))
        remaining -= dur
        k += 1
    return takes
