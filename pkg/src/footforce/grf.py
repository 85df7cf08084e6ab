"""Pressure to vGRF conversion, the contact function and centre of pressure."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from . import kernels
from .core import (GRAVITY, ContactSequence, InsoleLayout, ValidationError, VgrfSequence,
                   ceil_frames)

RESCALE_EPS = 1e-8


@dataclass(frozen=True)
class ContactParams:
    smooth_sigma_s: float = 0.01
    raw_threshold_bw: float = 0.05
    gate_threshold_bw: float = 0.10
    min_phase_s: float = 0.1

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not v > 0:
                raise ValidationError(f"ContactParams.{k} must be positive, got {v}")

    def to_dict(self):
        return asdict(self)


def pressure_to_vgrf(pressure, layout, meta):
    """Per-cell force (pressure x area) as a fraction of body weight."""
    p = np.asarray(pressure.values, dtype=np.float64)
    if np.any(p < 0):
        raise ValidationError("pressure_to_vgrf: negative pressure")
    if not meta.weight_kg > 0:
        raise ValidationError("pressure_to_vgrf: weight must be positive")
    if layout.area_cm2.shape != (16,):
        raise ValidationError("pressure_to_vgrf: layout needs 16 cells per foot")
    newtons = p * layout.area_cm2  # N/cm^2 * cm^2
    return VgrfSequence(newtons / (meta.weight_kg * GRAVITY), pressure.rate_hz)


def vgrf_to_pressure(vgrf, layout, meta):
    from .core import PressureSequence
    v = np.asarray(vgrf.values, dtype=np.float64)
    return PressureSequence(v * (meta.weight_kg * GRAVITY) / layout.area_cm2, vgrf.rate_hz)


def total_vgrf(vgrf):
    """(T, 2) per-foot sum over the 16 cells."""
    return np.asarray(vgrf.values, dtype=np.float64).sum(axis=-1)


def smooth_cells(values, sigma_frames):
    return gaussian_filter1d(np.asarray(values, dtype=np.float64), sigma_frames, axis=0,
                             mode="reflect", truncate=4.0)


def contact_intermediates(vgrf, layout, params=ContactParams()):
    """Smoothed per-foot sums used by the contact function.

    Returns ``(heel, toe, total)``, each (T, 2): heel and toe group sums
    rescaled so that heel + toe equals the smoothed total (gray cells are
    thereby spread over both groups), and the smoothed total itself.
    """
    if not vgrf.rate_hz > 0:
        raise ValidationError("contact function: rate must be positive")
    s = smooth_cells(vgrf.values, params.smooth_sigma_s * vgrf.rate_hz)
    heel = s[..., layout.mask("heel")].sum(axis=-1)
    toe = s[..., layout.mask("toe")].sum(axis=-1)
    total = s.sum(axis=-1)
    denom = heel + toe
    ok = denom > RESCALE_EPS
    r = np.where(ok, total / np.where(ok, denom, 1.0), 0.0)
    return heel * r, toe * r, total


def contact_labels(vgrf, layout, params=ContactParams()):
    """Binary heel/toe contacts from per-cell vGRF (the contact function)."""
    heel, toe, total = contact_intermediates(vgrf, layout, params)
    raw = np.stack([heel, toe], axis=-1) >= params.raw_threshold_bw
    raw &= (total >= params.gate_threshold_bw)[..., None]
    min_len = ceil_frames(params.min_phase_s, vgrf.rate_hz)
    labels = kernels.drop_short_runs(raw.astype(np.uint8), min_len)
    return ContactSequence(labels, vgrf.rate_hz)


def center_of_pressure(vgrf, layout, gate_bw=0.10):
    """(T, 2, 2) CoP per foot in the foot frame; NaN where the foot total < gate.

    ``vgrf`` may be a VgrfSequence or a bare (T, 2, 16) array.
    """
    if gate_bw < 0:
        raise ValidationError("center_of_pressure: gate must be non-negative")
    v = np.asarray(getattr(vgrf, "values", vgrf), dtype=np.float64)
    tot = v.sum(axis=-1)
    num = np.einsum("tfc,fcd->tfd", v, layout.position)
    ok = (tot >= gate_bw) & (tot > 0)
    cop = num / np.where(ok, tot, 1.0)[..., None]
    cop[~ok] = np.nan
    return cop
