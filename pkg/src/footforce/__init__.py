"""Vertical ground reaction forces and foot contacts from skeletal motion.

Submodules: ``core`` (types and the take container), ``kinematics``,
``grf`` (contact function), ``sync``, ``augment``, ``synth``, ``nn``,
``baselines``, ``metrics``, ``perturb``, ``cleanup`` and ``cli``.
"""
from .core import (ContactSequence, InsoleLayout, LocalMotion, PoseSequence, PressureSequence,
                   Skeleton, SubjectMeta, Take, ValidationError, VgrfSequence, humanoid_skeleton,
                   load_take, save_take, validate_take)
from .grf import ContactParams, contact_labels
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ContactParams", "ContactSequence", "InsoleLayout", "LocalMotion", "PoseSequence",
    "PressureSequence", "Skeleton", "SubjectMeta", "Take", "ValidationError", "VgrfSequence",
    "contact_labels", "humanoid_skeleton", "load_take", "save_take", "validate_take",
]
