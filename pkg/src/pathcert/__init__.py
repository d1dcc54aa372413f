"""Sum-of-squares certificates of collision freedom for polynomial motion plans."""

from .checker import (NSAFE, REJECTED, SAFE, VERIFIED, CheckReport, CollisionFound, NoneFound, PlanReport,
                      certify_plan, sample_falsify, verify_certificate)
from .estimator import PlanCertifier
from .geometry import CollisionPair, Polytope, Sphere, min_distance
from .kinematics import Joint, KinematicChain, Link, compose_with_plan, forward_kinematics_rational
from .plan import MotionPlan, PlanSegment, hermite_cubic_segment, linear_segment
from .polynomial import Polynomial, RationalFunction
from .scene import Scene, SceneError, load_plan, load_scene, read_plan, read_scene
from .soscert import Certificate, assemble_pair_program, decomposition_template

__all__ = [
    "NSAFE", "SAFE", "VERIFIED", "REJECTED", "CheckReport", "CollisionFound", "NoneFound", "PlanReport",
    "certify_plan", "sample_falsify", "verify_certificate", "PlanCertifier", "CollisionPair", "Polytope", "Sphere",
    "min_distance", "Joint", "KinematicChain", "Link", "compose_with_plan", "forward_kinematics_rational",
    "MotionPlan", "PlanSegment", "hermite_cubic_segment", "linear_segment", "Polynomial", "RationalFunction",
    "Scene", "SceneError", "load_plan", "load_scene", "read_plan", "read_scene", "Certificate",
    "assemble_pair_program", "decomposition_template",
]
__version__ = "0.1.0"
