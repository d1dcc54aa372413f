"""Estimator-style front end: fit on a scene, then certify or predict plans."""

from __future__ import annotations

from os import PathLike
from typing import Any

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .checker import PlanReport, certify_plan, sample_falsify
from .conic import SolverOptions
from .plan import MotionPlan
from .scene import Scene, SceneError, load_plan, load_scene, read_plan, read_scene
from .soscert import GAMMA_MIN

__all__ = ["PlanCertifier", "check_scene", "check_plan"]


def check_scene(scene: Any) -> Scene:
    """Accept a :class:`Scene`, a scene document or a path to one."""
    if isinstance(scene, Scene):
        return scene
    if isinstance(scene, dict):
        return load_scene(scene)
    if isinstance(scene, (str, PathLike)):
        return read_scene(scene)
    raise SceneError(f"cannot interpret {type(scene).__name__} as a scene")


def check_plan(plan: Any, scene: Scene | None = None) -> MotionPlan:
    """Accept a :class:`MotionPlan`, a plan document or a path; check variable coverage."""
    chain = None if scene is None else scene.chain
    if isinstance(plan, MotionPlan):
        if chain is not None:
            for k, seg in enumerate(plan.segments):
                missing = set(chain.variables) - set(seg.coeffs)
                if missing:
                    raise SceneError(f"segment {k} does not bind {sorted(missing)}")
        return plan
    if isinstance(plan, dict):
        return load_plan(plan, chain)
    if isinstance(plan, (str, PathLike)):
        return read_plan(plan, chain)
    raise SceneError(f"cannot interpret {type(plan).__name__} as a plan")


class PlanCertifier(BaseEstimator):
    """Certify motion plans against a fixed scene.

    Parameters
    ----------
    degree : int, default=1
        Degree of the polynomial separating hyperplanes.
    jobs : int, default=1
        Worker processes used for (segment, pair) cells.
    early_stop : bool, default=False
        Skip the remaining pairs of a segment once one pair fails.
    exact_verify : bool, default=False
        Re-check certificates in exact rational arithmetic.
    falsify_n : int, default=1000
        Samples per segment used by :meth:`falsify`.
    slack_floor : float, default=1e-6
        Minimum slack margin carried by every condition.
    max_iter : int or None, default=None
        Solver iteration cap; ``None`` uses the solver default (or the environment override).

    Attributes
    ----------
    scene_ : Scene
        The validated scene.
    n_pairs_ : int
        Number of collision pairs in the scene.
    n_dof_ : int
        Number of joint variables of the chain.
    """

    def __init__(self, degree: int = 1, jobs: int = 1, early_stop: bool = False, exact_verify: bool = False,
                 falsify_n: int = 1000, slack_floor: float = GAMMA_MIN, max_iter: int | None = None):
        self.degree = degree
        self.jobs = jobs
        self.early_stop = early_stop
        self.exact_verify = exact_verify
        self.falsify_n = falsify_n
        self.slack_floor = slack_floor
        self.max_iter = max_iter

    def _validate_params(self):
        if not isinstance(self.degree, (int, np.integer)) or self.degree < 0:
            raise ValueError("degree must be a non-negative integer")
        if not isinstance(self.jobs, (int, np.integer)) or self.jobs < 1:
            raise ValueError("jobs must be a positive integer")
        if not self.slack_floor > 0:
            raise ValueError("slack_floor must be positive")
        if int(self.falsify_n) < 2:
            raise ValueError("falsify_n must be at least 2")

    def fit(self, scene, y=None) -> "PlanCertifier":
        self._validate_params()
        self.scene_ = check_scene(scene)
        self.n_pairs_ = len(self.scene_.pairs)
        self.n_dof_ = self.scene_.chain.dof
        return self

    def _options(self) -> SolverOptions:
        return SolverOptions.from_env(max_iter=self.max_iter)

    def certify(self, plan) -> PlanReport:
        """Full per-cell report for one plan."""
        check_is_fitted(self, "scene_")
        plan = check_plan(plan, self.scene_)
        return certify_plan(plan, self.scene_, int(self.degree), jobs=int(self.jobs), early_stop=self.early_stop,
                            exact_verify=self.exact_verify, solver_options=self._options(),
                            slack_floor=self.slack_floor)

    def predict(self, plans) -> np.ndarray:
        """``"SAFE"`` / ``"NSAFE"`` for each plan (a single plan gives a length-1 array)."""
        check_is_fitted(self, "scene_")
        if isinstance(plans, (MotionPlan, dict, str, PathLike)):
            plans = [plans]
        return np.array([self.certify(p).verdict for p in plans], dtype=object)

    def falsify(self, plan, n: int | None = None):
        check_is_fitted(self, "scene_")
        plan = check_plan(plan, self.scene_)
        return sample_falsify(plan, self.scene_, int(self.falsify_n if n is None else n))

    def score(self, plans, y) -> float:
        """Fraction of plans whose verdict matches ``y``."""
        pred = self.predict(plans)
        return float(np.mean(pred == np.asarray(y, dtype=object)))
