"""Scene and plan documents (JSON) and their in-memory forms."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import numpy as np

from .geometry import CollisionPair, ConvexBody, Polytope, Sphere
from .kinematics import FIXED, REVOLUTE, WORLD, Joint, KinematicChain, Link
from .plan import MotionPlan, PlanSegment, hermite_cubic_segment, linear_segment

__all__ = ["Scene", "SceneError", "SCENE_SCHEMA", "PLAN_SCHEMA", "load_chain", "load_scene", "load_plan",
           "read_scene", "read_plan", "scene_to_dict", "plan_to_dict"]

SCENE_VERSION = 1


class SceneError(ValueError):
    """Invalid scene or plan document."""


_vec3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_ref = {"type": ["integer", "string"]}

SCENE_SCHEMA = {
    "type": "object",
    "properties": {
        "version": {"type": "integer"},
        "links": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "parent"],
                "properties": {
                    "name": {"type": "string"},
                    "parent": {"type": "string"},
                    "joint": {
                        "type": "object",
                        "required": ["kind"],
                        "properties": {
                            "kind": {"enum": ["revolute", "prismatic", "fixed"]},
                            "name": {"type": "string"},
                            "axis": _vec3,
                            "origin": {
                                "type": "object",
                                "properties": {"rpy": _vec3, "xyz": _vec3},
                                "additionalProperties": False,
                            },
                            "limits": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                        },
                    },
                },
            },
        },
        "geometries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["link", "kind"],
                "properties": {
                    "name": {"type": "string"},
                    "link": {"type": "string"},
                    "kind": {"enum": ["sphere", "polytope"]},
                    "center": _vec3,
                    "radius": {"type": "number", "exclusiveMinimum": 0},
                    "vertices": {"type": "array", "items": _vec3, "minItems": 1},
                },
                "allOf": [
                    {"if": {"properties": {"kind": {"const": "sphere"}}}, "then": {"required": ["center", "radius"]}},
                    {"if": {"properties": {"kind": {"const": "polytope"}}}, "then": {"required": ["vertices"]}},
                ],
            },
        },
        "collision_pairs": {
            "type": "array",
            "items": {"type": "object", "required": ["geomA", "geomB"], "properties": {"geomA": _ref, "geomB": _ref}},
        },
    },
    "required": ["links"],
}

_coeffs = {"type": "object", "additionalProperties": {"type": "array", "items": {"type": "number"}, "minItems": 1}}
_point = {"type": "object", "additionalProperties": {"type": "number"}}

PLAN_SCHEMA = {
    "type": "object",
    "required": ["segments"],
    "properties": {
        "version": {"type": "integer"},
        "segments": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "kind": {"enum": ["poly", "linear", "hermite"]},
                    "coeffs": _coeffs,
                    "start": _point,
                    "end": _point,
                    "v0": _point,
                    "v1": _point,
                    "domain": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                },
            },
        },
    },
}


@dataclass(frozen=True, eq=False)
class Scene:
    """Kinematic chain, attached convex bodies and the pairs that may collide."""

    chain: KinematicChain
    bodies: tuple[ConvexBody, ...] = ()
    pairs: tuple[CollisionPair, ...] = ()

    def __post_init__(self):
        names = set(self.chain.link_names)
        for k, body in enumerate(self.bodies):
            if body.link not in names:
                raise SceneError(f"geometry {k} is attached to unknown link {body.link!r}")
        for pair in self.pairs:
            for idx in (pair.a, pair.b):
                if not 0 <= idx < len(self.bodies):
                    raise SceneError(f"collision pair references unknown geometry {idx}")

    def body_name(self, k: int) -> str:
        return self.bodies[k].name or f"geom{k}"


def _validate(doc: Any, schema: Mapping, what: str):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise SceneError(f"{what} schema violation at '{path}': {exc.message}") from None


def _parse_links(doc: Mapping) -> KinematicChain:
    links = []
    for entry in doc.get("links", []):
        j = entry.get("joint", {"kind": FIXED})
        origin = j.get("origin", {})
        kind = j["kind"]
        limits = tuple(j["limits"]) if "limits" in j else None
        try:
            joint = Joint(
                kind=kind,
                axis=tuple(float(a) for a in j.get("axis", (0.0, 0.0, 1.0))),
                origin_rpy=tuple(float(a) for a in origin.get("rpy", (0.0, 0.0, 0.0))),
                origin_xyz=tuple(float(a) for a in origin.get("xyz", (0.0, 0.0, 0.0))),
                limits=limits,
                variable=(j.get("name", entry["name"]) if kind != FIXED else None),
            )
        except ValueError as exc:
            raise SceneError(f"link {entry['name']!r}: {exc}") from None
        links.append(Link(entry["name"], entry["parent"], joint))
    try:
        return KinematicChain(tuple(links))
    except ValueError as exc:
        raise SceneError(str(exc)) from None


def load_chain(doc: Mapping) -> KinematicChain:
    """Chain from a scene document (geometry and pairs are ignored)."""
    _validate(doc, SCENE_SCHEMA, "scene")
    return _parse_links(doc)


def load_scene(doc: Mapping) -> Scene:
    _validate(doc, SCENE_SCHEMA, "scene")
    chain = _parse_links(doc)
    bodies: list[ConvexBody] = []
    by_name: dict[str, int] = {}
    for k, g in enumerate(doc.get("geometries", [])):
        try:
            if g["kind"] == "sphere":
                body = Sphere(np.asarray(g["center"], dtype=float), float(g["radius"]), g["link"], g.get("name"))
            else:
                body = Polytope(np.asarray(g["vertices"], dtype=float), g["link"], g.get("name"))
        except ValueError as exc:
            raise SceneError(f"geometry {k}: {exc}") from None
        if body.name is not None:
            if body.name in by_name:
                raise SceneError(f"duplicate geometry name {body.name!r}")
            by_name[body.name] = k
        bodies.append(body)

    def resolve(ref):
        if isinstance(ref, str):
            if ref not in by_name:
                raise SceneError(f"unknown geometry {ref!r}")
            return by_name[ref]
        return int(ref)

    pairs: list[CollisionPair] = []
    seen = set()
    for entry in doc.get("collision_pairs", []):
        a, b = resolve(entry["geomA"]), resolve(entry["geomB"])
        try:
            pair = CollisionPair(a, b)
        except ValueError as exc:
            raise SceneError(str(exc)) from None
        if pair.key in seen:
            warnings.warn(f"duplicate collision pair {pair.key} ignored", stacklevel=2)
            continue
        seen.add(pair.key)
        pairs.append(pair)
    return Scene(chain, tuple(bodies), tuple(pairs))


def load_plan(doc: Mapping, chain: KinematicChain | None = None) -> MotionPlan:
    """Plan from a plan document; checks variable coverage against ``chain`` when given."""
    _validate(doc, PLAN_SCHEMA, "plan")
    segments = []
    for k, s in enumerate(doc["segments"]):
        kind = s.get("kind", "poly" if "coeffs" in s else None)
        try:
            if kind == "poly":
                if "coeffs" not in s:
                    raise ValueError("missing 'coeffs'")
                seg = PlanSegment(s["coeffs"], tuple(s.get("domain", (0.0, 1.0))))
            elif kind == "linear":
                seg = linear_segment(s["start"], s["end"])
            elif kind == "hermite":
                seg = hermite_cubic_segment(s["start"], s["end"], s["v0"], s["v1"])
            else:
                raise ValueError("segment needs 'coeffs' or a 'kind'")
        except (KeyError, ValueError) as exc:
            raise SceneError(f"segment {k}: {exc}") from None
        if chain is not None:
            missing = set(chain.variables) - set(seg.coeffs)
            if missing:
                raise SceneError(f"segment {k} does not bind {sorted(missing)}")
        segments.append(seg)
    plan = MotionPlan(tuple(segments))
    if chain is not None:
        _warn_limits(plan, chain)
    return plan


def _warn_limits(plan: MotionPlan, chain: KinematicChain, samples: int = 64):
    t = np.linspace(0.0, 1.0, samples)
    for link in chain.movable_links:
        j = link.joint
        if j.limits is None:
            continue
        lo, hi = j.limits
        if j.kind == REVOLUTE:
            lo, hi = np.tan(lo / 2), np.tan(hi / 2)
        for k, seg in enumerate(plan.unit_segments()):
            vals = seg.evaluate(t)[j.variable]
            if vals.min() < lo - 1e-12 or vals.max() > hi + 1e-12:
                warnings.warn(f"segment {k} leaves the limits of joint {j.variable!r}", stacklevel=3)


def read_scene(path: str | Path) -> Scene:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneError(f"cannot read scene {path}: {exc}") from None
    return load_scene(doc)


def read_plan(path: str | Path, chain: KinematicChain | None = None) -> MotionPlan:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneError(f"cannot read plan {path}: {exc}") from None
    return load_plan(doc, chain)


def scene_to_dict(scene: Scene) -> dict:
    links = []
    for link in scene.chain.links:
        j = link.joint
        jd: dict[str, Any] = {"kind": j.kind, "origin": {"rpy": list(j.origin_rpy), "xyz": list(j.origin_xyz)}}
        if j.kind != FIXED:
            jd["axis"] = list(j.axis)
            jd["name"] = j.variable
        if j.limits is not None:
            jd["limits"] = list(j.limits)
        links.append({"name": link.name, "parent": link.parent, "joint": jd})
    geoms = []
    for body in scene.bodies:
        g: dict[str, Any] = {"link": body.link, "kind": body.kind}
        if body.name:
            g["name"] = body.name
        if body.kind == "sphere":
            g["center"] = body.center.tolist()
            g["radius"] = body.radius
        else:
            g["vertices"] = body.vertices.tolist()
        geoms.append(g)
    pairs = [{"geomA": p.a, "geomB": p.b} for p in scene.pairs]
    return {"version": SCENE_VERSION, "links": links, "geometries": geoms, "collision_pairs": pairs}


def plan_to_dict(plan: MotionPlan) -> dict:
    return {"version": 1, "segments": [s.to_dict() for s in plan.segments]}


__all__ += ["WORLD"]
