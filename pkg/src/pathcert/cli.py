"""Command-line interface.

Exit codes: 0 SAFE (or no collision / FK agreement), 1 NSAFE with a confirmed
collision, 2 NSAFE without a confirmed collision, 3 invalid input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checker import SAFE, CollisionFound, certify_plan, sample_falsify
from .conic import SolverOptions, export_standard
from .kinematics import REVOLUTE, WORLD, forward_kinematics_rational, numeric_link_transforms, \
    numeric_point_positions
from .scene import SceneError, read_plan, read_scene
from .soscert import assemble_pair_program

__all__ = ["main", "RunConfig", "EXIT_SAFE", "EXIT_COLLISION", "EXIT_UNCERTIFIED", "EXIT_INPUT"]

EXIT_SAFE, EXIT_COLLISION, EXIT_UNCERTIFIED, EXIT_INPUT = 0, 1, 2, 3
OUTPUT_VERSION = 1
FK_TOLERANCE = 1e-9

log = logging.getLogger("pathcert")


@dataclass(frozen=True)
class RunConfig:
    scene: Path
    plan: Path | None = None
    degree: int = 1
    jobs: int = 1
    out: Path | None = None
    falsify_n: int = 100_000
    exact_verify: bool = False
    early_stop: bool = False
    grid: int = 100

    def __post_init__(self):
        if not Path(self.scene).is_file():
            raise SceneError(f"scene file not found: {self.scene}")
        if self.plan is not None and not Path(self.plan).is_file():
            raise SceneError(f"plan file not found: {self.plan}")
        if self.degree < 0:
            raise SceneError("--degree must be non-negative")
        if self.jobs < 1:
            raise SceneError("--jobs must be at least 1")
        if self.falsify_n < 2:
            raise SceneError("--falsify-n must be at least 2")
        if self.grid < 1:
            raise SceneError("--grid must be positive")


def _write_json(path: Path, kind: str, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"format": f"pathcert-{kind}", "version": OUTPUT_VERSION, **payload}
    path.write_text(json.dumps(doc, indent=1, sort_keys=False) + "\n")


def cmd_certify(cfg: RunConfig) -> int:
    scene = read_scene(cfg.scene)
    plan = read_plan(cfg.plan, scene.chain)
    report = certify_plan(plan, scene, cfg.degree, jobs=cfg.jobs, early_stop=cfg.early_stop,
                          exact_verify=cfg.exact_verify, solver_options=SolverOptions.from_env())
    summary = report.to_dict()
    code = EXIT_SAFE
    falsify = None
    if report.verdict != SAFE:
        failing_segments = sorted({c.segment for c in report.failing})
        falsify = sample_falsify(plan, scene, cfg.falsify_n, segments=failing_segments)
        code = EXIT_COLLISION if isinstance(falsify, CollisionFound) else EXIT_UNCERTIFIED
        summary["falsify"] = falsify.to_dict()
        hints = sorted({c.hint for c in report.failing if c.hint})
        if hints:
            summary["hints"] = hints
    if cfg.out is not None:
        out = Path(cfg.out)
        for cell in report.cells:
            name = f"seg{cell.segment}_pair{cell.pair_index}.json"
            payload = {"cell": cell.to_dict(),
                       "certificate": None if cell.certificate is None else cell.certificate.to_dict()}
            _write_json(out / "certificates" / name, "cell", payload)
        _write_json(out / "summary.json", "summary", summary)
    print(f"verdict: {report.verdict}  segments: {report.n_segments}  pairs: {report.n_pairs}  "
          f"safe cells: {summary['safe_cells']}/{summary['cells']}  solver time: {summary['solver_time_total']:.3f}s")
    for cell in report.failing:
        print(f"  NSAFE cell seg{cell.segment} pair{cell.pair_index}: {cell.solve_status} {cell.message}".rstrip())
    if isinstance(falsify, CollisionFound):
        print(f"collision witness: segment {falsify.segment} t={falsify.t:.6g} pair {falsify.pair_index} "
              f"distance={falsify.min_distance:.3g} config={falsify.configuration}")
    elif falsify is not None:
        print(f"no collision found in {falsify.samples} samples; plan is uncertified")
    return code


def cmd_falsify(cfg: RunConfig) -> int:
    scene = read_scene(cfg.scene)
    plan = read_plan(cfg.plan, scene.chain)
    rep = sample_falsify(plan, scene, cfg.falsify_n)
    if cfg.out is not None:
        _write_json(Path(cfg.out) / "falsify.json", "falsify", rep.to_dict())
    if isinstance(rep, CollisionFound):
        print(f"CollisionFound segment {rep.segment} t={rep.t:.6g} pair {rep.pair_index} "
              f"distance={rep.min_distance:.3g} config={rep.configuration}")
        return EXIT_COLLISION
    print(f"NoneFound ({rep.samples} samples)")
    return EXIT_SAFE


def cmd_export(cfg: RunConfig) -> int:
    scene = read_scene(cfg.scene)
    plan = read_plan(cfg.plan, scene.chain)
    out = Path(cfg.out if cfg.out is not None else ".")
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for s_idx, seg in enumerate(plan.unit_segments()):
        for p_idx, pair in enumerate(scene.pairs):
            prog = assemble_pair_program(pair, seg, scene, cfg.degree, pair_index=p_idx, segment_index=s_idx)
            (out / f"seg{s_idx}_pair{p_idx}.dat-s").write_text(export_standard(prog.problem))
            count += 1
    print(f"wrote {count} file(s) to {out}")
    return EXIT_SAFE


def fk_deviation(scene, grid: int = 100, seed: int = 0) -> float:
    """Max |symbolic - numeric| FK deviation over a deterministic configuration grid."""
    chain = scene.chain
    rng = np.random.default_rng(seed)
    config = {}
    for link in chain.movable_links:
        j = link.joint
        lo, hi = j.limits if j.limits is not None else ((-2.5, 2.5) if j.kind == REVOLUTE else (-2.0, 2.0))
        if j.kind == REVOLUTE:
            lo, hi = np.tan(lo / 2), np.tan(hi / 2)
        config[j.variable] = rng.uniform(lo, hi, grid)
    T = numeric_link_transforms(chain, config) if chain.dof else numeric_link_transforms(chain, {})
    points: dict[str, list] = {name: [(0.0, 0.0, 0.0)] for name in chain.link_names if name != WORLD}
    for body in scene.bodies:
        if body.link != WORLD:
            points.setdefault(body.link, []).extend(map(tuple, body.points))
    worst = 0.0
    for link, pts in points.items():
        num = numeric_point_positions(T, link, pts)
        for k, pt in enumerate(pts):
            fk = forward_kinematics_rational(chain, WORLD, link, pt)
            n = grid if chain.dof else 1
            sym = np.array([fk.evaluate({v: float(config[v][i]) for v in config}) for i in range(n)])
            worst = max(worst, float(np.max(np.abs(sym - num[:n, k]))))
    return worst


def cmd_fk_check(cfg: RunConfig) -> int:
    scene = read_scene(cfg.scene)
    dev = fk_deviation(scene, cfg.grid)
    print(f"max |symbolic - numeric| = {dev:.3e} over {cfg.grid} configurations")
    return EXIT_SAFE if dev <= FK_TOLERANCE else EXIT_UNCERTIFIED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathcert", description="Certify polynomial motion plans collision-free.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, plan=True):
        p.add_argument("--scene", required=True, type=Path)
        if plan:
            p.add_argument("--plan", required=True, type=Path)
        p.add_argument("--out", type=Path)

    p = sub.add_parser("certify", help="certify every (segment, pair) cell")
    common(p)
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--falsify-n", type=int, default=100_000)
    p.add_argument("--exact-verify", action="store_true")
    p.add_argument("--early-stop", action="store_true")

    p = sub.add_parser("falsify", help="search the plan for collisions by dense sampling")
    common(p)
    p.add_argument("--falsify-n", type=int, default=100_000)

    p = sub.add_parser("export", help="write one SDPA file per (segment, pair) cell")
    common(p)
    p.add_argument("--degree", type=int, default=1)

    p = sub.add_parser("fk-check", help="compare symbolic and numeric forward kinematics")
    common(p, plan=False)
    p.add_argument("--grid", type=int, default=100)
    return parser


_COMMANDS = {"certify": cmd_certify, "falsify": cmd_falsify, "export": cmd_export, "fk-check": cmd_fk_check}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_SAFE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    fields = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__}
    try:
        cfg = RunConfig(**fields)
        return _COMMANDS[args.command](cfg)
    except (SceneError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
