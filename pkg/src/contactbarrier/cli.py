"""Batch driver: run a scene and write per-step diagnostics and geometry.

Outputs in ``--out``:

- ``summary.csv``: one row per step (step 0 is the initial state) with
  ``step, time, newton_iterations, total_energy, elastic_energy,
  contact_energy, friction_energy, min_distance, max_grad, min_height``.
- ``frame_%06d.obj``: surface triangles (3D) or boundary line loops at
  ``z = 0`` (2D).
- ``terms_%06d.csv`` with ``--dump-terms``: ``kind, a, b, distance, gamma,
  weight, energy, force`` for every term with a nonzero directional factor.

``--scene`` accepts a JSON file or the name of a built-in scene, optionally
with a level, e.g. ``corner_drop:2``. ``THREADS`` caps thread pools.
"""

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

log = logging.getLogger("contactbarrier")

SUMMARY_COLUMNS = ["step", "time", "newton_iterations", "total_energy", "elastic_energy",
                   "contact_energy", "friction_energy", "min_distance", "max_grad", "min_height"]
TERM_COLUMNS = ["kind", "a", "b", "distance", "gamma", "weight", "energy", "force"]

EXIT_SOLVER = 1
EXIT_SCENE = 2


def _limit_threads():
    n = os.environ.get("THREADS")
    if not n:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, n)
    flags = os.environ.get("XLA_FLAGS", "")
    os.environ["XLA_FLAGS"] = (flags + f" --xla_cpu_multi_thread_eigen={'false' if n == '1' else 'true'}"
                               f" intra_op_parallelism_threads={n}").strip()


def _fmt(v):
    return repr(float(v))


def build_parser():
    p = argparse.ArgumentParser(prog="contactbarrier", description=__doc__.split("\n")[0])
    p.add_argument("--scene", required=True, help="scene JSON file or built-in scene name[:level]")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--potential", choices=["geometric", "ipc"], default="geometric")
    p.add_argument("--steps", type=int, default=0, help="number of time steps (0: initial state only)")
    p.add_argument("--dump-terms", action="store_true", help="write per-step contact terms")
    p.add_argument("--validate-only", action="store_true", help="check the scene and exit")
    p.add_argument("--static", action="store_true", help="solve for equilibrium instead of stepping")
    p.add_argument("--no-frames", action="store_true", help="skip OBJ output")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def resolve_scene(spec):
    """Load ``spec`` as a file, or build the named scene."""
    from .mesh import load_scene
    from .scenes import BUILDERS

    path = Path(spec)
    if path.exists():
        return load_scene(path)
    name, _, level = spec.partition(":")
    if name not in BUILDERS:
        raise FileNotFoundError(f"no scene file or built-in scene named {spec!r}")
    return BUILDERS[name](int(level)) if level else BUILDERS[name]()


def write_obj(path, mesh, X):
    with open(path, "w") as f:
        if mesh.dim == 2:
            for x, y in X:
                f.write(f"v {x!r} {y!r} 0.0\n")
            for a, b in mesh.boundary_edges:
                f.write(f"l {a + 1} {b + 1}\n")
        else:
            for x, y, z in X:
                f.write(f"v {x!r} {y!r} {z!r}\n")
            for a, b, c in mesh.boundary_faces:
                f.write(f"f {a + 1} {b + 1} {c + 1}\n")


def write_terms(path, contact_eval):
    import numpy as np

    info = contact_eval.info
    keys = np.asarray(info["keys"]).reshape(-1, 2) if len(info["kind"]) else np.zeros((0, 2), int)
    gamma = np.asarray(info["gamma"])
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TERM_COLUMNS)
        for i in np.flatnonzero(gamma > 0):
            w.writerow([info["kind"][i], int(keys[i, 0]), int(keys[i, 1]), _fmt(info["d"][i]),
                        _fmt(gamma[i]), _fmt(info["weight"][i]), _fmt(info["energy"][i]),
                        _fmt(info["lam"][i])])


def run(args):
    """Execute one configuration; returns the process exit status."""
    from .dynamics import SolverError, Simulator
    from .mesh import MeshError, SceneFormatError
    from .potential import ContactError
    from .validation import validate_scene

    if args.steps < 0:
        log.error("--steps must be non-negative")
        return EXIT_SCENE
    try:
        scene = resolve_scene(args.scene)
    except (MeshError, SceneFormatError, FileNotFoundError, ValueError) as exc:
        log.error("invalid scene: %s", exc)
        return EXIT_SCENE
    report = validate_scene(scene)
    if args.validate_only:
        print(report.format())
        return 0 if report.ok else EXIT_SCENE
    if not report.ok:
        print(report.format(), file=sys.stderr)
        return EXIT_SCENE

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        sim = Simulator(scene, potential=args.potential)
    except (SolverError, ContactError) as exc:
        log.error("setup failed: %s", exc)
        return EXIT_SOLVER
    state = sim.initial_state()
    rows = []

    def record(k, st, diag):
        rows.append([str(k), _fmt(diag["time"]), str(int(diag["newton_iterations"]))]
                    + [_fmt(diag[c]) for c in SUMMARY_COLUMNS[3:]])
        if not args.no_frames:
            write_obj(out / f"frame_{k:06d}.obj", scene.mesh, st.positions)
        if args.dump_terms:
            write_terms(out / f"terms_{k:06d}.csv", sim.potential.evaluate(st.positions, 0))

    status = 0
    try:
        record(0, state, sim.diagnose(state))
        if args.static:
            state = sim.static_solve(state)
            record(1, state, state.diagnostics)
        for k in range(1, 0 if args.static else args.steps + 1):
            state = sim.step(state)
            record(k, state, state.diagnostics)
            log.info("step %d: %d iterations, contact %.6g", k, state.diagnostics["newton_iterations"],
                     state.diagnostics["contact_energy"])
    except (SolverError, ContactError) as exc:
        log.error("solver failed: %s", exc)
        status = EXIT_SOLVER
    with open(out / "summary.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(rows)
    return status


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    _limit_threads()
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
