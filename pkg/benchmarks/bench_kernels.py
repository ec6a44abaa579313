"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Checks that both backends agree on every benchmark input before timing.
"""
from __future__ import annotations

import argparse
import json
import math
import timeit

import numpy as np

from navgap.kernels import available_backends
from navgap.simulator import SensorSpec
from navgap.worldgen import WorldGenSpec, generate_world

MM = 1000  # lattice cost unit: 1 mm


def workloads(world, n_rays: int):
    obst = world.obstacle
    res = world.resolution
    sensor = SensorSpec(n_rays, math.pi, 5.0)
    free = np.argwhere(world.clearance_mask(0.1))
    rng = np.random.default_rng(0)
    poses = [(world.cell_center(int(i), int(j)), float(h))
             for (i, j), h in zip(free[rng.choice(len(free), 50)], rng.uniform(0, 2 * math.pi, 50))]
    goal = np.zeros(obst.shape, dtype=np.uint8)
    gi, gj = free[len(free) // 2]
    goal[gi, gj] = 1

    def raycast(k):
        for (x, y), h in poses:
            k.raycast(obst, world.cells, res, x, y, sensor.angles(h), sensor.max_range)

    def edges(k):
        return k.forward_edges(obst, res, 0.1)

    fwd = available_backends()["python"].forward_edges(obst, res, 0.1)
    ok = world.clearance_mask(0.1).astype(np.uint8)

    def dijkstra(k):
        return k.cost_to_go(ok, fwd, goal, 4, int(0.25 * MM), int(0.05 * MM))

    return {"raycast x50 poses": raycast, "forward_edges": edges, "cost_to_go": dijkstra}


def check_agreement(backends, world, n_rays):
    py, cy = backends["python"], backends.get("cython")
    if cy is None:
        return
    sensor = SensorSpec(n_rays, math.pi, 5.0)
    x, y = world.cell_center(*np.argwhere(world.clearance_mask(0.1))[0])
    a = py.raycast(world.obstacle, world.cells, world.resolution, x, y, sensor.angles(0.3), 5.0)
    b = cy.raycast(world.obstacle, world.cells, world.resolution, x, y, sensor.angles(0.3), 5.0)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]), "raycast backends disagree"
    assert np.array_equal(py.forward_edges(world.obstacle, world.resolution, 0.1),
                          cy.forward_edges(world.obstacle, world.resolution, 0.1)), "edge backends disagree"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--size", type=float, default=20.0, help="world side in metres")
    ap.add_argument("--rays", type=int, default=64)
    ap.add_argument("--json")
    args = ap.parse_args(argv)

    world = generate_world(WorldGenSpec(args.size, args.size, obstacle_density=0.2), seed=1)
    backends = available_backends()
    check_agreement(backends, world, args.rays)
    rows = []
    for name, fn in workloads(world, args.rays).items():
        times = {}
        for bname, mod in backends.items():
            times[bname] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
        rows.append({"kernel": name, **{f"{b}_s": t for b, t in times.items()}, "speedup": speedup})

    print(f"world {world.obstacle.shape[1]}x{world.obstacle.shape[0]} cells, backends: {', '.join(backends)}")
    print(f"{'kernel':20s} {'python [s]':>12s} {'cython [s]':>12s} {'speedup':>9s}")
    for r in rows:
        print(f"{r['kernel']:20s} {r['python_s']:12.5f} {r.get('cython_s', float('nan')):12.5f} {r['speedup']:9.1f}")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(rows, f, indent=2)


if __name__ == "__main__":
    main()
