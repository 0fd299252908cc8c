"""Batch front-end: single runs, paired accelerated-vs-baseline comparisons, file output."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import acceleration, mesh as meshmod, spectra
from .errors import ParseError
from .operators import LaplaceOperator, build_laplacian
from .solver import SolveConfig, initialize

RNG_NAME = "numpy.random.default_rng (PCG64)"
SPARSITY_TOL = 1e-5


def parse_generator_spec(spec: str) -> meshmod.TriangleMesh:
    """Build a mesh from a compact `name:key=value[,key=value]` spec."""
    name, _, argstr = spec.partition(":")
    kwargs = {}
    if argstr:
        for item in argstr.split(","):
            key, _, value = item.partition("=")
            try:
                kwargs[key.strip()] = int(value)
            except ValueError as exc:
                raise ParseError(f"bad generator argument {item!r} in {spec!r}") from exc
    if name == "lshape":
        return meshmod.generate_lshape(kwargs.pop("m", 8))
    if name == "sphere":
        return meshmod.generate_sphere(kwargs.pop("level", 2))
    raise ParseError(f"unknown generator {name!r} (expected lshape or sphere)")


@dataclass
class RunSpec:
    """Everything needed to reproduce one solve."""

    mesh_path: str | None = None
    generate: str | None = None
    mass: str = "lumped"
    order_by: str = "compressed"
    flip: str = "extremum"
    config: SolveConfig = field(default_factory=lambda: SolveConfig(mu=0.02, k=10))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["config"] = dataclasses.asdict(self.config)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunSpec":
        d = dict(d)
        d["config"] = SolveConfig(**d["config"])
        return cls(**d)

    def load_mesh(self) -> meshmod.TriangleMesh:
        if (self.mesh_path is None) == (self.generate is None):
            raise ValueError("exactly one of mesh_path and generate must be set")
        if self.mesh_path is not None:
            return meshmod.load_mesh(self.mesh_path)
        return parse_generator_spec(self.generate)


@dataclass
class RunReport:
    spec: RunSpec
    converged: bool
    iterations: int
    wall_time: float
    final_primal: float
    final_dual: float
    eigenvalues: list
    accuracy: list
    sparsity: float
    orthonormality_error: float
    init_checksum: str

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["spec"] = self.spec.to_dict()
        d["rng"] = RNG_NAME
        return d


def _init_checksum(state) -> str:
    h = hashlib.sha256()
    for m in (state.Phi, state.E, state.S):
        h.update(np.ascontiguousarray(m).tobytes())
    return h.hexdigest()


def execute(spec: RunSpec, op: LaplaceOperator | None = None, trace_path=None):
    """Run one solve; returns (ModeSet, ConvergenceTrace, RunReport)."""
    if op is None:
        op = build_laplacian(spec.load_mesh(), spec.mass)
    cfg = spec.config.validate()
    state = initialize(op, cfg)
    checksum = _init_checksum(state)
    t0 = time.perf_counter()
    modes, trace = acceleration.solve(
        op, cfg, trace_path=trace_path, order_by=spec.order_by, flip=spec.flip,
        initial_state=state,
    )
    wall = time.perf_counter() - t0
    primal, dual, _ = trace.rows[-1][1:4] if trace.rows else (np.nan, np.nan, np.nan)
    gram = modes.modes.T @ (op.mass @ modes.modes)
    report = RunReport(
        spec=spec,
        converged=trace.converged,
        iterations=trace.iterations,
        wall_time=wall,
        final_primal=float(trace.rows[-1][1]),
        final_dual=float(trace.rows[-1][2]),
        eigenvalues=[float(x) for x in modes.compressed_eigenvalues],
        accuracy=[float(x) for x in modes.accuracy],
        sparsity=float(np.mean(np.abs(modes.modes) < SPARSITY_TOL)),
        orthonormality_error=float(np.abs(gram - np.eye(modes.k)).max()),
        init_checksum=checksum,
    )
    return modes, trace, report


def write_modes_csv(modeset: spectra.ModeSet, path) -> None:
    header = ",".join(f"mode_{j + 1}" for j in range(modeset.k))
    np.savetxt(path, modeset.modes, delimiter=",", header=header, comments="", fmt="%.17g")


def run(spec: RunSpec, out_dir, ply_mode: int | None = None):
    """Execute one solve and write modes.csv, eigenvalues.csv, trace.csv, report.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mesh = spec.load_mesh()
    op = build_laplacian(mesh, spec.mass)
    modes, trace, report = execute(spec, op=op, trace_path=out / "trace.csv")
    write_modes_csv(modes, out / "modes.csv")
    spectra.write_eigenvalue_table(modes, out / "eigenvalues.csv")
    with open(out / "report.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    if ply_mode is not None:
        write_ply(mesh, out / "modes.ply", scalar=modes.modes[:, ply_mode])
    return modes, trace, report


@dataclass
class ComparisonReport:
    pairs: list  # (seed, fast RunReport, vanilla RunReport)
    mean_iter_reduction: float
    median_iter_reduction: float
    mean_time_reduction: float
    median_time_reduction: float

    def to_dict(self) -> dict:
        return {
            "pairs": [
                {"seed": s, "fast": f.to_dict(), "vanilla": v.to_dict()}
                for s, f, v in self.pairs
            ],
            "mean_iter_reduction": self.mean_iter_reduction,
            "median_iter_reduction": self.median_iter_reduction,
            "mean_time_reduction": self.mean_time_reduction,
            "median_time_reduction": self.median_time_reduction,
        }


def _reduction(fast: float, vanilla: float) -> float:
    return 100.0 * (1.0 - fast / vanilla) if vanilla else 0.0


def compare(spec: RunSpec, seeds) -> ComparisonReport:
    """Run both variants from identical initializations for each seed."""
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValueError("compare needs at least 2 seeds")
    op = build_laplacian(spec.load_mesh(), spec.mass)

    def one_arm(seed, variant):
        arm = dataclasses.replace(
            spec, config=dataclasses.replace(spec.config, seed=seed, variant=variant)
        )
        _, _, report = execute(arm, op=op)
        return report

    def one_pair(seed):
        fast = one_arm(seed, "fast_admm")
        vanilla = one_arm(seed, "admm")
        if fast.init_checksum != vanilla.init_checksum:
            raise AssertionError("paired arms consumed different initializations")
        return seed, fast, vanilla

    workers = max(1, int(os.environ.get("CMMODE_THREADS", "1")))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(one_pair, seeds))
    else:
        pairs = [one_pair(s) for s in seeds]
    pairs.sort(key=lambda p: seeds.index(p[0]))

    iter_red = [_reduction(f.iterations, v.iterations) for _, f, v in pairs]
    time_red = [_reduction(f.wall_time, v.wall_time) for _, f, v in pairs]
    return ComparisonReport(
        pairs=pairs,
        mean_iter_reduction=float(np.mean(iter_red)),
        median_iter_reduction=float(np.median(iter_red)),
        mean_time_reduction=float(np.mean(time_red)),
        median_time_reduction=float(np.median(time_red)),
    )


def _diverging_color(t: float):
    """Map [-1, 1] to a blue-white-red ramp."""
    t = max(-1.0, min(1.0, t))
    if t >= 0:
        return 255, int(round(255 * (1 - t))), int(round(255 * (1 - t)))
    return int(round(255 * (1 + t))), int(round(255 * (1 + t))), 255


def write_ply(mesh: meshmod.TriangleMesh, path, scalar=None) -> None:
    """ASCII PLY; an optional per-vertex scalar becomes a red(+)/blue(-) vertex color."""
    colors = None
    if scalar is not None:
        peak = float(np.abs(scalar).max()) or 1.0
        colors = [_diverging_color(s / peak) for s in scalar]
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {mesh.n_vertices}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        if colors is not None:
            fh.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        fh.write(f"element face {mesh.n_faces}\n")
        fh.write("property list uchar int vertex_indices\nend_header\n")
        for i, (x, y, z) in enumerate(mesh.vertices):
            line = f"{x:.9g} {y:.9g} {z:.9g}"
            if colors is not None:
                r, g, b = colors[i]
                line += f" {r} {g} {b}"
            fh.write(line + "\n")
        for a, b, c in mesh.faces:
            fh.write(f"3 {a} {b} {c}\n")
