"""Triangle meshes: loading, validation, and procedural generators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError

MIN_TRIANGLE_AREA = 1e-12


@dataclass(frozen=True)
class TriangleMesh:
    """Immutable triangle mesh: (N, 3) float vertex positions and (F, 3) int faces."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValidationError(f"vertices must be (N, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValidationError(f"faces must be (F, 3), got {f.shape}")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        _validate(v, f)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    def face_areas(self) -> np.ndarray:
        return _face_areas(self.vertices, self.faces)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as a sorted (E, 2) index array."""
        f = self.faces
        e = np.vstack([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges()) + self.n_faces


def _face_areas(vertices, faces):
    p0 = vertices[faces[:, 0]]
    p1 = vertices[faces[:, 1]]
    p2 = vertices[faces[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)


def _validate(vertices, faces):
    n = vertices.shape[0]
    if faces.size:
        if faces.min() < 0 or faces.max() >= n:
            raise ValidationError(
                f"face index out of range [0, {n}): min {faces.min()}, max {faces.max()}"
            )
    for k in range(3):
        same = faces[:, k] == faces[:, (k + 1) % 3]
        if same.any():
            raise ValidationError(f"degenerate face (repeated vertex) at row {np.flatnonzero(same)[0]}")
    areas = _face_areas(vertices, faces)
    if faces.size and areas.min() <= MIN_TRIANGLE_AREA:
        raise ValidationError(
            f"triangle {int(np.argmin(areas))} has area {areas.min():.3e} <= {MIN_TRIANGLE_AREA}"
        )
    # edge-manifold: each undirected edge borders at most 2 faces
    e = np.vstack([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e.sort(axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    if counts.size and counts.max() > 2:
        raise ValidationError("non-manifold edge: an edge borders more than 2 faces")


# ---------------------------------------------------------------------------
# File I/O


def _data_lines(text):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def _parse_off(text) -> TriangleMesh:
    lines = list(_data_lines(text))
    if not lines:
        raise ParseError("empty OFF file")
    first = lines[0]
    if first.startswith("OFF"):
        rest = first[3:].strip()
        lines = ([rest] if rest else []) + lines[1:]
    else:
        raise ParseError("missing OFF header")
    if not lines:
        raise ParseError("missing counts line")
    counts = lines[0].split()
    if len(counts) < 2:
        raise ParseError(f"bad counts line: {lines[0]!r}")
    try:
        n_v, n_f = int(counts[0]), int(counts[1])
    except ValueError as exc:
        raise ParseError(f"bad counts line: {lines[0]!r}") from exc
    body = lines[1:]
    if len(body) < n_v + n_f:
        raise ParseError(f"expected {n_v} vertices and {n_f} faces, got {len(body)} data lines")
    try:
        vertices = np.array([[float(t) for t in body[i].split()[:3]] for i in range(n_v)])
    except (ValueError, IndexError) as exc:
        raise ParseError("malformed vertex line") from exc
    faces = []
    for i in range(n_f):
        toks = body[n_v + i].split()
        try:
            arity = int(toks[0])
            idx = [int(t) for t in toks[1 : 1 + arity]]
        except (ValueError, IndexError) as exc:
            raise ParseError(f"malformed face line: {body[n_v + i]!r}") from exc
        if len(idx) != arity or arity < 3:
            raise ParseError(f"malformed face line: {body[n_v + i]!r}")
        faces.extend(_fan_split(idx))
    return TriangleMesh(vertices, np.array(faces, dtype=np.int64).reshape(-1, 3))


def _fan_split(polygon):
    return [[polygon[0], polygon[i], polygon[i + 1]] for i in range(1, len(polygon) - 1)]


def _parse_obj(text) -> TriangleMesh:
    vertices = []
    faces = []
    for line in _data_lines(text):
        toks = line.split()
        if toks[0] == "v":
            if len(toks) < 4:
                raise ParseError(f"malformed vertex line: {line!r}")
            try:
                vertices.append([float(t) for t in toks[1:4]])
            except ValueError as exc:
                raise ParseError(f"malformed vertex line: {line!r}") from exc
        elif toks[0] == "f":
            try:
                idx = [int(t.split("/")[0]) for t in toks[1:]]
            except ValueError as exc:
                raise ParseError(f"malformed face line: {line!r}") from exc
            if len(idx) < 3:
                raise ParseError(f"face with fewer than 3 vertices: {line!r}")
            # OBJ indices are 1-based; negative indices count from the end
            idx = [i - 1 if i > 0 else len(vertices) + i for i in idx]
            faces.extend(_fan_split(idx))
    if not vertices:
        raise ParseError("OBJ file contains no vertices")
    return TriangleMesh(np.array(vertices), np.array(faces, dtype=np.int64).reshape(-1, 3))


def load_mesh(path, fmt=None) -> TriangleMesh:
    """Load an OFF or OBJ mesh. Format inferred from the extension when not given."""
    path = str(path)
    if fmt is None:
        fmt = path.rsplit(".", 1)[-1].lower()
    if fmt not in ("off", "obj"):
        raise ParseError(f"unsupported mesh format: {fmt!r}")
    with open(path) as fh:
        text = fh.read()
    return _parse_off(text) if fmt == "off" else _parse_obj(text)


def write_off(mesh: TriangleMesh, path) -> None:
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_faces} 0\n")
        for x, y, z in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        for i, j, k in mesh.faces:
            fh.write(f"3 {i} {j} {k}\n")


# ---------------------------------------------------------------------------
# Procedural generators


def generate_lshape(m: int) -> TriangleMesh:
    """Planar L-shaped domain (three unit squares), each square gridded m x m.

    Cells of the 2x2 bounding square are kept when they fall in
    [0,1]^2, [1,2]x[0,1] or [0,1]x[1,2]; each kept cell is split into
    two triangles along its diagonal.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    n = 2 * m
    index = -np.ones((n + 1, n + 1), dtype=np.int64)
    vertices = []
    for j in range(n + 1):
        for i in range(n + 1):
            # lattice point is used by some kept cell iff it touches the L
            if i <= m or j <= m:
                index[i, j] = len(vertices)
                vertices.append((i / m, j / m, 0.0))
    faces = []
    for i in range(n):
        for j in range(n):
            if i >= m and j >= m:
                continue
            a = index[i, j]
            b = index[i + 1, j]
            c = index[i + 1, j + 1]
            d = index[i, j + 1]
            faces.append((a, b, c))
            faces.append((a, c, d))
    return TriangleMesh(np.array(vertices), np.array(faces, dtype=np.int64))


_ICO_T = (1.0 + math.sqrt(5.0)) / 2.0

_ICO_VERTS = [
    (-1, _ICO_T, 0), (1, _ICO_T, 0), (-1, -_ICO_T, 0), (1, -_ICO_T, 0),
    (0, -1, _ICO_T), (0, 1, _ICO_T), (0, -1, -_ICO_T), (0, 1, -_ICO_T),
    (_ICO_T, 0, -1), (_ICO_T, 0, 1), (-_ICO_T, 0, -1), (-_ICO_T, 0, 1),
]

_ICO_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def generate_sphere(subdiv_level: int) -> TriangleMesh:
    """Icosahedron subdivided `subdiv_level` times, vertices on the unit sphere."""
    if subdiv_level < 0:
        raise ValueError("subdiv_level must be >= 0")
    verts = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in _ICO_VERTS]
    faces = list(_ICO_FACES)
    for _ in range(subdiv_level):
        midpoint = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64))
