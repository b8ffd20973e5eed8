"""Triangle meshes: OBJ/PLY I/O, vertex normals, edge vertices, visibility."""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels


class MeshError(ValueError):
    pass


class MeshParseError(MeshError):
    def __init__(self, message: str, path=None, line: int | None = None,
                 offset: int | None = None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.path = path
        self.line = line
        self.offset = offset


class EmptyMeshError(MeshError):
    pass


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray
    vertex_normals: np.ndarray
    normals_from_file: bool = False

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.ascontiguousarray(self.faces, dtype=np.int64).reshape(-1, 3)
        n = np.ascontiguousarray(self.vertex_normals, dtype=np.float64).reshape(-1, 3)
        if f.shape[0] == 0:
            raise EmptyMeshError("mesh has no faces")
        if f.min() < 0 or f.max() >= v.shape[0]:
            raise MeshError("face index out of range")
        if n.shape != v.shape:
            raise MeshError("need exactly one normal per vertex")
        for a in (v, f, n):
            a.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "vertex_normals", n)

    @classmethod
    def from_arrays(cls, vertices, faces, normals=None) -> "TriangleMesh":
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        if faces.shape[0] == 0:
            raise EmptyMeshError("mesh has no faces")
        if faces.min() < 0 or faces.max() >= len(vertices):
            raise MeshError("face index out of range")
        if normals is None:
            return cls(vertices, faces, area_weighted_normals(vertices, faces))
        return cls(vertices, faces, _unit(np.asarray(normals, dtype=np.float64)),
                   normals_from_file=True)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    def face_normals(self) -> np.ndarray:
        """Unit face normals; degenerate faces get a zero vector."""
        v = self.vertices
        cr = np.cross(v[self.faces[:, 1]] - v[self.faces[:, 0]],
                      v[self.faces[:, 2]] - v[self.faces[:, 0]])
        return _unit(cr, zero_ok=True)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def diagonal(self) -> float:
        lo, hi = self.bounds()
        return float(np.linalg.norm(hi - lo))

    def transformed(self, rotation=None, translation=None) -> "TriangleMesh":
        R = np.eye(3) if rotation is None else np.asarray(rotation, float)
        t = np.zeros(3) if translation is None else np.asarray(translation, float)
        return TriangleMesh(self.vertices @ R.T + t, self.faces,
                            self.vertex_normals @ R.T, self.normals_from_file)


@dataclass(frozen=True)
class EdgeVertexSet:
    indices: frozenset
    dihedral_threshold: float

    def mask(self, n_vertices: int) -> np.ndarray:
        m = np.zeros(n_vertices, dtype=bool)
        if self.indices:
            m[np.fromiter(self.indices, dtype=np.int64)] = True
        return m

    def __contains__(self, i) -> bool:
        return i in self.indices

    def __len__(self) -> int:
        return len(self.indices)


def _unit(a: np.ndarray, zero_ok: bool = False) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    norm = np.linalg.norm(a, axis=-1, keepdims=True)
    if not zero_ok and np.any(norm == 0):
        raise MeshError("zero-length normal")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(norm > 0, a / np.where(norm > 0, norm, 1.0), 0.0)
    return out


def area_weighted_normals(vertices, faces) -> np.ndarray:
    """Sum of adjacent (unnormalised) face cross products, then normalised.

    Vertices touched by no face, or whose contributions cancel, get +z so
    the unit-length invariant still holds.
    """
    v = np.asarray(vertices, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    cr = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    acc = np.zeros_like(v)
    for c in range(3):
        np.add.at(acc, f[:, c], cr)
    norm = np.linalg.norm(acc, axis=1)
    acc[norm == 0] = (0.0, 0.0, 1.0)
    norm[norm == 0] = 1.0
    return acc / norm[:, None]


# ---------------------------------------------------------------- loading


def load_mesh(path, scale: float = 1.0) -> TriangleMesh:
    """Read an OBJ or PLY (ascii / binary little-endian) triangle mesh.

    ``scale`` multiplies coordinates, e.g. 1e-3 for files in millimetres.
    Polygons are fan-triangulated.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"mesh file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".obj":
        verts, faces, normals = _read_obj(path)
    elif suffix == ".ply":
        verts, faces, normals = _read_ply(path)
    else:
        raise MeshParseError(f"unsupported mesh extension {suffix!r}", path)
    if len(faces) == 0:
        raise EmptyMeshError(f"{path}: mesh has no faces")
    verts = np.asarray(verts, dtype=np.float64).reshape(-1, 3) * scale
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if normals is not None:
        normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        if np.any(np.linalg.norm(normals, axis=1) == 0):
            normals = None
    return TriangleMesh.from_arrays(verts, faces, normals)


def _fan(poly):
    return [(poly[0], poly[i], poly[i + 1]) for i in range(1, len(poly) - 1)]


def _read_obj(path: Path):
    verts, vn, faces = [], [], []
    vert_normal: dict[int, int] = {}
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tag, *rest = line.split()
            try:
                if tag == "v":
                    if len(rest) < 3:
                        raise ValueError("vertex needs 3 coordinates")
                    verts.append([float(x) for x in rest[:3]])
                elif tag == "vn":
                    vn.append([float(x) for x in rest[:3]])
                elif tag == "f":
                    if len(rest) < 3:
                        raise ValueError("face needs at least 3 vertices")
                    poly = []
                    for tok in rest:
                        parts = tok.split("/")
                        vi = int(parts[0])
                        vi = vi - 1 if vi > 0 else len(verts) + vi
                        if not 0 <= vi < len(verts):
                            raise ValueError(f"vertex index {parts[0]} out of range")
                        if len(parts) >= 3 and parts[2]:
                            ni = int(parts[2])
                            ni = ni - 1 if ni > 0 else len(vn) + ni
                            if not 0 <= ni < len(vn):
                                raise ValueError(f"normal index {parts[2]} out of range")
                            vert_normal.setdefault(vi, ni)
                        poly.append(vi)
                    faces.extend(_fan(poly))
            except ValueError as exc:
                raise MeshParseError(str(exc), path, line=lineno) from None
    normals = None
    if verts and vert_normal and len(vert_normal) == len(verts):
        normals = [vn[vert_normal[i]] for i in range(len(verts))]
    return verts, faces, normals


_PLY_TYPES = {
    "char": "b", "int8": "b", "uchar": "B", "uint8": "B",
    "short": "h", "int16": "h", "ushort": "H", "uint16": "H",
    "int": "i", "int32": "i", "uint": "I", "uint32": "I",
    "float": "f", "float32": "f", "double": "d", "float64": "d",
}


def _read_ply(path: Path):
    data = path.read_bytes()
    if not data.startswith(b"ply"):
        raise MeshParseError("missing 'ply' magic", path, offset=0)
    end = data.find(b"end_header")
    if end < 0:
        raise MeshParseError("missing end_header", path)
    nl = data.find(b"\n", end)
    body_start = len(data) if nl < 0 else nl + 1
    header = data[:end].decode("ascii", errors="replace").splitlines()
    fmt = None
    elements: list[dict] = []
    for lineno, line in enumerate(header, 1):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            elements.append({"name": tok[1], "count": int(tok[2]), "props": []})
        elif tok[0] == "property":
            if not elements:
                raise MeshParseError("property before element", path, line=lineno)
            if tok[1] == "list":
                if tok[2] not in _PLY_TYPES or tok[3] not in _PLY_TYPES:
                    raise MeshParseError(f"unknown type in {line!r}", path, line=lineno)
                elements[-1]["props"].append((tok[4], _PLY_TYPES[tok[2]], _PLY_TYPES[tok[3]]))
            else:
                if tok[1] not in _PLY_TYPES:
                    raise MeshParseError(f"unknown type {tok[1]!r}", path, line=lineno)
                elements[-1]["props"].append((tok[2], None, _PLY_TYPES[tok[1]]))
    if fmt == "ascii":
        rows = _ply_ascii_rows(data[body_start:], elements, path, len(header) + 1)
    elif fmt == "binary_little_endian":
        rows = _ply_binary_rows(data, body_start, elements, path)
    else:
        raise MeshParseError(f"unsupported PLY format {fmt!r}", path, line=2)

    verts, normals, faces = [], [], []
    for el in elements:
        names = [p[0] for p in el["props"]]
        if el["name"] == "vertex":
            try:
                ix = [names.index(a) for a in ("x", "y", "z")]
            except ValueError:
                raise MeshParseError("vertex element lacks x/y/z", path) from None
            has_n = all(a in names for a in ("nx", "ny", "nz"))
            inn = [names.index(a) for a in ("nx", "ny", "nz")] if has_n else []
            for row in rows[el["name"]]:
                verts.append([row[i] for i in ix])
                if has_n:
                    normals.append([row[i] for i in inn])
        elif el["name"] == "face":
            li = next((i for i, p in enumerate(el["props"])
                       if p[0] in ("vertex_indices", "vertex_index")), None)
            if li is None:
                raise MeshParseError("face element lacks vertex_indices", path)
            for n_face, row in enumerate(rows[el["name"]]):
                poly = [int(x) for x in row[li]]
                if len(poly) < 3 or min(poly) < 0 or max(poly) >= len(verts):
                    raise MeshParseError(
                        f"face {n_face} has invalid indices {poly} "
                        f"for {len(verts)} vertices", path)
                faces.extend(_fan(poly))
    return verts, faces, (normals if normals else None)


def _ply_ascii_rows(body: bytes, elements, path, first_line):
    lines = body.decode("ascii", errors="replace").splitlines()
    rows: dict[str, list] = {}
    pos = 0
    for el in elements:
        out = []
        for _ in range(el["count"]):
            while pos < len(lines) and not lines[pos].strip():
                pos += 1
            if pos >= len(lines):
                raise MeshParseError(f"unexpected end of data in {el['name']}",
                                     path, line=first_line + pos)
            tok = lines[pos].split()
            lineno = first_line + pos
            pos += 1
            row, t = [], 0
            try:
                for _name, count_t, val_t in el["props"]:
                    if count_t is not None:
                        cnt = int(tok[t])
                        t += 1
                        row.append([_num(x, val_t) for x in tok[t:t + cnt]])
                        if len(row[-1]) != cnt:
                            raise ValueError("short list")
                        t += cnt
                    else:
                        row.append(_num(tok[t], val_t))
                        t += 1
            except (ValueError, IndexError) as exc:
                raise MeshParseError(f"bad {el['name']} record: {exc}", path,
                                     line=lineno) from None
            out.append(row)
        rows[el["name"]] = out
    return rows


def _num(text: str, code: str):
    return float(text) if code in "fd" else int(text)


def _ply_binary_rows(data: bytes, pos: int, elements, path):
    rows: dict[str, list] = {}
    for el in elements:
        props = el["props"]
        out = []
        if all(p[1] is None for p in props):
            st = struct.Struct("<" + "".join(p[2] for p in props))
            need = st.size * el["count"]
            if pos + need > len(data):
                raise MeshParseError(f"truncated {el['name']} block", path, offset=pos)
            out = [list(r) for r in st.iter_unpack(data[pos:pos + need])]
            pos += need
        else:
            for _ in range(el["count"]):
                row = []
                for _name, count_t, val_t in props:
                    try:
                        if count_t is not None:
                            (cnt,) = struct.unpack_from("<" + count_t, data, pos)
                            pos += struct.calcsize(count_t)
                            vals = struct.unpack_from(f"<{cnt}{val_t}", data, pos)
                            pos += struct.calcsize(f"<{cnt}{val_t}")
                            row.append(list(vals))
                        else:
                            (val,) = struct.unpack_from("<" + val_t, data, pos)
                            pos += struct.calcsize(val_t)
                            row.append(val)
                    except struct.error:
                        raise MeshParseError(f"truncated {el['name']} record",
                                             path, offset=pos) from None
                out.append(row)
        rows[el["name"]] = out
    return rows


def save_mesh(mesh: TriangleMesh, path, binary: bool = True,
              normals: bool = True) -> None:
    """Write OBJ or PLY. Coordinates round-trip exactly."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".obj":
        with open(path, "w") as fh:
            for v in mesh.vertices:
                fh.write("v {!r} {!r} {!r}\n".format(*map(float, v)))
            if normals:
                for n in mesh.vertex_normals:
                    fh.write("vn {!r} {!r} {!r}\n".format(*map(float, n)))
                for a, b, c in mesh.faces + 1:
                    fh.write(f"f {a}//{a} {b}//{b} {c}//{c}\n")
            else:
                for a, b, c in mesh.faces + 1:
                    fh.write(f"f {a} {b} {c}\n")
    elif suffix == ".ply":
        props = ["x", "y", "z"] + (["nx", "ny", "nz"] if normals else [])
        head = ["ply", f"format {'binary_little_endian' if binary else 'ascii'} 1.0",
                f"element vertex {mesh.n_vertices}"]
        head += [f"property double {p}" for p in props]
        head += [f"element face {mesh.n_faces}",
                 "property list uchar int vertex_indices", "end_header"]
        vdata = np.hstack([mesh.vertices, mesh.vertex_normals]) if normals else mesh.vertices
        with open(path, "wb") as fh:
            fh.write(("\n".join(head) + "\n").encode("ascii"))
            if binary:
                fh.write(np.ascontiguousarray(vdata, dtype="<f8").tobytes())
                rec = np.zeros(mesh.n_faces, dtype=[("n", "u1"), ("i", "<i4", 3)])
                rec["n"] = 3
                rec["i"] = mesh.faces
                fh.write(rec.tobytes())
            else:
                for row in vdata:
                    fh.write((" ".join(repr(float(x)) for x in row) + "\n").encode())
                for a, b, c in mesh.faces:
                    fh.write(f"3 {a} {b} {c}\n".encode())
    else:
        raise MeshError(f"unsupported mesh extension {suffix!r}")


# ---------------------------------------------------------------- topology


def _welded_faces(mesh: TriangleMesh) -> np.ndarray:
    # OBJ exporters often split vertices along seams; classify on positions
    _, inverse = np.unique(mesh.vertices, axis=0, return_inverse=True)
    return inverse.reshape(-1)[mesh.faces]


def compute_edge_vertices(mesh: TriangleMesh, tau_e: float = math.radians(30.0)
                          ) -> EdgeVertexSet:
    """Vertices where two incident faces' normals differ by more than tau_e."""
    if not 0.0 < tau_e < math.pi:
        raise ValueError("tau_e must lie in (0, pi)")
    fn = mesh.face_normals()
    good = np.linalg.norm(fn, axis=1) > 0
    welded = _welded_faces(mesh)
    n_groups = int(welded.max()) + 1
    incident: list[list[int]] = [[] for _ in range(n_groups)]
    for f in np.flatnonzero(good):
        for g in set(welded[f].tolist()):
            incident[g].append(f)
    is_edge = np.zeros(n_groups, dtype=bool)
    for g, fl in enumerate(incident):
        if len(fl) < 2:
            continue
        nrm = fn[fl]
        min_dot = float(np.clip(nrm @ nrm.T, -1.0, 1.0).min())
        is_edge[g] = math.acos(min_dot) > tau_e
    _, inverse = np.unique(mesh.vertices, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    picked = np.flatnonzero(is_edge[inverse])
    return EdgeVertexSet(frozenset(int(i) for i in picked), float(tau_e))


def validation_report(mesh: TriangleMesh) -> dict:
    """Counts of boundary, non-manifold, inconsistently wound and degenerate
    elements. A consistently wound mesh has every interior edge traversed
    once in each direction."""
    welded = _welded_faces(mesh)
    directed: dict[tuple[int, int], int] = {}
    for a, b, c in welded.tolist():
        for e in ((a, b), (b, c), (c, a)):
            directed[e] = directed.get(e, 0) + 1
    undirected: dict[tuple[int, int], list[int]] = {}
    for (a, b), cnt in directed.items():
        key = (a, b) if a < b else (b, a)
        undirected.setdefault(key, [0, 0])[0 if (a, b) == key else 1] += cnt
    boundary = nonmanifold = inconsistent = 0
    for fwd, bwd in undirected.values():
        total = fwd + bwd
        if total == 1:
            boundary += 1
        elif total > 2:
            nonmanifold += 1
        elif fwd != bwd:
            inconsistent += 1
    degenerate = int((np.linalg.norm(mesh.face_normals(), axis=1) == 0).sum())
    return {
        "vertices": mesh.n_vertices,
        "faces": mesh.n_faces,
        "normals_from_file": bool(mesh.normals_from_file),
        "boundary_edges": boundary,
        "nonmanifold_edges": nonmanifold,
        "inconsistent_edges": inconsistent,
        "degenerate_faces": degenerate,
        "consistent_winding": inconsistent == 0 and nonmanifold == 0,
    }


def write_validation_report(mesh: TriangleMesh, path) -> dict:
    report = validation_report(mesh)
    Path(path).write_text(json.dumps(report, indent=2) + "\n")
    return report


# ---------------------------------------------------------------- visibility


def visibility_epsilon(mesh: TriangleMesh) -> float:
    return 1e-6 * max(mesh.diagonal(), 1e-12)


def visibility_mask(mesh: TriangleMesh, sensors) -> np.ndarray:
    """(K, V) boolean line-of-sight mask for each sensor position."""
    sensors = np.atleast_2d(np.asarray(sensors, dtype=np.float64))
    return kernels.visibility(mesh.vertices, mesh.faces, sensors,
                              visibility_epsilon(mesh))


def visible_vertices(mesh: TriangleMesh, sensor) -> set[int]:
    mask = visibility_mask(mesh, np.asarray(sensor, dtype=np.float64)[None])[0]
    return set(np.flatnonzero(mask).tolist())


# ---------------------------------------------------------------- primitives


def box_mesh(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0),
             subdivisions: int = 1) -> TriangleMesh:
    """Axis-aligned box with outward winding, each face split into an
    ``subdivisions`` x ``subdivisions`` grid of quads (two triangles each).

    ``subdivisions=1`` gives the 8-vertex, 12-triangle box.
    """
    n = int(subdivisions)
    half = np.asarray(size, float) / 2.0
    center = np.asarray(center, float)
    index: dict[tuple, int] = {}
    verts: list = []
    faces: list = []

    def vid(p):
        key = tuple(p)
        if key not in index:
            index[key] = len(verts)
            verts.append(p)
        return index[key]

    ticks = np.linspace(-1.0, 1.0, n + 1)
    for axis in range(3):
        u_ax, v_ax = [a for a in range(3) if a != axis]
        for sign in (-1.0, 1.0):
            grid = np.empty((n + 1, n + 1), dtype=np.int64)
            for i, u in enumerate(ticks):
                for j, v in enumerate(ticks):
                    p = [0.0, 0.0, 0.0]
                    p[axis] = sign
                    p[u_ax] = float(u)
                    p[v_ax] = float(v)
                    grid[i, j] = vid(tuple(p))
            # (u, v) cross product points along +axis when (u, v, axis) is cyclic
            flip = ((u_ax, v_ax, axis) in ((0, 1, 2), (1, 2, 0), (2, 0, 1))) != (sign > 0)
            for i in range(n):
                for j in range(n):
                    a, b = grid[i, j], grid[i + 1, j]
                    c, d = grid[i + 1, j + 1], grid[i, j + 1]
                    if flip:
                        faces += [(a, c, b), (a, d, c)]
                    else:
                        faces += [(a, b, c), (a, c, d)]
    v = np.asarray(verts) * half + center
    return TriangleMesh.from_arrays(v, np.asarray(faces))


def icosphere(radius: float = 1.0, subdivisions: int = 2,
              center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [tuple(np.asarray(p, float) / np.linalg.norm(p)) for p in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(subdivisions):
        cache: dict = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = (np.asarray(verts[a]) + np.asarray(verts[b])) / 2.0
                verts.append(tuple(m / np.linalg.norm(m)))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    v = np.asarray(verts) * radius + np.asarray(center, float)
    return TriangleMesh.from_arrays(v, np.asarray(faces))


def cylinder_mesh(radius: float, height: float, segments: int = 24,
                  rings: int = 4, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Closed cylinder along z with flat caps, e.g. a can-shaped object."""
    verts = []
    zs = np.linspace(-height / 2, height / 2, rings + 1)
    ang = 2 * np.pi * np.arange(segments) / segments
    for z in zs:
        for a in ang:
            verts.append((radius * np.cos(a), radius * np.sin(a), z))
    faces = []
    for r in range(rings):
        for s in range(segments):
            a = r * segments + s
            b = r * segments + (s + 1) % segments
            c, d = a + segments, b + segments
            faces += [(a, b, d), (a, d, c)]
    bottom = len(verts)
    verts.append((0.0, 0.0, zs[0]))
    top = len(verts)
    verts.append((0.0, 0.0, zs[-1]))
    last = rings * segments
    for s in range(segments):
        faces.append((bottom, (s + 1) % segments, s))
        faces.append((top, last + s, last + (s + 1) % segments))
    v = np.asarray(verts) + np.asarray(center, float)
    return TriangleMesh.from_arrays(v, np.asarray(faces))
