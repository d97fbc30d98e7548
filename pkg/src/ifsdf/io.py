"""Readers and writers: XYZ/PLY point clouds, OBJ/PLY meshes, CSV curves and grids."""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from .geom import InputError
from .mesher import Mesh

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def read_xyz(path) -> np.ndarray:
    """Whitespace-separated coordinates, one point per line; '#' starts a comment."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                rows.append([float(t) for t in line.replace(",", " ").split()])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: cannot parse coordinates") from exc
    if not rows:
        raise InputError(f"{path}: no points found")
    width = len(rows[0])
    if any(len(r) != width for r in rows) or width < 2:
        raise InputError(f"{path}: inconsistent column count")
    return np.asarray(rows, dtype=np.float64)


def write_xyz(points, path) -> None:
    np.savetxt(path, np.asarray(points, dtype=np.float64), fmt="%.17g")


def _parse_ply_header(fh):
    if fh.readline().strip() != b"ply":
        raise InputError("not a PLY file")
    fmt, elements = None, []
    while True:
        line = fh.readline()
        if not line:
            raise InputError("PLY header not terminated")
        tok = line.decode("ascii", "replace").split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            elements.append({"name": tok[1], "count": int(tok[2]), "props": []})
        elif tok[0] == "property":
            if tok[1] == "list":
                elements[-1]["props"].append((tok[4], "list", _PLY_TYPES[tok[2]], _PLY_TYPES[tok[3]]))
            else:
                elements[-1]["props"].append((tok[2], _PLY_TYPES[tok[1]]))
        elif tok[0] == "end_header":
            break
    if fmt not in ("ascii", "binary_little_endian", "binary_big_endian"):
        raise InputError(f"unsupported PLY format {fmt}")
    return fmt, elements


def _read_ply(path):
    """Return {element name: dict of property -> array (lists as object arrays)}."""
    out = {}
    with open(path, "rb") as fh:
        fmt, elements = _parse_ply_header(fh)
        if fmt == "ascii":
            tokens = fh.read().split()
            pos = 0
            for el in elements:
                cols = {p[0]: [] for p in el["props"]}
                for _ in range(el["count"]):
                    for p in el["props"]:
                        if p[1] == "list":
                            n = int(tokens[pos]); pos += 1
                            cols[p[0]].append([float(t) for t in tokens[pos:pos + n]]); pos += n
                        else:
                            cols[p[0]].append(float(tokens[pos])); pos += 1
                out[el["name"]] = cols
            return out
        end = "<" if fmt == "binary_little_endian" else ">"
        data = fh.read()
        pos = 0
        for el in elements:
            if all(p[1] != "list" for p in el["props"]):
                dt = np.dtype([(p[0], end + p[1]) for p in el["props"]])
                arr = np.frombuffer(data, dtype=dt, count=el["count"], offset=pos)
                pos += dt.itemsize * el["count"]
                out[el["name"]] = {p[0]: arr[p[0]] for p in el["props"]}
                continue
            cols = {p[0]: [] for p in el["props"]}
            for _ in range(el["count"]):
                for p in el["props"]:
                    if p[1] == "list":
                        cdt = np.dtype(end + p[2])
                        n = int(np.frombuffer(data, cdt, 1, pos)[0]); pos += cdt.itemsize
                        idt = np.dtype(end + p[3])
                        cols[p[0]].append(np.frombuffer(data, idt, n, pos).tolist()); pos += idt.itemsize * n
                    else:
                        vdt = np.dtype(end + p[1])
                        cols[p[0]].append(np.frombuffer(data, vdt, 1, pos)[0]); pos += vdt.itemsize
            out[el["name"]] = cols
    return out


def read_ply_points(path) -> np.ndarray:
    ply = _read_ply(path)
    if "vertex" not in ply:
        raise InputError(f"{path}: PLY file has no vertex element")
    v = ply["vertex"]
    return np.stack([np.asarray(v[c], dtype=np.float64) for c in ("x", "y", "z")], axis=1)


def read_points(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file not found: {path}")
    if path.suffix.lower() == ".ply":
        return read_ply_points(path)
    return read_xyz(path)


def _triangulate(polys):
    tris = []
    for poly in polys:
        poly = [int(i) for i in poly]
        for k in range(1, len(poly) - 1):
            tris.append((poly[0], poly[k], poly[k + 1]))
    return np.asarray(tris, dtype=np.int64).reshape(-1, 3)


def read_obj(path) -> Mesh:
    verts, polys = [], []
    with open(path) as fh:
        for line in fh:
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "v":
                verts.append([float(t) for t in tok[1:4]])
            elif tok[0] == "f":
                idx = [int(t.split("/")[0]) for t in tok[1:]]
                polys.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    return Mesh(np.asarray(verts).reshape(-1, 3), _triangulate(polys))


def read_mesh(path) -> Mesh:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"mesh file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".obj":
        return read_obj(path)
    if suffix == ".ply":
        ply = _read_ply(path)
        v = read_ply_points(path)
        faces = ply.get("face", {})
        key = "vertex_indices" if "vertex_indices" in faces else ("vertex_index" if "vertex_index" in faces else None)
        return Mesh(v, _triangulate(faces[key]) if key else np.zeros((0, 3), dtype=np.int64))
    raise InputError(f"unsupported mesh format: {path.suffix}")


def write_obj(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        if mesh.normals is not None:
            for n in mesh.normals:
                fh.write(f"vn {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}\n")
            for a, b, c in mesh.triangles + 1:
                fh.write(f"f {a}//{a} {b}//{b} {c}//{c}\n")
        else:
            for a, b, c in mesh.triangles + 1:
                fh.write(f"f {a} {b} {c}\n")


def write_ply(mesh: Mesh, path) -> None:
    """Binary little-endian PLY with float32 positions (and normals when present)."""
    has_n = mesh.normals is not None
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {len(mesh.vertices)}",
              "property float x", "property float y", "property float z"]
    if has_n:
        header += ["property float nx", "property float ny", "property float nz"]
    header += [f"element face {len(mesh.triangles)}", "property list uchar int vertex_indices", "end_header"]
    vcols = [mesh.vertices] + ([mesh.normals] if has_n else [])
    vdata = np.hstack(vcols).astype("<f4")
    fdt = np.dtype([("n", "u1"), ("i", "<i4", (3,))])
    fdata = np.empty(len(mesh.triangles), dtype=fdt)
    fdata["n"] = 3
    fdata["i"] = mesh.triangles
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(vdata.tobytes())
        fh.write(fdata.tobytes())


def write_mesh(mesh: Mesh, path) -> None:
    suffix = Path(path).suffix.lower()
    if suffix == ".obj":
        write_obj(mesh, path)
    elif suffix == ".ply":
        write_ply(mesh, path)
    else:
        raise InputError(f"unsupported mesh format: {suffix} (use .obj or .ply)")


def read_curve_csv(path) -> np.ndarray:
    """2D curve samples, ``x,y`` per row; a non-numeric first row is treated as a header."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"curve file not found: {path}")
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [t for t in line.replace(",", " ").split()]
        try:
            rows.append([float(t) for t in parts[:2]])
        except ValueError:
            if rows:
                raise InputError(f"{path}:{lineno}: cannot parse coordinates")
            continue
    if not rows:
        raise InputError(f"{path}: curve file is empty")
    pts = np.asarray(rows, dtype=np.float64)
    if pts.shape[1] != 2:
        raise InputError(f"{path}: expected two columns")
    return pts


def write_grid_csv(xs, ys, values, path) -> None:
    """Long-format grid: ``x,y,f`` rows with x varying slowest."""
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    table = np.stack([xx.ravel(), yy.ravel(), np.asarray(values).ravel()], axis=1)
    with open(path, "w") as fh:
        fh.write("x,y,f\n")
        np.savetxt(fh, table, delimiter=",", fmt="%.9g")


def read_grid_csv(path):
    table = np.loadtxt(path, delimiter=",", skiprows=1)
    xs = np.unique(table[:, 0])
    ys = np.unique(table[:, 1])
    return xs, ys, table[:, 2].reshape(len(xs), len(ys))


def eprint(*args):
    print(*args, file=sys.stderr)
