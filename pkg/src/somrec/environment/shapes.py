"""Parametric solids: ray intersection, signed distance, and exact surface frames.

Every shape lives in its own local frame (axis of revolution = z). Rays are
vectorized: `ray(origins, dirs)` returns hit distances with inf for misses.
`sdf(points)` is an exact signed distance, used both for surface-agent
projection and for sphere-traced ray casting of the torus family.
`surface_properties(point)` returns the analytic normal, principal
directions and curvatures, and is the ground-truth oracle the sensor tests
compare against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_EPS = 1e-9
_TRACE_TOL = 1e-10
_TRACE_MAX_T = 100.0


class OffSurfaceError(ValueError):
    """Point is not on the shape surface within tolerance."""


class UnsupportedShapeError(TypeError):
    """Operation not defined for this shape (e.g. curvature of a mesh)."""


@dataclass(frozen=True)
class SurfaceProperties:
    normal: np.ndarray
    dir_1: np.ndarray  # max-curvature tangent
    dir_2: np.ndarray  # min-curvature tangent
    k1: float
    k2: float


def _unit(v):
    return v / np.linalg.norm(v)


def _tangent_pair(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = _unit(np.cross(normal, ref))
    return t1, np.cross(normal, t1)


def _props(normal, dir_1, dir_2, k1, k2) -> SurfaceProperties:
    if k1 < k2:
        k1, k2 = k2, k1
        dir_1, dir_2 = dir_2, dir_1
    return SurfaceProperties(np.asarray(normal), np.asarray(dir_1), np.asarray(dir_2), k1, k2)


def _smallest_positive(*ts):
    """Elementwise smallest strictly-positive entry across candidate arrays."""
    stacked = np.stack(ts)
    stacked = np.where(stacked > _EPS, stacked, np.inf)
    return stacked.min(axis=0)


class Shape:
    kind = "shape"

    def ray(self, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sdf(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def surface_properties(self, point: np.ndarray, atol: float = 1e-6) -> SurfaceProperties:
        raise UnsupportedShapeError(f"no analytic surface frame for {self.kind}")

    def _check_on_surface(self, point, atol):
        d = float(self.sdf(np.asarray(point, dtype=np.float64)[None, :])[0])
        if abs(d) > atol:
            raise OffSurfaceError(f"point is {d:.2e} from the {self.kind} surface")

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Sphere(Shape):
    radius: float
    kind = "sphere"

    def ray(self, origins, dirs):
        b = np.einsum("ij,ij->i", origins, dirs)
        c = np.einsum("ij,ij->i", origins, origins) - self.radius**2
        disc = b * b - c
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t1 = np.where(ok, -b - sq, np.inf)
        t2 = np.where(ok, -b + sq, np.inf)
        return _smallest_positive(t1, t2)

    def sdf(self, points):
        return np.linalg.norm(points, axis=-1) - self.radius

    def surface_properties(self, point, atol=1e-6):
        self._check_on_surface(point, atol)
        n = _unit(np.asarray(point, dtype=np.float64))
        t1, t2 = _tangent_pair(n)
        k = 1.0 / self.radius
        return _props(n, t1, t2, k, k)

    def to_dict(self):
        return {"kind": self.kind, "radius": self.radius}


@dataclass(frozen=True)
class Cylinder(Shape):
    """Solid cylinder with flat caps, axis z, |z| <= height/2."""

    radius: float
    height: float
    kind = "cylinder"

    def _lateral_ts(self, origins, dirs, z_lo, z_hi):
        a = dirs[:, 0] ** 2 + dirs[:, 1] ** 2
        b = origins[:, 0] * dirs[:, 0] + origins[:, 1] * dirs[:, 1]
        c = origins[:, 0] ** 2 + origins[:, 1] ** 2 - self.radius**2
        disc = b * b - a * c
        ok = (disc >= 0) & (a > _EPS)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        safe_a = np.where(a > _EPS, a, 1.0)
        out = []
        for sign in (-1.0, 1.0):
            t = np.where(ok, (-b + sign * sq) / safe_a, np.inf)
            z = origins[:, 2] + t * dirs[:, 2]
            out.append(np.where((z >= z_lo) & (z <= z_hi), t, np.inf))
        return out

    def _cap_ts(self, origins, dirs):
        out = []
        dz = np.where(np.abs(dirs[:, 2]) > _EPS, dirs[:, 2], np.nan)
        for z_plane in (-self.height / 2, self.height / 2):
            t = (z_plane - origins[:, 2]) / dz
            x = origins[:, 0] + t * dirs[:, 0]
            y = origins[:, 1] + t * dirs[:, 1]
            inside = x * x + y * y <= self.radius**2
            out.append(np.where(np.isfinite(t) & inside, t, np.inf))
        return out

    def ray(self, origins, dirs):
        h = self.height / 2
        ts = self._lateral_ts(origins, dirs, -h, h) + self._cap_ts(origins, dirs)
        return _smallest_positive(*ts)

    def sdf(self, points):
        rho = np.linalg.norm(points[..., :2], axis=-1)
        dx = rho - self.radius
        dz = np.abs(points[..., 2]) - self.height / 2
        outside = np.linalg.norm(
            np.stack([np.maximum(dx, 0.0), np.maximum(dz, 0.0)], axis=-1), axis=-1
        )
        inside = np.minimum(np.maximum(dx, dz), 0.0)
        return outside + inside

    def surface_properties(self, point, atol=1e-6):
        self._check_on_surface(point, atol)
        p = np.asarray(point, dtype=np.float64)
        rho = np.linalg.norm(p[:2])
        d_lat = abs(rho - self.radius)
        d_cap = abs(self.height / 2 - abs(p[2]))
        if d_lat <= d_cap:
            n = np.array([p[0] / rho, p[1] / rho, 0.0])
            circumferential = np.array([-p[1] / rho, p[0] / rho, 0.0])
            axial = np.array([0.0, 0.0, 1.0])
            return _props(n, circumferential, axial, 1.0 / self.radius, 0.0)
        n = np.array([0.0, 0.0, np.sign(p[2]) or 1.0])
        t1, t2 = _tangent_pair(n)
        return _props(n, t1, t2, 0.0, 0.0)

    def to_dict(self):
        return {"kind": self.kind, "radius": self.radius, "height": self.height}


@dataclass(frozen=True)
class Capsule(Shape):
    """Cylinder with hemispherical ends; `height` is the straight segment length."""

    radius: float
    height: float
    kind = "capsule"

    def ray(self, origins, dirs):
        h = self.height / 2
        ts = Cylinder._lateral_ts(self, origins, dirs, -h, h)
        for z_c in (-h, h):
            center = np.array([0.0, 0.0, z_c])
            o = origins - center
            b = np.einsum("ij,ij->i", o, dirs)
            c = np.einsum("ij,ij->i", o, o) - self.radius**2
            disc = b * b - c
            ok = disc >= 0
            sq = np.sqrt(np.where(ok, disc, 0.0))
            for sign in (-1.0, 1.0):
                t = np.where(ok, -b + sign * sq, np.inf)
                z = origins[:, 2] + t * dirs[:, 2]
                on_cap = z * np.sign(z_c) >= h  # beyond the straight segment
                ts.append(np.where(on_cap, t, np.inf))
        return _smallest_positive(*ts)

    def sdf(self, points):
        z = np.clip(points[..., 2], -self.height / 2, self.height / 2)
        seg = np.stack([points[..., 0], points[..., 1], points[..., 2] - z], axis=-1)
        return np.linalg.norm(seg, axis=-1) - self.radius

    def surface_properties(self, point, atol=1e-6):
        self._check_on_surface(point, atol)
        p = np.asarray(point, dtype=np.float64)
        h = self.height / 2
        if abs(p[2]) <= h:
            rho = np.linalg.norm(p[:2])
            n = np.array([p[0] / rho, p[1] / rho, 0.0])
            circumferential = np.array([-p[1] / rho, p[0] / rho, 0.0])
            axial = np.array([0.0, 0.0, 1.0])
            return _props(n, circumferential, axial, 1.0 / self.radius, 0.0)
        center = np.array([0.0, 0.0, np.sign(p[2]) * h])
        n = _unit(p - center)
        t1, t2 = _tangent_pair(n)
        k = 1.0 / self.radius
        return _props(n, t1, t2, k, k)

    def to_dict(self):
        return {"kind": self.kind, "radius": self.radius, "height": self.height}


@dataclass(frozen=True)
class Box(Shape):
    width: float
    height: float
    depth: float
    kind = "box"

    @property
    def half(self) -> np.ndarray:
        return np.array([self.width, self.height, self.depth]) / 2

    def ray(self, origins, dirs):
        half = self.half
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
            t_a = (-half - origins) * inv
            t_b = (half - origins) * inv
        lo = np.nanmin(np.stack([t_a, t_b]), axis=0).max(axis=1)
        hi = np.nanmax(np.stack([t_a, t_b]), axis=0).min(axis=1)
        # rays parallel to a slab: inf*0 gave nan; a nan means the origin must
        # lie inside that slab for a hit
        parallel = np.abs(dirs) < _EPS
        inside_slab = np.abs(origins) <= half
        ok = (~parallel | inside_slab).all(axis=1) & (hi >= np.maximum(lo, _EPS))
        t = np.where(lo > _EPS, lo, hi)
        return np.where(ok, t, np.inf)

    def sdf(self, points):
        q = np.abs(points) - self.half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    def surface_properties(self, point, atol=1e-6):
        self._check_on_surface(point, atol)
        p = np.asarray(point, dtype=np.float64)
        axis = int(np.argmax(np.abs(p) / self.half))
        n = np.zeros(3)
        n[axis] = np.sign(p[axis]) or 1.0
        t1, t2 = _tangent_pair(n)
        return _props(n, t1, t2, 0.0, 0.0)

    def to_dict(self):
        return {
            "kind": self.kind,
            "width": self.width,
            "height": self.height,
            "depth": self.depth,
        }


def _sphere_trace(shape: Shape, origins, dirs, max_iter=512):
    """March rays along an exact SDF; returns hit distances (inf on miss)."""
    n = origins.shape[0]
    t = np.full(n, 1e-6)
    active = np.ones(n, dtype=bool)
    hit = np.zeros(n, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        p = origins[active] + t[active, None] * dirs[active]
        s = shape.sdf(p)
        reached = s < _TRACE_TOL
        idx = np.flatnonzero(active)
        hit[idx[reached]] = True
        t[idx] += np.maximum(s, 0.0)
        escaped = t[idx] > _TRACE_MAX_T
        active[idx[reached | escaped]] = False
    return np.where(hit, t, np.inf)


@dataclass(frozen=True)
class Torus(Shape):
    """Full torus about z: tube radius `minor` swept at ring radius `major`."""

    major: float
    minor: float
    kind = "torus"

    def ray(self, origins, dirs):
        return _sphere_trace(self, origins, dirs)

    def sdf(self, points):
        rho = np.linalg.norm(points[..., :2], axis=-1)
        return np.hypot(rho - self.major, points[..., 2]) - self.minor

    def _arc_props(self, p):
        rho = np.linalg.norm(p[:2])
        cos_t = (rho - self.major) / self.minor
        sin_t = p[2] / self.minor
        u = p[:2] / rho
        n = np.array([u[0] * cos_t, u[1] * cos_t, sin_t])
        tube_dir = np.array([-u[0] * sin_t, -u[1] * sin_t, cos_t])
        toroidal_dir = np.array([-u[1], u[0], 0.0])
        k_tube = 1.0 / self.minor
        k_tor = cos_t / (self.major + self.minor * cos_t)
        return _props(n, tube_dir, toroidal_dir, k_tube, k_tor)

    def surface_properties(self, point, atol=1e-6):
        self._check_on_surface(point, atol)
        return self._arc_props(np.asarray(point, dtype=np.float64))

    def to_dict(self):
        return {"kind": self.kind, "major": self.major, "minor": self.minor}


@dataclass(frozen=True)
class CappedTorus(Shape):
    """Torus arc limited to azimuth |phi| <= aperture, with rounded ends."""

    major: float
    minor: float
    aperture: float  # radians, half-angle of the kept arc
    kind = "capped_torus"

    def ray(self, origins, dirs):
        return _sphere_trace(self, origins, dirs)

    def _endpoint(self, sign: float) -> np.ndarray:
        return np.array(
            [self.major * np.cos(self.aperture), sign * self.major * np.sin(self.aperture), 0.0]
        )

    def sdf(self, points):
        phi = np.arctan2(points[..., 1], points[..., 0])
        phi_c = np.clip(phi, -self.aperture, self.aperture)
        arc = np.stack(
            [self.major * np.cos(phi_c), self.major * np.sin(phi_c), np.zeros_like(phi_c)],
            axis=-1,
        )
        return np.linalg.norm(points - arc, axis=-1) - self.minor

    def surface_properties(self, point, atol=1e-6):
        self._check_on_surface(point, atol)
        p = np.asarray(point, dtype=np.float64)
        phi = np.arctan2(p[1], p[0])
        if abs(phi) <= self.aperture:
            return Torus._arc_props(self, p)
        n = _unit(p - self._endpoint(np.sign(phi)))
        t1, t2 = _tangent_pair(n)
        k = 1.0 / self.minor
        return _props(n, t1, t2, k, k)

    def to_dict(self):
        return {
            "kind": self.kind,
            "major": self.major,
            "minor": self.minor,
            "aperture": self.aperture,
        }


@dataclass(frozen=True)
class Mesh(Shape):
    """Triangle soup with optional per-vertex colors."""

    vertices: np.ndarray  # (V,3)
    faces: np.ndarray  # (T,3) int
    vertex_colors: np.ndarray | None = None  # (V,4) or None
    kind = "mesh"

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=np.float64))
        object.__setattr__(self, "faces", np.asarray(self.faces, dtype=np.int64))
        if self.faces.size and (
            self.faces.min() < 0 or self.faces.max() >= len(self.vertices)
        ):
            raise ValueError("face index out of range")
        if self.vertex_colors is not None:
            object.__setattr__(
                self, "vertex_colors", np.asarray(self.vertex_colors, dtype=np.float64)
            )

    def ray_detailed(self, origins, dirs):
        """Hit distances plus triangle index and barycentric (u, v) per ray."""
        v0 = self.vertices[self.faces[:, 0]]
        e1 = self.vertices[self.faces[:, 1]] - v0
        e2 = self.vertices[self.faces[:, 2]] - v0
        n = origins.shape[0]
        best_t = np.full(n, np.inf)
        best_tri = np.full(n, -1, dtype=np.int64)
        best_uv = np.zeros((n, 2))
        chunk = max(1, 2_000_000 // max(len(self.faces), 1))
        for s in range(0, n, chunk):
            o = origins[s : s + chunk, None, :]
            d = dirs[s : s + chunk, None, :]
            pvec = np.cross(d, e2[None, :, :])
            det = np.einsum("ntk,tk->nt", pvec, e1)
            with np.errstate(divide="ignore", invalid="ignore"):
                inv_det = np.where(np.abs(det) > 1e-12, 1.0 / det, np.nan)
            tvec = o - v0[None, :, :]
            u = np.einsum("ntk,ntk->nt", tvec, pvec) * inv_det
            qvec = np.cross(tvec, e1[None, :, :])
            v = np.einsum("ntk,ntk->nt", d, qvec) * inv_det
            t = np.einsum("ntk,tk->nt", qvec, e2) * inv_det
            valid = (
                np.isfinite(t)
                & (u >= -1e-12)
                & (v >= -1e-12)
                & (u + v <= 1 + 1e-12)
                & (t > _EPS)
            )
            t = np.where(valid, t, np.inf)
            tri = t.argmin(axis=1)
            rows = np.arange(t.shape[0])
            tmin = t[rows, tri]
            best_t[s : s + chunk] = tmin
            best_tri[s : s + chunk] = np.where(np.isfinite(tmin), tri, -1)
            best_uv[s : s + chunk, 0] = np.where(np.isfinite(tmin), u[rows, tri], 0.0)
            best_uv[s : s + chunk, 1] = np.where(np.isfinite(tmin), v[rows, tri], 0.0)
        return best_t, best_tri, best_uv

    def ray(self, origins, dirs):
        return self.ray_detailed(origins, dirs)[0]

    def color_at(self, tri: int, uv: np.ndarray) -> np.ndarray | None:
        if self.vertex_colors is None or tri < 0:
            return None
        c = self.vertex_colors[self.faces[tri]]
        u, v = uv
        return (1 - u - v) * c[0] + u * c[1] + v * c[2]

    def sdf(self, points):
        raise UnsupportedShapeError("mesh has no signed distance field")

    def to_dict(self):
        out = {
            "kind": self.kind,
            "vertices": self.vertices.tolist(),
            "faces": self.faces.tolist(),
        }
        if self.vertex_colors is not None:
            out["vertex_colors"] = self.vertex_colors.tolist()
        return out


_SHAPE_KINDS = {
    cls.kind: cls for cls in (Sphere, Cylinder, Capsule, Box, Torus, CappedTorus)
}


def shape_from_dict(d: dict) -> Shape:
    kind = d.get("kind")
    if kind == "mesh":
        return Mesh(
            vertices=np.asarray(d["vertices"], dtype=np.float64),
            faces=np.asarray(d["faces"], dtype=np.int64),
            vertex_colors=(
                np.asarray(d["vertex_colors"], dtype=np.float64)
                if "vertex_colors" in d
                else None
            ),
        )
    if kind not in _SHAPE_KINDS:
        raise ValueError(f"unknown shape kind {kind!r}")
    params = {k: v for k, v in d.items() if k != "kind"}
    return _SHAPE_KINDS[kind](**params)


def load_obj(path) -> Mesh:
    """Minimal OBJ reader: v (with optional rgb extension) and f records."""
    vertices, colors, faces = [], [], []
    has_color = False
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                vals = [float(x) for x in parts[1:]]
                vertices.append(vals[:3])
                if len(vals) >= 6:
                    has_color = True
                    rgb = vals[3:6]
                    colors.append(rgb + [1.0])
                else:
                    colors.append([0.5, 0.5, 0.5, 1.0])
            elif parts[0] == "f":
                idx = [int(tok.split("/")[0]) - 1 for tok in parts[1:]]
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    faces.append([idx[0], idx[k], idx[k + 1]])
    return Mesh(
        vertices=np.asarray(vertices, dtype=np.float64),
        faces=np.asarray(faces, dtype=np.int64),
        vertex_colors=np.asarray(colors, dtype=np.float64) if has_color else None,
    )
