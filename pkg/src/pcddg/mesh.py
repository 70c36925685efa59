"""Interval and triangle meshes: generation, neutral ASCII I/O, face
connectivity, boundary tags, and space-scale resolution diagnostics."""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .refelem import MeshError, element_geometry, build_reference_element

BOUNDARY_TAGS = ("PEC", "ABC", "PML_interface", "ELECTRODE_D",
                 "INSULATOR_R", "SOURCE_APERTURE")
INTERIOR = -1

_FACE_VERTS_2D = ((0, 1), (1, 2), (2, 0))


class MeshFormatError(ValueError):
    """Malformed mesh file."""


@dataclass
class Mesh:
    dim: int
    vertices: np.ndarray          # (Nv, dim)
    elements: np.ndarray          # (K, dim+1) vertex indices
    region_id: np.ndarray         # (K,)
    region_names: dict = field(default_factory=dict)   # id -> name
    etoe: np.ndarray = None       # (K, Nfaces) neighbor element (self if none)
    etof: np.ndarray = None       # (K, Nfaces) neighbor local face
    boundary_tag: np.ndarray = None  # (K, Nfaces) tag index, INTERIOR inside

    @property
    def K(self):
        return self.elements.shape[0]

    @property
    def Nfaces(self):
        return self.dim + 1

    def element_vertices(self, k):
        return self.vertices[self.elements[k]]

    def volumes(self):
        if self.dim == 1:
            return self.vertices[self.elements[:, 1], 0] - self.vertices[self.elements[:, 0], 0]
        v = self.vertices[self.elements]
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        # signed area: negative flags an inverted triangle
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edge_lengths(self):
        """Shortest and longest edge per element."""
        if self.dim == 1:
            h = self.volumes()
            return h, h
        v = self.vertices[self.elements]
        e = np.stack([np.linalg.norm(v[:, b] - v[:, a], axis=1)
                      for a, b in _FACE_VERTS_2D], axis=1)
        return e.min(axis=1), e.max(axis=1)

    def centroids(self):
        return self.vertices[self.elements].mean(axis=1)

    def boundary_faces(self):
        """List of (element, face, tag_name) for all boundary faces."""
        out = []
        kk, ff = np.nonzero(self.boundary_tag >= 0)
        for k, f in zip(kk, ff):
            out.append((int(k), int(f), BOUNDARY_TAGS[self.boundary_tag[k, f]]))
        return out

    def content_hash(self):
        hsh = hashlib.sha256()
        hsh.update(np.ascontiguousarray(self.vertices).tobytes())
        hsh.update(np.ascontiguousarray(self.elements).tobytes())
        hsh.update(np.ascontiguousarray(self.region_id).tobytes())
        hsh.update(np.ascontiguousarray(self.boundary_tag).tobytes())
        return hsh.hexdigest()[:16]


def _face_key(mesh, k, f):
    if mesh.dim == 1:
        return (mesh.elements[k, f],)
    a, b = _FACE_VERTS_2D[f]
    return tuple(sorted((mesh.elements[k, a], mesh.elements[k, b])))


def build_face_connectivity(mesh):
    """Fill etoe/etof by matching face vertex sets; errors on non-manifold faces."""
    K, nf = mesh.K, mesh.Nfaces
    faces = {}
    for k in range(K):
        for f in range(nf):
            faces.setdefault(_face_key(mesh, k, f), []).append((k, f))
    mesh.etoe = np.tile(np.arange(K)[:, None], (1, nf))
    mesh.etof = np.tile(np.arange(nf)[None, :], (K, 1))
    for key, inc in faces.items():
        if len(inc) > 2:
            raise MeshError(f"non-manifold face {key}: {len(inc)} incident elements")
        if len(inc) == 2:
            (k1, f1), (k2, f2) = inc
            mesh.etoe[k1, f1] = k2
            mesh.etof[k1, f1] = f2
            mesh.etoe[k2, f2] = k1
            mesh.etof[k2, f2] = f1
    if mesh.boundary_tag is None:
        mesh.boundary_tag = np.full((K, nf), INTERIOR, dtype=int)
    return mesh


def validate_mesh(mesh):
    vols = mesh.volumes()
    if np.any(vols <= 0):
        k = int(np.argmin(vols))
        raise MeshError(f"inverted element {k} (volume {vols[k]:.3e})")
    used = np.unique(mesh.elements)
    if len(used) != mesh.vertices.shape[0]:
        orphan = sorted(set(range(mesh.vertices.shape[0])) - set(used.tolist()))
        raise MeshError(f"orphan vertices {orphan[:5]}")
    if mesh.etoe is None:
        build_face_connectivity(mesh)
    interior = mesh.etoe != np.arange(mesh.K)[:, None]
    both = interior & (mesh.boundary_tag >= 0)
    if np.any(both):
        k, f = np.argwhere(both)[0]
        raise MeshError(f"interior face ({k},{f}) carries a boundary tag")
    missing = (~interior) & (mesh.boundary_tag < 0)
    if np.any(missing):
        k, f = np.argwhere(missing)[0]
        raise MeshError(f"boundary face (element {k}, face {f}) has no tag")
    return mesh


# ---------------------------------------------------------------------------
# generation

@dataclass
class RegionBox:
    name: str
    lo: np.ndarray
    hi: np.ndarray
    h: float


@dataclass
class MeshSpec:
    dim: int
    lo: np.ndarray
    hi: np.ndarray
    regions: list                     # of RegionBox
    tag_boxes: list = field(default_factory=list)   # (tag_name, lo, hi)
    default_tag: str = "PEC"


def make_spec(dim, lo, hi, regions, tag_boxes=(), default_tag="PEC"):
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    regs = [RegionBox(name, np.atleast_1d(np.asarray(a, dtype=float)),
                      np.atleast_1d(np.asarray(b, dtype=float)), float(h))
            for name, a, b, h in regions]
    tags = [(t, np.atleast_1d(np.asarray(a, dtype=float)),
             np.atleast_1d(np.asarray(b, dtype=float))) for t, a, b in tag_boxes]
    return MeshSpec(dim, lo, hi, regs, tags, default_tag)


def _axis_breaks(spec, axis):
    cuts = {spec.lo[axis], spec.hi[axis]}
    for r in spec.regions:
        cuts.add(r.lo[axis])
        cuts.add(r.hi[axis])
    cuts = sorted(c for c in cuts if spec.lo[axis] - 1e-15 <= c <= spec.hi[axis] + 1e-15)
    pts = [cuts[0]]
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a < 1e-15:
            continue
        mid = 0.5 * (a + b)
        hs = [r.h for r in spec.regions
              if r.lo[axis] - 1e-12 <= mid <= r.hi[axis] + 1e-12]
        h = min(hs) if hs else (b - a)
        n = max(1, int(np.ceil((b - a) / h - 1e-9)))
        pts.extend(np.linspace(a, b, n + 1)[1:])
    return np.array(pts)


def _region_of(spec, point):
    hits = [i for i, r in enumerate(spec.regions)
            if np.all(r.lo - 1e-12 <= point) and np.all(point <= r.hi + 1e-12)]
    if len(hits) == 0:
        raise MeshError(f"point {point} not covered by any region box")
    if len(hits) > 1:
        names = [spec.regions[i].name for i in hits]
        raise MeshError(f"overlapping region boxes {names} at {point}")
    return hits[0]


def generate_structured_mesh(spec):
    """Structured mesh from a box spec: intervals in 1D, diagonally split
    right triangles in 2D, with per-region target edge lengths."""
    if np.any(spec.hi <= spec.lo):
        raise MeshError("domain extents must be positive")
    if spec.dim == 1:
        x = _axis_breaks(spec, 0)
        verts = x.reshape(-1, 1)
        K = len(x) - 1
        elems = np.column_stack([np.arange(K), np.arange(1, K + 1)])
    else:
        x = _axis_breaks(spec, 0)
        y = _axis_breaks(spec, 1)
        nx, ny = len(x), len(y)
        xx, yy = np.meshgrid(x, y, indexing="ij")
        verts = np.column_stack([xx.ravel(), yy.ravel()])
        elems = []
        for i in range(nx - 1):
            for j in range(ny - 1):
                v00 = i * ny + j
                v10 = (i + 1) * ny + j
                v01 = i * ny + j + 1
                v11 = (i + 1) * ny + j + 1
                elems.append([v00, v10, v11])
                elems.append([v00, v11, v01])
        elems = np.asarray(elems)
    mesh = Mesh(dim=spec.dim, vertices=verts, elements=np.asarray(elems),
                region_id=np.zeros(len(elems), dtype=int))
    cent = mesh.centroids()
    mesh.region_id = np.array([_region_of(spec, c) for c in cent])
    mesh.region_names = {i: r.name for i, r in enumerate(spec.regions)}
    build_face_connectivity(mesh)
    _apply_boundary_tags(mesh, spec)
    return validate_mesh(mesh)


def _face_centroid(mesh, k, f):
    if mesh.dim == 1:
        return mesh.vertices[mesh.elements[k, f]]
    a, b = _FACE_VERTS_2D[f]
    return 0.5 * (mesh.vertices[mesh.elements[k, a]] + mesh.vertices[mesh.elements[k, b]])


def _apply_boundary_tags(mesh, spec):
    tag_idx = {t: i for i, t in enumerate(BOUNDARY_TAGS)}
    for t, _, _ in spec.tag_boxes:
        if t not in tag_idx:
            raise MeshError(f"unknown boundary tag {t!r}")
    if spec.default_tag not in tag_idx:
        raise MeshError(f"unknown boundary tag {spec.default_tag!r}")
    on_boundary = mesh.etoe == np.arange(mesh.K)[:, None]
    for k, f in np.argwhere(on_boundary):
        c = _face_centroid(mesh, k, f)
        tag = spec.default_tag
        for t, lo, hi in spec.tag_boxes:
            if np.all(lo - 1e-12 <= c) and np.all(c <= hi + 1e-12):
                tag = t
                break
        mesh.boundary_tag[k, f] = tag_idx[tag]


# ---------------------------------------------------------------------------
# neutral ASCII format

def save_mesh_file(mesh, path):
    with open(path, "w") as fh:
        fh.write(f"dgpcd-mesh v1 dim={mesh.dim}\n")
        fh.write(f"vertices {mesh.vertices.shape[0]}\n")
        for v in mesh.vertices:
            fh.write(" ".join(f"{c:.17g}" for c in v) + "\n")
        fh.write(f"elements {mesh.K}\n")
        for elem, rid in zip(mesh.elements, mesh.region_id):
            fh.write(" ".join(str(i) for i in elem) + f" {rid}\n")
        bnd = mesh.boundary_faces()
        fh.write(f"boundary {len(bnd)}\n")
        for k, f, tag in bnd:
            fh.write(f"{k} {f} {tag}\n")
        for rid in sorted(mesh.region_names):
            fh.write(f"# region {rid} {mesh.region_names[rid]}\n")


def load_mesh_file(path):
    """Load the neutral ASCII mesh format; errors carry the offending line."""
    tag_idx = {t: i for i, t in enumerate(BOUNDARY_TAGS)}
    with open(path) as fh:
        raw = fh.readlines()
    region_names = {}
    lines = []
    for lineno, line in enumerate(raw, start=1):
        txt = line.strip()
        if txt.startswith("# region "):
            parts = txt.split()
            region_names[int(parts[2])] = parts[3]
        txt = txt.split("#", 1)[0].strip()
        if txt:
            lines.append((lineno, txt))
    it = iter(lines)

    def take(expect=None):
        try:
            lineno, txt = next(it)
        except StopIteration:
            raise MeshFormatError("unexpected end of mesh file") from None
        if expect is not None and not txt.startswith(expect):
            raise MeshFormatError(f"line {lineno}: expected {expect!r}, got {txt!r}")
        return lineno, txt

    _, header = take("dgpcd-mesh")
    parts = header.split()
    if parts[:2] != ["dgpcd-mesh", "v1"] or not parts[2].startswith("dim="):
        raise MeshFormatError(f"bad header {header!r}")
    dim = int(parts[2][4:])
    if dim not in (1, 2):
        raise MeshFormatError(f"unsupported dim {dim}")
    _, vh = take("vertices")
    nv = int(vh.split()[1])
    verts = np.zeros((nv, dim))
    for i in range(nv):
        lineno, txt = take()
        vals = txt.split()
        if len(vals) != dim:
            raise MeshFormatError(f"line {lineno}: expected {dim} coordinates")
        verts[i] = [float(v) for v in vals]
    _, eh = take("elements")
    ke = int(eh.split()[1])
    elems = np.zeros((ke, dim + 1), dtype=int)
    rid = np.zeros(ke, dtype=int)
    for i in range(ke):
        lineno, txt = take()
        vals = txt.split()
        if len(vals) != dim + 2:
            raise MeshFormatError(f"line {lineno}: expected {dim + 1} indices + region id")
        elems[i] = [int(v) for v in vals[:-1]]
        rid[i] = int(vals[-1])
    _, bh = take("boundary")
    nb = int(bh.split()[1])
    mesh = Mesh(dim=dim, vertices=verts, elements=elems, region_id=rid,
                region_names=region_names)
    build_face_connectivity(mesh)
    for i in range(nb):
        lineno, txt = take()
        k, f, tag = txt.split()
        if tag not in tag_idx:
            raise MeshFormatError(f"line {lineno}: unknown boundary tag {tag!r}")
        k, f = int(k), int(f)
        if mesh.etoe[k, f] != k:
            raise MeshFormatError(f"line {lineno}: face ({k},{f}) is not a boundary face")
        mesh.boundary_tag[k, f] = tag_idx[tag]
    return validate_mesh(mesh)


# ---------------------------------------------------------------------------
# resolution diagnostics

@dataclass
class ResolutionReport:
    per_region: dict              # name -> dict of length scales (m)
    peclet_flags: np.ndarray      # element indices violating Delta_d * C_P < 1
    text: str

    def __str__(self):
        return self.text


def resolution_report(mesh, materials, n_est, e_est, p=2, wavelength=None):
    """Length-scale diagnostics: Debye length, inverse Peclet bound, skin
    depth, wavelength-per-order, and per-region edge-length ranges."""
    from . import physics as ph
    hmin, hmax = mesh.edge_lengths()
    vt = ph.thermal_voltage(materials.temperature)
    per_region = {}
    flags = []
    lines = ["region        h_min(nm)  h_max(nm)  l_D(nm)  C_P^-1(nm)  l_skin(nm)  lam/(2p+1)(nm)"]
    for rid, name in sorted(mesh.region_names.items()):
        sel = mesh.region_id == rid
        if not np.any(sel):
            continue
        mat = materials.region(name)
        entry = {"h_min": float(hmin[sel].min()), "h_max": float(hmax[sel].max())}
        debye = peclet_inv = skin = lam_p = None
        if mat.semiconductor:
            eps = mat.eps_r * ph.EPS0
            debye = np.sqrt(2.0 * eps * vt / (ph.Q * n_est))
            peclet_inv = 2.0 * vt / e_est if e_est > 0 else np.inf
            entry["debye"] = debye
            entry["inv_peclet"] = peclet_inv
            bad = sel & (hmax > peclet_inv)
            flags.extend(np.flatnonzero(bad).tolist())
        if mat.drude is not None and wavelength is not None:
            om = 2 * np.pi * ph.C0 / wavelength
            epsw = mat.drude.eps_inf - mat.drude.omega_p ** 2 / (om ** 2 + 1j * mat.drude.gamma * om)
            kap = np.imag(np.sqrt(epsw + 0j)) * om / ph.C0
            skin = 1.0 / kap if kap > 0 else np.inf
            entry["skin_depth"] = skin
        if wavelength is not None:
            lam_p = wavelength / np.sqrt(max(mat.eps_r, 1.0)) / (2 * p + 1)
            entry["wavelength_per_order"] = lam_p
        per_region[name] = entry
        fmt = lambda v: f"{v * 1e9:9.1f}" if v is not None and np.isfinite(v) else "        -"
        lines.append(f"{name:12s} {fmt(entry['h_min'])} {fmt(entry['h_max'])}"
                     f" {fmt(debye)} {fmt(peclet_inv)} {fmt(skin)} {fmt(lam_p)}")
    flags = np.array(sorted(set(flags)), dtype=int)
    if len(flags):
        lines.append(f"WARNING: {len(flags)} elements violate the Peclet bound"
                     f" (longest edge * C_P >= 1)")
    return ResolutionReport(per_region=per_region, peclet_flags=flags,
                            text="\n".join(lines))


def unit_interval_mesh(n, lo=0.0, hi=1.0, left="ELECTRODE_D", right="ELECTRODE_D",
                       region="semi", h=None):
    """Convenience uniform 1D mesh with endpoint tags."""
    spec = make_spec(1, [lo], [hi],
                     [(region, [lo], [hi], (hi - lo) / n if h is None else h)],
                     tag_boxes=[(left, [lo], [lo]), (right, [hi], [hi])],
                     default_tag=left)
    return generate_structured_mesh(spec)
