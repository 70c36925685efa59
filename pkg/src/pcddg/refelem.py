"""Reference elements (interval / triangle) and element-local matrices.

Nodal Lagrange bases built on orthonormal Jacobi/Dubiner modal bases; all
local matrices (mass, stiffness, face mass, LDG gradient/divergence blocks)
are exact for affine elements.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg

NODETOL = 1e-10
MAX_ORDER = 6

# warp & blend parameters for triangle nodes (orders 1..7)
_WARP_ALPHA = [0.0, 0.0, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999]


class ConfigurationError(ValueError):
    """Unsupported discretization parameters."""


class MeshError(ValueError):
    """Degenerate or inconsistent element geometry."""


def jacobi_p(x, alpha, beta, n):
    """Orthonormal Jacobi polynomial P_n^(alpha,beta) evaluated at x."""
    x = np.asarray(x, dtype=float)
    pl = np.zeros((n + 1,) + x.shape)
    g0 = (2.0 ** (alpha + beta + 1) / (alpha + beta + 1)
          * _fact(alpha) * _fact(beta) / _fact(alpha + beta))
    pl[0] = 1.0 / np.sqrt(g0)
    if n == 0:
        return pl[0]
    g1 = (alpha + 1) * (beta + 1) / (alpha + beta + 3) * g0
    pl[1] = ((alpha + beta + 2) * x / 2 + (alpha - beta) / 2) / np.sqrt(g1)
    aold = 2.0 / (2 + alpha + beta) * np.sqrt(
        (alpha + 1) * (beta + 1) / (alpha + beta + 3))
    for i in range(1, n):
        h1 = 2 * i + alpha + beta
        anew = 2.0 / (h1 + 2) * np.sqrt(
            (i + 1) * (i + 1 + alpha + beta) * (i + 1 + alpha) * (i + 1 + beta)
            / (h1 + 1) / (h1 + 3))
        bnew = -(alpha ** 2 - beta ** 2) / (h1 * (h1 + 2))
        pl[i + 1] = (-aold * pl[i - 1] + (x - bnew) * pl[i]) / anew
        aold = anew
    return pl[n]


def _fact(a):
    from math import gamma
    return gamma(a + 1)


def grad_jacobi_p(x, alpha, beta, n):
    if n == 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    return np.sqrt(n * (n + alpha + beta + 1)) * jacobi_p(x, alpha + 1, beta + 1, n - 1)


def gauss_lobatto_nodes(p):
    """p+1 Gauss-Lobatto points on [-1, 1]."""
    if p == 1:
        return np.array([-1.0, 1.0])
    c = np.zeros(p + 1)
    c[p] = 1.0
    interior = npleg.legroots(npleg.legder(c))
    return np.concatenate(([-1.0], np.sort(interior), [1.0]))


def _rstoab(r, s):
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(np.abs(s - 1.0) > 1e-12, 2.0 * (1.0 + r) / (1.0 - s) - 1.0, -1.0)
    return a, s.copy()


def _simplex2dp(a, b, i, j):
    h1 = jacobi_p(a, 0, 0, i)
    h2 = jacobi_p(b, 2 * i + 1, 0, j)
    return np.sqrt(2.0) * h1 * h2 * (1 - b) ** i


def _grad_simplex2dp(a, b, i, j):
    fa = jacobi_p(a, 0, 0, i)
    dfa = grad_jacobi_p(a, 0, 0, i)
    gb = jacobi_p(b, 2 * i + 1, 0, j)
    dgb = grad_jacobi_p(b, 2 * i + 1, 0, j)
    # d/dr = da/dr d/da, da/dr = 2/(1-b)
    dmodedr = dfa * gb
    if i > 0:
        dmodedr *= (0.5 * (1 - b)) ** (i - 1)
    # d/ds = (1+a)/2 * 2/(1-b) d/da + d/db
    dmodeds = dfa * (gb * (0.5 * (1 + a)))
    if i > 0:
        dmodeds *= (0.5 * (1 - b)) ** (i - 1)
    tmp = dgb * (0.5 * (1 - b)) ** i
    if i > 0:
        tmp -= 0.5 * i * gb * (0.5 * (1 - b)) ** (i - 1)
    dmodeds += fa * tmp
    return np.sqrt(2.0) * 2 ** i * dmodedr, np.sqrt(2.0) * 2 ** i * dmodeds


def _warp_factor(p, rout):
    """Warp function mapping equispaced 1D nodes toward Gauss-Lobatto."""
    lgl = gauss_lobatto_nodes(p)
    req = np.linspace(-1, 1, p + 1)
    veq = np.array([jacobi_p(req, 0, 0, j) for j in range(p + 1)]).T
    pmat = np.linalg.solve(veq.T, np.array(
        [jacobi_p(rout, 0, 0, j) for j in range(p + 1)]))
    lmat = pmat.T
    warp = lmat @ (lgl - req)
    zerof = (np.abs(rout) < 1.0 - 1e-10).astype(float)
    sf = 1.0 - (zerof * rout) ** 2
    return warp / sf + warp * (zerof - 1)


def triangle_nodes(p):
    """Nodes on the reference triangle: equispaced for p<=2, warp&blend above."""
    n = p
    np_ = (n + 1) * (n + 2) // 2
    l1 = np.zeros(np_)
    l3 = np.zeros(np_)
    sk = 0
    for i in range(n + 1):
        for j in range(n + 1 - i):
            l1[sk] = i / n
            l3[sk] = j / n
            sk += 1
    l2 = 1.0 - l1 - l3
    x = -l2 + l3
    y = (-l2 - l3 + 2 * l1) / np.sqrt(3.0)
    if p > 2:
        alpha = _WARP_ALPHA[n - 1] if n <= len(_WARP_ALPHA) else 5.0 / 3.0
        blend1 = 4 * l2 * l3
        blend2 = 4 * l1 * l3
        blend3 = 4 * l1 * l2
        warpf1 = _warp_factor(n, l3 - l2)
        warpf2 = _warp_factor(n, l1 - l3)
        warpf3 = _warp_factor(n, l2 - l1)
        w1 = blend1 * warpf1 * (1 + (alpha * l1) ** 2)
        w2 = blend2 * warpf2 * (1 + (alpha * l2) ** 2)
        w3 = blend3 * warpf3 * (1 + (alpha * l3) ** 2)
        x = x + 1 * w1 + np.cos(2 * np.pi / 3) * w2 + np.cos(4 * np.pi / 3) * w3
        y = y + 0 * w1 + np.sin(2 * np.pi / 3) * w2 + np.sin(4 * np.pi / 3) * w3
    # map equilateral (x, y) to reference right triangle (r, s)
    l1e = (np.sqrt(3.0) * y + 1.0) / 3.0
    l2e = (-3.0 * x - np.sqrt(3.0) * y + 2.0) / 6.0
    l3e = (3.0 * x - np.sqrt(3.0) * y + 2.0) / 6.0
    r = -l2e + l3e - l1e
    s = -l2e - l3e + l1e
    return r, s


@dataclass
class ReferenceElement:
    dim: int
    p: int
    Np: int
    Nfp: int
    Nfaces: int
    nodes: np.ndarray            # (Np, dim) reference coordinates
    vandermonde: np.ndarray      # (Np, Np) modal-to-nodal
    diff: list                   # per direction (Np, Np)
    face_nodes: list             # per face, index arrays of length Nfp
    mass_ref: np.ndarray = field(default=None)      # reference mass inv(V V^T)
    lift_ref: np.ndarray = field(default=None)      # Np x (Nfaces*Nfp), unit face Jacobian
    face_mass_ref: np.ndarray = field(default=None)  # Nfp x Nfp reference face mass

    @property
    def face_vertices(self):
        if self.dim == 1:
            return [(0,), (1,)]
        return [(0, 1), (1, 2), (2, 0)]


def build_reference_element(dim, p):
    """Nodal reference element of order p on the interval (dim=1) or triangle."""
    if dim not in (1, 2):
        raise ConfigurationError(f"unsupported dim {dim}")
    if not (1 <= p <= MAX_ORDER):
        raise ConfigurationError(f"order p={p} outside supported range [1, {MAX_ORDER}]")
    if dim == 1:
        r = gauss_lobatto_nodes(p)
        Np = p + 1
        V = np.array([jacobi_p(r, 0, 0, j) for j in range(Np)]).T
        Vr = np.array([grad_jacobi_p(r, 0, 0, j) for j in range(Np)]).T
        Dr = Vr @ np.linalg.inv(V)
        ref = ReferenceElement(
            dim=1, p=p, Np=Np, Nfp=1, Nfaces=2,
            nodes=r.reshape(-1, 1), vandermonde=V, diff=[Dr],
            face_nodes=[np.array([0]), np.array([Np - 1])])
        ref.face_mass_ref = np.array([[1.0]])
    else:
        r, s = triangle_nodes(p)
        Np = (p + 1) * (p + 2) // 2
        a, b = _rstoab(r, s)
        cols = []
        dcols_r = []
        dcols_s = []
        for i in range(p + 1):
            for j in range(p + 1 - i):
                cols.append(_simplex2dp(a, b, i, j))
                dr, ds = _grad_simplex2dp(a, b, i, j)
                dcols_r.append(dr)
                dcols_s.append(ds)
        V = np.array(cols).T
        Vinv = np.linalg.inv(V)
        Dr = np.array(dcols_r).T @ Vinv
        Ds = np.array(dcols_s).T @ Vinv
        fn1 = np.flatnonzero(np.abs(s + 1) < NODETOL)
        fn2 = np.flatnonzero(np.abs(r + s) < NODETOL)
        fn3 = np.flatnonzero(np.abs(r + 1) < NODETOL)
        fn1 = fn1[np.argsort(r[fn1])]
        fn2 = fn2[np.argsort(s[fn2])]
        fn3 = fn3[np.argsort(-s[fn3])]
        ref = ReferenceElement(
            dim=2, p=p, Np=Np, Nfp=p + 1, Nfaces=3,
            nodes=np.column_stack([r, s]), vandermonde=V, diff=[Dr, Ds],
            face_nodes=[fn1, fn2, fn3])
        r1 = gauss_lobatto_nodes(p) if p > 1 else np.array([-1.0, 1.0])
        # reference face mass from the trace basis on each face
        fm = []
        for fn in ref.face_nodes:
            t = _face_parameter(ref, fn)
            V1 = np.array([jacobi_p(t, 0, 0, j) for j in range(p + 1)]).T
            fm.append(np.linalg.inv(V1 @ V1.T))
        ref.face_mass_ref = fm[0]
        ref._face_mass_all = fm
    ref.mass_ref = np.linalg.inv(ref.vandermonde @ ref.vandermonde.T)
    ref.lift_ref = _build_lift(ref)
    _check_reference(ref)
    return ref


def _face_parameter(ref, fn):
    """Arclength-like parameter in [-1,1] along a triangle face."""
    pts = ref.nodes[fn]
    d = pts[-1] - pts[0]
    t = (pts - pts[0]) @ d / (d @ d)
    return 2.0 * t - 1.0


def _build_lift(ref):
    """Emat with unit surface Jacobian, premultiplied by inv(mass_ref)."""
    emat = np.zeros((ref.Np, ref.Nfaces * ref.Nfp))
    for f in range(ref.Nfaces):
        fn = ref.face_nodes[f]
        if ref.dim == 1:
            fm = np.array([[1.0]])
        else:
            fm = ref._face_mass_all[f]
        emat[np.ix_(fn, np.arange(f * ref.Nfp, (f + 1) * ref.Nfp))] = fm
    return ref.vandermonde @ (ref.vandermonde.T @ emat)


def _check_reference(ref):
    # Lagrange property via Vandermonde conditioning
    ident = ref.vandermonde @ np.linalg.inv(ref.vandermonde)
    if np.max(np.abs(ident - np.eye(ref.Np))) > 1e-9:
        raise ConfigurationError(f"ill-conditioned basis at p={ref.p}")


@dataclass
class ElementGeometry:
    """Affine map metric data for one physical element."""
    dim: int
    verts: np.ndarray
    jac: float                 # volume Jacobian
    metric: np.ndarray         # metric[phys, ref] = d(ref)/d(phys), (dim, dim)
    normals: np.ndarray        # (Nfaces, dim) outward unit normals
    sjac: np.ndarray           # (Nfaces,) surface Jacobians
    volume: float


def element_geometry(ref, verts):
    verts = np.asarray(verts, dtype=float)
    if ref.dim == 1:
        h = verts[1, 0] - verts[0, 0]
        if h <= 0:
            raise MeshError(f"degenerate 1D element, length {h}")
        return ElementGeometry(
            dim=1, verts=verts, jac=h / 2.0,
            metric=np.array([[2.0 / h]]),
            normals=np.array([[-1.0], [1.0]]),
            sjac=np.array([1.0, 1.0]), volume=h)
    xr = (verts[1] - verts[0]) / 2.0
    xs = (verts[2] - verts[0]) / 2.0
    jac = xr[0] * xs[1] - xs[0] * xr[1]
    if jac <= 0:
        raise MeshError("inverted or degenerate triangle")
    rx = xs[1] / jac
    ry = -xs[0] / jac
    sx = -xr[1] / jac
    sy = xr[0] / jac
    metric = np.array([[rx, sx], [ry, sy]])
    normals = []
    sjac = []
    for (a, b) in [(0, 1), (1, 2), (2, 0)]:
        e = verts[b] - verts[a]
        ln = np.hypot(e[0], e[1])
        normals.append(np.array([e[1], -e[0]]) / ln)
        sjac.append(ln / 2.0)
    return ElementGeometry(
        dim=2, verts=verts, jac=jac, metric=metric,
        normals=np.array(normals), sjac=np.array(sjac), volume=2.0 * jac)


def elemental_mass_matrix(ref, geom):
    """Physical-element mass matrix M(i,j) = int l_i l_j dV."""
    if geom.jac <= 0:
        raise MeshError("nonpositive element Jacobian")
    return geom.jac * ref.mass_ref


def phys_diff_matrices(ref, geom):
    """Collocation differentiation matrices d/dx_nu on the physical element."""
    return [sum(geom.metric[nu, d] * ref.diff[d] for d in range(ref.dim))
            for nu in range(ref.dim)]


def elemental_stiffness_and_face(ref, geom):
    """Stiffness S~^nu(i,j) = int l_i d_nu l_j dV and per-face face-mass matrices."""
    mass = elemental_mass_matrix(ref, geom)
    dmats = phys_diff_matrices(ref, geom)
    stiffness = [mass @ d for d in dmats]
    face_mass = []
    for f in range(ref.Nfaces):
        if ref.dim == 1:
            fm = np.array([[1.0]])
        else:
            fm = ref._face_mass_all[f] * geom.sjac[f]
        face_mass.append(fm)
    return {"stiffness": stiffness, "face_mass": face_mass}


def ldg_gradient_divergence(ref, geom, beta_signs, boundary_faces=()):
    """Element-local LDG gradient/divergence blocks.

    beta_signs[f] = sign(beta_hat . n_hat) on face f with n_hat outward;
    returns local blocks (dim*Np x Np) and per-face neighbor blocks
    (dim*Np x Nfp) satisfying div = -grad^T blockwise.  Neighbor blocks on
    boundary faces are zero.
    """
    beta_signs = np.asarray(beta_signs, dtype=float)
    if beta_signs.shape != (ref.Nfaces,) or not np.all(np.abs(beta_signs) == 1.0):
        raise MeshError("beta_signs must give +-1 per face")
    ops = elemental_stiffness_and_face(ref, geom)
    dim, Np, Nfp = ref.dim, ref.Np, ref.Nfp
    grad = np.zeros((dim * Np, Np))
    grad_nb = [np.zeros((dim * Np, Nfp)) for _ in range(ref.Nfaces)]
    for nu in range(dim):
        blk = slice(nu * Np, (nu + 1) * Np)
        grad[blk, :] = -ops["stiffness"][nu].T
    for f in range(ref.Nfaces):
        fn = ref.face_nodes[f]
        fm = ops["face_mass"][f]
        for nu in range(dim):
            blk = slice(nu * Np, (nu + 1) * Np)
            w = geom.normals[f, nu] * fm
            grad[blk, :][np.ix_(np.arange(Np)[fn], fn)] += \
                0.5 * (1 + beta_signs[f]) * w
            if f not in boundary_faces:
                grad_nb[f][blk, :][fn, :] += 0.5 * (1 - beta_signs[f]) * w
    div = -grad.T
    div_nb = [-g.T for g in grad_nb]
    return {"grad_ldg": grad, "grad_neighbor": grad_nb,
            "div_ldg": div, "div_neighbor": div_nb}
