"""Semi-discrete nodal-DG Maxwell solver: 1D (Ex, Hz along y) and 2D TE_z
(Ex, Ey, Hz), upwind fluxes, PEC/ABC boundaries, uniaxial PML via auxiliary
D/B fields, Drude metals via an auxiliary current ODE, and the optical
aperture source."""

from dataclasses import dataclass, field

import numpy as np

from . import physics as ph
from .physics import EPS0, MU0, PhysicsError

# state component layout
COMP_1D = ("ex", "hz", "dx", "bz", "jpx")
COMP_2D = ("ex", "ey", "hz", "dx", "dy", "bz", "jpx", "jpy")

_PEC_LIKE = {"PEC", "ELECTRODE_D", "SOURCE_APERTURE"}
_ABC_LIKE = {"ABC", "PML_interface"}


def upwind_flux(minus, plus, z_minus, z_plus, nhat):
    """Upwind EM numerical fluxes from face traces.

    minus/plus are dicts with keys 'ex', 'hz' and (2D) 'ey'; nhat carries the
    outward normal components, shape (..., dim).  Returns {'ex','ey','hz'}
    star values.
    """
    z_minus = np.asarray(z_minus, dtype=float)
    z_plus = np.asarray(z_plus, dtype=float)
    if np.any(z_minus <= 0) or np.any(z_plus <= 0):
        raise PhysicsError("wave impedance must be positive")
    ym, yp = 1.0 / z_minus, 1.0 / z_plus
    nhat = np.asarray(nhat, dtype=float)
    two_d = "ey" in minus
    ny = nhat[..., 1] if two_d else nhat[..., 0]
    nx = nhat[..., 0] if two_d else 0.0
    dhz = minus["hz"] - plus["hz"]
    dex = minus["ex"] - plus["ex"]
    out = {"ex": (ym * minus["ex"] + yp * plus["ex"] - ny * dhz) / (ym + yp)}
    if two_d:
        dey = minus["ey"] - plus["ey"]
        out["ey"] = (ym * minus["ey"] + yp * plus["ey"] + nx * dhz) / (ym + yp)
        out["hz"] = (z_minus * minus["hz"] + z_plus * plus["hz"]
                     + nx * dey - ny * dex) / (z_minus + z_plus)
    else:
        out["hz"] = (z_minus * minus["hz"] + z_plus * plus["hz"]
                     - ny * dex) / (z_minus + z_plus)
    return out


def boundary_flux_em(tag, minus):
    """Ghost ('plus') trace realizing the boundary condition for a face tag."""
    if tag in _PEC_LIKE:
        ghost = {k: -v for k, v in minus.items() if k.startswith("e")}
        ghost["hz"] = minus["hz"]
        return ghost
    if tag in _ABC_LIKE:
        return {k: np.zeros_like(v) for k, v in minus.items()}
    raise PhysicsError(f"no EM boundary rule for tag {tag!r}")


def drude_ade_rhs(e, j_p, mat):
    """dJ_p/dt = eps0 wp^2 E - gamma J_p."""
    co = ph.drude_coefficients(mat)
    return EPS0 * mat.drude.omega_p ** 2 * np.asarray(e) - co["gamma"] * np.asarray(j_p)


@dataclass
class PmlSpec:
    """Polynomial-graded uniaxial PML attached to selected domain sides."""
    thickness: dict              # side in {xlo,xhi,ylo,yhi} -> depth (m)
    order: int = 3
    r_target: float = 1e-8      # normal-incidence reflection design target

    def __post_init__(self):
        for side, d in self.thickness.items():
            if side not in ("xlo", "xhi", "ylo", "yhi"):
                raise PhysicsError(f"unknown PML side {side!r}")
            if d < 0:
                raise PhysicsError("PML thickness must be nonnegative")


def _pml_sigma_profiles(disc, pml):
    """Nodal damping rates sigma_x/eps0 and sigma_y/eps0, zero outside layers."""
    dim = disc.ref.dim
    sx = np.zeros((disc.K, disc.Np))
    sy = np.zeros((disc.K, disc.Np))
    if pml is None:
        return sx, sy
    lo = disc.mesh.vertices.min(axis=0)
    hi = disc.mesh.vertices.max(axis=0)
    for side, d in pml.thickness.items():
        if d == 0:
            continue
        axis = 0 if side[0] == "x" else 1
        if dim == 1 and axis == 0:
            raise PhysicsError("1D meshes only carry y-direction PML sides "
                               "(use ylo/yhi)")
        coord = disc.x[:, :, 0] if dim == 1 else disc.x[:, :, axis]
        if side.endswith("lo"):
            depth = (lo[0 if dim == 1 else axis] + d) - coord
        else:
            depth = coord - (hi[0 if dim == 1 else axis] - d)
        depth = np.clip(depth, 0.0, d)
        smax = -(pml.order + 1) * np.log(pml.r_target) * ph.C0 / (2.0 * d)
        prof = smax * (depth / d) ** pml.order
        if dim == 1 or axis == 1:
            sy += prof
        else:
            sx += prof
    return sx, sy


class MaxwellSolver:
    """Maxwell rhs evaluation on a Discretization with per-region materials.

    State is a (ncomp, K, Np) array; rhs(state, t, j_carrier) returns the same
    shape.  The sigma=0 PML path is the plain Maxwell path, so runs without
    PML and with zero-conductivity PML are bitwise identical.
    """

    def __init__(self, disc, materials, source=None, pml=None):
        self.disc = disc
        self.materials = materials
        self.source = source
        dim = disc.ref.dim
        self.comp = COMP_1D if dim == 1 else COMP_2D
        self.idx = {c: i for i, c in enumerate(self.comp)}

        mesh = disc.mesh
        mats = [materials.region(mesh.region_names[mesh.region_id[k]])
                for k in disc.elems]
        eps_r = np.array([m.drude.eps_inf if m.drude else m.eps_r for m in mats])
        mu_r = np.array([m.mu_r for m in mats])
        self.eps = (eps_r * EPS0)[:, None]
        self.mu = (mu_r * MU0)[:, None]
        z_elem = np.sqrt(self.mu[:, 0] / self.eps[:, 0])
        znod = np.repeat(z_elem[:, None], disc.Np, axis=1).reshape(-1)
        self.zm = znod[disc.vmapM]
        self.zp = znod[disc.vmapP]

        self.drude_a = np.array([EPS0 * m.drude.omega_p ** 2 if m.drude else 0.0
                                 for m in mats])[:, None]
        self.drude_g = np.array([m.drude.gamma if m.drude else 0.0
                                 for m in mats])[:, None]

        self.sx, self.sy = _pml_sigma_profiles(disc, pml)

        tags = np.array([["" for _ in range(disc.ref.Nfaces)]
                         for _ in range(disc.K)], dtype=object)
        from .mesh import BOUNDARY_TAGS
        for k in range(disc.K):
            for f in range(disc.ref.Nfaces):
                t = disc.face_tag[k, f]
                tags[k, f] = BOUNDARY_TAGS[t] if t >= 0 else ""
        pec = np.isin(tags, list(_PEC_LIKE))
        abc = np.isin(tags, list(_ABC_LIKE))
        other = (tags != "") & ~pec & ~abc
        if np.any(other):
            k, f = np.argwhere(other)[0]
            raise PhysicsError(f"no EM boundary rule for tag {tags[k, f]!r}")
        self.pec_mask = disc.face_expand(pec)
        self.abc_mask = disc.face_expand(abc)

        self._src_profile = None
        self._src_amp = 0.0
        if source is not None:
            self._build_source(source)

    # -- source ----------------------------------------------------------
    def _build_source(self, spec):
        disc = self.disc
        mask = disc.tag_face_mask("SOURCE_APERTURE")
        if not np.any(mask):
            raise PhysicsError("optical source requested but no face is tagged "
                               "SOURCE_APERTURE")
        xf = disc.x.reshape(-1, disc.ref.dim)[disc.vmapM]
        pts = xf[mask]
        center = pts.mean(axis=0)
        if disc.ref.dim == 2:
            span = pts - center
            # aperture tangent from the dominant spread direction
            _, _, vt = np.linalg.svd(span - span.mean(axis=0), full_matrices=False)
            that = vt[0]
            xi = (disc.x[:, :, :] - center) @ that
            nrm = np.array([-that[1], that[0]])
            zeta = (disc.x[:, :, :] - center) @ nrm
        else:
            xi = np.zeros((disc.K, disc.Np))
            zeta = disc.x[:, :, 0] - center[0]
        ksel = np.unique(np.nonzero(mask)[0])
        depth = 0.5 * float(np.mean(disc.h_elem[ksel]))
        prof = np.exp(-(xi / spec.beam_width) ** 2) * \
            np.exp(-(zeta / depth) ** 2) / (depth * np.sqrt(np.pi))
        # keep the footprint local to the aperture neighborhood
        prof[np.abs(zeta) > 4 * depth] = 0.0
        self._src_profile = prof
        z_ap = float(np.sqrt(self.mu[ksel, 0].mean() / self.eps[ksel, 0].mean()))
        if spec.peak_field is not None:
            sheet = 2.0 * spec.peak_field / z_ap
        else:
            # peak power through the aperture; sheet radiates S = Z K^2/4 per
            # side over an effective depth equal to the beam width
            p_lin = spec.power / spec.beam_width
            sheet = np.sqrt(4.0 * p_lin / (z_ap * spec.beam_width * np.sqrt(np.pi / 2.0)))
        self._src_amp = sheet
        self._src_spec = spec

    def optical_source(self, t):
        """Nodal source current density at time t (component along polarization)."""
        if self._src_profile is None:
            return None
        return self._src_amp * self._src_spec.envelope(t) * self._src_profile

    # -- state helpers ---------------------------------------------------
    def zero_state(self):
        return np.zeros((len(self.comp), self.disc.K, self.disc.Np))

    def energy(self, state):
        """Discrete EM energy 0.5 int (eps E^2 + mu H^2)."""
        d = self.disc
        i = self.idx
        u = self.eps * state[i["ex"]] ** 2 + self.mu * state[i["hz"]] ** 2
        if "ey" in i:
            u = u + self.eps * state[i["ey"]] ** 2
        return 0.5 * d.integrate(u)

    # -- rhs -------------------------------------------------------------
    def _traces(self, u, pec_sign):
        d = self.disc
        um = d.face_minus(u)
        up = d.face_plus(u)
        up = np.where(self.pec_mask, pec_sign * um, up)
        up = np.where(self.abc_mask, 0.0, up)
        return um, up

    def rhs(self, state, t=0.0, j_carrier=None):
        d = self.disc
        i = self.idx
        out = np.zeros_like(state)
        ex, hz = state[i["ex"]], state[i["hz"]]
        exm, exp_ = self._traces(ex, -1.0)
        hzm, hzp = self._traces(hz, +1.0)
        minus = {"ex": exm, "hz": hzm}
        plus = {"ex": exp_, "hz": hzp}
        if d.ref.dim == 2:
            ey = state[i["ey"]]
            eym, eyp = self._traces(ey, -1.0)
            minus["ey"] = eym
            plus["ey"] = eyp
        star = upwind_flux(minus, plus, self.zm, self.zp, d.nhat)

        jx = state[i["jpx"]].copy()
        jy = state[i["jpy"]].copy() if d.ref.dim == 2 else None
        src = self.optical_source(t)
        if src is not None:
            pol = getattr(self._src_spec, "polarization", "x")
            if pol == "y" and jy is not None:
                jy += src
            else:
                jx += src
        if j_carrier is not None:
            jx = jx + j_carrier[0]
            if jy is not None and len(j_carrier) > 1 and j_carrier[1] is not None:
                jy = jy + j_carrier[1]

        if d.ref.dim == 1:
            ny = d.nhat[:, :, 0]
            r_dx = d.ddx(hz, 0) + d.lift(ny * (star["hz"] - hzm)) - jx
            r_bz = d.ddx(ex, 0) + d.lift(ny * (star["ex"] - exm))
            r_dx = r_dx - self.sy * state[i["dx"]]
            r_bz = r_bz - self.sy * state[i["bz"]]
            out[i["dx"]] = r_dx
            out[i["bz"]] = r_bz
            out[i["ex"]] = (r_dx + self.sx * state[i["dx"]]) / self.eps
            out[i["hz"]] = r_bz / self.mu - self.sx * state[i["hz"]]
        else:
            nx = d.nhat[:, :, 0]
            ny = d.nhat[:, :, 1]
            dhz = star["hz"] - hzm
            r_dx = d.ddx(hz, 1) + d.lift(ny * dhz) - jx
            r_dy = -d.ddx(hz, 0) - d.lift(nx * dhz) - jy
            r_bz = (d.ddx(ex, 1) - d.ddx(ey, 0)
                    + d.lift(nx * (eym - star["ey"]) - ny * (exm - star["ex"])))
            r_dx = r_dx - self.sy * state[i["dx"]]
            r_dy = r_dy - self.sx * state[i["dy"]]
            r_bz = r_bz - self.sy * state[i["bz"]]
            out[i["dx"]] = r_dx
            out[i["dy"]] = r_dy
            out[i["bz"]] = r_bz
            out[i["ex"]] = (r_dx + self.sx * state[i["dx"]]) / self.eps
            out[i["ey"]] = (r_dy + self.sy * state[i["dy"]]) / self.eps
            out[i["hz"]] = r_bz / self.mu - self.sx * state[i["hz"]]

        out[i["jpx"]] = self.drude_a * state[i["ex"]] - self.drude_g * state[i["jpx"]]
        if d.ref.dim == 2:
            out[i["jpy"]] = self.drude_a * state[i["ey"]] - self.drude_g * state[i["jpy"]]
        return out
