"""Stationary Poisson / drift-diffusion solve by Gummel iteration.

Poisson is discretized with the same alternating LDG fluxes as the transient
carrier solver (plus a Dirichlet penalty); the two continuity equations are
solved as linear LDG convection-diffusion systems with the opposite carrier
lagged.  Sparse operators are assembled by probing the matrix-free kernels
with distance-2-colored unit vectors, so the assembled systems are exactly
the kernels the transient solver runs.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import physics as ph
from .physics import PhysicsError, Q
from .dd_dg import DDSolver, ldg_diffusion_fluxes
from .dgops import build_discretization
from .mesh import BOUNDARY_TAGS
from .refelem import build_reference_element

_TAG_IDX = {t: i for i, t in enumerate(BOUNDARY_TAGS)}


class ConvergenceError(RuntimeError):
    """Stationary solver failed to converge; carries the iteration history."""

    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


@dataclass
class Contact:
    name: str
    lo: np.ndarray
    hi: np.ndarray
    voltage: float


def make_contacts(specs):
    return [Contact(name, np.atleast_1d(np.asarray(lo, dtype=float)),
                    np.atleast_1d(np.asarray(hi, dtype=float)), float(v))
            for name, lo, hi, v in specs]


def face_centroids(disc):
    xf = disc.x.reshape(-1, disc.ref.dim)[disc.vmapM]
    xf = xf.reshape(disc.K, disc.ref.Nfaces, disc.ref.Nfp, -1)
    return xf.mean(axis=2)


def contact_face_index(disc, contacts):
    """(K, Nfaces) contact index for Dirichlet faces, -1 elsewhere."""
    out = -np.ones((disc.K, disc.ref.Nfaces), dtype=int)
    cent = face_centroids(disc)
    dirf = disc.face_tag == _TAG_IDX["ELECTRODE_D"]
    for k, f in np.argwhere(dirf):
        c = cent[k, f]
        hit = [i for i, ct in enumerate(contacts)
               if np.all(ct.lo - 1e-12 <= c) and np.all(c <= ct.hi + 1e-12)]
        if not hit:
            raise PhysicsError(
                f"electrode face at {c} matches no declared contact")
        out[k, f] = hit[0]
    return out


@dataclass
class StationarySolution:
    phi: np.ndarray                  # (Kp, Np) on the Poisson subdomain
    e_s: tuple                       # field components, same layout
    n_e: np.ndarray                  # (Kd, Np) on the semiconductor subdomain
    n_h: np.ndarray
    j_e: tuple                       # charge-current components (Kd, Np)
    j_h: tuple
    gummel_history: list = field(default_factory=list)
    converged: bool = False
    mesh_hash: str = ""


# ---------------------------------------------------------------------------
# sparse assembly of matrix-free kernels

def _element_adjacency(disc):
    glob2sub = {g: s for s, g in enumerate(disc.elems)}
    nbrs = []
    for kg in disc.elems:
        nb = set()
        for f in range(disc.ref.Nfaces):
            g2 = disc.mesh.etoe[kg, f]
            if g2 != kg and g2 in glob2sub:
                nb.add(glob2sub[g2])
        nbrs.append(nb)
    return nbrs


def _ball(nbrs, k, radius):
    out = {k}
    frontier = {k}
    for _ in range(radius):
        frontier = {n for f in frontier for n in nbrs[f]} - out
        out |= frontier
    return out


def _stencil_colors(disc, radius):
    """Greedy coloring with separation > 2*radius so that the row balls of
    same-color probes never overlap."""
    nbrs = _element_adjacency(disc)
    colors = -np.ones(disc.K, dtype=int)
    for k in range(disc.K):
        taken = {colors[n] for n in _ball(nbrs, k, 2 * radius)}
        c = 0
        while c in taken:
            c += 1
        colors[k] = c
    return colors, nbrs


def assemble_affine_operator(apply_fn, disc, radius=2, homogeneous_fn=None):
    """Assemble apply_fn(u) = A u + c by probing the matrix-free kernel.

    radius is the stencil width in elements: 2 for LDG diffusion (gradient
    then divergence), 1 for pure advection.  When the affine part carries
    large boundary data, pass homogeneous_fn (same operator with zero
    boundary data) so the unit probes of A are not lost to cancellation.
    """
    K, Np = disc.K, disc.Np
    c = apply_fn(np.zeros((K, Np)))
    hfn = homogeneous_fn if homogeneous_fn is not None else apply_fn
    ch = hfn(np.zeros((K, Np)))
    colors, nbrs = _stencil_colors(disc, radius)
    rows, cols, vals = [], [], []
    for color in range(colors.max() + 1):
        ks = np.flatnonzero(colors == color)
        for j in range(Np):
            u = np.zeros((K, Np))
            u[ks, j] = 1.0
            r = hfn(u) - ch
            for k in ks:
                for k2 in sorted(_ball(nbrs, k, radius)):
                    rows.extend(k2 * Np + np.arange(Np))
                    cols.extend([k * Np + j] * Np)
                    vals.extend(r[k2])
    a = sp.csr_matrix((vals, (rows, cols)), shape=(K * Np, K * Np))
    a.eliminate_zeros()
    return a, c.reshape(-1)


def solve_sparse(a, b):
    x = spla.spsolve(a.tocsc(), b)
    if not np.all(np.isfinite(x)):
        raise ConvergenceError("sparse solve produced non-finite values")
    return x


# ---------------------------------------------------------------------------

class StationaryProblem:
    """Two-subdomain stationary problem on a shared mesh.

    Poisson lives on every non-metal element; the continuity equations live
    on the semiconductor elements.  Metal-adjacent faces become Dirichlet
    contacts, semiconductor/dielectric interfaces become Robin walls.
    """

    def __init__(self, mesh, materials, contacts, p=2, penalty=10.0):
        self.mesh = mesh
        self.materials = materials
        self.contacts = contacts
        ref = build_reference_element(mesh.dim, p)
        mat_of = lambda k: materials.region(mesh.region_names[mesh.region_id[k]])
        is_metal = np.array([mat_of(k).drude is not None for k in range(mesh.K)])
        is_semi = np.array([mat_of(k).semiconductor for k in range(mesh.K)])
        if not np.any(is_semi):
            raise PhysicsError("stationary problem needs a semiconductor region")
        self.pdisc = build_discretization(
            mesh, ref, element_mask=~is_metal,
            cut_face_tag=lambda k, f, n: "ELECTRODE_D")
        self.ddisc = build_discretization(
            mesh, ref, element_mask=is_semi,
            cut_face_tag=lambda k, f, n:
                "ELECTRODE_D" if is_metal[n] else "INSULATOR_R")
        # semiconductor rows inside the Poisson subdomain
        p2s = {g: i for i, g in enumerate(self.pdisc.elems)}
        self.semi_in_p = np.array([p2s[g] for g in self.ddisc.elems])
        self.semi_mask_p = np.zeros(self.pdisc.K, dtype=bool)
        self.semi_mask_p[self.semi_in_p] = True

        pmats = [mat_of(g) for g in self.pdisc.elems]
        self.eps_p = np.array([m.eps_r * ph.EPS0 for m in pmats])[:, None]
        dmats = [mat_of(g) for g in self.ddisc.elems]
        self.doping = np.array([m.doping for m in dmats])[:, None]
        self.n_i = np.array([m.n_i for m in dmats])[:, None]
        self.dd = DDSolver(self.ddisc, materials)

        self.penalty = penalty
        self._setup_poisson_bc()
        self._setup_dd_bc()

    # -- boundary plumbing ----------------------------------------------
    def _contact_of_face(self, disc):
        return contact_face_index(disc, self.contacts)

    def _setup_poisson_bc(self):
        d = self.pdisc
        self.p_contact = self._contact_of_face(d)
        self.p_dir = d.face_expand(self.p_contact >= 0)
        if not np.any(self.p_dir):
            raise PhysicsError("all-Neumann Poisson problem: no electrode "
                               "faces to gauge the potential")
        v_t = self.materials.v_t
        volt = np.zeros(d.face_tag.shape)
        built_in = np.zeros(d.face_tag.shape)
        g2d = {g: i for i, g in enumerate(self.ddisc.elems)}
        for k, f in np.argwhere(self.p_contact >= 0):
            volt[k, f] = self.contacts[self.p_contact[k, f]].voltage
            g = d.elems[k]
            if g in g2d:    # semiconductor contact: add the built-in offset
                kd = g2d[g]
                ne, _ = ph.ohmic_contact_densities(self.doping[kd, 0],
                                                   self.n_i[kd, 0])
                built_in[k, f] = v_t * np.log(ne / self.n_i[kd, 0])
        self._volt_face = d.face_expand(volt)
        self._built_in_face = d.face_expand(built_in)
        self.phi_dirichlet = self._volt_face + self._built_in_face
        # penalty coefficient per face node
        h = np.repeat(d.h_elem[:, None], d.nfp_tot, axis=1)
        eps_f = np.repeat(self.eps_p, d.nfp_tot, axis=1)
        self.tau = self.penalty * eps_f * (d.ref.p + 1) ** 2 / h

    def _setup_dd_bc(self):
        d = self.ddisc
        self.d_contact = self._contact_of_face(d)
        ne_c, nh_c = ph.ohmic_contact_densities(self.doping, self.n_i)
        self.ne_contact = np.broadcast_to(ne_c, (d.K, d.Np)).copy()
        self.nh_contact = np.broadcast_to(nh_c, (d.K, d.Np)).copy()
        self.fd_ne = np.repeat(ne_c, d.nfp_tot, axis=1)
        self.fd_nh = np.repeat(nh_c, d.nfp_tot, axis=1)

    # -- Poisson ---------------------------------------------------------
    def poisson_gradient(self, phi, dirichlet_vals):
        """LDG gradient of phi on the Poisson subdomain (Neumann: phi*=phi-)."""
        d = self.pdisc
        pm, pp = d.face_minus(phi), d.face_plus(phi)
        bs = d.face_expand(d.beta_sign)
        star = ldg_diffusion_fluxes(pm, pp, pm, pp, d.nhat, bs)["n_star"]
        bnd = d.face_expand(d.face_tag >= 0)
        star = np.where(bnd, pm, star)
        star = np.where(self.p_dir, dirichlet_vals, star)
        corr = star - pm
        return tuple(d.ddx(phi, nu) + d.lift(d.nhat[:, :, nu] * corr)
                     for nu in range(d.ref.dim))

    def poisson_apply(self, phi, dirichlet_vals=None):
        """Nodal values of -div(eps grad phi) with LDG fluxes and penalty."""
        d = self.pdisc
        g = self.phi_dirichlet if dirichlet_vals is None else dirichlet_vals
        q = self.poisson_gradient(phi, g)
        fq = tuple(self.eps_p * q[nu] for nu in range(d.ref.dim))
        fm = sum(d.nhat[:, :, nu] * d.face_minus(fq[nu]) for nu in range(d.ref.dim))
        fp = sum(d.nhat[:, :, nu] * d.face_plus(fq[nu]) for nu in range(d.ref.dim))
        bs = d.face_expand(d.beta_sign)
        fstar = ldg_diffusion_fluxes(fm, fm, fm, fp, d.nhat, bs)["dq_star"]
        bnd = d.face_expand(d.face_tag >= 0)
        fstar = np.where(bnd, 0.0, fstar)                       # Neumann
        pm = d.face_minus(phi)
        fstar = np.where(self.p_dir, fm + self.tau * (g - pm), fstar)
        div = sum(d.ddx(fq[nu], nu) for nu in range(d.ref.dim))
        return -(div + d.lift(fstar - fm))

    def charge_density(self, n_e, n_h):
        """rho = q (n_h - n_e + C) on semiconductor rows of the Poisson grid."""
        rho = np.zeros((self.pdisc.K, self.pdisc.Np))
        rho[self.semi_in_p] = Q * (n_h - n_e + self.doping)
        return rho

    def poisson_solve(self, n_e, n_h, dirichlet_vals=None):
        """Linear Poisson solve with frozen charge; returns phi, E^s."""
        a, c = assemble_affine_operator(
            lambda u: self.poisson_apply(u, dirichlet_vals), self.pdisc,
            homogeneous_fn=lambda u: self.poisson_apply(
                u, np.zeros_like(self.phi_dirichlet)))
        rho = self.charge_density(n_e, n_h).reshape(-1)
        phi = solve_sparse(a, rho - c).reshape(self.pdisc.K, self.pdisc.Np)
        g = self.phi_dirichlet if dirichlet_vals is None else dirichlet_vals
        e_s = tuple(-q for q in self.poisson_gradient(phi, g))
        return phi, e_s

    # -- continuity ------------------------------------------------------
    def _carrier_system(self, carrier, e_s_dd, n_other, den):
        """Affine kernel for the steady continuity equation of one carrier,
        plus its homogeneous-boundary-data twin for matrix probing."""
        dd = self.dd
        d = self.ddisc
        mu = dd.mu_e if carrier == "e" else dd.mu_h
        dc = dd.d_e if carrier == "e" else dd.d_h
        sgn = -1.0 if carrier == "e" else 1.0
        v = tuple(sgn * mu * c for c in e_s_dd)
        fd = self.fd_ne if carrier == "e" else self.fd_nh
        h = np.repeat(d.h_elem[:, None], d.nfp_tot, axis=1)
        dd.dir_penalty = self.penalty * d.face_minus(dc) \
            * (d.ref.p + 1) ** 2 / h

        def make(fd_arr):
            def apply_fn(n):
                rhs = dd.scalar_rhs(n, v, dc, t=0.0,
                                    f_d=lambda pts, t: fd_arr[dd.dir_mask])
                r_lin = (n * n_other - self.n_i ** 2) / den
                return rhs - r_lin
            return apply_fn
        return make(fd), make(np.zeros_like(fd))

    def continuity_solve(self, carrier, e_s_dd, n_self, n_other):
        """One lagged-R linear solve for n_c^s."""
        dd = self.dd
        den = dd.tau_e * (dd.n_h1 + (n_other if carrier == "e" else n_self)) \
            + dd.tau_h * (dd.n_e1 + (n_self if carrier == "e" else n_other))
        apply_fn, homo_fn = self._carrier_system(carrier, e_s_dd, n_other, den)
        a, c = assemble_affine_operator(apply_fn, self.ddisc,
                                        homogeneous_fn=homo_fn)
        n = solve_sparse(a, -c).reshape(self.ddisc.K, self.ddisc.Np)
        if not np.all(np.isfinite(n)):
            raise ConvergenceError("continuity solve produced non-finite density")
        # transient sweeps may undershoot near contacts; clip and let the
        # iteration self-correct, but abort on a wholesale sign flip
        peak = np.abs(n).max()
        if n.min() < -peak:
            raise ConvergenceError(
                f"continuity solve lost positivity (min {n.min():.3e})")
        return np.maximum(n, 0.0)

    def e_on_dd(self, e_s):
        return tuple(c[self.semi_in_p] for c in e_s)

    # -- Gummel ----------------------------------------------------------
    def equilibrium_initial_guess(self):
        ne, nh = ph.ohmic_contact_densities(self.doping, self.n_i)
        v_t = self.materials.v_t
        n_e = np.broadcast_to(ne, (self.ddisc.K, self.ddisc.Np)).copy()
        n_h = np.broadcast_to(nh, (self.ddisc.K, self.ddisc.Np)).copy()
        phi = np.zeros((self.pdisc.K, self.pdisc.Np))
        phi[self.semi_in_p] = v_t * np.log(n_e / self.n_i)
        zeros = tuple(np.zeros_like(phi) for _ in range(self.pdisc.ref.dim))
        zd = tuple(np.zeros_like(n_e) for _ in range(self.ddisc.ref.dim))
        return StationarySolution(phi=phi, e_s=zeros, n_e=n_e, n_h=n_h,
                                  j_e=zd, j_h=zd,
                                  mesh_hash=self.mesh.content_hash())

    def _newton_poisson(self, phi, n_e, n_h, max_iter=30, clamp=5.0,
                        dirichlet_vals=None):
        """Damped Newton on the nonlinear Poisson equation with Boltzmann-
        linearized charge; returns updated phi and the carrier multipliers."""
        v_t = self.materials.v_t
        a, c = assemble_affine_operator(
            lambda u: self.poisson_apply(u, dirichlet_vals), self.pdisc,
            homogeneous_fn=lambda u: self.poisson_apply(
                u, np.zeros_like(self.phi_dirichlet)))
        ne, nh = n_e.copy(), n_h.copy()
        for it in range(max_iter):
            resid = a @ phi.reshape(-1) + c - self.charge_density(ne, nh).reshape(-1)
            dcharge = np.zeros((self.pdisc.K, self.pdisc.Np))
            dcharge[self.semi_in_p] = Q * (ne + nh) / v_t
            jac = a + sp.diags(dcharge.reshape(-1))
            dphi = solve_sparse(jac.tocsr(), -resid)
            if not np.all(np.isfinite(dphi)):
                raise ConvergenceError("Newton-Poisson produced non-finite update")
            step = np.clip(dphi.reshape(phi.shape), -clamp * v_t, clamp * v_t)
            phi = phi + step
            upd = step[self.semi_in_p] / v_t
            ne = ne * np.exp(upd)
            nh = nh * np.exp(-upd)
            if np.max(np.abs(dphi)) / v_t < 1e-8:
                break
        return phi, ne, nh

    def gummel_solve(self, tol=1e-6, max_iter=200, verbose=False,
                     ramp_step=None):
        """Gummel iteration with bias-ramp continuation: the applied contact
        voltages are scaled up in increments of at most ramp_step volts
        (default ~10 V_T), each stage warm-started from the previous one."""
        v_t = self.materials.v_t
        if ramp_step is None:
            ramp_step = 10.0 * v_t
        v_max = max((abs(ct.voltage) for ct in self.contacts), default=0.0)
        n_stage = max(1, int(np.ceil(v_max / ramp_step)))
        sol = self.equilibrium_initial_guess()
        phi, n_e, n_h = sol.phi, sol.n_e, sol.n_h
        history = []
        for stage in range(1, n_stage + 1):
            scale = stage / n_stage
            g_dir = scale * self._volt_face + self._built_in_face
            phi, e_s, n_e, n_h = self._gummel_sweeps(
                g_dir, phi, n_e, n_h, tol, max_iter, history, verbose,
                label=f"ramp {scale:.3f}")
        return self._finalize(phi, e_s, n_e, n_h, history)

    def _sweep(self, g_dir, phi, n_e, n_h):
        """One Gummel sweep: nonlinear Poisson, then the two continuity
        solves; returns the updated state and the field."""
        phi, n_e_b, n_h_b = self._newton_poisson(phi, n_e, n_h,
                                                 dirichlet_vals=g_dir)
        e_s = tuple(-q for q in self.poisson_gradient(phi, g_dir))
        e_dd = self.e_on_dd(e_s)
        self.dd.set_stationary(e_dd, n_e_b, n_h_b)
        n_e = self.continuity_solve("e", e_dd, n_e_b, n_h_b)
        n_h = self.continuity_solve("h", e_dd, n_h, n_e)
        return phi, n_e, n_h, e_s

    def _pack(self, phi, n_e, n_h):
        v_t = self.materials.v_t
        nref = np.abs(self.doping) + self.n_i
        le = v_t * np.log(np.maximum(n_e, 1.0) / nref)
        lh = v_t * np.log(np.maximum(n_h, 1.0) / nref)
        return np.concatenate([phi.ravel(), le.ravel(), lh.ravel()])

    def _unpack(self, s):
        np_p = self.pdisc.K * self.pdisc.Np
        nd = self.ddisc.K * self.ddisc.Np
        v_t = self.materials.v_t
        nref = np.abs(self.doping) + self.n_i
        phi = s[:np_p].reshape(self.pdisc.K, self.pdisc.Np)
        n_e = nref * np.exp(s[np_p:np_p + nd].reshape(nref.shape[0], -1) / v_t)
        n_h = nref * np.exp(s[np_p + nd:].reshape(nref.shape[0], -1) / v_t)
        return phi, n_e, n_h

    def _gummel_sweeps(self, g_dir, phi, n_e, n_h, tol, max_iter, history,
                       verbose, label="", anderson_depth=4):
        """Anderson-accelerated fixed-point iteration on the Gummel sweep."""
        v_t = self.materials.v_t
        np_p = self.pdisc.K * self.pdisc.Np
        s = self._pack(phi, n_e, n_h)
        s_hist, f_hist = [], []
        e_s = None
        for it in range(max_iter):
            phi, n_e, n_h = self._unpack(s)
            phi, n_e, n_h, e_s = self._sweep(g_dir, phi, n_e, n_h)
            if not np.all(np.isfinite(phi)):
                bad = np.argwhere(~np.isfinite(phi))[0]
                raise ConvergenceError(f"non-finite potential at element "
                                       f"{bad[0]}, node {bad[1]}", history)
            g = self._pack(phi, n_e, n_h)
            f = g - s
            update = float(np.max(np.abs(f[:np_p])) / v_t)
            history.append(update)
            if verbose:
                print(f"gummel {label} iter {it:3d}: "
                      f"max|dphi|/V_T = {update:.3e}")
            if update < tol:
                return phi, e_s, n_e, n_h
            s_hist.append(s)
            f_hist.append(f)
            if len(s_hist) > anderson_depth:
                s_hist.pop(0)
                f_hist.pop(0)
            m = len(s_hist)
            if m > 1:
                df = np.column_stack([f_hist[i] - f_hist[-1]
                                      for i in range(m - 1)])
                try:
                    gamma, *_ = np.linalg.lstsq(df, -f_hist[-1], rcond=1e-10)
                except np.linalg.LinAlgError:
                    gamma = np.zeros(m - 1)
                s = g + sum(gamma[i] * ((s_hist[i] + f_hist[i]) - g)
                            for i in range(m - 1))
            else:
                s = g
        raise ConvergenceError(
            f"Gummel iteration did not reach {tol} in {max_iter} sweeps "
            f"(last update {history[-1]:.3e})", history)

    def _finalize(self, phi, e_s, n_e, n_h, history):
        dd = self.dd
        e_dd = self.e_on_dd(e_s)
        dd.set_stationary(e_dd, n_e, n_h)
        fd_e = lambda pts, t: self.fd_ne[dd.dir_mask]
        fd_h = lambda pts, t: self.fd_nh[dd.dir_mask]
        grad_ne = dd.gradient(n_e, f_d=fd_e)
        grad_nh = dd.gradient(n_h, f_d=fd_h)
        dim = self.ddisc.ref.dim
        j_e = tuple(Q * (dd.mu_e * n_e * e_dd[nu] + dd.d_e * grad_ne[nu])
                    for nu in range(dim))
        j_h = tuple(Q * (dd.mu_h * n_h * e_dd[nu] - dd.d_h * grad_nh[nu])
                    for nu in range(dim))
        return StationarySolution(
            phi=phi, e_s=e_s, n_e=n_e, n_h=n_h, j_e=j_e, j_h=j_h,
            gummel_history=history, converged=True,
            mesh_hash=self.mesh.content_hash())

    # -- observables -----------------------------------------------------
    def stationary_current(self, sol):
        """Terminal current per contact, I = contour integral of (J_e+J_h).n."""
        if not sol.converged:
            raise ConvergenceError("stationary_current needs a converged solution")
        d = self.ddisc
        dim = d.ref.dim
        jtot = tuple(sol.j_e[nu] + sol.j_h[nu] for nu in range(dim))
        jn = sum(d.nhat[:, :, nu] * d.face_minus(jtot[nu]) for nu in range(dim))
        out = {}
        for i, ct in enumerate(self.contacts):
            mask = d.face_expand(self.d_contact == i)
            out[ct.name] = _face_integral(d, jn, mask)
        return out


def _face_integral(disc, face_vals, mask):
    ref = disc.ref
    if ref.dim == 1:
        w = np.ones(ref.Nfaces * ref.Nfp)
        sj = disc.sjac * 0 + 1.0
    else:
        w = np.concatenate([ref._face_mass_all[f].sum(axis=0)
                            for f in range(ref.Nfaces)])
        sj = disc.sjac
    wfull = np.repeat(sj, ref.Nfp, axis=1) * w[None, :]
    return float(np.sum(face_vals * wfull * mask))


# ---------------------------------------------------------------------------
# checkpoint I/O

def save_checkpoint(path, problem, sol):
    d = problem.pdisc
    dim = d.ref.dim
    n_e = np.zeros((d.K, d.Np))
    n_h = np.zeros((d.K, d.Np))
    n_e[problem.semi_in_p] = sol.n_e
    n_h[problem.semi_in_p] = sol.n_h
    ex = sol.e_s[0]
    ey = sol.e_s[1] if dim == 2 else np.zeros_like(ex)
    with open(path, "w") as fh:
        fh.write("# pcddg stationary checkpoint v1\n")
        fh.write(f"# mesh_hash {sol.mesh_hash}\n")
        fh.write("# node_id x y phi n_e n_h Ex Ey\n")
        nid = 0
        for k in range(d.K):
            for j in range(d.Np):
                x = d.x[k, j, 0]
                y = d.x[k, j, 1] if dim == 2 else 0.0
                fh.write(f"{nid} {x:.17g} {y:.17g} {sol.phi[k, j]:.17g} "
                         f"{n_e[k, j]:.17g} {n_h[k, j]:.17g} "
                         f"{ex[k, j]:.17g} {ey[k, j]:.17g}\n")
                nid += 1


def load_checkpoint(path, problem):
    """Read a checkpoint and validate it against the problem's mesh hash."""
    d = problem.pdisc
    with open(path) as fh:
        lines = fh.readlines()
    hash_line = [ln for ln in lines if ln.startswith("# mesh_hash")]
    if not hash_line:
        raise PhysicsError("checkpoint missing its mesh hash header")
    mesh_hash = hash_line[0].split()[2]
    if mesh_hash != problem.mesh.content_hash():
        raise PhysicsError("checkpoint mesh hash does not match the mesh "
                           f"({mesh_hash} != {problem.mesh.content_hash()})")
    data = np.array([[float(v) for v in ln.split()]
                     for ln in lines if not ln.startswith("#")])
    if data.shape[0] != d.K * d.Np:
        raise PhysicsError("checkpoint node count does not match discretization")
    dim = d.ref.dim
    phi = data[:, 3].reshape(d.K, d.Np)
    n_e_full = data[:, 4].reshape(d.K, d.Np)
    n_h_full = data[:, 5].reshape(d.K, d.Np)
    ex = data[:, 6].reshape(d.K, d.Np)
    ey = data[:, 7].reshape(d.K, d.Np)
    e_s = (ex, ey) if dim == 2 else (ex,)
    n_e = n_e_full[problem.semi_in_p]
    n_h = n_h_full[problem.semi_in_p]
    zd = tuple(np.zeros_like(n_e) for _ in range(dim))
    return StationarySolution(phi=phi, e_s=e_s, n_e=n_e, n_h=n_h,
                              j_e=zd, j_h=zd, converged=True,
                              mesh_hash=mesh_hash)
