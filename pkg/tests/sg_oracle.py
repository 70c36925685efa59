"""Independent 1D Scharfetter-Gummel finite-difference reference solver.

Plain vertex-centered finite differences with Bernoulli-weighted exponential
fluxes, written without any package imports so it can cross-check the LDG
stationary solver.  Units are SI throughout.
"""

import numpy as np

Q = 1.602176634e-19
KB = 1.380649e-23
EPS0 = 8.8541878128e-12


def bernoulli(x):
    """B(x) = x / (e^x - 1), stable through x = 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-8
    out[small] = 1.0 - 0.5 * x[small]
    xs = x[~small]
    out[~small] = xs / np.expm1(xs)
    return out


def _ct_mobility(mu0, vsat, beta, e_mag):
    return mu0 / (1.0 + (mu0 * e_mag / vsat) ** beta) ** (1.0 / beta)


def _neutral(c, n_i):
    root = np.sqrt(c * c + 4.0 * n_i ** 2)
    with np.errstate(divide="ignore"):
        n_e = np.where(c >= 0, (c + root) / 2.0, 2.0 * n_i ** 2 / (root - c))
    return n_e, n_i ** 2 / n_e


class SGProblem:
    """1D device on nodes x with per-node doping; ohmic Dirichlet contacts."""

    def __init__(self, x, doping, p):
        self.x = np.asarray(x, dtype=float)
        self.n = len(x)
        self.h = np.diff(self.x)
        self.c = np.broadcast_to(np.asarray(doping, dtype=float), (self.n,))
        self.p = p                       # parameter dict
        self.v_t = KB * p["temperature"] / Q
        self.eps = p["eps_r"] * EPS0
        self.ne_c, self.nh_c = _neutral(self.c, p["n_i"])

    def _poisson_newton(self, phi, n, pp, v_left, v_right, max_iter=50):
        v_t = self.v_t
        h = self.h
        N = self.n
        bi_l = v_t * np.log(self.ne_c[0] / self.p["n_i"])
        bi_r = v_t * np.log(self.ne_c[-1] / self.p["n_i"])
        phi = phi.copy()
        phi[0] = v_left + bi_l
        phi[-1] = v_right + bi_r
        n, pp = n.copy(), pp.copy()
        for _ in range(max_iter):
            lap = np.zeros(N)
            lap[1:-1] = self.eps * ((phi[2:] - phi[1:-1]) / h[1:]
                                    - (phi[1:-1] - phi[:-2]) / h[:-1]) \
                / (0.5 * (h[1:] + h[:-1]))
            rho = Q * (pp - n + self.c)
            f = lap + rho
            f[0] = f[-1] = 0.0
            # tridiagonal Newton system
            hm = 0.5 * (h[1:] + h[:-1])
            main = np.ones(N)
            lower = np.zeros(N - 1)
            upper = np.zeros(N - 1)
            main[1:-1] = -self.eps * (1.0 / h[1:] + 1.0 / h[:-1]) / hm \
                - Q * (n[1:-1] + pp[1:-1]) / v_t
            lower[:-1] = self.eps / (h[:-1] * hm)
            upper[1:] = self.eps / (h[1:] * hm)
            a = np.zeros((3, N))
            a[0, 1:] = upper
            a[1] = main
            a[2, :-1] = lower
            from scipy.linalg import solve_banded
            dphi = solve_banded((1, 1), a, -f)
            dphi = np.clip(dphi, -5 * v_t, 5 * v_t)
            phi += dphi
            upd = dphi / v_t
            n *= np.exp(np.clip(upd, -40, 40))
            pp *= np.exp(np.clip(-upd, -40, 40))
            if np.max(np.abs(dphi)) / v_t < 1e-10:
                break
        return phi, n, pp

    def _edge_diffusivity(self, phi, carrier):
        e_edge = -(np.diff(phi)) / self.h
        pm = self.p
        if carrier == "e":
            mu = _ct_mobility(pm["mu_e0"], pm["v_sat_e"], pm["beta_e"],
                              np.abs(e_edge))
        else:
            mu = _ct_mobility(pm["mu_h0"], pm["v_sat_h"], pm["beta_h"],
                              np.abs(e_edge))
        return self.v_t * mu, mu

    def _continuity(self, phi, carrier, n_self, n_other):
        """Linear SG solve with lagged opposite carrier in the SRH term."""
        N = self.n
        h = self.h
        v_t = self.v_t
        pm = self.p
        d_edge, _ = self._edge_diffusivity(phi, carrier)
        delta = np.diff(phi) / v_t
        bp, bm = bernoulli(delta), bernoulli(-delta)
        den = pm["tau_e"] * (pm["n_h1"] + (n_other if carrier == "e" else n_self)) \
            + pm["tau_h"] * (pm["n_e1"] + (n_self if carrier == "e" else n_other))
        hm = 0.5 * (h[1:] + h[:-1])
        # particle flux F_{i+1/2}; electrons: F = -(D/h)(B(d) n_{i+1} - B(-d) n_i)
        # holes:     F = -(D/h)(B(-d) n_{i+1} - B(d) n_i)
        if carrier == "e":
            cu, cl = bp, bm          # coefficient of n_{i+1}, n_i in (D/h)(..)
        else:
            cu, cl = bm, bp
        a = np.zeros((3, N))
        rhs = np.zeros(N)
        # interior: (F_{i+1/2} - F_{i-1/2})/hm + R_i = 0
        fu = d_edge / h              # per-edge factor
        a[0, 2:] = -(fu[1:] * cu[1:]) / hm                    # n_{i+1}
        a[1, 1:-1] = (fu[1:] * cl[1:] + fu[:-1] * cu[:-1]) / hm \
            + n_other[1:-1] / den[1:-1]
        a[2, :-2] = -(fu[:-1] * cl[:-1]) / hm                 # n_{i-1}
        rhs[1:-1] = pm["n_i"] ** 2 / den[1:-1]
        a[1, 0] = a[1, -1] = 1.0
        ne_c, nh_c = self.ne_c, self.nh_c
        rhs[0] = ne_c[0] if carrier == "e" else nh_c[0]
        rhs[-1] = ne_c[-1] if carrier == "e" else nh_c[-1]
        from scipy.linalg import solve_banded
        return solve_banded((1, 1), a, rhs)

    def solve(self, v_left, v_right, tol=1e-8, max_iter=500, ramp_step=None):
        v_t = self.v_t
        if ramp_step is None:
            ramp_step = 10.0 * v_t
        n, pp = self.ne_c.copy(), self.nh_c.copy()
        phi = v_t * np.log(n / self.p["n_i"])
        v_max = max(abs(v_left), abs(v_right))
        stages = max(1, int(np.ceil(v_max / ramp_step)))
        for st in range(1, stages + 1):
            sc = st / stages
            for it in range(max_iter):
                phi_old = phi
                phi, nb, pb = self._poisson_newton(phi, n, pp,
                                                   sc * v_left, sc * v_right)
                n = np.maximum(self._continuity(phi, "e", nb, pb), 0.0)
                pp = np.maximum(self._continuity(phi, "h", pp, n), 0.0)
                if np.max(np.abs(phi - phi_old)) / v_t < tol:
                    break
            else:
                raise RuntimeError("SG oracle did not converge")
        return {"phi": phi, "n_e": n, "n_h": pp,
                "current": self.terminal_current(phi, n, pp)}

    def terminal_current(self, phi, n, pp):
        """Charge current density at the left edge (should be x-independent)."""
        v_t = self.v_t
        d_e, _ = self._edge_diffusivity(phi, "e")
        d_h, _ = self._edge_diffusivity(phi, "h")
        delta = np.diff(phi) / v_t
        bp, bm = bernoulli(delta), bernoulli(-delta)
        j_e = Q * d_e / self.h * (bp * n[1:] - bm * n[:-1])
        j_h = -Q * d_h / self.h * (bm * pp[1:] - bp * pp[:-1])
        return (j_e + j_h)[0]


def lt_gaas_params(doping=1.3e22):
    return {
        "temperature": 300.0, "eps_r": 13.26, "n_i": 9e12,
        "tau_e": 0.3e-12, "tau_h": 0.4e-12, "n_e1": 4.5e12, "n_h1": 4.5e12,
        "mu_e0": 0.8, "mu_h0": 0.04, "v_sat_e": 1.725e5, "v_sat_h": 0.9e5,
        "beta_e": 1.82, "beta_h": 1.75, "doping": doping,
    }
