import numpy as np
import pytest

from pcddg.refelem import (
    ConfigurationError,
    ReferenceElement,
    build_reference_element,
    element_geometry,
    elemental_mass_matrix,
    elemental_stiffness_and_face,
    gauss_lobatto_nodes,
    grad_jacobi_p,
    jacobi_p,
    ldg_gradient_divergence,
    triangle_nodes,
)


def gauss_nodes_weights(n):
    return np.polynomial.legendre.leggauss(n)


class TestJacobi:
    def test_orthonormality(self):
        x, w = gauss_nodes_weights(20)
        for i in range(6):
            for j in range(6):
                val = np.sum(w * jacobi_p(x, 0, 0, i) * jacobi_p(x, 0, 0, j))
                assert val == pytest.approx(1.0 if i == j else 0.0, abs=1e-12)

    def test_weighted_orthonormality(self):
        x, w = gauss_nodes_weights(30)
        wt = (1 - x) ** 2
        for i in range(5):
            for j in range(5):
                val = np.sum(w * wt * jacobi_p(x, 2, 0, i) * jacobi_p(x, 2, 0, j))
                assert val == pytest.approx(1.0 if i == j else 0.0, abs=1e-11)

    def test_gradient(self):
        x = np.linspace(-0.95, 0.95, 7)
        eps = 1e-6
        for n in range(1, 6):
            fd = (jacobi_p(x + eps, 0, 0, n) - jacobi_p(x - eps, 0, 0, n)) / (2 * eps)
            assert np.allclose(grad_jacobi_p(x, 0, 0, n), fd, atol=1e-6)


class TestNodes:
    def test_gauss_lobatto_p2(self):
        assert np.allclose(gauss_lobatto_nodes(2), [-1.0, 0.0, 1.0])

    def test_gauss_lobatto_p4(self):
        r = gauss_lobatto_nodes(4)
        ref = np.sqrt(3.0 / 7.0)
        assert np.allclose(r, [-1.0, -ref, 0.0, ref, 1.0], atol=1e-12)

    @pytest.mark.parametrize("p", [1, 2, 3, 4, 5, 6])
    def test_triangle_node_count_and_symmetry(self, p):
        rs = np.stack(triangle_nodes(p), axis=1)
        assert rs.shape == ((p + 1) * (p + 2) // 2, 2)
        # vertices present
        for v in ([-1, -1], [1, -1], [-1, 1]):
            assert np.min(np.sum((rs - v) ** 2, axis=1)) < 1e-20
        # symmetric under swapping r <-> s
        sw = rs[:, ::-1]
        for q in sw:
            assert np.min(np.sum((rs - q) ** 2, axis=1)) < 1e-16


class TestOperators1D:
    def test_analytic_p1_matrices(self):
        ref = build_reference_element(1, 1)
        geom = element_geometry(ref, np.array([[0.0], [1.0]]))
        m = elemental_mass_matrix(ref, geom)
        assert np.allclose(m, np.array([[2, 1], [1, 2]]) / 6.0)
        d = ref.diff[0] * geom.metric[0, 0]
        assert np.allclose(d, [[-1, 1], [-1, 1]])

    @pytest.mark.parametrize("p", [1, 2, 3, 4, 5, 6])
    def test_differentiation_exact(self, p):
        ref = build_reference_element(1, p)
        r = ref.nodes[:, 0]
        assert np.allclose(ref.diff[0] @ r ** p, p * r ** (p - 1), atol=1e-10)

    @pytest.mark.parametrize("p", [1, 3, 5])
    def test_mass_integrates_polynomials(self, p):
        ref = build_reference_element(1, p)
        w = ref.mass_ref.sum(axis=0)
        r = ref.nodes[:, 0]
        for q in range(p + 1):
            exact = (1 - (-1) ** (q + 1)) / (q + 1)
            assert np.sum(w * r ** q) == pytest.approx(exact, abs=1e-12)

    def test_lift_is_inverse_mass_times_face(self):
        ref = build_reference_element(1, 3)
        e = np.zeros((ref.Np, 2))
        e[0, 0] = 1.0
        e[-1, 1] = 1.0
        assert np.allclose(ref.lift_ref, np.linalg.solve(ref.mass_ref, e))


class TestOperators2D:
    @pytest.mark.parametrize("p", [1, 2, 3, 4, 5, 6])
    def test_differentiation_exact(self, p):
        ref = build_reference_element(2, p)
        r, s = ref.nodes[:, 0], ref.nodes[:, 1]
        for i in range(p + 1):
            for j in range(p + 1 - i):
                u = r ** i * s ** j
                dr = (i * r ** (i - 1) * s ** j) if i else np.zeros_like(r)
                ds = (j * r ** i * s ** (j - 1)) if j else np.zeros_like(r)
                assert np.allclose(ref.diff[0] @ u, dr, atol=1e-9)
                assert np.allclose(ref.diff[1] @ u, ds, atol=1e-9)

    @pytest.mark.parametrize("p", [1, 2, 4])
    def test_mass_integrates_constants(self, p):
        ref = build_reference_element(2, p)
        # reference triangle area is 2
        assert ref.mass_ref.sum() == pytest.approx(2.0, abs=1e-12)

    def test_mass_integrates_monomials(self):
        ref = build_reference_element(2, 4)
        w = ref.mass_ref.sum(axis=0)
        r, s = ref.nodes[:, 0], ref.nodes[:, 1]
        # exact integrals over the reference triangle
        assert np.sum(w * r) == pytest.approx(-2.0 / 3.0, abs=1e-12)
        assert np.sum(w * r * s) == pytest.approx(0.0, abs=1e-12)
        assert np.sum(w * r ** 2) == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_face_nodes_lie_on_faces(self):
        ref = build_reference_element(2, 4)
        r, s = ref.nodes[:, 0], ref.nodes[:, 1]
        assert np.allclose(s[ref.face_nodes[0]], -1)
        assert np.allclose(r[ref.face_nodes[1]] + s[ref.face_nodes[1]], 0)
        assert np.allclose(r[ref.face_nodes[2]], -1)

    def test_lift_constant_flux(self):
        # M^-1 B 1 integrates to total surface length of the element
        ref = build_reference_element(2, 3)
        geom = element_geometry(ref, np.array([[0.0, 0], [1, 0], [0, 1]]))
        m = elemental_mass_matrix(ref, geom)
        flux = np.concatenate([np.full(ref.Nfp, geom.sjac[f] / geom.jac)
                               for f in range(3)])
        lifted = ref.lift_ref @ flux
        assert np.ones(ref.Np) @ m @ lifted == pytest.approx(2 + np.sqrt(2), abs=1e-10)


class TestGeometry:
    def test_triangle_normals_outward_unit(self):
        ref = build_reference_element(2, 2)
        geom = element_geometry(ref, np.array([[0.0, 0], [2, 0], [0, 1]]))
        c = np.array([2.0 / 3, 1.0 / 3])
        mids = np.array([[1, 0], [1, 0.5], [0, 0.5]])
        for f in range(3):
            n = geom.normals[f]
            assert np.hypot(*n) == pytest.approx(1.0)
            assert np.dot(n, mids[f] - c) > 0
        assert geom.volume == pytest.approx(1.0)

    def test_1d_geometry(self):
        ref = build_reference_element(1, 2)
        geom = element_geometry(ref, np.array([[1.0], [3.0]]))
        assert geom.jac == pytest.approx(1.0)
        assert geom.metric[0, 0] == pytest.approx(1.0)
        assert geom.volume == pytest.approx(2.0)


class TestLDGOperators:
    @pytest.mark.parametrize("dim,p", [(1, 2), (1, 4), (2, 2), (2, 3)])
    def test_divergence_is_negative_adjoint(self, dim, p):
        ref = build_reference_element(dim, p)
        if dim == 1:
            verts = np.array([[0.2], [0.9]])
        else:
            verts = np.array([[0.1, 0.0], [1.2, 0.3], [0.4, 1.1]])
        geom = element_geometry(ref, verts)
        signs = np.ones(ref.Nfaces)
        ops = ldg_gradient_divergence(ref, geom, signs)
        assert np.allclose(ops["div_ldg"], -ops["grad_ldg"].T, atol=1e-14)
        for f in range(ref.Nfaces):
            assert np.allclose(ops["div_neighbor"][f],
                               -ops["grad_neighbor"][f].T, atol=1e-14)
        # flipping every face sign moves all surface coupling to the neighbor
        flipped = ldg_gradient_divergence(ref, geom, -signs)
        stiff = elemental_stiffness_and_face(ref, geom)["stiffness"]
        for nu in range(dim):
            blk = slice(nu * ref.Np, (nu + 1) * ref.Np)
            assert np.allclose(flipped["grad_ldg"][blk], -stiff[nu].T, atol=1e-14)

    def test_stiffness_integration_by_parts(self):
        # S + S^T equals the boundary mass term: exact DG summation identity
        ref = build_reference_element(2, 3)
        geom = element_geometry(ref, np.array([[0.0, 0], [1, 0], [0.3, 0.8]]))
        ops = elemental_stiffness_and_face(ref, geom)
        stiff, fmass = ops["stiffness"], ops["face_mass"]
        for nu in range(2):
            bnd = np.zeros((ref.Np, ref.Np))
            for f in range(3):
                idx = np.asarray(ref.face_nodes[f])
                bnd[np.ix_(idx, idx)] += geom.normals[f, nu] * fmass[f]
            assert np.allclose(stiff[nu] + stiff[nu].T, bnd, atol=1e-12)


def test_bad_order_raises():
    with pytest.raises(ConfigurationError):
        build_reference_element(1, 0)
    with pytest.raises(ConfigurationError):
        build_reference_element(2, 7)
    with pytest.raises(ConfigurationError):
        build_reference_element(3, 2)
