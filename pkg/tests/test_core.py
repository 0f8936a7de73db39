"""Core substrate: configurations, incidence, assembly, spectra, verification."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import stresslab as sl


def square_config():
    return sl.Configuration(np.array([[0.0, 1.0, 1.0, 0.0],
                                      [0.0, 0.0, 1.0, 1.0]]))


def triangle_centroid_config():
    """Equilateral triangle plus its centroid (node 3)."""
    theta = 2 * np.pi * np.arange(3) / 3
    tri = np.vstack([np.cos(theta), np.sin(theta)])
    return sl.Configuration(np.hstack([tri, np.zeros((2, 1))]))


def triangle_centroid_stress():
    """Unit spokes, -1/3 outer edges: a classic equilibrium stress."""
    config = triangle_centroid_config()
    w = np.zeros(6)
    for i, j in ((0, 3), (1, 3), (2, 3)):
        w[sl.edge_index(i, j, 4)] = 1.0
    for i, j in ((0, 1), (0, 2), (1, 2)):
        w[sl.edge_index(i, j, 4)] = -1.0 / 3.0
    return config, sl.StressVector(4, w)


class TestConfiguration:
    def test_augment_square(self):
        aug = sl.augment(square_config())
        assert aug.shape == (3, 4)
        assert np.array_equal(aug[2], np.ones(4))
        assert np.array_equal(aug[:2], square_config().coords)

    def test_rank_bounded_by_rows(self):
        rng = np.random.default_rng(0)
        for n in (5, 9, 20):
            cfg = sl.Configuration(rng.random((2, n)))
            assert np.linalg.matrix_rank(sl.augment(cfg)) <= 3

    def test_collinear_rank(self):
        cfg = sl.Configuration(np.array([[0.0, 1.0, 2.0], [0.0, 1.0, 2.0]]))
        assert np.linalg.matrix_rank(sl.augment(cfg)) == 2
        assert not cfg.is_design_valid

    def test_too_few_nodes(self):
        with pytest.raises(ValueError):
            sl.Configuration(np.zeros((2, 2)))

    def test_nonfinite_rejected(self):
        coords = np.zeros((2, 4))
        coords[0, 0] = np.inf
        with pytest.raises(ValueError):
            sl.Configuration(coords)

    def test_json_roundtrip(self):
        cfg = sl.Configuration(np.random.default_rng(3).random((3, 6)),
                               labels=tuple("abcdef"))
        back = sl.Configuration.from_json(cfg.to_json())
        assert np.array_equal(back.coords, cfg.coords)
        assert back.labels == cfg.labels


class TestIncidence:
    def test_k3_columns(self):
        b = sl.complete_incidence(3)
        assert b.shape == (3, 3)
        # columns for (0,1), (0,2), (1,2)
        assert np.array_equal(b[:, 0], [1, -1, 0])
        assert np.array_equal(b[:, 1], [1, 0, -1])
        assert np.array_equal(b[:, 2], [0, 1, -1])

    def test_n60_shape(self):
        assert sl.complete_incidence(60).shape == (60, 1770)

    def test_columns_sum_zero(self):
        assert np.array_equal(sl.complete_incidence(7).sum(axis=0), np.zeros(21))

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            sl.complete_incidence(1)

    @given(st.integers(2, 12), st.data())
    @settings(max_examples=50, deadline=None)
    def test_edge_index_bijection(self, n, data):
        edges = sl.edge_list(n)
        k = data.draw(st.integers(0, len(edges) - 1))
        i, j = edges[k]
        assert sl.edge_index(i, j, n) == k
        assert sl.edge_index(j, i, n) == k  # unordered


class TestAssembly:
    def test_unit_weights_give_laplacian(self):
        omega = sl.assemble_stress(sl.complete_incidence(3), np.ones(3))
        assert np.allclose(omega, [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]])

    def test_zero_weights(self):
        assert np.array_equal(
            sl.assemble_stress(sl.complete_incidence(4), np.zeros(6)), np.zeros((4, 4)))

    def test_triangle_centroid_equilibrium(self):
        config, w = triangle_centroid_stress()
        omega = sl.assemble_stress(sl.complete_incidence(4), w)
        assert np.linalg.norm(omega @ sl.augment(config).T) < 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            sl.assemble_stress(sl.complete_incidence(4), np.ones(5))

    def test_row_sums_machine_zero(self):
        rng = np.random.default_rng(7)
        for n in (4, 9, 30):
            w = rng.standard_normal(sl.edge_count(n))
            omega = sl.assemble_stress(sl.complete_incidence(n), w)
            assert np.abs(omega @ np.ones(n)).max() < 1e-12 * max(np.abs(w).max(), 1)
            assert np.array_equal(omega, omega.T)

    def test_stress_from_topology_matches(self):
        topo = sl.Topology(4, ((0, 1), (1, 2), (2, 3)))
        omega = sl.stress_from_topology(topo, [1.0, 2.0, -0.5])
        full = np.zeros(6)
        full[sl.edge_index(0, 1, 4)] = 1.0
        full[sl.edge_index(1, 2, 4)] = 2.0
        full[sl.edge_index(2, 3, 4)] = -0.5
        assert np.allclose(omega, sl.assemble_stress(sl.complete_incidence(4), full))


class TestKernelBasis:
    def test_dimension_count(self):
        cfg = sl.Configuration(np.random.default_rng(0).random((2, 4)))
        q = sl.kernel_basis(sl.augment(cfg))
        assert q.shape == (4, 1)
        assert abs(np.linalg.norm(q[:, 0]) - 1) < 1e-12

    def test_residual_random_50(self):
        cfg = sl.Configuration(np.random.default_rng(1).random((2, 50)))
        aug = sl.augment(cfg)
        q = sl.kernel_basis(aug)
        assert np.linalg.norm(aug @ q) < 1e-10
        assert np.linalg.norm(q.T @ q - np.eye(47)) < 1e-12

    def test_degenerate_rejected(self):
        coords = np.vstack([np.arange(5.0), np.arange(5.0)])
        with pytest.raises(sl.DegenerateConfigurationError):
            sl.kernel_basis(sl.augment(sl.Configuration(coords)))


class TestSpectralReport:
    def test_zero_matrix(self):
        rep = sl.spectral_report(np.zeros((5, 5)), dim=2)
        assert rep.lambda_d2 == 0.0
        assert rep.numeric_rank == 0
        assert rep.psd
        assert np.isinf(rep.cond)

    def test_k3_laplacian_d1(self):
        omega = sl.assemble_stress(sl.complete_incidence(3), np.ones(3))
        rep = sl.spectral_report(omega, dim=1)
        assert np.allclose(rep.eigenvalues, [0.0, 3.0, 3.0], atol=1e-12)
        assert abs(rep.lambda_d2 - 3.0) < 1e-12  # lambda_{D+2} = lambda_3
        assert rep.numeric_rank == 2

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            sl.spectral_report(np.array([[0.0, 1.0], [0.0, 0.0]]), dim=1)

    def test_characteristic_polynomial_roots(self):
        # hand-checkable cases: eigenvalues must equal char-poly roots
        k3 = sl.assemble_stress(sl.complete_incidence(3), np.ones(3))
        config, w = triangle_centroid_stress()
        tc = sl.assemble_stress(sl.complete_incidence(4), w)
        cases = [
            (k3, [1.0, -6.0, 9.0, 0.0]),           # det(tI - K3) = t^3 - 6t^2 + 9t
            (tc, [1.0, -4.0, 0.0, 0.0, 0.0]),      # rank 1, trace 4: t^4 - 4 t^3
            (np.diag([1.0, 2.0, 3.0]), [1.0, -6.0, 11.0, -6.0]),
            (np.diag([2.0, 2.0]), [1.0, -4.0, 4.0]),
        ]
        for omega, coeffs in cases:
            rep = sl.spectral_report(omega, dim=1)
            roots = np.sort(np.real(np.roots(coeffs)))
            assert np.allclose(rep.eigenvalues, roots, atol=1e-8)

    def test_trace_equals_eigenvalue_sum(self):
        rng = np.random.default_rng(5)
        w = rng.standard_normal(sl.edge_count(8))
        omega = sl.assemble_stress(sl.complete_incidence(8), w)
        rep = sl.spectral_report(omega, dim=2)
        assert abs(np.trace(omega) - rep.eigenvalues.sum()) <= 1e-8 * max(
            abs(np.trace(omega)), 1.0)


class TestVerify:
    def test_triangle_centroid_verifies(self):
        config, w = triangle_centroid_stress()
        omega = sl.assemble_stress(sl.complete_incidence(4), w)
        rep = sl.verify_stabilizable(omega, config)
        assert rep.overall
        assert rep.numeric_rank == 1 == rep.expected_rank

    def test_unweighted_laplacian_fails_equilibrium(self):
        rng = np.random.default_rng(11)
        config = sl.Configuration(rng.random((2, 4)))
        omega = sl.assemble_stress(sl.complete_incidence(4), np.ones(6))
        rep = sl.verify_stabilizable(omega, config)
        assert not rep.equilibrium_ok
        assert not rep.overall

    def test_dimension_mismatch(self):
        config, w = triangle_centroid_stress()
        with pytest.raises(ValueError):
            sl.verify_stabilizable(np.zeros((5, 5)), config)

    def test_invariant_under_relabeling(self):
        """Similarity transform preserves the verification verdict."""
        config, w = triangle_centroid_stress()
        omega = sl.assemble_stress(sl.complete_incidence(4), w)
        perm = [2, 0, 3, 1]
        config_p = sl.permute_configuration(config, perm)
        # node i of config_p is node perm[i] of config: stress entries follow
        inv = np.argsort(perm)
        sigma = sl.edge_permutation(inv, 4)
        omega_p = sl.assemble_stress(sl.complete_incidence(4), w.values[sigma])
        rep = sl.verify_stabilizable(omega, config)
        rep_p = sl.verify_stabilizable(omega_p, config_p)
        assert rep.overall == rep_p.overall
        assert np.allclose(rep.spectral.eigenvalues, rep_p.spectral.eigenvalues,
                           atol=1e-12)

    @given(st.permutations(list(range(6))))
    @settings(max_examples=25, deadline=None)
    def test_trace_permutation_invariance(self, perm):
        rng = np.random.default_rng(2)
        omega = sl.assemble_stress(sl.complete_incidence(6),
                                   rng.standard_normal(15))
        permuted = np.empty_like(omega)
        permuted[np.ix_(perm, perm)] = omega
        assert abs(np.trace(permuted) - np.trace(omega)) < 1e-10


class TestExtraction:
    def test_threshold(self):
        w = sl.StressVector(3, np.array([1.0, 1e-12, -0.5]))
        res = sl.extract_topology(w, eps_rel=1e-6)
        assert res.m == 2
        assert res.topology.edges == ((0, 1), (1, 2))
        assert res.pruned.values[1] == 0.0

    def test_all_zero_flagged(self):
        res = sl.extract_topology(sl.StressVector(4, np.zeros(6)))
        assert res.empty
        assert res.m == 0

    def test_matrix_topology_agrees(self):
        config, w = triangle_centroid_stress()
        omega = sl.assemble_stress(sl.complete_incidence(4), w)
        assert sl.core.matrix_topology(omega).edges == \
            sl.extract_topology(w).topology.edges


class TestSpectralEfficiency:
    def test_complete_graph_equal_spectrum(self):
        # lambda_{D+2} = lambda_max on a complete graph: eta = 2N/(N-1)
        for n in (5, 9):
            omega = sl.assemble_stress(sl.complete_incidence(n), np.ones(sl.edge_count(n)))
            rep = sl.spectral_report(omega, dim=n - 2)  # all nonzero eigs equal n
            eta = sl.spectral_efficiency(rep, sl.edge_count(n), n)
            assert abs(eta - 2 * n / (n - 1)) < 1e-9

    def test_zero_lambda(self):
        omega = np.diag([0.0, 0.0, 0.0, 0.0, 1.0])
        rep = sl.spectral_report(omega, dim=2)
        assert sl.spectral_efficiency(rep, 3, 5) == 0.0

    def test_errors(self):
        rep = sl.spectral_report(np.zeros((5, 5)), dim=2)
        with pytest.raises(sl.MetricError):
            sl.spectral_efficiency(rep, 0, 5)
        with pytest.raises(sl.MetricError):
            sl.spectral_efficiency(rep, 3, 5)


class TestStressVectorCsv:
    def test_roundtrip(self):
        rng = np.random.default_rng(9)
        w = sl.StressVector(6, rng.standard_normal(15))
        back = sl.StressVector.from_csv(w.to_csv(), 6)
        assert np.array_equal(back.values, w.values)

    def test_weight_lookup(self):
        _, w = triangle_centroid_stress()
        assert w.weight(3, 0) == 1.0
        assert w.weight(1, 2) == pytest.approx(-1 / 3)


class TestTopology:
    def test_duplicate_edge_rejected(self):
        with pytest.raises(ValueError):
            sl.Topology(4, ((0, 1), (1, 0)))

    def test_self_loop_rejected(self):
        with pytest.raises(ValueError):
            sl.Topology(4, ((1, 1),))

    def test_neighbors(self):
        topo = sl.Topology(4, ((0, 1), (1, 2), (1, 3)))
        assert topo.neighbors(1) == [0, 2, 3]
        assert topo.average_degree == pytest.approx(1.5)
