"""Grid rounding, increment spaces, node construction, classification, regions."""

import math

import numpy as np
import pytest

from tapbound.covariance import CovarianceSeries
from tapbound.cover import (
    CoverBuilder,
    IncrementIndex,
    cover_cardinality_bound,
    enumerate_increments,
    grid,
    level_cardinality_bound,
    max_levels,
    membership,
    round_down,
    round_down_index,
    thin_projection,
)
from tapbound.entropy import ising_uniform, sphere_uniform
from tapbound.errors import DomainError
from tapbound.geometry import inner, inner_many, norm, normalize
from tapbound.hamiltonian import MixedModel, field_linear, gradient, sample_disorder

XI2 = CovarianceSeries((0.0, 0.0, 1.0))


def make_builder(n=12, seed=3, measure=None, epsilon=0.05, delta=0.1, h=0.3):
    model = MixedModel(n, XI2)
    d = sample_disorder(model, seed)
    E = measure if measure is not None else ising_uniform(n)
    return CoverBuilder(d, E, field_linear(h, n), epsilon, delta)


class TestRounding:
    def test_zero(self):
        assert round_down(0.0, 0.1) == 0.0

    def test_positive_interior(self):
        assert round_down(0.35, 0.1) == pytest.approx(0.3)

    def test_negative_interior(self):
        assert round_down(-0.35, 0.1) == pytest.approx(-0.3)

    def test_grid_point_rounds_strictly_down(self):
        # 0.3 lies in (0.2, 0.3], so it maps to 0.2
        assert round_down(0.3, 0.1) == pytest.approx(0.2)
        assert round_down(-0.3, 0.1) == pytest.approx(-0.2)

    def test_distance_and_magnitude_properties(self):
        rng = np.random.default_rng(0)
        for _ in range(2000):
            eps = rng.uniform(0.01, 0.5)
            x = rng.uniform(-2, 2)
            y = round_down(x, eps)
            assert abs(x - y) <= eps + 1e-12
            assert abs(y) <= abs(x) + 1e-12
            if x != 0.0:
                assert abs(y) < abs(x) + 1e-12

    def test_index_value_consistency(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            eps = rng.uniform(0.01, 0.3)
            x = rng.uniform(-1, 1)
            assert round_down(x, eps) == round_down_index(x, eps) * eps

    def test_dust_above_zero_rounds_to_zero(self):
        # projections of exactly-orthogonal vectors carry O(1e-17) dust and
        # must land on 0, not jump to the first grid point of either sign
        for x in (1e-17, -1e-17, 4.9e-11, -4.9e-11):
            assert round_down_index(x, 0.1) == 0

    def test_grid_exact_inputs_round_strictly_toward_zero(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            eps = rng.uniform(0.01, 0.3)
            t = int(rng.integers(-20, 21))
            x = t * eps
            got = round_down_index(x, eps)
            expect = 0 if t == 0 else (t - 1 if t > 0 else t + 1)
            assert got == expect


class TestGrid:
    def test_half(self):
        assert np.allclose(grid(0.5), [-0.5, 0.0, 0.5])

    def test_unit(self):
        assert np.allclose(grid(1.0), [0.0])

    def test_quarter(self):
        g = grid(0.25)
        assert len(g) == 7 and np.allclose(g, np.arange(-3, 4) * 0.25)

    def test_cardinality_bound(self):
        # the 2/eps bound is exact when 1/eps is an integer; one extra point
        # can appear otherwise (the grid is symmetric with an odd count)
        for eps in (0.05, 0.1, 0.25, 0.5):
            assert len(grid(eps)) <= 2.0 / eps
        for eps in (0.03, 0.33, 0.7):
            assert len(grid(eps)) <= 2.0 / eps + 1


class TestIncrementSpace:
    def test_block_shapes_enforced(self):
        with pytest.raises(DomainError):
            IncrementIndex(((1,), (1, 2, 3)), 0.1)

    def test_norm_constraint(self):
        with pytest.raises(DomainError):
            IncrementIndex(((9,), (4, 4)), 0.1)  # 0.81 + 0.32 >= 1

    def test_enumeration_k1_all_of_grid_squared(self):
        # K=2, eps=0.5: all 9 pairs have |alpha|^2 <= 0.5 < 1
        found = enumerate_increments(0.5, K=2, k=1)
        assert len(found) == 9
        assert len(found) <= level_cardinality_bound(0.5, 2, 1) == 16

    def test_enumeration_respects_level_bound(self):
        for k in (1, 2, 3):
            found = enumerate_increments(0.5, K=1, k=k)
            assert len(found) <= level_cardinality_bound(0.5, 1, k)

    def test_cover_bound_plug_in(self):
        bound, saturated = cover_cardinality_bound(0.5, 1.0, K=1)
        assert not saturated and bound == 4 ** 11

    def test_cover_bound_saturates(self):
        bound, saturated = cover_cardinality_bound(0.01, 0.1, K=1)
        assert saturated and bound == 1 << 62


class TestBuildNode:
    def test_level_one_magnetization(self):
        b = make_builder()
        alpha = IncrementIndex(((6,),), 0.05)
        node = b.build(alpha)
        assert np.allclose(node.m, 0.3 * b.field.basis[0])
        assert node.q == pytest.approx(0.09, abs=1e-15)

    def test_zero_alpha(self):
        b = make_builder()
        node = b.build(IncrementIndex(((0,),), 0.05))
        assert np.allclose(node.m, 0.0) and node.q == 0.0

    def test_invariant_suite_random_alpha(self):
        rng = np.random.default_rng(5)
        b = make_builder()
        for _ in range(10):
            t1 = int(rng.integers(-10, 11))
            t2 = (int(rng.integers(-6, 7)), int(rng.integers(-6, 7)))
            alpha = IncrementIndex(((t1,), t2), 0.05)
            node = b.build(alpha)
            rows = node.basis_rows
            gram = rows @ rows.T / b.n
            assert np.abs(gram - np.eye(len(rows))).max() < 1e-10
            # m_alpha = sum of increments along the basis rows
            recon = sum(v * u for blk, lv in zip(node.alpha.values, node.levels)
                        for v, u in zip(blk, lv))
            assert np.allclose(recon, node.m, atol=1e-12)
            assert abs(node.q - inner(node.m, node.m)) <= 1e-12
            # gradient and hyperplane normal captured by the next level's span
            for l in range(1, alpha.k + 1):
                m_l = b.magnetization(alpha.blocks[:l])
                g = gradient(b.disorder, m_l)
                upto = np.vstack([lv for lv in node.levels[:l + 1] if len(lv)])
                resid = g - inner_many(upto, g) @ upto
                assert norm(resid) <= 1e-8 * max(1.0, norm(g))
                lam = node.lambdas[l - 1]
                resid_l = lam - inner_many(upto, lam) @ upto
                assert norm(resid_l) <= 1e-8

    def test_nesting_prefix_reproducibility(self):
        b = make_builder()
        alpha = IncrementIndex(((4,), (3, -2), (2, 1)), 0.05)
        node = b.build(alpha)
        fresh = make_builder()  # same seed: bit-identical disorder
        prefix_node = fresh.build(alpha.prefix(2))
        for lv, lv2 in zip(prefix_node.levels[:-1], node.levels):
            assert np.array_equal(np.asarray(lv), np.asarray(lv2))

    def test_classify_then_prefix_rebuild_bitwise(self):
        # rebuilding any prefix of a classified alpha reproduces the same
        # basis vectors bit for bit, even from a fresh builder
        b = make_builder(n=10, seed=9, epsilon=0.1)
        rng = np.random.default_rng(33)
        sigma = normalize(rng.standard_normal(10))
        alpha, node = b.classify(sigma, eta=0.5)
        for k in range(1, alpha.k + 1):
            fresh = make_builder(n=10, seed=9, epsilon=0.1)
            sub = fresh.build(alpha.prefix(k))
            for lv_sub, lv_full in zip(sub.levels[:-1], node.levels):
                assert np.array_equal(np.asarray(lv_sub), np.asarray(lv_full))

    def test_too_many_levels_rejected(self):
        b = make_builder(n=6)
        blocks = [(0,)] + [(1, 1)] * (max_levels(6, 1))
        with pytest.raises(DomainError):
            b.build(IncrementIndex(tuple(blocks), 0.05))


class TestClassify:
    def test_field_direction_point(self):
        # sigma = u_1 rounds to 0.9 at eps = 0.1 and stops immediately
        b = make_builder(measure=sphere_uniform(12), epsilon=0.1)
        sigma = b.field.basis[0].copy()
        alpha, node = b.classify(sigma, eta=0.4)
        assert alpha.k == 1 and alpha.values[0][0] == pytest.approx(0.9)
        check = membership(node, sigma)
        assert check.in_d and check.in_e

    def test_orthogonal_point_zero_block(self):
        b = make_builder(measure=sphere_uniform(12), epsilon=0.1, seed=8)
        rng = np.random.default_rng(11)
        v = rng.standard_normal(12)
        v -= inner(v, b.field.basis[0]) * b.field.basis[0]
        sigma = normalize(v)
        alpha, node = b.classify(sigma, eta=0.9)
        # orthogonal to the field direction: the level-1 block rounds to zero
        assert alpha.blocks[0] == (0,)

    def test_sphere_sweep_small(self):
        n, eps, eta = 10, 0.05, 0.5
        b = make_builder(n=n, measure=sphere_uniform(n), epsilon=eps)
        rng = np.random.default_rng(12)
        kmax = 0
        for _ in range(100):
            sigma = normalize(rng.standard_normal(n))
            alpha, node = b.classify(sigma, eta=eta)
            kmax = max(kmax, alpha.k)
            assert alpha.k <= 5 / eta ** 2 + 1
            assert membership(node, sigma).in_e
        assert kmax >= 1

    def test_stop_bound_all_points(self):
        b = make_builder(n=12, epsilon=0.1)
        rng = np.random.default_rng(13)
        for _ in range(30):
            sigma = normalize(rng.standard_normal(12))
            alpha, _ = b.classify(sigma, eta=0.8)
            assert alpha.k <= math.ceil(5 / 0.64)

    def test_two_dimensional_field_subspace(self):
        # K = 2: the level-1 block carries both projection coordinates
        n = 10
        basis = np.zeros((2, n))
        basis[0, 0] = basis[1, 1] = np.sqrt(n)
        from tapbound.hamiltonian import field_custom
        field = field_custom(basis, lambda t: float(t[0] + 0.5 * t[1]),
                             lipschitz_bound=2 * n)
        model = MixedModel(n, XI2)
        d = sample_disorder(model, 51)
        b = CoverBuilder(d, sphere_uniform(n), field, 0.05, 0.1)
        rng = np.random.default_rng(52)
        for _ in range(25):
            sigma = normalize(rng.standard_normal(n))
            alpha, node = b.classify(sigma, eta=0.7)
            assert len(alpha.blocks[0]) == 2
            assert membership(node, sigma).in_e

    def test_zero_disorder_degenerate_spans(self):
        # xi = 0 makes every gradient vanish; levels fall back to the
        # deterministic standard-basis completion and classification still
        # terminates with verified membership
        n = 8
        model = MixedModel(n, CovarianceSeries((0.0,)))
        d = sample_disorder(model, 53)
        b = CoverBuilder(d, ising_uniform(n), field_linear(0.2, n), 0.1, 0.2)
        atoms = (1.0 - 2.0 * ((np.arange(2 ** n)[:, None]
                               >> np.arange(n)[None, :]) & 1)).astype(np.float64)
        rng = np.random.default_rng(54)
        for idx in rng.choice(len(atoms), size=40, replace=False):
            alpha, node = b.classify(atoms[idx], eta=0.8)
            assert membership(node, atoms[idx]).in_e

    def test_membership_containment_random(self):
        b = make_builder(n=10, measure=sphere_uniform(10), epsilon=0.05)
        rng = np.random.default_rng(14)
        sigma0 = normalize(rng.standard_normal(10))
        _, node = b.classify(sigma0, eta=0.5)
        for _ in range(200):
            sigma = normalize(rng.standard_normal(10))
            chk = membership(node, sigma)
            if chk.in_e:
                assert chk.in_d


class TestRegionGeometry:
    """Thickness, effective-field, and thin-slice estimates on classified points."""

    def setup_method(self):
        self.n, self.eps, self.eta = 12, 0.05, 0.4
        self.b = make_builder(n=self.n, measure=sphere_uniform(self.n),
                              epsilon=self.eps, seed=21)
        self.rng = np.random.default_rng(15)

    def test_geometry_bounds_on_sweep(self):
        for _ in range(60):
            sigma = normalize(self.rng.standard_normal(self.n))
            alpha, node = self.b.classify(sigma, self.eta)
            sigma_hat = sigma - node.m
            rows = node.basis_rows
            proj_u = inner_many(rows, sigma_hat) @ rows
            # thickness: || P_Ubar sigma - m || <= 4 eta
            assert norm(proj_u) <= 4 * self.eta + 1e-9
            # effective field nearly vanishes on the region
            heff = gradient(self.b.disorder, node.m)
            assert abs(inner(sigma_hat, heff)) <= 4 * self.eta * norm(heff) + 1e-9
            # radius control and thin projection distance
            resid = node.project_out(sigma)
            assert abs(norm(resid) - math.sqrt(1 - node.q)) <= 8 * self.eta ** 0.25 + 1e-9
            tau = thin_projection(node, sigma)
            assert norm(sigma_hat - tau) <= 12 * self.eta ** 0.25 + 1e-9

    def test_thin_projection_shell_and_convention(self):
        sigma = normalize(self.rng.standard_normal(self.n))
        alpha, node = self.b.classify(sigma, self.eta)
        tau = thin_projection(node, sigma)
        assert inner(tau, tau) == pytest.approx(1 - node.q, abs=1e-10)
        # projection of something inside span(Ubar) collapses to zero
        tau0 = thin_projection(node, node.m if node.q > 0 else node.basis_rows[0])
        assert np.allclose(tau0, 0.0)

    def test_thin_projection_identity_on_slice(self):
        sigma = normalize(self.rng.standard_normal(self.n))
        _, node = self.b.classify(sigma, self.eta)
        resid = normalize(node.project_out(sigma)) * math.sqrt(1 - node.q)
        point = node.m + resid
        tau = thin_projection(node, point)
        assert np.allclose(tau, point - node.m, atol=1e-9)


class TestNodeSerialization:
    def test_json_roundtrip_fields(self):
        import json
        b = make_builder()
        node = b.build(IncrementIndex(((4,), (2, -1)), 0.05), eta=0.4)
        payload = json.loads(node.to_json())
        assert payload["alpha"] == [[4], [2, -1]]
        assert payload["q_alpha"] == pytest.approx(node.q)
        assert len(payload["m_alpha"]) == 12
        shapes = payload["level_shapes"]
        assert shapes[0] == [1, 12]
