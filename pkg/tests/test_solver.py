import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sheavg.errors import BlowupError, ConfigError
from sheavg.model import SigmaFamily, heat_kernel
from sheavg.solver import (FieldState, Grid, NoiseStream, TangentState,
                           noise_steps, simulate, step_explicit, step_tangent)

ZERO = SigmaFamily.constant([[0.0]])
UNIT = SigmaFamily.constant([[1.0]])
SMOOTH = SigmaFamily.bounded_smooth([[1.0]], [[0.5]], [[[1.0]]])


def small_grid(**kw):
    args = dict(T=0.05, dt=1e-3, dx=0.05, r_max=0.5, output_times=[0.05])
    args.update(kw)
    return Grid.build(**args)


class TestGrid:
    def test_stability_hard_error(self):
        with pytest.raises(ConfigError, match="stability"):
            Grid(T=1.0, nt=100, L=1.0, nx=99)

    def test_build_aligns_lattice(self):
        g = small_grid()
        assert g.L == pytest.approx(round(g.L / g.dx) * g.dx)
        assert 0.0 in np.round(g.xs / g.dx) * g.dx
        assert g.dx == pytest.approx(2 * g.L / (g.nx + 1))

    def test_time_index_requires_grid_times(self):
        g = small_grid()
        assert g.time_index(0.05) == g.nt
        with pytest.raises(ConfigError):
            g.time_index(0.0505 / 2 + 1e-5)

    def test_truncation_margin(self):
        g = small_grid()
        assert g.margin == pytest.approx(g.L - 6 * math.sqrt(2 * g.T))
        g.validate_radius(0.5)
        with pytest.raises(ConfigError, match="truncation"):
            g.validate_radius(g.margin + 1.0)

    def test_output_times_must_lie_on_grid(self):
        with pytest.raises(ConfigError):
            Grid(T=1.0, nt=10, L=5.0, nx=99, output_times=(0.05,))

    def test_padding_floor(self):
        with pytest.raises(ConfigError):
            small_grid(padding=4.0)


class TestNoiseStream:
    def test_deterministic_and_chunk_invariant(self):
        a = NoiseStream(9, 4, m=2, nx=7).normals(10)
        s = NoiseStream(9, 4, m=2, nx=7)
        b = np.concatenate([s.normals(3), s.normals(7)])
        assert np.array_equal(a, b)

    def test_distinct_replicas_differ(self):
        a = NoiseStream(9, 0, 1, 5).normals(4)
        b = NoiseStream(9, 1, 1, 5).normals(4)
        assert not np.array_equal(a, b)

    def test_rejects_negative_replica(self):
        with pytest.raises(ConfigError):
            NoiseStream(9, -1, 1, 5)


class TestStepExplicit:
    def test_zero_sigma_preserves_ones(self):
        g = small_grid()
        state = FieldState(0, np.ones((1, g.nx)))
        for _ in range(5):
            state = step_explicit(state, ZERO.build(), g, np.zeros((1, g.nx)))
        assert np.array_equal(state.values, np.ones((1, g.nx)))

    def test_one_step_noise_algebra(self):
        # from the flat state the update is exactly sqrt(dt/dx) * xi
        g = small_grid()
        xi = NoiseStream(3, 0, 1, g.nx).normals(1)[0]
        state = step_explicit(FieldState(0, np.ones((1, g.nx))), UNIT.build(), g, xi)
        assert_allclose(state.values - 1.0, math.sqrt(g.dt / g.dx) * xi,
                        rtol=1e-12, atol=1e-15)

    def test_one_step_variance(self):
        g = small_grid()
        rng_stream = [NoiseStream(11, r, 1, g.nx).normals(1)[0] for r in range(4000)]
        vals = np.stack([step_explicit(FieldState(0, np.ones((1, g.nx))),
                                       UNIT.build(), g, xi).values[0]
                         for xi in rng_stream])
        var = vals.var(axis=0).mean()
        se = math.sqrt(2.0 / 4000) * (g.dt / g.dx) / math.sqrt(g.nx)
        assert abs(var - g.dt / g.dx) < 4 * se

    def test_maximum_principle_for_heat_stencil(self):
        g = small_grid()
        rng = np.random.default_rng(12)
        state = FieldState(0, rng.uniform(-2.0, 3.0, size=(1, g.nx)))
        lo = min(float(state.values.min()), 1.0)
        hi = max(float(state.values.max()), 1.0)
        for _ in range(g.nt):
            state = step_explicit(state, ZERO.build(), g, np.zeros((1, g.nx)))
            assert state.values.min() >= lo - 1e-14
            assert state.values.max() <= hi + 1e-14

    def test_noise_scaling_is_linear(self):
        g = small_grid()
        xi = NoiseStream(5, 2, 1, g.nx).normals(1)[0]
        base = FieldState(0, np.ones((1, g.nx)))
        heat = step_explicit(base, ZERO.build(), g, xi).values
        one = step_explicit(base, UNIT.build(), g, xi).values
        two = step_explicit(base, SigmaFamily.constant([[2.0]]).build(), g, xi).values
        assert_allclose(two - heat, 2.0 * (one - heat), rtol=1e-12)

    def test_bump_matches_heat_kernel_convolution(self):
        # sigma = 0, ones + discrete bump: the deviation from 1 evolves by the
        # discrete heat flow and converges to the p_t convolution at O(dx^2)
        errs = {}
        for dx in (0.1, 0.05):
            g = Grid.build(T=0.1, dt=dx * dx / 4, dx=dx, r_max=0.5,
                           output_times=[0.1])
            mid = g.nx // 2
            vals = np.ones((1, g.nx))
            vals[0, mid] += 1.0 / g.dx
            state = FieldState(0, vals)
            for n in range(g.nt):
                state = step_explicit(state, ZERO.build(), g, np.zeros((1, g.nx)))
            exact = heat_kernel(g.T, g.xs - g.xs[mid])
            errs[dx] = np.max(np.abs(state.values[0] - 1.0 - exact))
        assert errs[0.1] / errs[0.05] == pytest.approx(4.0, rel=0.5)

    def test_blowup_detected(self):
        # multiplicative coefficient with an absurd slope explodes to inf
        g = small_grid()
        huge = SigmaFamily.affine([[0.0]], [[[1e160]]]).build()
        state = FieldState(0, np.ones((1, g.nx)))
        xi = np.ones((1, g.nx))
        with pytest.raises(BlowupError):
            for _ in range(6):
                state = step_explicit(state, huge, g, xi)

    def test_noise_shape_validated(self):
        g = small_grid()
        with pytest.raises(ConfigError):
            step_explicit(FieldState(0, np.ones((1, g.nx))), UNIT.build(), g,
                          np.zeros((2, g.nx)))


class TestSimulate:
    def test_bit_identical_repeat(self):
        g = small_grid()
        a = simulate(SMOOTH.build(), g, seed=42, replica_id=7)
        b = simulate(SMOOTH.build(), g, seed=42, replica_id=7)
        assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))

    def test_zero_sigma_constant_trajectory(self):
        g = small_grid(output_times=[0.01, 0.05])
        states = simulate(ZERO.build(), g, seed=1, replica_id=0)
        assert len(states) == 2
        assert all(np.array_equal(s.values, np.ones((1, g.nx))) for s in states)

    def test_matches_manual_stepping_bitwise(self):
        g = small_grid()
        xi_all = NoiseStream(9, 2, 1, g.nx).normals(g.nt)
        state = FieldState(0, np.ones((1, g.nx)))
        for n in range(g.nt):
            state = step_explicit(state, SMOOTH.build(), g, xi_all[n])
        ref = simulate(SMOOTH.build(), g, seed=9, replica_id=2)[-1]
        assert np.array_equal(state.values, ref.values)

    def test_batch_composition_invariance(self):
        g = small_grid()
        solo = simulate(SMOOTH.build(), g, seed=9, replica_id=5)[-1].values
        got = None
        for n, u, xi in noise_steps(SMOOTH.build(), g, 9, [2, 3, 4, 5, 6]):
            if xi is None:
                got = u[3].T
        assert np.array_equal(solo, got)

    def test_mean_is_one(self):
        g = Grid.build(T=0.25, dt=1e-3, dx=0.05, r_max=0.0, output_times=[0.25])
        node = int(np.argmin(np.abs(g.xs)))
        m = 3000
        vals = np.empty(m)
        for n, u, xi in noise_steps(UNIT.build(), g, 77, range(m)):
            if xi is None:
                vals[:] = u[:, node, 0]
        se = vals.std(ddof=1) / math.sqrt(m)
        assert abs(vals.mean() - 1.0) < 3 * se


class TestStepTangent:
    def test_zero_source_zero_state_stays_zero(self):
        g = small_grid()
        field = SMOOTH.build()
        u = FieldState(0, np.ones((1, g.nx)))
        z = [TangentState(0, 0, np.zeros((1, g.nx)))]
        xi = NoiseStream(1, 0, 1, g.nx).normals(1)[0]
        out = step_tangent(u, z, field, g, xi)
        assert np.array_equal(out[0].values, np.zeros((1, g.nx)))

    def test_constant_sigma_reduces_to_heat_flow_with_source(self):
        g = small_grid()
        field = UNIT.build()  # jacobian identically zero
        rng = np.random.default_rng(3)
        zvals = rng.normal(size=(1, g.nx))
        src = rng.normal(size=(1, g.nx))
        xi = rng.normal(size=(1, g.nx))
        out = step_tangent(FieldState(0, np.ones((1, g.nx))),
                           [TangentState(0, 0, zvals)], field, g, xi, [src])
        lam = 0.5 * g.dt / g.dx**2
        pad = np.pad(zvals[0], 1)
        lap = pad[2:] - 2 * pad[1:-1] + pad[:-2]
        assert_allclose(out[0].values[0], zvals[0] + lam * lap + src[0],
                        rtol=1e-12, atol=1e-14)

    def test_superposition_of_sources(self):
        g = small_grid()
        field = SMOOTH.build()
        rng = np.random.default_rng(4)
        u = FieldState(0, 1.0 + 0.1 * rng.normal(size=(1, g.nx)))
        xi = rng.normal(size=(1, g.nx))
        z0 = np.zeros((1, g.nx))
        q1, q2 = rng.normal(size=(2, 1, g.nx))
        t1 = step_tangent(u, [TangentState(0, 0, z0)], field, g, xi, [q1])[0]
        t2 = step_tangent(u, [TangentState(0, 0, z0)], field, g, xi, [q2])[0]
        t12 = step_tangent(u, [TangentState(0, 0, z0)], field, g, xi, [q1 + q2])[0]
        assert_allclose(t12.values, t1.values + t2.values, rtol=1e-12,
                        atol=1e-14)

    def test_superposition_through_many_steps(self):
        g = small_grid()
        field = SMOOTH.build()
        rng = np.random.default_rng(5)
        xi_all = NoiseStream(8, 1, 1, g.nx).normals(g.nt)
        u = FieldState(0, np.ones((1, g.nx)))
        sources = rng.normal(size=(g.nt, 2, 1, g.nx))
        za = TangentState(0, 0, np.zeros((1, g.nx)))
        zb = TangentState(0, 0, np.zeros((1, g.nx)))
        zc = TangentState(0, 0, np.zeros((1, g.nx)))
        for n in range(g.nt):
            za = step_tangent(u, [za], field, g, xi_all[n], [sources[n, 0]])[0]
            zb = step_tangent(u, [zb], field, g, xi_all[n], [sources[n, 1]])[0]
            zc = step_tangent(u, [zc], field, g, xi_all[n],
                              [sources[n, 0] + sources[n, 1]])[0]
            u = step_explicit(u, field, g, xi_all[n])
        scale = np.max(np.abs(zc.values)) or 1.0
        assert np.max(np.abs(zc.values - za.values - zb.values)) < 1e-12 * scale

    def test_requires_jacobian(self):
        g = small_grid()
        from sheavg.model import DiffusionField

        plain = DiffusionField(1, 1, lambda u: np.ones(u.shape[:-1] + (1, 1)),
                               jacobian=None)
        with pytest.raises(ConfigError):
            step_tangent(FieldState(0, np.ones((1, g.nx))),
                         [TangentState(0, 0, np.zeros((1, g.nx)))],
                         plain, g, np.zeros((1, g.nx)))

    def test_out_of_sync_rejected(self):
        g = small_grid()
        with pytest.raises(ConfigError):
            step_tangent(FieldState(1, np.ones((1, g.nx))),
                         [TangentState(0, 0, np.zeros((1, g.nx)))],
                         SMOOTH.build(), g, np.zeros((1, g.nx)))
