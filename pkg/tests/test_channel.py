import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fasbar.channel import (
    ArrayGeometry,
    PilotBatch,
    PortSchedule,
    RICH_PARAMS,
    SscParams,
    generate_rich_channel,
    generate_ssc_channel,
    receive_pilots,
    steering_matrix,
    steering_vector,
)
from fasbar.errors import InvalidGeometryError, ScheduleMismatchError


class TestGeometry:
    def test_spacing_times_gaps_is_aperture(self):
        for n in (2, 3, 128, 257):
            g = ArrayGeometry(n, 0.0857, 0.857)
            assert g.port_spacing * (n - 1) == pytest.approx(g.aperture, rel=1e-12)

    @pytest.mark.parametrize("args", [(1, 1.0, 1.0), (0, 1.0, 1.0), (4, 0.0, 1.0), (4, 1.0, -1.0), (2.5, 1.0, 1.0)])
    def test_invalid(self, args):
        with pytest.raises(InvalidGeometryError):
            ArrayGeometry(*args)

    def test_from_carrier_in_meters(self):
        g = ArrayGeometry.from_carrier(256, 3.5e9)
        assert g.wavelength == pytest.approx(0.0856549880, rel=1e-8)
        assert g.aperture == pytest.approx(10 * g.wavelength)


class TestSteering:
    def test_broadside_is_flat(self):
        np.testing.assert_allclose(steering_matrix(4, 0.37, 1.0, np.pi / 2)[:, 0], 0.5 * np.ones(4), atol=1e-15)

    def test_single_port(self):
        np.testing.assert_allclose(steering_matrix(1, 0.5, 1.0, 0.3)[:, 0], [1.0])

    def test_half_wavelength_endfire(self):
        a = steering_matrix(2, 0.5, 1.0, 0.0)[:, 0]
        np.testing.assert_allclose(a, np.array([1, -1]) / np.sqrt(2), atol=1e-15)

    def test_invalid(self):
        with pytest.raises(InvalidGeometryError):
            steering_matrix(0, 0.5, 1.0, 0.0)
        with pytest.raises(InvalidGeometryError):
            steering_matrix(4, 0.5, 0.0, 0.0)

    @given(st.integers(1, 300), st.floats(-10, 10), st.floats(0.01, 5.0))
    def test_unit_norm(self, n, theta, spacing):
        a = steering_matrix(n, spacing, 1.0, theta)[:, 0]
        assert abs(np.linalg.norm(a) - 1.0) < 1e-12

    @given(st.floats(0, np.pi))
    def test_cos_symmetry_wraps_negative_angles(self, theta):
        g = ArrayGeometry(16)
        np.testing.assert_allclose(steering_vector(g, -theta), steering_vector(g, theta), atol=1e-12)


class TestSsc:
    def test_single_flat_ray_is_all_ones(self):
        g = ArrayGeometry(8)
        h = generate_ssc_channel(g, SscParams(1, 1, 0.0), 0, gains=[1.0], angles=[np.pi / 2])
        np.testing.assert_allclose(h, np.ones(8), atol=1e-12)

    def test_matches_direct_steering_sum(self, rng):
        # cumulative-product generator vs explicit sqrt(N/CR) sum of a(theta)
        g = ArrayGeometry(64)
        params = SscParams(3, 7, np.deg2rad(5))
        gains = rng.standard_normal(21) + 1j * rng.standard_normal(21)
        angles = rng.uniform(-np.pi, np.pi, 21)
        a = steering_matrix(64, g.port_spacing, g.wavelength, angles)
        expected = np.sqrt(64 / 21) * a @ gains
        np.testing.assert_allclose(generate_ssc_channel(g, params, 0, gains, angles), expected, atol=1e-12)

    def test_deterministic(self):
        g = ArrayGeometry(32)
        np.testing.assert_array_equal(generate_ssc_channel(g, SscParams(), 5), generate_ssc_channel(g, SscParams(), 5))
        assert not np.array_equal(generate_ssc_channel(g, SscParams(), 5), generate_ssc_channel(g, SscParams(), 6))

    def test_rich_proxy(self):
        g = ArrayGeometry(32)
        assert (RICH_PARAMS.num_clusters, RICH_PARAMS.rays_per_cluster) == (23, 20)
        h = generate_rich_channel(g, 3)
        assert h.shape == (32,)
        np.testing.assert_array_equal(h, generate_rich_channel(g, 3))

    @pytest.mark.parametrize("params", [SscParams(), RICH_PARAMS], ids=["ssc", "rich"])
    def test_mean_power_is_n(self, params):
        g = ArrayGeometry(32)
        p = np.array([np.sum(np.abs(generate_ssc_channel(g, params, (1, s))) ** 2) for s in range(10_000)])
        se = p.std(ddof=1) / np.sqrt(p.size)
        assert abs(p.mean() - 32) < 3 * se

    def test_reversal_symmetry_in_distribution(self):
        g = ArrayGeometry(16)
        hs = np.array([generate_ssc_channel(g, SscParams(), (2, s)) for s in range(10_000)])
        rev = hs[:, ::-1]
        # first moments (means) and second moments (per-port power)
        for stat in (lambda x: x.real, lambda x: x.imag, lambda x: np.abs(x) ** 2):
            a, b = stat(hs), stat(rev)
            d = a - b
            se = d.std(axis=0, ddof=1) / np.sqrt(d.shape[0])
            assert np.all(np.abs(d.mean(axis=0)) < 3 * se + 1e-12)

    def test_param_validation(self):
        with pytest.raises(ValueError):
            SscParams(0, 1)
        with pytest.raises(ValueError):
            SscParams(1, 1, 4.0)


class TestSchedule:
    def test_from_ports_is_one_based(self):
        s = PortSchedule.from_ports([3, 1], antennas=1)
        assert s.indices.tolist() == [2, 0]
        assert s.ports == (3, 1)

    @pytest.mark.parametrize("ports", [[1, 1], [0, 2], [5]])
    def test_invalid(self, ports):
        with pytest.raises(ScheduleMismatchError):
            PortSchedule.from_ports(ports, num_ports=4)

    def test_length_must_be_pm(self):
        with pytest.raises(ScheduleMismatchError):
            PortSchedule([0, 1, 2], 2, 2)

    @given(st.integers(2, 40).flatmap(lambda n: st.tuples(st.just(n), st.permutations(range(n)))), st.data())
    def test_switch_matrix_round_trip(self, n_perm, data):
        n, perm = n_perm
        count = data.draw(st.integers(1, n))
        s = PortSchedule(perm[:count], count, 1, n)
        mat = s.switch_matrix()
        np.testing.assert_array_equal(mat @ mat.T, np.eye(count))
        assert PortSchedule.from_switch_matrix(mat).indices.tolist() == list(perm[:count])

    def test_timeslots(self):
        s = PortSchedule([4, 0, 2, 1], 2, 2, 5)
        slots = s.timeslot_matrices()
        assert len(slots) == 2 and slots[0].shape == (2, 5)
        assert slots[0][0, 4] == 1 and slots[1][1, 1] == 1


class TestPilots:
    def test_noiseless_is_selection(self, rng):
        h = rng.standard_normal(10) + 1j * rng.standard_normal(10)
        s = PortSchedule([7, 2, 5], 3, 1, 10)
        y = receive_pilots(h, s, 0.0)
        np.testing.assert_array_equal(y.observations, h[[7, 2, 5]])
        np.testing.assert_array_equal(y.observations, s.switch_matrix() @ h)

    def test_basis_pick_out(self):
        h = np.zeros(5)
        h[2] = 1.0
        y = receive_pilots(h, PortSchedule.from_ports([3], num_ports=5), 0.0)
        np.testing.assert_array_equal(y.observations, [1.0])

    def test_noise_power(self):
        h = np.zeros(1)
        s = PortSchedule([0], 1, 1)
        s2 = 0.3
        z = np.array([receive_pilots(h, s, s2, (9, t)).observations[0] for t in range(20_000)])
        # batch check of the 1e5-draw figure using a single vector draw
        big = receive_pilots(np.zeros(100_000), PortSchedule(np.arange(100_000), 100_000, 1), s2, 4).observations
        assert np.var(big) == pytest.approx(s2, rel=0.02)
        assert np.var(z.real) == pytest.approx(s2 / 2, rel=0.05)
        assert np.var(z.imag) == pytest.approx(s2 / 2, rel=0.05)

    def test_deterministic(self):
        h = np.ones(4)
        s = PortSchedule([0, 1], 2, 1)
        a = receive_pilots(h, s, 0.1, 7).observations
        np.testing.assert_array_equal(a, receive_pilots(h, s, 0.1, 7).observations)

    def test_out_of_range(self):
        with pytest.raises(ScheduleMismatchError):
            receive_pilots(np.ones(3), PortSchedule([3], 1, 1), 0.0)

    def test_batch_validation(self):
        with pytest.raises(ValueError):
            PilotBatch([1.0], -1.0)
        with pytest.raises(ScheduleMismatchError):
            PilotBatch([1.0, 2.0], 0.0, PortSchedule([0], 1, 1))
