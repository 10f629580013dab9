import numpy as np
import pytest

from beamqubo import (
    DegenerateGeometryError,
    GeoPoint,
    SatelliteGeometry,
    UserSet,
    ValidationError,
    angular_separation,
    build_proximity_graph,
    to_ecef,
)

SAT = GeoPoint(latitude=0.0, longitude=0.0, altitude=1110.0)
GEOM = SatelliteGeometry(position=SAT, cone_angle_alpha=0.1)


def users_at(lonlats):
    return UserSet(tuple(
        (f"u{i}", GeoPoint(latitude=lat, longitude=lon, altitude=0.0))
        for i, (lat, lon) in enumerate(lonlats)
    ))


class TestEcef:
    def test_equator_prime_meridian(self):
        assert np.allclose(to_ecef(GeoPoint(0.0, 0.0, 0.0)), [6371.0, 0.0, 0.0])

    def test_north_pole(self):
        assert np.allclose(to_ecef(GeoPoint(90.0, 0.0, 0.0)), [0.0, 0.0, 6371.0],
                           atol=1e-9)

    def test_leo_altitude(self):
        assert np.allclose(to_ecef(GeoPoint(0.0, 0.0, 1110.0)), [7481.0, 0.0, 0.0])

    @pytest.mark.parametrize("lat,lon,alt", [
        (91.0, 0.0, 0.0), (-91.0, 0.0, 0.0), (0.0, 181.0, 0.0),
        (0.0, -200.0, 0.0), (0.0, 0.0, -1.0),
    ])
    def test_rejects_out_of_range(self, lat, lon, alt):
        with pytest.raises(ValidationError):
            GeoPoint(lat, lon, alt)


class TestAngularSeparation:
    def test_identical_points(self):
        u = GeoPoint(10.0, 20.0, 0.0)
        assert angular_separation(SAT, u, u) == 0.0

    def test_symmetric_about_nadir(self):
        u = GeoPoint(0.0, 1.0, 0.0)
        v = GeoPoint(0.0, -1.0, 0.0)
        nadir = GeoPoint(0.0, 0.0, 0.0)
        full = angular_separation(SAT, u, v)
        half = angular_separation(SAT, u, nadir)
        assert full == pytest.approx(2.0 * half, abs=1e-12)

    def test_matches_high_precision_dot_product(self):
        # 40-digit evaluation of acos(d_u . d_v / |d_u||d_v|) for this pair
        u = GeoPoint(0.0, 1.0, 0.0)
        v = GeoPoint(0.5, -0.3, 0.0)
        expected = 0.1390349005184253311649665280164351633661
        assert angular_separation(SAT, u, v) == pytest.approx(expected, abs=1e-12)

    def test_symmetry_in_arguments(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            lat1, lat2 = rng.uniform(-60, 60, size=2)
            lon1, lon2 = rng.uniform(-120, 120, size=2)
            u = GeoPoint(lat1, lon1, 0.0)
            v = GeoPoint(lat2, lon2, 0.0)
            assert angular_separation(SAT, u, v) == pytest.approx(
                angular_separation(SAT, v, u), abs=1e-12)

    def test_degenerate_direction(self):
        at_satellite = GeoPoint(0.0, 0.0, 1110.0)
        with pytest.raises(DegenerateGeometryError):
            angular_separation(SAT, at_satellite, GeoPoint(0.0, 1.0, 0.0))

    def test_satellite_on_surface_rejected(self):
        with pytest.raises(ValidationError):
            angular_separation(GeoPoint(0.0, 0.0, 0.0), GeoPoint(0.0, 1.0, 0.0),
                               GeoPoint(0.0, 2.0, 0.0))


class TestProximityGraph:
    def test_single_user(self):
        g = build_proximity_graph(users_at([(0.0, 0.0)]), GEOM)
        assert g.n == 1 and g.edges() == []

    def test_coincident_users_share_edge(self):
        g = build_proximity_graph(users_at([(1.0, 2.0), (1.0, 2.0)]), GEOM)
        assert g.edges() == [(0, 1)]

    def test_three_in_line_forms_path(self):
        # separations at the satellite: 0.03504, 0.03493, 0.06998 rad
        # (high-precision values); alpha/2 = 0.05 keeps only adjacent pairs
        users = users_at([(0.0, 0.0), (0.0, 0.35), (0.0, 0.70)])
        g = build_proximity_graph(users, GEOM)
        assert g.edges() == [(0, 1), (1, 2)]

    def test_empty_user_set_rejected(self):
        with pytest.raises(ValidationError):
            build_proximity_graph(UserSet(()), GEOM)

    def test_adjacency_symmetric_irreflexive(self):
        rng = np.random.default_rng(3)
        pts = [(lat, lon) for lat, lon in zip(rng.uniform(24, 28, 30),
                                              rng.uniform(-90, -84, 30))]
        geom = SatelliteGeometry(position=GeoPoint(26.8, -87.0, 1110.0),
                                 cone_angle_alpha=np.radians(5.0))
        adj = build_proximity_graph(users_at(pts), geom).adjacency
        assert np.array_equal(adj, adj.T)
        assert not np.any(np.diag(adj))

    def test_shrinking_alpha_never_adds_edges(self):
        rng = np.random.default_rng(11)
        pts = [(lat, lon) for lat, lon in zip(rng.uniform(24, 28, 25),
                                              rng.uniform(-90, -84, 25))]
        users = users_at(pts)
        pos = GeoPoint(26.8, -87.0, 1110.0)
        for wide, narrow in [(6.0, 3.0), (5.0, 4.9), (2.0, 0.5)]:
            e_wide = set(build_proximity_graph(
                users, SatelliteGeometry(pos, float(np.radians(wide)))).edges())
            e_narrow = set(build_proximity_graph(
                users, SatelliteGeometry(pos, float(np.radians(narrow)))).edges())
            assert e_narrow <= e_wide

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValidationError):
            UserSet((("a", GeoPoint(0.0, 0.0, 0.0)), ("a", GeoPoint(1.0, 1.0, 0.0))))
