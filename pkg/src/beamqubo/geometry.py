"""Ground/satellite geometry: ECEF conversion, angular separation, proximity graph.

Two users can share a beam only if the angle between their direction vectors,
seen from the satellite, is at most half the beam cone angle.  The proximity
graph has one vertex per user and an edge for every such pair.

A spherical Earth (R = 6371.0 km) is used throughout: edge decisions depend
only on angles subtended at the satellite, where the ellipsoidal correction
is second order at LEO altitudes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, ValidationError
from .graph import ProximityGraph

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class GeoPoint:
    """Geodetic position. Latitude/longitude in degrees, altitude in km above the surface."""

    latitude: float
    longitude: float
    altitude: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValidationError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValidationError(f"longitude {self.longitude} outside [-180, 180]")
        if self.altitude < 0.0:
            raise ValidationError(f"altitude {self.altitude} must be >= 0 km")


@dataclass(frozen=True)
class SatelliteGeometry:
    """Satellite position plus the beam cone angle alpha (radians).

    The pairing threshold for users is ``alpha / 2``.
    """

    position: GeoPoint
    cone_angle_alpha: float

    def __post_init__(self):
        if self.position.altitude <= 0.0:
            raise ValidationError("satellite altitude must be strictly positive")
        if not 0.0 < self.cone_angle_alpha < np.pi:
            raise ValidationError(
                f"cone angle {self.cone_angle_alpha} must be in (0, pi) radians"
            )


@dataclass(frozen=True)
class UserSet:
    """Ground users: (id, position) pairs with unique ids and altitude 0.

    May be empty (e.g. an empty data file); building an instance from an
    empty set is rejected by :func:`build_proximity_graph`.
    """

    users: tuple[tuple[str, GeoPoint], ...]

    def __post_init__(self):
        ids = [uid for uid, _ in self.users]
        if len(set(ids)) != len(ids):
            raise ValidationError("user ids must be unique")

    def __len__(self) -> int:
        return len(self.users)

    @property
    def positions(self) -> tuple[GeoPoint, ...]:
        return tuple(p for _, p in self.users)


def to_ecef(p: GeoPoint) -> np.ndarray:
    """Convert a GeoPoint to Earth-centered cartesian coordinates in km.

    Returns (R+alt) * (cos lat cos lon, cos lat sin lon, sin lat) on the
    spherical Earth.
    """
    lat = np.radians(p.latitude)
    lon = np.radians(p.longitude)
    r = EARTH_RADIUS_KM + p.altitude
    return np.array(
        [r * np.cos(lat) * np.cos(lon), r * np.cos(lat) * np.sin(lon), r * np.sin(lat)]
    )


def angular_separation(sat: GeoPoint, u: GeoPoint, v: GeoPoint) -> float:
    """Angle in radians between the satellite->u and satellite->v directions.

    Symmetric in u and v; returns a value in [0, pi].  Raises
    DegenerateGeometryError if either user coincides with the satellite.
    """
    if sat.altitude <= 0.0:
        raise ValidationError("satellite must be strictly above the surface")
    s = to_ecef(sat)
    du = to_ecef(u) - s
    dv = to_ecef(v) - s
    nu = np.linalg.norm(du)
    nv = np.linalg.norm(dv)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateGeometryError("user position coincides with the satellite")
    cosang = np.dot(du, dv) / (nu * nv)
    return float(np.arccos(np.clip(cosang, -1.0, 1.0)))


def build_proximity_graph(users: UserSet, geom: SatelliteGeometry) -> ProximityGraph:
    """Build the undirected proximity graph over the users.

    Edge (i, j) exists iff the angular separation of users i and j at the
    satellite is <= alpha/2; the boundary case counts as an edge.
    """
    n = len(users)
    if n == 0:
        raise ValidationError("cannot build a proximity graph from an empty user set")
    sat = to_ecef(geom.position)
    pts = np.array([to_ecef(p) for p in users.positions])
    d = pts - sat[None, :]
    norms = np.linalg.norm(d, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateGeometryError("user position coincides with the satellite")
    unit = d / norms[:, None]
    cosang = np.clip(unit @ unit.T, -1.0, 1.0)
    ang = np.arccos(cosang)
    adj = ang <= geom.cone_angle_alpha / 2.0
    np.fill_diagonal(adj, False)
    # enforce exact symmetry against floating noise in the gram product
    adj = adj | adj.T
    return ProximityGraph(adj)
