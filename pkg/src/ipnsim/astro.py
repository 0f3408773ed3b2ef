"""Positions of bodies, satellites, and ground stations in a shared frame.

Everything moves on circular orbits (or rigid rotation, for ground
stations), so every node's position is a finite sum of rotating-vector
terms::

    pos(t) = sum_i  k_i + e1_i * cos(w_i * t + phi_i) + e2_i * sin(w_i * t + phi_i)

with constant vectors ``k``, ``e1``, ``e2``.  A node's term list is its own
motion term plus the orbit terms of every ancestor body, so evaluation needs
no recursion at query time.  Units: km, seconds, radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# Speed of light, km/s.
C_LIGHT = 299792.458

SUN_MU = 1.32712440018e11
SUN_RADIUS = 696000.0

EARTH_MU = 398600.4418
EARTH_RADIUS = 6371.0
EARTH_ORBIT_RADIUS = 1.496e8
EARTH_ROTATION_PERIOD = 86164.0905  # sidereal

MOON_MU = 4902.8
MOON_RADIUS = 1737.4
MOON_ORBIT_RADIUS = 3.844e5

MARS_MU = 42828.37
MARS_RADIUS = 3389.5
MARS_ORBIT_RADIUS = 2.279e8
MARS_ROTATION_PERIOD = 88642.663

# Default epoch phase separating Earth and Mars so the one-way light time is
# roughly 1240 s without the Sun blocking the line of sight.
MARS_EPOCH_PHASE = math.radians(159.4)

PERIOD_CONSISTENCY_RTOL = 1e-6


class InvalidSpec(ValueError):
    """A constellation or orbit specification violates its invariants."""


def kepler_period(a: float, mu: float) -> float:
    """Orbital period of a circular orbit with semi-major axis ``a`` (km)."""
    return 2.0 * math.pi * math.sqrt(a ** 3 / mu)


def kepler_semi_major_axis(period: float, mu: float) -> float:
    """Semi-major axis giving ``period`` seconds about a body with ``mu``."""
    return (mu * period ** 2 / (4.0 * math.pi ** 2)) ** (1.0 / 3.0)


@dataclass
class CircularOrbit:
    """Circular orbit about a parent body.

    ``period`` may be omitted, in which case it is derived from ``a`` and the
    parent's gravitational parameter when the orbit is attached to a body.
    """

    a: float
    inclination: float = 0.0
    raan: float = 0.0
    phase: float = 0.0
    period: Optional[float] = None

    def resolved_period(self, mu: float) -> float:
        derived = kepler_period(self.a, mu)
        if self.period is None:
            return derived
        if abs(self.period - derived) > PERIOD_CONSISTENCY_RTOL * derived:
            raise InvalidSpec(
                f"orbit period {self.period} inconsistent with a={self.a} "
                f"(Kepler gives {derived})"
            )
        return self.period


@dataclass
class Body:
    name: str
    radius: float
    mu: float
    parent: Optional["Body"] = None
    orbit: Optional[CircularOrbit] = None
    rotation_period: Optional[float] = None
    rotation_phase: float = 0.0

    def __post_init__(self) -> None:
        if self.radius <= 0 or self.mu <= 0:
            raise InvalidSpec(f"body {self.name}: radius and mu must be positive")
        if (self.parent is None) != (self.orbit is None):
            raise InvalidSpec(f"body {self.name}: parent and orbit go together")
        seen = {id(self)}
        anc = self.parent
        while anc is not None:
            if id(anc) in seen:
                raise InvalidSpec(f"body {self.name}: cyclic parent chain")
            seen.add(id(anc))
            anc = anc.parent


@dataclass
class WalkerSpec:
    """Walker constellation: T satellites in P planes with phasing factor F."""

    total: int
    planes: int
    phasing: int
    altitude: float
    inclination: float
    pattern: str = "delta"  # "delta" or "star"

    def __post_init__(self) -> None:
        if self.planes <= 0 or self.total % self.planes != 0:
            raise InvalidSpec(
                f"walker: planes ({self.planes}) must divide total ({self.total})"
            )
        if not 0 <= self.phasing < self.planes:
            raise InvalidSpec(f"walker: need 0 <= F < P, got F={self.phasing}")
        if self.pattern not in ("delta", "star"):
            raise InvalidSpec(f"walker: unknown pattern {self.pattern!r}")


@dataclass
class GroundStationSpec:
    body: Body
    latitude: float
    longitude: float
    min_elevation_deg: float = 0.0

    def __post_init__(self) -> None:
        if abs(self.latitude) > math.pi / 2 + 1e-12:
            raise InvalidSpec(f"ground station latitude {self.latitude} out of range")


# --- rotating-vector terms ------------------------------------------------
#
# A term is a flat tuple (kx, ky, kz, ax, ay, az, bx, by, bz, w, phi) so the
# routing core can consume term tables as plain float arrays.

Term = tuple[float, ...]

TERM_WIDTH = 11


def static_term(x: float, y: float, z: float) -> Term:
    return (x, y, z, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def orbit_term(orbit: CircularOrbit, mu: float) -> Term:
    """Rotating-vector term for a circular orbit about the frame origin."""
    period = orbit.resolved_period(mu)
    w = 2.0 * math.pi / period
    cos_o, sin_o = math.cos(orbit.raan), math.sin(orbit.raan)
    cos_i, sin_i = math.cos(orbit.inclination), math.sin(orbit.inclination)
    a = orbit.a
    e1 = (a * cos_o, a * sin_o, 0.0)
    e2 = (-a * sin_o * cos_i, a * cos_o * cos_i, a * sin_i)
    return (0.0, 0.0, 0.0, *e1, *e2, w, orbit.phase)


def ground_term(body: Body, latitude: float, longitude: float) -> Term:
    """Term for a surface point rotating rigidly with ``body``."""
    if body.rotation_period is None:
        raise InvalidSpec(f"body {body.name} has no rotation period")
    w = 2.0 * math.pi / body.rotation_period
    r_xy = body.radius * math.cos(latitude)
    z = body.radius * math.sin(latitude)
    phase = longitude + body.rotation_phase
    return (0.0, 0.0, z, r_xy, 0.0, 0.0, 0.0, r_xy, 0.0, w, phase)


def body_terms(body: Body) -> list[Term]:
    """Orbit terms of ``body``'s center, outermost ancestor first."""
    terms: list[Term] = []
    b: Optional[Body] = body
    while b is not None:
        if b.orbit is not None:
            assert b.parent is not None
            terms.append(orbit_term(b.orbit, b.parent.mu))
        b = b.parent
    terms.reverse()
    return terms


def satellite_terms(body: Body, orbit: CircularOrbit) -> list[Term]:
    return body_terms(body) + [orbit_term(orbit, body.mu)]


def ground_station_terms(spec: GroundStationSpec) -> list[Term]:
    return body_terms(spec.body) + [
        ground_term(spec.body, spec.latitude, spec.longitude)
    ]


def eval_terms(terms: list[Term], t: float) -> tuple[float, float, float]:
    """Scalar position evaluation.

    Accumulates term by term with ``math`` trig so results are bit-identical
    to the compiled core (both use libm and the same summation order).
    """
    x = y = z = 0.0
    for term in terms:
        kx, ky, kz, ax, ay, az, bx, by, bz, w, phi = term
        ang = w * t + phi
        c = math.cos(ang)
        s = math.sin(ang)
        x += kx + ax * c + bx * s
        y += ky + ay * c + by * s
        z += kz + az * c + bz * s
    return (x, y, z)


def eval_terms_grid(terms: list[Term], times: np.ndarray) -> np.ndarray:
    """Vectorized position evaluation, shape (len(times), 3)."""
    out = np.zeros((len(times), 3))
    for term in terms:
        kx, ky, kz, ax, ay, az, bx, by, bz, w, phi = term
        ang = w * times + phi
        c = np.cos(ang)
        s = np.sin(ang)
        out[:, 0] += kx + ax * c + bx * s
        out[:, 1] += ky + ay * c + by * s
        out[:, 2] += kz + az * c + bz * s
    return out


def shift_epoch(terms: list[Term], offset: float) -> list[Term]:
    """Terms describing the same motion started ``offset`` seconds later.

    Shifting each term's phase by w*offset is an exact time translation, so
    a run with an epoch offset evaluates positions over [0, horizon] like
    any other run.
    """
    shifted = []
    for term in terms:
        *rest, w, phi = term
        shifted.append((*rest, w, phi + w * offset))
    return shifted


def generate_walker(spec: WalkerSpec, parent: Body) -> list[CircularOrbit]:
    """Expand a Walker T/P/F spec into per-satellite orbits.

    Plane RAANs are spaced over 360/P degrees for delta patterns and 180/P
    for star patterns; satellites within a plane are spaced 360/(T/P) apart,
    with an inter-plane phase offset of F*360/T.
    """
    a = parent.radius + spec.altitude
    if a <= parent.radius:
        raise InvalidSpec("walker altitude must be positive")
    per_plane = spec.total // spec.planes
    raan_span = 2.0 * math.pi if spec.pattern == "delta" else math.pi
    raan_step = raan_span / spec.planes
    in_plane_step = 2.0 * math.pi / per_plane
    plane_phase_step = spec.phasing * 2.0 * math.pi / spec.total
    orbits = []
    for p in range(spec.planes):
        for s in range(per_plane):
            orbits.append(
                CircularOrbit(
                    a=a,
                    inclination=spec.inclination,
                    raan=p * raan_step,
                    phase=p * plane_phase_step + s * in_plane_step,
                )
            )
    return orbits
