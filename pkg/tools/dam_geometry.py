"""Coarse tetrahedral wedge standing in for the half arch dam (used by build_fixtures.py).

Vertical axis is y. The right face lies in the plane z = 0 and the left face
in z = -x; the wedge spans 45 degrees about the y axis.
"""

import math

import numpy as np

DOWNSTREAM_BASE = (65.0, 0.0)  # (radius, elevation)
DOWNSTREAM_TOP = (210.0, 219.24)
UPSTREAM_BASE = (266.863, 6.6612)
UPSTREAM_TOP = (224.0, 219.24)
CREST = 219.24
WATER_LEVEL = CREST - 8.2296
BASE_PRESSURE = 45000 * 47.88025898  # psf -> Pa
PENETRATION = 14.0
ANGLE = math.pi / 4

N_THETA = 10
N_HEIGHT = 14
THICKNESS_FRACTIONS = [0.0, 0.035, 0.07, 0.12, 0.2, 0.3, 0.45, 0.6, 0.8, 1.0]

# Kuhn split of the unit cube: every tet runs from corner 0 to corner 7
_KUHN = [(0, 1, 3, 7), (0, 1, 5, 7), (0, 2, 3, 7), (0, 2, 6, 7), (0, 4, 5, 7), (0, 4, 6, 7)]


def section_point(xi, eta):
    """(radius, elevation) at thickness fraction xi and height fraction eta."""
    d = np.add(DOWNSTREAM_BASE, eta * np.subtract(DOWNSTREAM_TOP, DOWNSTREAM_BASE))
    u = np.add(UPSTREAM_BASE, eta * np.subtract(UPSTREAM_TOP, UPSTREAM_BASE))
    return d + xi * (u - d)


def to_xyz(r, elev, theta):
    return (r * math.cos(theta), elev, -r * math.sin(theta))


def build():
    nt, nh = N_THETA, N_HEIGHT
    xis = THICKNESS_FRACTIONS
    nx = len(xis)
    nodes = []
    grid = {}
    for k in range(nt + 1):
        theta = ANGLE * k / nt
        for j in range(nh + 1):
            for i, xi in enumerate(xis):
                r, e = section_point(xi, j / nh)
                grid[(i, j, k)] = len(nodes)
                nodes.append(to_xyz(r, e, theta))
    nodes = np.array(nodes)
    tets = []
    for k in range(nt):
        for j in range(nh):
            for i in range(nx - 1):
                corners = [grid[(i + a, j + b, k + c)] for c in (0, 1) for b in (0, 1) for a in (0, 1)]
                for t in _KUHN:
                    tet = [corners[v] for v in t]
                    e = nodes[tet[1:]] - nodes[tet[0]]
                    if np.linalg.det(e) < 0:
                        tet[1], tet[2] = tet[2], tet[1]
                    tets.append(tuple(tet))
    fixed = sorted({grid[(i, 0, k)] for i in range(nx) for k in range(nt + 1)}
                   | {grid[(i, j, nt)] for i in range(nx) for j in range(nh + 1)})
    symmetric = sorted({grid[(i, j, 0)] for i in range(nx) for j in range(nh + 1)} - set(fixed))
    upstream = [[grid[(nx - 1, j, k)] for k in range(nt + 1)] for j in range(nh + 1)]
    return nodes, tets, fixed, symmetric, upstream


def radius_elevation(p):
    return math.hypot(p[0], p[2]), p[1]


def depth_below_surface(p):
    """Distance in the radial section to the nearest heated surface (downstream face or crest)."""
    r, e = radius_elevation(p)
    a = np.array(DOWNSTREAM_BASE)
    b = np.array(DOWNSTREAM_TOP)
    t = b - a
    normal = np.array([t[1], -t[0]]) / np.linalg.norm(t)  # points into the dam
    to_face = float(np.dot(np.array([r, e]) - a, normal))
    return min(abs(to_face), CREST - e)


def target_temperature(nodes, tol=1e-6):
    out = np.zeros(len(nodes))
    for n, p in enumerate(nodes):
        d = depth_below_surface(p)
        if d <= tol:
            out[n] = 10.0
        elif d <= PENETRATION:
            out[n] = 5.0
    return out


def hydrostatic_loads(nodes, upstream):
    """Consistent nodal forces from linearly varying water pressure on the upstream face."""
    forces = np.zeros((len(nodes), 3))
    span = WATER_LEVEL - UPSTREAM_BASE[1]

    def pressure(n):
        return BASE_PRESSURE * max(0.0, (WATER_LEVEL - nodes[n][1]) / span)

    inward_ref = np.array(section_point(0.5, 0.5))
    for j in range(len(upstream) - 1):
        for k in range(len(upstream[0]) - 1):
            quad = (upstream[j][k], upstream[j][k + 1], upstream[j + 1][k + 1], upstream[j + 1][k])
            for tri in ((quad[0], quad[1], quad[2]), (quad[0], quad[2], quad[3])):
                p = nodes[list(tri)]
                nvec = np.cross(p[1] - p[0], p[2] - p[0])
                area = 0.5 * np.linalg.norm(nvec)
                nvec = nvec / np.linalg.norm(nvec)
                c = p.mean(axis=0)
                theta = math.atan2(-c[2], c[0])
                interior = np.array(to_xyz(inward_ref[0], inward_ref[1], theta))
                if np.dot(interior - c, nvec) < 0:
                    nvec = -nvec
                ps = [pressure(n) for n in tri]
                for a in range(3):
                    load = area * (2 * ps[a] + ps[(a + 1) % 3] + ps[(a + 2) % 3]) / 12.0
                    forces[tri[a]] += load * nvec
    return forces


def _elevation_range(r):
    """Elevations at which horizontal radius r lies inside the section."""
    lo = UPSTREAM_BASE[1] * (r - DOWNSTREAM_BASE[0]) / (UPSTREAM_BASE[0] - DOWNSTREAM_BASE[0])
    slope = (DOWNSTREAM_TOP[0] - DOWNSTREAM_BASE[0]) / DOWNSTREAM_TOP[1]
    hi = min(CREST, (r - DOWNSTREAM_BASE[0]) / slope)
    return lo, hi


def sensor_line(r, theta_deg, count):
    lo, hi = _elevation_range(r)
    theta = math.radians(theta_deg)
    return [to_xyz(r, lo + (hi - lo) * k / (count + 1), theta) for k in range(1, count + 1)]


PLANES = (11.25, 22.5, 33.75)


def layout(name):
    """Sensor positions for the 27-, 36- and 59-sensor analogs."""
    pts = []
    if name in ("27", "36"):
        for th in PLANES:
            pts += sensor_line(155.0, th, 4)
            pts += sensor_line(222.0, th, 5)
        if name == "36":
            for th in PLANES:
                pts += sensor_line(100.0, th, 3)
    elif name == "59":
        for th in PLANES:
            pts += sensor_line(100.0, th, 3)
            pts += sensor_line(127.0, th, 3)
            pts += sensor_line(222.0, th, 5)
        for th in (5.0, 13.0, 22.5, 32.0, 40.0):
            pts += sensor_line(188.5, th, 4)
        for th in (15.0, 30.0):
            pts += sensor_line(155.0, th, 3)
    else:
        raise ValueError(name)
    return pts
