"""Hand-built 40-node, 134-member truss bridge (used by build_fixtures.py)."""

import numpy as np

SPAN_X = np.arange(-20.0, 20.1, 4.0)  # 11 bottom-chord stations
TOP_X = SPAN_X[1:-1]  # 9 top-chord stations
WIDTH = 5.0
RISE = 10.0

CHORD, WEB, BRACING, SWAY = 100e-4, 50e-4, 10e-4, 1e-4  # m^2


def top_height(x):
    return RISE * (1.0 - (x / 20.0) ** 2)


def build():
    nodes = []
    index = {}
    for side, y in enumerate((0.0, WIDTH)):
        for i, x in enumerate(SPAN_X):
            index[("b", side, i)] = len(nodes)
            nodes.append((x, y, 0.0))
        for i, x in enumerate(TOP_X, start=1):
            index[("t", side, i)] = len(nodes)
            nodes.append((x, y, top_height(x)))

    members = []

    def add(a, b, area):
        members.append((index[a], index[b], area))

    nb = len(SPAN_X)
    for s in (0, 1):
        for i in range(nb - 1):
            add(("b", s, i), ("b", s, i + 1), CHORD)
        for i in range(1, nb - 2):
            add(("t", s, i), ("t", s, i + 1), CHORD)
        for i in range(1, nb - 1):
            add(("b", s, i), ("t", s, i), WEB)
        add(("b", s, 0), ("t", s, 1), CHORD)
        add(("b", s, nb - 1), ("t", s, nb - 2), CHORD)
        for i in range(1, nb - 2):
            # X-bracing in every interior panel
            add(("b", s, i), ("t", s, i + 1), WEB)
            add(("t", s, i), ("b", s, i + 1), WEB)
    for i in range(nb):
        add(("b", 0, i), ("b", 1, i), WEB)
    for i in range(1, nb - 1):
        add(("t", 0, i), ("t", 1, i), WEB)
    for i in range(nb - 1):
        add(("b", 0, i), ("b", 1, i + 1), BRACING)
    for i in range(1, nb - 2):
        add(("t", 0, i), ("t", 1, i + 1), BRACING)
    for i in (2, 5, 8):
        add(("b", 0, i), ("t", 1, i), SWAY)
        add(("b", 1, i), ("t", 0, i), SWAY)
    supports = [index[("b", s, i)] for s in (0, 1) for i in (0, nb - 1)]
    return np.array(nodes), members, supports
