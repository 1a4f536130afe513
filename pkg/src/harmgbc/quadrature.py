"""Symmetric quadrature rules on triangles, in barycentric form.

Weights are normalized to sum to 1; integrals are `area * sum(w_q f(b_q))`.
Each rule is exact for polynomials up to its key degree.
"""

import numpy as np


def _perm3(a, b, c):
    return [(a, b, c), (b, c, a), (c, a, b)]


def _perm6(a, b, c):
    return _perm3(a, b, c) + _perm3(a, c, b)


def _rule(points, weights):
    pts = np.array(points, dtype=float)
    w = np.array(weights, dtype=float)
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


_RULES = {
    1: _rule([(1 / 3, 1 / 3, 1 / 3)], [1.0]),
    2: _rule(_perm3(2 / 3, 1 / 6, 1 / 6), [1 / 3] * 3),
    4: _rule(
        _perm3(1 - 2 * 0.445948490915965, 0.445948490915965, 0.445948490915965)
        + _perm3(1 - 2 * 0.091576213509771, 0.091576213509771, 0.091576213509771),
        [0.223381589678011] * 3 + [0.109951743655322] * 3,
    ),
    6: _rule(
        _perm3(0.501426509658179, 0.249286745170910, 0.249286745170910)
        + _perm3(0.873821971016996, 0.063089014491502, 0.063089014491502)
        + _perm6(0.053145049844816, 0.310352451033785, 0.636502499121399),
        [0.116786275726379] * 3 + [0.050844906370207] * 3
        + [0.082851075618374] * 6,
    ),
}

MAX_DEGREE = max(_RULES)


def rule(min_degree):
    """Smallest stored rule exact for polynomials of the given degree."""
    for d in sorted(_RULES):
        if d >= min_degree:
            return _RULES[d]
    raise ValueError(f"no quadrature rule of degree {min_degree} (max {MAX_DEGREE})")


def rule_id(min_degree):
    """Stable identifier of the rule `rule(min_degree)` returns, for manifests."""
    for d in sorted(_RULES):
        if d >= min_degree:
            return f"tri-sym-deg{d}-{len(_RULES[d][1])}pt"
    raise ValueError(f"no quadrature rule of degree {min_degree} (max {MAX_DEGREE})")


def monomial_integral(i, j, k):
    """Exact integral of b0^i b1^j b2^k over a unit-area triangle.

    Classical formula: 2A * i! j! k! / (i + j + k + 2)! with A = 1.
    """
    from math import factorial

    return 2.0 * factorial(i) * factorial(j) * factorial(k) / factorial(i + j + k + 2)
