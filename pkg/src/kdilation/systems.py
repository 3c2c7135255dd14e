"""Discrete dynamical systems on flat tori and trapping boxes.

A :class:`SystemDef` bundles a vectorised map, its analytic Jacobian and the
domain it lives on.  Maps and Jacobians accept stacked points of shape
``(..., d)`` so orbits of many start points can be advanced together.

The catalog at the bottom of the module provides the test systems used
throughout the package.  Linear toral maps come with exact Lyapunov
exponents; the nonlinear ones do not.
"""

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional, Tuple

import numpy as np
from scipy.stats import qmc

from ._validation import check_point, check_points

__all__ = [
    "Domain",
    "SystemDef",
    "Orbit",
    "evaluate",
    "jacobian",
    "iterate",
    "iterate_many",
    "lipschitz_bound",
    "fd_jacobian",
    "make_system",
    "catalog_entries",
    "CatalogEntry",
]


@dataclass(frozen=True)
class Domain:
    """Either the flat torus [0,1)^d or an axis-aligned box ``[lo, hi]``."""

    kind: str
    lo: Tuple[float, ...] = ()
    hi: Tuple[float, ...] = ()

    @classmethod
    def torus(cls, d):
        return cls("torus", (0.0,) * d, (1.0,) * d)

    @classmethod
    def box(cls, lo, hi):
        lo = tuple(float(v) for v in lo)
        hi = tuple(float(v) for v in hi)
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"invalid box bounds lo={lo}, hi={hi}")
        return cls("box", lo, hi)

    @property
    def is_torus(self):
        return self.kind == "torus"

    def wrap(self, X):
        """Reduce points into the domain (torus only; boxes are trapping)."""
        if not self.is_torus:
            return X
        W = X - np.floor(X)
        # x - floor(x) rounds up to exactly 1.0 for tiny negative x
        return np.where(W >= 1.0, 0.0, W)

    def contains(self, X):
        X = np.asarray(X, dtype=float)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        if self.is_torus:
            return np.all((X >= 0.0) & (X < 1.0), axis=-1)
        return np.all((X >= lo) & (X <= hi), axis=-1)

    def center(self):
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    def from_unit(self, U):
        """Affine image of points of the unit cube in the domain."""
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return lo + (hi - lo) * np.asarray(U, dtype=float)

    def describe(self):
        if self.is_torus:
            return "torus"
        return f"box(lo={list(self.lo)}, hi={list(self.hi)})"


@dataclass(frozen=True)
class SystemDef:
    """A self-describing discrete dynamical system.

    ``map_rule`` returns the raw (unwrapped) image; :meth:`step` applies the
    torus reduction.  Keeping the raw rule smooth lets finite differences
    check the Jacobian without tripping over the wrap.
    """

    id: str
    d: int
    domain: Domain
    map_rule: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    jacobian_rule: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    lipschitz_cap: Optional[float] = None
    params: Mapping[str, float] = field(default_factory=dict)
    ground_truth: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    def step(self, X):
        return self.domain.wrap(self.map_rule(X))

    def jac(self, X):
        return self.jacobian_rule(X)


@dataclass(frozen=True)
class Orbit:
    start: np.ndarray
    points: np.ndarray = field(repr=False)

    @property
    def length(self):
        return len(self.points) - 1


def evaluate(system, x):
    x = check_point(system, x)
    return system.step(x)


def jacobian(system, x):
    x = check_point(system, x)
    return np.asarray(system.jac(x), dtype=float).reshape(system.d, system.d)


def iterate(system, x, n):
    """Orbit ``x, f(x), ..., f^n(x)``."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    x = check_point(system, x)
    return Orbit(start=x, points=iterate_many(system, x[None, :], n)[:, 0, :])


def iterate_many(system, X, n):
    """Advance a batch of points; returns an array of shape ``(n+1, B, d)``."""
    X = check_points(system, X)
    out = np.empty((n + 1,) + X.shape)
    out[0] = X
    for p in range(n):
        out[p + 1] = system.step(out[p])
    return out


def _operator_norms(J):
    return np.linalg.svd(J, compute_uv=False)[..., 0]


def lipschitz_bound(system, samples=4096):
    """``L = max(sup_x |T_x f|, 1)``.

    Uses the analytic cap when the system declares one.  Otherwise the
    supremum is estimated over the first ``samples`` points of an
    unscrambled Halton sequence; successive prefixes are nested, so the
    estimate never decreases as ``samples`` grows.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if system.lipschitz_cap is not None:
        return max(float(system.lipschitz_cap), 1.0)
    U = qmc.Halton(d=system.d, scramble=False).random(samples)
    X = system.domain.from_unit(U)
    return max(1.0, float(np.max(_operator_norms(system.jac(X)))))


def fd_jacobian(system, x, h=1e-6):
    """Central finite-difference Jacobian of the raw map at ``x``."""
    x = np.asarray(x, dtype=float)
    d = system.d
    J = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        J[:, j] = (system.map_rule(x + e) - system.map_rule(x - e)) / (2 * h)
    return J


# --------------------------------------------------------------------------
# catalog

TWO_PI = 2.0 * np.pi
CAT = np.array([[2.0, 1.0], [1.0, 1.0]])
GOLDEN_SQ = (3.0 + np.sqrt(5.0)) / 2.0


def _linear(A, domain, sid, params, cap, truth):
    A = np.asarray(A, dtype=float)
    d = A.shape[0]

    def rule(X):
        return X @ A.T

    def jac(X):
        X = np.asarray(X)
        return np.broadcast_to(A, X.shape[:-1] + (d, d)).copy()

    return SystemDef(sid, d, domain, rule, jac, cap, params, truth)


def _identity(d=2):
    d = int(d)
    return _linear(np.eye(d), Domain.torus(d), "identity", {"d": d}, 1.0, (0.0,) * d)


def _diag_toral(a=2, b=3):
    a, b = int(a), int(b)
    if a == 0 or b == 0:
        raise ValueError("diag_toral needs nonzero integer entries")
    truth = tuple(sorted((np.log(abs(a)), np.log(abs(b))), reverse=True))
    return _linear(np.diag([a, b]), Domain.torus(2), "diag_toral", {"a": a, "b": b},
                   float(max(abs(a), abs(b))), truth)


def _cat_map():
    lam = np.log(GOLDEN_SQ)
    return _linear(CAT, Domain.torus(2), "cat_map", {}, GOLDEN_SQ, (lam, -lam))


def _doubling():
    return _linear(np.array([[2.0]]), Domain.torus(1), "doubling", {}, 2.0, (np.log(2.0),))


def _doubling_nd(d=3):
    d = int(d)
    return _linear(2.0 * np.eye(d), Domain.torus(d), "doubling_nd", {"d": d}, 2.0,
                   (np.log(2.0),) * d)


def _contraction(rate=0.5):
    rate = float(rate)
    if not 0.0 < rate < 1.0:
        raise ValueError("contraction rate must lie in (0, 1)")
    return _linear(rate * np.eye(2), Domain.box((-1.0, -1.0), (1.0, 1.0)), "contraction",
                   {"rate": rate}, rate, (np.log(rate),) * 2)


def _standard_map(K=1.0):
    K = float(K)

    def rule(X):
        x, p = X[..., 0], X[..., 1]
        p1 = p + K / TWO_PI * np.sin(TWO_PI * x)
        return np.stack([x + p1, p1], axis=-1)

    def jac(X):
        c = K * np.cos(TWO_PI * X[..., 0])
        one = np.ones_like(c)
        return np.stack([np.stack([1.0 + c, one], -1), np.stack([c, one], -1)], -2)

    # |J| is convex in c = K cos(2 pi x), so its sup sits at c = +-K
    cap = max(np.linalg.norm(np.array([[1 + c, 1], [c, 1]]), 2) for c in (K, -K))
    return SystemDef("standard_map", 2, Domain.torus(2), rule, jac, float(cap), {"K": K})


def _perturbed_cat(eps=0.02):
    eps = float(eps)
    if abs(eps) > 0.05:
        raise ValueError("perturbed_cat requires |eps| <= 0.05")

    def rule(X):
        x, y = X[..., 0], X[..., 1]
        h = np.stack([x + eps * np.sin(TWO_PI * y), y + eps * np.sin(TWO_PI * x)], -1)
        return h @ CAT.T

    def jac(X):
        cx = TWO_PI * eps * np.cos(TWO_PI * X[..., 0])
        cy = TWO_PI * eps * np.cos(TWO_PI * X[..., 1])
        one = np.ones_like(cx)
        Dh = np.stack([np.stack([one, cy], -1), np.stack([cx, one], -1)], -2)
        return CAT @ Dh

    a = TWO_PI * eps
    cap = max(np.linalg.norm(CAT @ np.array([[1, sy * a], [sx * a, 1]]), 2)
              for sx in (-1, 1) for sy in (-1, 1))
    return SystemDef("perturbed_cat", 2, Domain.torus(2), rule, jac, float(cap), {"eps": eps})


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    d: int
    params: Mapping[str, float]
    description: str
    builder: Callable[..., SystemDef] = field(repr=False)


_CATALOG = {
    "identity": CatalogEntry("identity", 2, {"d": 2}, "identity map on T^d", _identity),
    "diag_toral": CatalogEntry("diag_toral", 2, {"a": 2, "b": 3},
                               "diagonal toral endomorphism diag(a, b) mod 1", _diag_toral),
    "cat_map": CatalogEntry("cat_map", 2, {}, "Arnold cat map [[2,1],[1,1]] mod 1", _cat_map),
    "doubling": CatalogEntry("doubling", 1, {}, "doubling map x -> 2x mod 1", _doubling),
    "doubling_nd": CatalogEntry("doubling_nd", 3, {"d": 3},
                                "d-dimensional doubling x -> 2x mod 1", _doubling_nd),
    "standard_map": CatalogEntry("standard_map", 2, {"K": 1.0},
                                 "Chirikov standard map on T^2", _standard_map),
    "perturbed_cat": CatalogEntry("perturbed_cat", 2, {"eps": 0.02},
                                  "cat map composed with a trigonometric shear", _perturbed_cat),
    "contraction": CatalogEntry("contraction", 2, {"rate": 0.5},
                                "linear contraction on the box [-1,1]^2", _contraction),
}


def catalog_entries():
    return list(_CATALOG.values())


def make_system(system_id, **params):
    """Build a catalog system from its id and a flat parameter table."""
    try:
        entry = _CATALOG[system_id]
    except KeyError:
        raise ValueError(
            f"unknown system {system_id!r}; known: {', '.join(sorted(_CATALOG))}"
        ) from None
    unknown = set(params) - set(entry.params)
    if unknown:
        raise ValueError(f"system {system_id!r} has no parameter(s) {sorted(unknown)}")
    return entry.builder(**params)
