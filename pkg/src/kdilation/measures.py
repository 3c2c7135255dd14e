"""Witness points, time-spread empirical measures and truncated integrals.

The pipeline here follows the constructive argument linking volume growth
to Lyapunov exponents:

1. :func:`witness_point` picks the quadrature node of a disk whose k-cocycle
   norm at time ``n`` is largest.  By pigeonhole it is at least the discrete
   volume ratio of the disk.
2. :func:`spread_in_time` cuts the orbit of the witness into blocks of length
   ``m`` in the ``m`` possible ways and measures the boundary terms ``a_l`` and
   ``b_l`` together with the block average against the orbit measure.
3. :func:`integrate_log_norm` integrates the truncated block log norm
   ``max(log|Λ^k T_y f^m|, -r)`` against an :class:`EmpiricalMeasure`.
"""

import hashlib
import os
import tempfile
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from ._validation import check_k, check_point
from .exterior import cocycle_log_norms
from .systems import iterate_many, lipschitz_bound
from .volume import DegenerateDiskError, disk_nodes, log_volume, log_volume_trail

__all__ = [
    "WitnessResult",
    "EmpiricalMeasure",
    "SpreadReport",
    "MeasureCache",
    "witness_point",
    "empirical_measure",
    "block_log_norms",
    "spread_in_time",
    "integrate_log_norm",
    "trig_observables",
    "invariance_residual",
]


@dataclass(frozen=True)
class WitnessResult:
    u_star: np.ndarray
    x_witness: np.ndarray
    n: int
    k: int
    log_cocycle: float
    log_ratio: float
    node_index: int
    floored: bool = False

    @property
    def epsilon(self):
        """``(log_ratio - log_cocycle) / n``; nonpositive by pigeonhole."""
        return (self.log_ratio - self.log_cocycle) / self.n


def witness_point(system, disk, n, k, grid):
    """Node of ``disk`` maximising ``log|Λ^k T_{σ(u)} f^n|``.

    Ties go to the lowest node index (lexicographic node order).
    """
    if n < 1:
        raise ValueError(f"witness_point needs n >= 1, got {n}")
    k = check_k(k, system.d)
    if disk.k != k:
        raise ValueError(f"disk has k={disk.k}, expected {k}")
    X, _ = disk_nodes(system, disk, grid)
    values, floored = cocycle_log_norms(system, X, n, k)
    if np.all(floored):
        raise DegenerateDiskError("cocycle is singular at every node")
    i = int(np.argmax(values))
    log_ratio = float(log_volume_trail(system, disk, [n], grid)[0] - log_volume(disk, grid))
    return WitnessResult(
        u_star=grid.nodes[i],
        x_witness=X[i],
        n=int(n),
        k=k,
        log_cocycle=float(values[i]),
        log_ratio=log_ratio,
        node_index=i,
        floored=bool(floored[i]),
    )


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniform Dirac comb on ``f^p(x)``, ``p = 0..n_l-m``, each atom of mass ``1/n_l``."""

    atoms: np.ndarray = field(repr=False)
    n_l: int
    m: int

    def __post_init__(self):
        if len(self.atoms) != self.n_l - self.m + 1:
            raise ValueError(
                f"expected {self.n_l - self.m + 1} atoms for n_l={self.n_l}, m={self.m}, "
                f"got {len(self.atoms)}"
            )

    @property
    def atom_weight(self):
        return 1.0 / self.n_l

    @property
    def mass(self):
        return len(self.atoms) / self.n_l


def empirical_measure(system, x, n_l, m, cache=None):
    """Orbit measure of ``x`` for block length ``m`` (``1 <= m <= n_l``)."""
    x = check_point(system, x)
    if not 1 <= m <= n_l:
        raise ValueError(f"need 1 <= m <= n_l, got m={m}, n_l={n_l}")
    atoms = None
    if cache is not None:
        atoms = cache.load(system, x, n_l, m)
    if atoms is None:
        atoms = iterate_many(system, x[None, :], n_l - m)[:, 0, :]
        if cache is not None:
            cache.store(system, x, n_l, m, atoms)
    return EmpiricalMeasure(atoms, int(n_l), int(m))


class MeasureCache:
    """Binary ``.npy`` cache of measure atoms.

    Keys hash the system id and parameters, the exact bytes of the start
    point and ``(n_l, m)``; loaded atoms are bit-identical to computed ones.
    """

    def __init__(self, path):
        self.path = os.fspath(path)
        os.makedirs(self.path, exist_ok=True)

    def _file(self, system, x, n_l, m):
        h = hashlib.sha256()
        h.update(system.id.encode())
        h.update(repr(sorted(system.params.items())).encode())
        h.update(np.ascontiguousarray(x, dtype="<f8").tobytes())
        h.update(f"{n_l}:{m}".encode())
        return os.path.join(self.path, h.hexdigest()[:32] + ".npy")

    def load(self, system, x, n_l, m):
        fname = self._file(system, x, n_l, m)
        if not os.path.exists(fname):
            return None
        return np.load(fname)

    def store(self, system, x, n_l, m, atoms):
        fname = self._file(system, x, n_l, m)
        fd, tmp = tempfile.mkstemp(dir=self.path, suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            np.save(fh, np.asarray(atoms, dtype="<f8"))
        os.replace(tmp, fname)


def block_log_norms(measure, system, m, k):
    """``log|Λ^k T_y f^m|`` for every atom ``y`` of the measure."""
    return cocycle_log_norms(system, measure.atoms, m, k)[0]


def integrate_log_norm(measure, system, m, k, r):
    """``(1/m) ∫ max(log|Λ^k T_y f^m|, -r) dν``.

    Nonincreasing in ``r``; equal to the untruncated integral once ``-r`` is
    below every atom value.
    """
    if r < 0:
        raise ValueError(f"truncation r must be nonnegative, got {r}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    values = np.maximum(block_log_norms(measure, system, m, k), -float(r))
    return float(measure.atom_weight * np.sum(values) / m)


@dataclass(frozen=True)
class SpreadReport:
    """Bookkeeping of the m-way cutting of a witness orbit.

    ``lhs`` is the witness growth rate ``log_cocycle / n_l``.  The summed
    telescoping inequality reads ``lhs <= a_l + middle + b_l`` and
    ``eps_prime = a_l + b_l + witness_deficit`` so that
    ``d_k - eps_prime <= middle`` holds whenever the telescoping does.
    """

    n_l: int
    m: int
    k: int
    q: Tuple[int, ...]
    r: Tuple[int, ...]
    a_l: float
    b_l: float
    middle: float
    lhs: float
    bound_L: float
    witness_deficit: float
    eps_prime: float
    residue_rhs: Tuple[float, ...]
    log_cocycle: float

    @property
    def boundary_bound(self):
        """Upper bound ``(k m^2 / (m n_l)) log L`` on each of ``a_l`` and ``b_l``."""
        return self.k * self.m ** 2 / (self.m * self.n_l) * np.log(self.bound_L)

    @property
    def telescoping_gap(self):
        return self.a_l + self.middle + self.b_l - self.lhs

    def to_dict(self):
        return {
            "n_l": self.n_l,
            "m": self.m,
            "k": self.k,
            "q": list(self.q),
            "r": list(self.r),
            "a_l": self.a_l,
            "b_l": self.b_l,
            "middle": self.middle,
            "lhs": self.lhs,
            "bound_L": self.bound_L,
            "boundary_bound": self.boundary_bound,
            "witness_deficit": self.witness_deficit,
            "eps_prime": self.eps_prime,
            "telescoping_gap": self.telescoping_gap,
        }


def spread_in_time(system, witness, m, k, floor_r=50.0, d_k=None, L=None):
    """Cut the witness orbit into m-blocks and build the orbit measure.

    ``floor_r`` is a per-iterate truncation: block log norms are floored at
    ``-floor_r * m``.  ``d_k`` is the dilation estimate the witness deficit is
    measured against (defaults to the witness rate itself, deficit 0).
    ``L`` defaults to :func:`lipschitz_bound`.

    Returns ``(SpreadReport, EmpiricalMeasure)``.
    """
    k = check_k(k, system.d)
    n_l = witness.n
    if not 1 <= m < n_l:
        raise ValueError(f"spread_in_time needs 1 <= m < n_l, got m={m}, n_l={n_l}")
    x = witness.x_witness
    orbit = iterate_many(system, x[None, :], n_l)[:, 0, :]
    measure = EmpiricalMeasure(orbit[: n_l - m + 1], n_l, m)

    qr = [divmod(n_l - i, m) for i in range(m)]
    q = tuple(a for a, _ in qr)
    r = tuple(b for _, b in qr)

    def single(point, steps):
        return float(cocycle_log_norms(system, point[None, :], steps, k)[0][0])

    tail = [single(orbit[i + m * q[i]], r[i]) for i in range(m)]
    head = [single(x, i) for i in range(m)]
    a_l = sum(tail) / (m * n_l)
    b_l = sum(head) / (m * n_l)

    blocks = np.maximum(block_log_norms(measure, system, m, k), -float(floor_r) * m)
    middle = float(measure.atom_weight * blocks.sum() / m)
    residue_rhs = tuple(
        float(tail[i] + blocks[i::m][: q[i]].sum() + head[i]) for i in range(m)
    )

    lhs = witness.log_cocycle / n_l
    deficit = 0.0 if d_k is None else float(d_k) - lhs
    bound_L = lipschitz_bound(system) if L is None else float(L)
    report = SpreadReport(
        n_l=n_l,
        m=m,
        k=k,
        q=q,
        r=r,
        a_l=a_l,
        b_l=b_l,
        middle=middle,
        lhs=lhs,
        bound_L=bound_L,
        witness_deficit=deficit,
        eps_prime=a_l + b_l + deficit,
        residue_rhs=residue_rhs,
        log_cocycle=witness.log_cocycle,
    )
    return report, measure


def trig_observables(d, count, seed, max_freq=3):
    """Seeded integer wave vectors (nonzero) and phases for test observables."""
    rng = np.random.default_rng(seed)
    waves = np.zeros((count, d), dtype=int)
    for j in range(count):
        while not waves[j].any():
            waves[j] = rng.integers(-max_freq, max_freq + 1, size=d)
    phases = rng.uniform(0.0, 2 * np.pi, size=count)
    return waves, phases


def _observable_residuals(measure, system, waves, phases):
    lo = np.asarray(system.domain.lo)
    hi = np.asarray(system.domain.hi)
    Y = measure.atoms
    FY = system.step(Y)

    def g(Z):
        return np.cos(2 * np.pi * ((Z - lo) / (hi - lo)) @ np.asarray(waves, float).T + phases)

    return np.abs(measure.atom_weight * (g(FY) - g(Y)).sum(axis=0))


def invariance_residual(measure, system, test_functions=20, seed=0):
    """``max_g |∫ g∘f dν - ∫ g dν|`` over seeded trigonometric observables."""
    if test_functions < 1:
        raise ValueError("test_functions must be >= 1")
    waves, phases = trig_observables(system.d, test_functions, seed)
    return float(np.max(_observable_residuals(measure, system, waves, phases)))
