"""k-volumes of parametrized disks and estimation of the k-dilation.

A disk is a map ``σ: [0,1]^k -> M``; its k-volume is the integral of
``|Λ^k T_u σ|`` over the unit cube, evaluated here with the midpoint rule.
The volume of an iterate ``f^n ∘ σ`` is obtained node by node by pushing the
tangent frame ``T_u σ`` through the QR-renormalized cocycle, which gives
the chain-rule integrand exactly (no upper bound is involved).
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from ._parallel import parallel_map
from ._validation import check_k, check_schedule
from .exterior import LOG_FLOOR, _orthonormalize, exterior_log_norms

__all__ = [
    "DegenerateDiskError",
    "PerturbTerm",
    "Disk",
    "DiskFamily",
    "QuadratureGrid",
    "DilationEstimate",
    "default_grid",
    "disk_nodes",
    "log_volume",
    "log_iterated_volume",
    "log_volume_trail",
    "estimate_dilation",
    "default_disk_family",
]

DEFAULT_SCALE = 0.1


class DegenerateDiskError(ArithmeticError):
    """Every quadrature node of a disk has a singular tangent map."""


@dataclass(frozen=True)
class PerturbTerm:
    """One term ``amplitude * sin(2π <wave, u> + phase)`` of a disk perturbation."""

    amplitude: Tuple[float, ...]
    wave: Tuple[int, ...]
    phase: float = 0.0


@dataclass(frozen=True)
class Disk:
    """``σ(u) = base + scale * frame @ (u - 1/2) + perturb(u)``."""

    base: np.ndarray
    frame: np.ndarray
    scale: float = DEFAULT_SCALE
    perturb: Tuple[PerturbTerm, ...] = ()
    id: str = "disk"

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float).reshape(-1)
        frame = np.asarray(self.frame, dtype=float)
        if frame.ndim == 1:
            frame = frame[:, None]
        if frame.shape[0] != base.shape[0] or frame.shape[1] > frame.shape[0]:
            raise ValueError(f"frame shape {frame.shape} incompatible with base {base.shape}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        norms = np.linalg.norm(frame, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("frame columns must have unit norm")
        G = frame.T @ frame
        off = np.abs(G - np.diag(np.diag(G)))
        if np.any(off > 0.99):
            raise ValueError("frame columns are nearly parallel (|dot| > 0.99)")
        for term in self.perturb:
            if len(term.amplitude) != base.shape[0] or len(term.wave) != frame.shape[1]:
                raise ValueError("perturbation term has the wrong shape")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "frame", frame)
        object.__setattr__(self, "perturb", tuple(self.perturb))

    @property
    def k(self):
        return self.frame.shape[1]

    @property
    def d(self):
        return self.frame.shape[0]

    def _phases(self, U):
        W = np.array([t.wave for t in self.perturb], dtype=float)  # (P, k)
        ph = np.array([t.phase for t in self.perturb])
        A = np.array([t.amplitude for t in self.perturb], dtype=float)  # (P, d)
        return 2 * np.pi * U @ W.T + ph, W, A

    def points(self, U):
        """Raw (unwrapped) image of parameter points ``U`` of shape (N, k)."""
        U = np.asarray(U, dtype=float)
        X = self.base + self.scale * (U - 0.5) @ self.frame.T
        if self.perturb:
            arg, _, A = self._phases(U)
            X = X + np.sin(arg) @ A
        return X

    def tangents(self, U):
        """Tangent maps ``T_u σ`` for each row of ``U``: shape (N, d, k)."""
        U = np.asarray(U, dtype=float)
        T = np.broadcast_to(self.scale * self.frame, (U.shape[0], self.d, self.k)).copy()
        if self.perturb:
            arg, W, A = self._phases(U)
            # d/du_j of a sin(2π w.u + φ) = a 2π w_j cos(...)
            T += np.einsum("np,pd,pk->ndk", np.cos(arg), A, 2 * np.pi * W)
        return T

    def to_record(self):
        return {
            "id": self.id,
            "base": self.base.tolist(),
            "frame": self.frame.tolist(),
            "scale": float(self.scale),
            "perturbation": [
                {"amplitude": list(t.amplitude), "wave": list(t.wave), "phase": t.phase}
                for t in self.perturb
            ],
        }

    @classmethod
    def from_record(cls, rec):
        terms = tuple(
            PerturbTerm(tuple(t["amplitude"]), tuple(int(w) for w in t["wave"]), t["phase"])
            for t in rec.get("perturbation", ())
        )
        return cls(np.array(rec["base"]), np.array(rec["frame"]), rec["scale"], terms, rec["id"])


@dataclass(frozen=True)
class DiskFamily:
    disks: Tuple[Disk, ...]

    def __len__(self):
        return len(self.disks)

    def __iter__(self):
        return iter(self.disks)

    def __getitem__(self, i):
        return self.disks[i]

    def to_records(self):
        return [disk.to_record() for disk in self.disks]

    @classmethod
    def from_records(cls, records):
        return cls(tuple(Disk.from_record(r) for r in records))


@dataclass(frozen=True)
class QuadratureGrid:
    """Midpoint rule on ``[0,1]^k`` with ``nodes_per_axis`` cells per axis."""

    nodes_per_axis: int
    k: int

    def __post_init__(self):
        if self.nodes_per_axis < 1 or self.k < 1:
            raise ValueError("grid needs nodes_per_axis >= 1 and k >= 1")

    @property
    def nodes(self):
        N = self.nodes_per_axis
        axis = (np.arange(N) + 0.5) / N
        mesh = np.meshgrid(*([axis] * self.k), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    @property
    def size(self):
        return self.nodes_per_axis ** self.k

    @property
    def weight(self):
        return 1.0 / self.size

    @property
    def log_weight(self):
        return -self.k * np.log(self.nodes_per_axis)


def default_grid(k):
    if k <= 2:
        n = 17
    elif k == 3:
        n = 9
    else:
        n = 5
    return QuadratureGrid(n, k)


def _check_pair(disk, grid, system=None):
    if grid.k != disk.k:
        raise ValueError(f"grid dimension {grid.k} does not match disk dimension {disk.k}")
    if system is not None and disk.d != system.d:
        raise ValueError(f"disk lives in dimension {disk.d}, system has d={system.d}")


def disk_nodes(system, disk, grid):
    """Quadrature nodes mapped into the domain, with their tangent maps."""
    _check_pair(disk, grid, system)
    U = grid.nodes
    X = disk.points(U)
    if system.domain.is_torus:
        X = system.domain.wrap(X)
    elif not np.all(system.domain.contains(X)):
        raise ValueError(f"disk {disk.id!r} leaves the domain {system.domain.describe()}")
    return X, disk.tangents(U)


def _node_log_volumes(T, k):
    vals, floored = exterior_log_norms(T, k)
    if np.all(floored):
        raise DegenerateDiskError("all quadrature nodes have a singular tangent map")
    return vals


def log_volume(disk, grid):
    """``log V(σ)`` by log-sum-exp over the quadrature nodes."""
    _check_pair(disk, grid)
    vals = _node_log_volumes(disk.tangents(grid.nodes), disk.k)
    return float(logsumexp(vals + grid.log_weight))


def _log_abs_det(J):
    sign, logdet = np.linalg.slogdet(J)
    return np.where(sign == 0, LOG_FLOOR, logdet)


def log_volume_trail(system, disk, ns, grid):
    """``log V(f^n ∘ σ)`` for every ``n`` in the increasing list ``ns``.

    One pass to ``max(ns)``; the node frames are advanced together.
    """
    ns = check_schedule(ns, "ns")
    X, T = disk_nodes(system, disk, grid)
    base = _node_log_volumes(T, disk.k)
    Q, _, _ = _orthonormalize(T)
    acc = np.zeros(X.shape[0])
    out = []
    t = 0
    square = disk.k == system.d
    for n in ns:
        while t < n:
            if square:
                # a full frame expands by |det J| whatever its orientation
                acc += _log_abs_det(system.jac(X))
            else:
                Q, logs, _ = _orthonormalize(system.jac(X) @ Q)
                acc += logs.sum(axis=-1)
            X = system.step(X)
            t += 1
        out.append(float(logsumexp(base + acc + grid.log_weight)))
    return np.array(out)


def log_iterated_volume(system, disk, n, grid):
    """``log V(f^n ∘ σ)``; equals :func:`log_volume` at ``n = 0``."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    return float(log_volume_trail(system, disk, [n], grid)[0])


@dataclass(frozen=True)
class DilationEstimate:
    """Per-n best log volume ratios and the two growth-rate estimators."""

    k: int
    records: Tuple[Tuple[int, float, str], ...]
    d_k_slope: float
    d_k_last: float
    method: str = "slope"
    ratios: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def d_k_hat(self):
        return self.d_k_slope if self.method == "slope" else self.d_k_last

    @property
    def schedule(self):
        return [r[0] for r in self.records]

    @property
    def best_log_ratios(self):
        return np.array([r[1] for r in self.records])


def _slope_fit(ns, values):
    ns = np.asarray(ns, dtype=float)
    if len(ns) == 1:
        return float(values[0] / ns[0]) if ns[0] > 0 else 0.0
    start = min(len(ns) // 2, len(ns) - 2)
    x, y = ns[start:], np.asarray(values)[start:]
    xm = x.mean()
    return float(np.sum((x - xm) * (y - y.mean())) / np.sum((x - xm) ** 2))


def estimate_dilation(system, k, family, schedule, grid=None, method="slope"):
    """Estimate ``d_k`` from the best volume ratio over ``family``.

    For each ``n`` the best ratio ``log V(f^n∘σ) - log V(σ)`` over the family
    is recorded with the winning disk.  ``d_k_slope`` is the least-squares
    slope over the upper half of the schedule, ``d_k_last`` the best ratio
    over ``n`` at the largest ``n``.
    """
    k = check_k(k, system.d)
    schedule = check_schedule(schedule, "schedule", minimum=1)
    if method not in ("slope", "last"):
        raise ValueError(f"method must be 'slope' or 'last', got {method!r}")
    if len(family) == 0:
        raise DegenerateDiskError("empty disk family")
    grid = default_grid(k) if grid is None else grid
    for disk in family:
        if disk.k != k:
            raise ValueError(f"disk {disk.id!r} has k={disk.k}, expected {k}")

    def ratios_for(disk):
        try:
            return log_volume_trail(system, disk, schedule, grid) - log_volume(disk, grid)
        except DegenerateDiskError:
            return np.full(len(schedule), -np.inf)

    ratios = np.array(parallel_map(ratios_for, family.disks))
    if not np.all(np.isfinite(ratios.max(axis=0))):
        raise DegenerateDiskError("every disk in the family is degenerate")
    best = np.argmax(ratios, axis=0)
    records = tuple(
        (n, float(ratios[b, j]), family[b].id) for j, (n, b) in enumerate(zip(schedule, best))
    )
    values = [r[1] for r in records]
    return DilationEstimate(
        k=k,
        records=records,
        d_k_slope=_slope_fit(schedule, values),
        d_k_last=float(values[-1] / schedule[-1]),
        method=method,
        ratios=ratios,
    )


def default_disk_family(system, k, budget=4, seed=0, scale=DEFAULT_SCALE):
    """Coordinate-plane disks at the domain center plus ``budget`` random ones."""
    k = check_k(k, system.d)
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    d = system.d
    center = system.domain.center()
    eye = np.eye(d)
    disks = [
        Disk(center, eye[:, list(c)], scale, (), "axis-" + "-".join(map(str, c)))
        for c in combinations(range(d), k)
    ]
    rng = np.random.default_rng(seed)
    lo = np.asarray(system.domain.lo)
    hi = np.asarray(system.domain.hi)
    # keeps affine disks inside boxes: |scale * frame @ (u - 1/2)| <= scale * k / 2
    margin = 0.0 if system.domain.is_torus else 0.5 * scale * k
    for b in range(budget):
        base = lo + margin + (hi - lo - 2 * margin) * rng.uniform(size=d)
        Q, _ = np.linalg.qr(rng.standard_normal((d, k)))
        disks.append(Disk(base, Q, scale, (), f"rand-{b}"))
    return DiskFamily(tuple(disks))
