"""scikit-learn style wrappers around the library functions.

The estimators are configured by plain hyperparameters (``get_params`` and
``set_params`` come from :class:`~sklearn.base.BaseEstimator`, so they clone
and grid-search like any other estimator).  Data passed to ``fit`` and
``transform`` are start points of shape ``(n_points, d)``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exterior import cocycle_log_norms
from .lyapunov import TheoremConfig, lyapunov_spectrum, verify_theorem
from .systems import SystemDef, make_system
from .volume import (
    DEFAULT_SCALE,
    Disk,
    DiskFamily,
    QuadratureGrid,
    default_disk_family,
    default_grid,
    estimate_dilation,
)

__all__ = ["DilationEstimator", "LyapunovSpectrum", "CocycleGrowth", "TheoremVerifier"]


def _resolve_system(system, system_params):
    if isinstance(system, SystemDef):
        if system_params:
            raise ValueError("system_params only apply to catalog ids")
        return system
    return make_system(system, **(system_params or {}))


def _check_points(X, system):
    X = check_array(X, dtype=np.float64, ensure_2d=False)
    if X.ndim == 1:
        X = X.reshape(-1, system.d)
    if X.shape[1] != system.d:
        raise ValueError(f"X has {X.shape[1]} features, system {system.id!r} has d={system.d}")
    return system.domain.wrap(X)


class DilationEstimator(BaseEstimator):
    """Estimate the k-dilation ``d_k`` of a system.

    ``fit(X)`` uses one affine disk per row of ``X`` (disk centers, random
    orthonormal frames drawn from ``seed``); with ``X=None`` the default
    family (coordinate-plane disks plus ``budget`` random ones) is used.
    """

    def __init__(self, system="cat_map", system_params=None, k=1,
                 schedule=(5, 10, 15, 20, 25, 30), budget=4, seed=0,
                 nodes_per_axis=None, method="slope"):
        self.system = system
        self.system_params = system_params
        self.k = k
        self.schedule = schedule
        self.budget = budget
        self.seed = seed
        self.nodes_per_axis = nodes_per_axis
        self.method = method

    def fit(self, X=None, y=None):
        system = _resolve_system(self.system, self.system_params)
        if X is None:
            family = default_disk_family(system, self.k, self.budget, self.seed)
        else:
            X = _check_points(X, system)
            rng = np.random.default_rng(self.seed)
            disks = []
            for i, base in enumerate(X):
                Q, _ = np.linalg.qr(rng.standard_normal((system.d, self.k)))
                disks.append(Disk(base, Q, DEFAULT_SCALE, (), f"x-{i}"))
            family = DiskFamily(tuple(disks))
        grid = (default_grid(self.k) if self.nodes_per_axis is None
                else QuadratureGrid(self.nodes_per_axis, self.k))
        self.estimate_ = estimate_dilation(system, self.k, family, self.schedule, grid,
                                           self.method)
        self.family_ = family
        self.d_k_ = self.estimate_.d_k_hat
        self.records_ = list(self.estimate_.records)
        return self


class LyapunovSpectrum(TransformerMixin, BaseEstimator):
    """Per-point Lyapunov spectra by the QR method.

    ``transform`` maps start points to their sorted exponents, shape
    ``(n_points, d)``.  ``fit`` stores the mean spectrum in ``exponents_``.
    """

    def __init__(self, system="cat_map", system_params=None, n=10_000, transient=1_000):
        self.system = system
        self.system_params = system_params
        self.n = n
        self.transient = transient

    def _spectra(self, X):
        system = _resolve_system(self.system, self.system_params)
        X = _check_points(X, system)
        return np.array([lyapunov_spectrum(system, x, self.n, self.transient).chis for x in X])

    def fit(self, X, y=None):
        spectra = self._spectra(X)
        self.n_features_in_ = spectra.shape[1]
        self.exponents_ = spectra.mean(axis=0)
        return self

    def transform(self, X):
        check_is_fitted(self, "exponents_")
        return self._spectra(X)


class CocycleGrowth(TransformerMixin, BaseEstimator):
    """``(1/n) log|Λ^k T_x f^n|`` per start point (a single output column)."""

    def __init__(self, system="cat_map", system_params=None, n=100, k=1):
        self.system = system
        self.system_params = system_params
        self.n = n
        self.k = k

    def fit(self, X, y=None):
        system = _resolve_system(self.system, self.system_params)
        self.n_features_in_ = _check_points(X, system).shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        system = _resolve_system(self.system, self.system_params)
        values, _ = cocycle_log_norms(system, _check_points(X, system), self.n, self.k)
        return (values / self.n)[:, None]


class TheoremVerifier(BaseEstimator):
    """End-to-end check of ``d_k <= χ_1 + ... + χ_k`` for one system and k."""

    def __init__(self, system="cat_map", system_params=None, k=1,
                 n_schedule=TheoremConfig.n_schedule, nl_schedule=TheoremConfig.nl_schedule,
                 m_list=TheoremConfig.m_list, budget=4, seed=0, nodes_per_axis=None,
                 r=50.0, tolerance=0.05, method="slope", test_functions=20):
        self.system = system
        self.system_params = system_params
        self.k = k
        self.n_schedule = n_schedule
        self.nl_schedule = nl_schedule
        self.m_list = m_list
        self.budget = budget
        self.seed = seed
        self.nodes_per_axis = nodes_per_axis
        self.r = r
        self.tolerance = tolerance
        self.method = method
        self.test_functions = test_functions

    def fit(self, X=None, y=None):
        system = _resolve_system(self.system, self.system_params)
        config = TheoremConfig(
            n_schedule=self.n_schedule,
            nl_schedule=self.nl_schedule,
            m_list=self.m_list,
            budget=self.budget,
            seed=self.seed,
            nodes_per_axis=self.nodes_per_axis,
            r=self.r,
            tolerance=self.tolerance,
            method=self.method,
            test_functions=self.test_functions,
        )
        self.report_ = verify_theorem(system, self.k, config)
        self.verdict_ = self.report_.verdict
        return self

    def score(self, X=None, y=None):
        """Margin ``Σ χ_i - d_k_hat``; nonnegative up to ``tolerance`` when the check passes."""
        check_is_fitted(self, "report_")
        return self.report_.margin
