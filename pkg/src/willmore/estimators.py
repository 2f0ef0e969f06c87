"""scikit-learn style wrappers over the functional API.

The "samples" are surfaces: a :class:`~willmore.mcs.SurfaceChart`, a
:class:`~willmore.gallery.SurfaceSpec`, or a list of either.  Hyperparameters
live in ``__init__`` so ``get_params``/``set_params``/``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import backlund as bl
from . import mcs
from . import sequence as sq
from .gallery import SurfaceSpec
from .oracle import euclidean_energy_oracle
from .tolerances import Tolerances

FEATURES = ("W", "W_oracle", "A_norm", "Q_norm", "harmonicity", "conformality")


def _as_surfaces(X) -> list:
    items = X if isinstance(X, (list, tuple)) else [X]
    out = []
    for item in items:
        if isinstance(item, SurfaceSpec):
            item = item.build()
        if not isinstance(item, mcs.SurfaceChart):
            raise TypeError(f"expected SurfaceChart or SurfaceSpec, got {type(item).__name__}")
        out.append(item)
    return out


def _check_fitted(est, attr):
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


class SurfaceAnalyzer(BaseEstimator, TransformerMixin):
    """Maps surfaces to rows of scalar diagnostics (columns: ``FEATURES``)."""

    def __init__(self, tol_scale: float = 1.0, with_oracle: bool = True):
        self.tol_scale = tol_scale
        self.with_oracle = with_oracle

    def fit(self, X, y=None):
        Tolerances(self.tol_scale)  # validates
        self.feature_names_out_ = np.array(FEATURES)
        self.n_features_out_ = len(FEATURES)
        return self

    def _row(self, s):
        h = mcs.harmonicity_residual(s.chart, s.hopf, s)
        w_or = euclidean_energy_oracle(s).W if self.with_oracle else np.nan
        return [
            mcs.willmore_energy(s.chart, s.hopf),
            w_or,
            s.form_norm(s.A),
            s.form_norm(s.Q),
            max(h["dstarA"], h["dstarQ"]),
            mcs.conformality_residual(s),
        ]

    def transform(self, X):
        _check_fitted(self, "feature_names_out_")
        return np.array([self._row(s) for s in _as_surfaces(X)], dtype=float)

    def get_feature_names_out(self, input_features=None):
        _check_fitted(self, "feature_names_out_")
        return self.feature_names_out_


class BacklundTransformer(BaseEstimator, TransformerMixin):
    """Forward, backward or 1-step transform of each surface.

    ``fit`` runs the Willmore gate; ``transform`` returns the transformed
    surfaces.  Terminations are not errors here: a vanishing Hopf field gives
    ``None`` and a constant transform gives the constant line (a ``(2, 4)``
    array), mirroring the sequence driver.
    """

    def __init__(self, direction: str = "forward", tol_scale: float = 1.0, seed: int = 0, gate: bool = True):
        self.direction = direction
        self.tol_scale = tol_scale
        self.seed = seed
        self.gate = gate

    def fit(self, X, y=None):
        if self.direction not in ("forward", "backward", "one-step"):
            raise ValueError(f"direction must be forward, backward or one-step, got {self.direction!r}")
        self.tol_ = Tolerances(self.tol_scale)
        self.gate_residuals_ = [sq.willmore_gate(s, self.tol_) if self.gate else np.nan for s in _as_surfaces(X)]
        return self

    def _one(self, s):
        if self.direction == "one-step":
            return bl.one_step(s).gsharp
        step = bl.backlund_forward if self.direction == "forward" else bl.backlund_backward
        try:
            res = step(s, seed=self.seed, tol=self.tol_)
        except bl.HopfFieldVanishes:
            return None
        if res.constant:
            v = res.lines.lines
            return v[v.shape[0] // 2, v.shape[1] // 2]
        return res.surface

    def transform(self, X):
        _check_fitted(self, "tol_")
        return [self._one(s) for s in _as_surfaces(X)]


class WillmoreSequence(BaseEstimator):
    """Fits the Willmore sequence of one surface; ``ledger_`` holds the result."""

    def __init__(self, max_steps: int = 3, tol_scale: float = 1.0, seed: int = 0, threads: int = 1):
        self.max_steps = max_steps
        self.tol_scale = tol_scale
        self.seed = seed
        self.threads = threads

    def fit(self, X, y=None):
        surfaces = _as_surfaces(X)
        if len(surfaces) != 1:
            raise ValueError("WillmoreSequence fits exactly one surface")
        self.ledger_ = sq.run_sequence(surfaces[0], self.max_steps, Tolerances(self.tol_scale), seed=self.seed, threads=self.threads)
        self.classification_ = self.ledger_.classification.kind.value
        return self

    def energies(self) -> dict:
        """``{index: W}`` over the fitted ledger."""
        _check_fitted(self, "ledger_")
        return {e.index: e.W for e in self.ledger_.entries}
