"""Reduced-order polynomial baselines: full multivariate least-squares fits
of total degree 1..5 in the four normalized static kinematics."""

from __future__ import annotations

from itertools import product

import numpy as np
import scipy.linalg

from .base import (AXIS_NAMES, ForwardModel, Normalization, gait_matrix,
                   register_kind, row_target, rows_material)


class FitError(RuntimeError):
    """Least-squares design matrix is degenerate."""


def monomial_exponents(degree: int, n_vars: int = 4) -> np.ndarray:
    """All exponent tuples with total degree <= degree, graded then
    lexicographic — a stable ordering shared by fit, predict, and files."""
    exps = [e for e in product(range(degree + 1), repeat=n_vars) if sum(e) <= degree]
    exps.sort(key=lambda e: (sum(e), e))
    return np.array(exps, dtype=int)


def monomial_name(exponents) -> str:
    parts = []
    for name, e in zip(AXIS_NAMES, exponents):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts) if parts else "1"


def design_matrix(xn: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    design = np.ones((xn.shape[0], exponents.shape[0]))
    for v in range(xn.shape[1]):
        design *= xn[:, v:v + 1] ** exponents[None, :, v]
    return design


@register_kind
class PolynomialModel(ForwardModel):
    kind = "polynomial"

    def __init__(self, degree: int, coeffs: np.ndarray, target: str,
                 material_name: str, norm: Normalization | None = None,
                 train_mae: float = float("nan")):
        super().__init__(target, material_name, norm)
        self.degree = int(degree)
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.exponents = monomial_exponents(self.degree)
        if self.coeffs.shape != (self.exponents.shape[0],):
            raise ValueError(f"degree-{degree} polynomial needs "
                             f"{self.exponents.shape[0]} coefficients, got {self.coeffs.shape}")
        self.train_mae = float(train_mae)

    def _predict_normalized(self, xn: np.ndarray) -> np.ndarray:
        return design_matrix(xn, self.exponents) @ self.coeffs

    def _manifest_fields(self) -> dict:
        return {"degree": str(self.degree), "train_mae": repr(self.train_mae)}

    def _arrays(self):
        return [("coeffs", self.coeffs)]

    @classmethod
    def _from_saved(cls, fields, arrays):
        from .base import _norm_from_fields
        return cls(degree=int(fields["degree"]), coeffs=arrays["coeffs"],
                   target=fields["target"], material_name=fields["material"],
                   norm=_norm_from_fields(fields),
                   train_mae=float(fields.get("train_mae", "nan")))


def fit_polynomial(train_rows, degree: int, target: str) -> PolynomialModel:
    """Least-squares fit of a total-degree polynomial surface.

    Raises ValueError when there are fewer rows than monomials and FitError
    (naming the degenerate monomials) when the design matrix is
    rank-deficient despite enough rows.
    """
    if not 1 <= degree <= 5:
        raise ValueError(f"degree must be in 1..5, got {degree}")
    material_name = rows_material(train_rows)
    exponents = monomial_exponents(degree)
    n_monomials = exponents.shape[0]
    if len(train_rows) < n_monomials:
        raise ValueError(f"degree-{degree} fit needs >= {n_monomials} rows, "
                         f"got {len(train_rows)}")
    norm = Normalization()
    xn = norm.apply(gait_matrix([r.gait for r in train_rows]))
    y = np.array([row_target(r, target) for r in train_rows])
    design = design_matrix(xn, exponents)

    coeffs, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < n_monomials:
        _, _, pivots = scipy.linalg.qr(design, mode="economic", pivoting=True)
        degenerate = sorted(monomial_name(exponents[p]) for p in pivots[rank:])
        raise FitError(f"rank-deficient degree-{degree} design "
                       f"(rank {rank} < {n_monomials}); degenerate monomials: "
                       + ", ".join(degenerate))

    train_mae = float(np.mean(np.abs(design @ coeffs - y)))
    return PolynomialModel(degree=degree, coeffs=coeffs, target=target,
                           material_name=material_name, norm=norm,
                           train_mae=train_mae)
