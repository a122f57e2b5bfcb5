"""Directed technology-to-product contraction over common countries.

Each entry counts co-occurrences of technology and product specialization in
the same country, weighting every country by the inverse of its product
diversification and normalizing the row by the technology's ubiquity. Both
degree vectors are recomputed from the (already country-aligned) inputs, never
inherited from the full panels.

Degeneracy conventions: countries with zero product diversification carry no
co-occurrence information and are skipped; technologies held by no country
keep an all-zero row and are flagged inactive so the matrix shape is stable
across period pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AxisMismatchError, PanelError
from .rca import BinaryMatrix


@dataclass(frozen=True)
class AssistMatrix:
    """Technology x product matrix of normalized co-occurrence weights in [0, 1]."""

    tech_ids: tuple[str, ...]
    product_ids: tuple[str, ...]
    values: np.ndarray
    common_country_ids: tuple[str, ...]
    t1: Optional[int] = None
    t2: Optional[int] = None
    inactive_tech_ids: tuple[str, ...] = ()

    def __post_init__(self):
        mat = np.asarray(self.values, dtype=np.float64)
        if mat.shape != (len(self.tech_ids), len(self.product_ids)):
            raise PanelError("assist matrix shape does not match axes")
        object.__setattr__(self, "values", mat)

    @property
    def lag(self) -> Optional[int]:
        if self.t1 is None or self.t2 is None:
            return None
        return self.t2 - self.t1

    def active_row_sums(self) -> np.ndarray:
        """Row sums of technologies held by at least one country."""
        inactive = set(self.inactive_tech_ids)
        mask = np.array([t not in inactive for t in self.tech_ids])
        return self.values[mask].sum(axis=1)


def _assist_values(tech_values: np.ndarray, prod_values: np.ndarray):
    """Contraction kernel shared by the empirical path and the null stream.

    Returns (values, ubiquity, diversification). Zero-diversification
    countries contribute nothing; zero-ubiquity technology rows stay zero.
    """
    d = prod_values.sum(axis=1, dtype=np.int64)
    u = tech_values.sum(axis=0, dtype=np.int64)
    inv_d = np.divide(1.0, d, out=np.zeros(d.shape), where=d > 0)
    values = tech_values.T.astype(np.float64) @ (prod_values * inv_d[:, None])
    inv_u = np.divide(1.0, u, out=np.zeros(u.shape, dtype=np.float64), where=u > 0)
    values *= inv_u[:, None]
    return values, u, d


def compute_assist(tech: BinaryMatrix, prod: BinaryMatrix) -> AssistMatrix:
    """Contract two country-aligned binary layers into the directed matrix."""
    if tech.country_ids != prod.country_ids:
        raise AxisMismatchError(
            "technology and product layers must be aligned to the same country "
            "list before contraction"
        )
    values, u, _ = _assist_values(tech.values, prod.values)
    inactive = tuple(t for t, k in zip(tech.activity_ids, u) if k == 0)
    return AssistMatrix(
        tech_ids=tech.activity_ids,
        product_ids=prod.activity_ids,
        values=values,
        common_country_ids=tech.country_ids,
        t1=tech.end_year,
        t2=prod.end_year,
        inactive_tech_ids=inactive,
    )
