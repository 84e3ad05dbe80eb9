"""SINR distribution statistics over coverage maps."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import EmptyMapError, InvalidParameterError, UndefinedGainError
from .radio import CoverageMap


@dataclass(frozen=True, eq=False)
class SinrCdf:
    """Empirical CDF of per-cell SINR; gaps are kept as ``-inf`` samples."""

    samples: np.ndarray  # sorted ascending

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, float))
        if len(s) == 0:
            raise EmptyMapError("CDF needs at least one sample")
        if np.any(np.isnan(s)):
            raise InvalidParameterError("CDF samples must not be NaN")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return len(self.samples)

    def __call__(self, x) -> float:
        """Fraction of samples ``<= x``."""
        return float(np.searchsorted(self.samples, x, side="right")) / len(self.samples)

    def below(self, x) -> float:
        """Fraction of samples strictly below ``x``."""
        return float(np.searchsorted(self.samples, x, side="left")) / len(self.samples)

    @property
    def gap_fraction(self) -> float:
        return float(np.count_nonzero(np.isneginf(self.samples))) / len(self.samples)


def cdf_from_map(cmap: CoverageMap, band="union") -> SinrCdf:
    """One sample per outdoor cell; cells without a path enter as ``-inf``."""
    s = cmap.best_sinr(band)[cmap.outdoor]
    if len(s) == 0:
        raise EmptyMapError("map has no outdoor cells")
    return SinrCdf(np.where(np.isnan(s), -np.inf, s))


def gap_percentile(cdf: SinrCdf, threshold_db: float) -> float:
    """Percentage of users below the threshold (gaps always count)."""
    return 100.0 * cdf.below(threshold_db)


def coverage_gain(before: SinrCdf, after: SinrCdf, threshold_db: float) -> float:
    """Ratio of covered fractions (SINR >= threshold), after over before."""
    cov_before = 1.0 - before.below(threshold_db)
    cov_after = 1.0 - after.below(threshold_db)
    if cov_before == 0.0:
        raise UndefinedGainError("baseline has zero coverage; gain is undefined")
    return cov_after / cov_before


def cell_center_delta(before: CoverageMap, after: CoverageMap, band: str,
                      donor_id: str = "donor") -> float:
    """Median SINR change (dB) over cells served by the donor in both maps."""
    if not before.same_grid(after):
        raise InvalidParameterError("maps are on different grids")
    band = band.id if hasattr(band, "id") else band

    def donor_served(m: CoverageMap):
        if donor_id not in m.tx_ids:
            return np.zeros(m.shape, bool)
        return m.serving[m.band_key(band)] == m.tx_ids.index(donor_id)

    s0 = before.sinr_db[band]
    s1 = after.sinr_db[band]
    mask = donor_served(before) & donor_served(after) & np.isfinite(s0) & np.isfinite(s1)
    mask &= before.outdoor & after.outdoor
    if not mask.any():
        raise EmptyMapError("no cell is donor-served in both maps")
    return float(np.median(s1[mask] - s0[mask]))


def write_cdf_csv(cdf: SinrCdf, path: Union[str, Path]) -> None:
    """Two columns (sinr_db, cumulative_fraction), led by a ``gap`` row."""
    lines = ["sinr_db,cumulative_fraction", f"gap,{cdf.gap_fraction:.6f}"]
    finite = cdf.samples[np.isfinite(cdf.samples)]
    for v in np.unique(finite):
        lines.append(f"{v:.6f},{cdf(v):.6f}")
    Path(path).write_text("\n".join(lines) + "\n")
