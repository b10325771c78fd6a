"""
===============================================================================
FINAL-ERROR DISTRIBUTION
===============================================================================

Purpose:
    Summarizes the per-scene final displacement errors of a MetricReport:

      - 1-D histogram of FDE with median and quantiles
      - 2-D cloud of final error vectors in the agent frame (x = along-track,
        i.e. speed mistakes; y = cross-track, i.e. direction mistakes)
      - Gaussian KDE (Scott bandwidth) of the cloud on a regular grid and the
        density thresholds enclosing 50 / 80 / 95 % of the mass
      - speed vs direction decomposition (mean |dx|, mean |dy|, share of
        scenes dominated by each)

Notes:
    - The KDE is skipped (density None, no contour levels) for fewer than 3
      scenes or a singular error covariance.

===============================================================================
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.stats import gaussian_kde

from evaluation.evaluate import MetricReport

logger = logging.getLogger("ErrorDistribution")

QUANTILES = (0.25, 0.5, 0.75, 0.9, 0.95)
MASS_LEVELS = (0.5, 0.8, 0.95)


@dataclass
class ErrorDistribution:
    units: str
    n: int
    fde: np.ndarray
    points: np.ndarray
    counts: np.ndarray
    edges: np.ndarray
    median: float
    quantiles: Dict[float, float]
    mean_abs_along: float
    mean_abs_cross: float
    speed_dominated: float
    direction_dominated: float
    grid_x: Optional[np.ndarray] = None
    grid_y: Optional[np.ndarray] = None
    density: Optional[np.ndarray] = None
    contour_levels: Dict[float, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "units": self.units,
            "n": self.n,
            "histogram": {"counts": self.counts.tolist(), "edges": self.edges.tolist()},
            "median": self.median,
            "quantiles": {str(q): v for q, v in self.quantiles.items()},
            "final_errors": self.points.tolist(),
            "mean_abs_along": self.mean_abs_along,
            "mean_abs_cross": self.mean_abs_cross,
            "speed_dominated": self.speed_dominated,
            "direction_dominated": self.direction_dominated,
            "contour_levels": {str(m): v for m, v in self.contour_levels.items()},
        }


def mass_thresholds(density: np.ndarray, masses=MASS_LEVELS) -> Dict[float, float]:
    """Density values whose super-level sets hold the given probability masses."""
    values = np.sort(density.ravel())[::-1]
    total = values.sum()
    if not total > 0:
        return {}
    cumulative = np.cumsum(values) / total
    out = {}
    for m in masses:
        idx = min(int(np.searchsorted(cumulative, m)), len(values) - 1)
        out[m] = float(values[idx])
    return out


def _kde_grid(points: np.ndarray, grid_size: int):
    if len(points) < 3:
        return None
    try:
        kde = gaussian_kde(points.T, bw_method="scott")
    except (np.linalg.LinAlgError, ValueError):
        logger.info("Final errors are degenerate; density contours skipped")
        return None
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    pad = np.maximum(0.25 * (hi - lo), 1e-6)
    gx = np.linspace(lo[0] - pad[0], hi[0] + pad[0], grid_size)
    gy = np.linspace(lo[1] - pad[1], hi[1] + pad[1], grid_size)
    xx, yy = np.meshgrid(gx, gy, indexing="xy")
    density = kde(np.vstack([xx.ravel(), yy.ravel()])).reshape(xx.shape)
    return gx, gy, density


def error_distribution(report: MetricReport, *, bins: int = 20, grid_size: int = 64) -> ErrorDistribution:
    points = report.final_errors()
    fde = np.linalg.norm(points, axis=1)
    counts, edges = np.histogram(fde, bins=bins)
    quantiles = {q: float(np.quantile(fde, q)) for q in QUANTILES}
    along = np.abs(points[:, 0])
    cross = np.abs(points[:, 1])
    moving = (along + cross) > 0

    dist = ErrorDistribution(
        units=report.units,
        n=report.n,
        fde=fde,
        points=points,
        counts=counts,
        edges=edges,
        median=float(np.median(fde)),
        quantiles=quantiles,
        mean_abs_along=float(along.mean()),
        mean_abs_cross=float(cross.mean()),
        speed_dominated=float(np.mean(moving & (along >= cross))),
        direction_dominated=float(np.mean(moving & (cross > along))),
    )
    grid = _kde_grid(points, grid_size)
    if grid is not None:
        dist.grid_x, dist.grid_y, dist.density = grid
        dist.contour_levels = mass_thresholds(dist.density)
    logger.info(
        "Final errors (%s): median %.4f, 95%% %.4f, along %.4f vs cross %.4f",
        dist.units, dist.median, quantiles[0.95], dist.mean_abs_along, dist.mean_abs_cross,
    )
    return dist
