"""Log-log slope fitting for convergence experiments."""

from dataclasses import dataclass

import numpy as np

NOISE_FLOOR = 1e-13


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    used: int
    at_floor: bool

    def passes(self, threshold):
        """True when the slope meets ``threshold`` or every error sits at the noise floor."""
        return self.at_floor or (np.isfinite(self.slope) and self.slope >= threshold)


def fit_slope(eps, err, floor=NOISE_FLOOR):
    """Least-squares slope of ``log err`` against ``log eps``.

    Points with ``err <= floor`` are dropped. When fewer than two remain
    the fit reports ``at_floor=True`` and a slope of ``inf``.
    """
    eps = np.asarray(eps, dtype=float)
    err = np.abs(np.asarray(err, dtype=float))
    keep = err > floor
    if keep.sum() < 2:
        return SlopeFit(np.inf, np.nan, int(keep.sum()), True)
    slope, intercept = np.polyfit(np.log(eps[keep]), np.log(err[keep]), 1)
    return SlopeFit(float(slope), float(intercept), int(keep.sum()), False)


def running_slopes(eps, err):
    """Slope between consecutive points; the first entry is ``nan``."""
    eps = np.asarray(eps, dtype=float)
    err = np.abs(np.asarray(err, dtype=float))
    out = np.full(eps.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[1:] = np.diff(np.log(err)) / np.diff(np.log(eps))
    return out


def eps_grid(start, stop, factor=2.0):
    """Strictly decreasing grid ``start, start/factor, ...`` down to ``stop``."""
    if not (start > stop > 0 and factor > 1):
        raise ValueError("need start > stop > 0 and factor > 1")
    count = int(np.floor(np.log(start / stop) / np.log(factor) + 1e-9)) + 1
    return start / factor ** np.arange(count)
