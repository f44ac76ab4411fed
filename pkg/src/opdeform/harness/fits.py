"""Least-squares fits and rate estimation for the cross-validation layer."""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
from mpmath import mpf

from ..errors import DomainError
from ..precision import DEFAULT_DPS, require_dps, workdps

_DEGENERACY_CUT = mpf("1e-12")


@dataclass(frozen=True)
class FitResult:
    """Oscillation fit on {cos(w n), sin(w n), 1/n}; w = 2*kappa."""

    amplitude_cos: mpf
    amplitude_sin: mpf
    drift: mpf
    fitted_frequency: mpf
    residual_rms: mpf
    window: tuple
    degenerate: tuple


@dataclass(frozen=True)
class RateEstimate:
    """Log-log regression slope with its standard error."""

    slope: mpf
    stderr: mpf
    intercept: mpf


def _lls(columns, values):
    """Normal-equation least squares at working precision; tiny systems only."""
    m = len(columns)
    ata = mpmath.matrix(m, m)
    atb = mpmath.matrix(m, 1)
    for i in range(m):
        for j in range(m):
            ata[i, j] = mpmath.fdot(columns[i], columns[j])
        atb[i] = mpmath.fdot(columns[i], values)
    sol = mpmath.lu_solve(ata, atb)
    resid = list(values)
    for j in range(m):
        c = sol[j]
        resid = [r - c * col for r, col in zip(resid, columns[j])]
    rms = mpmath.sqrt(mpmath.fdot(resid, resid) / len(values))
    return [sol[j] for j in range(m)], rms


def fit_oscillation(pairs, kappa=None, dps: int = DEFAULT_DPS, min_points: int = 8, scan_points: int = 400):
    """Fit c_cos cos(2 n kappa) + c_sin sin(2 n kappa) + d/n to (n, value) pairs.

    With ``kappa`` numeric the fit is linear; columns that vanish on the
    grid (e.g. sin when 2*kappa is a multiple of pi) are dropped and
    reported as degenerate rather than poisoning the system.  With
    ``kappa='free'`` a frequency scan plus golden-section refinement picks
    the angular frequency w = 2*kappa minimizing the residual.
    """
    dps = require_dps(dps)
    with workdps(dps):
        data = [(int(n), mpf(v)) for n, v in pairs]
        if len(data) < min_points:
            raise DomainError(f"oscillation fit needs at least {min_points} points, got {len(data)}")
        ns = [n for n, _ in data]
        vals = [v for _, v in data]
        scale = max(abs(v) for v in vals) or mpf(1)

        def solve_at(w):
            cols = {
                "cos": [mpmath.cos(w * n) for n in ns],
                "sin": [mpmath.sin(w * n) for n in ns],
                "drift": [mpf(1) / n for n in ns],
            }
            keep, dropped = [], []
            for name in ("cos", "sin", "drift"):
                col = cols[name]
                norm = mpmath.sqrt(mpmath.fdot(col, col))
                if norm < _DEGENERACY_CUT * mpmath.sqrt(len(ns)):
                    dropped.append(name)
                else:
                    keep.append(name)
            coeffs, rms = _lls([cols[k] for k in keep], vals)
            out = dict(zip(keep, coeffs))
            return out, rms, tuple(dropped)

        if kappa == "free":
            lo, hi = mpf("0.02") * mpmath.pi, mpf("0.98") * mpmath.pi
            best_w, best_rms = lo, None
            for i in range(scan_points + 1):
                w = lo + (hi - lo) * i / scan_points
                _, rms, _ = solve_at(w)
                if best_rms is None or rms < best_rms:
                    best_w, best_rms = w, rms
            # golden-section refinement around the best grid point
            gr = (mpmath.sqrt(5) - 1) / 2
            a = best_w - (hi - lo) / scan_points
            b = best_w + (hi - lo) / scan_points
            c = b - gr * (b - a)
            d = a + gr * (b - a)
            fc = solve_at(c)[1]
            fd = solve_at(d)[1]
            while b - a > mpf("1e-9"):
                if fc < fd:
                    b, d, fd = d, c, fc
                    c = b - gr * (b - a)
                    fc = solve_at(c)[1]
                else:
                    a, c, fc = c, d, fd
                    d = a + gr * (b - a)
                    fd = solve_at(d)[1]
            w = (a + b) / 2
        else:
            w = 2 * mpf(kappa)

        out, rms, dropped = solve_at(w)
        if rms > mpmath.sqrt(mpmath.fdot(vals, vals) / len(vals)) + scale * mpf(10) ** (-dps + 10):
            raise DomainError("least squares exceeded the trivial zero fit; degenerate system")
        return FitResult(
            amplitude_cos=out.get("cos", mpf(0)),
            amplitude_sin=out.get("sin", mpf(0)),
            drift=out.get("drift", mpf(0)),
            fitted_frequency=+w,
            residual_rms=+rms,
            window=(min(ns), max(ns)),
            degenerate=dropped,
        )


def rate_estimate(ns, errors, dps: int = DEFAULT_DPS) -> RateEstimate:
    """Slope of log error against log n, with standard error."""
    dps = require_dps(dps)
    with workdps(dps):
        xs, ys = [], []
        for n, e in zip(ns, errors):
            e = mpf(e)
            if e <= 0:
                raise DomainError(f"rate estimate needs positive errors, got {mpmath.nstr(e, 5)}")
            xs.append(mpmath.log(mpf(n)))
            ys.append(mpmath.log(e))
        m = len(xs)
        if m < 2:
            raise DomainError("rate estimate needs at least two points")
        xbar = mpmath.fsum(xs) / m
        ybar = mpmath.fsum(ys) / m
        sxx = mpmath.fsum((x - xbar) ** 2 for x in xs)
        if sxx == 0:
            raise DomainError("degenerate abscissae in rate estimate")
        slope = mpmath.fsum((x - xbar) * (y - ybar) for x, y in zip(xs, ys)) / sxx
        intercept = ybar - slope * xbar
        if m > 2:
            rss = mpmath.fsum((y - intercept - slope * x) ** 2 for x, y in zip(xs, ys))
            stderr = mpmath.sqrt(rss / (m - 2) / sxx)
        else:
            stderr = mpf(0)
        return RateEstimate(slope=+slope, stderr=+stderr, intercept=+intercept)
