"""Squeezing estimators: number/spin squeezing, tomography scans, mean spin
length, detection-noise handling, array scaling, differential squeezing,
exponential growth fits, jackknife resampling, visibility.

Number squeezing follows the binomial normalization
xi2_N = Var(N_up - N_down) / (4 p (1 - p) Nbar) with p = <N_up>/<N>; spin
squeezing corrects by the squared mean spin length, xi2_S = xi2_min /
<cos phi>^2.  dB values are 10 log10(xi2).  Sample variances are unbiased
(n - 1) throughout.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegeneratePolarizationError
from .spins import moments as spin_moments
from .spins import rotate

__all__ = [
    "ShotTable",
    "TomographyResult",
    "MeanSpinLength",
    "ScalingCurve",
    "to_db",
    "from_db",
    "number_squeezing",
    "variance_extrema",
    "tomography",
    "mean_spin_length",
    "spin_squeezing",
    "apply_detection_noise",
    "subtract_detection_noise",
    "array_scaling",
    "differential_squeezing",
    "exponential_fit",
    "jackknife",
    "visibility",
    "wineland_squeezing",
]


def to_db(x):
    return 10.0 * np.log10(x)


def from_db(x):
    return 10.0 ** (np.asarray(x) / 10.0)


# ---------------------------------------------------------------------------
# shot tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShotTable:
    """Per-(site, shot) read-out counts; real-valued after detection noise."""

    site: np.ndarray
    shot: np.ndarray
    n_up: np.ndarray
    n_down: np.ndarray

    def __post_init__(self):
        site = np.asarray(self.site, dtype=np.int64)
        shot = np.asarray(self.shot, dtype=np.int64)
        n_up = np.asarray(self.n_up, dtype=float)
        n_down = np.asarray(self.n_down, dtype=float)
        if not (site.shape == shot.shape == n_up.shape == n_down.shape):
            raise ValueError("all columns must have the same length")
        for name, arr in (("site", site), ("shot", shot), ("n_up", n_up), ("n_down", n_down)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def site_ids(self):
        return np.unique(self.site)

    def for_site(self, site_id):
        mask = self.site == site_id
        order = np.argsort(self.shot[mask])
        return self.n_up[mask][order], self.n_down[mask][order]

    def pooled(self, site_ids=None):
        """Counts summed over the given sites, aligned by shot index.

        Raises on ragged tables (sites with mismatched shot sets).
        """
        ids = self.site_ids if site_ids is None else np.asarray(site_ids)
        shots_ref = None
        up = down = None
        for sid in ids:
            mask = self.site == sid
            order = np.argsort(self.shot[mask])
            shots = self.shot[mask][order]
            if shots_ref is None:
                shots_ref = shots
                up = self.n_up[mask][order].copy()
                down = self.n_down[mask][order].copy()
            else:
                if shots.shape != shots_ref.shape or np.any(shots != shots_ref):
                    raise ValueError(f"site {sid} has a mismatched shot set")
                up += self.n_up[mask][order]
                down += self.n_down[mask][order]
        if shots_ref is None:
            raise ValueError("no sites selected")
        return up, down

    def to_csv(self, path_or_file):
        text_lines = ["site,shot,n_up,n_down"]
        for s, sh, u, d in zip(self.site, self.shot, self.n_up, self.n_down):
            text_lines.append(f"{s},{sh},{u:.17g},{d:.17g}")
        text = "\n".join(text_lines) + "\n"
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w") as fh:
                fh.write(text)

    @classmethod
    def from_csv(cls, path_or_file):
        fh = path_or_file if hasattr(path_or_file, "read") else open(path_or_file)
        try:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["site", "shot", "n_up", "n_down"]:
                raise ValueError(f"unexpected header {header}")
            cols = [[], [], [], []]
            for row in reader:
                if not row:
                    continue
                for c, v in zip(cols, row):
                    c.append(float(v))
            return cls(
                np.array(cols[0], dtype=np.int64),
                np.array(cols[1], dtype=np.int64),
                np.array(cols[2]),
                np.array(cols[3]),
            )
        finally:
            if fh is not path_or_file:
                fh.close()


def _polarization(n_up, n_down):
    n_up = np.asarray(n_up, dtype=float)
    n_down = np.asarray(n_down, dtype=float)
    if n_up.size < 2:
        raise ValueError("need at least 2 shots")
    n_bar = float(np.mean(n_up + n_down))
    if n_bar <= 0:
        raise DegeneratePolarizationError("no atoms detected")
    p = float(np.mean(n_up)) / n_bar
    if not 0.0 < p < 1.0:
        raise DegeneratePolarizationError(f"polarization p = {p} is degenerate")
    return p, n_bar


def number_squeezing(n_up, n_down, sigma_det_subtract=0.0):
    """Var(N_up - N_down) normalized to the binomial variance 4 p (1-p) Nbar.

    sigma_det_subtract removes the imaging-noise variance 2 sigma^2 before
    normalizing (floored at zero).
    """
    p, n_bar = _polarization(n_up, n_down)
    var = float(np.var(np.asarray(n_up, dtype=float) - np.asarray(n_down, dtype=float), ddof=1))
    if sigma_det_subtract:
        var, _ = subtract_detection_noise(var, sigma_det_subtract)
    return var / (4.0 * p * (1.0 - p) * n_bar)


# ---------------------------------------------------------------------------
# tomography
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TomographyResult:
    angles: np.ndarray
    xi2_n: np.ndarray
    xi2_min: float
    xi2_max: float
    alpha_min: float  # nan when the scan is flat
    flat: bool
    var_extrema: tuple | None = None  # closed-form raw-variance extrema (moments path)

    @property
    def xi2_n_db(self):
        return to_db(self.xi2_n)

    def to_csv(self, path_or_file):
        lines = ["angle_rad,xi2_n,xi2_n_db"]
        for a, x in zip(self.angles, self.xi2_n):
            lines.append(f"{a:.17g},{x:.17g},{to_db(x):.17g}")
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w") as fh:
                fh.write(text)


def variance_extrema(mom, flat_tol=1e-9):
    """Closed-form extrema of Var(Jz cos a + Jy sin a) over the rotation angle.

    Returns (v_min, v_max, alpha_min, flat): the eigenvalues of the (z, y)
    covariance block, the angle of minimal variance in [0, pi), and a flag
    marking an isotropic scan (alpha_min undefined, returned as nan).
    Ties break toward the smaller angle.
    """
    cov = mom.covariance
    vz, vy, c = cov[2, 2], cov[1, 1], cov[1, 2]
    mid = 0.5 * (vz + vy)
    rad = math.hypot(0.5 * (vz - vy), c)
    if rad <= flat_tol * max(mid, 1e-30):
        return mid, mid, float("nan"), True
    psi = math.atan2(c, 0.5 * (vz - vy))
    alpha_min = 0.5 * (psi + math.pi) % math.pi
    if alpha_min >= math.pi - 1e-12:
        alpha_min = 0.0
    return mid - rad, mid + rad, alpha_min, False


def _norm_class(p, n_bar):
    return 4.0 * p * (1.0 - p) * n_bar


def tomography(source, angle_grid, n_total=None, refine=True):
    """Variance-vs-angle scan and extracted (xi2_min, xi2_max, alpha_min).

    source is either a SpinMoments/SpinState (analytic path: the per-angle
    variance is the quadratic form of the (Jz, Jy) covariance block, and the
    extrema additionally come from its eigenvalues) or a mapping
    angle -> (n_up, n_down) shot arrays, or a callable angle -> (n_up,
    n_down) used for sampled scans; the callable path refines alpha_min by
    golden-section search around the grid minimum.
    """
    angles = np.asarray(angle_grid, dtype=float)
    if angles.ndim != 1 or angles.size < 3 or np.any(np.diff(angles) <= 0):
        raise ValueError("angle grid must be strictly increasing with >= 3 points")
    if angles[-1] - angles[0] < math.pi - 1e-9:
        raise ValueError("angle grid must cover at least one pi period")

    mom = None
    if hasattr(source, "covariance"):
        mom = source
        if n_total is None:
            raise ValueError("n_total required with a SpinMoments source")
    elif hasattr(source, "amplitudes"):
        mom = spin_moments(source)
        n_total = source.atom_count

    if mom is not None:
        cov = mom.covariance
        vz, vy, c = cov[2, 2], cov[1, 1], cov[1, 2]
        var = (
            vz * np.cos(angles) ** 2
            + vy * np.sin(angles) ** 2
            + 2.0 * c * np.sin(angles) * np.cos(angles)
        )
        jz_rot = mom.mean[2] * np.cos(angles) + mom.mean[1] * np.sin(angles)
        p = 0.5 + jz_rot / n_total
        xi2 = 4.0 * var / _norm_class(p, n_total)
        v_min, v_max, alpha_min, flat = variance_extrema(mom)
        if flat:
            xi_min = xi_max = float(np.min(xi2))
        else:
            p_min = 0.5 + (mom.mean[2] * math.cos(alpha_min) + mom.mean[1] * math.sin(alpha_min)) / n_total
            a_max = (alpha_min + 0.5 * math.pi) % math.pi
            p_max = 0.5 + (mom.mean[2] * math.cos(a_max) + mom.mean[1] * math.sin(a_max)) / n_total
            xi_min = 4.0 * v_min / _norm_class(p_min, n_total)
            xi_max = 4.0 * v_max / _norm_class(p_max, n_total)
        return TomographyResult(angles, xi2, xi_min, xi_max, alpha_min, flat, (v_min, v_max))

    # shot path
    if callable(source):
        tables = {a: source(a) for a in angles}
    else:
        tables = {a: source[a] for a in angles}
    xi2 = np.array([number_squeezing(*tables[a]) for a in angles])
    i_min = int(np.argmin(xi2))
    alpha_min = float(angles[i_min])
    spread = float(np.max(xi2) - np.min(xi2))
    flat = spread < 0.05 * float(np.mean(xi2))
    if flat:
        alpha_min = float("nan")
    elif callable(source) and refine and 0 < i_min < angles.size - 1:
        alpha_min = _golden_min(
            lambda a: number_squeezing(*source(a)), angles[i_min - 1], angles[i_min + 1]
        )
    xi_min = float(np.min(xi2))
    xi_max = float(np.max(xi2))
    return TomographyResult(angles, xi2, xi_min, xi_max, alpha_min, flat, None)


def _golden_min(f, a, b, tol=1e-4, max_iter=60):
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# mean spin length and spin squeezing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeanSpinLength:
    estimate: float  # read-out protocol estimator <sqrt(1 - z^2)>
    moment_based: float | None  # 2 |<J>| / N cross-check, when available
    clamped: int  # |z| > 1 samples clipped before the square root


def mean_spin_length(source, alpha_min):
    """<cos phi> from the long-axis read-out protocol.

    For a SpinState the long axis is rotated onto the measurement axis
    (rotation by alpha_min - pi/2 about x under this package's rotation
    handedness) and <sqrt(1 - z^2)> is evaluated on the exact outcome
    distribution; the moment-based mean spin length 2 |<J>| / N is returned
    alongside.  Alternatively source may be an array of measured imbalances
    z after that same rotation (detection noise can push |z| past 1; such
    samples are clamped and counted).
    """
    if hasattr(source, "amplitudes"):
        state = source
        n = state.atom_count
        rotated = rotate(state, "x", alpha_min - 0.5 * math.pi)
        z = (2.0 * np.arange(n + 1) - n) / n
        est = float(np.dot(rotated.probabilities(), np.sqrt(np.maximum(1.0 - z * z, 0.0))))
        mom = spin_moments(state)
        return MeanSpinLength(est, 2.0 * float(np.linalg.norm(mom.mean)) / n, 0)
    z = np.asarray(source, dtype=float)
    clamped = int(np.count_nonzero(np.abs(z) > 1.0))
    z = np.clip(z, -1.0, 1.0)
    return MeanSpinLength(float(np.mean(np.sqrt(1.0 - z * z))), None, clamped)


def spin_squeezing(xi2_min, cos_phi_mean):
    """xi2_S = xi2_min / <cos phi>^2."""
    if not 0.0 < cos_phi_mean <= 1.0:
        raise ValueError(f"mean spin length {cos_phi_mean} outside (0, 1]")
    return xi2_min / cos_phi_mean**2


# ---------------------------------------------------------------------------
# detection noise
# ---------------------------------------------------------------------------


def apply_detection_noise(table, noise, rng, include_ramp_loss=True, include_shot_noise=True):
    """Read-out imperfections: optional binomial ramp loss (expected
    ramp_loss_atoms removed per shot, before imaging) followed by independent
    Gaussian(0, sigma_det) noise on each component."""
    n_up = np.asarray(table.n_up, dtype=float).copy()
    n_down = np.asarray(table.n_down, dtype=float).copy()
    if include_ramp_loss and noise.ramp_loss_atoms > 0:
        tot = n_up + n_down
        p_loss = np.clip(np.divide(noise.ramp_loss_atoms, tot, where=tot > 0), 0.0, 1.0)
        n_up -= rng.binomial(np.rint(n_up).astype(np.int64), p_loss)
        n_down -= rng.binomial(np.rint(n_down).astype(np.int64), p_loss)
    if include_shot_noise and noise.sigma_det > 0:
        n_up = n_up + rng.normal(0.0, noise.sigma_det, size=n_up.shape)
        n_down = n_down + rng.normal(0.0, noise.sigma_det, size=n_down.shape)
    return ShotTable(table.site, table.shot, n_up, n_down)


def subtract_detection_noise(variance_obs, sigma_det):
    """Remove the 2 sigma_det^2 imaging-noise contribution from an observed
    Var(N_up - N_down); floored at zero.  Returns (corrected, floored)."""
    if variance_obs < 0:
        raise ValueError("variance must be >= 0")
    corrected = variance_obs - 2.0 * sigma_det**2
    if corrected < 0.0:
        return 0.0, True
    return corrected, False


# ---------------------------------------------------------------------------
# arrays of condensates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingCurve:
    n_sites: np.ndarray
    n_total: np.ndarray  # mean summed atom number per prefix
    xi2_n: np.ndarray
    jackknife_se: np.ndarray


def array_scaling(table, ordering=None, sigma_det_subtract=None):
    """Number squeezing of cumulative site prefixes (summed counts per shot).

    With sigma_det_subtract set, detection noise 2 sigma^2 per site is
    removed from the summed variance before normalization (subtraction on
    the summed counts).
    """
    ids = list(table.site_ids if ordering is None else ordering)
    if len(ids) < 2:
        raise ValueError("need at least 2 sites")
    n_sites, n_tot, xi2s, ses = [], [], [], []
    up = down = None
    for i, sid in enumerate(ids):
        u, d = table.pooled([sid])
        up = u if up is None else up + u
        down = d if down is None else down + d

        def stat(data, k=i + 1):
            uu, dd = data[:, 0], data[:, 1]
            p, n_bar = _polarization(uu, dd)
            var = float(np.var(uu - dd, ddof=1))
            if sigma_det_subtract:
                var = max(var - 2.0 * k * sigma_det_subtract**2, 0.0)
            return var / _norm_class(p, n_bar)

        data = np.column_stack([up, down])
        est, se = jackknife(data, stat)
        n_sites.append(i + 1)
        n_tot.append(float(np.mean(up + down)))
        xi2s.append(stat(data))
        ses.append(se)
    return ScalingCurve(np.array(n_sites), np.array(n_tot), np.array(xi2s), np.array(ses))


def differential_squeezing(table, left_sites, right_sites):
    """Relative squeezing of the imbalance difference between two array halves.

    delta_z = z_left - z_right per shot; the classical reference is
    4 p (1 - p) (1/Nbar_L + 1/Nbar_R) with p pooled over all sites.
    """
    if len(left_sites) == 0 or len(right_sites) == 0:
        raise ValueError("both halves must be non-empty")
    ul, dl = table.pooled(left_sites)
    ur, dr = table.pooled(right_sites)
    z_left = (ul - dl) / (ul + dl)
    z_right = (ur - dr) / (ur + dr)
    var = float(np.var(z_left - z_right, ddof=1))
    p, _ = _polarization(np.concatenate([ul, ur]), np.concatenate([dl, dr]))
    n_left = float(np.mean(ul + dl))
    n_right = float(np.mean(ur + dr))
    var_class = 4.0 * p * (1.0 - p) * (1.0 / n_left + 1.0 / n_right)
    return var / var_class


# ---------------------------------------------------------------------------
# growth fits, resampling, visibility
# ---------------------------------------------------------------------------


def exponential_fit(times, series, window=None):
    """Least-squares exponential growth rate of a positive series.

    Fits log(series) = log(amplitude) + rate * t over the window (t_lo, t_hi),
    inclusive; returns (rate, amplitude, residuals).
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(series, dtype=float)
    if window is not None:
        mask = (t >= window[0] - 1e-15) & (t <= window[1] + 1e-15)
        t, y = t[mask], y[mask]
    if t.size < 3:
        raise ValueError("need at least 3 points in the fit window")
    if np.any(y <= 0):
        raise ValueError("series must be positive for a log-linear fit")
    slope, intercept = np.polyfit(t, np.log(y), 1)
    residuals = np.log(y) - (slope * t + intercept)
    return float(slope), float(np.exp(intercept)), residuals


def jackknife(data, statistic):
    """Delete-1 jackknife: (bias-corrected estimate, standard error).

    data holds one shot per row (1-D or 2-D); statistic maps such an array
    to a scalar.
    """
    data = np.asarray(data)
    n = data.shape[0]
    if n < 10:
        raise ValueError(f"need >= 10 shots for resampling, got {n}")
    full = float(statistic(data))
    loo = np.empty(n)
    idx = np.arange(n)
    for i in range(n):
        loo[i] = statistic(data[idx != i])
    loo_mean = float(np.mean(loo))
    estimate = n * full - (n - 1) * loo_mean
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo_mean) ** 2)))
    return estimate, se


def visibility(mean_vectors, n_total):
    """Ramsey fringe contrast V = 2 |sum <J_i>| / N_tot of summed sites."""
    if n_total <= 0:
        raise ValueError("total atom number must be positive")
    means = np.atleast_2d(np.asarray(mean_vectors, dtype=float))
    return 2.0 * float(np.linalg.norm(means.sum(axis=0))) / n_total


def wineland_squeezing(xi2_n, vis):
    """xi2_S = xi2_N / V^2, the visibility-corrected squeezing parameter."""
    if not 0.0 < vis <= 1.0 + 1e-12:
        raise ValueError(f"visibility {vis} outside (0, 1]")
    return xi2_n / vis**2
