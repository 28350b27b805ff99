"""Poisson and alpha-Ginibre point patterns on a disc centred at the relay.

Ginibre patterns come from the eigenvalues of a matrix of i.i.d. standard complex
Gaussians: for an N x N matrix these form the Ginibre process of intensity 1/pi
projected on its first N eigenfunctions, which coincides with the full process on
any disc holding well under N points. Scaling by 1/sqrt(pi zeta) sets the intensity.

For alpha = -1/k the alpha-GPP with Ginibre kernel is the superposition of k
independent copies of Ginibre(zeta), each thinned with retention 1/k.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PPP, is_ppp


@dataclass(frozen=True)
class SamplerSpec:
    intensity: float
    repulsion: float | str
    window_radius: float
    seed: int = 0

    def __post_init__(self):
        if not (self.intensity > 0 and self.window_radius > 0):
            raise ValueError("intensity and window_radius must be positive")
        if not is_ppp(self.repulsion) and not (-1.0 <= float(self.repulsion) < 0.0):
            raise ValueError(f"repulsion must be '{PPP}' or lie in [-1, 0) (got {self.repulsion!r})")


@dataclass
class PointPattern:
    points: np.ndarray  # complex positions, relay at the origin
    intensity: float
    repulsion: float | str
    window_radius: float

    def __len__(self):
        return int(self.points.size)

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.points.real, self.points.imag])

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x_m", "y_m"])
            for z in self.points:
                w.writerow([repr(float(z.real)), repr(float(z.imag))])
        return path


def read_pattern_csv(path, intensity: float, repulsion, window_radius: float) -> PointPattern:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    pts = data[:, 0] + 1j * data[:, 1] if data.size else np.zeros(0, complex)
    return PointPattern(pts, intensity, repulsion, window_radius)


def _rng(spec: SamplerSpec, rng):
    return rng if rng is not None else np.random.default_rng(spec.seed)


def inverse_k(alpha, tol: float = 1e-9):
    """k with alpha = -1/k, or None when -1/alpha is not an integer."""
    k = -1.0 / float(alpha)
    kr = round(k)
    return int(kr) if kr >= 1 and abs(k - kr) < tol * k else None


# ---------------------------------------------------------------- primitives

def uniform_disc(rng, n: int, R: float, r_min: float = 0.0) -> np.ndarray:
    r = np.sqrt(rng.uniform(r_min * r_min, R * R, n))
    return r * np.exp(2j * np.pi * rng.uniform(size=n))


def ppp_disc(rng, intensity: float, R: float, r_min: float = 0.0) -> np.ndarray:
    n = rng.poisson(intensity * math.pi * (R * R - r_min * r_min))
    return uniform_disc(rng, n, R, r_min)


def ginibre_size(intensity: float, R: float) -> int:
    """Matrix size whose eigenvalues reproduce Ginibre on the disc of radius R.

    The eigenvalues of an N x N matrix fill a disc of radius sqrt(N / (pi zeta)) with an
    edge layer about one mean spacing wide; m + 5 sqrt(m) + 5 (m the mean count in the
    disc) keeps that layer several spacings outside R.
    """
    mean = math.pi * intensity * R * R
    return int(math.ceil(mean + 5.0 * math.sqrt(mean) + 5.0))


core_matrix_size = ginibre_size


def ginibre_matrix(rng, n: int) -> np.ndarray:
    g = rng.standard_normal((n, n, 2))
    return (g[..., 0] + 1j * g[..., 1]) / math.sqrt(2.0)


def ginibre_points(eigs: np.ndarray, intensity: float, R: float) -> np.ndarray:
    z = eigs / math.sqrt(math.pi * intensity)
    return z[np.abs(z) <= R]


# ---------------------------------------------------------------- samplers

def sample_ppp(spec: SamplerSpec, rng=None) -> PointPattern:
    rng = _rng(spec, rng)
    pts = ppp_disc(rng, spec.intensity, spec.window_radius)
    return PointPattern(pts, spec.intensity, PPP, spec.window_radius)


def sample_ginibre(spec: SamplerSpec, rng=None) -> PointPattern:
    if is_ppp(spec.repulsion) or float(spec.repulsion) != -1.0:
        raise ValueError("sample_ginibre needs repulsion = -1")
    rng = _rng(spec, rng)
    n = ginibre_size(spec.intensity, spec.window_radius)
    eigs = np.linalg.eigvals(ginibre_matrix(rng, n))
    return PointPattern(ginibre_points(eigs, spec.intensity, spec.window_radius),
                        spec.intensity, -1.0, spec.window_radius)


def sample_alpha_gpp(spec: SamplerSpec, rng=None) -> PointPattern:
    """alpha-GPP with Ginibre kernel of intensity ``spec.intensity``.

    alpha = -1/k is sampled exactly. Other alpha admit no point process with this
    kernel; they get the superposition of a Ginibre pattern thinned with retention
    sqrt(-alpha) and an independent Poisson pattern of intensity (1 - sqrt(-alpha)) zeta,
    which has the same intensity and pair correlation 1 + alpha exp(-pi zeta r^2).
    """
    if is_ppp(spec.repulsion):
        return sample_ppp(spec, rng)
    alpha = float(spec.repulsion)
    if not -1.0 <= alpha < 0.0:
        raise ValueError(f"repulsion must lie in [-1, 0) (got {alpha})")
    rng = _rng(spec, rng)
    zeta, R = spec.intensity, spec.window_radius
    n = ginibre_size(zeta, R)
    k = inverse_k(alpha)
    parts = []
    if k is not None:
        for _ in range(k):
            pts = ginibre_points(np.linalg.eigvals(ginibre_matrix(rng, n)), zeta, R)
            parts.append(pts if k == 1 else pts[rng.uniform(size=pts.size) < 1.0 / k])
    else:
        p = math.sqrt(-alpha)
        pts = ginibre_points(np.linalg.eigvals(ginibre_matrix(rng, n)), zeta, R)
        parts.append(pts[rng.uniform(size=pts.size) < p])
        parts.append(ppp_disc(rng, (1.0 - p) * zeta, R))
    return PointPattern(np.concatenate(parts), zeta, alpha, R)


def sample_pattern(spec: SamplerSpec, rng=None) -> PointPattern:
    if is_ppp(spec.repulsion):
        return sample_ppp(spec, rng)
    return sample_alpha_gpp(spec, rng)


def kostlan_radii(rng, intensity: float, R: float, n: int | None = None) -> np.ndarray:
    """Moduli of a Ginibre pattern, cut at R.

    The set {|lambda_j|} of an n x n Ginibre matrix has the law of independent
    sqrt(Gamma(j, 1)), j = 1..n. Angles are not independent of the radii, so this is
    exact only for functionals of the distances to the origin.
    """
    n = ginibre_size(intensity, R) if n is None else n
    r = np.sqrt(rng.standard_gamma(np.arange(1, n + 1, dtype=float)) / (math.pi * intensity))
    return r[r <= R]


def sample_radii(rng, intensity: float, repulsion, R: float, r_min: float = 0.0) -> np.ndarray:
    """Distances to the origin of an alpha-GPP (or Poisson) pattern on the disc of radius R."""
    if is_ppp(repulsion):
        r = np.sqrt(rng.uniform(r_min * r_min, R * R, rng.poisson(intensity * math.pi * (R * R - r_min * r_min))))
        return r
    alpha = float(repulsion)
    k = inverse_k(alpha)
    parts = []
    if k is not None:
        for _ in range(k):
            r = kostlan_radii(rng, intensity, R)
            parts.append(r if k == 1 else r[rng.uniform(size=r.size) < 1.0 / k])
    else:
        p = math.sqrt(-alpha)
        r = kostlan_radii(rng, intensity, R)
        parts.append(r[rng.uniform(size=r.size) < p])
        parts.append(np.abs(ppp_disc(rng, (1.0 - p) * intensity, R)))
    r = np.concatenate(parts)
    return r[r >= r_min]


# ---------------------------------------------------------------- hybrid field for the simulator

@dataclass(frozen=True)
class FieldModel:
    """Exact alpha-GPP on a core disc, Poisson on the annulus out to the window.

    Repulsion only shapes the field within a few mean spacings, and the far field
    contributes little to the received sums, so the annulus is drawn as Poisson.
    The analytic counterpart of this law is available through
    :func:`hybridrelay.analytics.hybrid_field`; :func:`hybridrelay.analytics.field_bias`
    reports the resulting shift of the success probabilities.
    """
    intensity: float
    repulsion: float | str
    window_radius: float
    core_radius: float
    exclusion: tuple = ()          # ((centre, radius), ...) discs removed from the field

    @property
    def core_size(self) -> int:
        return core_matrix_size(self.intensity, self.core_radius)

    @property
    def copies(self) -> int:
        if is_ppp(self.repulsion):
            return 0
        k = inverse_k(self.repulsion)
        return k if k is not None else 1

    def draw_matrices(self, rng) -> np.ndarray:
        """Gaussian matrices for the core, drawn first so eigenvalues can be batched."""
        if self.copies == 0:
            return np.zeros((0, 0, 0), complex)
        n = self.core_size
        return np.stack([ginibre_matrix(rng, n) for _ in range(self.copies)])

    def finish(self, rng, eigs: np.ndarray) -> np.ndarray:
        zeta, Rc, R = self.intensity, self.core_radius, self.window_radius
        parts = []
        if is_ppp(self.repulsion):
            parts.append(ppp_disc(rng, zeta, R))
        else:
            alpha = float(self.repulsion)
            k = inverse_k(alpha)
            if k is not None:
                for e in eigs:
                    pts = ginibre_points(e, zeta, Rc)
                    parts.append(pts if k == 1 else pts[rng.uniform(size=pts.size) < 1.0 / k])
            else:
                p = math.sqrt(-alpha)
                pts = ginibre_points(eigs[0], zeta, Rc)
                parts.append(pts[rng.uniform(size=pts.size) < p])
                parts.append(ppp_disc(rng, (1.0 - p) * zeta, Rc))
            parts.append(ppp_disc(rng, zeta, R, r_min=Rc))
        pts = np.concatenate(parts)
        for c, rad in self.exclusion:
            pts = pts[np.abs(pts - c) >= rad]
        return pts

    def sample(self, rng) -> np.ndarray:
        mats = self.draw_matrices(rng)
        eigs = np.linalg.eigvals(mats) if mats.size else mats
        return self.finish(rng, eigs)


# ---------------------------------------------------------------- pair correlation

def _overlap_area(r, R):
    """Area of a disc of radius R intersected with its translate by r."""
    x = np.clip(r / (2.0 * R), 0.0, 1.0)
    return 2.0 * R * R * (np.arccos(x) - x * np.sqrt(1.0 - x * x))


def pair_correlation_estimate(patterns, radii) -> list[tuple[float, float]]:
    """Binned estimator of g(r) with translation edge correction.

    ``radii`` are bin edges; returns (bin midpoint, g_hat) pairs. The known intensity
    of the patterns is used for normalisation.
    """
    patterns = list(patterns)
    if len(patterns) < 100:
        warnings.warn(f"only {len(patterns)} patterns: the pair-correlation estimate is noisy",
                      RuntimeWarning, stacklevel=2)
    if not patterns:
        raise ValueError("no patterns")
    edges = np.asarray(radii, dtype=float)
    zeta, R = patterns[0].intensity, patterns[0].window_radius
    acc = np.zeros(edges.size - 1)
    for p in patterns:
        z = p.points
        if z.size < 2:
            continue
        i, j = np.triu_indices(z.size, 1)
        d = np.abs(z[i] - z[j])
        d = d[d < edges[-1]]
        acc += 2.0 * np.histogram(d, bins=edges, weights=1.0 / _overlap_area(d, R))[0]
    ring = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    g = acc / (len(patterns) * zeta * zeta * ring)
    mids = 0.5 * (edges[1:] + edges[:-1])
    return list(zip(mids.tolist(), g.tolist()))


def pair_correlation_theory(radii, intensity: float, repulsion) -> np.ndarray:
    """Ring-averaged 1 + alpha exp(-pi zeta r^2) over each bin."""
    edges = np.asarray(radii, dtype=float)
    if is_ppp(repulsion):
        return np.ones(edges.size - 1)
    c = math.pi * intensity
    a2, b2 = edges[:-1] ** 2, edges[1:] ** 2
    avg = np.exp(-c * a2) * -np.expm1(-c * (b2 - a2)) / (c * (b2 - a2))
    return 1.0 + float(repulsion) * avg
