"""Fredholm determinants of modulated Ginibre kernels and inversion of Laplace transforms.

For an alpha-GPP with Ginibre kernel G of intensity zeta,

    E[prod_x (1 - m(x))] = Det(Id + alpha K)^(-1/alpha),   K = sqrt(m) G sqrt(m),

so every value returned here is a Laplace functional in (0, 1].

Two evaluation routes are provided.

* ``nystrom``: polar Gauss-Legendre product rule, dense weighted kernel matrix, eigenvalues.
  Cost grows with the square of the number of nodes, so it is only practical on small windows.
* ``basis`` (default): the same quadrature written in the eigenbasis of G,
  phi_n(z) = sqrt((pi zeta)^(n+1) / (pi n!)) z^n exp(-pi zeta |z|^2 / 2).
  Off-diagonal couplings come from the angular Fourier coefficients of m on rings,
  so radially symmetric m gives a diagonal matrix (the product formula).
  Kernels with a second centre give a banded Hermitian matrix.
"""
from __future__ import annotations

import functools
import math
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg, sparse
from scipy.special import gammaln

from .config import is_ppp


class FredholmError(RuntimeError):
    pass


class BreakdownError(FredholmError):
    """Some 1 + alpha*lambda <= 0: the quadrature is too coarse for this kernel."""


class RefinementError(FredholmError):
    """Values at N and 2N nodes disagree beyond tolerance."""


@dataclass(frozen=True)
class KernelSpec:
    """A Ginibre kernel of intensity ``intensity`` modulated by ``modulation`` on the disc.

    ``modulation`` maps complex positions to m(z) in [0, 1]. ``centers`` lists the
    receiver positions the modulation is built around. A single centre at the origin
    means m is radially symmetric.
    """
    intensity: float
    repulsion: float | str
    window_radius: float
    modulation: Callable[[np.ndarray], np.ndarray]
    centers: tuple[complex, ...] = (0j,)
    breaks: tuple[float, ...] = ()   # extra radii where m has kinks or jumps
    feature_scale: float = 0.0       # smallest angular feature near an off-origin centre (m)

    @property
    def radial(self) -> bool:
        return all(c == 0 for c in self.centers)


def interference_modulation(gains, centers, mu, exclusion: float = 0.0):
    """m(z) = 1 - prod_i (1 + a_i |z - c_i|^-mu)^-1, written to stay accurate when m is tiny.

    Points within ``exclusion`` of any centre are removed from the field, so m = 0 there.
    """
    gains = tuple(float(a) for a in gains)
    centers = tuple(complex(c) for c in centers)
    half = mu / 2.0
    ex2 = exclusion * exclusion

    def m(z):
        z = np.asarray(z)
        x, y = z.real, z.imag
        keep = np.ones(z.shape)
        inside = np.zeros(z.shape, dtype=bool)
        for a, c in zip(gains, centers):
            d2 = (x - c.real) ** 2 + (y - c.imag) ** 2
            if ex2 > 0:
                inside |= d2 < ex2
            if a == 0:
                continue
            with np.errstate(divide="ignore", over="ignore"):
                ratio = d2 ** half / a  # (1 + a d^-mu)^-1 = ratio/(1+ratio)
            keep = keep * (ratio / (1.0 + ratio))
        out = 1.0 - keep
        if ex2 > 0:
            out[inside] = 0.0
        return out

    return m


# ---------------------------------------------------------------- quadrature helpers

@functools.lru_cache(maxsize=None)
def _gl(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def gl_panels(breaks, order: int = 8):
    """Composite Gauss-Legendre nodes/weights over consecutive break points."""
    b = np.asarray(breaks, dtype=float)
    x, w = _gl(order)
    lo, hi = b[:-1, None], b[1:, None]
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w
    return nodes.ravel(), weights.ravel()


def _radial_breaks(U: float, specials=(), u_lo=1e-4, ratio=1.3, width=0.5):
    """Panel breaks in the scaled radius u = r sqrt(pi zeta) on [0, U]."""
    pts = [0.0]
    u = u_lo
    while u < min(1.0, U):
        pts.append(u)
        u *= ratio
    u = 1.0
    while u < U:
        pts.append(u)
        u += width
    pts.append(U)
    for s in specials:
        if not 0 < s < U:
            continue
        h = max(s * 1e-3, 1e-6)
        while h < width:
            pts += [s - h, s + h]
            h *= 2.0
        pts.append(s)
    pts = np.unique(np.clip(pts, 0.0, U))
    keep = np.concatenate([[True], np.diff(pts) > 1e-12 * max(U, 1.0)])
    return pts[keep]


# ---------------------------------------------------------------- eigenbasis machinery

class _RingBasis:
    """Radial quadrature plus the Gram weights of the Ginibre eigenfunctions.

    ``weight(j)`` is a sparse (n_basis x n_nodes) matrix whose row n integrates
    conj(phi_n) phi_(n+j) against a function of the radius, after the angular
    integral has been replaced by the Fourier coefficient of order j.
    """

    def __init__(self, zeta: float, R: float, specials=(), band: int = 0):
        self.zeta = zeta
        self.R = R
        self.scale = math.sqrt(math.pi * zeta)
        U = R * self.scale
        self.U = U
        self.specials_u = tuple(s * self.scale for s in specials)
        self.u, self.wu = gl_panels(_radial_breaks(U, self.specials_u))
        self.r = self.u / self.scale
        self.n_basis = int(math.ceil(U * U + 10.0 * U + 20.0))
        self.band = band
        self._w = {}
        self._lock = threading.Lock()
        self.mass = 2.0 * self.u * self.wu  # zeta * area element after the angular integral

    def weight(self, j: int) -> sparse.csr_matrix:
        with self._lock:
            if j not in self._w:
                self._w[j] = self._build(j)
            return self._w[j]

    def _build(self, j: int) -> sparse.csr_matrix:
        n = np.arange(self.n_basis - j)[:, None]
        logu = np.log(self.u)[None, :]
        rows, cols, vals = [], [], []
        # process in row blocks to bound memory
        for start in range(0, n.shape[0], 256):
            nn = n[start:start + 256]
            lw = (math.log(2.0) + (2 * nn + j + 1) * logu - self.u[None, :] ** 2
                  - 0.5 * (gammaln(nn + 1) + gammaln(nn + j + 1)) + np.log(self.wu)[None, :])
            mask = lw > -42.0
            rr, cc = np.nonzero(mask)
            rows.append(rr + start)
            cols.append(cc)
            vals.append(np.exp(lw[mask]))
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.n_basis - j, self.u.size))


@functools.lru_cache(maxsize=32)
def ring_basis(zeta: float, R: float, specials: tuple = ()) -> _RingBasis:
    return _RingBasis(zeta, R, specials)


def _logdet_terms(lam: np.ndarray, alpha: float) -> complex:
    z = 1.0 + alpha * lam
    if np.isrealobj(z) and np.any(z <= 0):
        raise BreakdownError("1 + alpha*lambda <= 0; refine the quadrature")
    return np.sum(np.log(z))


def radial_masses(basis: _RingBasis, mvals: np.ndarray) -> np.ndarray:
    """lambda_n = int |phi_n|^2 m over the disc, for m sampled on the radial nodes.

    ``mvals`` may be (n_nodes,) or (n_nodes, k); complex values are allowed.
    """
    W = basis.weight(0)
    if np.iscomplexobj(mvals):
        return W @ mvals.real + 1j * (W @ mvals.imag)
    return W @ mvals


def radial_laplace(basis: _RingBasis, alpha, mvals: np.ndarray, log: bool = False, n_max=None):
    """Det(Id + alpha K)^(-1/alpha) for radially symmetric m given on the nodes (vectorised).

    ``n_max`` keeps only the first eigenfunctions of G, i.e. the kernel of the
    n_max x n_max Ginibre matrix ensemble.
    """
    if is_ppp(alpha):
        out = -(basis.mass @ mvals) if mvals.ndim > 1 else -np.dot(basis.mass, mvals)
        return out if log else np.exp(out)
    lam = radial_masses(basis, mvals)[:n_max]
    z = 1.0 + alpha * lam
    if not np.iscomplexobj(z) and np.any(z <= 0):
        raise BreakdownError("1 + alpha*lambda <= 0; refine the quadrature")
    out = -np.sum(np.log(z), axis=0) / alpha
    return out if log else np.exp(out)


def _angles_for(u, centers_u, band, gap_floor=0.0, umin=1e-3, n_max=4096):
    """Angular node count per ring: resolve features around off-origin centres."""
    n = np.full(u.shape, 64.0)
    for s in centers_u:
        if s == 0:
            continue
        gap = np.maximum(np.abs(u - s), max(umin * s, gap_floor))
        n = np.maximum(n, 16.0 * u / gap)
    n = np.maximum(n, 2 * band + 2)
    n = 2 ** np.ceil(np.log2(np.minimum(n, n_max)))
    return n.astype(int)


def _head_rows(W: sparse.csr_matrix, n: int) -> sparse.csr_matrix:
    """First ``n`` rows of a CSR matrix without copying the data."""
    end = W.indptr[n]
    return sparse.csr_matrix((W.data[:end], W.indices[:end], W.indptr[:n + 1]),
                             shape=(n, W.shape[1]), copy=False)


def basis_laplace(kernel: KernelSpec, band: int = 32, far_tol: float = 1e-7, log: bool = False,
                  n_max=None, n_angles: int = 1024):
    """Eigenbasis evaluation for any modulation (radial or not); ``n_max`` as in radial_laplace."""
    zeta, R = kernel.intensity, kernel.window_radius
    specials = tuple(sorted({abs(c) for c in kernel.centers if c != 0} | set(kernel.breaks)))
    basis = ring_basis(zeta, R, specials)
    u, r = basis.u, basis.r
    if kernel.radial:
        mvals = np.asarray(kernel.modulation(r.astype(complex)), dtype=float)
        return radial_laplace(basis, kernel.repulsion, mvals, log=log, n_max=n_max)
    centers_u = [abs(c) * basis.scale for c in kernel.centers if c != 0]
    nth = _angles_for(u, centers_u, band, kernel.feature_scale * basis.scale, n_max=n_angles)
    coeff = np.zeros((u.size, band + 1), dtype=complex)
    for n in np.unique(nth):
        idx = np.nonzero(nth == n)[0]
        theta = 2 * np.pi * np.arange(n) / n
        z = r[idx, None] * np.exp(1j * theta)[None, :]
        mv = kernel.modulation(z)
        f = np.fft.fft(mv, axis=1) / n
        coeff[idx, :] = f[:, :band + 1]
    m0 = coeff[:, 0].real
    alpha = kernel.repulsion
    if is_ppp(alpha):
        val = -np.dot(basis.mass, m0)
        return val if log else math.exp(val)
    lam = (basis.weight(0) @ m0)[:n_max]
    # rows that only see negligible angular variation are kept diagonal
    offd = np.max(np.abs(coeff[:, 1:]), axis=1)
    big = np.nonzero(offd > far_tol)[0]
    u_far = u[big[-1]] if big.size else 0.0
    n_band = min(lam.size, int(math.ceil((u_far + 5.0) ** 2)) + band)
    ab = np.zeros((band + 1, n_band), dtype=complex)
    ab[band, :] = 1.0 + alpha * lam[:n_band]
    for j in range(1, band + 1):
        if j >= n_band:
            break
        Wj = _head_rows(basis.weight(j), n_band - j)
        mj = np.conj(coeff[:, j])
        vals = Wj @ mj.real + 1j * (Wj @ mj.imag)
        ab[band - j, j:] = alpha * vals
    try:
        c = linalg.cholesky_banded(ab, lower=False, check_finite=False)
        logdet = 2.0 * np.sum(np.log(np.abs(c[band].real)))
    except linalg.LinAlgError:
        ev = linalg.eig_banded(ab, lower=False, eigvals_only=True, check_finite=False)
        if np.any(ev <= 0):
            raise BreakdownError("1 + alpha*lambda <= 0 in the banded eigenbasis matrix")
        logdet = float(np.sum(np.log(ev)))
    tail = lam[n_band:]
    zt = 1.0 + alpha * tail
    if np.any(zt <= 0):
        raise BreakdownError("1 + alpha*lambda <= 0 in the diagonal tail")
    logdet += float(np.sum(np.log1p(alpha * tail)))
    val = -logdet / alpha
    return val if log else math.exp(val)


# ---------------------------------------------------------------- dense Nystrom

def ginibre_kernel(x, y, zeta):
    x = np.asarray(x)[:, None]
    y = np.asarray(y)[None, :]
    return zeta * np.exp(-np.pi * zeta / 2 * (np.abs(x) ** 2 + np.abs(y) ** 2 - 2 * x * np.conj(y)))


def nystrom_laplace(kernel: KernelSpec, n_r: int = 48, n_theta: int = 64, log: bool = False):
    """Direct polar Gauss-Legendre Nystrom evaluation."""
    R = kernel.window_radius
    xr, wr = _gl(n_r)
    xt, wt = _gl(n_theta)
    r = 0.5 * R * (xr + 1)
    wr = 0.5 * R * wr
    th = np.pi * (xt + 1)
    wt = np.pi * wt
    z = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
    w = (wr[:, None] * r[:, None] * wt[None, :]).ravel()
    m = np.asarray(kernel.modulation(z), dtype=float)
    alpha = kernel.repulsion
    if is_ppp(alpha):
        val = -kernel.intensity * np.sum(w * m)
        return val if log else math.exp(val)
    s = np.sqrt(w * m)
    K = s[:, None] * ginibre_kernel(z, z, kernel.intensity) * s[None, :]
    lam = linalg.eigvalsh(K)
    z1 = 1.0 + alpha * lam
    if np.any(z1 <= 0):
        raise BreakdownError("1 + alpha*lambda <= 0; refine the quadrature")
    val = -np.sum(np.log(z1)) / alpha
    return val if log else math.exp(val)


def fredholm_det(kernel: KernelSpec, method: str = "basis", check: bool = False,
                 rtol: float = 1e-6, **kw) -> float:
    """Laplace functional Det(Id + alpha K)^(-1/alpha) (or exp(-int m zeta) for a Poisson field).

    ``method`` is ``"basis"`` (default) or ``"nystrom"``. With ``check=True`` the
    evaluation is repeated at doubled resolution and a :class:`RefinementError`
    is raised when the two disagree by more than ``rtol``.
    """
    if method == "nystrom":
        n_r, n_t = kw.get("n_r", 48), kw.get("n_theta", 64)
        val = nystrom_laplace(kernel, n_r, n_t)
        if check:
            val2 = nystrom_laplace(kernel, 2 * n_r, 2 * n_t)
            if abs(val2 - val) > rtol * abs(val2):
                raise RefinementError(f"Nystrom {val} vs refined {val2}")
            val = val2
        return val
    if method != "basis":
        raise ValueError(f"unknown method {method!r}")
    band = kw.get("band", 32)
    val = basis_laplace(kernel, band=band)
    if check and not kernel.radial:
        val2 = basis_laplace(kernel, band=2 * band, far_tol=1e-9)
        if abs(val2 - val) > rtol * abs(val2):
            raise RefinementError(f"eigenbasis {val} vs refined {val2}")
    return val


def radial_fredholm_det(kernel: KernelSpec) -> float:
    """Product formula prod_n (1 + alpha lambda_n)^(-1/alpha) for radially symmetric m."""
    if not kernel.radial:
        raise ValueError("radial_fredholm_det needs an origin-centred modulation")
    basis = ring_basis(kernel.intensity, kernel.window_radius, tuple(sorted(kernel.breaks)))
    mvals = np.asarray(kernel.modulation(basis.r.astype(complex)), dtype=float)
    return float(radial_laplace(basis, kernel.repulsion, mvals))


# ---------------------------------------------------------------- Talbot inversion

def talbot_contour(t, M: int = 32):
    """Fixed-Talbot nodes s[k] and weights c[k] so that f(t) ~ Re(sum c F(s))."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    k = np.arange(M)
    theta = k * np.pi / M
    r = 2.0 * M / (5.0 * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        cot = np.where(k > 0, 1.0 / np.tan(np.where(k > 0, theta, 1.0)), 0.0)
        sig = np.where(k > 0, theta + (theta * cot - 1.0) * cot, 0.0)
    s = np.where(k > 0, theta * (cot + 1j), 1.0)[None, :] * r[:, None]
    c = np.exp(s * t[:, None]) * np.where(k > 0, 1.0 + 1j * sig, 0.5)[None, :] * (r / M)[:, None]
    return s, c


def talbot_invert(F, t, M: int = 32):
    """Inverse Laplace transform of a vectorised ``F`` at times ``t``."""
    s, c = talbot_contour(t, M)
    return np.real(np.sum(c * F(s), axis=1))


# ---------------------------------------------------------------- distribution of Q_R

class ExtrapolationError(ValueError):
    pass


class ILTError(FredholmError):
    pass


def ambient_laplace(zeta: float, alpha, mu: float, R: float, exclusion: float = 0.0):
    """Vectorised s -> E[exp(-s Q)] for unit emitter power (Q = sum_k h_k |x_k|^-mu).

    Emitters closer than ``exclusion`` to the relay are absent.
    """
    basis = ring_basis(zeta, R, (exclusion,) if exclusion > 0 else ())
    rmu = basis.r ** mu
    live = (basis.r >= exclusion)[:, None]

    def L(s, log=False):
        s = np.asarray(s, dtype=complex)
        flat = s.ravel()
        out = np.empty(flat.shape, dtype=complex)
        for i in range(0, flat.size, 512):
            ss = flat[i:i + 512]
            m = np.where(live, ss[None, :] / (rmu[:, None] + ss[None, :]), 0.0)
            out[i:i + 512] = radial_laplace(basis, alpha, m, log=True)
        out = out.reshape(s.shape)
        return out if log else np.exp(out)

    return L


@dataclass
class QDistribution:
    """Tabulated law of the received ambient power Q_R.

    ``logq`` is a uniform grid in ln q; ``phi = q f_Q(q)`` is the density of ln Q_R on it,
    interpolated by a cubic spline. ``cdf`` comes from a separate inversion of L(s)/s.
    Mass below ``q_lo`` / above ``q_hi`` is carried by the end values of ``cdf``.
    """
    logq: np.ndarray
    phi: np.ndarray
    cdf_values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        from scipy.interpolate import CubicSpline, PchipInterpolator
        self._phi = CubicSpline(self.logq, self.phi)
        self._cdf = PchipInterpolator(self.logq, np.maximum.accumulate(self.cdf_values))

    @property
    def q(self) -> np.ndarray:
        return np.exp(self.logq)

    @property
    def q_lo(self) -> float:
        return float(np.exp(self.logq[0]))

    @property
    def q_hi(self) -> float:
        return float(np.exp(self.logq[-1]))

    @property
    def mass_below(self) -> float:
        return float(self.cdf_values[0])

    @property
    def mass_above(self) -> float:
        return float(1.0 - self.cdf_values[-1])

    def pdf(self, q):
        q = np.asarray(q, dtype=float)
        x = np.log(np.where(q > 0, q, 1.0))
        inside = (q > 0) & (x >= self.logq[0]) & (x <= self.logq[-1])
        return np.where(inside, self._phi(np.clip(x, self.logq[0], self.logq[-1])) / np.where(q > 0, q, 1.0), 0.0)

    def cdf(self, q):
        q = np.asarray(q, dtype=float)
        x = np.log(np.where(q > 0, q, 1e-300))
        val = self._cdf(np.clip(x, self.logq[0], self.logq[-1]))
        val = np.where(x < self.logq[0], np.where(q > 0, self.cdf_values[0], 0.0), val)
        return np.where(x > self.logq[-1], self.cdf_values[-1], val)

    def scaled(self, c: float) -> "QDistribution":
        """Law of c * Q_R."""
        meta = dict(self.meta, scale=self.meta.get("scale", 1.0) * c)
        return QDistribution(self.logq + math.log(c), self.phi, self.cdf_values, meta)

    # -- integration

    def _clip(self, a, b, strict):
        if strict and (a > self.q_hi or (math.isfinite(b) and b < self.q_lo)):
            raise ExtrapolationError(f"[{a}, {b}] lies outside the tabulated support "
                                     f"[{self.q_lo:.3e}, {self.q_hi:.3e}]")
        lo = max(a, self.q_lo) if a > 0 else self.q_lo
        hi = min(b, self.q_hi)
        return lo, hi

    def expect(self, g, a: float = -math.inf, b: float = math.inf, strict: bool = True,
               epsrel: float = 1e-6) -> float:
        """int_a^b g(q) f_Q(q) dq by adaptive quadrature on ln q, plus tail masses.

        Mass outside the table is weighted by g at the nearest table end.
        """
        from scipy.integrate import quad
        if not a < b:
            raise ValueError("need a < b")
        lo, hi = self._clip(a, b, strict)
        total = 0.0
        if hi > lo:
            val, _ = quad(lambda x: g(math.exp(x)) * float(self._phi(x)), math.log(lo), math.log(hi),
                          epsrel=epsrel, epsabs=1e-13, limit=200)
            total += val
        if a <= self.q_lo:
            total += g(self.q_lo) * self.mass_below
        if b >= self.q_hi:
            total += g(self.q_hi) * self.mass_above
        return total

    def expect_fixed(self, g, a: float, b: float = math.inf, order: int = 96) -> float:
        """Vectorised fixed-order variant: ``g`` receives an array of q values."""
        lo, hi = self._clip(a, b, False)
        total = 0.0
        if hi > lo:
            x, w = gauss_log_nodes(lo, hi, order)
            total += float(np.sum(w * np.asarray(g(np.exp(x))) * self._phi(x)))
        if a <= self.q_lo:
            total += float(np.asarray(g(np.array([self.q_lo])))[0]) * self.mass_below
        if b >= self.q_hi:
            total += float(np.asarray(g(np.array([self.q_hi])))[0]) * self.mass_above
        return total

    def nodes(self, a: float, b: float, order: int = 96):
        """(q, weight) pairs so that sum w g(q) ~ int_a^b g f_Q dq inside the table."""
        lo, hi = self._clip(a, b, False)
        if hi <= lo:
            return np.zeros(0), np.zeros(0)
        x, w = gauss_log_nodes(lo, hi, order)
        return np.exp(x), w * self._phi(x)

    def to_rows(self):
        q = self.q
        return np.column_stack([q, self.phi / q, self.cdf_values])


def gauss_log_nodes(lo: float, hi: float, order: int):
    """Gauss-Legendre nodes in ln q over [lo, hi], split into panels of at most one e-fold."""
    a, b = math.log(lo), math.log(hi)
    n_pan = max(1, int(math.ceil((b - a) / 1.0)))
    per = max(4, int(math.ceil(order / n_pan)))
    per = min(per, 24)
    return gl_panels(np.linspace(a, b, n_pan + 1), per)


def partial_expectation(dist: QDistribution, g, a: float, b: float = math.inf) -> float:
    """int_a^b g(q) f_Q(q) dq against a tabulated distribution."""
    return dist.expect(g, a, b, strict=True)


@functools.lru_cache(maxsize=16)
def _unit_q_distribution(zeta: float, alpha, mu: float, R: float, exclusion: float, M: int,
                         per_decade: int):
    L = ambient_laplace(zeta, alpha, mu, R, exclusion)
    # characteristic unit-power scale
    x0 = (math.pi * zeta) ** (mu / 2.0)
    coarse = x0 * 10.0 ** np.arange(-4.0, 14.01, 0.5)
    Fc = talbot_invert(lambda s: L(s) / s, coarse, M)
    lo_idx = np.nonzero(Fc < 1e-9)[0]
    if lo_idx.size == 0:
        raise ILTError("lower tail not reached; widen the scan")
    first_big = np.nonzero(Fc > 1e-9)[0][0]
    x_lo = coarse[max(first_big - 1, 0)]
    hi_idx = np.nonzero(1.0 - Fc < 1e-6)[0]
    hi_idx = hi_idx[hi_idx > first_big]
    x_hi = coarse[hi_idx[0]] if hi_idx.size else coarse[-1]
    n = int(math.ceil(math.log10(x_hi / x_lo) * per_decade)) + 1
    logq = np.linspace(math.log(x_lo), math.log(x_hi), n)
    x = np.exp(logq)
    s, c = talbot_contour(x, M)
    Ls = L(s)
    pdf = np.real(np.sum(c * Ls, axis=1))
    cdf = np.real(np.sum(c * Ls / s, axis=1))
    phi = x * pdf
    scale = float(np.max(phi))
    if np.any(phi < -1e-6 * scale):
        raise ILTError(f"negative density {phi.min():.3e} after inversion; raise M")
    if np.any(np.diff(cdf) < -1e-6):
        raise ILTError("CDF not monotone after inversion; raise M")
    phi = np.maximum(phi, 0.0)
    cdf = np.clip(cdf, 0.0, 1.0)
    meta = {"ilt": "fixed-talbot", "M": M, "points_per_decade": per_decade,
            "intensity": zeta, "repulsion": alpha, "pathloss": mu, "window_radius": R,
            "exclusion_radius": exclusion}
    return logq, phi, cdf, meta


def q_distribution_for(zeta: float, alpha, mu: float, R: float, power: float, exclusion: float = 0.0,
                       M: int = 32, per_decade: int = 16) -> QDistribution:
    logq, phi, cdf, meta = _unit_q_distribution(float(zeta), alpha, float(mu), float(R), float(exclusion),
                                                M, per_decade)
    d = QDistribution(logq.copy(), phi.copy(), cdf.copy(), dict(meta))
    return d.scaled(power)


def q_distribution(cfg, M: int = 32, per_decade: int = 16) -> QDistribution:
    """Law of Q_R for ``cfg`` (memoised on the ambient-field parameters)."""
    d = q_distribution_for(cfg.emitter_density, cfg.emitter_repulsion, cfg.pathloss_ambient,
                           cfg.window_radius, cfg.emitter_power, cfg.exclusion_radius, M, per_decade)
    d.meta["config_hash"] = cfg.digest()
    return d


def write_q_table(dist: QDistribution, path) -> tuple:
    """CSV (q_W, pdf, cdf) plus a JSON sidecar holding the inversion parameters."""
    import json
    from pathlib import Path
    path = Path(path)
    np.savetxt(path, dist.to_rows(), delimiter=",", header="q_W,pdf,cdf", comments="", fmt="%.17g")
    side = path.with_suffix(".json")
    side.write_text(json.dumps(dist.meta, indent=2, sort_keys=True, default=str))
    return path, side
