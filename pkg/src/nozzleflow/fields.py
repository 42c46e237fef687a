"""Tensor-grid scalar fields and discrete Sobolev norms.

Grid: uniform x1 nodes on [-1, 1 + l_ext] (node exactly at -1, 0, 1 and the
extended exit), equispaced periodic x2 nodes on [0, 2*pi). Derivatives are
spectral in x2 (FFT, exact on band-limited data) and second-order finite
differences in x1 (central stencils, one-sided at the boundary nodes).

Discrete H^s(M):  ( sum_{i+j<=s} ||d1^i d2^j f||_{L2}^2 )^{1/2}
with L2 by trapezoid in x1 times exact quadrature in x2.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid1D:
    n1: int          # nodes on [-1, 1], odd so x1 = 0 is a node
    n_ext: int       # extra nodes on (1, 1 + l_ext]
    dx: float
    nodes: np.ndarray  # all n1 + n_ext coordinates

    @property
    def n_total(self):
        return self.n1 + self.n_ext

    @property
    def l_ext(self):
        return self.n_ext * self.dx

    @property
    def x_m(self):
        """Nodes of the physical domain [-1, 1]."""
        return self.nodes[: self.n1]

    @property
    def i_throat(self):
        return (self.n1 - 1) // 2


def make_grid(n1, l_ext=1.0):
    """Uniform grid with spacing 2/(n1-1); l_ext is rounded to a whole
    number of cells so the extended exit is exactly a node."""
    if n1 < 9 or n1 % 2 == 0:
        raise ValueError(f"n1 must be odd and >= 9, got {n1}")
    dx = 2.0 / (n1 - 1)
    n_ext = int(round(l_ext / dx))
    nodes = -1.0 + dx * np.arange(n1 + n_ext)
    return Grid1D(n1=n1, n_ext=n_ext, dx=dx, nodes=nodes)


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Field2D:
    """values[i, j] at (x1[i], x2[j]), x2[j] = 2*pi*j/n2."""
    x1: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != len(self.x1):
            raise ValueError("values must be (len(x1), n2)")
        n2 = self.values.shape[1]
        if n2 < 8 or (n2 & (n2 - 1)) != 0:
            raise ValueError(f"n2 must be a power of two >= 8, got {n2}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    @property
    def n2(self):
        return self.values.shape[1]

    @property
    def dx(self):
        return float(self.x1[1] - self.x1[0])

    @property
    def x2(self):
        n2 = self.n2
        return 2.0 * np.pi * np.arange(n2) / n2


def field_like(field, values):
    return Field2D(x1=field.x1, values=np.asarray(values, dtype=float))


def restrict_to_m(field, n1):
    """Slice off the extension nodes, keeping [-1, 1]."""
    return Field2D(x1=field.x1[:n1], values=field.values[:n1].copy())


# ---------------------------------------------------------------------------
# finite-difference weights (Fornberg) and x1 derivative matrices
# ---------------------------------------------------------------------------

def fd_weights(z, xs, m):
    """Weights w with sum w[j] f(xs[j]) ~ f^(m)(z). Fornberg's algorithm."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = xs[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - z
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


# stencil sizes giving second-order accuracy for derivative order m
_STENCIL_PTS = {1: 3, 2: 4, 3: 5, 4: 6}
_CENTRAL_HALF = {1: 1, 2: 1, 3: 2, 4: 2}


@lru_cache(maxsize=None)
def _d1_matrix_cached(n, dx, order):
    half = _CENTRAL_HALF[order]
    D = np.zeros((n, n))
    for i in range(n):
        if half <= i < n - half:
            js = np.arange(i - half, i + half + 1)
        else:
            sz = _STENCIL_PTS[order]
            j0 = min(max(i - sz // 2, 0), n - sz)
            js = np.arange(j0, j0 + sz)
        D[i, js] = fd_weights(0.0, (js - i) * dx, order)
    return D


def d1_matrix(n, dx, order):
    """Dense x1 derivative matrix, second-order accurate, orders 1..4."""
    if order not in _STENCIL_PTS:
        raise ValueError(f"x1 derivative order must be 1..4, got {order}")
    return _d1_matrix_cached(n, float(dx), order)


@lru_cache(maxsize=None)
def _spectral_factors(n2, order):
    """ik-multipliers for the FFT derivative; Nyquist zeroed for odd orders."""
    m = np.fft.fftfreq(n2, d=1.0 / n2)
    fac = (1j * m) ** order
    if order % 2 == 1:
        fac[n2 // 2] = 0.0
    return fac


def d2_spectral(values, order):
    """Apply d/dx2^order along axis 1 via FFT."""
    if order == 0:
        return np.asarray(values, dtype=float).copy()
    vhat = np.fft.fft(values, axis=1)
    vhat *= _spectral_factors(values.shape[1], order)
    return np.real(np.fft.ifft(vhat, axis=1))


@lru_cache(maxsize=None)
def d2_matrix(n2, order):
    """Dense Fourier differentiation matrix, built by applying the FFT
    derivative to identity columns (exactly consistent with d2_spectral)."""
    return d2_spectral(np.eye(n2), order).T.copy()


def derivative(field, order1, order2):
    """d1^order1 d2^order2 of a Field2D. order1 <= 4, order2 <= 5."""
    if order1 > 4 or order1 < 0:
        raise ValueError("order1 must be 0..4")
    if order2 > 5 or order2 < 0:
        raise ValueError("order2 must be 0..5")
    vals = field.values
    if order2:
        vals = d2_spectral(vals, order2)
    if order1:
        D = d1_matrix(len(field.x1), field.dx, order1)
        vals = D @ vals
    return field_like(field, vals)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def _trapz_weights(n, dx):
    w = np.full(n, dx)
    w[0] = w[-1] = dx / 2.0
    return w


def l2_norm(field):
    """L2 over the field's own x1 range times S^1."""
    w = _trapz_weights(len(field.x1), field.dx)
    dx2 = 2.0 * np.pi / field.n2
    return float(np.sqrt(np.sum(w[:, None] * field.values**2) * dx2))


def sobolev_norm(field, s):
    """Discrete H^s norm, s <= 4."""
    if s < 0 or s > 4:
        raise ValueError("s must be 0..4")
    total = 0.0
    for i in range(s + 1):
        for j in range(s + 1 - i):
            total += l2_norm(derivative(field, i, j)) ** 2
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# circle data (entry perturbation g)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CircleSeries:
    """Real function on S^1 stored as complex Fourier coefficients g_hat[m],
    m = 0..n2/2 (one-sided; conjugate symmetry implied)."""
    coeffs: np.ndarray
    n2: int

    @property
    def max_mode(self):
        return self.n2 // 2


def series_from_modes(mode_amplitudes, n2):
    """Build g = sum_m amp_m cos(m x2) from {mode: amplitude}."""
    coeffs = np.zeros(n2 // 2 + 1, dtype=complex)
    for m, amp in mode_amplitudes.items():
        m = int(m)
        if m < 0 or m > n2 // 2:
            raise ValueError(f"mode {m} outside 0..{n2//2}")
        if m == 0:
            coeffs[0] = amp
        else:
            coeffs[m] = amp / 2.0
    return CircleSeries(coeffs=coeffs, n2=n2)


def series_eval(series, x2):
    """Evaluate g at points x2."""
    x2 = np.asarray(x2, dtype=float)
    out = np.full_like(x2, float(np.real(series.coeffs[0])))
    for m in range(1, len(series.coeffs)):
        c = series.coeffs[m]
        if c != 0:
            out = out + 2.0 * (np.real(c) * np.cos(m * x2) - np.imag(c) * np.sin(m * x2))
    return out


def circle_norm(series, s):
    """H^s(S^1) by the Fourier characterization:
    ( sum_m (1+m^2)^s |g_hat_m|^2 * 2*pi )^{1/2} over two-sided m."""
    if s < 0 or s > 5:
        raise ValueError("s must be 0..5")
    total = (1.0) ** s * abs(series.coeffs[0]) ** 2
    for m in range(1, len(series.coeffs)):
        total += 2.0 * (1.0 + m * m) ** s * abs(series.coeffs[m]) ** 2
    return float(np.sqrt(2.0 * np.pi * total))


# ---------------------------------------------------------------------------
# C-infinity transition ramp (used by the coefficient extension and the
# solver's dissipation envelopes)
# ---------------------------------------------------------------------------

def smooth_ramp(s):
    """C-infinity monotone ramp: 0 for s <= 0, 1 for s >= 1, all derivatives
    vanish at both ends."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(s > 0.0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
        b = np.where(s < 1.0, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
    out = a / (a + b)
    return out if out.ndim else float(out)
