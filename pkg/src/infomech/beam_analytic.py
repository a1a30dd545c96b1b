"""Closed-form information kernels for a simply supported beam under a
moving point load with one rotation sensor.

All spatial arguments are span-normalized (s = x / L in [0, 1]); the sensor
sits at `rho`.  The adjoint tilt-influence moment is the piecewise-affine
field

    mu_rho(s) = -s      for s < rho,
                1 - s   for s > rho,

double valued at s = rho itself, and the moving-load bending-moment influence
is the triangular min/max surface.  Sweeping the load densely over the span
with design measure dz / sigma^2 gives the kernel and density in closed form;
these are the oracles the finite-element and dynamic layers are tested
against.

The kernel changes sign across the sensor location (through the mu factors)
while remaining PSD as a quadratic form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import ModeSet, _fix_signs


@dataclass(frozen=True)
class BeamSpec:
    """Geometry, load, sensor, and noise of the one-sensor moving-load test.

    length:   span [length]
    load:     moving point-load magnitude [force]
    sigma:    rotation noise standard deviation [rad]
    rho:      normalized sensor position in (0, 1)
    ei_ref:   reference flexural rigidity [force * length^2]
    """

    length: float = 1.0
    load: float = 1.0
    sigma: float = 1.0
    rho: float = 0.25
    ei_ref: float = 1.0

    def __post_init__(self):
        for name in ("length", "load", "sigma", "ei_ref"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie strictly inside (0, 1)")

    @property
    def kernel_prefactor(self) -> float:
        """P^2 L^3 / (6 sigma^2), the full-kernel scale."""
        return self.load**2 * self.length**3 / (6.0 * self.sigma**2)

    @property
    def kappa_v(self) -> float:
        """P^2 L^3 / (3 sigma^2), the diagonal-density scale."""
        return self.load**2 * self.length**3 / (3.0 * self.sigma**2)


def mu(rho: float, s):
    """Adjoint tilt-influence moment; undefined exactly at the sensor.

    Scalar or array `s`.  Use :func:`mu_onesided` for the two limits at rho.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s == rho):
        raise ValueError(
            f"mu is double valued at s = rho = {rho}; use mu_onesided for the limits"
        )
    out = np.where(s < rho, -s, 1.0 - s)
    return out if out.ndim else float(out)


def mu_onesided(rho: float) -> tuple[float, float]:
    """One-sided limits (left, right) of the influence moment at the sensor."""
    return -rho, 1.0 - rho


def moment_influence(s, zeta):
    """Normalized triangular moving-load bending-moment influence.

    Symmetric in (s, zeta); vanishes at the supports; peaks at 1/4 for
    s = zeta = 1/2.
    """
    s = np.asarray(s, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    lo = np.minimum(s, zeta)
    hi = np.maximum(s, zeta)
    out = lo * (1.0 - hi)
    return out if out.ndim else float(out)


def moment_product_integral(s, sbar):
    """Load-sweep integral of the two moment influences, unit prefactor.

    Closed form (1/6) a (1-b) (2b - a^2 - b^2) with a = min(s, sbar),
    b = max(s, sbar); the physical scale P^2 L^3 is factored out.
    """
    s = np.asarray(s, dtype=float)
    sbar = np.asarray(sbar, dtype=float)
    a = np.minimum(s, sbar)
    b = np.maximum(s, sbar)
    out = (1.0 / 6.0) * a * (1.0 - b) * (2.0 * b - a * a - b * b)
    return out if out.ndim else float(out)


def full_kernel(spec: BeamSpec, s, sbar):
    """Two-point compliance-information kernel of the dense load sweep.

    May be negative pointwise (the mu factors change sign across the
    sensor); the induced quadratic form is PSD.
    """
    val = (
        6.0
        * spec.kernel_prefactor
        * mu(spec.rho, s)
        * mu(spec.rho, sbar)
        * moment_product_integral(s, sbar)
    )
    return val if np.ndim(val) else float(val)


def diag_density(spec: BeamSpec, s):
    """Pointwise compliance-information density kappa_v mu^2 s^2 (1-s)^2."""
    s_arr = np.asarray(s, dtype=float)
    val = spec.kappa_v * mu(spec.rho, s_arr) ** 2 * s_arr**2 * (1.0 - s_arr) ** 2
    return val if np.ndim(val) else float(val)


def diag_density_onesided(spec: BeamSpec) -> tuple[float, float]:
    """Left and right density limits at the sensor position."""
    left, right = mu_onesided(spec.rho)
    base = spec.kappa_v * spec.rho**2 * (1.0 - spec.rho) ** 2
    return base * left**2, base * right**2


def jump_ratio(rho: float) -> float:
    """Analytic density jump density(rho+)/density(rho-) = (1-rho)^2/rho^2."""
    return (1.0 - rho) ** 2 / rho**2


def ei_kernel(spec: BeamSpec, v_field, s, sbar):
    """Kernel for flexural-rigidity perturbations: v^2-weighted congruence.

    `v_field` maps normalized position to compliance 1/EI and must be
    positive; the diagonal picks up the quartic factor v(s)^4.
    """
    vs = np.asarray(v_field(np.asarray(s, dtype=float)), dtype=float)
    vb = np.asarray(v_field(np.asarray(sbar, dtype=float)), dtype=float)
    if np.any(vs <= 0) or np.any(vb <= 0):
        raise ValueError("compliance field must be positive")
    val = vs**2 * full_kernel(spec, s, sbar) * vb**2
    return val if np.ndim(val) else float(val)


def midpoint_grid(n: int) -> np.ndarray:
    """Midpoint quadrature nodes on (0, 1); avoids the supports and, for n a
    multiple of four and rho = 0.25, the sensor point."""
    return (np.arange(n) + 0.5) / n


def discretized_operator(spec: BeamSpec, n: int):
    """Midpoint Nystrom discretization of the kernel on the dimensional span.

    Returns (s_mid, A) where A = w * K(x_i, x_j) is the symmetric matrix
    whose eigenvalues approximate the kernel-operator spectrum; w = L / n is
    the uniform quadrature weight.
    """
    from .opcore import InfoOperator

    s = midpoint_grid(n)
    weight = spec.length / n
    kernel = full_kernel(spec, s[:, None], s[None, :])
    return s, InfoOperator.from_dense(weight * kernel, labels=("beam-kernel",))


# ---------------------------------------------------------------------------
# semi-analytic sine-basis modes


def sine_influence_overlap(n: int, rho: float) -> np.ndarray:
    """Overlap matrix B[i, j] = 2 * int_0^1 sin(i pi s) mu_rho(s) sin(j pi s) ds.

    Exact piecewise antiderivatives (mu is affine on each side of rho), no
    quadrature.  Symmetric.  Uses mu_rho(s) = -s + 1[s > rho].
    """
    idx = np.arange(1, n + 1, dtype=float)
    i = idx[:, None]
    j = idx[None, :]
    dif = i - j
    tot = i + j
    with np.errstate(divide="ignore", invalid="ignore"):
        # S1 = int_0^1 s sin(i pi s) sin(j pi s) ds
        odd = (np.asarray(i + j) % 2).astype(bool)
        s1_off = np.where(odd, -4.0 * i * j / (np.pi**2 * dif**2 * tot**2), 0.0)
        # S2 = int_rho^1 sin(i pi s) sin(j pi s) ds
        s2_off = -0.5 * (
            np.sin(dif * np.pi * rho) / (dif * np.pi)
            - np.sin(tot * np.pi * rho) / (tot * np.pi)
        )
    diag = np.eye(n, dtype=bool)
    s1 = np.where(diag, 0.25, s1_off)
    s2_diag = 0.5 * ((1.0 - rho) + np.sin(2.0 * idx * np.pi * rho) / (2.0 * idx * np.pi))
    s2 = np.where(diag, s2_diag[:, None], s2_off)
    return -2.0 * s1 + 2.0 * s2


def galerkin_matrix(spec: BeamSpec, n_series: int) -> np.ndarray:
    """Sine-basis matrix of the sensor-weighted kernel operator.

    T = (P^2/sigma^2) sum_n (L/(n pi))^4 B[:, n] B[:, n]^T with the exact
    overlap matrix B; entries are exact up to the inner series truncation
    (which converges like n_series^-5).
    """
    b = sine_influence_overlap(n_series, spec.rho)
    idx = np.arange(1, n_series + 1, dtype=float)
    w4 = (spec.length / (idx * np.pi)) ** 4
    t = (spec.load**2 / spec.sigma**2) * (b * w4) @ b.T
    return 0.5 * (t + t.T)


def galerkin_modes(spec: BeamSpec, n_series: int, k: int) -> ModeSet:
    """Leading modes of the sensor-weighted operator in the sine basis.

    Mode columns are coefficient vectors in the orthonormal sine basis of
    the span; evaluate them in space with :func:`evaluate_sine_modes`.

    The sine basis cannot represent the jump of the true eigenfunctions at
    the sensor, so eigenvalues converge to the operator spectrum only at
    first order in 1/n_series (Ritz from below).
    """
    if n_series < k:
        raise ValueError("series truncation must be at least k")
    t = galerkin_matrix(spec, n_series)
    lam, vec = np.linalg.eigh(t)
    lam, vec = lam[::-1][:k].copy(), vec[:, ::-1][:, :k].copy()
    _fix_signs(vec, [])
    res = np.linalg.norm(t @ vec - vec * lam, axis=0)
    return ModeSet(lam, vec, "euclidean", res)


def evaluate_sine_modes(coeffs: np.ndarray, s: np.ndarray, length: float = 1.0) -> np.ndarray:
    """Evaluate sine-coefficient modes on normalized positions s.

    Basis functions sqrt(2/L) sin(n pi s) are orthonormal on (0, L).
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    if coeffs.ndim != 2:
        raise ValueError("coeffs must be (n_series, k)")
    n_series = coeffs.shape[0]
    s = np.asarray(s, dtype=float)
    basis = np.sqrt(2.0 / length) * np.sin(
        np.outer(s, np.arange(1, n_series + 1)) * np.pi
    )
    return basis @ coeffs


def density_curve(spec: BeamSpec, n_grid: int) -> tuple[np.ndarray, np.ndarray]:
    """Density sampled on a uniform grid, with the sensor point reported
    twice (left then right limit) per the double-valued convention."""
    s = np.linspace(0.0, 1.0, n_grid + 1)[1:-1]
    left, right = diag_density_onesided(spec)
    ss, vals = [], []
    for si in s:
        if si == spec.rho:
            ss.extend([si, si])
            vals.extend([left, right])
        else:
            ss.append(si)
            vals.append(diag_density(spec, si))
    if spec.rho not in s:
        ss.extend([spec.rho, spec.rho])
        vals.extend([left, right])
        order = np.argsort(np.asarray(ss), kind="stable")
        return np.asarray(ss)[order], np.asarray(vals)[order]
    return np.asarray(ss), np.asarray(vals)
