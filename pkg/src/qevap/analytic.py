"""Semi-analytic kick model for a sharp potential step.

States below the step (0 <= k < kappa0) are standing waves with an
evanescent tail; above it (k' > kappa0) each energy carries a left-incident
state psi_{+k'} and a right-incident state psi_{-k'}.  Both families use the
1/sqrt(2 pi) plane-wave convention with unit incoming amplitude, so
psi_{+k'} is delta-normalized in k' and psi_{-k'} in the transmitted wave
number k'' = sqrt(k'^2 - kappa0^2).  Completeness therefore reads

    1 = int dk |k><k| + int dk' |+k'><+k'| + int dk'' |-k'><-k'|

and every k' integral over the right-incident family carries dk''/dk' = k'/k''.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import PacketSpec, ParticleSpec, WaveFunction
from .errors import ConfigError, ConvergenceError, PoleProximityError

_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class StepEigenParams:
    kappa0: float
    V0: float
    m: float
    hbar: float = 1.0

    def __post_init__(self):
        if not self.kappa0 > 0:
            raise ConfigError("kappa0 must be positive")
        k2 = 2.0 * self.m * self.V0 / self.hbar**2
        if abs(k2 - self.kappa0**2) > 1e-12 * self.kappa0**2:
            raise ConfigError("kappa0^2 != 2 m V0 / hbar^2")

    @classmethod
    def from_physical(cls, V0: float, particle: ParticleSpec) -> "StepEigenParams":
        return cls(math.sqrt(2.0 * particle.mass * V0) / particle.hbar, V0,
                   particle.mass, particle.hbar)

    @classmethod
    def from_kappa0(cls, kappa0: float) -> "StepEigenParams":
        """Scaled units hbar = m = 1."""
        return cls(kappa0, 0.5 * kappa0 * kappa0, 1.0, 1.0)

    def energy(self, k):
        return (self.hbar * k) ** 2 / (2.0 * self.m)


@dataclass(frozen=True)
class CoefficientPair:
    c_minus: complex
    c_plus: complex
    k: float
    k_prime: float
    q: float


# -- eigenfunctions -----------------------------------------------------------------

def reflection_below(k, params: StepEigenParams):
    """Unimodular reflection amplitude (k - i kappa) / (k + i kappa), kappa = sqrt(kappa0^2 - k^2)."""
    kap = np.sqrt(params.kappa0**2 - np.asarray(k, dtype=float) ** 2)
    return (k - 1j * kap) / (k + 1j * kap)


def eigen_below(k: float, params: StepEigenParams, x):
    """Sub-threshold step eigenfunction psi_k(x), step edge at x = 0."""
    if not 0.0 <= k < params.kappa0:
        raise ConfigError(f"eigen_below needs 0 <= k < kappa0 (k={k:.4g})")
    x = np.asarray(x, dtype=float)
    kap = math.sqrt(params.kappa0**2 - k * k)
    den = k + 1j * kap
    left = np.exp(1j * k * x) + ((k - 1j * kap) / den) * np.exp(-1j * k * x)
    right = (2.0 * k / den) * np.exp(-kap * np.maximum(x, 0.0))
    return np.where(x < 0, left, right) / _SQRT2PI


def scattering_amplitudes(k_prime: float, params: StepEigenParams) -> dict[str, float]:
    """Real step amplitudes above threshold.

    ``r_left``, ``t_left`` for incidence from the left (wave number k'),
    ``r_right``, ``t_right`` for incidence from the right (wave number k'').
    """
    kpp = math.sqrt(k_prime * k_prime - params.kappa0**2)
    s = k_prime + kpp
    return {
        "k_pp": kpp,
        "r_left": (k_prime - kpp) / s,
        "t_left": 2.0 * k_prime / s,
        "r_right": (kpp - k_prime) / s,
        "t_right": 2.0 * kpp / s,
    }


def eigen_above(k_prime: float, orientation: str, params: StepEigenParams, x):
    """Above-threshold scattering state psi_{+k'} ('+') or psi_{-k'} ('-')."""
    if not k_prime > params.kappa0:
        raise ConfigError(f"eigen_above needs k' > kappa0 (k'={k_prime:.4g})")
    x = np.asarray(x, dtype=float)
    a = scattering_amplitudes(k_prime, params)
    kpp = a["k_pp"]
    if orientation == "+":
        left = np.exp(1j * k_prime * x) + a["r_left"] * np.exp(-1j * k_prime * x)
        right = a["t_left"] * np.exp(1j * kpp * x)
    elif orientation == "-":
        left = a["t_right"] * np.exp(-1j * k_prime * x)
        right = np.exp(-1j * kpp * x) + a["r_right"] * np.exp(1j * kpp * x)
    else:
        raise ConfigError("orientation must be '+' or '-'")
    return np.where(x < 0, left, right) / _SQRT2PI


# -- closed-form kick coefficients ----------------------------------------------------

def _coefficients_array(k, kp, q, kappa0):
    """Vectorized amplitudes onto psi_{-k'} and psi_{+k'} (broadcasting k, kp)."""
    k = np.asarray(k, dtype=float)
    kp = np.asarray(kp, dtype=float)
    kap = np.sqrt(kappa0**2 - k * k)
    kpp = np.sqrt(kp * kp - kappa0**2)
    pre = 4j * kappa0**2 * k / (np.pi * (kp + kpp) * (k + 1j * kap))
    c_minus = (pre * kpp * q / ((kp + q) ** 2 - k * k)
               / ((kap - 1j * q) ** 2 + kp * kp - kappa0**2))
    c_plus = (pre * kp * q / ((kp * kp - (k + q) ** 2) * (kp * kp - (k - q) ** 2))
              * (kap + 1j * kpp + 1j * q) / (kap + 1j * kpp - 1j * q))
    return c_minus, c_plus


def _pole_distance(k, kp, q, kappa0) -> float:
    """Smallest relative size of the factors that vanish on the pole set."""
    kap = math.sqrt(kappa0**2 - k * k)
    kpp = math.sqrt(kp * kp - kappa0**2)
    scale = kp * kp + k * k + q * q
    facs = [
        abs((kp + q) ** 2 - k * k) / scale,
        abs(kp * kp - (k + q) ** 2) / scale,
        abs(kp * kp - (k - q) ** 2) / scale,
        abs((kap - 1j * q) ** 2 + kpp * kpp) / scale,
        abs(kap + 1j * kpp - 1j * q) / math.sqrt(scale),
    ]
    return min(facs)


def coefficients(k: float, k_prime: float, q: float, params: StepEigenParams) -> CoefficientPair:
    """Overlaps of exp(iqx) psi_k with psi_{-k'} and psi_{+k'}."""
    kappa0 = params.kappa0
    if not 0.0 <= k < kappa0 < k_prime:
        raise ConfigError("coefficients need 0 <= k < kappa0 < k'")
    if _pole_distance(k, k_prime, q, kappa0) < 1e-8:
        raise PoleProximityError(f"(k={k:.6g}, k'={k_prime:.6g}, q={q:.3g}) sits on a pole")
    cm, cp = _coefficients_array(k, k_prime, q, kappa0)
    return CoefficientPair(complex(cm), complex(cp), k, k_prime, q)


# -- brute-force overlap oracle -------------------------------------------------------

def _gauss_panels(a: float, b: float, width: float, order: int = 16):
    """Gauss-Legendre nodes/weights on [a, b] split into panels of about ``width``."""
    n = max(1, int(math.ceil((b - a) / width)))
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n + 1)
    h = np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + 0.5 * h[:, None] * xg[None, :]).ravel()
    weights = (0.5 * h[:, None] * wg[None, :]).ravel()
    return nodes, weights


def regularized_inner_product(bra: Callable, ket: Callable, eps_left: float, eps_right: float,
                              k_max: float, *, decades: float = 40.0, order: int = 16) -> complex:
    """int conj(bra(x)) ket(x) w(x) dx with w = exp(eps_left x) for x<0, exp(-eps_right x) for x>0.

    The domain is cut where the damping reaches exp(-decades); panels are
    about one period of the fastest oscillation ``k_max``.
    """
    width = 2.0 * math.pi / k_max
    total = 0.0j
    for sign, eps in ((-1.0, eps_left), (1.0, eps_right)):
        L = decades / eps
        u, w = _gauss_panels(0.0, L, width, order)
        x = sign * u
        total += np.sum(np.conj(bra(x)) * ket(x) * np.exp(-eps * u) * w)
    return complex(total)


def _richardson_zero(eps: np.ndarray, vals: np.ndarray) -> tuple[complex, float]:
    """Polynomial extrapolation to eps = 0 with an error estimate."""
    def neville(e, v):
        p = list(v)
        n = len(e)
        for m in range(1, n):
            for i in range(n - m):
                p[i] = (e[i + m] * p[i] - e[i] * p[i + 1]) / (e[i + m] - e[i])
        return p[0]

    full = neville(eps, vals)
    coarse = neville(eps[1:], vals[1:])
    return complex(full), float(abs(full - coarse))


def overlap_oracle(k: float, k_prime: float, orientation: str, q: float,
                   params: StepEigenParams, *, eps_factors=(0.02, 0.01, 0.005, 0.0025),
                   rtol: float = 1e-4, atol: float | None = None) -> complex:
    """Brute-force <psi_{orientation k'} | exp(iqx) psi_k> by damped quadrature.

    The convergence factor exp(-eps |x|) is driven to zero through a
    sequence of eps values scaled to the slowest oscillation of the
    integrand, and the results are extrapolated to eps = 0.
    """
    kappa0 = params.kappa0
    if not 0.0 <= k < kappa0 < k_prime:
        raise ConfigError("overlap_oracle needs 0 <= k < kappa0 < k'")
    kpp = math.sqrt(k_prime**2 - kappa0**2)
    kap = math.sqrt(kappa0**2 - k * k)
    freqs = [abs(s1 * k + q + s2 * k_prime) for s1 in (1, -1) for s2 in (1, -1)]
    slow = min(min(freqs), kap)
    fast = max(max(freqs), abs(q) + kpp) + kap
    if slow < 1e-6 * kappa0:
        raise PoleProximityError("oracle frequency too close to zero (pole)")

    def bra(x):
        return eigen_above(k_prime, orientation, params, x)

    def ket(x):
        return np.exp(1j * q * x) * eigen_below(k, params, x)

    eps = np.array(eps_factors, dtype=float) * slow
    vals = np.array([regularized_inner_product(bra, ket, e, e, fast) for e in eps])
    value, err = _richardson_zero(eps, vals)
    if atol is None:
        atol = 1e-6 / kappa0
    if err > rtol * abs(value) + atol:
        raise ConvergenceError(f"overlap extrapolation not converged (err {err:.3g})")
    return value


# -- spectral amplitude of the incident packet -------------------------------------

@dataclass
class SpectralAmplitude:
    """Amplitude f(k) of a state on the sub-threshold eigenfunctions, k in [0, kappa0)."""

    k: np.ndarray
    values: np.ndarray
    func: Callable | None = None

    def norm(self) -> float:
        return float(np.trapezoid(np.abs(self.values) ** 2, self.k))

    def __call__(self, k):
        if self.func is not None:
            return self.func(np.asarray(k, dtype=float))
        re = np.interp(k, self.k, self.values.real, left=0.0, right=0.0)
        im = np.interp(k, self.k, self.values.imag, left=0.0, right=0.0)
        return re + 1j * im

    def moments(self) -> tuple[float, float]:
        """Mean k and mean k^2 under |f|^2."""
        w = np.abs(self.values) ** 2
        n = np.trapezoid(w, self.k)
        return (float(np.trapezoid(self.k * w, self.k) / n),
                float(np.trapezoid(self.k**2 * w, self.k) / n))

    @classmethod
    def from_packet(cls, packet: PacketSpec, params: StepEigenParams, t: float = 0.0, *,
                    edge: float = 0.0, width_sigmas: float = 10.0,
                    n_nodes: int = 801) -> "SpectralAmplitude":
        """Gaussian packet, far left of the step at t=0, evolved freely to time ``t``.

        With the packet entirely at x < edge its overlap with psi_k reduces to
        the plane-wave Fourier amplitude; evolution in the eigenbasis is the
        phase exp(-i E_k t / hbar).
        """
        s = packet.sigma
        x_i = packet.x_i - edge
        kb = packet.k_bar
        dk = packet.delta_k
        norm = (2.0 * s * s / math.pi) ** 0.25

        def f(k):
            k = np.asarray(k, dtype=float)
            phase = -1j * (k - kb) * x_i - 1j * params.energy(k) * t / params.hbar
            out = norm * np.exp(-s * s * (k - kb) ** 2 + phase)
            return np.where((k >= 0) & (k < params.kappa0), out, 0.0)

        lo = max(0.0, kb - width_sigmas * dk)
        hi = min(params.kappa0 * (1.0 - 1e-12), kb + width_sigmas * dk)
        k = np.linspace(lo, hi, n_nodes)
        return cls(k, f(k), f)

    @classmethod
    def from_wavefunction(cls, psi: WaveFunction, params: StepEigenParams, k: np.ndarray, *,
                          edge: float = 0.0) -> "SpectralAmplitude":
        """Project a grid state onto psi_k for each node in ``k``."""
        x = psi.grid.x - edge
        dx = psi.grid.dx
        vals = np.array([np.trapezoid(np.conj(eigen_below(kk, params, x)) * psi.amplitudes, dx=dx)
                         for kk in k])
        return cls(np.asarray(k, dtype=float), vals)


# -- transmission from the supra-threshold expansion --------------------------------

@dataclass(frozen=True)
class AnalyticTransmission:
    T: float
    T_parseval: float
    t_evaluated: float
    plateau_residual: float
    tail_fraction: float
    supra_population: float
    pole_weight: float
    history: tuple[tuple[float, float], ...]


def _supra_amplitudes(f: SpectralAmplitude, q: float, params: StepEigenParams,
                      kpp: np.ndarray, kp: np.ndarray, chunk: int = 512):
    """B_{-}(k') and B_{+}(k') = int dk f(k) C_{-/+}(k, k', q)."""
    kappa0 = params.kappa0
    kn = f.k
    fw = f.values
    h = kn[1] - kn[0]
    w = np.full(kn.shape, h)
    w[0] = w[-1] = 0.5 * h
    fw = fw * w
    bm = np.empty(kp.shape, dtype=np.complex128)
    bp = np.empty(kp.shape, dtype=np.complex128)
    aq = abs(q)
    for s in range(0, kp.size, chunk):
        sl = slice(s, s + chunk)
        cm, cp = _coefficients_array(kn[None, :], kp[sl, None], q, kappa0)
        bm[sl] = cm @ fw
        bp[sl] = cp @ fw
    # all simple poles of the k-integrand sit at k = k' - |q|, inside the f range
    # only for k' < k_top + |q|: redo those with nodes mirrored about the pole
    k_top = min(kn[-1], kappa0)
    for i in np.nonzero((kp - aq > kn[0]) & (kp - aq < k_top))[0] if aq > 0 else ():
        kpole = kp[i] - aq
        below = kpole - (np.arange(int((kpole - kn[0]) / h)) + 0.5) * h
        above = kpole + (np.arange(int((k_top - kpole) / h)) + 0.5) * h
        nodes = np.concatenate((below[::-1], above))
        cm, cp = _coefficients_array(nodes, kp[i], q, kappa0)
        fv = f(nodes) * h
        bm[i] = np.sum(cm * fv)
        bp[i] = np.sum(cp * fv)
    return bm, bp


def _default_times(f: SpectralAmplitude, params: StepEigenParams) -> tuple[float, ...]:
    kbar, k2 = f.moments()
    dk = math.sqrt(max(k2 - kbar * kbar, 1e-300))
    tau = params.m / (params.hbar * kbar * dk)
    return tuple(tau * 2.0**n for n in range(1, 7))


def analytic_transmission(f: SpectralAmplitude, q: float, params: StepEigenParams, *,
                          kp_max_factor: float = 8.0, times: tuple[float, ...] | None = None,
                          plateau_tol: float = 1e-2, tail_tol: float = 1e-2,
                          pole_tol: float = 1e-8, raise_on_fail: bool = True) -> AnalyticTransmission:
    """Transmission carried by supra-threshold states after a kick exp(iqx).

    Builds the k' amplitudes, then evaluates the x > 0 probability of the
    supra-threshold wave at increasing times after the kick until it
    stops changing by more than ``plateau_tol``.  The x-space field is
    produced by one FFT per time on a k'' grid fine enough that the fastest
    component never wraps around the periodic box.
    """
    kappa0 = params.kappa0
    if times is None:
        times = _default_times(f, params)
    times = tuple(sorted(times))
    if f.k[-1] >= kappa0:
        raise ConfigError("spectral amplitude must live on k < kappa0")
    kbar, k2 = f.moments()
    if params.hbar**2 * (k2 + 2.0 * q * kbar + q * q) / (2.0 * params.m) >= params.V0:
        raise ConfigError("kick outside the small-transfer regime")

    aq = abs(q)
    band = f.k >= kappa0 - aq
    pole_weight = float(np.trapezoid(np.abs(f.values[band]) ** 2, f.k[band])) if band.sum() > 1 else 0.0
    if pole_weight > pole_tol:
        msg = f"spectral weight {pole_weight:.3g} within |q| of threshold: poles unresolved"
        if raise_on_fail:
            raise PoleProximityError(msg)

    kpp_max = math.sqrt((kp_max_factor * kappa0) ** 2 - kappa0**2)
    v_max = params.hbar * kpp_max / params.m
    box = 2.2 * v_max * times[-1] + 4.0 * math.pi / kappa0
    dkpp = 2.0 * math.pi / box
    n_half = int(math.ceil(kpp_max / dkpp))
    kpp = (np.arange(n_half) + 0.5) * dkpp
    kp = np.sqrt(kpp * kpp + kappa0**2)

    bm, bp = _supra_amplitudes(f, q, params, kpp, kp)
    s = kp + kpp
    t_left = 2.0 * kp / s
    r_right = (kpp - kp) / s
    # amplitudes per unit k'' of outgoing exp(+ik''x) and incoming exp(-ik''x) on x > 0
    a_out = (kpp / kp) * bp * t_left + bm * r_right
    a_in = bm
    dens_out = np.abs(a_out) ** 2
    t_parseval = float(np.sum(dens_out) * dkpp)
    supra = float(np.sum((kpp / kp) * np.abs(bp) ** 2 + np.abs(bm) ** 2) * dkpp)

    # tail beyond kp_max from a power-law fit over the top half of the k'' range
    upper = kpp > 0.5 * kpp_max
    good = upper & (dens_out > 0)
    tail = 0.0
    if good.sum() > 8 and t_parseval > 0:
        slope, icpt = np.polyfit(np.log(kpp[good]), np.log(dens_out[good]), 1)
        if slope < -1.0:
            tail = math.exp(icpt) * kpp_max ** (slope + 1.0) / (-(slope + 1.0))
        else:
            tail = math.inf
    tail_fraction = tail / t_parseval if t_parseval > 0 else 0.0

    # signed k'' axis for the FFT: negative half holds the incoming waves
    n = 2 * n_half
    kk = np.concatenate((-kpp[::-1], kpp))
    omega = params.hbar * kk * kk / (2.0 * params.m) + params.V0 / params.hbar
    phi0 = np.concatenate((a_in[::-1], a_out))
    x0 = -0.5 * box
    dxs = box / n
    xs = x0 + dxs * np.arange(n)
    pre = np.exp(1j * kk[0] * xs) * (dkpp * n / _SQRT2PI)
    shift = np.exp(1j * np.arange(n) * dkpp * x0)
    right = xs >= 0.0
    history = []
    value = math.nan
    residual = math.inf
    for t in times:
        psi = pre * np.fft.ifft(phi0 * np.exp(-1j * omega * t) * shift)
        p = float(np.sum(np.abs(psi[right]) ** 2) * dxs)
        if history:
            residual = abs(p - history[-1][1]) / max(abs(p), 1e-300)
        history.append((t, p))
        value = p
        if residual < plateau_tol:
            break

    result = AnalyticTransmission(value, t_parseval, history[-1][0], residual, tail_fraction,
                                  supra, pole_weight, tuple(history))
    if raise_on_fail:
        if residual >= plateau_tol:
            raise ConvergenceError(f"x > 0 probability did not plateau (residual {residual:.3g})")
        if tail_fraction > tail_tol:
            raise ConvergenceError(f"k' tail beyond {kp_max_factor} kappa0 is {tail_fraction:.3g}")
    return result


@dataclass(frozen=True)
class QuadraticFit:
    alpha: float
    max_deviation: float
    q: tuple[float, ...]
    T: tuple[float, ...]


def small_q_coefficient(f: SpectralAmplitude, params: StepEigenParams,
                        q_values=None, *, max_dev: float = 0.1, **kw) -> QuadraticFit:
    """Least-squares alpha in T(q) = alpha q^2 over a small-q sample."""
    if q_values is None:
        kbar, _ = f.moments()
        q_values = [s * r * kbar for r in (0.0025, 0.005, 0.01) for s in (1, -1)]
    q = np.asarray(q_values, dtype=float)
    T = np.array([analytic_transmission(f, qq, params, **kw).T for qq in q])
    alpha = float(np.sum(T * q**2) / np.sum(q**4))
    dev = float(np.max(np.abs(T - alpha * q**2) / (alpha * q**2)))
    fit = QuadraticFit(alpha, dev, tuple(q), tuple(T))
    if dev > max_dev:
        raise ConvergenceError(f"T(q) deviates from q^2 law by {dev:.3g}")
    return fit


@dataclass(frozen=True)
class PostKickEnergy:
    E_i: float
    E_f: float
    E_f_free: float

    @property
    def transfer(self) -> float:
        return self.E_f - self.E_i

    @property
    def transfer_free(self) -> float:
        return self.E_f_free - self.E_i


def post_kick_energy(f: SpectralAmplitude, q: float, params: StepEigenParams) -> PostKickEnergy:
    """Mean energy after a kick applied to a superposition of step eigenstates.

    Each psi_k is a standing wave with zero mean momentum, so the kick adds
    only hbar^2 q^2 / 2m; a kick in free space adds the cross term too.
    """
    kbar, k2 = f.moments()
    c = params.hbar**2 / (2.0 * params.m)
    return PostKickEnergy(c * k2, c * (k2 + q * q), c * (k2 + 2.0 * q * kbar + q * q))
