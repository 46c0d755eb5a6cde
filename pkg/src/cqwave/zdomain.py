"""Z-domain machinery for convolution quadrature.

Forward and inverse Z-transforms on a circular contour, the multistep
symbols that map contour nodes to modified-Helmholtz frequencies, and the
exact trapezoidal-rule error theory expressed as executable functions.

Sign and index conventions used throughout the package:

* contour nodes are ``z_k = lam * exp(2j*pi*k/n_freq)`` for ``k = 1..n_freq``
  and arrays of per-node values are stored in that order, so index ``i``
  holds node ``k = i + 1`` and the last entry is the real node ``z = lam``;
* the Z-transform is ``X(z) = sum_n x_n z**n``;
* a node frequency is ``omega = gamma(z) / (c*dt)`` (modified Helmholtz
  ``omega**2 U - Laplace U = 0``) and the Helmholtz wavenumber is
  ``k = 1j*omega``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "AmplificationWarning",
    "ContourSpec",
    "TimeGrid",
    "MultistepRule",
    "BACKWARD_EULER",
    "BDF2",
    "get_rule",
    "TimeSignal",
    "FrequencySamples",
    "contour_nodes",
    "multistep_symbol",
    "frequency_of_node",
    "ztransform_at_node",
    "ztransform_nodes",
    "inverse_ztransform",
    "half_spectrum_indices",
    "expand_half_spectrum",
    "aliasing_error_oracle",
    "decay_bound",
    "predicted_rate",
]

AMPLIFICATION_LIMIT = 1e8


class AmplificationWarning(RuntimeWarning):
    """lam**(-n) scaling of the inverse transform is large enough to amplify solve errors."""


@dataclass(frozen=True)
class ContourSpec:
    """Circle of radius ``lam`` discretised by ``n_freq`` trapezoidal nodes."""

    lam: float
    n_freq: int

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ValueError(f"contour radius must be positive, got {self.lam!r}")
        if int(self.n_freq) != self.n_freq or self.n_freq < 1:
            raise ValueError(f"n_freq must be a positive integer, got {self.n_freq!r}")
        object.__setattr__(self, "n_freq", int(self.n_freq))
        object.__setattr__(self, "lam", float(self.lam))

    def nodes(self) -> np.ndarray:
        return contour_nodes(self)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid ``t_n = n*dt``, ``n = 0..n_steps-1``, for wave speed ``c``."""

    c: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"wave speed must be positive, got {self.c!r}")
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_final_time(cls, c: float, t_final: float, n_steps: int) -> "TimeGrid":
        return cls(c=float(c), dt=float(t_final) / int(n_steps), n_steps=int(n_steps))

    @property
    def t_final(self) -> float:
        return self.n_steps * self.dt

    @property
    def cdt(self) -> float:
        return self.c * self.dt

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.dt


@dataclass(frozen=True)
class MultistepRule:
    """Linear multistep rule given by its generating-polynomial coefficients."""

    name: str
    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(float(g) for g in self.coeffs)
        if not coeffs:
            raise ValueError("a multistep rule needs at least one coefficient")
        if abs(sum(coeffs)) > 1e-14 * max(abs(g) for g in coeffs):
            raise ValueError(f"rule {self.name!r} is inconsistent: gamma(1) != 0")
        object.__setattr__(self, "coeffs", coeffs)

    def symbol(self, z):
        return multistep_symbol(self, z)


BACKWARD_EULER = MultistepRule("backward-euler", (1.0, -1.0))
BDF2 = MultistepRule("bdf2", (1.5, -2.0, 0.5))
_RULES = {r.name: r for r in (BACKWARD_EULER, BDF2)}


def get_rule(name: str) -> MultistepRule:
    try:
        return _RULES[name]
    except KeyError:
        raise ValueError(f"unknown multistep rule {name!r}; expected one of {sorted(_RULES)}") from None


@dataclass(frozen=True)
class TimeSignal:
    """Samples ``values[n]`` at ``t_n = n*dt``; entries past the end are zero.

    Trailing axes of ``values`` index spatial points.
    """

    values: np.ndarray
    dt: float = 1.0
    tag: str = "scalar"

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim == 0 or values.shape[0] < 1:
            raise ValueError("a time signal needs at least one sample")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class FrequencySamples:
    """Values of a Z-transform at the nodes of ``contour`` (index ``i`` is node ``k = i + 1``)."""

    values: np.ndarray
    contour: ContourSpec = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape[0] != self.contour.n_freq:
            raise ValueError(
                f"expected {self.contour.n_freq} node values, got {values.shape[0]}"
            )
        object.__setattr__(self, "values", values)


def contour_nodes(contour: ContourSpec) -> np.ndarray:
    """Return ``z_k = lam * exp(2j*pi*k/n_freq)`` for ``k = 1..n_freq``."""
    k = np.arange(1, contour.n_freq + 1)
    # exact quarter turns keep nodes like lam*1j free of cos(pi/2) round-off
    angle = 2.0 * np.pi * k / contour.n_freq
    nodes = contour.lam * np.exp(1j * angle)
    quarter = (4 * k) % contour.n_freq == 0
    if np.any(quarter):
        q = ((4 * k[quarter]) // contour.n_freq) % 4
        nodes[quarter] = contour.lam * np.array([1, 1j, -1, -1j])[q]
    return nodes


def multistep_symbol(rule: MultistepRule, z):
    """Evaluate ``gamma(z) = sum_n gamma_n z**n`` by Horner's scheme."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros_like(z)
    for g in reversed(rule.coeffs):
        out = out * z + g
    return out[()] if out.ndim == 0 else out


def frequency_of_node(gamma_value, grid: TimeGrid):
    """Map a symbol value to ``(omega, k)`` with ``omega = gamma/(c*dt)`` and ``k = 1j*omega``."""
    omega = np.asarray(gamma_value, dtype=complex) / grid.cdt
    k = 1j * omega
    if omega.ndim == 0:
        return omega[()], k[()]
    return omega, k


def ztransform_at_node(signal: TimeSignal, z: complex):
    """Horner evaluation of ``sum_n values[n] * z**n`` along the time axis."""
    values = signal.values
    acc = np.zeros(values.shape[1:], dtype=complex)
    for v in values[::-1]:
        acc = acc * z + v
    return acc[()] if acc.ndim == 0 else acc


def ztransform_nodes(signal: TimeSignal, contour: ContourSpec) -> FrequencySamples:
    """Z-transform at every contour node by exact aliasing fold plus one DFT.

    The signal is folded onto ``n_freq`` bins with weights ``lam**(r + kappa*n_freq)``,
    so signals longer than the contour are transformed exactly.
    """
    values = np.asarray(signal.values)
    nf = contour.n_freq
    n_sig = values.shape[0]
    n_pad = -(-n_sig // nf) * nf
    powers = contour.lam ** np.arange(n_pad, dtype=float)
    padded = np.zeros((n_pad,) + values.shape[1:], dtype=complex)
    padded[:n_sig] = values
    padded *= powers.reshape((-1,) + (1,) * (values.ndim - 1))
    folded = padded.reshape((n_pad // nf, nf) + values.shape[1:]).sum(axis=0)
    # sum_r a_r exp(+2j*pi*k*r/nf) for k = 0..nf-1, then rotate to k = 1..nf
    spectrum = np.fft.ifft(folded, axis=0) * nf
    return FrequencySamples(np.roll(spectrum, -1, axis=0), contour)


def inverse_ztransform(samples: FrequencySamples, n_out: int) -> TimeSignal:
    """Trapezoidal inversion ``u[n] = (1/Nf) sum_k U(z_k) z_k**(-n)``, ``n < n_out``.

    Evaluated as one length-``n_freq`` DFT followed by ``lam**(-n)`` scaling.
    Outputs with ``n >= n_freq`` are fully aliased copies and are returned as
    such.
    """
    contour = samples.contour
    nf = contour.n_freq
    if n_out < 1:
        raise ValueError("n_out must be positive")
    amplification = contour.lam ** (-(n_out - 1))
    if amplification > AMPLIFICATION_LIMIT:
        warnings.warn(
            f"inverse transform scales node data by up to {amplification:.3e} "
            f"(lam={contour.lam}, n_out={n_out}); frequency-solve errors are amplified",
            AmplificationWarning,
            stacklevel=2,
        )
    # DFT bin 0 holds node k = n_freq
    ordered = np.roll(samples.values, 1, axis=0)
    spectrum = np.fft.fft(ordered, axis=0) / nf
    n = np.arange(n_out)
    u = spectrum[n % nf]
    scale = contour.lam ** (-n.astype(float))
    u = u * scale.reshape((-1,) + (1,) * (u.ndim - 1))
    return TimeSignal(u)


def half_spectrum_indices(n_freq: int) -> np.ndarray:
    """Node indices ``k`` that determine the rest by conjugate symmetry: ``n_freq, 1..n_freq//2``."""
    return np.concatenate(([n_freq], np.arange(1, n_freq // 2 + 1))).astype(int)


def expand_half_spectrum(half, contour: ContourSpec, tol: float = 1e-10) -> FrequencySamples:
    """Fill all nodes from values at ``half_spectrum_indices(contour.n_freq)``.

    Uses ``U(conj z) = conj U(z)``, valid when the time data are real. Values at
    real nodes (``z = lam`` and, for even ``n_freq``, ``z = -lam``) must be real.
    """
    half = np.asarray(half, dtype=complex)
    nf = contour.n_freq
    idx = half_spectrum_indices(nf)
    if half.shape[0] != idx.size:
        raise ValueError(
            f"half spectrum for n_freq={nf} needs {idx.size} node values, got {half.shape[0]}"
        )
    scale = max(1.0, float(np.max(np.abs(half)))) if half.size else 1.0
    real_rows = [0] + ([idx.size - 1] if nf % 2 == 0 and nf > 1 else [])
    for row in real_rows:
        if np.max(np.abs(half[row].imag), initial=0.0) > tol * scale:
            raise ValueError(
                f"value at real node k={idx[row]} has imaginary part above {tol}; "
                "time data are not real or node bookkeeping is wrong"
            )
    full = np.empty((nf,) + half.shape[1:], dtype=complex)
    for row, k in enumerate(idx):
        full[k - 1] = half[row]
        mirror = nf - k
        if 1 <= mirror <= nf - 1 and mirror != k:
            full[mirror - 1] = np.conj(half[row])
    for row in real_rows:
        full[idx[row] - 1] = half[row].real
    return FrequencySamples(full, contour)


def aliasing_error_oracle(
    taylor: Sequence[complex] | Callable[[int], complex],
    contour: ContourSpec,
    n: int,
    max_terms: int = 100_000,
) -> complex:
    """Exact trapezoidal error ``sum_{kappa>=1} lam**(kappa*Nf) * c[n + kappa*Nf]``.

    ``taylor`` is either a finite coefficient sequence (zero beyond its end) or
    a callable ``c(n)``. The series stops once a term falls below ``1e-18`` of
    the partial sum.
    """
    lam, nf = contour.lam, contour.n_freq
    if callable(taylor):
        coef = taylor
        length = None
    else:
        seq = np.asarray(taylor)
        length = seq.shape[0]

        def coef(j):
            return seq[j] if j < length else 0.0

    total = 0.0 + 0.0j
    prev = None
    growth = 0
    for kappa in range(1, max_terms + 1):
        j = n + kappa * nf
        if length is not None and j >= length:
            return total
        term = lam ** (kappa * nf) * complex(coef(j))
        total += term
        mag = abs(term)
        if mag <= 1e-18 * abs(total):
            return total
        if prev is not None and mag > prev:
            growth += 1
            if growth >= 3:
                raise ValueError("aliasing series diverges: terms are not decreasing")
        else:
            growth = 0
        prev = mag
    raise ValueError(f"aliasing series did not converge within {max_terms} terms")


def decay_bound(max_modulus_on_circle: float, lambda_hat: float, n: int) -> float:
    """Cauchy estimate ``|c_n| <= max_{|z|=lambda_hat} |U| * lambda_hat**(-n)``."""
    if lambda_hat <= 0:
        raise ValueError("lambda_hat must be positive")
    return float(max_modulus_on_circle) * float(lambda_hat) ** (-n)


def predicted_rate(lam: float, lambda_u: float) -> float:
    """Geometric convergence factor ``lam / lambda_u`` per added frequency."""
    if lam <= 0:
        raise ValueError("contour radius must be positive")
    if lam >= lambda_u:
        raise ValueError(
            f"contour radius {lam} is not inside the analyticity radius {lambda_u}: "
            "a singularity lies on or inside the contour"
        )
    return lam / lambda_u
