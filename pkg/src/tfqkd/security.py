"""Phase-error upper bound and secure key rate.

Projecting the local qubit of the entanglement-based picture leaves the
optical mode in an even or odd cat state whose photon-number amplitudes
are Poissonian,

    c_n = e^(-alpha^2/2) alpha^n / sqrt(n!)

restricted to even n (outcome 0) or odd n (outcome 1).  A Cauchy-Schwarz
argument bounds the undetectable phase-error rate by a square of
cat-weighted square-root yields; yields that are not individually bounded
enter with the trivial bound 1 through the coefficient-sum tail.  The key
rate combines the X-basis gain with binary-entropy penalties for the bit
and phase error rates.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnsupportedAmplitudeError, ZeroGainError

#: Photon-number pairs whose yields are individually upper-bounded; all
#: other pairs fall back to the trivial bound 1.
BOUNDED_PAIRS = ((0, 0), (2, 0), (0, 2), (1, 1), (2, 2))

MAX_AMPLITUDE = 10.0
DEFAULT_TAIL_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CatStateCoefficients:
    """Truncated photon-number amplitudes of the even/odd cat states.

    even/odd hold c_n for n = 0,2,...  and n = 1,3,... up to n_max.
    even_sum/odd_sum are the full amplitude sums, accumulated to machine
    convergence independently of n_max, so trivially-bounded tails never
    get undercounted.
    """

    alpha: float
    even: tuple[float, ...]
    odd: tuple[float, ...]
    n_max: int
    even_sum: float
    odd_sum: float

    def amplitude(self, n: int) -> float:
        """c_n, zero for n beyond the truncation."""
        if n < 0:
            raise DomainError(f"photon number must be nonnegative, got {n}")
        if n > self.n_max:
            return 0.0
        return self.even[n // 2] if n % 2 == 0 else self.odd[n // 2]

    def dense(self, size: int) -> np.ndarray:
        """Amplitudes c_0..c_(size-1) as a vector, zero-padded/truncated."""
        out = np.zeros(size)
        for n in range(min(size, self.n_max + 1)):
            out[n] = self.amplitude(n)
        return out


def cat_coefficients(alpha: float, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE) -> CatStateCoefficients:
    """Cat-state amplitudes with adaptive truncation.

    n_max is the smallest photon number for which the omitted squared
    amplitude mass (a Poisson tail in alpha^2) stays below tail_tolerance.
    """
    if alpha < 0.0:
        raise DomainError(f"amplitude must be nonnegative, got {alpha}")
    if alpha > MAX_AMPLITUDE:
        raise UnsupportedAmplitudeError(f"amplitude {alpha} is far outside the protocol regime (max {MAX_AMPLITUDE})")
    if not (0.0 < tail_tolerance <= 1e-6):
        raise DomainError(f"tail tolerance must lie in (0, 1e-6], got {tail_tolerance}")

    mu = alpha * alpha
    # Walk the Poisson weights w_n = e^-mu mu^n / n!; amplitudes are sqrt(w_n).
    weight = math.exp(-mu)
    amplitude = math.exp(-0.5 * mu)
    covered = weight
    amplitudes = [amplitude]
    n = 0
    while 1.0 - covered > tail_tolerance:
        n += 1
        weight *= mu / n
        amplitude = math.sqrt(weight)
        covered += weight
        amplitudes.append(amplitude)
        if n > 4000:  # unreachable for alpha <= 10; guards the loop
            raise DomainError("cat-state truncation failed to converge")
    n_max = n

    # Amplitude sums to machine convergence (tail terms decay superexponentially).
    even_sum = odd_sum = 0.0
    term = math.exp(-0.5 * mu)
    k = 0
    while True:
        if k % 2 == 0:
            even_sum += term
        else:
            odd_sum += term
        k += 1
        term *= alpha / math.sqrt(k)
        if term < 1e-18 * (even_sum + odd_sum + 1.0) and k > n_max:
            break

    return CatStateCoefficients(
        alpha=alpha,
        even=tuple(amplitudes[0::2]),
        odd=tuple(amplitudes[1::2]),
        n_max=n_max,
        even_sum=even_sum,
        odd_sum=odd_sum,
    )


@dataclass(frozen=True)
class YieldBounds:
    """Upper bounds on the five individually-constrained yields.

    Pairs follow BOUNDED_PAIRS ordering; every other photon-number pair is
    bounded trivially by tail_default (1 unless deliberately overridden in
    limiting-case analyses).
    """

    u00: float
    u20: float
    u02: float
    u11: float
    u22: float
    tail_default: float = 1.0

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not (0.0 <= value <= 1.0):
                raise DomainError(f"yield bound {name} must lie in [0, 1], got {value}")
        if not (0.0 <= self.tail_default <= 1.0):
            raise DomainError(f"tail default must lie in [0, 1], got {self.tail_default}")

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {
            (0, 0): self.u00,
            (2, 0): self.u20,
            (0, 2): self.u02,
            (1, 1): self.u11,
            (2, 2): self.u22,
        }


def _bracket_pair(cat_a: CatStateCoefficients, cat_b: CatStateCoefficients, sqrt_bounds: np.ndarray,
                  default: float = 1.0) -> tuple[float, float]:
    """Even and odd Cauchy-Schwarz brackets for a square-root-bound matrix.

    sqrt_bounds[n, m] holds sqrt of the yield bound for pair (n, m); pairs
    outside the matrix take sqrt(default).  Each bracket is

        T_i + sum_nm c_n c_m (sqrt_bounds[n, m] - sqrt(default))

    with T_i the product of full amplitude sums, i.e. every unlisted pair
    is bounded by default (the trivial bound 1 in normal operation).
    """
    size = sqrt_bounds.shape[0]
    sqrt_default = math.sqrt(default)
    vec_a = cat_a.dense(size)
    vec_b = cat_b.dense(size)
    correction = sqrt_bounds - sqrt_default
    even_mask = np.arange(size) % 2 == 0
    a_even = np.where(even_mask, vec_a, 0.0)
    b_even = np.where(even_mask, vec_b, 0.0)
    a_odd = vec_a - a_even
    b_odd = vec_b - b_even
    bracket_even = sqrt_default * cat_a.even_sum * cat_b.even_sum + a_even @ correction @ b_even
    bracket_odd = sqrt_default * cat_a.odd_sum * cat_b.odd_sum + a_odd @ correction @ b_odd
    return max(0.0, bracket_even), max(0.0, bracket_odd)


def phase_error_bound_from_matrix(p_xx: float, cat_a: CatStateCoefficients, cat_b: CatStateCoefficients,
                                  bound_matrix: np.ndarray) -> float:
    """Phase-error upper bound from a dense matrix of yield upper bounds.

    bound_matrix[n, m] bounds the yield of pair (n, m); pairs beyond the
    matrix edge are bounded by 1.  Used when yields are perfectly known
    (bounds equal the true yields) and in limiting-case tests.
    """
    if p_xx <= 0.0:
        raise ZeroGainError("phase-error bound undefined at zero X-basis gain (no-key event)")
    sqrt_bounds = np.sqrt(np.clip(np.asarray(bound_matrix, dtype=float), 0.0, 1.0))
    be, bo = _bracket_pair(cat_a, cat_b, sqrt_bounds)
    return float(min(1.0, (be * be + bo * bo) / p_xx))


def phase_error_upper_bound(p_xx: float, cat_a: CatStateCoefficients, cat_b: CatStateCoefficients,
                            yields: YieldBounds) -> float:
    """Phase-error upper bound from the five individually-bounded yields.

    All pairs other than the five take the trivial bound tail_default, so
    the even bracket covers {(0,0),(0,2),(2,0),(2,2)} and the odd bracket
    {(1,1)}; the result is min(1, (bracket_even^2 + bracket_odd^2)/p_xx).
    """
    if p_xx <= 0.0:
        raise ZeroGainError("phase-error bound undefined at zero X-basis gain (no-key event)")
    size = 3
    matrix = np.full((size, size), yields.tail_default)
    for (n, m), value in yields.as_dict().items():
        matrix[n, m] = value
    sqrt_bounds = np.sqrt(np.clip(matrix, 0.0, 1.0))
    be, bo = _bracket_pair(cat_a, cat_b, sqrt_bounds, default=yields.tail_default)
    return float(min(1.0, (be * be + bo * bo) / p_xx))


def binary_entropy(x: float) -> float:
    """h2(x) = -x log2 x - (1-x) log2 (1-x), with h2(0) = h2(1) = 0 by continuity."""
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"binary entropy argument must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def key_rate(p_xx: float, e_xx: float, e_zz_upper: float, pattern_count: int = 2,
             basis_weight: float = 1.0, error_correction_factor: float = 1.0) -> float:
    """Secure key rate in bits per pulse pair, clamped at zero.

        R = basis_weight * pattern_count * p_xx
            * max(0, 1 - f h2(e_xx) - h2(e_zz_upper))

    pattern_count is 2 because both single-click patterns contribute
    identically; basis_weight is 1 when every pulse is a signal pulse and
    the probability that both parties chose signal states otherwise.  The
    error-correction factor f defaults to 1 (no inefficiency modelled).

    Error rates are clamped at 1/2 before the entropy penalty: beyond that
    point no key can be distilled, and the symmetric decrease of h2 must
    not resurrect the rate.
    """
    if p_xx < 0.0 or not (0.0 <= basis_weight <= 1.0):
        raise DomainError(f"invalid gain {p_xx} or basis weight {basis_weight}")
    if pattern_count < 1:
        raise DomainError(f"pattern count must be positive, got {pattern_count}")
    net = (
        1.0
        - error_correction_factor * binary_entropy(min(e_xx, 0.5))
        - binary_entropy(min(e_zz_upper, 0.5))
    )
    return basis_weight * pattern_count * p_xx * max(0.0, net)
