"""Qubit-level analysis of the generalized polarization measurement.

The measured observable is the H/V imbalance s1 = |H><H| - |V><V|
(spectrum {-1, +1}). A meter photon prepared as gamma|H> + gammabar|V>
sets the measurement strength K = 2 gamma^2 - 1: K = 1 is projective,
K = 0 extracts nothing. Conditioning the meter record on a signal
postselection produces weak values (pH - pV)/K that can lie far outside
the spectrum when the postselection is nearly orthogonal to the input.

Everything here is closed-form; the Fock-level network in
:mod:`weakpol.device` must reproduce these statistics, and the tests hold
the two layers against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PostselectionImpossibleError, ZeroStrengthError

_REAL_TOL = 1e-12
# strengths below this are operationally zero: gamma = sqrt(1/2) does not
# square back to exactly 0.5 in floats, and ratios over such strengths are
# pure rounding noise
ZERO_STRENGTH_TOL = 1e-14
# postselection weights below this are rounding residue of an exact zero
_P_POST_TOL = 1e-24


@dataclass(frozen=True)
class Polarization:
    """Single-photon polarization amplitudes (alpha |H> + beta |V>)."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        n = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"polarization not normalized: |alpha|^2+|beta|^2 = {n}")

    @classmethod
    def from_angle(cls, theta_rad: float) -> "Polarization":
        return cls(math.cos(theta_rad), math.sin(theta_rad))

    @classmethod
    def from_degrees(cls, theta_deg: float) -> "Polarization":
        return cls.from_angle(math.radians(theta_deg))

    @property
    def is_real(self) -> bool:
        return abs(complex(self.alpha).imag) < _REAL_TOL and abs(complex(self.beta).imag) < _REAL_TOL

    def ket(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)


def horizontal() -> Polarization:
    return Polarization(1.0, 0.0)


def vertical() -> Polarization:
    return Polarization(0.0, 1.0)


def diagonal() -> Polarization:
    """(|H> + |V>)/sqrt(2)."""
    s = 1.0 / math.sqrt(2.0)
    return Polarization(s, s)


def antidiagonal() -> Polarization:
    """(|H> - |V>)/sqrt(2); the usual rare postselection."""
    s = 1.0 / math.sqrt(2.0)
    return Polarization(s, -s)


def circular_right() -> Polarization:
    s = 1.0 / math.sqrt(2.0)
    return Polarization(s, 1j * s)


# Postselection states are ordinary polarizations; A and D are the
# mutually unbiased pair used throughout.
PostselectState = Polarization


def postselect_state(label: str) -> Polarization:
    try:
        return {"A": antidiagonal, "D": diagonal, "H": horizontal, "V": vertical}[label]()
    except KeyError:
        raise ValueError(f"unknown postselection label {label!r}") from None


@dataclass(frozen=True)
class MeterSetting:
    """Meter preparation gamma|H> + gammabar|V> with real gamma in [0, 1].

    gammabar = sqrt(1 - gamma^2) by construction, so gamma^2 + gammabar^2
    = 1 identically. The strength K = 2 gamma^2 - 1 lies in [-1, 1];
    gamma < 1/sqrt(2) gives negative strength, which is legal but flagged
    via :attr:`negative_strength`.
    """

    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")

    @classmethod
    def from_strength(cls, strength: float) -> "MeterSetting":
        if not -1.0 <= strength <= 1.0:
            raise ValueError(f"strength must lie in [-1, 1], got {strength}")
        return cls(math.sqrt((1.0 + strength) / 2.0))

    @property
    def gammabar(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.gamma**2))

    @property
    def strength(self) -> float:
        return 2.0 * self.gamma**2 - 1.0

    @property
    def negative_strength(self) -> bool:
        return self.strength < 0.0

    def ket(self) -> np.ndarray:
        return np.array([self.gamma, self.gammabar], dtype=complex)


S1 = np.diag([1.0, -1.0]).astype(complex)


@dataclass(frozen=True)
class Povm:
    """Two-outcome measurement {pi_h, pi_v} on the signal polarization."""

    pi_h: np.ndarray
    pi_v: np.ndarray


def povm_elements(meter: MeterSetting) -> Povm:
    """Measurement operators induced on the signal by reading the meter.

    pi_i = (1/2) [1 + (delta_iH - delta_iV) K s1], diagonal in {H, V}:
    projectors at K = 1, both 1/2 at K = 0.
    """
    k = meter.strength
    eye = np.eye(2, dtype=complex)
    return Povm(pi_h=0.5 * (eye + k * S1), pi_v=0.5 * (eye - k * S1))


def expectation_s1(psi: Polarization) -> float:
    """<s1> = |alpha|^2 - |beta|^2."""
    return float(abs(psi.alpha) ** 2 - abs(psi.beta) ** 2)


def expectation_s1_from_meter(psi: Polarization, meter: MeterSetting) -> float:
    """<s1> recovered from meter-outcome probabilities, (P(H)-P(V))/K.

    Undefined at K = 0 (the meter record carries no information).
    """
    k = meter.strength
    if abs(k) < ZERO_STRENGTH_TOL:
        raise ZeroStrengthError("strength K = 0: expectation not recoverable from the meter")
    povm = povm_elements(meter)
    ket = psi.ket()
    p_h = float(np.real(ket.conj() @ povm.pi_h @ ket))
    p_v = float(np.real(ket.conj() @ povm.pi_v @ ket))
    return (p_h - p_v) / k


def _joint_meter_amplitudes(psi: Polarization, meter: MeterSetting, post: Polarization):
    """Amplitudes for (postselection hit, meter = H/V) on the post-gate state.

    The gate maps |psi>|m> onto
    (alpha g |H> + beta gbar |V>)|H> + (alpha gbar |H> + beta g |V>)|V>,
    so projecting the signal on <post| leaves one meter amplitude per
    outcome; the amplitudes add before squaring, which is where the
    postselection interference lives.
    """
    g, gb = meter.gamma, meter.gammabar
    xc = np.conj(post.alpha)
    yc = np.conj(post.beta)
    a_h = xc * psi.alpha * g + yc * psi.beta * gb
    a_v = xc * psi.alpha * gb + yc * psi.beta * g
    return a_h, a_v


def postselected_probs(psi: Polarization, meter: MeterSetting, post: Polarization):
    """(P(meter H | post), P(meter V | post), P(post)).

    Raises PostselectionImpossibleError when P(post) = 0, where the
    conditionals are undefined.
    """
    a_h, a_v = _joint_meter_amplitudes(psi, meter, post)
    p_post = abs(a_h) ** 2 + abs(a_v) ** 2
    if p_post <= _P_POST_TOL:
        raise PostselectionImpossibleError(
            "postselection probability is zero; conditional probabilities undefined"
        )
    return abs(a_h) ** 2 / p_post, abs(a_v) ** 2 / p_post, float(p_post)


def weak_value_from_probs(p_h: float, p_v: float, strength: float) -> float:
    """Postselected mean of s1 from conditional meter probabilities.

    (pH - pV)/K; exact for projective strength, a weak value for small K.
    """
    if p_h < -1e-12 or p_v < -1e-12:
        raise ValueError("probabilities must be non-negative")
    if abs(p_h + p_v - 1.0) > 1e-9:
        raise ValueError(f"conditional probabilities must sum to 1, got {p_h + p_v}")
    if abs(strength) < ZERO_STRENGTH_TOL:
        raise ZeroStrengthError("strength K = 0: weak value unbounded")
    return (p_h - p_v) / strength


def weak_value_analytic(psi: Polarization, meter: MeterSetting, post: Polarization) -> float:
    """Postselected value of s1 for preparation ``psi`` and meter ``meter``.

    For real amplitudes the closed form

        [(x a)^2 - (y b)^2] / [(x a)^2 + (y b)^2 + 4 g gbar (x a)(y b)]

    (post = x|H> + y|V>) holds at every strength including K = 0, where
    it reduces for post = A to (a + b)/(a - b) and can be arbitrarily
    large. Complex inputs route through the conditional probabilities and
    so need K != 0. A vanishing denominator means the postselection is
    impossible in the weak limit and raises instead of returning inf.
    """
    if psi.is_real and post.is_real:
        xa = float(np.real(post.alpha)) * float(np.real(psi.alpha))
        yb = float(np.real(post.beta)) * float(np.real(psi.beta))
        num = xa**2 - yb**2
        den = xa**2 + yb**2 + 4.0 * meter.gamma * meter.gammabar * xa * yb
        if abs(den) < 1e-14 * (xa**2 + yb**2):
            raise PostselectionImpossibleError(
                "weak value diverges: postselection orthogonal in the weak limit"
            )
        return num / den
    p_h, p_v, _ = postselected_probs(psi, meter, post)
    return weak_value_from_probs(p_h, p_v, meter.strength)


def knowledge_from_probs(p_hh: float, p_vv: float, p_hv: float, p_vh: float) -> float:
    """Strength K recovered from unpostselected joint outcome rates.

    K = P_HH + P_VV - P_HV - P_VH, measured with a diagonally polarized
    signal so the correlation is entirely the device's doing.
    """
    probs = (p_hh, p_vv, p_hv, p_vh)
    if any(p < -1e-12 for p in probs):
        raise ValueError(f"probabilities must be non-negative: {probs}")
    if abs(sum(probs) - 1.0) > 1e-9:
        raise ValueError(f"joint probabilities must sum to 1, got {sum(probs)}")
    return p_hh + p_vv - p_hv - p_vh


def expectation_decomposition(psi: Polarization, meter: MeterSetting):
    """Split <s1> over the complementary postselections A and D.

    Returns (term_A, term_D, total) with term_X = (weak value | X) * P(X);
    the total equals |alpha|^2 - |beta|^2 identically, however extreme the
    individual weak values are.
    """
    if abs(meter.strength) < ZERO_STRENGTH_TOL:
        raise ZeroStrengthError("strength K = 0: decomposition terms undefined")
    term = {}
    for label in ("A", "D"):
        post = postselect_state(label)
        _, _, p_post = postselected_probs(psi, meter, post)
        wv = weak_value_analytic(psi, meter, post)
        term[label] = wv * p_post
    return term["A"], term["D"], term["A"] + term["D"]
