"""Imperfect-device model, two-qubit channels, and process tomography.

The ideal gate is a rank-one process (a single operator on the kept
subspace). The real device decoheres slightly; this module models that
with a visibility-weighted mixture

    channel = v * (coherent gate) + (1 - v) * (decohered propagation)

optionally followed by white noise of weight ``p``. The decohered branch
averages two walk-off mechanisms of equal weight:

  * photon-distinguishable propagation: the two photons carry hidden
    labels, so amplitudes interfere per label while the direct and
    exchanged assignments add as probabilities at the interfering
    splitter (no two-photon interference);
  * rail-dephased propagation: birefringent walk-off makes the H and V
    input rails distinguishable, so the joint input decoheres in the
    H/V basis before the (otherwise coherent) gate acts.

The first mechanism alone is second order in (gamma - gammabar) and
cannot move the rare-postselection probability at small strength; the
second supplies exactly that while preserving the diagonal-input
symmetry that keeps the weak value of a diagonal signal at zero. Both
reduce to the ideal gate at v = 1.

Process tomography reconstructs the chi matrix of any such channel by
linear inversion from the 16 product preparations over {H, V, D, R} per
qubit, which span the single-qubit operator space.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .device import DeviceConfig, coincidence_operator, transfer_matrix
from .errors import (
    InfeasibleTargetError,
    InversionRangeError,
    PostselectionImpossibleError,
    ZeroStrengthError,
)
from .weak_values import ZERO_STRENGTH_TOL, MeterSetting, Polarization, antidiagonal

_KET = {
    "H": np.array([1.0, 0.0], dtype=complex),
    "V": np.array([0.0, 1.0], dtype=complex),
    "D": np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0),
    "R": np.array([1.0, 1.0j], dtype=complex) / math.sqrt(2.0),
}
PREP_LABELS = ("H", "V", "D", "R")

_PAULI_1 = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
PAULI_LABELS = tuple(
    f"{a}{b}" for a in ("I", "X", "Y", "Z") for b in ("I", "X", "Y", "Z")
)
PAULI_2 = tuple(np.kron(p, q) for p in _PAULI_1 for q in _PAULI_1)

_SWAP = np.zeros((4, 4), dtype=complex)
for _s in range(2):
    for _m in range(2):
        _SWAP[2 * _m + _s, 2 * _s + _m] = 1.0


@dataclass(frozen=True)
class ImperfectionParams:
    """Mixture weights: visibility of the coherent branch, extra white noise."""

    visibility: float = 1.0
    depol: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {self.visibility}")
        if not 0.0 <= self.depol <= 1.0:
            raise ValueError(f"depol must lie in [0, 1], got {self.depol}")

    @property
    def is_ideal(self) -> bool:
        return self.visibility == 1.0 and self.depol == 0.0


class TwoQubitChannel:
    """Completely positive, trace-nonincreasing map in operator-sum form."""

    def __init__(self, kraus):
        self.kraus = [np.asarray(k, dtype=complex).reshape(4, 4) for k in kraus]
        if not self.kraus:
            raise ValueError("a channel needs at least one effect operator")
        total = sum(k.conj().T @ k for k in self.kraus)
        top = float(np.max(np.linalg.eigvalsh(total)).real)
        if top > 1.0 + 1e-10:
            raise ValueError(f"channel increases trace: max effect eigenvalue {top}")

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex).reshape(4, 4)
        out = np.zeros((4, 4), dtype=complex)
        for k in self.kraus:
            out += k @ rho @ k.conj().T
        return out

    def superoperator(self) -> np.ndarray:
        """Column-stacking superoperator: vec(E(rho)) = S vec(rho)."""
        s = np.zeros((16, 16), dtype=complex)
        for k in self.kraus:
            s += np.kron(k.conj(), k)
        return s


def _joint_density(signal: Polarization, meter: MeterSetting) -> np.ndarray:
    ket = np.kron(signal.ket(), meter.ket())
    return np.outer(ket, ket.conj())


def channel_output(channel: TwoQubitChannel, signal: Polarization, meter: MeterSetting):
    """(success probability, output state conditioned on success)."""
    rho = channel.apply(_joint_density(signal, meter))
    prob = float(np.trace(rho).real)
    if prob <= 1e-300:
        raise PostselectionImpossibleError("channel output has zero weight")
    return prob, rho / prob


def channel_joint_distribution(channel, signal, meter):
    """(P_HH, P_HV, P_VH, P_VV) conditioned on success."""
    _, rho = channel_output(channel, signal, meter)
    return tuple(float(rho[i, i].real) for i in range(4))


def channel_postselected_probs(channel, signal, meter, post: Polarization):
    """(P(meter H | post), P(meter V | post), P(post | success))."""
    _, rho = channel_output(channel, signal, meter)
    post_ket = post.ket()
    proj_post = np.outer(post_ket, post_ket.conj())
    p = []
    for m in range(2):
        meter_proj = np.zeros((2, 2), dtype=complex)
        meter_proj[m, m] = 1.0
        p.append(float(np.trace(np.kron(proj_post, meter_proj) @ rho).real))
    p_post = p[0] + p[1]
    if p_post <= 1e-300:
        raise PostselectionImpossibleError("postselection probability is zero under the channel")
    return p[0] / p_post, p[1] / p_post, p_post


def labeled_kraus(cfg: DeviceConfig = DeviceConfig()):
    """Effect operators for distinguishable-photon propagation.

    From the single-photon transfer matrix U, the direct assignment
    (each photon exits on its own side) contributes U_ss (x) U_mm and the
    exchanged assignment (photons swap sides) contributes
    (U_sm (x) U_ms) SWAP; with hidden labels the two add incoherently.
    Their coherent sum is the ideal gate operator.
    """
    u = transfer_matrix(cfg)
    s_idx, m_idx = (0, 1), (2, 3)
    u_ss = u[np.ix_(s_idx, s_idx)]
    u_mm = u[np.ix_(m_idx, m_idx)]
    u_sm = u[np.ix_(s_idx, m_idx)]
    u_ms = u[np.ix_(m_idx, s_idx)]
    direct = np.kron(u_ss, u_mm)
    exchange = np.kron(u_sm, u_ms) @ _SWAP
    return direct, exchange


def classical_splitter_coincidence(eta: float) -> float:
    """Coincidence probability for two distinguishable photons, one per port.

    Probabilities of the direct and exchanged assignments add; their
    amplitudes would interfere for indistinguishable photons.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmissivity must lie in [0, 1], got {eta}")
    t = math.sqrt(eta)
    r = math.sqrt(1.0 - eta)
    direct = t * t
    exchange = (-r) * r
    return direct**2 + exchange**2


@dataclass
class DistinguishableOutput:
    """Conditioned output of the device run with distinguishable photons."""

    rho: np.ndarray
    success_prob: float
    joint_hv: tuple


def distinguishable_device(signal: Polarization, meter: MeterSetting,
                           cfg: DeviceConfig = DeviceConfig()) -> DistinguishableOutput:
    """Propagate with two-photon interference removed at the splitters.

    Amplitudes still interfere within each photon's own paths, so a lone
    photon traverses the network exactly as in the ideal device; only the
    direct/exchange cross terms are dropped.
    """
    direct, exchange = labeled_kraus(cfg)
    rho_in = _joint_density(signal, meter)
    rho = direct @ rho_in @ direct.conj().T + exchange @ rho_in @ exchange.conj().T
    prob = float(np.trace(rho).real)
    if prob <= 1e-300:
        raise PostselectionImpossibleError("no coincidence weight for this input")
    rho_cond = rho / prob
    joint = tuple(float(rho_cond[i, i].real) for i in range(4))
    return DistinguishableOutput(rho=rho_cond, success_prob=prob, joint_hv=joint)


def _basis_projectors():
    eye = np.eye(4, dtype=complex)
    return [np.outer(eye[:, i], eye[:, i]) for i in range(4)]


def _depolarizing_kraus(p: float):
    """White noise of weight p on two qubits: rho -> (1-p) rho + p tr(rho) I/4."""
    ks = [math.sqrt(1.0 - p + p / 16.0) * np.eye(4, dtype=complex)]
    ks += [math.sqrt(p) / 4.0 * q for q in PAULI_2[1:]]
    return ks


def imperfect_channel(meter: MeterSetting | None, params: ImperfectionParams,
                      cfg: DeviceConfig = DeviceConfig()) -> TwoQubitChannel:
    """Mixture of the coherent gate and its decohered counterparts.

    The map itself does not depend on the meter preparation (that is part
    of the input state); the argument mirrors the ideal-device call shape
    and is only validated. At visibility 1 and depol 0 the channel acts
    exactly as the coherent gate.
    """
    if meter is not None and not isinstance(meter, MeterSetting):
        raise TypeError("meter must be a MeterSetting or None")
    gate = coincidence_operator(cfg)
    v, p = params.visibility, params.depol

    kraus = []
    if v > 0.0:
        kraus.append(math.sqrt(v) * gate)
    if v < 1.0:
        w = math.sqrt((1.0 - v) / 2.0)
        direct, exchange = labeled_kraus(cfg)
        kraus += [w * direct, w * exchange]
        kraus += [w * (gate @ proj) for proj in _basis_projectors()]
    if p > 0.0:
        kraus = [d @ k for d in _depolarizing_kraus(p) for k in kraus]
    return TwoQubitChannel(kraus)


# ---------------------------------------------------------------------------
# Process tomography
# ---------------------------------------------------------------------------

def _unit_decomposition():
    """Matrix units e_uv as combinations of the H/V/D/R density matrices."""
    rho = {k: np.outer(_KET[k], _KET[k].conj()) for k in PREP_LABELS}
    coeff = {
        (0, 0): {"H": 1.0},
        (1, 1): {"V": 1.0},
        (0, 1): {"D": 1.0, "R": 1.0j, "H": -(1.0 + 1.0j) / 2.0, "V": -(1.0 + 1.0j) / 2.0},
        (1, 0): {"D": 1.0, "R": -1.0j, "H": -(1.0 - 1.0j) / 2.0, "V": -(1.0 - 1.0j) / 2.0},
    }
    # guard: the decomposition must reproduce the units exactly
    for (u, v), cs in coeff.items():
        unit = np.zeros((2, 2), dtype=complex)
        unit[u, v] = 1.0
        rebuilt = sum(c * rho[k] for k, c in cs.items())
        if np.max(np.abs(rebuilt - unit)) > 1e-12:
            raise RuntimeError("preparation basis failed to span the operator space")
    return coeff


@dataclass
class ChiMatrix:
    """Process matrix over the two-qubit Pauli basis (II, IX, ..., ZZ)."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex).reshape(16, 16)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def rank(self, tol: float = 1e-9) -> int:
        return int(np.sum(np.abs(self.eigenvalues()) > tol))

    def superoperator(self) -> np.ndarray:
        s = np.zeros((16, 16), dtype=complex)
        for m in range(16):
            for n in range(16):
                c = self.matrix[m, n]
                if c != 0:
                    s += c * np.kron(PAULI_2[n].T, PAULI_2[m])
        return s

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex).reshape(4, 4)
        vec = rho.reshape(16, order="F")
        out = self.superoperator() @ vec
        return out.reshape(4, 4, order="F")


def process_tomography(channel: TwoQubitChannel, psd_project: bool = False) -> ChiMatrix:
    """Reconstruct the chi matrix by linear inversion from product inputs.

    Evaluates the channel on the 16 preparations {H, V, D, R} x {H, V, D,
    R}, recombines those outputs into the images of the matrix units, and
    projects the resulting superoperator onto the Pauli product basis.
    With ``psd_project`` negative eigenvalues are clipped and the trace
    renormalized, for use when the evaluations carry noise.
    """
    outputs = {}
    for a in PREP_LABELS:
        for b in PREP_LABELS:
            rho_in = np.kron(np.outer(_KET[a], _KET[a].conj()),
                             np.outer(_KET[b], _KET[b].conj()))
            outputs[(a, b)] = channel.apply(rho_in)

    coeff = _unit_decomposition()
    s = np.zeros((16, 16), dtype=complex)
    for u in range(2):
        for v in range(2):
            for w in range(2):
                for x in range(2):
                    img = np.zeros((4, 4), dtype=complex)
                    for ka, ca in coeff[(u, v)].items():
                        for kb, cb in coeff[(w, x)].items():
                            img += ca * cb * outputs[(ka, kb)]
                    row, col = 2 * u + w, 2 * v + x
                    s[:, col * 4 + row] = img.reshape(16, order="F")

    chi = np.zeros((16, 16), dtype=complex)
    for m in range(16):
        for n in range(16):
            basis = np.kron(PAULI_2[n].T, PAULI_2[m])
            chi[m, n] = np.trace(basis.conj().T @ s) / 16.0

    if psd_project:
        chi = 0.5 * (chi + chi.conj().T)
        vals, vecs = np.linalg.eigh(chi)
        clipped = np.clip(vals, 0.0, None)
        total = float(np.sum(vals).real)
        if np.sum(clipped) > 0 and total > 0:
            clipped *= total / np.sum(clipped)
        chi = (vecs * clipped) @ vecs.conj().T
    return ChiMatrix(chi)


def format_chi_csv(chi: ChiMatrix) -> str:
    """Row-major CSV text with real and imaginary parts interleaved."""
    lines = []
    for row in chi.matrix:
        flat = []
        for z in row:
            flat.append(format(float(z.real), ".17g"))
            flat.append(format(float(z.imag), ".17g"))
        lines.append(",".join(flat))
    return "\n".join(lines) + "\n"


def write_chi_csv(chi: ChiMatrix, path):
    with open(path, "w", newline="") as fh:
        fh.write(format_chi_csv(chi))


def read_chi_csv(path) -> ChiMatrix:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            vals = [float(x) for x in rec]
            rows.append([complex(re, im) for re, im in zip(vals[0::2], vals[1::2])])
    return ChiMatrix(np.array(rows, dtype=complex))


# ---------------------------------------------------------------------------
# Fitting and inversion
# ---------------------------------------------------------------------------

def _model_p_post(visibility, psi, meter, cfg, post):
    channel = imperfect_channel(meter, ImperfectionParams(visibility=visibility), cfg)
    return channel_postselected_probs(channel, psi, meter, post)[2]


def fit_visibility(target_p_a: float, psi: Polarization, meter: MeterSetting,
                   cfg: DeviceConfig = DeviceConfig(),
                   post: Polarization | None = None) -> ImperfectionParams:
    """Visibility whose model postselection probability hits the target.

    The model probability decreases monotonically from the fully
    decohered value at v = 0 to the coherent value at v = 1, so a target
    below the coherent floor (or above the decohered ceiling) is
    infeasible. Root-finding is bracketed on the actual shape rather than
    assuming linearity.
    """
    post = post if post is not None else antidiagonal()
    p_ideal = _model_p_post(1.0, psi, meter, cfg, post)
    p_mixed = _model_p_post(0.0, psi, meter, cfg, post)
    lo_val, hi_val = min(p_ideal, p_mixed), max(p_ideal, p_mixed)
    if target_p_a < lo_val - 1e-9:
        raise InfeasibleTargetError(
            f"target {target_p_a} below the model floor {lo_val:.6g}"
        )
    if target_p_a > hi_val + 1e-9:
        raise InfeasibleTargetError(
            f"target {target_p_a} above the model ceiling {hi_val:.6g}"
        )

    def f(v):
        return _model_p_post(v, psi, meter, cfg, post) - target_p_a

    f1 = p_ideal - target_p_a
    f0 = p_mixed - target_p_a
    if abs(f1) < 1e-15:
        return ImperfectionParams(visibility=1.0)
    if abs(f0) < 1e-15:
        return ImperfectionParams(visibility=0.0)
    if f0 * f1 > 0:
        # same sign at both ends: scan for a bracket over the actual shape
        grid = np.linspace(0.0, 1.0, 201)
        vals = [f(v) for v in grid]
        bracket = None
        for a, b, fa, fb in zip(grid, grid[1:], vals, vals[1:]):
            if fa == 0.0:
                return ImperfectionParams(visibility=float(a))
            if fa * fb < 0:
                bracket = (a, b)
                break
        if bracket is None:
            raise InfeasibleTargetError(f"no visibility reaches target {target_p_a}")
        lo, hi = bracket
    else:
        lo, hi = 0.0, 1.0
    v_star = brentq(f, lo, hi, xtol=1e-13, rtol=8.9e-16)
    return ImperfectionParams(visibility=float(v_star))


def model_weak_value_curve(params: ImperfectionParams, psi: Polarization, k_grid,
                           cfg: DeviceConfig = DeviceConfig(),
                           post: Polarization | None = None):
    """[(K, predicted postselected value)] for each strength in the grid."""
    post = post if post is not None else antidiagonal()
    k_grid = list(k_grid)
    if any(abs(k) < ZERO_STRENGTH_TOL for k in k_grid):
        raise ZeroStrengthError("strength K = 0 in grid: weak value unbounded")
    channel = imperfect_channel(None, params, cfg)
    out = []
    for k in k_grid:
        meter = MeterSetting.from_strength(k)
        p_h, p_v, _ = channel_postselected_probs(channel, psi, meter, post)
        out.append((float(k), (p_h - p_v) / k))
    return out


def invert_s1(measured_weak_value: float, measured_p_a: float,
              params: ImperfectionParams, meter: MeterSetting,
              cfg: DeviceConfig = DeviceConfig(),
              post: Polarization | None = None) -> float:
    """Expectation of s1 inferred from a measured postselected value.

    For the coherent model the identity (weak value) * P(A) =
    (|alpha|^2 - |beta|^2)/2 inverts the measurement directly. For the
    mixed model the relation is inverted numerically over the family of
    linear input polarizations; the measured postselection probability
    disambiguates when two preparations share a weak value.
    """
    post = post if post is not None else antidiagonal()
    if params.is_ideal:
        return 2.0 * measured_weak_value * measured_p_a

    k = meter.strength
    if abs(k) < ZERO_STRENGTH_TOL:
        raise ZeroStrengthError("strength K = 0: inversion undefined")
    channel = imperfect_channel(meter, params, cfg)

    def model(theta):
        psi = Polarization(math.cos(theta), math.sin(theta))
        p_h, p_v, p_post = channel_postselected_probs(channel, psi, meter, post)
        return (p_h - p_v) / k, p_post

    eps = 1e-9
    thetas = np.linspace(eps, math.pi / 2 - eps, 4096)
    # the curve varies fastest near the diagonal input; refine there
    quarter = math.pi / 4
    extra = quarter + np.concatenate([-np.geomspace(1e-8, 0.2, 160),
                                      np.geomspace(1e-8, 0.2, 160)])
    thetas = np.unique(np.concatenate([thetas, extra[(extra > eps) & (extra < math.pi / 2 - eps)]]))

    f_vals = np.array([model(t)[0] - measured_weak_value for t in thetas])
    roots = []
    for a, b, fa, fb in zip(thetas, thetas[1:], f_vals, f_vals[1:]):
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0:
            roots.append(float(brentq(lambda t: model(t)[0] - measured_weak_value,
                                      a, b, xtol=1e-14, rtol=8.9e-16)))
    if f_vals[-1] == 0.0:
        roots.append(float(thetas[-1]))
    if not roots:
        raise InversionRangeError(
            f"measured value {measured_weak_value} outside the model's range"
        )
    best = min(roots, key=lambda t: abs(model(t)[1] - measured_p_a))
    return math.cos(2.0 * best)
