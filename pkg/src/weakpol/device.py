"""Nondeterministic polarization-entangling measurement device.

The device couples a signal photon to a meter photon and succeeds when
one photon exits at each of the signal and meter ports (success
probability 1/9, independent of the inputs thanks to the balancing
losses). Layout, in propagation order:

  1. 50:50 splitter across the meter rails mH/mV,
  2. eta = 1/3 interfering splitter across sV and the transformed mV rail
     (two-photon interference there supplies the conditional sign flip),
  3. eta = 1/3 loss splitters on sH and the transformed mH rail into
     undetected ancillas (these balance the amplitudes so success is
     input-independent),
  4. the inverse 50:50 splitter restoring mH/mV,
  5. coincidence projection.

Within the kept subspace this acts as controlled-NOT / 3 with the signal
as control, i.e. it maps |psi>(gamma|H> + gammabar|V>) onto

  (alpha gamma |H> + beta gammabar |V>)|H>_m
  + (alpha gammabar |H> + beta gamma |V>)|V>_m

up to overall normalization. Correctness is defined by that contract (up
to per-qubit phases), not by the particular layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import fock
from .fock import BeamSplitterSpec, FockState, ModeRegistry, TwoQubitState
from .weak_values import MeterSetting, Polarization

SIGNAL_MODES = ("sH", "sV")
METER_MODES = ("mH", "mV")
ANCILLA_MODES = ("lossS", "lossM")
ALL_MODES = SIGNAL_MODES + METER_MODES + ANCILLA_MODES


@dataclass(frozen=True)
class DeviceConfig:
    """Splitter transmissivities; defaults give the balanced 1/9 gate."""

    interfering_eta: float = 1.0 / 3.0
    balance_eta: float = 1.0 / 3.0
    hadamard_eta: float = 0.5

    def __post_init__(self):
        for name in ("interfering_eta", "balance_eta", "hadamard_eta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


def device_registry() -> ModeRegistry:
    return ModeRegistry(ALL_MODES)


def network_steps(cfg: DeviceConfig = DeviceConfig()):
    """Beam-splitter sequence implementing the gate.

    The final splitter swaps the mode roles to realize the inverse of the
    first meter splitter under the fixed sign convention.
    """
    return [
        BeamSplitterSpec("mH", "mV", cfg.hadamard_eta),
        BeamSplitterSpec("sV", "mV", cfg.interfering_eta),
        BeamSplitterSpec("sH", "lossS", cfg.balance_eta),
        BeamSplitterSpec("mH", "lossM", cfg.balance_eta),
        BeamSplitterSpec("mV", "mH", cfg.hadamard_eta),
    ]


def input_state(signal: Polarization, meter: MeterSetting, registry: ModeRegistry | None = None) -> FockState:
    """Two-photon product input on the signal and meter rails."""
    reg = registry or device_registry()
    state = fock.vacuum(reg)
    state = fock.create_photon(state, {"sH": signal.alpha, "sV": signal.beta})
    state = fock.create_photon(state, {"mH": meter.gamma, "mV": meter.gammabar})
    return state


def run_device(signal: Polarization, meter: MeterSetting, cfg: DeviceConfig = DeviceConfig()) -> TwoQubitState:
    """Propagate through the network and condition on coincidence."""
    state = input_state(signal, meter)
    state = fock.apply_network(state, network_steps(cfg))
    out, _ = fock.project_coincidence(state, SIGNAL_MODES, METER_MODES)
    return out


def device_meter_distribution(state: TwoQubitState):
    """Joint outcome probabilities (P_HH, P_HV, P_VH, P_VV)."""
    p = np.abs(state.amplitudes.reshape(4)) ** 2
    return tuple(float(x) for x in p)


def target_state(signal: Polarization, meter: MeterSetting) -> np.ndarray:
    """The contractual post-gate amplitudes, indexed [signal, meter]."""
    a, b = signal.alpha, signal.beta
    g, gb = meter.gamma, meter.gammabar
    return np.array([[a * g, a * gb], [b * gb, b * g]], dtype=complex)


def local_phase_fidelity(got: np.ndarray, want: np.ndarray) -> float:
    """Overlap fidelity maximized over global and per-qubit phases.

    For per-qubit phase rotations the overlap splits as
    |X0 + e^{i th} X1| with X_s = t_{s0} + t_{s1} e^{i ph}, so the inner
    maximization is |X0| + |X1| and only the meter phase needs a 1-D
    search. Conventions differ by exactly such phases; physics does not.
    """
    got = np.asarray(got, dtype=complex).reshape(2, 2)
    want = np.asarray(want, dtype=complex).reshape(2, 2)
    t = want.conj() * got

    def overlap(ph):
        e = np.exp(1j * ph)
        return abs(t[0, 0] + t[0, 1] * e) + abs(t[1, 0] + t[1, 1] * e)

    grid = np.linspace(0.0, 2.0 * np.pi, 1025)
    vals = [overlap(p) for p in grid]
    k = int(np.argmax(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(lambda p: -overlap(p), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13})
    best = max(max(vals), -float(res.fun))
    norm = float(np.sum(np.abs(got) ** 2) * np.sum(np.abs(want) ** 2))
    return best**2 / norm


def equivalence_fidelity(state: TwoQubitState, signal: Polarization, meter: MeterSetting) -> float:
    """Fidelity of a device output against the contractual state."""
    return local_phase_fidelity(state.amplitudes, target_state(signal, meter))


def transfer_matrix(cfg: DeviceConfig = DeviceConfig()) -> np.ndarray:
    """Single-photon mode-amplitude matrix of the full network.

    Column j holds the output amplitudes of one photon injected in mode
    j; derived by propagating basis photons through the same Fock engine
    the gate uses, so the conventions cannot drift apart.
    """
    reg = device_registry()
    steps = network_steps(cfg)
    n = reg.size
    u = np.zeros((n, n), dtype=complex)
    for j in range(n):
        occ = [0] * n
        occ[j] = 1
        state = FockState(reg, {tuple(occ): 1.0})
        state = fock.apply_network(state, steps)
        for occ_out, amp in state.terms.items():
            i = occ_out.index(1)
            u[i, j] = amp
    return u


def coincidence_operator(cfg: DeviceConfig = DeviceConfig()) -> np.ndarray:
    """4x4 operator of the gate on the kept two-qubit subspace.

    Columns are indexed by product inputs |signal, meter> in (HH, HV, VH,
    VV) order and carry the unnormalized coincidence amplitudes, so the
    squared column norm is the success probability. For the default
    configuration this is controlled-NOT / 3.
    """
    reg = device_registry()
    steps = network_steps(cfg)
    op = np.zeros((4, 4), dtype=complex)
    basis = [(1.0, 0.0), (0.0, 1.0)]
    for col, (s_amp, m_amp) in enumerate((s, m) for s in basis for m in basis):
        state = fock.vacuum(reg)
        state = fock.create_photon(state, {"sH": s_amp[0], "sV": s_amp[1]})
        state = fock.create_photon(state, {"mH": m_amp[0], "mV": m_amp[1]})
        state = fock.apply_network(state, steps)
        out, prob = fock.project_coincidence(state, SIGNAL_MODES, METER_MODES)
        op[:, col] = out.amplitudes.reshape(4) * np.sqrt(prob)
    return op


def concurrence(state: TwoQubitState) -> float:
    """Wootters concurrence of a pure two-qubit state: 2|ad - bc|."""
    a = state.amplitudes
    return float(2.0 * abs(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]))
