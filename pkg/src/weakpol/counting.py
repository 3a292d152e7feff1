"""Monte Carlo photon-counting runs and their error analysis.

Coincidence counts are independent Poisson draws at the configured rates
and durations. The strength estimate comes from a separate unpostselected
calibration run with a diagonal input; its delta-method error is what
makes small-strength weak values so fragile: the estimate is c/K_hat, so
an error in K_hat slides the point along a hyperbola, and once the
1-sigma interval of K_hat reaches zero the upward error is unbounded and
reported as a flag rather than a number.

Randomness uses the counter-based Philox generator with one stream per
(grid point, run type), all derived from the master seed, so tables are
reproducible bit for bit regardless of how many workers executed them.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__ as _pkg_version
from .device import DeviceConfig
from .errors import ZeroCountsError, ZeroStrengthError
from .imperfection import (
    ImperfectionParams,
    channel_joint_distribution,
    channel_postselected_probs,
    imperfect_channel,
)
from .weak_values import ZERO_STRENGTH_TOL, MeterSetting, Polarization, antidiagonal, diagonal

RNG_ALGORITHM = "philox4x64"

K_RUN = 0
WV_RUN = 1


@dataclass(frozen=True)
class RunPlan:
    """Counting rates and durations; defaults are the experimental ones."""

    unpostselected_rate: float = 44.6
    postselected_rate: float = 0.52
    duration_k: float = 100.0
    duration_wv: float = 1000.0
    seed: int = 0

    def __post_init__(self):
        if self.unpostselected_rate < 0 or self.postselected_rate < 0:
            raise ValueError("rates must be non-negative")
        if self.duration_k < 0 or self.duration_wv < 0:
            raise ValueError("durations must be non-negative")


@dataclass
class CountSample:
    """Raw coincidence counts per outcome class for one run."""

    counts: dict
    duration: float

    def total(self) -> int:
        return int(sum(self.counts.values()))


@dataclass
class Estimate:
    """Value with 1-sigma error and the strength-correlated worst case.

    ``upper`` is +inf when the error is unbounded above; ``worst_case``
    is the value recomputed with the strength shifted one sigma in the
    direction that shrinks it.
    """

    value: float
    sigma: float
    lower: float
    upper: float
    worst_case: float | None = None
    unbounded_above: bool = False


def make_rng(seed) -> np.random.Generator:
    """Philox generator from an int seed, SeedSequence, or Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def stream_for(master_seed: int, grid_index: int, run_type: int) -> np.random.Generator:
    """Independent substream for one (grid point, run type) pair."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(grid_index, run_type))
    return np.random.Generator(np.random.Philox(ss))


def sample_counts(true_probs: dict, rate: float, duration: float, seed) -> CountSample:
    """Independent Poisson counts with means rate * duration * p_i."""
    probs = {k: float(v) for k, v in true_probs.items()}
    if any(p < -1e-12 for p in probs.values()):
        raise ValueError(f"negative probability in {probs}")
    total = sum(probs.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"outcome probabilities must sum to 1, got {total}")
    if rate < 0 or duration < 0:
        raise ValueError("rate and duration must be non-negative")
    rng = make_rng(seed)
    counts = {
        k: int(rng.poisson(rate * duration * max(p, 0.0))) for k, p in probs.items()
    }
    return CountSample(counts=counts, duration=duration)


def estimate_knowledge(sample: CountSample) -> Estimate:
    """Strength estimate from an unpostselected four-outcome run.

    K_hat = (N_HH + N_VV - N_HV - N_VH) / N with the delta-method error
    sqrt((1 - K_hat^2)/N) for independent Poisson counts; near zero
    strength this is 1/sqrt(N).
    """
    try:
        n_hh, n_hv, n_vh, n_vv = (sample.counts[k] for k in ("HH", "HV", "VH", "VV"))
    except KeyError as exc:
        raise ValueError(f"calibration sample missing outcome {exc}") from None
    n = n_hh + n_hv + n_vh + n_vv
    if n <= 0:
        raise ZeroCountsError("no calibration counts recorded")
    k_hat = (n_hh + n_vv - n_hv - n_vh) / n
    sigma = math.sqrt(max(1.0 - k_hat**2, 0.0) / n)
    return Estimate(value=k_hat, sigma=sigma, lower=k_hat - sigma, upper=k_hat + sigma)


def estimate_weak_value(sample: CountSample, k_est: Estimate) -> Estimate:
    """Postselected-value estimate from meter counts plus a strength estimate.

    value = ((N_H - N_V)/(N_H + N_V)) / K_hat. The quoted sigma carries
    only the Poisson error of the meter counts (the plotted bars); the
    strength error is reported separately through ``worst_case`` and,
    when the 1-sigma strength interval reaches zero, the
    ``unbounded_above`` flag.
    """
    try:
        n_h, n_v = sample.counts["H"], sample.counts["V"]
    except KeyError as exc:
        raise ValueError(f"weak-value sample missing outcome {exc}") from None
    n = n_h + n_v
    if n <= 0:
        raise ZeroCountsError("no postselected counts recorded")
    k_hat = k_est.value
    if k_hat == 0.0:  # exact: the estimate is a ratio of integers
        raise ZeroStrengthError("estimated strength is exactly zero")
    asym = (n_h - n_v) / n
    value = asym / k_hat
    sigma = math.sqrt(4.0 * n_h * n_v / n**3) / abs(k_hat)
    k_shifted = k_hat + math.copysign(k_est.sigma, k_hat)
    worst = asym / k_shifted
    unbounded = abs(k_hat) - k_est.sigma <= 0.0
    return Estimate(
        value=value,
        sigma=sigma,
        lower=value - sigma,
        upper=math.inf if unbounded else value + sigma,
        worst_case=worst,
        unbounded_above=unbounded,
    )


@dataclass
class Fig2Row:
    """One grid point of the strength-sweep table."""

    k_true: float
    k_hat: float = math.nan
    k_sigma: float = math.nan
    wv: float = math.nan
    wv_sigma: float = math.nan
    wv_worst: float = math.nan
    unbounded: bool = False
    no_data: bool = False


@dataclass
class Fig2Result:
    rows: list
    metadata: dict = field(default_factory=dict)


def _true_probs_for_point(channel, psi, meter):
    joint = channel_joint_distribution(channel, diagonal(), meter)
    p_h, p_v, _ = channel_postselected_probs(channel, psi, meter, antidiagonal())
    return joint, (p_h, p_v)


def run_fig2(plan: RunPlan, psi: Polarization, params: ImperfectionParams, k_grid,
             cfg: DeviceConfig = DeviceConfig(), workers: int = 1) -> Fig2Result:
    """Simulate calibration and weak-value runs over a strength grid.

    Each grid point draws its calibration counts (diagonal input, no
    postselection) and its postselected meter counts from independent
    substreams of the master seed, so the table is identical for any
    worker count. Rows where an estimator has nothing to work with are
    flagged ``no_data`` instead of carrying sentinel numbers.
    """
    k_grid = [float(k) for k in k_grid]
    if not k_grid:
        raise ValueError("strength grid is empty")
    if any(abs(k) < ZERO_STRENGTH_TOL for k in k_grid):
        raise ZeroStrengthError("strength K = 0 in grid: weak value undefined")
    channel = imperfect_channel(None, params, cfg)

    def one_point(i: int) -> Fig2Row:
        k_true = k_grid[i]
        meter = MeterSetting.from_strength(k_true)
        joint, cond = _true_probs_for_point(channel, psi, meter)
        row = Fig2Row(k_true=k_true)
        try:
            cal = sample_counts(
                dict(zip(("HH", "HV", "VH", "VV"), joint)),
                plan.unpostselected_rate, plan.duration_k,
                stream_for(plan.seed, i, K_RUN),
            )
            k_est = estimate_knowledge(cal)
        except ZeroCountsError:
            row.no_data = True
            return row
        row.k_hat, row.k_sigma = k_est.value, k_est.sigma
        try:
            wv_sample = sample_counts(
                {"H": cond[0], "V": cond[1]},
                plan.postselected_rate, plan.duration_wv,
                stream_for(plan.seed, i, WV_RUN),
            )
            wv_est = estimate_weak_value(wv_sample, k_est)
        except (ZeroCountsError, ZeroStrengthError):
            row.no_data = True
            return row
        row.wv, row.wv_sigma = wv_est.value, wv_est.sigma
        row.wv_worst = wv_est.worst_case
        row.unbounded = wv_est.unbounded_above
        return row

    indices = range(len(k_grid))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one_point, indices))
    else:
        rows = [one_point(i) for i in indices]

    metadata = {
        "seed": plan.seed,
        "plan": asdict(plan),
        "model": asdict(params),
        "input_state": {
            "alpha": [float(np.real(psi.alpha)), float(np.imag(psi.alpha))],
            "beta": [float(np.real(psi.beta)), float(np.imag(psi.beta))],
        },
        "k_grid": k_grid,
        "rng": RNG_ALGORITHM,
        "package": {"name": "weakpol", "version": _pkg_version},
        "numpy_version": np.__version__,
    }
    return Fig2Result(rows=rows, metadata=metadata)


CSV_HEADER = "K_true,K_hat,K_sigma,wv,wv_sigma,wv_worst,unbounded"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_fig2_csv(result: Fig2Result) -> str:
    lines = [CSV_HEADER]
    for r in result.rows:
        if r.no_data:
            flag = "no_data"
        else:
            flag = "true" if r.unbounded else "false"
        lines.append(",".join([
            _fmt(r.k_true), _fmt(r.k_hat), _fmt(r.k_sigma),
            _fmt(r.wv), _fmt(r.wv_sigma), _fmt(r.wv_worst), flag,
        ]))
    return "\n".join(lines) + "\n"


def write_fig2_csv(result: Fig2Result, path) -> str:
    """Write the table plus a JSON metadata sidecar; returns the sidecar path."""
    path = str(path)
    with open(path, "w", newline="") as fh:
        fh.write(format_fig2_csv(result))
    meta_path = _meta_path_for(path)
    with open(meta_path, "w") as fh:
        json.dump(result.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta_path


def _meta_path_for(path: str) -> str:
    if path.endswith(".csv"):
        return path[: -len(".csv")] + ".meta.json"
    return path + ".meta.json"
