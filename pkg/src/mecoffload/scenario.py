"""Random MEC offloading frames and the physical-layer cost model.

A frame holds everything the solvers need about one scheduling interval:
channel power gains between each mobile device (MD) and the access point,
per-device transmit powers and task sizes, and the precomputed uplink rate
of every (device, subchannel) pair.  Latency, energy and the weighted cost
of a candidate assignment are evaluated here; the solvers only ever see
these numbers through :func:`objective` and the relaxation built on top of
the same rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "ScenarioConfig",
    "Scenario",
    "Assignment",
    "dbm_to_watts",
    "generate_frame",
    "rate",
    "latency",
    "energy",
    "objective",
    "check_feasible",
    "read_config_file",
    "write_scenario_csv",
    "read_scenario_csv",
]

#: Relative tolerance for the precomputed-rate consistency check.
RATE_CONSISTENCY_RTOL = 1e-12

#: Default relative tolerance for assignment feasibility checks.
FEASIBILITY_RTOL = 1e-6


def dbm_to_watts(dbm: float) -> float:
    """Convert a dBm power level to watts."""
    return 10.0 ** (dbm / 10.0) / 1000.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters of one random frame draw.

    Powers and task sizes are drawn uniformly per device; channel power
    gains are exponential with mean ``mean_channel_gain`` (Rayleigh
    amplitude fading).  ``lambda_t`` weighs latency in 1/seconds and
    ``lambda_e`` weighs energy in 1/joules.
    """

    num_mds: int = 3
    num_channels: int = 5
    bandwidth_hz: float = 1.0e7
    noise_power_w: float = dbm_to_watts(-110.0)
    power_range_w: tuple[float, float] = (1.0, 1.5)
    task_size_range_bits: tuple[float, float] = (2.0e6, 8.0e6)
    mean_channel_gain: float = 1.0
    lambda_t: float = 1.0
    lambda_e: float = 0.25
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.num_mds < 1:
            raise ValueError(f"num_mds must be >= 1, got {self.num_mds}")
        if self.num_channels < 1:
            raise ValueError(f"num_channels must be >= 1, got {self.num_channels}")
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth_hz must be positive")
        if not self.noise_power_w > 0:
            raise ValueError("noise_power_w must be positive")
        for name, (lo, hi) in (
            ("power_range_w", self.power_range_w),
            ("task_size_range_bits", self.task_size_range_bits),
        ):
            if not (0 < lo <= hi):
                raise ValueError(f"{name} must satisfy 0 < min <= max, got {(lo, hi)}")
        if not self.mean_channel_gain > 0:
            raise ValueError("mean_channel_gain must be positive")
        if self.lambda_t < 0 or self.lambda_e < 0 or self.lambda_t + self.lambda_e <= 0:
            raise ValueError(
                "weights must be nonnegative with lambda_t + lambda_e > 0, "
                f"got ({self.lambda_t}, {self.lambda_e})"
            )


@dataclass(frozen=True)
class Scenario:
    """One generated frame.  Immutable; safe to share across solver runs."""

    config: ScenarioConfig
    gains: np.ndarray        # (S, K) channel power gains, dimensionless
    powers_w: np.ndarray     # (S,) transmit powers
    task_bits: np.ndarray    # (S,) task sizes
    rates_bps: np.ndarray    # (S, K) uplink rates

    def __post_init__(self) -> None:
        s, k = self.config.num_mds, self.config.num_channels
        if self.gains.shape != (s, k) or self.rates_bps.shape != (s, k):
            raise ValueError("gain/rate arrays must have shape (num_mds, num_channels)")
        if self.powers_w.shape != (s,) or self.task_bits.shape != (s,):
            raise ValueError("powers_w and task_bits must have shape (num_mds,)")
        if not (np.all(self.gains > 0) and np.all(self.rates_bps > 0)):
            raise ValueError("all gains and rates must be positive")
        if not np.all(self.task_bits > 0):
            raise ValueError("all task sizes must be positive")
        expected = rate(
            self.powers_w[:, None], self.gains,
            self.config.bandwidth_hz, self.config.noise_power_w,
        )
        if not np.allclose(self.rates_bps, expected, rtol=RATE_CONSISTENCY_RTOL, atol=0.0):
            raise ValueError("precomputed rates disagree with the rate equation")

    @property
    def num_mds(self) -> int:
        return self.config.num_mds

    @property
    def num_channels(self) -> int:
        return self.config.num_channels


@dataclass
class Assignment:
    """A candidate solution: binary channel indicators and bit splits."""

    x: np.ndarray           # (S, K) 0/1 indicators
    split_bits: np.ndarray  # (S, K) bits routed through each subchannel

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.split_bits = np.asarray(self.split_bits, dtype=float)
        if self.x.shape != self.split_bits.shape or self.x.ndim != 2:
            raise ValueError("x and split_bits must be 2-D arrays of equal shape")


def generate_frame(config: ScenarioConfig) -> Scenario:
    """Draw one frame. Deterministic function of ``config.rng_seed``.

    Draw order is fixed (gains, then powers, then task sizes) so that a
    seed identifies a frame independently of library internals.
    """
    rng = np.random.default_rng(config.rng_seed)
    s, k = config.num_mds, config.num_channels
    gains = rng.exponential(config.mean_channel_gain, size=(s, k))
    powers = rng.uniform(*config.power_range_w, size=s)
    tasks = rng.uniform(*config.task_size_range_bits, size=s)
    rates = rate(powers[:, None], gains, config.bandwidth_hz, config.noise_power_w)
    return Scenario(config, gains, powers, tasks, rates)


def rate(power_w, gain, bandwidth_hz, noise_power_w):
    """Uplink rate in bits/sec: B * log2(1 + P*h/N0).  Accepts arrays."""
    return bandwidth_hz * np.log2(1.0 + power_w * gain / noise_power_w)


def latency(scenario: Scenario, a: Assignment) -> float:
    """Frame latency: the slowest subchannel's transmission time.

    Defined for infeasible assignments too; feasibility is checked
    separately so diagnostics can score partial or fractional points.
    """
    per_channel = (a.x * a.split_bits / scenario.rates_bps).sum(axis=0)
    return float(per_channel.max(initial=0.0))


def energy(scenario: Scenario, a: Assignment) -> float:
    """Total transmit energy in joules over all devices and subchannels."""
    terms = scenario.powers_w[:, None] * a.x * a.split_bits / scenario.rates_bps
    return float(terms.sum())


def objective(scenario: Scenario, a: Assignment) -> float:
    """Weighted latency + energy cost."""
    cfg = scenario.config
    return cfg.lambda_t * latency(scenario, a) + cfg.lambda_e * energy(scenario, a)


def check_feasible(
    scenario: Scenario, a: Assignment, tol: float = FEASIBILITY_RTOL
) -> list[str]:
    """Return one message per violated constraint; empty list iff feasible.

    ``tol`` is relative: indicator entries must be within ``tol`` of {0,1},
    and split constraints are scaled by the device's task size.
    """
    s_n, k_n = scenario.num_mds, scenario.num_channels
    if a.x.shape != (s_n, k_n):
        raise ValueError(
            f"assignment shape {a.x.shape} does not match scenario ({s_n}, {k_n})"
        )
    violations: list[str] = []
    x_round = np.round(a.x)

    for s in range(s_n):
        for k in range(k_n):
            if abs(a.x[s, k] - x_round[s, k]) > tol:
                violations.append(f"binary_indicator: x[{s},{k}]={a.x[s, k]!r} is not 0/1")

    for k in range(k_n):
        assigned = int(x_round[:, k].sum())
        if assigned > 1:
            violations.append(
                f"channel_exclusivity: channel {k} carries {assigned} devices"
            )

    for s in range(s_n):
        task = scenario.task_bits[s]
        total = a.split_bits[s].sum()
        if abs(total - task) > tol * task:
            violations.append(
                f"task_split: device {s} splits sum to {total!r}, task is {task!r}"
            )
        for k in range(k_n):
            l_sk = a.split_bits[s, k]
            if l_sk < -tol * task or l_sk > task * (1 + tol):
                violations.append(
                    f"split_bounds: l[{s},{k}]={l_sk!r} outside [0, {task!r}]"
                )
            if l_sk > tol * task and x_round[s, k] == 0:
                violations.append(
                    f"split_requires_assignment: l[{s},{k}]={l_sk!r} but x[{s},{k}]=0"
                )
    return violations


# ---------------------------------------------------------------------------
# Config file and frame dump formats
# ---------------------------------------------------------------------------

#: Key vocabulary of the flat ``key = value`` config format, in file order.
CONFIG_KEYS = (
    "num_mds",
    "num_channels",
    "bandwidth_hz",
    "noise_dbm",
    "power_min_w",
    "power_max_w",
    "task_min_bits",
    "task_max_bits",
    "mean_gain",
    "lambda_t",
    "lambda_e",
    "seed",
)


def read_config_file(path) -> ScenarioConfig:
    """Parse a flat ``key = value`` config file (``#`` starts a comment).

    All keys in :data:`CONFIG_KEYS` are required exactly once; the noise
    floor is given in dBm and converted to watts here so everything
    downstream is in SI units.
    """
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = value
    missing = [k for k in CONFIG_KEYS if k not in values]
    if missing:
        raise ValueError(f"{path}: missing keys: {', '.join(missing)}")
    return ScenarioConfig(
        num_mds=int(values["num_mds"]),
        num_channels=int(values["num_channels"]),
        bandwidth_hz=float(values["bandwidth_hz"]),
        noise_power_w=dbm_to_watts(float(values["noise_dbm"])),
        power_range_w=(float(values["power_min_w"]), float(values["power_max_w"])),
        task_size_range_bits=(float(values["task_min_bits"]), float(values["task_max_bits"])),
        mean_channel_gain=float(values["mean_gain"]),
        lambda_t=float(values["lambda_t"]),
        lambda_e=float(values["lambda_e"]),
        rng_seed=int(values["seed"]),
    )


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_scenario_csv(scenario: Scenario, path) -> None:
    """Dump a frame as CSV: ``# key=value`` scalars, then ``s,k,h,R`` rows."""
    cfg = scenario.config
    lines = [
        f"# num_mds={cfg.num_mds}",
        f"# num_channels={cfg.num_channels}",
        f"# bandwidth_hz={_fmt(cfg.bandwidth_hz)}",
        f"# noise_power_w={_fmt(cfg.noise_power_w)}",
        f"# power_min_w={_fmt(cfg.power_range_w[0])}",
        f"# power_max_w={_fmt(cfg.power_range_w[1])}",
        f"# task_min_bits={_fmt(cfg.task_size_range_bits[0])}",
        f"# task_max_bits={_fmt(cfg.task_size_range_bits[1])}",
        f"# mean_channel_gain={_fmt(cfg.mean_channel_gain)}",
        f"# lambda_t={_fmt(cfg.lambda_t)}",
        f"# lambda_e={_fmt(cfg.lambda_e)}",
        f"# rng_seed={cfg.rng_seed}",
    ]
    for s in range(cfg.num_mds):
        lines.append(f"# power_w_{s}={_fmt(scenario.powers_w[s])}")
        lines.append(f"# task_bits_{s}={_fmt(scenario.task_bits[s])}")
    lines.append("s,k,h,R")
    for s in range(cfg.num_mds):
        for k in range(cfg.num_channels):
            lines.append(
                f"{s},{k},{_fmt(scenario.gains[s, k])},{_fmt(scenario.rates_bps[s, k])}"
            )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_scenario_csv(path) -> Scenario:
    """Load a frame written by :func:`write_scenario_csv`."""
    scalars: dict[str, str] = {}
    rows: list[tuple[int, int, float, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" not in body:
                    raise ValueError(f"{path}:{lineno}: bad preamble line {raw!r}")
                key, value = body.split("=", 1)
                scalars[key.strip()] = value.strip()
            elif line == "s,k,h,R":
                continue
            else:
                parts = line.split(",")
                if len(parts) != 4:
                    raise ValueError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
                rows.append((int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3])))
    try:
        config = ScenarioConfig(
            num_mds=int(scalars["num_mds"]),
            num_channels=int(scalars["num_channels"]),
            bandwidth_hz=float(scalars["bandwidth_hz"]),
            noise_power_w=float(scalars["noise_power_w"]),
            power_range_w=(float(scalars["power_min_w"]), float(scalars["power_max_w"])),
            task_size_range_bits=(
                float(scalars["task_min_bits"]),
                float(scalars["task_max_bits"]),
            ),
            mean_channel_gain=float(scalars["mean_channel_gain"]),
            lambda_t=float(scalars["lambda_t"]),
            lambda_e=float(scalars["lambda_e"]),
            rng_seed=int(scalars["rng_seed"]),
        )
        powers = np.array(
            [float(scalars[f"power_w_{s}"]) for s in range(config.num_mds)]
        )
        tasks = np.array(
            [float(scalars[f"task_bits_{s}"]) for s in range(config.num_mds)]
        )
    except KeyError as exc:
        raise ValueError(f"{path}: missing preamble key {exc.args[0]!r}") from None
    gains = np.zeros((config.num_mds, config.num_channels))
    rates = np.zeros_like(gains)
    seen = np.zeros(gains.shape, dtype=bool)
    for s, k, h, r in rows:
        if not (0 <= s < config.num_mds and 0 <= k < config.num_channels):
            raise ValueError(f"{path}: row index ({s},{k}) out of range")
        gains[s, k], rates[s, k] = h, r
        seen[s, k] = True
    if not seen.all():
        raise ValueError(f"{path}: missing (s,k) rows")
    return Scenario(config, gains, powers, tasks, rates)
