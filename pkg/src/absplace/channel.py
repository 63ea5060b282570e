"""Link budget models for the terrestrial BS and the aerial BSs.

Terrestrial links follow a reference-distance power law evaluated as a linear
transmit/receive ratio. Aerial links use the elevation-dependent LoS
probability sigmoid (angle in degrees) and a free-space-plus-excess-loss
budget in dB. Everything is deterministic: no fading terms, SNR only.

All helpers accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

LIGHT_SPEED_M_S = 3.0e8


@dataclass(frozen=True)
class ChannelParams:
    tbs_power_w: float = 20.0       # terrestrial BS transmit power
    abs_power_w: float = 5.0        # aerial BS transmit power
    tbs_ref_loss_db: float = -30.0  # terrestrial path loss at the reference distance
    tbs_exponent: float = 4.0       # terrestrial path loss exponent
    ref_distance_m: float = 1.0
    noise_w: float = 1e-6           # receiver noise power
    min_snr_db: float = 2.0         # service eligibility threshold
    carrier_hz: float = 2.5e9
    los_scale: float = 9.61         # environment constant of the LoS sigmoid
    los_steepness: float = 0.16     # per-degree slope of the LoS sigmoid
    excess_los_db: float = 1.0
    excess_nlos_db: float = 20.0
    bandwidth_hz: float = 1e6       # per-user allocation
    tbs_capacity: int = 50          # K_B users
    abs_capacity: int = 20          # K_D users

    def __post_init__(self):
        if self.tbs_power_w <= 0 or self.abs_power_w <= 0:
            raise ValueError("transmit powers must be positive")
        if self.ref_distance_m <= 0:
            raise ValueError("reference distance must be positive")
        if self.noise_w <= 0:
            raise ValueError("noise power must be positive")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")
        if self.tbs_capacity < 0 or self.abs_capacity < 0:
            raise ValueError("capacities must be >= 0")


def tbs_path_loss(distance_m, params: ChannelParams):
    """Terrestrial path loss as a linear P_T/P_R ratio.

    Below the reference distance the loss is clamped to the reference value
    (the power law would otherwise keep amplifying).
    """
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    kappa_lin = 10.0 ** (params.tbs_ref_loss_db / 10.0)
    ratio = np.maximum(d / params.ref_distance_m, 1.0)
    out = kappa_lin * ratio**params.tbs_exponent
    return float(out) if np.isscalar(distance_m) else out


def los_probability(height_m, ground_range_m, params: ChannelParams):
    """Probability of line of sight at elevation angle atan(h/r), in degrees.

    r = 0 means the user is directly underneath (90 degrees).
    """
    h = np.asarray(height_m, dtype=float)
    r = np.asarray(ground_range_m, dtype=float)
    if np.any(h < 0) or np.any(r < 0):
        raise ValueError("height and ground range must be >= 0")
    theta_deg = np.degrees(np.arctan2(h, r))
    out = 1.0 / (1.0 + params.los_scale * np.exp(-params.los_steepness * (theta_deg - params.los_scale)))
    if np.isscalar(height_m) and np.isscalar(ground_range_m):
        return float(out)
    return out


def abs_path_loss_db(height_m, ground_range_m, params: ChannelParams):
    """Aerial path loss in dB: free space at the carrier plus the
    LoS-probability-weighted excess losses."""
    h = np.asarray(height_m, dtype=float)
    r = np.asarray(ground_range_m, dtype=float)
    d = np.hypot(h, r)
    if np.any(d <= 0):
        raise ValueError("aerial link distance must be positive")
    p_los = los_probability(h, r, params)
    fs_const = 20.0 * np.log10(4.0 * np.pi * params.carrier_hz / LIGHT_SPEED_M_S)
    out = (
        fs_const
        + 20.0 * np.log10(d)
        + p_los * params.excess_los_db
        + (1.0 - p_los) * params.excess_nlos_db
    )
    if np.isscalar(height_m) and np.isscalar(ground_range_m):
        return float(out)
    return out


def tbs_received_power(distance_m, params: ChannelParams):
    return params.tbs_power_w / tbs_path_loss(distance_m, params)


def abs_received_power(height_m, ground_range_m, params: ChannelParams):
    return params.abs_power_w * 10.0 ** (-np.asarray(abs_path_loss_db(height_m, ground_range_m, params)) / 10.0)


def received_power(user, site, params: ChannelParams) -> float:
    """Received power at `user` from `site` (anything with .kind/.position)."""
    pos = site.position
    if site.kind == "tbs":
        d = math.dist((user.x, user.y, user.z), (pos.x, pos.y, pos.z))
        return float(tbs_received_power(d, params))
    if site.kind == "abs":
        h = pos.z - user.z
        r = math.hypot(pos.x - user.x, pos.y - user.y)
        if h < 0:
            raise ValueError("aerial site below the user")
        return float(abs_received_power(h, r, params))
    raise ValueError(f"unknown site kind {site.kind!r}")


def min_rx_power(params: ChannelParams) -> float:
    """Smallest received power that satisfies the SNR threshold."""
    return params.noise_w * 10.0 ** (params.min_snr_db / 10.0)


def snr_eligible(p_rx, params: ChannelParams):
    out = np.asarray(p_rx, dtype=float) >= min_rx_power(params)
    return bool(out) if np.isscalar(p_rx) else out


def user_bit_rate(p_rx, params: ChannelParams):
    """Shannon rate in bit/s for the per-user bandwidth allocation."""
    p = np.asarray(p_rx, dtype=float)
    if np.any(p < 0):
        raise ValueError("received power must be >= 0")
    out = params.bandwidth_hz * np.log2(1.0 + p / params.noise_w)
    return float(out) if np.isscalar(p_rx) else out


def coverage_radius(height_m: float, params: ChannelParams, tol: float = 1e-6) -> float:
    """Largest ground range at which an aerial BS at `height_m` is SNR-eligible.

    Path loss is strictly increasing in range at fixed height (longer link and
    lower elevation both hurt), so a bracket-and-bisect on the range is exact.
    Returns 0.0 when even the nadir user is ineligible.
    """
    if height_m <= 0:
        raise ValueError("height must be positive")
    thr = min_rx_power(params)
    if abs_received_power(height_m, 0.0, params) < thr:
        return 0.0
    lo, hi = 0.0, max(height_m, 1.0)
    for _ in range(64):
        if abs_received_power(height_m, hi, params) < thr:
            break
        lo, hi = hi, hi * 2.0
    else:
        raise RuntimeError("coverage radius bracket did not close")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if abs_received_power(height_m, mid, params) >= thr:
            lo = mid
        else:
            hi = mid
    return lo


@lru_cache(maxsize=64)
def coverage_radius_profile(
    params: ChannelParams, step_m: float = 1.0, max_height_m: float = 150.0
) -> tuple[tuple[float, float], ...]:
    """(height, coverage radius) pairs on a regular height scan.

    Every placement algorithm keys off this curve, and it only depends on the
    channel parameters, so it is memoized. Heights run from `step_m` upward in
    `step_m` increments through `max_height_m`.
    """
    if step_m <= 0 or max_height_m < step_m:
        raise ValueError("profile scan must cover at least one positive height")
    heights = np.arange(step_m, max_height_m + step_m / 2, step_m)
    return tuple((float(h), coverage_radius(float(h), params)) for h in heights)
