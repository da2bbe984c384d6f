"""Log-distance path-loss model and the instantaneous BLE scan abstraction."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .ids import ReferenceCode

FEET_TO_METERS = 0.3048
CLOSE_CONTACT_M = 6 * FEET_TO_METERS  # 1.8288 m


@dataclass(frozen=True)
class RadioParams:
    n: float = 2.0
    C: float = -40.0
    max_range_m: float = 30.0
    noise_sigma_db: float = 0.0

    def __post_init__(self):
        if not self.n > 0:
            raise ValueError(f"path-loss exponent must be positive, got {self.n}")
        if not self.max_range_m > 0:
            raise ValueError(f"max_range_m must be positive, got {self.max_range_m}")
        if not self.noise_sigma_db >= 0:
            raise ValueError(f"noise_sigma_db must be >= 0, got {self.noise_sigma_db}")
        for name in ("n", "C", "max_range_m", "noise_sigma_db"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


DEFAULT_RADIO = RadioParams()


class SignalObservation(NamedTuple):
    """One scanned advertisement. Deliberately carries no position.

    A plain tuple because scans produce millions of these; ``observe`` is the
    producer and always yields a positive distance.
    """

    code: ReferenceCode
    distance_m: float
    timestamp: int


def rssi_at(distance_m: float, params: RadioParams, rng: random.Random | None = None) -> float:
    if distance_m <= 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    rssi = -10.0 * params.n * math.log10(distance_m) + params.C
    if params.noise_sigma_db > 0:
        if rng is None:
            raise ValueError("a random source is required when noise_sigma_db > 0")
        rssi += rng.gauss(0.0, params.noise_sigma_db)
    return rssi


def distance_from(rssi: float, params: RadioParams) -> float:
    return 10.0 ** ((params.C - rssi) / (10.0 * params.n))


def observe(
    scanner_pos: tuple[float, float],
    broadcaster: tuple[ReferenceCode, tuple[float, float]],
    params: RadioParams,
    now: int,
    rng: random.Random | None = None,
) -> SignalObservation | None:
    """Sample one advertiser at the scan instant; None when out of range.

    Noise can push the estimate past ``max_range_m``; it is clamped there so an
    observation never claims a distance the radio cannot hear.
    """
    code, pos = broadcaster
    true_distance = math.hypot(pos[0] - scanner_pos[0], pos[1] - scanner_pos[1])
    if true_distance > params.max_range_m:
        return None
    # co-located devices still sit a hair apart physically
    true_distance = max(true_distance, 1e-3)
    estimate = distance_from(rssi_at(true_distance, params, rng), params)
    return SignalObservation(code, min(estimate, params.max_range_m), now)


def nearest_per_code(observations: Iterable[SignalObservation]) -> list[SignalObservation]:
    """Keep the nearest observation per code, ordered by code."""
    best: dict[ReferenceCode, SignalObservation] = {}
    for obs in observations:
        kept = best.get(obs.code)
        if kept is None or obs.distance_m < kept.distance_m:
            best[obs.code] = obs
    return [best[code] for code in sorted(best)]
