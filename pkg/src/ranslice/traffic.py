"""Seeded per-UE traffic generators and channel-quality processes.

Every UE owns two independent random substreams (traffic and channel) keyed
on ``(run_seed, ue_id)``, so adding or removing a UE leaves every other UE's
sequences untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .stack import Sdu

_TRAFFIC_STREAM = 0
_CHANNEL_STREAM = 1


@dataclass(frozen=True)
class Voip:
    on_mean_s: float
    off_mean_s: float
    pkt_bits: int = 320
    period_ttis: int = 20
    start_tti: int = 0
    stop_tti: Optional[int] = None


@dataclass(frozen=True)
class CbrVideo:
    rate_bps: float
    frame_period_ttis: int = 33
    start_tti: int = 0
    stop_tti: Optional[int] = None

    @property
    def frame_bits(self) -> int:
        exact = Fraction(self.rate_bps) * self.frame_period_ttis / 1000
        return int(exact + Fraction(1, 2))


@dataclass(frozen=True)
class FullBuffer:
    target_backlog_bits: int
    start_tti: int = 0
    stop_tti: Optional[int] = None


@dataclass(frozen=True)
class Fixed:
    cqi: int


@dataclass(frozen=True)
class RandomWalk:
    start_cqi: int
    step_period_ttis: int
    min: int = 1
    max: int = 15


TrafficModel = Union[Voip, CbrVideo, FullBuffer]
CqiProcess = Union[Fixed, RandomWalk]

TRAFFIC_TYPES = {"voip": Voip, "cbr_video": CbrVideo, "full_buffer": FullBuffer}
CHANNEL_TYPES = {"fixed": Fixed, "random_walk": RandomWalk}


def substream(run_seed: int, ue_id: int, purpose: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([run_seed, ue_id, purpose])))


def _dwell_ttis(rng: np.random.Generator, mean_s: float) -> int:
    return max(1, int(round(rng.exponential(mean_s * 1000.0))))


class TrafficSource:
    """Arrival process of one UE; call :meth:`arrivals` once per TTI in order."""

    def __init__(self, model: TrafficModel, ue_id: int, run_seed: int):
        self.model = model
        self.ue_id = ue_id
        self.rng = substream(run_seed, ue_id, _TRAFFIC_STREAM)
        self._on = False
        self._phase_start = None
        self._phase_end = None
        self._last_tti = None
        self._last = []

    def _active(self, tti: int) -> bool:
        m = self.model
        return tti >= m.start_tti and (m.stop_tti is None or tti < m.stop_tti)

    def arrivals(self, tti: int, backlog_bits: int = 0) -> list:
        if tti == self._last_tti:
            return list(self._last)
        self._last_tti = tti
        self._last = self._generate(tti, backlog_bits)
        return list(self._last)

    def _generate(self, tti: int, backlog_bits: int) -> list:
        m = self.model
        if not self._active(tti):
            return []
        if isinstance(m, FullBuffer):
            if backlog_bits < m.target_backlog_bits:
                return [Sdu(m.target_backlog_bits - backlog_bits, self.ue_id, tti)]
            return []
        if isinstance(m, CbrVideo):
            if (tti - m.start_tti) % m.frame_period_ttis == 0 and m.frame_bits > 0:
                return [Sdu(m.frame_bits, self.ue_id, tti)]
            return []
        return self._voip(tti)

    def _voip(self, tti: int) -> list:
        m = self.model
        if self._phase_start is None:
            # a call starts in talk-spurt at activation
            self._on = True
            self._phase_start = tti
            self._phase_end = tti + _dwell_ttis(self.rng, m.on_mean_s)
        while tti >= self._phase_end:
            self._on = not self._on
            self._phase_start = self._phase_end
            mean = m.on_mean_s if self._on else m.off_mean_s
            self._phase_end = self._phase_start + _dwell_ttis(self.rng, mean)
        if self._on and (tti - self._phase_start) % m.period_ttis == 0:
            return [Sdu(m.pkt_bits, self.ue_id, tti)]
        return []

    @property
    def is_on(self) -> bool:
        return self._on


class ChannelSource:
    """CQI process of one UE; the value at a TTI is cached so repeat calls agree."""

    def __init__(self, process: CqiProcess, ue_id: int, run_seed: int):
        self.process = process
        self.ue_id = ue_id
        self.rng = substream(run_seed, ue_id, _CHANNEL_STREAM)
        self._tti = None
        self._cqi = process.cqi if isinstance(process, Fixed) else process.start_cqi

    def cqi_at(self, tti: int) -> int:
        p = self.process
        if isinstance(p, Fixed):
            return p.cqi
        if self._tti is None:
            self._tti = 0
        if tti < self._tti:
            raise ValueError(f"CQI process already advanced past TTI {tti}")
        for t in range(self._tti + 1, tti + 1):
            if t % p.step_period_ttis == 0:
                step = 1 if self.rng.random() < 0.5 else -1
                self._cqi = min(p.max, max(p.min, self._cqi + step))
        self._tti = tti
        return self._cqi


def arrivals(source: TrafficSource, tti: int, backlog_bits: int = 0) -> list:
    return source.arrivals(tti, backlog_bits)


def cqi_at(source: ChannelSource, tti: int) -> int:
    return source.cqi_at(tti)
