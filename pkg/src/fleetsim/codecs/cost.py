"""Per-stream CPU cost model, in percent of one logical core."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class CostModel:
    c_net: float = 0.5
    c_dec: float = 6.0
    c_ipc: float = 1.8

    def __post_init__(self) -> None:
        if min(self.c_net, self.c_dec, self.c_ipc) < 0:
            raise ValueError("costs must be non-negative")
        if not self.c_ipc < self.c_dec:
            raise ValueError("IPC must be cheaper than decoding (c_ipc < c_dec)")

    @property
    def base_slope(self) -> float:
        return self.c_net + self.c_dec

    @property
    def proposed_slope(self) -> float:
        return self.c_ipc

    @property
    def scaling_reduction(self) -> float:
        return 1.0 - self.proposed_slope / self.base_slope


def cost_base(model: CostModel, n_subscribers: int) -> float:
    """Every subscriber receives and decodes its own copy."""
    if n_subscribers < 0:
        raise ValueError("subscriber count must be >= 0")
    return n_subscribers * (model.c_net + model.c_dec)


def cost_proposed(model: CostModel, n_subscribers: int) -> float:
    """One receive and decode per device, then local fan-out."""
    if n_subscribers < 0:
        raise ValueError("subscriber count must be >= 0")
    return model.c_net + model.c_dec + n_subscribers * model.c_ipc


class CpuMeter:
    """Counts per-frame cost charges; converts to core-percent at the end.

    Counting integers keeps sums exact; the float conversion happens once.
    """

    KINDS = ("net", "dec", "ipc")

    def __init__(self, model: CostModel):
        self.model = model
        self.counts = {k: 0 for k in self.KINDS}

    def charge(self, kind: str, count: int = 1) -> None:
        self.counts[kind] += count

    def units(self, frames: int) -> float:
        """Average load given the number of frames the source emitted in the window."""
        if frames <= 0:
            return 0.0
        m = self.model
        total = self.counts["net"] * m.c_net + self.counts["dec"] * m.c_dec + self.counts["ipc"] * m.c_ipc
        return total / frames

    def reset(self) -> None:
        for k in self.KINDS:
            self.counts[k] = 0
