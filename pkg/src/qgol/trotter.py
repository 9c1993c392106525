"""Product-formula schedules over the three commuting term groups.

A schedule is a list of ``(group, weight)`` pairs; applying it means
exponentiating group ``group`` for time ``weight * dt`` in list order.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

SUPPORTED_ORDERS = (1, 2, 4)

# Suzuki/Yoshida triple-jump coefficient for lifting Strang to fourth order.
_TRIPLE_JUMP = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))


@dataclass(frozen=True)
class EvolutionParams:
    dt: float = 1e-2
    t_final: float = 100.0
    order: int = 4
    sample_interval: float | None = None
    generation_time: float = math.pi / 2

    def __post_init__(self) -> None:
        if self.sample_interval is None:
            object.__setattr__(self, "sample_interval", 5 * self.dt)
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.order not in SUPPORTED_ORDERS:
            raise ValueError(f"order must be one of {SUPPORTED_ORDERS}, got {self.order}")
        if self.sample_interval < self.dt * (1 - 1e-9):
            raise ValueError("sample_interval must be >= dt")
        ratio = self.sample_interval / self.dt
        if abs(ratio - round(ratio)) > 1e-6 * ratio:
            raise ValueError(f"sample_interval {self.sample_interval} is not an integer multiple of dt {self.dt}")
        if self.t_final < self.sample_interval * (1 - 1e-9):
            raise ValueError("t_final must be >= sample_interval")
        if not self.generation_time > 0:
            raise ValueError("generation_time must be positive")

    @property
    def steps_per_sample(self) -> int:
        return max(1, int(round(self.sample_interval / self.dt)))

    @property
    def n_samples(self) -> int:
        """Number of recorded samples after t=0."""
        return int(round(self.t_final / (self.steps_per_sample * self.dt)))

    def sample_times(self) -> list[float]:
        h = self.steps_per_sample * self.dt
        return [k * h for k in range(self.n_samples + 1)]


def step_schedule(order: int) -> list[tuple[int, float]]:
    """Stages of a single step of the requested order (unmerged)."""
    if order == 1:
        return [(0, 1.0), (1, 1.0), (2, 1.0)]
    if order == 2:
        return [(0, 0.5), (1, 0.5), (2, 1.0), (1, 0.5), (0, 0.5)]
    if order == 4:
        out: list[tuple[int, float]] = []
        for w in (_TRIPLE_JUMP, 1.0 - 2.0 * _TRIPLE_JUMP, _TRIPLE_JUMP):
            out.extend((g, c * w) for g, c in step_schedule(2))
        return out
    raise ValueError(f"unsupported order {order}")


def merge_stages(stages: list[tuple[int, float]]) -> list[tuple[int, float]]:
    """Fuse consecutive stages on the same group (their exponentials commute)."""
    merged: list[tuple[int, float]] = []
    for g, w in stages:
        if merged and merged[-1][0] == g:
            merged[-1] = (g, merged[-1][1] + w)
        else:
            merged.append((g, w))
    return [(g, w) for g, w in merged if w != 0.0]


def segment_schedule(order: int, n_steps: int) -> list[tuple[int, float]]:
    """Merged schedule for ``n_steps`` consecutive steps."""
    return merge_stages(step_schedule(order) * n_steps)
