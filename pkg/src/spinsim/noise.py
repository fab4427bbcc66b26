"""Quasi-static Gaussian disturbances on the control channels.

Each Monte Carlo trial draws one constant offset per noise channel from
N(0, sigma) and adds it to the ideal piecewise-constant waveform before
filtering.  Streams are keyed by (master seed, sweep point, trial), so
draws are reproducible regardless of execution order or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import QubitModel
from .pulses import PiecewiseConstantSignal


@dataclass(frozen=True)
class NoiseSpec:
    """Per-channel standard deviations, in the channel's internal units
    (rad/ns for the SS drive/detuning, ueV for exchange couplings and
    gradients).  `noise_when_off` keeps the offset present where the
    nominal channel value is zero, idle levels included."""
    sigmas: dict = field(default_factory=dict)
    noise_when_off: bool = True

    def __post_init__(self):
        for name, sigma in self.sigmas.items():
            if sigma < 0:
                raise ValueError(f"sigma for {name!r} must be >= 0")

    def active_channels(self, model: QubitModel) -> tuple:
        return tuple(name for name in model.noise_channels
                     if self.sigmas.get(name, 0.0) > 0.0)

    def is_silent(self, model: QubitModel) -> bool:
        return not self.active_channels(model)


@dataclass(frozen=True)
class TrialSeed:
    """Deterministic stream identity for one Monte Carlo trial."""
    master_seed: int
    point_index: int
    trial_index: int

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            self.master_seed,
            spawn_key=(self.point_index, self.trial_index))
        return np.random.Generator(np.random.Philox(seq))


def draw_offsets(spec: NoiseSpec, model: QubitModel, seed: TrialSeed) -> dict:
    """One constant N(0, sigma) offset per active channel, fixed draw order."""
    rng = seed.generator()
    offsets = {}
    for name in sorted(spec.active_channels(model)):
        offsets[name] = float(rng.normal(0.0, spec.sigmas[name]))
    return offsets


def draw_offsets_batch(spec: NoiseSpec, model: QubitModel, master_seed: int,
                       point_index: int, trials: int) -> np.ndarray:
    """(trials, K) offsets for the active channels in sorted-name order."""
    names = sorted(spec.active_channels(model))
    out = np.zeros((trials, len(names)))
    for t in range(trials):
        offs = draw_offsets(spec, model, TrialSeed(master_seed, point_index, t))
        out[t] = [offs[name] for name in names]
    return out


def perturb(signal: PiecewiseConstantSignal, offsets: dict,
            model: QubitModel, noise_when_off: bool = True
            ) -> PiecewiseConstantSignal:
    """Shift the waveform by constant per-channel offsets.

    The offset couples into the signal channels through the model's
    noise pattern (an indicator for exchange/gradient channels, the
    per-step drive phase for the SS Rabi amplitude) and is applied to
    the idle levels as well when `noise_when_off` is set.
    """
    if signal.channels != model.channels:
        raise ValueError("signal channels do not match the model")
    values = signal.values.copy()
    idle = signal.idle.copy()
    for name, delta in offsets.items():
        seg_pattern, idle_pattern = model.noise_pattern(
            signal, name, noise_when_off)
        values += delta * seg_pattern
        idle += delta * idle_pattern
    return PiecewiseConstantSignal(channels=signal.channels,
                                   durations=signal.durations.copy(),
                                   values=values, idle=idle,
                                   phases=signal.phases)
