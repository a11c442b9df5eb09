"""Gait generation and speed control.

A PD servo tracks the joint-angle reference A sin(Theta) where Theta is a
continuous phase accumulator advanced at the commanded tail-beat frequency;
frequency changes therefore never produce reference jumps. For closed-loop
speed control the oscillating instantaneous forward speed is smoothed by an
exponential moving average (the exact discretization of
d v_f/dt = (v_i - v_f)/tau_f, so the update is exact for piecewise-constant
input regardless of dt), and a PI law with directional anti-windup maps the
filtered-speed error to the commanded frequency inside [f_min, f_max].

All controllers run as zero-order holds at the trajectory sample interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class PdGains:
    kp: float          # N m / rad
    kd: float          # N m s / rad
    tau_max: float     # N m, saturation

    def __post_init__(self):
        if self.kp < 0 or self.kd < 0:
            raise ValueError("PD gains must be nonnegative")
        if self.tau_max <= 0:
            raise ValueError("torque saturation must be positive")


@dataclass
class GaitReference:
    """Joint-angle reference: amplitude, phase accumulator, and frequency.

    With ramp_phase > 0 the amplitude fades in smoothly (cubic smoothstep
    over that much accumulated phase), so both the reference angle and rate
    start at exactly zero; a hard-started rate step would hammer the nearly
    inertia-free high-order body modes. A zero ramp reproduces the plain
    A sin(Theta) reference.
    """

    amplitude: float   # rad
    frequency: float   # Hz
    phase: float = 0.0  # rad
    ramp_phase: float = 0.0  # rad of phase over which the amplitude fades in

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("gait amplitude must be nonnegative")
        if self.ramp_phase < 0:
            raise ValueError("ramp phase must be nonnegative")

    def _ramp(self) -> tuple:
        """(r, dr/dTheta) of the smooth amplitude fade-in."""
        if self.ramp_phase <= 0.0 or self.phase >= self.ramp_phase:
            return 1.0, 0.0
        s = self.phase / self.ramp_phase
        return s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s) / self.ramp_phase

    def angle(self) -> float:
        r, _ = self._ramp()
        return self.amplitude * r * math.sin(self.phase)

    def rate(self) -> float:
        r, dr = self._ramp()
        omega = 2.0 * math.pi * self.frequency
        return self.amplitude * omega * (dr * math.sin(self.phase)
                                         + r * math.cos(self.phase))

    def advance(self, dt: float):
        self.phase += 2.0 * math.pi * self.frequency * dt


def pd_joint_torque(q1: float, q1_rate: float, ref: GaitReference,
                    gains: PdGains) -> float:
    """Saturated PD torque on the joint angle (the first Ritz coordinate)."""
    tau = gains.kp * (ref.angle() - q1) + gains.kd * (ref.rate() - q1_rate)
    return max(-gains.tau_max, min(gains.tau_max, tau))


@dataclass
class EmaFilter:
    """First-order low-pass with exact exponential updates."""

    time_constant: float  # s
    value: float = 0.0

    def __post_init__(self):
        if self.time_constant <= 0:
            raise ValueError("filter time constant must be positive")

    @property
    def cutoff_hz(self) -> float:
        return 1.0 / (2.0 * math.pi * self.time_constant)

    def update(self, v_in: float, dt: float) -> float:
        if dt <= 0:
            raise ValueError("dt must be positive")
        decay = math.exp(-dt / self.time_constant)
        self.value = v_in + (self.value - v_in) * decay
        return self.value


def ema_update(filt: EmaFilter, v_in: float, dt: float) -> float:
    return filt.update(v_in, dt)


@dataclass
class PiGains:
    kp: float            # Hz s / m
    ki: float            # Hz / m
    frequency_min: float  # Hz
    frequency_max: float  # Hz

    def __post_init__(self):
        if not 0 < self.frequency_min < self.frequency_max:
            raise ValueError("frequency limits must satisfy 0 < f_min < f_max")


@dataclass
class PiSpeedController:
    """PI speed-to-frequency law with clamping and directional anti-windup.

    The integrator freezes only while the command saturates in the same
    direction the error pushes, so recovery from the clamp is immediate.
    """

    gains: PiGains
    integral: float = 0.0
    saturated: bool = False

    def update(self, v_filtered: float, v_ref: float, dt: float) -> float:
        if dt <= 0:
            raise ValueError("dt must be positive")
        g = self.gains
        err = v_ref - v_filtered
        integral_trial = self.integral + err * dt
        f_raw = g.kp * err + g.ki * integral_trial
        if f_raw > g.frequency_max:
            self.saturated = True
            if err <= 0:
                self.integral = integral_trial
            return g.frequency_max
        if f_raw < g.frequency_min:
            self.saturated = True
            if err >= 0:
                self.integral = integral_trial
            return g.frequency_min
        self.saturated = False
        self.integral = integral_trial
        return f_raw


def pi_speed_to_frequency(controller: PiSpeedController, ref: GaitReference,
                          v_filtered: float, v_ref: float, dt: float) -> float:
    """Advance the outer speed loop one hold interval; returns the command.

    Updates the commanded frequency and accumulates the reference phase with
    it, keeping Theta continuous across frequency changes.
    """
    f_cmd = controller.update(v_filtered, v_ref, dt)
    ref.frequency = f_cmd
    ref.advance(dt)
    return f_cmd


class GaitController:
    """Controller stack driving one simulation run.

    The outer loop (speed filter, PI frequency command, phase accumulation)
    runs as a zero-order hold at the sample interval. The PD joint servo is
    continuous: the torque is evaluated inside the RHS from the instantaneous
    state against the phase interpolated at the held frequency. A held
    (stepwise) joint torque would re-kick the nearly inertia-free high-order
    Ritz modes at every boundary and force the stiff integrator to resolve
    the resulting microscopic ringing.
    """

    def __init__(self, gait, speed, n_q: int, v_ref: float | None = None,
                 sample_dt: float = 1e-2):
        self.pd = PdGains(kp=gait.kp, kd=gait.kd, tau_max=gait.torque_limit)
        self.ref = GaitReference(
            amplitude=gait.amplitude, frequency=gait.frequency,
            ramp_phase=2.0 * math.pi * gait.start_ramp_cycles)
        self.ema = EmaFilter(time_constant=speed.filter_time_constant)
        self.pi = PiSpeedController(PiGains(
            kp=speed.kp, ki=speed.ki,
            frequency_min=speed.frequency_min, frequency_max=speed.frequency_max))
        self.v_ref = v_ref
        self.closed_loop = v_ref is not None
        self.n_q = n_q
        self.sample_dt = sample_dt
        self.t_boundary = 0.0
        self.v_inst = 0.0
        self.started = False
        if self.closed_loop:
            # first command from the proportional path before any filtering
            f0 = self.pi.gains.kp * v_ref
            self.ref.frequency = min(max(f0, self.pi.gains.frequency_min),
                                     self.pi.gains.frequency_max)

    def _reference_at(self, t: float) -> GaitReference:
        phase = self.ref.phase + 2.0 * math.pi * self.ref.frequency \
            * (t - self.t_boundary)
        return GaitReference(amplitude=self.ref.amplitude,
                             frequency=self.ref.frequency, phase=phase,
                             ramp_phase=self.ref.ramp_phase)

    def torque(self, t, y) -> float:
        """Continuous PD torque from the instantaneous state and reference."""
        ref = self._reference_at(t)
        return pd_joint_torque(float(y[3]), float(y[self.n_q + 3]), ref, self.pd)

    def on_sample(self, t, y):
        """Sample-time callback: measure, filter, and command for the next hold."""
        self.v_inst = float(y[self.n_q])
        if self.started:
            self.ema.update(self.v_inst, self.sample_dt)
            if self.closed_loop:
                pi_speed_to_frequency(self.pi, self.ref, self.ema.value,
                                      self.v_ref, self.sample_dt)
            else:
                self.ref.advance(self.sample_dt)
        else:
            self.started = True
        self.t_boundary = t

    def channels(self, t, y) -> dict:
        return {
            "tau_m": self.torque(t, y),
            "v_inst": self.v_inst,
            "v_filt": self.ema.value,
            "f_cmd": self.ref.frequency,
            "phase": self.ref.phase,
        }
