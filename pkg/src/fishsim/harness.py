"""Experiment orchestration: single runs, sweeps, convergence study, tracking.

Each simulation integrates the fish from its configured initial state (rest
by default) under the zero-order-hold gait controller, samples the state at
the uniform trajectory interval, and reduces the steady portion of the run
to speed and cost-of-transport metrics. The steady-state window is the final
two whole gait cycles. Motor work is the rectified power integral
int |tau_m * qd_1| dt, i.e. no regenerative credit is taken; the cost of
transport W_m / (m_total g d) depends directly on this convention.

Parameter sweeps run one independent simulation per value (optionally in
parallel worker processes); results are keyed by value so serial and
concurrent execution produce identical tables.
"""

from __future__ import annotations

import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .config import (Model, ModelConfig, build_model, config_from_dict,
                     config_hash, config_to_dict)
from .control import GaitController
from .integrators import IntegrationError, SolverStats, StepController, integrate, make_fish_rhs
from .kinematics import GeneralizedState, energies


@dataclass
class Trajectory:
    """Uniformly sampled run history plus per-sample controller channels."""

    times: np.ndarray            # (S,)
    q: np.ndarray                # (S, n_q)
    qd: np.ndarray               # (S, n_q)
    tau_m: np.ndarray            # (S,) held joint torque
    v_inst: np.ndarray           # (S,) instantaneous forward speed
    v_filt: np.ndarray           # (S,) EMA-filtered speed
    f_cmd: np.ndarray            # (S,) commanded tail-beat frequency
    phase: np.ndarray            # (S,) reference phase accumulator
    energy_kinetic: np.ndarray   # (S,)
    energy_potential: np.ndarray  # (S,)
    config_hash: str
    solver_stats: dict

    @property
    def n_q(self) -> int:
        return self.q.shape[1]

    def column_names(self) -> list:
        n = self.n_q - 3
        names = ["t", "X_G1", "Y_G1", "theta_G1"]
        names += [f"q_{i}" for i in range(1, n + 1)]
        names += ["Xd_G1", "Yd_G1", "thetad_G1"]
        names += [f"qd_{i}" for i in range(1, n + 1)]
        names += ["tau_m", "v_inst", "v_filt", "f_cmd", "phase",
                  "energy_kinetic", "energy_potential"]
        return names

    def to_matrix(self) -> np.ndarray:
        return np.column_stack([
            self.times, self.q, self.qd, self.tau_m, self.v_inst,
            self.v_filt, self.f_cmd, self.phase, self.energy_kinetic,
            self.energy_potential])


@dataclass
class Metrics:
    steady_speed: float      # m/s over the steady window
    motor_work: float        # J, rectified
    distance: float          # m, |X displacement| over the window
    cot: float               # W_m / (m_total g d); nan when undefined
    cot_defined: bool
    cycle_variation: float   # relative speed change between the final cycles
    window: tuple            # (t_start, t_end) of the steady window

    def as_dict(self) -> dict:
        return {
            "steady_speed": self.steady_speed,
            "motor_work": self.motor_work,
            "distance": self.distance,
            "cot": None if not self.cot_defined else self.cot,
            "cot_defined": self.cot_defined,
            "cycle_variation": self.cycle_variation,
            "window": list(self.window),
        }


def initial_ode_state(cfg: ModelConfig) -> np.ndarray:
    n_q = cfg.numerics.state_dim
    q = np.zeros(n_q)
    qd = np.zeros(n_q)
    q[0], q[1] = cfg.initial_state.position
    q[2] = cfg.initial_state.heading
    angles = cfg.initial_state.joint_angles
    q[3:3 + len(angles)] = angles
    vel = cfg.initial_state.velocities
    qd[:len(vel)] = vel
    return np.concatenate([q, qd])


def run_simulation(cfg: ModelConfig, scenario: str = "open-loop",
                   duration: float = 5.0, v_ref: float | None = None,
                   model: Model | None = None):
    """Integrate one gait and reduce it to (Trajectory, Metrics).

    `scenario` is "open-loop" (fixed tail-beat frequency) or "closed-loop"
    (PI speed tracking toward v_ref). Integration failures propagate as
    IntegrationError carrying the failure time and last valid state.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if scenario not in ("open-loop", "closed-loop"):
        raise ValueError(f"unknown scenario {scenario!r}")
    if scenario == "closed-loop" and v_ref is None:
        raise ValueError("closed-loop runs need a reference speed v_ref")

    model = model or build_model(cfg)
    num = cfg.numerics
    sample_dt = num.sample_dt
    n_samples = int(round(duration / sample_dt))
    duration = n_samples * sample_dt

    controller = GaitController(
        cfg.gait, cfg.speed_control, n_q=model.n_q,
        v_ref=v_ref if scenario == "closed-loop" else None,
        sample_dt=sample_dt)
    rhs = make_fish_rhs(model, controller.torque)

    log = {"tau_m": [], "v_inst": [], "v_filt": [], "f_cmd": [], "phase": [],
           "T": [], "V": []}

    def record(t, y):
        ch = controller.channels(t, y)
        log["tau_m"].append(ch["tau_m"])
        log["v_inst"].append(ch["v_inst"])
        log["v_filt"].append(ch["v_filt"])
        log["f_cmd"].append(ch["f_cmd"])
        log["phase"].append(ch["phase"])
        t_kin, v_pot = energies(
            GeneralizedState(y[:model.n_q], y[model.n_q:], t), model)
        log["T"].append(t_kin)
        log["V"].append(v_pot)

    step_ctrl = StepController(abs_tol=num.abs_tol, rel_tol=num.rel_tol,
                               dt_min=num.dt_min, dt_max=num.dt_max)
    result = integrate(rhs, initial_ode_state(cfg), (0.0, duration),
                       controller=step_ctrl, sample_dt=sample_dt,
                       callbacks=[controller.on_sample, record],
                       method=num.integrator)

    n_q = model.n_q
    traj = Trajectory(
        times=result.times,
        q=result.states[:, :n_q],
        qd=result.states[:, n_q:],
        tau_m=np.array(log["tau_m"]),
        v_inst=np.array(log["v_inst"]),
        v_filt=np.array(log["v_filt"]),
        f_cmd=np.array(log["f_cmd"]),
        phase=np.array(log["phase"]),
        energy_kinetic=np.array(log["T"]),
        energy_potential=np.array(log["V"]),
        config_hash=config_hash(cfg),
        solver_stats=result.stats.as_dict(),
    )
    return traj, metrics(traj, model)


def metrics(traj: Trajectory, model: Model, n_cycles: int = 2) -> Metrics:
    """Steady-window metrics over the final whole gait cycles of a run."""
    times = traj.times
    t_end = times[-1]
    f_gait = traj.f_cmd[-1]
    period = 1.0 / f_gait if f_gait > 0 else t_end
    window = min(n_cycles * period, t_end - times[0])
    t_start = t_end - window
    i0 = int(np.searchsorted(times, t_start - 1e-12))
    t_start = times[i0]

    x = traj.q[:, 0]
    distance = abs(float(x[-1] - x[i0]))
    span = float(t_end - t_start)
    steady_speed = distance / span if span > 0 else 0.0

    power = np.abs(traj.tau_m * traj.qd[:, 3])
    motor_work = float(np.trapezoid(power[i0:], times[i0:]))

    # per-cycle averaged speeds over the final two cycles
    i_mid = int(np.searchsorted(times, t_end - 0.5 * window - 1e-12))
    v_first = abs(float(x[i_mid] - x[i0])) / max(times[i_mid] - times[i0], 1e-12)
    v_second = abs(float(x[-1] - x[i_mid])) / max(t_end - times[i_mid], 1e-12)
    cycle_variation = abs(v_second - v_first) / max(abs(v_second), 1e-12)

    m_total = model.derived.m_total
    g = model.config.numerics.gravity
    if distance > 1e-9:
        cot = motor_work / (m_total * g * distance)
        cot_defined = True
    else:
        cot = float("nan")
        cot_defined = False
    return Metrics(steady_speed=steady_speed, motor_work=motor_work,
                   distance=distance, cot=cot, cot_defined=cot_defined,
                   cycle_variation=cycle_variation,
                   window=(float(t_start), float(t_end)))


# ---------------------------------------------------------------------------
# parameter sweeps

def apply_parameter(cfg: ModelConfig, parameter: str, value: float) -> ModelConfig:
    raw = config_to_dict(cfg)
    if parameter == "frequency":
        raw["gait"]["frequency"] = float(value)
    elif parameter in ("baseline_e", "baseline-e"):
        coeffs = list(raw["material"]["youngs_modulus_profile"])
        coeffs[0] = float(value)
        raw["material"]["youngs_modulus_profile"] = coeffs
    else:
        raise ValueError(f"unsupported sweep parameter {parameter!r}")
    return config_from_dict(raw)


@dataclass
class SweepRow:
    value: float
    steady_speed: float
    cot: float
    status: str                     # "ok" or the error message
    metrics: Metrics | None
    trajectory: Trajectory | None


def _sweep_worker(args):
    raw, parameter, value, duration = args
    cfg = apply_parameter(config_from_dict(raw), parameter, value)
    try:
        traj, mets = run_simulation(cfg, "open-loop", duration)
        return SweepRow(value=value, steady_speed=mets.steady_speed,
                        cot=mets.cot, status="ok", metrics=mets,
                        trajectory=traj)
    except (IntegrationError, FloatingPointError, RuntimeError) as exc:
        return SweepRow(value=value, steady_speed=float("nan"),
                        cot=float("nan"), status=f"failed: {exc}",
                        metrics=None, trajectory=None)


def sweep(cfg: ModelConfig, parameter: str, values, duration: float = 5.0,
          max_workers: int | None = None) -> list:
    """One independent open-loop run per value. Failures land in their row."""
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    apply_parameter(cfg, parameter, values[0])  # validate the axis up front
    raw = config_to_dict(cfg)
    jobs = [(raw, parameter, float(v), duration) for v in values]
    if max_workers is None or max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(_sweep_worker, jobs))
    else:
        rows = [_sweep_worker(job) for job in jobs]
    return rows


# ---------------------------------------------------------------------------
# Ritz convergence study

@dataclass
class ConvergenceRow:
    n_modes: int
    deviation: float        # max head-COM distance to the reference run
    wall_time: float        # s
    status: str
    trajectory: Trajectory | None


def convergence_study(cfg: ModelConfig, n_range, duration: float = 1.5) -> list:
    """Repeat one scenario while growing the Ritz basis.

    The scenario fixes the joint amplitude at 0.4 rad, the tail-beat
    frequency at 2 Hz, and the baseline modulus at 0.35 MPa; the deviation
    metric is the largest head-COM distance to the largest-basis run over
    the shared sample grid. Integration runs tighter than the general
    default (1e-9/1e-7) so basis error dominates integrator error in the
    comparison.
    """
    n_values = sorted(set(int(n) for n in n_range))
    if not n_values or n_values[0] < 1:
        raise ValueError("convergence study needs mode counts >= 1")
    raw = config_to_dict(cfg)
    raw["gait"]["amplitude"] = 0.4
    raw["gait"]["frequency"] = 2.0
    coeffs = list(raw["material"]["youngs_modulus_profile"])
    coeffs[0] = 0.35e6
    raw["material"]["youngs_modulus_profile"] = coeffs
    raw["numerics"]["abs_tol"] = min(raw["numerics"]["abs_tol"], 1e-9)
    raw["numerics"]["rel_tol"] = min(raw["numerics"]["rel_tol"], 1e-7)

    # one shared grid for all runs so only the basis size varies
    k_common = max(2 * max(n_values) + 14,
                   raw["numerics"]["quadrature_nodes"] or 0)
    rows = []
    for n in n_values:
        run_raw = {k: dict(v) for k, v in raw.items()}
        run_raw["numerics"]["ritz_modes"] = n
        run_raw["numerics"]["quadrature_nodes"] = k_common
        run_raw["initial_state"] = dict(raw["initial_state"])
        run_raw["initial_state"]["joint_angles"] = \
            list(raw["initial_state"]["joint_angles"])[:n]
        run_cfg = config_from_dict(run_raw)
        start = _time.perf_counter()
        try:
            traj, _ = run_simulation(run_cfg, "open-loop", duration)
            elapsed = _time.perf_counter() - start
            rows.append(ConvergenceRow(n_modes=n, deviation=float("nan"),
                                       wall_time=elapsed, status="ok",
                                       trajectory=traj))
        except (IntegrationError, FloatingPointError, RuntimeError) as exc:
            rows.append(ConvergenceRow(n_modes=n, deviation=float("nan"),
                                       wall_time=_time.perf_counter() - start,
                                       status=f"failed: {exc}", trajectory=None))

    reference = next((r.trajectory for r in reversed(rows) if r.trajectory is not None), None)
    if reference is not None:
        for row in rows:
            if row.trajectory is None:
                continue
            dx = row.trajectory.q[:, 0] - reference.q[:, 0]
            dy = row.trajectory.q[:, 1] - reference.q[:, 1]
            row.deviation = float(np.max(np.hypot(dx, dy)))
    return rows


# ---------------------------------------------------------------------------
# closed-loop tracking

@dataclass
class TrackingReport:
    v_ref: float
    rise_time: float         # s to first reach 90% of v_ref; nan if never
    overshoot: float         # fractional peak overshoot of v_filt
    steady_state_error: float  # mean v_ref - v_filt over the final window
    cot: float
    cot_defined: bool
    saturated_at_steady_state: bool

    def as_dict(self) -> dict:
        return {
            "v_ref": self.v_ref,
            "rise_time": None if np.isnan(self.rise_time) else self.rise_time,
            "overshoot": self.overshoot,
            "steady_state_error": self.steady_state_error,
            "cot": None if not self.cot_defined else self.cot,
            "cot_defined": self.cot_defined,
            "saturated_at_steady_state": self.saturated_at_steady_state,
        }


def track(cfg: ModelConfig, v_ref: float, duration: float = 20.0):
    """Closed-loop speed tracking run with EMA + PI + PD stack."""
    if v_ref <= 0:
        raise ValueError("target speed must be positive")
    model = build_model(cfg)
    traj, mets = run_simulation(cfg, "closed-loop", duration, v_ref=v_ref,
                                model=model)

    v_f = traj.v_filt
    times = traj.times
    above = np.nonzero(v_f >= 0.9 * v_ref)[0]
    rise_time = float(times[above[0]]) if above.size else float("nan")
    overshoot = max(0.0, float(np.max(v_f)) - v_ref) / v_ref

    i0 = int(np.searchsorted(times, times[-1] - 0.25 * (times[-1] - times[0])))
    sse = float(np.mean(v_ref - v_f[i0:]))
    f_tail = traj.f_cmd[i0:]
    sc = cfg.speed_control
    saturated = bool(np.any(f_tail >= sc.frequency_max - 1e-12)
                     or np.any(f_tail <= sc.frequency_min + 1e-12))

    report = TrackingReport(
        v_ref=v_ref, rise_time=rise_time, overshoot=overshoot,
        steady_state_error=sse, cot=mets.cot, cot_defined=mets.cot_defined,
        saturated_at_steady_state=saturated)
    return traj, mets, report
