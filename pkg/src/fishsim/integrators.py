"""Adaptive implicit time integration of the second-order dynamics.

The state is y = [q^c, qd^c]; the right-hand side stacks the velocities with
the accelerations from the dense weak-form solve. The workhorse scheme is
TR-BDF2: a trapezoidal substep to t + gamma*dt with gamma = 2 - sqrt(2)
followed by a BDF2 step to t + dt. Both implicit stages share the iteration
matrix I - d*dt*J with d = 1 - 1/sqrt(2), solved by Newton iteration with a
finite-difference Jacobian that is reused across steps until convergence
degrades. An embedded third-order companion supplies the error estimate
(filtered through the iteration matrix, which is the standard stiff-safe
choice), and accepted steps provide cubic Hermite dense output for uniform
sampling. An explicit adaptive RK45 (scipy) is available purely as a
cross-check oracle for non-stiff configurations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .assembly import accelerations
from .kinematics import GeneralizedState

GAMMA = 2.0 - math.sqrt(2.0)
D_COEF = 1.0 - 1.0 / math.sqrt(2.0)          # = GAMMA / 2
_W = math.sqrt(2.0) / 4.0
_B = (_W, _W, D_COEF)                        # 2nd-order weights (the advancing method)
_BH = ((1.0 - _W) / 3.0, (3.0 * _W + 1.0) / 3.0, D_COEF / 3.0)  # 3rd-order companion
_E = tuple(b - bh for b, bh in zip(_B, _BH))

MAX_NEWTON = 8
NEWTON_KAPPA = 0.05


class IntegrationError(RuntimeError):
    """Integration could not continue; carries the failure time and state."""

    def __init__(self, message: str, time: float, last_state: np.ndarray):
        super().__init__(f"{message} (t={time:.6g})")
        self.time = time
        self.last_state = np.array(last_state)


@dataclass
class StepController:
    """Error tolerances and step-size limits for adaptive integration."""

    abs_tol: float = 1e-8
    rel_tol: float = 1e-6
    dt_min: float = 1e-10
    dt_max: float = 1e-2
    safety: float = 0.9

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.dt_min <= self.dt_max:
            raise ValueError("step limits must satisfy 0 < dt_min <= dt_max")


@dataclass
class SolverStats:
    steps_accepted: int = 0
    steps_rejected: int = 0
    rhs_evals: int = 0
    jacobian_evals: int = 0
    newton_iters: int = 0
    newton_failures: int = 0

    def as_dict(self) -> dict:
        return {
            "steps_accepted": self.steps_accepted,
            "steps_rejected": self.steps_rejected,
            "rhs_evals": self.rhs_evals,
            "jacobian_evals": self.jacobian_evals,
            "newton_iters": self.newton_iters,
            "newton_failures": self.newton_failures,
        }


def make_fish_rhs(model, torque):
    """First-order reduction ydot = [qd, M^-1 F] with torque = callable(t, y)."""
    n_q = model.n_q

    def rhs(t, y):
        state = GeneralizedState(y[:n_q], y[n_q:], t)
        tau = torque(t, y)
        qdd = accelerations(state, tau, model)
        return np.concatenate([y[n_q:], qdd])

    return rhs


class _TrBdf2(object):
    """One-step TR-BDF2 with persistent Jacobian and statistics."""

    def __init__(self, rhs, controller: StepController, stats: SolverStats):
        self.rhs = rhs
        self.ctrl = controller
        self.stats = stats
        self.jac = None
        self._lu = None
        self._lu_key = None

    def eval_rhs(self, t, y):
        self.stats.rhs_evals += 1
        f = self.rhs(t, y)
        return np.asarray(f, dtype=float)

    def build_jacobian(self, t, y, f0):
        # central differences: second-order accurate, and exactly odd in the
        # bump sign, which keeps mirrored trajectories bitwise mirrored
        n = len(y)
        jac = np.empty((n, n))
        for j in range(n):
            h = 6e-6 * (1.0 + abs(y[j]))
            yp = y.copy()
            ym = y.copy()
            yp[j] += h
            ym[j] -= h
            jac[:, j] = (self.eval_rhs(t, yp) - self.eval_rhs(t, ym)) / (2.0 * h)
        self.jac = jac
        self.stats.jacobian_evals += 1
        self._lu = None

    def _factor(self, dt):
        key = dt
        if self._lu is None or self._lu_key != key:
            n = self.jac.shape[0]
            self._lu = scipy.linalg.lu_factor(np.eye(n) - D_COEF * dt * self.jac)
            self._lu_key = key
        return self._lu

    def _weights(self, y):
        return self.ctrl.abs_tol + self.ctrl.rel_tol * np.abs(y)

    def _newton(self, t_stage, dt, guess, const, wts):
        """Solve x = const + d*dt*f(t_stage, x); returns (x, f) or None.

        Accepts on the scaled update norm; a stalled small update is treated
        as converged at the rounding floor of the ill-conditioned
        acceleration solve rather than as divergence.
        """
        lu = self._factor(dt)
        x = guess.copy()
        prev_norm = None
        for _ in range(MAX_NEWTON):
            f = self.eval_rhs(t_stage, x)
            residual = x - const - D_COEF * dt * f
            delta = scipy.linalg.lu_solve(lu, residual)
            x = x - delta
            self.stats.newton_iters += 1
            norm = float(np.sqrt(np.mean((delta / wts) ** 2)))
            if norm < NEWTON_KAPPA:
                return x, f
            if prev_norm is not None:
                rate = norm / prev_norm
                if norm < 0.5 and rate > 0.7:
                    return x, f  # stagnation at the noise floor
                if rate > 2.0:
                    return None
            prev_norm = norm
        return None

    def _solve_stage(self, t_stage, dt, guess, const, wts, fallback):
        sol = self._newton(t_stage, dt, guess, const, wts)
        if sol is None and fallback is not None:
            sol = self._newton(t_stage, dt, fallback, const, wts)
        return sol

    def attempt(self, t, y, dt, f0):
        """One trial step; returns (y1, f1, err_norm) or None on Newton failure."""
        wts = self._weights(y)
        if self.jac is None:
            self.build_jacobian(t, y, f0)

        # trapezoidal substep to t + gamma dt (d*dt = gamma*dt/2); the Euler
        # predictor is retried from y itself when a violent transient makes
        # the extrapolated guess leave Newton's convergence basin
        const_tr = y + D_COEF * dt * f0
        guess_tr = y + GAMMA * dt * f0
        sol = self._solve_stage(t + GAMMA * dt, dt, guess_tr, const_tr, wts, y)
        if sol is None:
            return None
        y_g, f_g = sol

        # BDF2 substep to t + dt
        c0 = (1.0 - GAMMA) ** 2 / (GAMMA * (2.0 - GAMMA))
        c1 = 1.0 / (GAMMA * (2.0 - GAMMA))
        const_bdf = c1 * y_g - c0 * y
        guess_bdf = y + (y_g - y) / GAMMA
        sol = self._solve_stage(t + dt, dt, guess_bdf, const_bdf, wts, y_g)
        if sol is None:
            return None
        y1, _ = sol
        f1 = self.eval_rhs(t + dt, y1)

        est = dt * (_E[0] * f0 + _E[1] * f_g + _E[2] * f1)
        est = scipy.linalg.lu_solve(self._factor(dt), est)
        scale = self.ctrl.abs_tol + self.ctrl.rel_tol * np.maximum(np.abs(y), np.abs(y1))
        err = float(np.sqrt(np.mean((est / scale) ** 2)))
        return y1, f1, err


def step_trbdf2(rhs, y, t, dt, controller: StepController | None = None,
                stats: SolverStats | None = None):
    """Single TR-BDF2 step; returns (y_next, scaled error estimate).

    Newton non-convergence (after one Jacobian refresh) raises
    IntegrationError as the step-rejection signal.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    controller = controller or StepController()
    stats = stats or SolverStats()
    stepper = _TrBdf2(rhs, controller, stats)
    y = np.asarray(y, dtype=float)
    f0 = stepper.eval_rhs(t, y)
    result = stepper.attempt(t, y, dt, f0)
    if result is None:
        stepper.build_jacobian(t, y, f0)
        result = stepper.attempt(t, y, dt, f0)
    if result is None:
        stats.newton_failures += 1
        raise IntegrationError("Newton iteration failed to converge", t, y)
    y1, _, err = result
    return y1, err


def integrate_fixed_step(rhs, y0, t0: float, t1: float, n_steps: int,
                         controller: StepController | None = None):
    """Fixed-step TR-BDF2 over [t0, t1]; used by the order-verification tests."""
    controller = controller or StepController()
    stats = SolverStats()
    stepper = _TrBdf2(rhs, controller, stats)
    y = np.asarray(y0, dtype=float).copy()
    dt = (t1 - t0) / n_steps
    for k in range(n_steps):
        t = t0 + k * dt
        f0 = stepper.eval_rhs(t, y)
        result = stepper.attempt(t, y, dt, f0)
        if result is None:
            stepper.build_jacobian(t, y, f0)
            result = stepper.attempt(t, y, dt, f0)
        if result is None:
            raise IntegrationError("Newton iteration failed to converge", t, y)
        y = result[0]
    return y


def _hermite(t, t0, y0, f0, t1, y1, f1):
    h = t1 - t0
    tau = (t - t0) / h
    t2 = tau * tau
    t3 = t2 * tau
    return ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + tau) * h * f0
            + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * f1)


@dataclass
class IntegrationResult:
    times: np.ndarray    # (S,) uniform sample stamps
    states: np.ndarray   # (S, dim)
    t_end: float
    y_end: np.ndarray
    stats: SolverStats


def integrate(rhs, y0, t_span, controller: StepController | None = None,
              sample_dt: float = 1e-2, callbacks=None, method: str = "trbdf2",
              stats: SolverStats | None = None) -> IntegrationResult:
    """Adaptive integration with uniform dense-output sampling.

    Samples are taken at t0 + k*sample_dt by cubic Hermite interpolation of
    accepted steps only. Callbacks fire at every sample time (including t0)
    and may update zero-order-hold inputs referenced by `rhs`; steps are
    therefore capped so they never cross a sample boundary when callbacks are
    present. Identical inputs produce bit-identical trajectories.
    """
    controller = controller or StepController()
    stats = stats if stats is not None else SolverStats()
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must be a nonempty forward interval")
    y = np.asarray(y0, dtype=float).copy()
    callbacks = list(callbacks or [])

    n_samples = int(round((t1 - t0) / sample_dt))
    if abs(t0 + n_samples * sample_dt - t1) > 1e-9 * max(1.0, abs(t1)):
        n_samples = int(math.floor((t1 - t0) / sample_dt + 1e-12))
    sample_times = t0 + sample_dt * np.arange(n_samples + 1)

    if method == "rk45":
        return _integrate_rk45(rhs, y, t0, t1, controller, sample_times, callbacks, stats)
    if method != "trbdf2":
        raise ValueError(f"unknown integrator {method!r}")

    stepper = _TrBdf2(rhs, controller, stats)
    samples = np.empty((n_samples + 1, len(y)))

    for cb in callbacks:
        cb(t0, y)
    samples[0] = y
    f0 = stepper.eval_rhs(t0, y)

    t = t0
    next_sample = 1
    # conservative start: violent initial transients reject large steps anyway
    dt = min(controller.dt_max, sample_dt / 50.0, t1 - t0)
    dt = max(dt, controller.dt_min)
    consecutive_rejects = 0

    while next_sample <= n_samples:
        t_boundary = sample_times[next_sample] if callbacks else t1
        dt = min(dt, controller.dt_max)
        # stretch steps that would approach a boundary so no sliver remains
        if t + 1.05 * dt >= t_boundary:
            dt_trial = t_boundary - t
            clipped = True
        else:
            dt_trial = dt
            clipped = False
        if dt_trial < controller.dt_min:
            raise IntegrationError(
                f"step size underflow ({dt_trial:.3e} < dt_min)", t, y)

        iters_before = stats.newton_iters
        result = stepper.attempt(t, y, dt_trial, f0)
        if result is None:
            stepper.build_jacobian(t, y, f0)
            result = stepper.attempt(t, y, dt_trial, f0)
        if result is None:
            stats.newton_failures += 1
            stats.steps_rejected += 1
            dt = dt_trial * 0.25
            consecutive_rejects += 1
            if consecutive_rejects > 20:
                raise IntegrationError("persistent Newton failures", t, y)
            continue

        y_new, f_new, err = result
        if err > 1.0:
            stats.steps_rejected += 1
            consecutive_rejects += 1
            if consecutive_rejects > 30:
                raise IntegrationError("persistent error-test failures", t, y)
            dt = dt_trial * max(0.2, min(0.9, controller.safety * err ** (-1.0 / 3.0)))
            continue

        # accepted: emit samples inside (t, t + dt_trial]
        consecutive_rejects = 0
        stats.steps_accepted += 1
        t_new = t + dt_trial
        fired = False
        while next_sample <= n_samples and \
                sample_times[next_sample] <= t_new + 1e-13 * max(1.0, abs(t_new)):
            ts = sample_times[next_sample]
            if abs(ts - t_new) <= 1e-13 * max(1.0, abs(t_new)):
                samples[next_sample] = y_new
            else:
                samples[next_sample] = _hermite(ts, t, y, f0, t_new, y_new, f_new)
            next_sample += 1
            for cb in callbacks:
                cb(ts, samples[next_sample - 1])
                fired = True
        t, y, f0 = t_new, y_new, f_new
        if fired and next_sample <= n_samples:
            # held inputs may have changed; the stored derivative is stale
            f0 = stepper.eval_rhs(t, y)
        # a laboring Newton (well above the usual 2-3 per stage) means the
        # reused Jacobian has gone stale
        if stats.newton_iters - iters_before > 8:
            stepper.build_jacobian(t, y, f0)
        growth = controller.safety * err ** (-1.0 / 3.0) if err > 0 else 5.0
        dt_candidate = dt_trial * max(0.2, min(5.0, growth))
        # clipped steps must not erase the adaptive proposal
        dt = max(dt, dt_candidate) if clipped else dt_candidate

    return IntegrationResult(times=sample_times, states=samples, t_end=t,
                             y_end=y, stats=stats)


def _integrate_rk45(rhs, y, t0, t1, controller, sample_times, callbacks, stats):
    """Cross-check path: scipy's explicit adaptive RK45, same sampling contract."""
    from scipy.integrate import solve_ivp

    def counted(t, yy):
        stats.rhs_evals += 1
        return rhs(t, yy)

    samples = np.empty((len(sample_times), len(y)))
    for cb in callbacks:
        cb(sample_times[0], y)
    samples[0] = y
    if callbacks:
        for k in range(1, len(sample_times)):
            sol = solve_ivp(counted, (sample_times[k - 1], sample_times[k]), y,
                            method="RK45", rtol=controller.rel_tol,
                            atol=controller.abs_tol, dense_output=False)
            if not sol.success:
                raise IntegrationError(f"RK45 failed: {sol.message}",
                                       sample_times[k - 1], y)
            y = sol.y[:, -1]
            samples[k] = y
            for cb in callbacks:
                cb(sample_times[k], y)
            stats.steps_accepted += sol.t.size - 1
    else:
        sol = solve_ivp(counted, (t0, t1), y, method="RK45",
                        rtol=controller.rel_tol, atol=controller.abs_tol,
                        t_eval=sample_times)
        if not sol.success:
            raise IntegrationError(f"RK45 failed: {sol.message}", t0, y)
        samples = sol.y.T
        y = sol.y[:, -1]
        stats.steps_accepted += sol.t.size - 1
    return IntegrationResult(times=np.asarray(sample_times), states=samples,
                             t_end=float(sample_times[-1]), y_end=y, stats=stats)
