"""Model configuration: loading, validation, and derived quantities.

Configs are TOML (nested key/value sections) or JSON files with identical
structure; every physical field is dimensional SI (see README for the full
schema with units). Geometry and material properties vary along the body as
polynomials in the arc length s, which keeps every spatial derivative
analytic. All values are immutable after construction, so a single model can
be shared by concurrently running simulations.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .quadrature import QuadratureGrid, RitzBasis, FieldTables, gauss_legendre, build_basis, build_tables
from .hydrodynamics import ellipsoid_added_mass


class ConfigError(ValueError):
    """Raised when a config file is malformed or violates an invariant."""


@dataclass(frozen=True)
class PolyProfile:
    """Polynomial in arc length s on [0, length]: c[0] + c[1] s + c[2] s^2 + ..."""

    coefficients: tuple
    length: float

    def __call__(self, s):
        self._check_domain(s)
        return self.eval_unchecked(s)

    def eval_unchecked(self, s):
        result = 0.0
        for c in reversed(self.coefficients):
            result = result * s + c
        return result

    def _check_domain(self, s):
        s_arr = np.asarray(s)
        if np.any(s_arr < -1e-12) or np.any(s_arr > self.length + 1e-12):
            raise ConfigError(
                f"profile evaluated at s={s} outside [0, {self.length}]")

    def derivative(self) -> "PolyProfile":
        coeffs = tuple(k * c for k, c in enumerate(self.coefficients))[1:] or (0.0,)
        return PolyProfile(coefficients=coeffs, length=self.length)

    def min_on_domain(self, samples: int = 512) -> float:
        s = np.linspace(0.0, self.length, samples)
        return float(np.min(self.eval_unchecked(s)))


def eval_profile(profile: PolyProfile, s):
    """Horner evaluation of a property profile at arc length s (m)."""
    return profile(s)


@dataclass(frozen=True)
class HeadProperties:
    mass: float                 # kg
    inertia: float              # kg m^2, planar moment about the COM
    joint_offset: float         # m, COM-to-joint distance
    semi_axes: tuple            # (a, b, c) m, ellipsoid approximation
    drag_matrix: tuple          # 3x3, body frame, rows as tuples


@dataclass(frozen=True)
class FluidProperties:
    density: float              # kg/m^3
    body_drag_coefficient: float  # N s/m^2 per unit length


@dataclass(frozen=True)
class NumericsConfig:
    ritz_modes: int             # N
    quadrature_nodes: int       # K
    integrator: str             # "trbdf2" or "rk45"
    abs_tol: float
    rel_tol: float
    dt_min: float               # s
    dt_max: float               # s
    sample_dt: float            # s
    gravity: float              # m/s^2, used only for cost of transport

    @property
    def state_dim(self) -> int:
        return self.ritz_modes + 3


@dataclass(frozen=True)
class GaitConfig:
    amplitude: float            # rad
    frequency: float            # Hz
    kp: float                   # N m / rad
    kd: float                   # N m s / rad
    torque_limit: float         # N m
    start_ramp_cycles: float    # gait cycles over which the amplitude fades in


@dataclass(frozen=True)
class SpeedControlConfig:
    filter_time_constant: float  # s
    kp: float                    # Hz s / m
    ki: float                    # Hz / m
    frequency_min: float         # Hz
    frequency_max: float         # Hz


@dataclass(frozen=True)
class InitialStateConfig:
    position: tuple             # (X, Y) m
    heading: float              # rad
    joint_angles: tuple         # Ritz coefficients, length N (zero-padded)
    velocities: tuple           # length N+3 (zero-padded)


@dataclass(frozen=True)
class ModelConfig:
    body_length: float          # m
    width_profile: PolyProfile  # m, in-plane (bending direction) axis
    height_profile: PolyProfile  # m, out-of-plane axis (sets added mass)
    density_profile: PolyProfile  # kg/m
    youngs_modulus_profile: PolyProfile  # Pa
    head: HeadProperties
    fluid: FluidProperties
    numerics: NumericsConfig
    gait: GaitConfig
    speed_control: SpeedControlConfig
    initial_state: InitialStateConfig


@dataclass(frozen=True)
class DerivedModel:
    """Quantities derived from the config once, at model build time."""

    i_profile: PolyProfile       # second moment of area (m^4)
    rho_a_profile: PolyProfile   # added mass per unit length (kg/m)
    drho_a_profile: PolyProfile  # d(rho_a)/ds
    m_total: float               # kg, head + body by quadrature
    added_mass_head: np.ndarray  # 3x3, body frame


@dataclass(frozen=True)
class Model:
    """Immutable bundle of config, derived profiles, grid, and basis tables."""

    config: ModelConfig
    derived: DerivedModel
    grid: QuadratureGrid
    basis: RitzBasis
    tables: FieldTables
    # profile values cached on the outer grid
    rho_nodes: np.ndarray
    ei_nodes: np.ndarray
    rho_a_nodes: np.ndarray
    drho_a_nodes: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.config.numerics.ritz_modes

    @property
    def n_q(self) -> int:
        return self.config.numerics.ritz_modes + 3

    @property
    def drag_matrix_head(self) -> np.ndarray:
        return np.asarray(self.config.head.drag_matrix, dtype=float)


# ---------------------------------------------------------------------------
# defaults and parsing

_DEFAULTS = {
    "geometry": {
        "body_length": 0.3,
        "width_profile": [0.05],
        "height_profile": [0.05],
    },
    "material": {
        # uniform density of a neutrally buoyant elliptical section:
        # rho_water * pi * w * h / 4 with w = h = 0.05
        "density_profile": [1000.0 * math.pi * 0.05 * 0.05 / 4.0],
        "youngs_modulus_profile": [0.35e6, 0.0, 0.0, -0.7e6],
    },
    "head": {
        "mass": 0.2,
        "inertia": 1.25e-4,
        "joint_offset": 0.05,
        "semi_axes": [0.05, 0.025, 0.025],
        "drag_diagonal": [0.25, 0.5, 0.25],
        "drag_matrix": None,
    },
    "fluid": {
        "density": 1000.0,
        "body_drag_coefficient": 5.0,
    },
    "numerics": {
        "ritz_modes": 5,
        "quadrature_nodes": None,   # default rule: 2 N + 14
        "integrator": "trbdf2",
        "abs_tol": 1e-7,
        "rel_tol": 1e-5,
        "dt_min": 1e-10,
        "dt_max": 0.01,
        "sample_dt": 0.01,
        "gravity": 9.81,
    },
    "gait": {
        "amplitude": 0.4,
        "frequency": 2.0,
        "kp": 3.0,
        "kd": 0.05,
        "torque_limit": 2.0,
        "start_ramp_cycles": 0.5,
    },
    "speed_control": {
        "filter_time_constant": 1.0 / (2.0 * math.pi * 0.25),
        "kp": 10.0,
        "ki": 4.0,
        "frequency_min": 0.3,
        "frequency_max": 4.0,
    },
    "initial_state": {
        "position": [0.0, 0.0],
        "heading": math.pi,
        "joint_angles": [],
        "velocities": [],
    },
}


def _merge(defaults: dict, overrides: dict, path: str = "") -> dict:
    out = {}
    for key, dval in defaults.items():
        if key in overrides:
            oval = overrides[key]
            if isinstance(dval, dict):
                if not isinstance(oval, dict):
                    raise ConfigError(f"section '{path}{key}' must be a table/object")
                out[key] = _merge(dval, oval, path=f"{path}{key}.")
            else:
                out[key] = oval
        else:
            out[key] = dval if not isinstance(dval, dict) else _merge(dval, {}, path=f"{path}{key}.")
    for key in overrides:
        if key not in defaults:
            raise ConfigError(f"unknown config field '{path}{key}'")
    return out


def _require_positive(value, name):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def _require_nonnegative(value, name):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
        raise ConfigError(f"{name} must be a nonnegative finite number, got {value!r}")
    return float(value)


def _as_profile(raw, length, name, require_positive) -> PolyProfile:
    try:
        coeffs = tuple(float(c) for c in raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list of polynomial coefficients") from exc
    if not coeffs:
        raise ConfigError(f"{name} must have at least one coefficient")
    prof = PolyProfile(coefficients=coeffs, length=length)
    if require_positive and prof.min_on_domain() <= 0:
        raise ConfigError(f"{name} must stay strictly positive on [0, {length}]")
    return prof


def _as_matrix3(raw, name) -> tuple:
    arr = np.asarray(raw, dtype=float)
    if arr.shape != (3, 3):
        raise ConfigError(f"{name} must be a 3x3 matrix, got shape {arr.shape}")
    if not np.allclose(arr, arr.T, atol=1e-12):
        raise ConfigError(f"{name} must be symmetric")
    eigs = np.linalg.eigvalsh(arr)
    if np.min(eigs) < -1e-10:
        raise ConfigError(f"{name} must be positive semidefinite (eigs {eigs})")
    return tuple(tuple(float(v) for v in row) for row in arr)


def config_from_dict(raw: dict) -> ModelConfig:
    """Validate a raw nested dict (already parsed TOML/JSON) into a ModelConfig."""
    data = _merge(_DEFAULTS, raw)

    geom = data["geometry"]
    length = _require_positive(geom["body_length"], "geometry.body_length")
    width = _as_profile(geom["width_profile"], length, "geometry.width_profile", True)
    height = _as_profile(geom["height_profile"], length, "geometry.height_profile", True)

    mat = data["material"]
    density = _as_profile(mat["density_profile"], length, "material.density_profile", True)
    modulus = _as_profile(mat["youngs_modulus_profile"], length,
                          "material.youngs_modulus_profile", True)

    hd = data["head"]
    mass = _require_positive(hd["mass"], "head.mass")
    inertia = _require_positive(hd["inertia"], "head.inertia")
    joint_offset = _require_nonnegative(hd["joint_offset"], "head.joint_offset")
    semi_axes = tuple(float(v) for v in hd["semi_axes"])
    if len(semi_axes) != 3 or min(semi_axes) <= 0:
        raise ConfigError(f"head.semi_axes must be three positive lengths, got {hd['semi_axes']}")
    if hd.get("drag_matrix") is not None:
        drag = _as_matrix3(hd["drag_matrix"], "head.drag_matrix")
    else:
        diag = [float(v) for v in hd["drag_diagonal"]]
        if len(diag) != 3 or min(diag) < 0:
            raise ConfigError("head.drag_diagonal must be three nonnegative entries")
        drag = tuple(tuple(diag[i] if i == j else 0.0 for j in range(3)) for i in range(3))
    head = HeadProperties(mass=mass, inertia=inertia, joint_offset=joint_offset,
                          semi_axes=semi_axes, drag_matrix=drag)

    fl = data["fluid"]
    fluid = FluidProperties(
        density=_require_nonnegative(fl["density"], "fluid.density"),
        body_drag_coefficient=_require_nonnegative(
            fl["body_drag_coefficient"], "fluid.body_drag_coefficient"),
    )

    num = data["numerics"]
    n = num["ritz_modes"]
    if not (isinstance(n, int) and n >= 1):
        raise ConfigError(f"numerics.ritz_modes must be an integer >= 1, got {n!r}")
    k = num["quadrature_nodes"]
    if k is None:
        k = 2 * n + 14
    if not (isinstance(k, int) and k >= 2 * n):
        raise ConfigError(
            f"numerics.quadrature_nodes must be an integer >= 2*ritz_modes={2*n}, got {k!r}")
    integrator = str(num["integrator"]).lower()
    if integrator not in ("trbdf2", "rk45"):
        raise ConfigError(f"numerics.integrator must be 'trbdf2' or 'rk45', got {integrator!r}")
    numerics = NumericsConfig(
        ritz_modes=n,
        quadrature_nodes=k,
        integrator=integrator,
        abs_tol=_require_positive(num["abs_tol"], "numerics.abs_tol"),
        rel_tol=_require_positive(num["rel_tol"], "numerics.rel_tol"),
        dt_min=_require_positive(num["dt_min"], "numerics.dt_min"),
        dt_max=_require_positive(num["dt_max"], "numerics.dt_max"),
        sample_dt=_require_positive(num["sample_dt"], "numerics.sample_dt"),
        gravity=_require_positive(num["gravity"], "numerics.gravity"),
    )
    if numerics.dt_min > numerics.dt_max:
        raise ConfigError("numerics.dt_min must not exceed numerics.dt_max")

    gt = data["gait"]
    gait = GaitConfig(
        amplitude=_require_nonnegative(gt["amplitude"], "gait.amplitude"),
        frequency=_require_positive(gt["frequency"], "gait.frequency"),
        kp=_require_nonnegative(gt["kp"], "gait.kp"),
        kd=_require_nonnegative(gt["kd"], "gait.kd"),
        torque_limit=_require_positive(gt["torque_limit"], "gait.torque_limit"),
        start_ramp_cycles=_require_nonnegative(
            gt["start_ramp_cycles"], "gait.start_ramp_cycles"),
    )

    sc = data["speed_control"]
    fmin = _require_positive(sc["frequency_min"], "speed_control.frequency_min")
    fmax = _require_positive(sc["frequency_max"], "speed_control.frequency_max")
    if not fmin < fmax:
        raise ConfigError("speed_control.frequency_min must be below frequency_max")
    speed_control = SpeedControlConfig(
        filter_time_constant=_require_positive(
            sc["filter_time_constant"], "speed_control.filter_time_constant"),
        kp=_require_nonnegative(sc["kp"], "speed_control.kp"),
        ki=_require_nonnegative(sc["ki"], "speed_control.ki"),
        frequency_min=fmin,
        frequency_max=fmax,
    )

    ini = data["initial_state"]
    position = tuple(float(v) for v in ini["position"])
    if len(position) != 2:
        raise ConfigError("initial_state.position must be [X, Y]")
    joint_angles = tuple(float(v) for v in ini["joint_angles"])
    if len(joint_angles) > n:
        raise ConfigError(
            f"initial_state.joint_angles has {len(joint_angles)} entries but ritz_modes={n}")
    velocities = tuple(float(v) for v in ini["velocities"])
    if len(velocities) > n + 3:
        raise ConfigError(
            f"initial_state.velocities has {len(velocities)} entries but state dim is {n + 3}")
    initial_state = InitialStateConfig(
        position=position,
        heading=float(ini["heading"]),
        joint_angles=joint_angles,
        velocities=velocities,
    )

    return ModelConfig(
        body_length=length,
        width_profile=width,
        height_profile=height,
        density_profile=density,
        youngs_modulus_profile=modulus,
        head=head,
        fluid=fluid,
        numerics=numerics,
        gait=gait,
        speed_control=speed_control,
        initial_state=initial_state,
    )


def load_config(path) -> ModelConfig:
    """Load and validate a TOML or JSON config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    else:
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config {path} is not valid TOML: {exc}") from exc
    return config_from_dict(raw)


def config_to_dict(cfg: ModelConfig) -> dict:
    """Canonical nested-dict form; parses back to an equal config."""
    return {
        "geometry": {
            "body_length": cfg.body_length,
            "width_profile": list(cfg.width_profile.coefficients),
            "height_profile": list(cfg.height_profile.coefficients),
        },
        "material": {
            "density_profile": list(cfg.density_profile.coefficients),
            "youngs_modulus_profile": list(cfg.youngs_modulus_profile.coefficients),
        },
        "head": {
            "mass": cfg.head.mass,
            "inertia": cfg.head.inertia,
            "joint_offset": cfg.head.joint_offset,
            "semi_axes": list(cfg.head.semi_axes),
            "drag_matrix": [list(row) for row in cfg.head.drag_matrix],
        },
        "fluid": {
            "density": cfg.fluid.density,
            "body_drag_coefficient": cfg.fluid.body_drag_coefficient,
        },
        "numerics": {
            "ritz_modes": cfg.numerics.ritz_modes,
            "quadrature_nodes": cfg.numerics.quadrature_nodes,
            "integrator": cfg.numerics.integrator,
            "abs_tol": cfg.numerics.abs_tol,
            "rel_tol": cfg.numerics.rel_tol,
            "dt_min": cfg.numerics.dt_min,
            "dt_max": cfg.numerics.dt_max,
            "sample_dt": cfg.numerics.sample_dt,
            "gravity": cfg.numerics.gravity,
        },
        "gait": {
            "amplitude": cfg.gait.amplitude,
            "frequency": cfg.gait.frequency,
            "kp": cfg.gait.kp,
            "kd": cfg.gait.kd,
            "torque_limit": cfg.gait.torque_limit,
            "start_ramp_cycles": cfg.gait.start_ramp_cycles,
        },
        "speed_control": {
            "filter_time_constant": cfg.speed_control.filter_time_constant,
            "kp": cfg.speed_control.kp,
            "ki": cfg.speed_control.ki,
            "frequency_min": cfg.speed_control.frequency_min,
            "frequency_max": cfg.speed_control.frequency_max,
        },
        "initial_state": {
            "position": list(cfg.initial_state.position),
            "heading": cfg.initial_state.heading,
            "joint_angles": list(cfg.initial_state.joint_angles),
            "velocities": list(cfg.initial_state.velocities),
        },
    }


def serialize_config(cfg: ModelConfig) -> str:
    """JSON text round-trippable through load/parse to an equal config."""
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True)


def config_hash(cfg: ModelConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# derivation

def _poly_mul(a: tuple, b: tuple) -> tuple:
    out = [0.0] * (len(a) + len(b) - 1)
    for i, ca in enumerate(a):
        for j, cb in enumerate(b):
            out[i + j] += ca * cb
    return tuple(out)


def _poly_scale(a: tuple, k: float) -> tuple:
    return tuple(k * c for c in a)


def derive_model(cfg: ModelConfig) -> DerivedModel:
    """Section inertia, added-mass, and total-mass profiles from the config.

    The cross-section is an ellipse with in-plane axis w and out-of-plane
    axis h: bending inertia I = pi h w^3 / 64, added mass per unit length
    rho_a = pi rho_water h^2 / 4.
    """
    w = cfg.width_profile.coefficients
    h = cfg.height_profile.coefficients
    length = cfg.body_length
    i_coeffs = _poly_scale(_poly_mul(h, _poly_mul(w, _poly_mul(w, w))), math.pi / 64.0)
    rho_a_coeffs = _poly_scale(_poly_mul(h, h), 0.25 * math.pi * cfg.fluid.density)
    i_profile = PolyProfile(i_coeffs, length)
    rho_a_profile = PolyProfile(rho_a_coeffs, length)

    grid = gauss_legendre(cfg.numerics.quadrature_nodes, 0.0, length)
    body_mass = grid.integrate(cfg.density_profile(grid.nodes))
    m_total = cfg.head.mass + body_mass

    added = ellipsoid_added_mass(cfg.head.semi_axes, cfg.fluid.density)
    return DerivedModel(
        i_profile=i_profile,
        rho_a_profile=rho_a_profile,
        drho_a_profile=rho_a_profile.derivative(),
        m_total=m_total,
        added_mass_head=added,
    )


def build_model(cfg: ModelConfig) -> Model:
    """Assemble the immutable model bundle used by the dynamics code."""
    derived = derive_model(cfg)
    grid = gauss_legendre(cfg.numerics.quadrature_nodes, 0.0, cfg.body_length)
    basis = build_basis(cfg.numerics.ritz_modes, cfg.density_profile, grid)
    tables = build_tables(grid, basis)
    s = grid.nodes
    return Model(
        config=cfg,
        derived=derived,
        grid=grid,
        basis=basis,
        tables=tables,
        rho_nodes=np.asarray(cfg.density_profile(s), dtype=float),
        ei_nodes=np.asarray(cfg.youngs_modulus_profile(s), dtype=float)
        * np.asarray(derived.i_profile(s), dtype=float),
        rho_a_nodes=np.asarray(derived.rho_a_profile(s), dtype=float),
        drho_a_nodes=np.asarray(derived.drho_a_profile(s), dtype=float),
    )


def default_config(**overrides) -> ModelConfig:
    """The documented default parameter set (implementer-chosen, not measured)."""
    return config_from_dict(overrides)
