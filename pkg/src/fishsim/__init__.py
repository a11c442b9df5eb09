"""Planar dynamics of a motor-actuated robotic fish.

The fish is a rigid head joined to a continuously elastic body. The body is
an inextensible elastica whose tangential angle is expanded in a Ritz series
of density-normalized monomials; all spatial integrals are evaluated with
Gauss-Legendre quadrature and all configuration derivatives with forward-mode
automatic differentiation. The resulting equations of motion M qdd = F are
integrated with an adaptive TR-BDF2 scheme, and open/closed-loop gaits are
driven by a PD joint servo plus an EMA-filtered PI speed loop.
"""

from .config import (
    FluidProperties,
    HeadProperties,
    Model,
    ModelConfig,
    NumericsConfig,
    PolyProfile,
    ConfigError,
    load_config,
    serialize_config,
    build_model,
)
from .kinematics import GeneralizedState
from .assembly import EquationsOfMotion, assemble, accelerations, power_balance

def __getattr__(name):  # harness pulls in matplotlib; import it lazily
    if name in ("Metrics", "Trajectory", "run_simulation", "metrics", "sweep",
                "convergence_study", "track"):
        from . import harness
        return getattr(harness, name)
    raise AttributeError(f"module 'fishsim' has no attribute {name!r}")

__all__ = [
    "PolyProfile",
    "HeadProperties",
    "FluidProperties",
    "NumericsConfig",
    "ModelConfig",
    "Model",
    "ConfigError",
    "load_config",
    "serialize_config",
    "build_model",
    "GeneralizedState",
    "EquationsOfMotion",
    "assemble",
    "accelerations",
    "power_balance",
    "Trajectory",
    "Metrics",
    "run_simulation",
    "metrics",
    "sweep",
    "convergence_study",
    "track",
]
