import numpy as np
import pytest

from fishsim.config import build_model, config_from_dict


def small_config(**overrides):
    """Compact model (N=3) so unit tests stay fast; physics unchanged."""
    base = {"numerics": {"ritz_modes": 3, "quadrature_nodes": 20}}
    for key, val in overrides.items():
        if key in base and isinstance(val, dict):
            base[key].update(val)
        else:
            base[key] = val
    return config_from_dict(base)


def fluid_off(**overrides):
    base = {
        "fluid": {"density": 0.0, "body_drag_coefficient": 0.0},
        "head": {"drag_diagonal": [0.0, 0.0, 0.0]},
    }
    base.update({k: v for k, v in overrides.items() if k not in base})
    for key in ("fluid", "head"):
        if key in overrides:
            base[key].update(overrides[key])
    return base


@pytest.fixture(scope="session")
def model_small():
    return build_model(small_config())


@pytest.fixture(scope="session")
def model_conservative():
    return build_model(small_config(**fluid_off()))


def random_state(model, rng, scale_q=0.3, scale_qd=0.6):
    from fishsim.kinematics import GeneralizedState
    n_q = model.n_q
    return GeneralizedState(rng.normal(0.0, scale_q, n_q),
                            rng.normal(0.0, scale_qd, n_q))
