from .base import EnvSpec
from .lqr import LqrParams, make_lqr, LqrEnv, zero_policy_limits
from .mimo import (MimoParams, MimoEnv, MimoGeometry, rzf_precoder,
                   user_rates, user_rate, equal_power_action, array_response,
                   draw_channel, draw_geometry, simulate_equal_power)
from .tabular import TabularMdp, make_tabular, TabularEnv

__all__ = [
    "EnvSpec",
    "LqrParams", "make_lqr", "LqrEnv", "zero_policy_limits",
    "MimoParams", "MimoEnv", "MimoGeometry", "rzf_precoder", "user_rates",
    "user_rate", "equal_power_action", "array_response", "draw_channel",
    "draw_geometry", "simulate_equal_power",
    "TabularMdp", "make_tabular", "TabularEnv",
]
