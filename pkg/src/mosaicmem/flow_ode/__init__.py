from .integrate import (
    DEFAULT_STEPS,
    FlowState,
    VectorField,
    gaussian_init,
    integrate,
    integrate_path,
    zero_field,
    constant_field,
    linear_field,
    convergence_order,
)

__all__ = [
    "DEFAULT_STEPS",
    "FlowState",
    "VectorField",
    "gaussian_init",
    "integrate",
    "integrate_path",
    "zero_field",
    "constant_field",
    "linear_field",
    "convergence_order",
]
