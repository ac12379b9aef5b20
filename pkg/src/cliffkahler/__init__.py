"""Executable Lagrangian mechanics on the flat Clifford-Kähler model space R^{8n}."""
from .calculus import (
    OneForm,
    TwoFormField,
    energy,
    energy_differential,
    kaehler_form,
    liouville_field,
    vertical_derivation,
    vertical_differential,
)
from .dynamics import (
    ELSystem,
    SemisprayField,
    derive_el_system,
    dynamics_residual,
    el_residual,
    solve_semispray,
)
from .errors import DegenerateLagrangian, EvaluationError, NonFiniteState, ParseError
from .expr import Lagrangian, builtin_lagrangian, differentiate, evaluate, parse, to_text
from .integrate import Trajectory, energy_drift, integrate, read_csv
from .structures import (
    SignedBlockPermutation,
    apply,
    builtin_structure,
    check_metric_compatibility,
    compose,
    composition_table,
    fundamental_two_form,
)

__version__ = "0.1.0"
