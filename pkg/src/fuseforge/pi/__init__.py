"""Pi-calculus semantic oracle: process terms, congruence, reduction."""

from .congruence import canonical_key, normalize, split_top
from .process import (
    NIL,
    Choice,
    FunctionApply,
    InputPrefix,
    Name,
    Nil,
    OutputPrefix,
    Parallel,
    PiProcess,
    ProcessId,
    Replication,
    Restriction,
    bang,
    choice,
    free_names,
    fresh,
    inp,
    lit,
    name,
    nu,
    out,
    par,
    substitute,
)
from .reduce import (
    ReduceAllResult,
    ReductionState,
    final_values,
    initial_state,
    reduce_all,
    reduce_step,
)
from .translate import (
    FUNCTION_ENCODING_EXTRA_STEPS,
    default_state_name,
    initializer,
    naive_recursive_composition,
    recursive_process_ident,
    state_channel,
    translate_nonrecursive,
    translate_recursive,
    translation_body,
)

__all__ = [
    "NIL",
    "Choice",
    "FunctionApply",
    "InputPrefix",
    "Name",
    "Nil",
    "OutputPrefix",
    "Parallel",
    "PiProcess",
    "ProcessId",
    "Replication",
    "Restriction",
    "ReduceAllResult",
    "ReductionState",
    "bang",
    "canonical_key",
    "choice",
    "default_state_name",
    "final_values",
    "free_names",
    "fresh",
    "initial_state",
    "initializer",
    "inp",
    "lit",
    "name",
    "naive_recursive_composition",
    "normalize",
    "nu",
    "out",
    "par",
    "recursive_process_ident",
    "reduce_all",
    "reduce_step",
    "split_top",
    "state_channel",
    "substitute",
    "translate_nonrecursive",
    "translate_recursive",
    "translation_body",
    "FUNCTION_ENCODING_EXTRA_STEPS",
]
