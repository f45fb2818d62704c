"""Behavioral-equation IR, compute-method contracts, and computation trees.

An equation ``p := f{i_1..i_n}.q`` names a state, the compute method applied
per superstep, the ordered states it reads, and the successor state.  The
reference set is kept ordered so float aggregation is reproducible; the
contract treats it as a multiset.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Iterable, Literal

from .errors import ContractError, DanglingReferenceError, PlacementError

PartitionId = int


@dataclass(frozen=True, slots=True)
class StateRef:
    """Reference to an agent's state, optionally pinned to a superstep."""

    agent_id: int
    generation: int | None = None

    def __repr__(self) -> str:
        if self.generation is None:
            return f"s{self.agent_id}"
        return f"s{self.agent_id}g{self.generation}"


@dataclass(frozen=True)
class BehavioralEquation:
    lhs: StateRef
    compute: str
    reference_set: tuple[StateRef, ...]
    rhs: StateRef

    def __post_init__(self):
        if len(set(self.reference_set)) != len(self.reference_set):
            raise ValueError(f"duplicate references in {self.reference_set}")

    @property
    def recursive(self) -> bool:
        return self.lhs == self.rhs

    def __repr__(self) -> str:
        refs = ",".join(map(repr, self.reference_set))
        return f"{self.lhs!r}:={self.compute}{{{refs}}}.{self.rhs!r}"


# Compute-method contracts ---------------------------------------------------

TypeTag = str  # "bool" | "int64" | "float64" | "record:<name>"

_TAG_CHECKS: dict[str, Callable[[object], bool]] = {
    "bool": lambda v: isinstance(v, bool),
    "int64": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "float64": lambda v: isinstance(v, float),
}


def check_tag(tag: TypeTag, value) -> bool:
    checker = _TAG_CHECKS.get(tag)
    if checker is not None:
        return checker(value)
    if tag.startswith("record:"):
        return value.__class__.__name__ == tag.split(":", 1)[1]
    return True


def identity(message):
    """Default deserialize when in/out message types coincide."""
    return message


@dataclass(frozen=True)
class ComputeMethodContract:
    """Combinator bundle defining one compute method.

    ``state_to_message`` may return None to suppress the send entirely.
    ``partial_compute`` folds a multiset of in-messages (None for empty);
    when ``associative`` and ``commutative`` are both set, any regrouping of
    the fold must agree, which aggregation pushdown relies on.
    """

    name: str
    value_type: TypeTag
    in_message_type: TypeTag
    out_message_type: TypeTag
    state_to_message: Callable[[object], object]
    partial_compute: Callable[[list], object | None]
    update_state: Callable[[object, object | None], object]
    deserialize: Callable[[object], object] = identity
    associative: bool = False
    commutative: bool = False
    sample_message: Callable[[random.Random], object] | None = None

    @property
    def pushdown_eligible(self) -> bool:
        return self.associative and self.commutative


def default_run(contract: ComputeMethodContract, state, messages: Iterable) -> object:
    """updateState(state, partialCompute(messages)) with type-tag checks."""
    messages = list(messages)
    for m in messages:
        if not check_tag(contract.in_message_type, m):
            raise ContractError(
                f"{contract.name}: message {m!r} does not match "
                f"in-message type {contract.in_message_type}"
            )
    folded = contract.partial_compute(messages) if messages else contract.partial_compute([])
    return contract.update_state(state, folded)


def validate_contract(contract: ComputeMethodContract, cases: int = 200, seed: int = 0) -> None:
    """Property-test declared algebraic flags against random regroupings.

    Float folds regroup within 1e-9 relative (the tolerance the optimizer
    grants pushdown on float states); everything else must match exactly.
    """
    if not contract.pushdown_eligible or contract.sample_message is None:
        return
    floats = contract.in_message_type == "float64"
    rng = random.Random(seed)
    for _ in range(cases):
        size = rng.randint(2, 9)
        msgs = [contract.sample_message(rng) for _ in range(size)]
        whole = contract.partial_compute(list(msgs))
        cut = rng.randint(1, size - 1)
        shuffled = list(msgs)
        rng.shuffle(shuffled)
        left = contract.partial_compute(shuffled[:cut])
        right = contract.partial_compute(shuffled[cut:])
        regrouped = contract.partial_compute([m for m in (left, right) if m is not None])
        if floats:
            agree = math.isclose(regrouped, whole, rel_tol=1e-9, abs_tol=1e-12)
        else:
            agree = regrouped == whole
        if not agree:
            raise ContractError(
                f"{contract.name}: declared associative+commutative but "
                f"fold({msgs}) = {whole} != {regrouped} after regrouping"
            )


# Computation trees ----------------------------------------------------------

Accessor = Literal["local", "remote"]


@dataclass(frozen=True)
class CacheOffset:
    cache: tuple[PartitionId, PartitionId]  # (source, dest)
    offset: int


@dataclass(frozen=True)
class TreeLeaf:
    source: object  # StateRef | CacheOffset | DynamicStateRef
    accessor: Accessor
    partition: PartitionId | None = None


@dataclass(frozen=True)
class ComputationTree:
    """One equation visualized as a root apply node over unordered leaves."""

    result: StateRef
    op: str
    leaves: tuple[TreeLeaf, ...]
    partition: PartitionId | None = None

    @property
    def node_count(self) -> int:
        return 1 + len(self.leaves)


def to_computation_tree(
    eq: BehavioralEquation, placement: dict[StateRef, PartitionId] | None = None
) -> ComputationTree:
    """Build the tree for one equation; leaves are Remote iff placed on a
    different partition than the lhs."""
    if placement is None:
        placement = {}
        home = None
    else:
        if eq.lhs not in placement:
            raise PlacementError(f"no placement for {eq.lhs!r}")
        home = placement[eq.lhs]
    leaves = [TreeLeaf(eq.lhs, "local", home)]
    for ref in eq.reference_set:
        if home is None:
            leaves.append(TreeLeaf(ref, "local", None))
            continue
        if ref not in placement:
            raise PlacementError(f"no placement for {ref!r}")
        where = placement[ref]
        accessor = "local" if where == home else "remote"
        leaves.append(TreeLeaf(ref, accessor, where))
    return ComputationTree(result=eq.rhs, op=eq.compute, leaves=tuple(leaves), partition=home)


def check_references(
    equations: dict[int, BehavioralEquation], agent_ids: Iterable[int]
) -> None:
    known = set(agent_ids)
    for agent, eq in equations.items():
        for ref in eq.reference_set:
            if ref.agent_id not in known:
                raise DanglingReferenceError(
                    f"agent {agent} references missing agent {ref.agent_id}"
                )
