"""Structural congruence: axiom soundness, idempotence, canonical ordering."""

from __future__ import annotations

import random
from collections import Counter

import pytest

from fuseforge.pi import (
    NIL,
    Choice,
    Parallel,
    Replication,
    Restriction,
    canonical_key,
    initial_state,
    inp,
    lit,
    name,
    normalize,
    nu,
    out,
    reduce_step,
    substitute,
)
from procgen import NAME_POOL, gen_prefix, gen_process

a, b, c, x, y = (name(t) for t in "abcxy")


def test_par_identity_drops_nil():
    p = out(x, lit(5))
    assert normalize(Parallel(p, NIL)) == normalize(p)


def test_res_ann_restriction_over_nil_is_nil():
    assert normalize(Restriction(a, NIL)) == NIL


def test_par_comm_same_canonical_form():
    p = out(x, lit(5))
    q = inp(y, a)
    assert normalize(Parallel(p, q)) == normalize(Parallel(q, p))


def test_normalize_idempotent_on_examples():
    p = Restriction(a, Parallel(out(a, lit(1)), inp(a, b, out(x, b))))
    n1 = normalize(p)
    assert normalize(n1) == n1


def _axiom_pairs(rng: random.Random):
    """Instantiate each congruence axiom with random small subprocesses."""
    P = gen_process(rng, 3)
    Q = gen_process(rng, 3)
    R = gen_process(rng, 2)
    yield "CHOICE-COMM", Choice(P, Q), Choice(Q, P)
    yield "CHOICE-ASSOC", Choice(Choice(P, Q), R), Choice(P, Choice(Q, R))
    yield "CHOICE-IDENT", Choice(P, NIL), P
    yield "PAR-COMM", Parallel(P, Q), Parallel(Q, P)
    yield "PAR-ASSOC", Parallel(Parallel(P, Q), R), Parallel(P, Parallel(Q, R))
    yield "PAR-IDENT", Parallel(P, NIL), P
    yield "RES-SWAP", nu((a, b), P), nu((b, a), P)
    # RES-SCOPE needs a not free in the left component
    left = substitute(P, {a: c})
    yield "RES-SCOPE", Restriction(a, Parallel(left, Q)), Parallel(left, Restriction(a, Q))
    yield "RES-ANN", Restriction(a, NIL), NIL
    # replication bodies are communication-guarded throughout this oracle
    guarded = gen_prefix(rng, 2)
    yield "REPLICATION", Replication(guarded), Parallel(guarded, Replication(guarded))
    # ALPHA-CONV: rename one bound name; both binders are chosen outside the
    # generator's name pool so neither capture is possible
    b1, b2 = name("w1"), name("w2")
    yield "ALPHA-CONV", inp(x, b1, out(x, b1, P)), inp(x, b2, out(x, b2, P))


def test_axiom_soundness_random_instances():
    rng = random.Random(20240811)
    for round_ in range(60):
        for axiom, lhs, rhs in _axiom_pairs(rng):
            nl, nr = normalize(lhs), normalize(rhs)
            assert nl == nr, f"{axiom} failed on round {round_}:\n  {lhs!r}\n  {rhs!r}"


def test_normalize_idempotent_random(count=200):
    rng = random.Random(99)
    for _ in range(count):
        p = gen_process(rng, 5)
        n1 = normalize(p)
        assert normalize(n1) == n1


def _rewrite_once(rng: random.Random, p):
    """Apply one random congruence axiom at a random position."""

    def local(q):
        if isinstance(q, Parallel) and rng.random() < 0.5:
            return Parallel(q.right, q.left)
        if isinstance(q, Choice) and rng.random() < 0.5:
            return Choice(q.right, q.left)
        if isinstance(q, Replication) and rng.random() < 0.5:
            return Parallel(q.body, q)
        if rng.random() < 0.2:
            return Parallel(q, NIL)
        return q

    def walk(q, budget):
        q = local(q)
        if budget <= 0:
            return q
        if isinstance(q, Parallel):
            return Parallel(walk(q.left, budget - 1), walk(q.right, budget - 1))
        if isinstance(q, Choice):
            return Choice(walk(q.left, budget - 1), walk(q.right, budget - 1))
        if isinstance(q, Restriction):
            return Restriction(q.name, walk(q.body, budget - 1))
        return q

    return walk(p, 3)


def test_reduction_closed_under_congruence():
    """Congruent processes have equal multisets of canonical successors."""
    rng = random.Random(4242)
    checked = 0
    for _ in range(80):
        p = gen_process(rng, 4)
        q = _rewrite_once(rng, p)
        sp = initial_state(p)
        sq = initial_state(q)
        assert sp.process == sq.process  # congruent inputs normalize identically
        succ_p = Counter(canonical_key(normalize(s.process)) for s in reduce_step(sp))
        succ_q = Counter(canonical_key(normalize(s.process)) for s in reduce_step(sq))
        assert succ_p == succ_q
        checked += 1
    assert checked == 80


def test_canonical_ordering_is_stable_across_runs():
    rng = random.Random(5)
    kids = [gen_process(rng, 3) for _ in range(6)]
    p1 = normalize(Parallel(kids[0], Parallel(kids[1], Parallel(kids[2], kids[3]))))
    p2 = normalize(Parallel(Parallel(kids[3], kids[2]), Parallel(kids[1], kids[0])))
    assert p1 == p2


def test_duplicate_binders_rejected():
    from fuseforge.errors import StructuralError

    with pytest.raises(StructuralError):
        inp(x, (a, a), NIL)
