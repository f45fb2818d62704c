"""BSP executor: superstep loop, mailbox delivery, partition workers.

Execution follows the synchronous BSP contract: messages sent in superstep t
are readable only in t+1; cache banks and value buffers flip at the barrier.
Mailboxes are pre-seeded with each agent's initial-value message, so staged
reads at superstep 0 (which see initial values) match message-passing mode
exactly.

Determinism: per-agent ordering of consumed messages is fixed ascending by
sender id, per-agent RNG streams live inside agent values, and worker-local
outboxes are merged at the barrier in partition order, so the final state is
bit-identical for any thread count and any merged-order permutation.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .equations import ComputeMethodContract, check_tag, identity
from .errors import ContractError, CoverageError
from .optimizer import CacheRead, LocalRead, PartitionPlan


@dataclass
class Metrics:
    rounds: int
    threads: int
    seed: int
    wall_seconds_per_round: list[float] = field(default_factory=list)
    logical_messages_per_round: list[int] = field(default_factory=list)
    wire_units_per_round: list[int] = field(default_factory=list)
    header_units_per_round: list[int] = field(default_factory=list)
    inbound_wire_by_agent: dict[int, list[int]] = field(default_factory=dict)
    inbound_total_by_agent: dict[int, list[int]] = field(default_factory=dict)

    @property
    def mean_wall_seconds_per_round(self) -> float | None:
        if not self.wall_seconds_per_round:
            return None
        return sum(self.wall_seconds_per_round) / len(self.wall_seconds_per_round)


def wire_message_count(metrics: Metrics) -> tuple[list[int], list[int]]:
    """(logical agent-to-agent messages, cross-partition wire units) per round."""
    return metrics.logical_messages_per_round, metrics.wire_units_per_round


@dataclass
class SimulationState:
    superstep: int
    agent_values: dict[int, object]
    previous_values: dict[int, object] | None


def deliver(
    contract: ComputeMethodContract,
    raw: list[tuple[int, object]],
    receiver: int | None = None,
) -> list[object]:
    """Deserialize a mailbox batch in ascending-sender order.

    Payloads from negative (system) senders are already in-messages.
    """
    msgs = []
    for sender, payload in sorted(raw, key=lambda sp: sp[0]):
        value = payload if sender < 0 else contract.deserialize(payload)
        if not check_tag(contract.in_message_type, value):
            raise ContractError(
                f"message {value!r} from sender {sender} to receiver {receiver} "
                f"does not match in-message type {contract.in_message_type}"
            )
        msgs.append(value)
    return msgs


class Engine:
    """Compiled program: plans resolved into flat per-agent routing tables."""

    def __init__(self, workload, plans: list[PartitionPlan], track_inbound: tuple[int, ...] = ()):
        self.workload = workload
        self.plans = plans
        self.track_inbound = tuple(track_inbound)
        n = workload.graph.vertex_count
        self.n = n

        covered: dict[int, int] = {}
        for plan in plans:
            for a in plan.agent_ids:
                if a in covered:
                    raise CoverageError(f"agent {a} appears in partitions {covered[a]} and {plan.partition.id}")
                covered[a] = plan.partition.id
        if len(covered) != n:
            missing = [a for a in range(n) if a not in covered]
            raise CoverageError(f"agents not covered by any plan: {missing[:10]}")
        self.partition_of = [covered[a] for a in range(n)]

        self.contract_of: list[ComputeMethodContract] = [None] * n  # type: ignore
        marks = workload.static_marks
        for plan in plans:
            for a, ap in plan.per_agent.items():
                self.contract_of[a] = workload.contracts[ap.equation.compute]

        # pushdown-replaced (target -> senders whose direct sends are folded)
        replaced_pairs: set[tuple[int, int]] = set()
        for plan in plans:
            for target, senders in plan.pushdown_replaced.items():
                replaced_pairs.update((s, target) for s in senders)

        passes = plans[0].passes if plans else frozenset()
        self.passes = passes
        use_cache = "cache" in passes
        local_staged = "local" in passes
        remote_staged = "remote" in passes
        merged_uncached = "merge" in passes and not use_cache

        # reverse reference map: sender -> readers
        readers_of: list[list[int]] = [[] for _ in range(n)]
        for plan in plans:
            for a, ap in plan.per_agent.items():
                for ref in ap.equation.reference_set:
                    readers_of[ref.agent_id].append(a)

        # per-agent emit routing
        self.local_deliver: list[list[int]] = [[] for _ in range(n)]
        self.cross_deliver: list[list[tuple[int, int]]] = [[] for _ in range(n)]  # (dst pid, reader)
        self.cross_header = merged_uncached
        for sender in range(n):
            spid = self.partition_of[sender]
            for reader in sorted(readers_of[sender]):
                static = any(
                    ref.agent_id == sender for ref in marks.get(reader, ())
                )
                rpid = self.partition_of[reader]
                if (sender, reader) in replaced_pairs:
                    continue  # aggregator ships the folded value instead
                if rpid == spid:
                    if local_staged and static:
                        continue  # reader uses a direct buffered read
                    self.local_deliver[sender].append(reader)
                else:
                    if use_cache and static:
                        continue  # value travels in the partition-pair cache
                    self.cross_deliver[sender].append((rpid, reader))

        # caches: stable read/write bank objects; the barrier copies write
        # into read so compiled reads can bind the read-bank list directly
        self.read_banks: dict[tuple[int, int], list] = {}
        self.write_banks: dict[tuple[int, int], list] = {}
        self.cache_writes: list[list[tuple[list, int]]] = [[] for _ in range(n)]
        self.remat: dict[int, list[tuple[tuple[int, int], int, int, list[int]]]] = {}
        if use_cache:
            for plan in plans:
                for key, cache in plan.outbound_caches.items():
                    if key not in self.read_banks:
                        self.read_banks[key] = [None] * len(cache)
                        self.write_banks[key] = [None] * len(cache)
                    wb = self.write_banks[key]
                    for ref, off in cache.offset_of.items():
                        self.cache_writes[ref.agent_id].append((wb, off))
            if not remote_staged:
                # receiver side rematerializes cache slots into messages
                for plan in plans:
                    pid = plan.partition.id
                    entries = []
                    for key, cache in plan.inbound_caches.items():
                        slot_readers: dict[int, list[int]] = {}
                        for a, ap in plan.per_agent.items():
                            for ref, src_pid in (ap.refined.remote_static if ap.refined else ()):
                                if (src_pid, pid) == key:
                                    slot_readers.setdefault(cache.offset_of[ref], []).append(a)
                        for off in sorted(slot_readers):
                            src_agent = cache.schema[off].agent_id
                            entries.append((key, off, src_agent, sorted(slot_readers[off])))
                    self.remat[pid] = entries

        # staged reads compiled per agent, sorted ascending by source.
        # Commutative contracts use the split fast form (locals, cache slots);
        # order-sensitive contracts use one interleaved list.
        self.fast_reads: list[tuple | None] = [None] * n
        self.ordered_reads: list[list[tuple]] = [[] for _ in range(n)]
        for plan in plans:
            for a, ap in plan.per_agent.items():
                if not ap.staged:
                    continue
                contract = self.contract_of[a]
                entries = []
                for e in ap.staged:
                    if isinstance(e, LocalRead):
                        src = e.target.agent_id
                        entries.append((src, 0, src))
                    elif isinstance(e, CacheRead):
                        entries.append((e.source_agent, 1, (self.read_banks[e.cache], e.offset)))
                entries.sort(key=lambda t: t[0])
                if contract.pushdown_eligible:
                    locals_ = tuple(src for (src, kind, _) in entries if kind == 0)
                    slots = tuple(detail for (_, kind, detail) in entries if kind == 1)
                    self.fast_reads[a] = (locals_, slots)
                else:
                    self.ordered_reads[a] = entries

        self.aggregators = []
        for plan in plans:
            for agg in plan.aggregators:
                self.aggregators.append(agg)

        self.exec_order: list[list[int]] = []
        for plan in plans:
            order = plan.merged_order if plan.merged_order is not None else plan.agent_ids
            self.exec_order.append(list(order))

        self.double_buffered = any(p.double_buffered for p in plans)
        self.any_mail_routes = (
            any(self.local_deliver)
            or any(self.cross_deliver)
            or bool(self.aggregators)
        )

    # -- execution ------------------------------------------------------------

    def run(self, rounds: int, threads: int = 1, seed: int = 0) -> tuple[SimulationState, Metrics]:
        n = self.n
        wl = self.workload
        metrics = Metrics(rounds=rounds, threads=threads, seed=seed)
        for a in self.track_inbound:
            metrics.inbound_wire_by_agent[a] = []
            metrics.inbound_total_by_agent[a] = []

        values: list = [wl.initial_values[a] for a in range(n)]
        values_next: list = list(values) if self.double_buffered else values
        mailbox: list[list] = [[] for _ in range(n)]

        contract_of = self.contract_of
        to_msg = [c.state_to_message for c in contract_of]

        # superstep-0 seeding: initial-value sends arrive at round 0.
        # outs_prev holds every agent's message from the end of the previous
        # round; buffered local reads index it directly (the sender generates
        # one message per round, local readers look it up).
        outs_prev: list = [to_msg[a](values[a]) for a in range(n)]
        outs: list = [None] * n
        self._route(outs_prev, mailbox)
        for key, bank in self.read_banks.items():
            src_plan = next(p for p in self.plans if p.partition.id == key[0])
            cache = src_plan.outbound_caches[key]
            bank[:] = [outs_prev[ref.agent_id] for ref in cache.schema]

        pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
        try:
            empty_mailbox: list[list] = [[] for _ in range(n)]
            for _ in range(rounds):
                t0 = time.perf_counter()
                # with every route compiled away, no mailbox is ever touched
                mail_next = [[] for _ in range(n)] if self.any_mail_routes else empty_mailbox
                shards = [{} for _ in self.plans]  # per worker: dst pid -> [(reader, sender, payload)]
                counters = [[0, 0, 0] for _ in self.plans]  # logical, wire, header

                def work(idx: int) -> None:
                    self._run_partition(idx, values, values_next, mailbox, mail_next,
                                        shards[idx], counters[idx], outs, outs_prev)

                if pool is None:
                    for i in range(len(self.plans)):
                        work(i)
                else:
                    list(pool.map(work, range(len(self.plans))))

                # barrier: merge cross-partition shards in partition order
                track_wire = {a: 0 for a in self.track_inbound}
                for shard in shards:
                    for dst_pid in sorted(shard):
                        for reader, sender, payload in shard[dst_pid]:
                            mail_next[reader].append((sender, payload))
                            if reader in track_wire:
                                track_wire[reader] += 1
                # aggregation pushdown ships one folded value per aggregator
                wire_extra = 0
                for agg in self.aggregators:
                    target = agg.target_agent
                    c = contract_of[target]
                    batch = [c.deserialize(outs[s]) for s in agg.senders if outs[s] is not None]
                    partial = c.partial_compute(batch) if batch else None
                    if partial is not None:
                        mail_next[target].append((agg.ref.synthetic_id, partial))
                        wire_extra += 1
                        if target in track_wire:
                            track_wire[target] += 1

                # one wire unit per directed cache per round, plus one per
                # dynamic/aggregated cross-partition message
                logical = sum(c[0] for c in counters) + wire_extra
                wire = sum(c[1] for c in counters) + wire_extra + len(self.read_banks)
                header = sum(c[2] for c in counters)

                # flip buffers (every slot/value is rewritten each round, so
                # the write bank and stale value array can be reused)
                mailbox = mail_next
                for key, bank in self.read_banks.items():
                    bank[:] = self.write_banks[key]
                if self.double_buffered:
                    values, values_next = values_next, values
                outs_prev, outs = outs, outs_prev

                metrics.wall_seconds_per_round.append(time.perf_counter() - t0)
                metrics.logical_messages_per_round.append(logical)
                metrics.wire_units_per_round.append(wire)
                metrics.header_units_per_round.append(header)
                for a in self.track_inbound:
                    metrics.inbound_wire_by_agent[a].append(track_wire[a])
                    metrics.inbound_total_by_agent[a].append(len(mailbox[a]))
        finally:
            if pool is not None:
                pool.shutdown()

        previous = None
        if self.double_buffered:
            previous = {a: values_next[a] for a in range(n)}
        state = SimulationState(
            superstep=rounds,
            agent_values={a: values[a] for a in range(n)},
            previous_values=previous,
        )
        return state, metrics

    def _route(self, outs, mailbox) -> None:
        """Deliver every agent's current out-message (used for seeding)."""
        for sender in range(self.n):
            payload = outs[sender]
            if payload is None:
                continue
            for reader in self.local_deliver[sender]:
                mailbox[reader].append((sender, payload))
            for _, reader in self.cross_deliver[sender]:
                mailbox[reader].append((sender, payload))
        for agg in self.aggregators:
            target = agg.target_agent
            c = self.contract_of[target]
            batch = [c.deserialize(outs[s]) for s in agg.senders if outs[s] is not None]
            partial = c.partial_compute(batch) if batch else None
            if partial is not None:
                mailbox[target].append((agg.ref.synthetic_id, partial))

    def _run_partition(self, idx, values, values_next, mailbox, mail_next,
                       shard, counter, outs, outs_prev) -> None:
        plan = self.plans[idx]
        pid = plan.partition.id
        contract_of = self.contract_of
        fast_reads = self.fast_reads
        ordered_reads = self.ordered_reads
        cache_writes = self.cache_writes
        local_deliver = self.local_deliver
        cross_deliver = self.cross_deliver
        in_place = not self.double_buffered

        # rematerialize inbound cache slots into message batches
        remat_msgs: dict[int, list] = {}
        for key, off, src_agent, readers_list in self.remat.get(pid, ()):
            payload = self.read_banks[key][off]
            if payload is None:
                continue
            for r in readers_list:
                remat_msgs.setdefault(r, []).append((src_agent, payload))

        for agent in self.exec_order[idx]:
            c = contract_of[agent]
            deser = c.deserialize
            skip_deser = deser is identity
            inbox = mailbox[agent]
            extra = remat_msgs.get(agent)
            if extra:
                inbox = inbox + extra

            fast = fast_reads[agent]
            if fast is not None:
                # commutative fold: consumption order is free
                locals_, slots = fast
                msgs = [outs_prev[src] for src in locals_]
                if None in msgs:
                    msgs = [m for m in msgs if m is not None]
                if not skip_deser:
                    msgs = [deser(m) for m in msgs]
                for bank, off in slots:
                    payload = bank[off]
                    if payload is not None:
                        msgs.append(payload if skip_deser else deser(payload))
                if inbox:
                    if skip_deser:
                        msgs.extend(p for _, p in inbox)
                    else:
                        msgs.extend(p if s < 0 else deser(p) for s, p in inbox)
            else:
                staged = ordered_reads[agent]
                if staged:
                    pairs = [(s, p if (s < 0 or skip_deser) else deser(p)) for s, p in inbox]
                    for src, kind, detail in staged:
                        if kind == 0:
                            payload = outs_prev[src]
                        else:
                            payload = detail[0][detail[1]]
                        if payload is not None:
                            pairs.append((src, payload if skip_deser else deser(payload)))
                    pairs.sort(key=lambda sp: sp[0])
                    msgs = [p for _, p in pairs]
                elif inbox:
                    if c.pushdown_eligible:
                        msgs = [p for _, p in inbox] if skip_deser else [
                            p if s < 0 else deser(p) for s, p in inbox
                        ]
                    else:
                        inbox.sort(key=lambda sp: sp[0])
                        msgs = [p if (s < 0 or skip_deser) else deser(p) for s, p in inbox]
                else:
                    msgs = []

            folded = c.partial_compute(msgs) if msgs else None
            new_value = c.update_state(values[agent], folded)
            if in_place:
                values[agent] = new_value
            else:
                values_next[agent] = new_value

            out = c.state_to_message(new_value)
            outs[agent] = out
            for bank, off in cache_writes[agent]:
                bank[off] = out
            if out is not None:
                locals_d = local_deliver[agent]
                if locals_d:
                    counter[0] += len(locals_d)
                    item = (agent, out)
                    for r in locals_d:
                        mail_next[r].append(item)
                cross = cross_deliver[agent]
                if cross:
                    counter[0] += len(cross)
                    counter[1] += len(cross)
                    if self.cross_header:
                        counter[2] += len(cross)
                    for dst_pid, r in cross:
                        bucket = shard.get(dst_pid)
                        if bucket is None:
                            bucket = shard[dst_pid] = []
                        bucket.append((r, agent, out))


def execute(
    workload,
    plans: list[PartitionPlan],
    rounds: int,
    threads: int = 1,
    seed: int = 0,
    track_inbound: tuple[int, ...] = (),
) -> tuple[SimulationState, Metrics]:
    """Compile the plans and run ``rounds`` supersteps."""
    engine = Engine(workload, plans, track_inbound)
    return engine.run(rounds, threads=threads, seed=seed)
