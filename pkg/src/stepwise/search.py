"""Best-first proof search: scoring, frontier management, and the main loop.

The loop generalises single-node expansion to a top-k batch per iteration
(k = 1 recovers plain best-first). Per node: generate candidates, apply each
through the backend, revise the failures and apply the repairs, stop on the
first zero-subgoal success, filter the surviving states, score and insert.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .core import Candidate, ProofState, ProofStep, Theory, canonical_state
from .filtering import FilterConfig, FilterStats, SeenSet, filter_states
from .revision import FailedAttempt, RevisionConfig, revise, tactic_frequencies


@dataclass(frozen=True)
class SearchConfig:
    alpha: float = 1.0
    top_k: int = 5
    candidates_per_state: int = 128
    max_iterations: int = 100
    time_limit_s: float = 7200.0
    node_budget: int = 10_000
    revision_enabled: bool = True
    filtering_enabled: bool = True
    seed: int = 0
    atom_limit: int = 16
    step_timeout_ms: int = 10_000

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")


@dataclass
class SearchNode:
    state: ProofState
    parent: "SearchNode | None"
    producing_step: Candidate | None
    path_log_prob: float
    length: int
    score: float
    order: int  # insertion sequence, breaks score ties
    token: str  # backend snapshot of this state
    explored: bool = False


@dataclass
class SearchStats:
    iterations: int = 0
    nodes_created: int = 0
    nodes_filtered_dup: int = 0
    nodes_filtered_cex: int = 0
    generator_calls: int = 0
    revisions_tried: int = 0
    wall_time: float = 0.0

    def deterministic_view(self) -> dict:
        """Stats with the physically nondeterministic wall clock removed."""
        out = self.__dict__.copy()
        out.pop("wall_time")
        return out


@dataclass
class SearchOutcome:
    proved: bool
    steps: tuple[ProofStep, ...]
    stats: SearchStats
    tree: list[SearchNode]
    filter_stats: FilterStats

    @property
    def failed(self) -> bool:
        return not self.proved


def score_node(path_log_prob: float, length: int, alpha: float) -> float:
    """Length-normalised cumulative log-probability; higher is better."""
    if length < 1:
        raise ValueError("length must be >= 1 (the root is scored by convention)")
    return path_log_prob / length**alpha


def select_top_k(frontier: list[SearchNode], k: int) -> list[SearchNode]:
    """The k highest-scoring unexplored nodes (ties by earlier insertion),
    marked explored."""
    open_nodes = [n for n in frontier if not n.explored]
    open_nodes.sort(key=lambda n: (-n.score, n.order))
    batch = open_nodes[:k]
    for node in batch:
        node.explored = True
    return batch


def reconstruct_proof(node: SearchNode) -> list[ProofStep]:
    steps: list[ProofStep] = []
    while node.parent is not None:
        assert node.producing_step is not None
        steps.append(node.producing_step.step)
        node = node.parent
    steps.reverse()
    return steps


class ReplayError(Exception):
    pass


def best_first_search(theory: Theory, theorem_id: str, backend, generator,
                      config: SearchConfig = SearchConfig(),
                      revision_config: RevisionConfig | None = None,
                      prefix_steps: tuple[ProofStep, ...] = ()) -> SearchOutcome:
    """Search for a proof of ``theorem_id``; deterministic given the seed and
    the mock generator. Returns Failed (never raises) on budget exhaustion;
    backend transport errors propagate. ``prefix_steps`` are replayed before
    the search starts (completion experiments)."""
    from .prover import render_theory

    start_time = time.monotonic()
    deadline = start_time + config.time_limit_s
    stats = SearchStats()
    context = theory.context_for(theorem_id)
    if revision_config is None:
        revision_config = RevisionConfig(tactic_set=tactic_frequencies(theory))

    backend.load_theory(render_theory(theory))
    sid = backend.start(theory.name, theorem_id)
    for step in prefix_steps:
        result = backend.apply(sid, step, config.step_timeout_ms)
        if not result.ok:
            raise ReplayError(
                f"prefix step {step.text()!r} failed: {result.category} {result.detail}")
    root_state = backend.state(sid).with_context(context)
    root = SearchNode(root_state, None, None, 0.0, 0, 0.0,
                      order=0, token=backend.clone(sid))
    tree = [root]
    stats.nodes_created = 1
    seen = SeenSet()
    seen.insert(root_state)
    filter_config = FilterConfig()
    oracle_tokens: dict[str, str] = {canonical_state(root_state): root.token}

    def oracle(state: ProofState):
        token = oracle_tokens[canonical_state(state)]
        return backend.counterexample_at(token, config.atom_limit)

    if root_state.qed:
        stats.wall_time = time.monotonic() - start_time
        return SearchOutcome(True, (), stats, tree, seen.stats)

    work_sid = backend.restore(root.token)

    def expand_candidate(node: SearchNode, cand: Candidate, successes, failures):
        """Apply one candidate on the work session; returns a winning node
        or None. The session is reset to the node's state afterwards."""
        result = backend.apply(work_sid, cand.step, config.step_timeout_ms)
        if result.ok:
            new_state = result.state.with_context(context)
            token = backend.clone(work_sid)
            backend.restore(node.token, session=work_sid)
            if new_state.qed:
                return SearchNode(new_state, node, cand,
                                  node.path_log_prob + cand.log_prob,
                                  node.length + 1, 0.0, order=-1, token=token)
            successes.append((new_state, cand, token))
        else:
            if result.category == "timeout":
                backend.restore(node.token, session=work_sid)
            failures.append(FailedAttempt(
                node.state, cand.step, cand.log_prob, result.category, result.detail))
        return None

    while (stats.iterations < config.max_iterations
           and time.monotonic() < deadline):
        batch = select_top_k(tree, config.top_k)
        if not batch:
            break
        stats.iterations += 1
        for node in batch:
            candidates = generator.generate(node.state)[:config.candidates_per_state]
            stats.generator_calls += 1
            successes: list[tuple[ProofState, Candidate, str]] = []
            failures: list[FailedAttempt] = []
            backend.restore(node.token, session=work_sid)
            winner = None
            for cand in candidates:
                winner = expand_candidate(node, cand, successes, failures)
                if winner is not None:
                    break
            if winner is None and config.revision_enabled:
                round_failures = failures
                for _ in range(revision_config.repair_rounds):
                    repaired = revise(round_failures, context, revision_config)
                    if not repaired:
                        break
                    stats.revisions_tried += len(repaired)
                    round_failures = []
                    for cand in repaired:
                        winner = expand_candidate(node, cand, successes, round_failures)
                        if winner is not None:
                            break
                    if winner is not None:
                        break
            if winner is not None:
                stats.wall_time = time.monotonic() - start_time
                return SearchOutcome(
                    True, tuple(reconstruct_proof(winner)), stats, tree, seen.stats)

            for state, _, token in successes:
                oracle_tokens.setdefault(canonical_state(state), token)
            if config.filtering_enabled:
                pairs = [(state, cand) for state, cand, _ in successes]
                kept_pairs, delta = filter_states(pairs, seen, oracle, filter_config)
                stats.nodes_filtered_dup += delta.duplicates_rejected
                stats.nodes_filtered_cex += delta.counterexamples_rejected
                # filter preserves order, so a single forward walk recovers
                # the snapshot token of each survivor
                kept = []
                cursor = iter(successes)
                for state, cand in kept_pairs:
                    for s, c, token in cursor:
                        if s is state and c is cand:
                            kept.append((s, c, token))
                            break
            else:
                kept = successes
            for state, cand, token in kept:
                if stats.nodes_created >= config.node_budget:
                    break
                length = node.length + 1
                path_lp = node.path_log_prob + cand.log_prob
                child = SearchNode(state, node, cand, path_lp, length,
                                   score_node(path_lp, length, config.alpha),
                                   order=stats.nodes_created, token=token)
                tree.append(child)
                stats.nodes_created += 1

    stats.wall_time = time.monotonic() - start_time
    return SearchOutcome(False, (), stats, tree, seen.stats)


def frontier_summary(outcome: SearchOutcome) -> dict:
    open_nodes = [n for n in outcome.tree if not n.explored]
    return {
        "tree_nodes": len(outcome.tree),
        "frontier_size": len(open_nodes),
        "best_unexplored_score": max((n.score for n in open_nodes), default=None),
        "max_depth": max((n.length for n in outcome.tree), default=0),
    }


def replay_steps(theory: Theory, theorem_id: str, backend,
                 steps: list[ProofStep] | tuple[ProofStep, ...]) -> bool:
    """Replay a step list on a fresh session; True iff it ends with zero
    subgoals (the soundness check for Proved outcomes)."""
    from .prover import render_theory

    backend.load_theory(render_theory(theory))
    sid = backend.start(theory.name, theorem_id)
    for step in steps:
        result = backend.apply(sid, step, None)
        if not result.ok:
            return False
    return backend.state(sid).qed
