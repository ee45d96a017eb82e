"""Hammer fallback: when search fails, try the strongest tree states.

The hammer is never invoked per step; only after a failed search does it get
the highest-scoring states (explored ones included; states dropped by the
filter never entered the tree) with a combined-relevance premise pool.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import FactContext, ProofState, ProofStep
from .prover import HammerConfig
from .revision import relevance_filter
from .search import SearchNode, SearchOutcome, reconstruct_proof


@dataclass(frozen=True)
class HammerFallbackConfig:
    m_states: int = 16
    premise_limit: int = 2048
    per_state_timeout_s: float = 60.0
    mesh_weight: float = 0.5
    max_depth: int = 4

    def __post_init__(self):
        if self.m_states < 1:
            raise ValueError("m_states must be >= 1")
        if not (0 <= self.mesh_weight <= 1):
            raise ValueError("mesh_weight must be in [0, 1]")


def mesh_rank(state: ProofState, context: FactContext, k: int, w: float) -> list[str]:
    """Premises ranked by a blend of symbol overlap and proof usage.

    The overlap component is the reciprocal rank from ``relevance_filter``
    (0 for unranked facts); the usage component is the fact's ground-truth
    usage count normalised by the maximum (0 when the corpus is empty).
    Combined score: ``w * overlap + (1 - w) * usage``; ties break by fact id.
    """
    overlap_order = relevance_filter(state, context, len(context.facts))
    overlap_score = {name: 1.0 / (rank + 1) for rank, name in enumerate(overlap_order)}
    max_usage = max(context.usage_counts.values(), default=0)
    scored = []
    for name in sorted(context.facts):
        usage = (context.usage_counts.get(name, 0) / max_usage) if max_usage else 0.0
        combined = w * overlap_score.get(name, 0.0) + (1 - w) * usage
        scored.append((-combined, name))
    scored.sort()
    return [name for _, name in scored[:k]]


def hammer_fallback(outcome: SearchOutcome, backend,
                    config: HammerFallbackConfig = HammerFallbackConfig(),
                    attempts: list | None = None) -> list[ProofStep] | None:
    """Attempt the ``m_states`` best tree states in score order; on the first
    hit, return the path to that state plus the hammer's steps (a full
    proof). Per-state timeouts are absorbed; None when every attempt fails.
    ``attempts``, when given, collects one record per state tried (for the
    search report).
    """
    nodes: list[SearchNode] = sorted(
        outcome.tree, key=lambda n: (-n.score, n.order))[:config.m_states]
    hammer_config = HammerConfig(
        max_depth=config.max_depth,
        premise_limit=config.premise_limit,
        budget_ms=int(config.per_state_timeout_s * 1000),
    )
    for node in nodes:
        context = node.state.context
        pool = mesh_rank(node.state, context,
                         min(config.premise_limit, len(context.facts)),
                         config.mesh_weight)
        result = backend.hammer_at(node.token, hammer_config, pool)
        if attempts is not None:
            attempts.append({"depth": node.length, "score": node.score,
                             "result": result.kind})
        if result.found:
            return reconstruct_proof(node) + list(result.steps)
    return None
