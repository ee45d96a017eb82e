"""Candidate step generation: a seeded deterministic mock and an HTTP client
for a remote completion endpoint."""

from __future__ import annotations

import hashlib
import json
import math
import os
import urllib.error
import urllib.request
from dataclasses import dataclass

from .core import Candidate, ProofState, canonical_state, parse_step, render_state
from .formulas import ParseError, atoms

ENDPOINT_ENV = "STEPWISE_GENERATOR_ENDPOINT"

PROMPT_HEADER = (
    "### Given the following Isabelle proof state,\n"
    "suggest the next proof step."
)


class GeneratorError(Exception):
    pass


class EmptyGenerationError(GeneratorError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    n_candidates: int = 128
    temperature: float = 1.0
    top_p: float = 0.95
    max_tokens: int = 2048
    seed: int = 0
    endpoint: str | None = None
    request_timeout_s: float = 60.0

    def __post_init__(self):
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")
        if not (0 < self.top_p <= 1):
            raise ValueError("top_p must be in (0, 1]")


def build_prompt(state: ProofState) -> str:
    """Instruction prompt for the next-step model; byte-stable for equal
    states, with the rendered state between the Input and Response markers."""
    return f"{PROMPT_HEADER}\n### Input:\n{render_state(state)}\n### Response:\n"


# ---------------------------------------------------------------------------
# Deterministic mock
# ---------------------------------------------------------------------------

def _perturbation(seed: int, state_key: str, step_text: str, temperature: float) -> float:
    """Seeded factor in [0.5, 2.0] at temperature 1; exactly 1.0 at 0."""
    digest = hashlib.sha256(f"{seed}|{state_key}|{step_text}".encode()).digest()
    u = int.from_bytes(digest[:8], "big") / 2.0**64
    return 2.0 ** (temperature * (2.0 * u - 1.0))


def mock_generate(state: ProofState, config: GeneratorConfig) -> list[Candidate]:
    """Test double for the step model.

    The candidate pool is every fact-free tactic plus apply/elim over the
    context facts. Weights are 1 plus the atom overlap between the fact and
    the first goal (1 for fact-free steps), scaled by a seeded perturbation;
    log-probabilities normalise over the whole pool. Output is sorted by
    score descending, ties by step text, and is a pure function of the
    canonical state, seed, and config.
    """
    if state.qed:
        return []
    context = state.context
    goal_atoms = atoms(state.subgoals[0].goal)
    pool: list[tuple[str, float]] = []
    for tactic in ("assumption", "intro", "split", "left", "right", "simp", "auto"):
        pool.append((tactic, 1.0))
    for name in sorted(context.facts):
        overlap = len(atoms(context.facts[name]) & goal_atoms)
        pool.append((f"apply [{name}]", 1.0 + overlap))
        pool.append((f"elim [{name}]", 1.0 + overlap))
    key = canonical_state(state)
    weighted = [
        (text, w * _perturbation(config.seed, key, text, config.temperature))
        for text, w in pool
    ]
    total = sum(w for _, w in weighted)
    scored = [(math.log(w / total), text) for text, w in weighted]
    scored.sort(key=lambda item: (-item[0], item[1]))
    return [
        Candidate(parse_step(text), min(lp, 0.0), "generated")
        for lp, text in scored[:config.n_candidates]
    ]


# ---------------------------------------------------------------------------
# Remote completion client
# ---------------------------------------------------------------------------

def llm_generate(state: ProofState, config: GeneratorConfig) -> list[Candidate]:
    """Query a completion endpoint and parse one step per sample.

    Sends the prompt with the configured sampling parameters and
    ``logprobs: true``. The first nonempty line of each sample is parsed as a
    step (unparseable samples are dropped); its score is the sum of the
    sample's token log-probabilities, clamped to 0. When any sample lacks
    log-probabilities the whole batch degrades to rank-based scores -1, -2,
    ... over distinct steps in arrival order. Duplicates keep the maximum
    score. No reasoning flags are sent: the model answers directly.
    """
    endpoint = config.endpoint or os.environ.get(ENDPOINT_ENV)
    if not endpoint:
        raise GeneratorError(f"no generator endpoint configured (set {ENDPOINT_ENV})")
    body = json.dumps({
        "prompt": build_prompt(state),
        "n": config.n_candidates,
        "temperature": config.temperature,
        "top_p": config.top_p,
        "max_tokens": config.max_tokens,
        "logprobs": True,
    }).encode()
    request = urllib.request.Request(
        endpoint, data=body, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(request, timeout=config.request_timeout_s) as resp:
            payload = json.loads(resp.read().decode())
    except (urllib.error.URLError, OSError, ValueError) as e:
        raise GeneratorError(f"generator endpoint failed: {e}") from e

    parsed: list[tuple[str, Candidate | None, float | None]] = []
    have_logprobs = True
    for choice in payload.get("choices", []):
        text = choice.get("text", "")
        first_line = next((ln.strip() for ln in text.splitlines() if ln.strip()), "")
        if not first_line:
            continue
        try:
            step = parse_step(first_line)
        except ParseError:
            continue
        token_logprobs = choice.get("token_logprobs")
        if token_logprobs is None:
            have_logprobs = False
            parsed.append((step.text(), step, None))
        else:
            parsed.append((step.text(), step, float(sum(token_logprobs))))
    if not parsed:
        raise EmptyGenerationError("no sample parsed as a proof step")

    best: dict[str, Candidate] = {}
    rank = 0
    for text, step, lp in parsed:
        if not have_logprobs:
            if text in best:
                continue
            rank += 1
            best[text] = Candidate(step, float(-rank), "generated")
            continue
        score = min(lp, 0.0)  # defensively clamp a misbehaving server
        kept = best.get(text)
        if kept is None or score > kept.log_prob:
            best[text] = Candidate(step, score, "generated")
    ranked = sorted(best.values(), key=lambda c: (-c.log_prob, c.step.text()))
    return ranked


class MockGenerator:
    """Engine-facing wrapper over ``mock_generate``."""

    def __init__(self, config: GeneratorConfig):
        self.config = config

    def generate(self, state: ProofState) -> list[Candidate]:
        return mock_generate(state, self.config)


class HttpGenerator:
    """Engine-facing wrapper over ``llm_generate``."""

    def __init__(self, config: GeneratorConfig):
        self.config = config

    def generate(self, state: ProofState) -> list[Candidate]:
        return llm_generate(state, self.config)
