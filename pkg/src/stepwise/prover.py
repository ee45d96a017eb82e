"""Deterministic miniature interactive prover.

Implements the backend surface the search engine drives: theory loading,
goal initialisation, step execution, a truth-table counterexample oracle,
a depth-bounded proof hammer, and sessions with clone/restore. All tactics
act on the first subgoal.
"""

from __future__ import annotations

import hashlib
import itertools
import threading
import time
from dataclasses import dataclass

from . import kernels
from .core import (
    FactContext,
    ProofState,
    ProofStep,
    StepResult,
    Subgoal,
    Theory,
    TheoryEntry,
    canonical_state,
    canonical_subgoal,
    parse_step,
)
from .formulas import (
    FALSE,
    TRUE,
    And,
    Formula,
    Implies,
    Not,
    Or,
    ParseError,
    atoms,
    fold_constants,
    parse_formula,
    render,
)

DEFAULT_STEP_BUDGET_MS = 10_000
AUTO_DEPTH = 5


class ProverError(Exception):
    category = "prover_error"


class TheoryParseError(ProverError):
    category = "parse_error"

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownTheoremError(ProverError):
    category = "unknown_theorem"


class UnknownSessionError(ProverError):
    category = "unknown_session"


# ---------------------------------------------------------------------------
# Theory files
# ---------------------------------------------------------------------------

def load_theory(source: str) -> Theory:
    """Parse the line-oriented theory format (see the format reference)."""
    name: str | None = None
    entries: list[TheoryEntry] = []
    seen: set[str] = set()
    pending: tuple[str, str, Formula] | None = None
    proof_steps: list[ProofStep] | None = None
    ended = False

    def flush() -> None:
        nonlocal pending
        if pending is not None:
            entries.append(TheoryEntry(*pending))
            pending = None

    for lineno, raw_line in enumerate(source.splitlines(), 1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if ended:
            raise TheoryParseError(f"content after end: {line!r}", lineno)
        word = line.split(None, 1)[0]
        if proof_steps is not None:
            if word == "qed":
                assert pending is not None
                entries.append(TheoryEntry(pending[0], pending[1], pending[2], tuple(proof_steps)))
                pending = None
                proof_steps = None
            else:
                try:
                    proof_steps.append(parse_step(line))
                except ParseError as e:
                    raise TheoryParseError(str(e), lineno) from e
            continue
        if word == "theory":
            if name is not None:
                raise TheoryParseError("duplicate theory header", lineno)
            parts = line.split()
            if len(parts) != 2:
                raise TheoryParseError("expected: theory <name>", lineno)
            name = parts[1]
            continue
        if name is None:
            raise TheoryParseError("expected a theory header first", lineno)
        if word == "end":
            flush()
            ended = True
            continue
        if word == "proof":
            if pending is None:
                raise TheoryParseError("proof without a lemma or theorem", lineno)
            if pending[0] == "axiom":
                raise TheoryParseError("axioms carry no proof", lineno)
            proof_steps = []
            continue
        if word in ("axiom", "lemma", "theorem"):
            flush()
            body = line[len(word):].strip()
            if ":" not in body:
                raise TheoryParseError(f"expected: {word} <id>: <formula>", lineno)
            ident, formula_text = body.split(":", 1)
            ident = ident.strip()
            if not ident or " " in ident:
                raise TheoryParseError(f"invalid entry id {ident!r}", lineno)
            if ident in seen:
                raise TheoryParseError(f"duplicate entry id {ident!r}", lineno)
            seen.add(ident)
            try:
                statement = parse_formula(formula_text)
            except ParseError as e:
                raise TheoryParseError(str(e), lineno) from e
            pending = (word, ident, statement)
            continue
        raise TheoryParseError(f"unrecognised line {line!r}", lineno)

    if name is None:
        raise TheoryParseError("empty source", 1)
    if proof_steps is not None:
        raise TheoryParseError("unterminated proof block", len(source.splitlines()))
    if not ended:
        raise TheoryParseError("missing end", len(source.splitlines()))
    return Theory(name, tuple(entries))


def render_theory(theory: Theory) -> str:
    lines = [f"theory {theory.name}"]
    for e in theory.entries:
        lines.append(f"{e.kind} {e.name}: {render(e.statement)}")
        if e.proof is not None:
            lines.append("  proof")
            lines.extend(f"    {s.text()}" for s in e.proof)
            lines.append("  qed")
    lines.append("end")
    return "\n".join(lines) + "\n"


def init_goal(theory: Theory, theorem_id: str) -> ProofState:
    entry = theory.entry(theorem_id)
    if entry is None or entry.kind == "axiom":
        raise UnknownTheoremError(f"no provable entry named {theorem_id!r} in {theory.name}")
    context = theory.context_for(theorem_id)
    return ProofState((Subgoal((), entry.statement),), context, 0)


# ---------------------------------------------------------------------------
# Step execution
# ---------------------------------------------------------------------------

class _BudgetExceeded(Exception):
    pass


def _match_apply(fact: Formula, goal: Formula) -> tuple[Formula, ...] | None:
    """Premises needed to conclude ``goal`` from a curried implication,
    matching the shortest implication suffix; None if no suffix matches."""
    premises: list[Formula] = []
    node = fact
    while True:
        if node == goal:
            return tuple(premises)
        if isinstance(node, Implies):
            premises.append(node.left)
            node = node.right
        else:
            return None


def _with_hypothesis(hyps: tuple[Formula, ...], extra: Formula) -> tuple[Formula, ...]:
    if extra in hyps:
        return hyps
    return hyps + (extra,)


def apply_step(state: ProofState, step: ProofStep,
               budget_ms: int = DEFAULT_STEP_BUDGET_MS) -> StepResult:
    """Execute one tactic on the first subgoal.

    Returns Success with depth+1 and the same context, or a categorised
    failure; a success state always differs canonically from the input.
    """
    if not state.subgoals:
        return StepResult.failure("tactic_failure", "no open subgoals")
    deadline = time.monotonic() + budget_ms / 1000.0
    sub, rest = state.subgoals[0], state.subgoals[1:]
    ctx = state.context
    goal = sub.goal
    tactic = step.tactic

    new_subgoals: tuple[Subgoal, ...] | None = None
    if tactic == "assumption":
        if goal in sub.hypotheses or any(goal == f for f in ctx.facts.values()):
            new_subgoals = ()
        else:
            return StepResult.failure("tactic_failure", "goal is not an assumption or fact")
    elif tactic == "intro":
        if isinstance(goal, Implies):
            new_subgoals = (Subgoal(_with_hypothesis(sub.hypotheses, goal.left), goal.right),)
        elif isinstance(goal, Not):
            new_subgoals = (Subgoal(_with_hypothesis(sub.hypotheses, goal.operand), FALSE),)
        else:
            return StepResult.failure("tactic_failure", "goal is not an implication or negation")
    elif tactic == "split":
        if not isinstance(goal, And):
            return StepResult.failure("tactic_failure", "goal is not a conjunction")
        new_subgoals = (Subgoal(sub.hypotheses, goal.left), Subgoal(sub.hypotheses, goal.right))
    elif tactic in ("left", "right"):
        if not isinstance(goal, Or):
            return StepResult.failure("tactic_failure", "goal is not a disjunction")
        picked = goal.left if tactic == "left" else goal.right
        new_subgoals = (Subgoal(sub.hypotheses, picked),)
    elif tactic == "elim":
        if not step.facts:
            return StepResult.failure("tactic_failure", "elim requires a fact argument")
        fname = step.facts[0]
        if fname not in ctx:
            return StepResult.failure("undefined_fact", fname)
        fact = ctx.facts[fname]
        if not isinstance(fact, Or):
            return StepResult.failure("tactic_failure", f"{fname} is not a disjunction")
        new_subgoals = (
            Subgoal(_with_hypothesis(sub.hypotheses, fact.left), goal),
            Subgoal(_with_hypothesis(sub.hypotheses, fact.right), goal),
        )
    elif tactic == "apply":
        if not step.facts:
            return StepResult.failure("tactic_failure", "apply requires a fact argument")
        fname = step.facts[0]
        if fname not in ctx:
            return StepResult.failure("undefined_fact", fname)
        premises = _match_apply(ctx.facts[fname], goal)
        if premises is None:
            return StepResult.failure("tactic_failure", f"{fname} does not conclude the goal")
        new_subgoals = tuple(Subgoal(sub.hypotheses, p) for p in premises)
    elif tactic == "simp":
        folded = fold_constants(goal)
        if folded == goal:
            return StepResult.failure("no_progress", "goal has no constant redexes")
        new_subgoals = () if folded == TRUE else (Subgoal(sub.hypotheses, folded),)
    elif tactic == "auto":
        try:
            closed = _auto_close(sub, ctx, AUTO_DEPTH, deadline)
        except _BudgetExceeded:
            return StepResult.failure("timeout", "auto exceeded its budget")
        if not closed:
            return StepResult.failure("tactic_failure", "auto could not close the first subgoal")
        new_subgoals = ()
    else:
        return StepResult.failure("parse_error", f"unknown tactic {tactic!r}")

    new_state = ProofState(new_subgoals + rest, ctx, state.depth + 1)
    if canonical_state(new_state) == canonical_state(state):
        return StepResult.failure("no_progress", "state unchanged")
    return StepResult.success(new_state)


def _auto_close(sub: Subgoal, ctx: FactContext, depth: int, deadline: float) -> bool:
    """Depth-bounded deterministic backtracking over assumption, intro,
    split, left, right, and apply with goal-sharing facts in id order."""
    if time.monotonic() > deadline:
        raise _BudgetExceeded
    if depth <= 0:
        return False
    cache = ctx._auto_cache
    key = (canonical_subgoal(sub), depth)
    hit = cache.get(key)
    if hit is not None:
        return hit
    result = _auto_close_uncached(sub, ctx, depth, deadline)
    cache[key] = result
    return result


def _auto_close_uncached(sub: Subgoal, ctx: FactContext, depth: int, deadline: float) -> bool:
    goal = sub.goal
    if goal in sub.hypotheses or any(goal == f for f in ctx.facts.values()):
        return True
    if isinstance(goal, Implies):
        if _auto_close(Subgoal(_with_hypothesis(sub.hypotheses, goal.left), goal.right),
                       ctx, depth - 1, deadline):
            return True
    if isinstance(goal, Not):
        if _auto_close(Subgoal(_with_hypothesis(sub.hypotheses, goal.operand), FALSE),
                       ctx, depth - 1, deadline):
            return True
    if isinstance(goal, And):
        if (_auto_close(Subgoal(sub.hypotheses, goal.left), ctx, depth - 1, deadline)
                and _auto_close(Subgoal(sub.hypotheses, goal.right), ctx, depth - 1, deadline)):
            return True
    if isinstance(goal, Or):
        if _auto_close(Subgoal(sub.hypotheses, goal.left), ctx, depth - 1, deadline):
            return True
        if _auto_close(Subgoal(sub.hypotheses, goal.right), ctx, depth - 1, deadline):
            return True
    goal_atoms = atoms(goal)
    for fname in sorted(ctx.facts):
        if not (atoms(ctx.facts[fname]) & goal_atoms):
            continue
        premises = _match_apply(ctx.facts[fname], goal)
        if premises is None:
            continue
        if all(_auto_close(Subgoal(sub.hypotheses, p), ctx, depth - 1, deadline)
               for p in premises):
            return True
    return False


# ---------------------------------------------------------------------------
# Counterexample oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CexResult:
    kind: str  # none | counterexample | unknown
    assignment: dict[str, bool] | None = None
    subgoal_index: int = -1
    reason: str = ""

    @classmethod
    def none(cls) -> "CexResult":
        return cls("none")

    @classmethod
    def found(cls, assignment: dict[str, bool], subgoal_index: int) -> "CexResult":
        return cls("counterexample", assignment, subgoal_index)

    @classmethod
    def unknown(cls, reason: str) -> "CexResult":
        return cls("unknown", reason=reason)


def check_counterexample(state: ProofState, atom_limit: int = 16) -> CexResult:
    """Exhaustive truth-table scan per subgoal, in subgoal order.

    A counterexample satisfies every context fact and hypothesis of the
    indexed subgoal and falsifies its goal; the first one under lexicographic
    atom order with false before true is returned. Subgoals spanning more
    than ``atom_limit`` atoms cannot be certified; if no other subgoal is
    falsifiable the verdict is Unknown.
    """
    ctx = state.context
    ctx_atoms = set(ctx.atom_names())
    context_facts = list(ctx.facts.values())
    unknown_reason = ""
    for idx, sub in enumerate(state.subgoals):
        names = sorted(ctx_atoms | sub.atom_names())
        if len(names) > atom_limit:
            unknown_reason = f"subgoal {idx} spans {len(names)} atoms (limit {atom_limit})"
            continue
        atom_index = {n: i for i, n in enumerate(names)}
        code = kernels.compile_conjecture(
            context_facts + list(sub.hypotheses), sub.goal, atom_index)
        k = kernels.first_satisfying(code, len(names))
        if k >= 0:
            return CexResult.found(kernels.assignment_from_index(k, names), idx)
    if unknown_reason:
        return CexResult.unknown(unknown_reason)
    return CexResult.none()


# ---------------------------------------------------------------------------
# Bounded-search hammer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HammerConfig:
    max_depth: int = 4
    premise_limit: int = 2048
    budget_ms: int = 60_000


@dataclass(frozen=True)
class HammerResult:
    kind: str  # found | notfound | timeout
    steps: tuple[ProofStep, ...] = ()

    @property
    def found(self) -> bool:
        return self.kind == "found"


_HAMMER_TACTICS = ("assumption", "intro", "split", "left", "right", "elim", "apply")


def toy_hammer(state: ProofState, config: HammerConfig = HammerConfig(),
               pool: list[str] | None = None) -> HammerResult:
    """Iterative-deepening search for a full closing step sequence.

    Tactics are tried in a fixed order with facts in relevance order
    (``pool`` overrides the default relevance filtering). Deterministic for
    fixed inputs; Timeout when the budget runs out.
    """
    if not state.subgoals:
        return HammerResult("found", ())
    from .revision import relevance_filter

    ctx = state.context
    if pool is None:
        pool = relevance_filter(state, ctx, config.premise_limit)
    else:
        pool = list(pool)[:config.premise_limit]
    deadline = time.monotonic() + config.budget_ms / 1000.0
    try:
        for depth in range(1, config.max_depth + 1):
            steps = _hammer_dfs(state, ctx, pool, depth, deadline, {})
            if steps is not None:
                return HammerResult("found", tuple(steps))
    except _BudgetExceeded:
        return HammerResult("timeout")
    return HammerResult("notfound")


def _hammer_dfs(state: ProofState, ctx: FactContext, pool: list[str], depth: int,
                deadline: float, visited: dict[str, int]) -> list[ProofStep] | None:
    if not state.subgoals:
        return []
    if depth <= 0:
        return None
    if time.monotonic() > deadline:
        raise _BudgetExceeded
    key = canonical_state(state)
    if visited.get(key, -1) >= depth:
        return None
    visited[key] = depth
    for step in _hammer_moves(state, ctx, pool):
        result = apply_step(state, step)
        if not result.ok:
            continue
        tail = _hammer_dfs(result.state, ctx, pool, depth - 1, deadline, visited)
        if tail is not None:
            return [step] + tail
    return None


def _hammer_moves(state: ProofState, ctx: FactContext, pool: list[str]):
    for tactic in _HAMMER_TACTICS:
        if tactic == "elim":
            for fname in pool:
                if isinstance(ctx.facts.get(fname), Or):
                    yield ProofStep("elim", (fname,))
        elif tactic == "apply":
            for fname in pool:
                yield ProofStep("apply", (fname,))
        else:
            yield ProofStep(tactic)


# ---------------------------------------------------------------------------
# Sessions and the in-process backend
# ---------------------------------------------------------------------------

@dataclass
class Session:
    id: str
    theory: str
    current: ProofState
    history: list[tuple[ProofStep, ProofState]]


@dataclass(frozen=True)
class _Snapshot:
    theory: str
    state: ProofState
    history: tuple[tuple[ProofStep, ProofState], ...]


class ToyProver:
    """In-process reference backend.

    The wire protocol server wraps an instance of this class; a remote client
    exposes the same methods, so the search engine is backend-agnostic.
    Theories are cached by content digest; sessions are single-owner but the
    registry itself is safe to share across threads.
    """

    def __init__(self):
        self._theories: dict[str, Theory] = {}
        self._digests: dict[str, str] = {}
        self._sessions: dict[str, Session] = {}
        self._snapshots: dict[str, _Snapshot] = {}
        self._counter = itertools.count()
        self._lock = threading.Lock()

    # -- theories ----------------------------------------------------------

    def load_theory(self, source: str) -> str:
        digest = hashlib.sha256(source.encode()).hexdigest()
        with self._lock:
            cached = self._digests.get(digest)
            if cached is not None:
                return cached
        theory = load_theory(source)
        with self._lock:
            self._digests[digest] = theory.name
            self._theories[theory.name] = theory
        return theory.name

    def has_theory_digest(self, source: str) -> bool:
        digest = hashlib.sha256(source.encode()).hexdigest()
        with self._lock:
            return digest in self._digests

    def theory(self, name: str) -> Theory:
        with self._lock:
            if name not in self._theories:
                raise UnknownTheoremError(f"theory {name!r} is not loaded")
            return self._theories[name]

    # -- sessions ----------------------------------------------------------

    def _new_id(self, prefix: str) -> str:
        return f"{prefix}{next(self._counter)}"

    def _session(self, sid: str) -> Session:
        with self._lock:
            session = self._sessions.get(sid)
        if session is None:
            raise UnknownSessionError(f"no session {sid!r}")
        return session

    def start(self, theory_name: str, theorem_id: str) -> str:
        state = init_goal(self.theory(theory_name), theorem_id)
        sid = self._new_id("s")
        with self._lock:
            self._sessions[sid] = Session(sid, theory_name, state, [])
        return sid

    def state(self, sid: str) -> ProofState:
        return self._session(sid).current

    def apply(self, sid: str, step: ProofStep | str,
              timeout_ms: int | None = None) -> StepResult:
        session = self._session(sid)
        if isinstance(step, str):
            try:
                step = parse_step(step)
            except ParseError as e:
                return StepResult.failure("parse_error", str(e))
        result = apply_step(session.current, step, timeout_ms or DEFAULT_STEP_BUDGET_MS)
        if result.ok:
            session.history.append((step, session.current))
            session.current = result.state
        return result

    def clone(self, sid: str) -> str:
        session = self._session(sid)
        token = self._new_id("c")
        with self._lock:
            self._snapshots[token] = _Snapshot(
                session.theory, session.current, tuple(session.history))
        return token

    def restore(self, token: str, session: str | None = None) -> str:
        with self._lock:
            snap = self._snapshots.get(token)
        if snap is None:
            raise UnknownSessionError(f"no snapshot {token!r}")
        if session is None:
            sid = self._new_id("s")
            with self._lock:
                self._sessions[sid] = Session(sid, snap.theory, snap.state, list(snap.history))
            return sid
        target = self._session(session)
        target.current = snap.state
        target.history = list(snap.history)
        target.theory = snap.theory
        return session

    # -- oracles -----------------------------------------------------------

    def counterexample(self, sid: str, atom_limit: int = 16) -> CexResult:
        return check_counterexample(self._session(sid).current, atom_limit)

    def counterexample_at(self, token: str, atom_limit: int = 16) -> CexResult:
        with self._lock:
            snap = self._snapshots.get(token)
        if snap is None:
            raise UnknownSessionError(f"no snapshot {token!r}")
        return check_counterexample(snap.state, atom_limit)

    def hammer(self, sid: str, config: HammerConfig = HammerConfig(),
               pool: list[str] | None = None) -> HammerResult:
        return toy_hammer(self._session(sid).current, config, pool)

    def hammer_at(self, token: str, config: HammerConfig = HammerConfig(),
                  pool: list[str] | None = None) -> HammerResult:
        with self._lock:
            snap = self._snapshots.get(token)
        if snap is None:
            raise UnknownSessionError(f"no snapshot {token!r}")
        return toy_hammer(snap.state, config, pool)

    def close(self) -> None:
        with self._lock:
            self._sessions.clear()
            self._snapshots.clear()
