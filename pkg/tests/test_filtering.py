from stepwise.core import Candidate, FactContext, ProofState, ProofStep, Subgoal
from stepwise.filtering import (
    FilterConfig,
    SeenSet,
    filter_states,
    is_duplicate,
    states_equivalent,
)
from stepwise.formulas import parse_formula
from stepwise.prover import check_counterexample


def state_of(goal, hyps=(), ctx=None):
    sub = Subgoal(tuple(parse_formula(h) for h in hyps), parse_formula(goal))
    return ProofState((sub,), ctx if ctx is not None else FactContext({}))


def cand(n=0):
    return Candidate(ProofStep("intro"), -float(n + 1))


def test_is_duplicate_inserts_on_miss():
    seen = SeenSet()
    state = state_of("p")
    assert is_duplicate(state, seen) is False
    assert is_duplicate(state, seen) is True


def test_is_duplicate_catches_permuted_subgoals():
    seen = SeenSet()
    a = ProofState((Subgoal((), parse_formula("p")), Subgoal((), parse_formula("q"))))
    b = ProofState((Subgoal((), parse_formula("q")), Subgoal((), parse_formula("p"))))
    assert not is_duplicate(a, seen)
    assert is_duplicate(b, seen)


def test_is_duplicate_distinguishes_hypotheses():
    seen = SeenSet()
    assert not is_duplicate(state_of("r", ["p"]), seen)
    assert not is_duplicate(state_of("r", ["q"]), seen)


def test_filter_drops_duplicates_then_counterexamples():
    seen = SeenSet()
    valid = state_of("p", ["p"])
    falsifiable = state_of("q")
    items = [(valid, cand(0)), (valid, cand(1)), (falsifiable, cand(2))]
    kept, stats = filter_states(items, seen, check_counterexample)
    assert [c.log_prob for _, c in kept] == [-1.0]
    assert stats.duplicates_rejected == 1
    assert stats.counterexamples_rejected == 1
    assert stats.unknown_oracle == 0
    assert seen.stats.duplicates_rejected == 1


def test_filter_keeps_unknown_and_counts_it():
    seen = SeenSet()
    wide = state_of("y", [f"x{i}" for i in range(6)])
    oracle = lambda s: check_counterexample(s, atom_limit=3)
    kept, stats = filter_states([(wide, cand())], seen, oracle)
    assert len(kept) == 1
    assert stats.unknown_oracle == 1


def test_filter_all_fresh_valid_kept_in_order():
    seen = SeenSet()
    items = [(state_of("p", ["p"]), cand(0)), (state_of("q", ["q"]), cand(1))]
    kept, stats = filter_states(items, seen, check_counterexample)
    assert [c.log_prob for _, c in kept] == [-1.0, -2.0]
    assert stats.duplicates_rejected == stats.counterexamples_rejected == 0


def test_filter_drop_is_order_monotone():
    falsifiable = state_of("q")
    for position in (0, 1, 2):
        seen = SeenSet()
        items = [(state_of(f"g{i}", [f"g{i}"]), cand(i)) for i in range(3)]
        items.insert(position, (falsifiable, cand(9)))
        kept, stats = filter_states(items, seen, check_counterexample)
        assert stats.counterexamples_rejected == 1
        assert all(s is not falsifiable for s, _ in kept)


def test_filter_respects_disabled_checks():
    seen = SeenSet()
    falsifiable = state_of("q")
    items = [(falsifiable, cand(0)), (falsifiable, cand(1))]
    config = FilterConfig(check_duplicates=False, check_counterexamples=False)
    kept, stats = filter_states(items, seen, check_counterexample, config)
    assert len(kept) == 2
    assert stats.duplicates_rejected == stats.counterexamples_rejected == 0


# -- semantic equivalence ---------------------------------------------------------

def test_states_equivalent_reflexive():
    ctx = FactContext({})
    s = state_of("p", (), ctx)
    assert states_equivalent(s, s, ctx)


def test_states_equivalent_different_atoms_false():
    ctx = FactContext({})
    assert not states_equivalent(state_of("p", (), ctx), state_of("q", (), ctx), ctx)


def test_states_equivalent_duplicated_subgoal_true():
    # hand-check: each side's goals close in one step with the other side's
    # goals as temporary facts (assumption both ways)
    ctx = FactContext({})
    single = state_of("p", (), ctx)
    doubled = ProofState((Subgoal((), parse_formula("p")),
                          Subgoal((), parse_formula("p"))), ctx)
    assert states_equivalent(single, doubled, ctx)
    assert states_equivalent(doubled, single, ctx)


def test_states_equivalent_one_step_apply_bridge():
    ctx = FactContext({})
    # q closes from temporary fact q; p closes from temporary fact p
    a = state_of("p -> p", (), ctx)
    b = state_of("p -> p", (), ctx)
    assert states_equivalent(a, b, ctx)


def test_equivalence_dedup_behind_flag():
    ctx = FactContext({})
    seen = SeenSet(retain_states=True)
    config = FilterConfig(use_equivalence=True, check_counterexamples=False)
    single = state_of("p", (), ctx)
    doubled = ProofState((Subgoal((), parse_formula("p")),
                          Subgoal((), parse_formula("p"))), ctx)
    kept1, _ = filter_states([(single, cand(0))], seen, check_counterexample, config)
    kept2, stats2 = filter_states([(doubled, cand(1))], seen, check_counterexample, config)
    assert len(kept1) == 1
    assert kept2 == []
    assert stats2.duplicates_rejected == 1
