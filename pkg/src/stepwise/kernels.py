"""Numeric hot kernels: truth-table satisfiability scan and edit distance.

The two inner loops that dominate runtime - enumerating all 2^n assignments
while hunting for a counterexample, and Levenshtein distance over a premise
pool - are compiled with numba when available. A pure-numpy path implements
the same contracts; select it with ``STEPWISE_KERNELS=numpy`` (or call
``set_backend``). ``benchmarks/kernel_bench.py`` compares the two.

Formulas are compiled to a postfix bytecode over int64: values >= 0 push the
bit of that atom index, negative values are operators (see the OP_ constants).
Atom index ``i`` reads bit ``n_atoms - 1 - i`` of the assignment counter, so
counting k = 0, 1, ... enumerates assignments in lexicographic atom order
with false before true.
"""

from __future__ import annotations

import os

import numpy as np

from .formulas import And, Atom, Const, Formula, Implies, Not, Or

OP_TRUE = -1
OP_FALSE = -2
OP_NOT = -3
OP_AND = -4
OP_OR = -5
OP_IMP = -6

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


_BACKEND = "numpy"
if HAS_NUMBA and os.environ.get("STEPWISE_KERNELS", "numba").lower() != "numpy":
    _BACKEND = "numba"


def get_backend() -> str:
    return _BACKEND


def set_backend(name: str) -> None:
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown kernel backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise ValueError("numba is not available")
    _BACKEND = name


# ---------------------------------------------------------------------------
# Bytecode compilation
# ---------------------------------------------------------------------------

def compile_conjecture(premises: list[Formula], goal: Formula,
                       atom_index: dict[str, int]) -> np.ndarray:
    """Bytecode for ``premise_1 & ... & premise_m & ~goal``.

    A satisfying assignment of this program is exactly a counterexample to
    the subgoal: it makes every premise true and the goal false.
    """
    code: list[int] = []
    for i, p in enumerate(premises):
        _emit(p, atom_index, code)
        if i > 0:
            code.append(OP_AND)
    _emit(goal, atom_index, code)
    code.append(OP_NOT)
    if premises:
        code.append(OP_AND)
    return np.asarray(code, dtype=np.int64)


def _emit(f: Formula, atom_index: dict[str, int], out: list[int]) -> None:
    if isinstance(f, Atom):
        out.append(atom_index[f.name])
    elif isinstance(f, Const):
        out.append(OP_TRUE if f.value else OP_FALSE)
    elif isinstance(f, Not):
        _emit(f.operand, atom_index, out)
        out.append(OP_NOT)
    elif isinstance(f, And):
        _emit(f.left, atom_index, out)
        _emit(f.right, atom_index, out)
        out.append(OP_AND)
    elif isinstance(f, Or):
        _emit(f.left, atom_index, out)
        _emit(f.right, atom_index, out)
        out.append(OP_OR)
    elif isinstance(f, Implies):
        _emit(f.left, atom_index, out)
        _emit(f.right, atom_index, out)
        out.append(OP_IMP)
    else:
        raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Truth-table scan
# ---------------------------------------------------------------------------

@njit(cache=True)
def _first_sat_njit(code: np.ndarray, n_atoms: int) -> int:  # pragma: no cover
    stack = np.empty(len(code) + 1, dtype=np.bool_)
    for k in range(1 << n_atoms):
        sp = 0
        for op in code:
            if op >= 0:
                stack[sp] = ((k >> (n_atoms - 1 - op)) & 1) == 1
                sp += 1
            elif op == OP_TRUE:
                stack[sp] = True
                sp += 1
            elif op == OP_FALSE:
                stack[sp] = False
                sp += 1
            elif op == OP_NOT:
                stack[sp - 1] = not stack[sp - 1]
            else:
                b = stack[sp - 1]
                a = stack[sp - 2]
                sp -= 1
                if op == OP_AND:
                    stack[sp - 1] = a and b
                elif op == OP_OR:
                    stack[sp - 1] = a or b
                else:
                    stack[sp - 1] = (not a) or b
        if stack[0]:
            return k
    return -1


def _first_sat_numpy(code: np.ndarray, n_atoms: int) -> int:
    rows = 1 << n_atoms
    k = np.arange(rows, dtype=np.uint32)
    stack: list[np.ndarray] = []
    for op in code:
        if op >= 0:
            stack.append(((k >> np.uint32(n_atoms - 1 - op)) & 1).astype(bool))
        elif op == OP_TRUE:
            stack.append(np.ones(rows, dtype=bool))
        elif op == OP_FALSE:
            stack.append(np.zeros(rows, dtype=bool))
        elif op == OP_NOT:
            stack[-1] = ~stack[-1]
        else:
            b = stack.pop()
            a = stack.pop()
            if op == OP_AND:
                stack.append(a & b)
            elif op == OP_OR:
                stack.append(a | b)
            else:
                stack.append(~a | b)
    mask = stack[0]
    idx = int(np.argmax(mask))
    return idx if mask[idx] else -1


def first_satisfying(code: np.ndarray, n_atoms: int) -> int:
    """Index of the smallest satisfying assignment, or -1 if unsatisfiable."""
    if _BACKEND == "numba":
        return int(_first_sat_njit(code, n_atoms))
    return _first_sat_numpy(code, n_atoms)


def assignment_from_index(k: int, atom_order: list[str]) -> dict[str, bool]:
    n = len(atom_order)
    return {name: bool((k >> (n - 1 - i)) & 1) for i, name in enumerate(atom_order)}


# ---------------------------------------------------------------------------
# Levenshtein distance
# ---------------------------------------------------------------------------

@njit(cache=True)
def _lev_njit(a: np.ndarray, b: np.ndarray) -> int:  # pragma: no cover
    prev = np.arange(len(b) + 1, dtype=np.int64)
    cur = np.empty(len(b) + 1, dtype=np.int64)
    for i in range(1, len(a) + 1):
        cur[0] = i
        ca = a[i - 1]
        for j in range(1, len(b) + 1):
            cost = 0 if b[j - 1] == ca else 1
            d = prev[j - 1] + cost
            if prev[j] + 1 < d:
                d = prev[j] + 1
            if cur[j - 1] + 1 < d:
                d = cur[j - 1] + 1
            cur[j] = d
        prev, cur = cur, prev
    return prev[len(b)]


def _lev_numpy(a: np.ndarray, b: np.ndarray) -> int:
    # Row-at-a-time DP; the in-row insertion recurrence cur[j] =
    # min(base[j], cur[j-1] + 1) is a prefix-min scan of base[j] - j.
    offsets = np.arange(len(b) + 1, dtype=np.int64)
    prev = offsets.copy()
    for i in range(1, len(a) + 1):
        base = np.empty(len(b) + 1, dtype=np.int64)
        base[0] = i
        base[1:] = np.minimum(prev[:-1] + (b != a[i - 1]), prev[1:] + 1)
        prev = np.minimum.accumulate(base - offsets) + offsets
    return int(prev[-1])


def encode_text(text: str) -> np.ndarray:
    return np.array([ord(c) for c in text], dtype=np.uint32)


def levenshtein(a: str | np.ndarray, b: str | np.ndarray) -> int:
    """Unit-cost Levenshtein distance; accepts strings or encoded arrays."""
    if isinstance(a, str):
        a = encode_text(a)
    if isinstance(b, str):
        b = encode_text(b)
    if len(a) == 0:
        return len(b)
    if len(b) == 0:
        return len(a)
    if _BACKEND == "numba":
        return int(_lev_njit(a, b))
    return _lev_numpy(a, b)


def warmup() -> None:
    """Force one compilation of each jitted kernel (no-op on the numpy path)."""
    if _BACKEND == "numba":
        _first_sat_njit(np.asarray([0, OP_NOT], dtype=np.int64), 1)
        _lev_njit(encode_text("ab"), encode_text("ba"))
