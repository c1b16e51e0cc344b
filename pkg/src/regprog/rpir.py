"""Register-program IR.

A program is a straight-line list of additive instructions over banks of
registers, each bank holding residues modulo its own prime:

* :class:`BasicUpdate` adds ``scale * payload(bank registers)`` to one or
  more target registers of the same bank; the payload never reads a target.
* :class:`InputAccess` adds ``coeff * x_j`` to one or more registers of the
  input bank.  One access counts as one recursive call to ``x_j`` no matter
  how many registers it delivers to.

Both forms are invertible by negation, so :func:`invert` is exact.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .field import GF, is_prime
from .poly import PolyError, PolyParseError, SparsePoly, parse_poly

INT64_SAFE = 1 << 31


class StructureError(ValueError):
    """Program references something that does not exist or breaks an IR invariant."""


class CompositionError(ValueError):
    pass


class ProgramParseError(ValueError):
    def __init__(self, line: int, column: int, reason: str):
        super().__init__(f"line {line}, column {column}: {reason}")
        self.line = line
        self.column = column
        self.reason = reason


@dataclass(frozen=True)
class RegisterBank:
    name: str
    modulus: int
    size: int


@dataclass(frozen=True)
class BasicUpdate:
    bank: int
    targets: tuple  # ((register, scale), ...)
    payload: SparsePoly

    def inverse(self, modulus: int) -> "BasicUpdate":
        return BasicUpdate(self.bank, tuple((r, -c % modulus) for r, c in self.targets),
                           self.payload)


@dataclass(frozen=True)
class InputAccess:
    input: int  # 0-based input index
    bank: int
    deliveries: tuple  # ((register, coefficient), ...)

    def inverse(self, modulus: int) -> "InputAccess":
        return InputAccess(self.input, self.bank,
                           tuple((r, -c % modulus) for r, c in self.deliveries))


@dataclass(frozen=True)
class ResourceProfile:
    recursive_calls: tuple  # per input index
    basic_instructions: int
    registers: tuple  # ((bank name, size), ...)
    payload_monomials: int
    access_groups: int = 0

    @property
    def max_calls(self) -> int:
        return max(self.recursive_calls, default=0)

    @property
    def total_registers(self) -> int:
        return sum(size for _, size in self.registers)

    @property
    def instructions(self) -> int:
        return self.basic_instructions + sum(self.recursive_calls)


@dataclass(frozen=True)
class Program:
    name: str
    banks: tuple
    num_inputs: int
    input_bank: int
    instructions: tuple
    outputs: tuple  # output k lives in register outputs[k] = (bank, index)
    input_range: int | None = None  # inputs are drawn from range(input_range)
    readout: int | None = None  # output deltas are reduced mod this at the boundary
    oracle: str | None = None

    def __post_init__(self):
        if self.input_range is None and self.banks:
            object.__setattr__(self, "input_range", self.banks[self.input_bank].modulus)
        _validate(self)
        _widen_payloads(self)

    def bank_index(self, name: str) -> int:
        for i, b in enumerate(self.banks):
            if b.name == name:
                return i
        raise KeyError(name)

    @property
    def output_modulus(self) -> int:
        if not self.outputs:
            return self.banks[self.input_bank].modulus
        return self.banks[self.outputs[0][0]].modulus

    @property
    def result_modulus(self) -> int:
        return self.readout or self.output_modulus

    @cached_property
    def _compiled(self):
        return _compile(self)

    def resources(self) -> ResourceProfile:
        return resources(self)


def _validate(P: Program):
    names = [b.name for b in P.banks]
    if len(set(names)) != len(names):
        raise StructureError(f"duplicate bank names in {names}")
    for b in P.banks:
        if b.size < 1:
            raise StructureError(f"bank {b.name} has no registers")
        if not is_prime(b.modulus):
            raise StructureError(f"bank {b.name} modulus {b.modulus} is not prime")
    if not 0 <= P.input_bank < len(P.banks):
        raise StructureError("input bank out of range")
    if P.num_inputs < 0:
        raise StructureError("negative input count")
    if len(set(P.outputs)) != len(P.outputs):
        raise StructureError("outputs must be distinct registers")
    for b, r in P.outputs:
        if not (0 <= b < len(P.banks) and 0 <= r < P.banks[b].size):
            raise StructureError(f"output register {(b, r)} out of range")
    seen_payloads = set()
    for pos, ins in enumerate(P.instructions):
        if isinstance(ins, InputAccess):
            if not 0 <= ins.input < P.num_inputs:
                raise StructureError(f"instruction {pos}: input x{ins.input + 1} out of range")
            if ins.bank != P.input_bank:
                raise StructureError(f"instruction {pos}: input access outside the input bank")
            regs = [r for r, _ in ins.deliveries]
        elif isinstance(ins, BasicUpdate):
            if not 0 <= ins.bank < len(P.banks):
                raise StructureError(f"instruction {pos}: bank out of range")
            bank = P.banks[ins.bank]
            regs = [r for r, _ in ins.targets]
            if id(ins.payload) not in seen_payloads:
                if ins.payload.modulus != bank.modulus:
                    raise StructureError(f"instruction {pos}: payload field differs from bank")
                if ins.payload.num_vars > bank.size:
                    raise StructureError(f"instruction {pos}: payload reads past bank end")
                seen_payloads.add(id(ins.payload))
            if set(regs) & ins.payload.variables():
                raise StructureError(f"instruction {pos}: payload references its own target")
        else:
            raise StructureError(f"instruction {pos}: unknown instruction {ins!r}")
        if not regs:
            raise StructureError(f"instruction {pos}: no target registers")
        if len(set(regs)) != len(regs):
            raise StructureError(f"instruction {pos}: repeated target register")
        size = P.banks[ins.bank].size
        if any(not 0 <= r < size for r in regs):
            raise StructureError(f"instruction {pos}: register out of range")


def _widen_payloads(P: Program):
    # payloads see the whole bank, so a program built before its bank grew
    # compares equal to its parsed text form
    sizes = [b.size for b in P.banks]
    if all(not isinstance(ins, BasicUpdate) or ins.payload.num_vars == sizes[ins.bank]
           for ins in P.instructions):
        return
    wide: dict = {}
    out = []
    for ins in P.instructions:
        if isinstance(ins, BasicUpdate) and ins.payload.num_vars != sizes[ins.bank]:
            key = id(ins.payload)
            if key not in wide:
                q = ins.payload
                wide[key] = SparsePoly(q.terms, sizes[ins.bank], q.field)
            ins = BasicUpdate(ins.bank, ins.targets, wide[key])
        out.append(ins)
    object.__setattr__(P, "instructions", tuple(out))


# -- resources ------------------------------------------------------------------

def resources(P: Program) -> ResourceProfile:
    calls = [0] * P.num_inputs
    basic = 0
    monos = 0
    groups = 0
    prev_access = False
    for ins in P.instructions:
        if isinstance(ins, InputAccess):
            calls[ins.input] += 1
            if not prev_access:
                groups += 1
            prev_access = True
        else:
            basic += len(ins.targets)
            monos += len(ins.payload.terms)
            prev_access = False
    return ResourceProfile(tuple(calls), basic, tuple((b.name, b.size) for b in P.banks),
                           monos, groups)


# -- register state -------------------------------------------------------------

@dataclass(frozen=True)
class RegisterState:
    """Per-bank register contents, as residues."""

    values: tuple  # one tuple of ints per bank

    @classmethod
    def zeros(cls, P: Program) -> "RegisterState":
        return cls(tuple((0,) * b.size for b in P.banks))

    @classmethod
    def random(cls, P: Program, rng: np.random.Generator) -> "RegisterState":
        return cls(tuple(tuple(rng.integers(0, b.modulus, b.size).tolist())
                         if b.modulus <= INT64_SAFE
                         else tuple(_randint(rng, b.modulus) for _ in range(b.size))
                         for b in P.banks))

    @classmethod
    def from_lists(cls, P: Program, values: Sequence[Sequence[int]]) -> "RegisterState":
        if len(values) != len(P.banks):
            raise StructureError("one value list per bank is required")
        out = []
        for b, vals in zip(P.banks, values):
            if len(vals) != b.size:
                raise StructureError(f"bank {b.name} needs {b.size} values")
            out.append(tuple(int(v) % b.modulus for v in vals))
        return cls(tuple(out))

    def __getitem__(self, reg):
        b, r = reg
        return self.values[b][r]


def _randint(rng: np.random.Generator, m: int) -> int:
    if m <= INT64_SAFE:
        return int(rng.integers(0, m))
    # wide moduli: rejection-free enough for testing purposes
    return int.from_bytes(rng.bytes((m.bit_length() + 7) // 8 + 8), "little") % m


# -- execution ------------------------------------------------------------------

def _dtype(m: int):
    return np.int64 if m < INT64_SAFE else object


def _targets(pairs, m):
    """Single targets stay as pairs; fan-outs become (index array, coefficient column)."""
    if len(pairs) <= 2:
        return pairs
    rs = np.array([r for r, _ in pairs], dtype=np.intp)
    cs = np.array([c for _, c in pairs], dtype=_dtype(m))[:, None]
    return (rs, cs)


def _compile(P: Program):
    plans: dict = {}
    code = []
    for ins in P.instructions:
        m = P.banks[ins.bank].modulus
        if isinstance(ins, InputAccess):
            code.append((0, ins.bank, ins.input, _targets(ins.deliveries, m), m))
        else:
            key = id(ins.payload)
            plan = plans.get(key)
            if plan is None:
                const = ins.payload.terms.get((), 0)
                monos = [(c, mono) for mono, c in ins.payload.terms.items() if mono]
                plan = plans[key] = (const, monos)
            code.append((1, ins.bank, plan, _targets(ins.targets, m), m))
    return code


def _eval_plan(plan, arr, p, batch, wide, powers):
    """Evaluate a payload.  ``powers[v]`` caches powers of register v across
    instructions and is invalidated by the caller whenever v is written.
    Wide (object) arrays hold Python ints, so reductions are deferred."""
    const, monos = plan

    def power(v, e):
        seq = powers.get(v)
        if seq is None:
            seq = powers[v] = [None, arr[v]]
        while len(seq) <= e:
            seq.append(seq[-1] * arr[v] % p)
        return seq[e]

    total = None
    for c, mono in monos:
        it = iter(mono)
        v, e = next(it)
        t = power(v, e)
        if wide:
            for v, e in it:
                t = t * power(v, e)
            term = c * t if c != 1 else t
            total = term if total is None else total + term
            continue
        for v, e in it:
            t = t * power(v, e) % p
        total = (c * t) % p if total is None else (total + c * t) % p
    if total is None:
        return np.full(batch, const, dtype=object if wide else np.int64)
    if const:
        total = total + const
    return total % p


def run_batch(P: Program, state: list, x: np.ndarray) -> list:
    """Run ``P`` on a batch.  ``state[b]`` has shape (bank size, B); ``x`` is (n, B).

    Arrays are updated in place and returned.
    """
    batch = x.shape[1] if x.ndim == 2 else (state[0].shape[1] if state else 1)
    reduced: dict = {}
    caches = [dict() for _ in state]
    wide = [a.dtype == object for a in state]
    for kind, b, arg, regs, m in P._compiled:
        arr = state[b]
        cache = caches[b]
        if kind == 0:
            val = reduced.get((b, arg))
            if val is None:
                row = x[arg] if not wide[b] else x[arg].astype(object)
                val = reduced[(b, arg)] = np.asarray(row % m, dtype=arr.dtype)
        else:
            val = _eval_plan(arg, arr, m, batch, wide[b], cache)
        if isinstance(regs, tuple) and len(regs) == 2 and isinstance(regs[0], np.ndarray):
            rs, cs = regs
            arr[rs] = (arr[rs] + cs * val) % m
            for r in rs.tolist():
                cache.pop(r, None)
        else:
            for r, c in regs:
                arr[r] = (arr[r] + c * val) % m
                cache.pop(r, None)
    return state


def _state_arrays(P: Program, rows: Sequence[RegisterState]) -> list:
    arrays = []
    for b, bank in enumerate(P.banks):
        dt = _dtype(bank.modulus)
        arr = np.empty((bank.size, len(rows)), dtype=dt)
        for j, st in enumerate(rows):
            arr[:, j] = st.values[b]
        arrays.append(arr)
    return arrays


def _input_array(P: Program, xs: Sequence[Sequence[int]]) -> np.ndarray:
    dt = np.int64 if (P.input_range or 2) < INT64_SAFE else object
    arr = np.zeros((P.num_inputs, len(xs)), dtype=dt)
    for j, x in enumerate(xs):
        if len(x) != P.num_inputs:
            raise StructureError(f"expected {P.num_inputs} inputs, got {len(x)}")
        arr[:, j] = [int(v) for v in x]
    return arr


def execute(P: Program, init: RegisterState, x: Sequence[int]):
    """Run ``P`` once; returns ``(final_state, profile)``."""
    state = _state_arrays(P, [init])
    run_batch(P, state, _input_array(P, [x]))
    final = RegisterState(tuple(tuple(int(v) for v in arr[:, 0]) for arr in state))
    return final, resources(P)


def output_deltas(P: Program, init: RegisterState, final: RegisterState) -> list:
    """Output deltas after the boundary readout convention."""
    out = []
    for b, r in P.outputs:
        m = P.banks[b].modulus
        d = (final.values[b][r] - init.values[b][r]) % m
        out.append(d % P.readout if P.readout else d)
    return out


# -- inversion ------------------------------------------------------------------

def invert(P: Program) -> Program:
    mods = [b.modulus for b in P.banks]
    body = tuple(ins.inverse(mods[ins.bank]) for ins in reversed(P.instructions))
    return replace(P, instructions=body, name=_toggle(P.name, ".inv", suffix=True),
                   oracle=P.oracle and _toggle(P.oracle, "neg ", suffix=False))


def _toggle(text: str, mark: str, suffix: bool) -> str:
    if suffix:
        return text[:-len(mark)] if text.endswith(mark) else text + mark
    return text[len(mark):] if text.startswith(mark) else mark + text


# -- cleanness ------------------------------------------------------------------

@dataclass
class CleanReport:
    passed: bool
    checked: int
    mode: str
    counterexample: dict | None = None

    def __bool__(self):
        return self.passed


EXHAUSTIVE_STATES = 1 << 16
EXHAUSTIVE_INPUTS = 1 << 12


def _all_inputs(P: Program):
    return itertools.product(range(P.input_range), repeat=P.num_inputs)


def verify_clean(P: Program, f: Callable | None = None, trials: int = 200, seed: int = 0,
                 exhaustive: bool | None = None, taus_per_input: int = 1,
                 jobs: int = 1, batch: int = 4096,
                 inputs: Sequence[Sequence[int]] | None = None) -> CleanReport:
    """Check that ``P`` restores every non-output register and adds ``f(x)`` to its outputs.

    Modes: ``full`` enumerates every (initial state, input) pair when that
    space has fewer than 2^16 points; ``inputs`` enumerates every input with
    ``taus_per_input`` random initial states each (used when the input space
    has at most 2^12 points, or when ``exhaustive=True``); otherwise ``random``
    draws ``trials`` random (state, input) pairs.
    """
    if f is None:
        from .oracles import oracle_function
        if P.oracle is None:
            raise ValueError("program has no registered oracle; pass f")
        f = oracle_function(P.oracle)
    rng = np.random.default_rng(seed)
    n_inputs = P.input_range ** P.num_inputs
    n_states = 1
    for b in P.banks:
        n_states *= b.modulus ** b.size
        if n_states * n_inputs >= EXHAUSTIVE_STATES:
            break
    cases: Iterable
    if inputs is not None:
        mode = "given"
        cases = ((RegisterState.random(P, rng), tuple(x))
                 for x in inputs for _ in range(taus_per_input))
    elif exhaustive is not False and n_states * n_inputs < EXHAUSTIVE_STATES:
        mode = "full"
        regs = [(b, r) for b, bank in enumerate(P.banks) for r in range(bank.size)]
        mods = [P.banks[b].modulus for b, _ in regs]

        def gen_full():
            for flat in itertools.product(*[range(m) for m in mods]):
                vals = [[] for _ in P.banks]
                for (b, _), v in zip(regs, flat):
                    vals[b].append(v)
                st = RegisterState(tuple(tuple(v) for v in vals))
                for x in _all_inputs(P):
                    yield st, x
        cases = gen_full()
    elif exhaustive or (exhaustive is None and n_inputs <= EXHAUSTIVE_INPUTS):
        mode = "inputs"
        cases = ((RegisterState.random(P, rng), x)
                 for x in _all_inputs(P) for _ in range(taus_per_input))
    else:
        mode = "random"
        cases = ((RegisterState.random(P, rng),
                  tuple(_randint(rng, P.input_range) for _ in range(P.num_inputs)))
                 for _ in range(trials))

    chunks = []
    while True:
        chunk = list(itertools.islice(cases, batch))
        if not chunk:
            break
        chunks.append(chunk)
    if jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(lambda c: _check_chunk(P, f, c), chunks))
    else:
        results = [_check_chunk(P, f, c) for c in chunks]
    checked = 0
    for count, cex in results:
        checked += count
        if cex is not None:
            return CleanReport(False, checked, mode, cex)
    return CleanReport(True, checked, mode)


def _check_chunk(P: Program, f: Callable, chunk) -> tuple:
    inits = [st for st, _ in chunk]
    xs = [x for _, x in chunk]
    state = _state_arrays(P, inits)
    before = [a.copy() for a in state]
    run_batch(P, state, _input_array(P, xs))
    out_set = set(P.outputs)
    R = P.result_modulus
    expected = [[int(v) % R for v in f(x)] for x in xs]
    bad = np.zeros(len(chunk), dtype=bool)
    for b, bank in enumerate(P.banks):
        for r in range(bank.size):
            if (b, r) in out_set:
                continue
            bad |= np.asarray(state[b][r] != before[b][r], dtype=bool)
    deltas = []
    for k, (b, r) in enumerate(P.outputs):
        m = P.banks[b].modulus
        d = (state[b][r] - before[b][r]) % m
        if P.readout:
            d = d % P.readout
        deltas.append(d)
        want = np.array([e[k] for e in expected], dtype=d.dtype)
        bad |= np.asarray(d != want, dtype=bool)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        final = RegisterState(tuple(tuple(int(v) for v in a[:, j]) for a in state))
        restored = [[(b, r) for r in range(bank.size)
                     if (b, r) not in out_set and final.values[b][r] != inits[j].values[b][r]]
                    for b, bank in enumerate(P.banks)]
        return j + 1, {
            "init": inits[j].values, "x": tuple(xs[j]), "final": final.values,
            "expected": expected[j], "deltas": [int(d[j]) for d in deltas],
            "unrestored": [reg for regs in restored for reg in regs],
        }
    return len(chunk), None


# -- composition ----------------------------------------------------------------

def written_registers(P: Program) -> set:
    out = set()
    for ins in P.instructions:
        regs = ins.deliveries if isinstance(ins, InputAccess) else ins.targets
        out.update((ins.bank, r) for r, _ in regs)
    return out


def read_registers(P: Program) -> set:
    out = set()
    seen = set()
    for ins in P.instructions:
        if isinstance(ins, BasicUpdate) and id(ins.payload) not in seen:
            seen.add(id(ins.payload))
            out.update((ins.bank, v) for v in ins.payload.variables())
        elif isinstance(ins, BasicUpdate):
            out.update((ins.bank, v) for v in ins.payload.variables())
    return out


def write_only_outputs(P: Program) -> bool:
    return not (set(P.outputs) & read_registers(P))


def access_groups(instructions: Sequence) -> list:
    """Split into alternating runs: ``[(is_access_run, [instructions]), ...]``."""
    runs = []
    for ins in instructions:
        is_acc = isinstance(ins, InputAccess)
        if runs and runs[-1][0] == is_acc:
            runs[-1][1].append(ins)
        else:
            runs.append((is_acc, [ins]))
    return runs


def _merge_pairs(pairs: Iterable, m: int) -> tuple:
    acc: dict = {}
    for r, c in pairs:
        acc[r] = (acc.get(r, 0) + c) % m
    return tuple((r, c) for r, c in acc.items() if c)


def compose(outer: Program, inner: Program, binding: Mapping[int, int] | None = None,
            name: str | None = None) -> Program:
    """Feed ``inner``'s outputs into ``outer``'s inputs.

    Each maximal run of consecutive input accesses in ``outer`` is one call
    to ``inner``.  ``binding[j] = k`` means outer input ``j`` reads inner
    output ``k``.  When inner's output registers are write-only, inner is
    inlined once per call with its output contributions redirected (and
    scaled) onto the outer delivery targets.  Otherwise the call is realized
    as compute / copy / uncompute / uncopy, which costs two inlinings.
    """
    if binding is None:
        if outer.num_inputs > len(inner.outputs):
            raise CompositionError("inner has fewer outputs than outer has inputs")
        binding = {j: j for j in range(outer.num_inputs)}
    used = {ins.input for ins in outer.instructions if isinstance(ins, InputAccess)}
    for j in used:
        if j not in binding:
            raise CompositionError(f"outer input x{j + 1} is not bound")
        if not 0 <= binding[j] < len(inner.outputs):
            raise CompositionError(f"binding x{j + 1} -> output {binding[j]} out of range")
    if not inner.outputs:
        raise CompositionError("inner program has no outputs")
    out_banks = {b for b, _ in inner.outputs}
    if len(out_banks) != 1:
        raise CompositionError("inner outputs must share one bank")
    ob = out_banks.pop()
    ib_out = outer.input_bank
    p_in = outer.banks[ib_out].modulus
    if inner.banks[ob].modulus != p_in:
        raise CompositionError(
            f"outer input field F_{p_in} differs from inner output field F_{inner.banks[ob].modulus}")
    if inner.readout is not None and inner.readout != p_in:
        raise CompositionError("inner readout convention cannot be composed")
    fast = write_only_outputs(inner)
    out_index = {reg: k for k, reg in enumerate(inner.outputs)}

    # register hosting
    banks = [list(b.__dict__.values()) for b in outer.banks]  # [name, modulus, size]
    protected = {(b, r) for b, r in outer.outputs}
    for ins in outer.instructions:
        if isinstance(ins, InputAccess):
            protected.update((ins.bank, r) for r, _ in ins.deliveries)
    host_bank = {}
    for i, bank in enumerate(inner.banks):
        if i == ob:
            host_bank[i] = ib_out
            continue
        same = [h for h, hb in enumerate(banks) if hb[1] == bank.modulus]
        if same:
            host_bank[i] = same[0]
        else:
            names = {hb[0] for hb in banks}
            nm = bank.name
            while nm in names:
                nm += "'"
            banks.append([nm, bank.modulus, 0])
            host_bank[i] = len(banks) - 1
    referenced = written_registers(inner) | read_registers(inner)
    if not fast:
        referenced |= set(inner.outputs)
    need = sorted(reg for reg in referenced if fast is False or reg not in out_index)
    free_iters = {}
    rmap: dict = {}
    for b, r in need:
        h = host_bank[b]
        it = free_iters.get(h)
        if it is None:
            it = free_iters[h] = (i for i in itertools.count()
                                  if (h, i) not in protected)
        slot = next(it)
        banks[h][2] = max(banks[h][2], slot + 1)
        rmap[(b, r)] = (h, slot)
    new_banks = tuple(RegisterBank(*hb) for hb in banks)
    sizes = [b.size for b in new_banks]

    payload_cache: dict = {}

    def rename_payload(b, poly):
        key = id(poly)
        got = payload_cache.get(key)
        if got is None:
            h = host_bank[b]
            got = payload_cache[key] = (poly, poly.rename(lambda v: rmap[(b, v)][1], sizes[h]))
        return got[1]

    # templates: (kind, host bank, work pairs, output pairs [(k, scale)], payload/input)
    templates = []
    for ins in inner.instructions:
        h = host_bank[ins.bank]
        pairs = ins.deliveries if isinstance(ins, InputAccess) else ins.targets
        work, outs = [], []
        for r, c in pairs:
            if fast and (ins.bank, r) in out_index:
                outs.append((out_index[(ins.bank, r)], c))
            else:
                work.append((rmap[(ins.bank, r)][1], c))
        if isinstance(ins, InputAccess):
            templates.append((0, h, tuple(work), outs, ins.input))
        else:
            templates.append((1, h, tuple(work), outs, rename_payload(ins.bank, ins.payload)))

    plain_cache: dict = {}

    def plain(t_index, t):
        got = plain_cache.get(t_index)
        if got is None:
            kind, h, work, _, arg = t
            got = (InputAccess(arg, h, work) if kind == 0 else BasicUpdate(h, work, arg))
            plain_cache[t_index] = got
        return got

    def emit_fast(lam: dict) -> list:
        body = []
        for ti, t in enumerate(templates):
            kind, h, work, outs, arg = t
            if not outs:
                if work:
                    body.append(plain(ti, t))
                continue
            extra = [(T, s * c) for k, s in outs for T, c in lam.get(k, {}).items()]
            pairs = _merge_pairs(list(work) + extra, new_banks[h].modulus) if extra else work
            if not pairs:
                continue
            body.append(InputAccess(arg, h, pairs) if kind == 0 else BasicUpdate(h, pairs, arg))
        return body

    sandwich_fwd = None

    def emit_sandwich(lam: dict) -> list:
        nonlocal sandwich_fwd
        if sandwich_fwd is None:
            sandwich_fwd = [plain(ti, t) for ti, t in enumerate(templates) if t[2]]
        mods = [b.modulus for b in new_banks]
        back = [ins.inverse(mods[ins.bank]) for ins in reversed(sandwich_fwd)]
        per_target: dict = {}
        for k, tmap in lam.items():
            src = rmap[inner.outputs[k]][1]
            for T, c in tmap.items():
                per_target.setdefault(T, {})[src] = c
        copies, uncopies = [], []
        for T, srcs in per_target.items():
            poly = SparsePoly({((s, 1),): c for s, c in srcs.items()}, sizes[ib_out],
                              GF(p_in))
            copies.append(BasicUpdate(ib_out, ((T, 1),), poly))
            uncopies.append(BasicUpdate(ib_out, ((T, p_in - 1),), poly))
        return sandwich_fwd + copies + back + uncopies

    call_cache: dict = {}
    body = []
    for is_acc, run in access_groups(outer.instructions):
        if not is_acc:
            body.extend(run)
            continue
        lam: dict = {}
        for ins in run:
            k = binding[ins.input]
            tmap = lam.setdefault(k, {})
            for r, c in ins.deliveries:
                tmap[r] = (tmap.get(r, 0) + c) % p_in
        lam = {k: {T: c for T, c in tm.items() if c} for k, tm in lam.items()}
        lam = {k: tm for k, tm in lam.items() if tm}
        if not lam:
            continue
        key = tuple(sorted((k, tuple(sorted(tm.items()))) for k, tm in lam.items()))
        emitted = call_cache.get(key)
        if emitted is None:
            emitted = call_cache[key] = emit_fast(lam) if fast else emit_sandwich(lam)
        body.extend(emitted)

    in_bank = host_bank[inner.input_bank]
    return Program(
        name=name or f"{outer.name}∘{inner.name}",
        banks=new_banks,
        num_inputs=inner.num_inputs,
        input_bank=in_bank,
        instructions=tuple(body),
        outputs=outer.outputs,
        input_range=inner.input_range,
        readout=outer.readout,
    )


def parallel(programs: Sequence[Program], output_map: Sequence[Sequence[int]] | None = None,
             num_outputs: int | None = None, name: str = "parallel") -> Program:
    """Run programs side by side on disjoint registers, aligning their access runs.

    The i-th access run of every program is merged into one run, so a
    broadcast input access serves all of them at once.  Programs whose
    outputs are mapped to the same global index share that (write-only)
    output register.
    """
    if not programs:
        raise CompositionError("nothing to run in parallel")
    first = programs[0]
    for P in programs:
        if P.num_inputs != first.num_inputs or P.input_range != first.input_range:
            raise CompositionError("parallel programs must read the same inputs")
        if P.readout != first.readout:
            raise CompositionError("parallel programs must share the readout convention")
        if P.banks[P.input_bank].modulus != first.banks[first.input_bank].modulus:
            raise CompositionError("parallel programs must share the input field")
    if output_map is None:
        output_map, k = [], 0
        for P in programs:
            output_map.append(list(range(k, k + len(P.outputs))))
            k += len(P.outputs)
    total_out = num_outputs if num_outputs is not None else (
        max((k for ks in output_map for k in ks), default=-1) + 1)
    claims: dict = {}
    for i, ks in enumerate(output_map):
        for k in ks:
            claims.setdefault(k, []).append(i)
    for k, owners in claims.items():
        if len(owners) > 1:
            for i in owners:
                if not write_only_outputs(programs[i]):
                    raise CompositionError(f"shared output {k} is read inside program {i}")

    # merged banks, one per modulus, input bank first
    order: list = []
    bank_of_mod: dict = {}
    names: set = set()

    def merged_bank(bank: RegisterBank) -> int:
        if bank.modulus not in bank_of_mod:
            nm = bank.name
            while nm in names:
                nm += "'"
            names.add(nm)
            bank_of_mod[bank.modulus] = len(order)
            order.append([nm, bank.modulus, 0])
        return bank_of_mod[bank.modulus]

    merged_bank(first.banks[first.input_bank])
    host_of_output: dict = {}
    rmaps = []
    for i, P in enumerate(programs):
        rmap = {}
        outs = {reg: output_map[i][k] for k, reg in enumerate(P.outputs)}
        for b, bank in enumerate(P.banks):
            h = merged_bank(bank)
            for r in range(bank.size):
                g = outs.get((b, r))
                if g is not None and g in host_of_output:
                    if host_of_output[g][0] != h:
                        raise CompositionError(f"output {g} mapped across fields")
                    rmap[(b, r)] = host_of_output[g]
                    continue
                rmap[(b, r)] = (h, order[h][2])
                order[h][2] += 1
                if g is not None:
                    host_of_output[g] = rmap[(b, r)]
        rmaps.append(rmap)
    out_h = bank_of_mod[first.output_modulus]
    outputs = []
    for g in range(total_out):
        if g not in host_of_output:
            host_of_output[g] = (out_h, order[out_h][2])
            order[out_h][2] += 1
        outputs.append(host_of_output[g])
    banks = tuple(RegisterBank(*b) for b in order)
    sizes = [b.size for b in banks]
    mods = [b.modulus for b in banks]

    phases_of = []
    for i, P in enumerate(programs):
        rmap = rmaps[i]
        cache: dict = {}
        renamed = []
        for ins in P.instructions:
            h = rmap[(ins.bank, 0)][0]
            if isinstance(ins, InputAccess):
                renamed.append(InputAccess(ins.input, h, tuple(
                    (rmap[(ins.bank, r)][1], c) for r, c in ins.deliveries)))
            else:
                key = id(ins.payload)
                poly = cache.get(key)
                if poly is None:
                    b = ins.bank
                    poly = cache[key] = ins.payload.rename(lambda v: rmap[(b, v)][1], sizes[h])
                renamed.append(BasicUpdate(h, tuple(
                    (rmap[(ins.bank, r)][1], c) for r, c in ins.targets), poly))
        blocks: list = [[]]  # B_0, A_1, B_1, ...
        for is_acc, run in access_groups(renamed):
            if is_acc:
                blocks.append(run)
                blocks.append([])
            else:
                blocks[-1].extend(run)
        phases_of.append(blocks)

    depth = max(len(b) for b in phases_of)
    body = []
    for pos in range(depth):
        chunk = [blk[pos] for blk in phases_of if pos < len(blk)]
        if pos % 2 == 0:
            for c in chunk:
                body.extend(c)
            continue
        acc: dict = {}
        for run in chunk:
            for ins in run:
                slot = acc.setdefault((ins.input, ins.bank), {})
                for r, c in ins.deliveries:
                    slot[r] = (slot.get(r, 0) + c) % mods[ins.bank]
        for (j, b), slot in sorted(acc.items()):
            pairs = tuple((r, c) for r, c in slot.items() if c)
            if pairs:
                body.append(InputAccess(j, b, pairs))
    return Program(
        name=name, banks=banks, num_inputs=first.num_inputs,
        input_bank=bank_of_mod[first.banks[first.input_bank].modulus],
        instructions=tuple(body), outputs=tuple(outputs),
        input_range=first.input_range, readout=first.readout,
    )


# -- text format ----------------------------------------------------------------

def _reg_text(P: Program, b: int, r: int) -> str:
    return f"{P.banks[b].name}[{r}]"


def serialize(P: Program) -> str:
    lines = [f"program {P.name}"]
    head = f"inputs {P.num_inputs} bank {P.banks[P.input_bank].name}"
    if P.input_range != P.banks[P.input_bank].modulus:
        head += f" range={P.input_range}"
    lines.append(head)
    for b in P.banks:
        lines.append(f"bank {b.name} p={b.modulus} size={b.size}")
    if P.readout:
        lines.append(f"readout p={P.readout}")
    if P.oracle:
        lines.append(f"oracle {P.oracle}")
    for k, (b, r) in enumerate(P.outputs):
        lines.append(f"out {_reg_text(P, b, r)} -> {k}")
    rendered: dict = {}
    for ins in P.instructions:
        if isinstance(ins, InputAccess):
            parts = ", ".join(f"{_reg_text(P, ins.bank, r)}*{c}" for r, c in ins.deliveries)
            lines.append(f"acc x{ins.input + 1} : {parts}")
        else:
            name = P.banks[ins.bank].name
            key = (id(ins.payload), ins.bank)
            text = rendered.get(key)
            if text is None:
                text = rendered[key] = ins.payload.render(lambda v: f"{name}[{v}]")
            if len(ins.targets) == 1 and ins.targets[0][1] == 1:
                tgt = _reg_text(P, ins.bank, ins.targets[0][0])
            else:
                tgt = ", ".join(f"{_reg_text(P, ins.bank, r)}*{c}" for r, c in ins.targets)
            lines.append(f"upd {tgt} += {text}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def _parse_reg(tok: str, bank_pos: Mapping[str, int], lineno: int, col: int):
    tok = tok.strip()
    if not tok.endswith("]") or "[" not in tok:
        raise ProgramParseError(lineno, col, f"expected register bank[index], got {tok!r}")
    name, idx = tok[:-1].split("[", 1)
    if name not in bank_pos:
        raise ProgramParseError(lineno, col, f"unknown bank {name!r}")
    if not idx.isdigit():
        raise ProgramParseError(lineno, col, f"bad register index {idx!r}")
    return bank_pos[name], int(idx)


def _parse_scaled(text: str, bank_pos, lineno: int, col0: int, banks) -> list:
    out = []
    col = col0
    for piece in text.split(","):
        lead = len(piece) - len(piece.lstrip())
        c = col + lead
        if "*" in piece:
            reg_s, scale_s = piece.rsplit("*", 1)
            scale_s = scale_s.strip()
            if not scale_s.lstrip("-").isdigit():
                raise ProgramParseError(lineno, c, f"bad coefficient {scale_s!r}")
            scale = int(scale_s)
        else:
            reg_s, scale = piece, 1
        b, r = _parse_reg(reg_s, bank_pos, lineno, c)
        out.append((b, r, scale % banks[b][1]))
        col += len(piece) + 1
    return out


def parse(text: str) -> Program:
    name = None
    inputs = None
    banks: list = []  # [name, modulus, size]
    bank_pos: dict = {}
    readout = None
    oracle = None
    outputs: dict = {}
    body: list = []
    ended = False
    payload_cache: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if ended:
            raise ProgramParseError(lineno, 1, "content after 'end'")
        col0 = len(line) - len(line.lstrip()) + 1
        line = line.strip()
        word, _, rest = line.partition(" ")
        rest_col = col0 + len(word) + 1
        try:
            if word == "program":
                name = rest.strip() or "program"
            elif word == "inputs":
                toks = rest.split()
                if len(toks) < 3 or toks[1] != "bank" or not toks[0].isdigit():
                    raise ProgramParseError(lineno, rest_col, "expected 'inputs <n> bank <name>'")
                rng = None
                for t in toks[3:]:
                    if t.startswith("range=") and t[6:].isdigit():
                        rng = int(t[6:])
                    else:
                        raise ProgramParseError(lineno, rest_col, f"unknown option {t!r}")
                inputs = (int(toks[0]), toks[2], rng)
            elif word == "bank":
                toks = rest.split()
                if len(toks) != 3 or not toks[1].startswith("p=") or not toks[2].startswith("size="):
                    raise ProgramParseError(lineno, rest_col, "expected 'bank <name> p=<p> size=<k>'")
                if toks[0] in bank_pos:
                    raise ProgramParseError(lineno, rest_col, f"duplicate bank {toks[0]!r}")
                bank_pos[toks[0]] = len(banks)
                banks.append([toks[0], int(toks[1][2:]), int(toks[2][5:])])
            elif word == "readout":
                if not rest.startswith("p=") or not rest[2:].strip().isdigit():
                    raise ProgramParseError(lineno, rest_col, "expected 'readout p=<prime>'")
                readout = int(rest[2:])
            elif word == "oracle":
                oracle = rest.strip()
            elif word == "out":
                reg_s, arrow, k_s = rest.partition("->")
                if not arrow or not k_s.strip().isdigit():
                    raise ProgramParseError(lineno, rest_col, "expected 'out <bank>[i] -> <k>'")
                k = int(k_s)
                if k in outputs:
                    raise ProgramParseError(lineno, rest_col, f"output {k} declared twice")
                outputs[k] = _parse_reg(reg_s, bank_pos, lineno, rest_col)
            elif word == "acc":
                head, colon, tail = rest.partition(":")
                head = head.strip()
                if not colon or not head.startswith("x") or not head[1:].isdigit():
                    raise ProgramParseError(lineno, rest_col, "expected 'acc x<j> : ...'")
                j = int(head[1:]) - 1
                pairs = _parse_scaled(tail, bank_pos, lineno,
                                      rest_col + len(rest) - len(tail), banks)
                bset = {b for b, _, _ in pairs}
                if len(bset) != 1:
                    raise ProgramParseError(lineno, rest_col, "deliveries must share one bank")
                body.append(InputAccess(j, bset.pop(), tuple((r, c) for _, r, c in pairs)))
            elif word == "upd":
                tgt, op, poly_s = rest.partition("+=")
                if not op:
                    raise ProgramParseError(lineno, rest_col, "expected '+='")
                pairs = _parse_scaled(tgt, bank_pos, lineno, rest_col, banks)
                bset = {b for b, _, _ in pairs}
                if len(bset) != 1:
                    raise ProgramParseError(lineno, rest_col, "targets must share one bank")
                b = bset.pop()
                bname, p, size = banks[b]
                key = (b, poly_s.strip())
                poly = payload_cache.get(key)
                if poly is None:
                    try:
                        poly = parse_poly(poly_s, num_vars=size, field=GF(p), bank=bname,
                                          column_offset=rest_col + len(tgt) + 1)
                    except PolyParseError as e:
                        raise ProgramParseError(lineno, e.column, str(e).split(": ", 1)[-1])
                    except PolyError as e:
                        raise ProgramParseError(lineno, rest_col, str(e))
                    payload_cache[key] = poly
                targets = tuple((r, c) for _, r, c in pairs)
                if {r for r, _ in targets} & poly.variables():
                    raise ProgramParseError(lineno, rest_col, "payload references its own target")
                body.append(BasicUpdate(b, targets, poly))
            elif word == "end":
                ended = True
            else:
                raise ProgramParseError(lineno, col0, f"unknown directive {word!r}")
        except ProgramParseError:
            raise
        except (ValueError, KeyError) as e:
            raise ProgramParseError(lineno, col0, str(e))
    if not ended:
        raise ProgramParseError(len(text.splitlines()) + 1, 1, "missing 'end'")
    if inputs is None:
        raise ProgramParseError(1, 1, "missing 'inputs' line")
    if inputs[1] not in bank_pos:
        raise ProgramParseError(1, 1, f"input bank {inputs[1]!r} is not declared")
    if sorted(outputs) != list(range(len(outputs))):
        raise ProgramParseError(1, 1, "outputs must be numbered 0..k-1")
    try:
        return Program(
            name=name or "program",
            banks=tuple(RegisterBank(*b) for b in banks),
            num_inputs=inputs[0],
            input_bank=bank_pos[inputs[1]],
            instructions=tuple(body),
            outputs=tuple(outputs[k] for k in range(len(outputs))),
            input_range=inputs[2],
            readout=readout,
            oracle=oracle,
        )
    except StructureError as e:
        raise ProgramParseError(1, 1, str(e))
