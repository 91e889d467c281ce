"""Exact checks of filtration axioms on finite windows of Z^d.

A :class:`FiniteSpace` enumerates every configuration of a finite window
with its probability.  Sigma-algebras are represented by the partition of
atoms they generate, so conditional expectation is block averaging and all
verdicts are exact when the weights are rational.

Filtrations are generated by coordinates: a filtration maps an index ``i``
to the set of window sites whose values generate ``F_i``.  The natural
filtration uses the sites ``s <= i`` (coordinatewise).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from mdfield.models import IndexVec, leq, meet

MAX_ATOMS = 2**20

Site = IndexVec
Filtration = Callable[[IndexVec], Iterable[Site]]


class Partition:
    """A partition of atoms ``0..n-1``, stored as canonical block labels."""

    __slots__ = ("labels", "label")

    def __init__(self, labels, label=None):
        labels = np.asarray(labels, dtype=np.int64)
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        # renumber blocks by first occurrence so equal partitions compare equal
        order = np.argsort(np.argsort(first))
        self.labels = order[inverse.ravel()]
        self.label = label

    @classmethod
    def trivial(cls, n: int, label=None) -> "Partition":
        return cls(np.zeros(n, dtype=np.int64), label)

    @classmethod
    def discrete(cls, n: int, label=None) -> "Partition":
        return cls(np.arange(n), label)

    @property
    def size(self) -> int:
        return self.labels.size

    @property
    def n_blocks(self) -> int:
        return int(self.labels.max()) + 1 if self.size else 0

    def blocks(self) -> list[frozenset]:
        out = [[] for _ in range(self.n_blocks)]
        for atom, b in enumerate(self.labels):
            out[b].append(atom)
        return [frozenset(b) for b in out]

    def __eq__(self, other) -> bool:
        return isinstance(other, Partition) and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash(self.labels.tobytes())

    def __repr__(self) -> str:
        return f"Partition({self.n_blocks} blocks of {self.size} atoms, label={self.label})"

    def refines(self, other: "Partition") -> bool:
        """True when every block of ``self`` lies inside a block of ``other``."""
        return self.refinement_witness(other) is None

    def refinement_witness(self, other: "Partition"):
        """Two atoms in one block of ``self`` but different blocks of ``other``."""
        seen = {}
        for atom, (a, b) in enumerate(zip(self.labels, other.labels)):
            if a in seen and other.labels[seen[a]] != b:
                return seen[a], atom
            seen.setdefault(a, atom)
        return None

    def join(self, other: "Partition") -> "Partition":
        """Common refinement: the sigma-algebra generated by both."""
        return Partition(self.labels * (other.n_blocks or 1) + other.labels)

    def meet(self, other: "Partition") -> "Partition":
        """Finest common coarsening: the intersection sigma-algebra.

        Blocks are connected components of the relation "same block in
        either partition".
        """
        parent = list(range(self.n_blocks + other.n_blocks))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        off = self.n_blocks
        for a, b in zip(self.labels, other.labels):
            ra, rb = find(int(a)), find(int(b) + off)
            if ra != rb:
                parent[ra] = rb
        return Partition([find(int(a)) for a in self.labels])


class FiniteSpace:
    """All configurations of a finite window with their probabilities."""

    def __init__(self, sites: Sequence[Site], configurations: Sequence[Sequence], weights: Sequence):
        self.sites = tuple(tuple(int(c) for c in s) for s in sites)
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("window sites must be distinct")
        self.d = len(self.sites[0]) if self.sites else 0
        if len(configurations) > MAX_ATOMS:
            raise ValueError(f"{len(configurations)} atoms exceeds the cap of {MAX_ATOMS}")
        if len(configurations) != len(weights):
            raise ValueError("one weight per configuration required")
        self.configurations = [tuple(c) for c in configurations]
        self.weights = list(weights)
        if any(w <= 0 for w in self.weights):
            raise ValueError("atom weights must be positive")
        self.exact = all(isinstance(w, (Fraction, int)) for w in self.weights)
        total = sum(self.weights, Fraction(0) if self.exact else 0.0)
        if self.exact and total != 1:
            raise ValueError(f"weights sum to {total}, not 1")
        if not self.exact and abs(total - 1.0) > 1e-14:
            raise ValueError(f"weights sum to {total}, not 1")
        self.index = {s: k for k, s in enumerate(self.sites)}
        # integer codes per site for fast grouping
        codes = np.empty((len(self.configurations), len(self.sites)), dtype=np.int64)
        for col in range(len(self.sites)):
            alphabet = {}
            for row, conf in enumerate(self.configurations):
                codes[row, col] = alphabet.setdefault(conf[col], len(alphabet))
        self.codes = codes

    @classmethod
    def product(cls, sites: Sequence[Site], alphabet: dict) -> "FiniteSpace":
        """iid sites with the given ``{value: probability}`` marginal."""
        values = list(alphabet)
        probs = [alphabet[v] for v in values]
        n = len(values) ** len(sites)
        if n > MAX_ATOMS:
            raise ValueError(f"{n} atoms exceeds the cap of {MAX_ATOMS}")
        one = Fraction(1) if all(isinstance(p, (Fraction, int)) for p in probs) else 1.0
        confs, weights = [], []
        for combo in itertools.product(range(len(values)), repeat=len(sites)):
            confs.append(tuple(values[k] for k in combo))
            weights.append(math.prod((probs[k] for k in combo), start=one))
        return cls(sites, confs, weights)

    @classmethod
    def rademacher_window(cls, lo: int = -1, hi: int = 1, d: int = 2) -> "FiniteSpace":
        """iid fair +-1 signs on the box ``{lo..hi}^d``."""
        return cls.product(box_sites(lo, hi, d), {-1: Fraction(1, 2), 1: Fraction(1, 2)})

    @property
    def n_atoms(self) -> int:
        return len(self.configurations)

    def zero(self):
        return Fraction(0) if self.exact else 0.0

    def nonzero(self, value) -> bool:
        """Exact comparison for rational spaces, 1e-12 slack otherwise."""
        return value != 0 if self.exact else abs(value) > 1e-12

    def partition_by_sites(self, sites: Iterable[Site], label=None) -> Partition:
        cols = sorted(self.index[s] for s in sites if s in self.index)
        if not cols:
            return Partition.trivial(self.n_atoms, label)
        _, inverse = np.unique(self.codes[:, cols], axis=0, return_inverse=True)
        return Partition(inverse.ravel(), label)

    def expectation(self, values: Sequence) -> Fraction | float:
        return sum((w * v for w, v in zip(self.weights, values)), self.zero())

    def describe_atom(self, atom: int) -> dict:
        return {",".join(map(str, s)): str(v) for s, v in zip(self.sites, self.configurations[atom])}

    def marginal(self, sites: Sequence[Site]) -> dict:
        """Joint law of the values at ``sites`` as ``{values: weight}``."""
        cols = [self.index[s] for s in sites]
        out = {}
        for conf, w in zip(self.configurations, self.weights):
            key = tuple(conf[c] for c in cols)
            out[key] = out.get(key, self.zero()) + w
        return out


def box_sites(lo: int, hi: int, d: int) -> list[Site]:
    return list(itertools.product(range(lo, hi + 1), repeat=d))


@dataclass
class FiniteField:
    """A random variable on a finite space, optionally given by a local rule.

    When ``support`` and ``rule`` are set, the field is
    ``f(w) = rule(w at support)`` and can be shifted along the lattice.
    """

    space: FiniteSpace
    values: list
    support: tuple | None = None
    rule: Callable | None = None

    @classmethod
    def local(cls, space: FiniteSpace, support: Sequence[Site], rule: Callable) -> "FiniteField":
        support = tuple(tuple(s) for s in support)
        cols = [space.index[s] for s in support]
        values = [rule(*(conf[c] for c in cols)) for conf in space.configurations]
        if space.exact:
            values = [Fraction(v) for v in values]
        return cls(space, values, support, rule)

    @classmethod
    def coordinate(cls, space: FiniteSpace, site: Site) -> "FiniteField":
        return cls.local(space, [site], lambda x: x)

    @classmethod
    def zero(cls, space: FiniteSpace) -> "FiniteField":
        origin = (0,) * space.d
        return cls.local(space, [origin], lambda x: 0)

    def norm2(self):
        return self.space.expectation([v * v for v in self.values])

    def shift(self, translation: Sequence[int]) -> "FiniteField | None":
        """``f o T_translation``, or ``None`` when it leaves the window."""
        if self.rule is None:
            raise ValueError("only fields given by a local rule can be shifted")
        moved = tuple(tuple(a + b for a, b in zip(s, translation)) for s in self.support)
        if any(s not in self.space.index for s in moved):
            return None
        return FiniteField.local(self.space, moved, self.rule)

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.values)


def conditional_expectation(f: FiniteField, P: Partition) -> FiniteField:
    """``E(f | sigma(P))``: the weighted block average, constant on blocks."""
    space = f.space
    num = {}
    den = {}
    for b, w, v in zip(P.labels, space.weights, f.values):
        num[b] = num.get(b, space.zero()) + w * v
        den[b] = den.get(b, space.zero()) + w
    avg = {b: num[b] / den[b] for b in num}
    return FiniteField(space, [avg[b] for b in P.labels])


def natural_filtration(space: FiniteSpace) -> Filtration:
    """``F_i = sigma(X_s : s <= i)`` restricted to the window."""
    return lambda i: [s for s in space.sites if leq(s, i)]


def augmented_filtration(space: FiniteSpace, extra: Sequence[int]) -> Filtration:
    """Natural filtration with the single future site ``i + extra`` added."""
    extra = tuple(extra)
    base = natural_filtration(space)
    return lambda i: base(i) + [tuple(a + b for a, b in zip(i, extra))]


def filtration_from_past(space: FiniteSpace, i: Sequence[int], filtration: Filtration | None = None) -> Partition:
    """Partition generated by the coordinates of ``F_i`` inside the window."""
    filtration = filtration or natural_filtration(space)
    i = tuple(i)
    return space.partition_by_sites(filtration(i), label=i)


def axis_past_partition(space: FiniteSpace, q: int, level: int, filtration: Filtration | None = None) -> Partition:
    """``F^(q)_level``: join of all ``F_i`` with ``i_q <= level`` over the window."""
    filtration = filtration or natural_filtration(space)
    sites = set()
    for i in space.sites:
        if i[q - 1] <= level:
            sites.update(filtration(i))
    return space.partition_by_sites(sites, label=("axis", q, level))


@dataclass
class CheckResult:
    name: str
    passed: bool
    checked: int = 0
    skipped: int = 0
    witness: dict | None = None
    max_discrepancy: str = "0"
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "checked": self.checked,
            "skipped": self.skipped,
            "witness": self.witness,
            "max_discrepancy": self.max_discrepancy,
            "notes": list(self.notes),
        }


def _atom_pair_witness(space: FiniteSpace, pair) -> dict:
    a, b = pair
    return {"atoms": [space.describe_atom(a), space.describe_atom(b)]}


def _shift_site(s, t):
    return tuple(a + b for a, b in zip(s, t))


def check_commuting_axioms(space: FiniteSpace, index_set: Sequence[IndexVec] | None = None,
                           filtration: Filtration | None = None) -> list[CheckResult]:
    """Axioms (i) shift invariance, (ii) monotonicity, (iii) ``F_i ∩ F_j = F_{i∧j}``.

    Shift invariance compares ``F_i`` with ``T^{-i} F_0`` on the sites whose
    preimage under the shift lies in the window; indices where no such site
    exists are counted as skipped.
    """
    filtration = filtration or natural_filtration(space)
    index_set = [tuple(i) for i in (index_set or space.sites)]
    parts = {i: filtration_from_past(space, i, filtration) for i in index_set}
    origin = (0,) * space.d

    inv = CheckResult("shift-invariance", True)
    gen0 = [s for s in filtration(origin) if s in space.index]
    for i in index_set:
        domain = [s for s in space.sites if _shift_site(s, [-c for c in i]) in space.index]
        if not domain:
            inv.skipped += 1
            continue
        preimage = [_shift_site(s, [-c for c in i]) for s in domain]
        if space.marginal(domain) != space.marginal(preimage):
            inv.passed = False
            inv.witness = inv.witness or {"index": list(i), "reason": "shift does not preserve the law"}
            continue
        dom = set(domain)
        own = space.partition_by_sites([s for s in filtration(i) if s in dom])
        pulled = space.partition_by_sites([_shift_site(s, i) for s in gen0 if _shift_site(s, i) in dom])
        inv.checked += 1
        if own != pulled:
            inv.passed = False
            if inv.witness is None:
                pair = own.refinement_witness(pulled) or pulled.refinement_witness(own)
                inv.witness = {"index": list(i), **_atom_pair_witness(space, pair)}

    mono = CheckResult("monotone", True)
    for i in index_set:
        for j in index_set:
            if i != j and leq(i, j):
                mono.checked += 1
                pair = parts[j].refinement_witness(parts[i])
                if pair is not None:
                    mono.passed = False
                    if mono.witness is None:
                        mono.witness = {"i": list(i), "j": list(j), **_atom_pair_witness(space, pair)}

    lattice = CheckResult("meet", True)
    for a, i in enumerate(index_set):
        for j in index_set[a:]:
            m = meet(i, j)
            if m not in parts:
                lattice.skipped += 1
                continue
            lattice.checked += 1
            got = parts[i].meet(parts[j])
            if got != parts[m]:
                lattice.passed = False
                if lattice.witness is None:
                    pair = got.refinement_witness(parts[m]) or parts[m].refinement_witness(got)
                    lattice.witness = {"i": list(i), "j": list(j), "meet": list(m),
                                       **_atom_pair_witness(space, pair)}
    if not inv.checked:
        inv.passed = False
        inv.notes.append("no index could be checked inside the window")
    return [inv, mono, lattice]


def _max_abs(a: Sequence, b: Sequence):
    return max((abs(x - y) for x, y in zip(a, b)), default=0)


def _integer_weights(space: FiniteSpace):
    if not space.exact:
        return space.weights
    lcd = math.lcm(*(Fraction(w).denominator for w in space.weights))
    return [int(w * lcd) for w in space.weights]


def _commutes_for_all(space: FiniteSpace, Pi: Partition, Pj: Partition, Pm: Partition):
    """Whether ``E(E(.|F_i)|F_j) = E(.|F_m)`` as operators.

    Testing on atom indicators reduces this to: for atoms ``w, w'``,
    ``mu(B_i(w) ∩ B_j(w')) / (mu(B_i(w)) mu(B_j(w')))`` equals
    ``1/mu(B_m(w))`` when ``w'`` is in ``B_m(w)`` and 0 otherwise.
    Returns ``None`` or a witness ``(atom, atom')``.
    """
    w = _integer_weights(space)
    wi, wj, wm, wij = {}, {}, {}, {}
    rep_i, rep_j = {}, {}
    for atom, (bi, bj, bm, x) in enumerate(zip(Pi.labels, Pj.labels, Pm.labels, w)):
        bi, bj, bm = int(bi), int(bj), int(bm)
        wi[bi] = wi.get(bi, 0) + x
        wj[bj] = wj.get(bj, 0) + x
        wm[bm] = wm.get(bm, 0) + x
        wij[bi, bj] = wij.get((bi, bj), 0) + x
        rep_i.setdefault((bi, bm), atom)
        rep_j.setdefault((bj, bm), atom)
    # pairs in different meet blocks must not intersect
    touch_i, touch_j = {}, {}
    for bi, bm in rep_i:
        touch_i.setdefault(bi, set()).add(bm)
    for bj, bm in rep_j:
        touch_j.setdefault(bj, set()).add(bm)
    for bi, bj in wij:
        for mi in touch_i[bi]:
            for mj in touch_j[bj]:
                if mi != mj:
                    return rep_i[bi, mi], rep_j[bj, mj]
    by_m_i, by_m_j = {}, {}
    for bi, bm in rep_i:
        by_m_i.setdefault(bm, []).append(bi)
    for bj, bm in rep_j:
        by_m_j.setdefault(bm, []).append(bj)
    for bm, blocks_i in by_m_i.items():
        for bi in blocks_i:
            for bj in by_m_j.get(bm, ()):
                lhs = wij.get((bi, bj), 0) * wm[bm]
                rhs = wi[bi] * wj[bj]
                if space.nonzero(lhs - rhs):
                    return rep_i[bi, bm], rep_j[bj, bm]
    return None


def check_completely_commuting(space: FiniteSpace, pairs: Sequence | None = None, f: FiniteField | None = None,
                               filtration: Filtration | None = None) -> CheckResult:
    """``E(E(f|F_i)|F_j) = E(f|F_{i∧j})`` for each pair.

    With ``f`` given the identity is checked for that field.  Without it,
    the identity is checked for every function on the space (operator
    equality, via the block criterion in :func:`_commutes_for_all`).
    """
    filtration = filtration or natural_filtration(space)
    if pairs is None:
        pairs = [(i, j) for i in space.sites for j in space.sites]
    cache = {}

    def part(i):
        if i not in cache:
            cache[i] = filtration_from_past(space, i, filtration)
        return cache[i]

    name = "completely-commuting" + ("" if f is not None else "-all-functions")
    result = CheckResult(name, True)
    worst = space.zero()
    for i, j in pairs:
        i, j = tuple(i), tuple(j)
        m = meet(i, j)
        result.checked += 1
        if f is not None:
            lhs = conditional_expectation(conditional_expectation(f, part(i)), part(j)).values
            rhs = conditional_expectation(f, part(m)).values
            gap = _max_abs(lhs, rhs)
            worst = max(worst, gap)
            ok = not space.nonzero(gap)
            if not ok and result.witness is None:
                atom = next(k for k, (x, y) in enumerate(zip(lhs, rhs)) if space.nonzero(x - y))
                result.witness = {"i": list(i), "j": list(j), "atom": space.describe_atom(atom),
                                  "lhs": str(lhs[atom]), "rhs": str(rhs[atom])}
        else:
            pair = _commutes_for_all(space, part(i), part(j), part(m))
            ok = pair is None
            if not ok and result.witness is None:
                result.witness = {"i": list(i), "j": list(j), **_atom_pair_witness(space, pair)}
        result.passed &= ok
    result.max_discrepancy = str(worst)
    return result


def strict_past_cone(space: FiniteSpace) -> list[IndexVec]:
    """Window indices ``i <= 0`` with at least one strict inequality."""
    origin = (0,) * space.d
    return [i for i in space.sites if leq(i, origin) and i != origin]


def check_mdf(space: FiniteSpace, f: FiniteField, cone: Sequence[IndexVec] | None = None,
              filtration: Filtration | None = None) -> CheckResult:
    """Martingale-difference property of ``f``.

    First ``f`` must be ``F_0``-measurable (failure code
    ``not-F0-measurable``); then ``E(f | F_i)`` must vanish for every ``i``
    in the strict past cone (failure code ``not-centered``).
    """
    filtration = filtration or natural_filtration(space)
    origin = (0,) * space.d
    result = CheckResult("mdf", True)
    P0 = filtration_from_past(space, origin, filtration)
    proj = conditional_expectation(f, P0)
    off = [k for k, (x, y) in enumerate(zip(proj.values, f.values)) if space.nonzero(x - y)]
    if off:
        atom = off[0]
        result.passed = False
        result.witness = {"code": "not-F0-measurable", "atom": space.describe_atom(atom)}
        return result
    for i in cone if cone is not None else strict_past_cone(space):
        i = tuple(i)
        ce = conditional_expectation(f, filtration_from_past(space, i, filtration))
        result.checked += 1
        bad = [k for k, v in enumerate(ce.values) if space.nonzero(v)]
        if bad:
            result.passed = False
            if result.witness is None:
                result.witness = {"code": "not-centered", "index": list(i),
                                  "atom": space.describe_atom(bad[0]), "value": str(ce.values[bad[0]])}
    # axis pasts F^(q)_{-1} are unions over the window only
    for q in range(1, space.d + 1):
        ce = conditional_expectation(f, axis_past_partition(space, q, -1, filtration))
        result.checked += 1
        if any(space.nonzero(v) for v in ce.values):
            result.passed = False
            if result.witness is None:
                result.witness = {"code": "not-centered", "axis": q}
    result.notes.append("axis pasts truncated to the window")
    return result


@dataclass
class OrthogonalityResult:
    passed: bool
    values: dict
    skipped: list

    def to_dict(self) -> dict:
        return {"passed": self.passed, "values": self.values, "skipped": self.skipped}


def mdf_orthogonality(space: FiniteSpace, f: FiniteField, pairs: Sequence) -> OrthogonalityResult:
    """Exact ``E[U_i f * U_j f]`` for each pair; zero required when ``i != j``."""
    values, skipped, passed = {}, [], True
    for i, j in pairs:
        i, j = tuple(i), tuple(j)
        fi, fj = f.shift(i), f.shift(j)
        if fi is None or fj is None:
            skipped.append([list(i), list(j)])
            continue
        v = space.expectation([a * b for a, b in zip(fi.values, fj.values)])
        values[f"{i}|{j}"] = str(v)
        if i != j and space.nonzero(v):
            passed = False
    return OrthogonalityResult(passed, values, skipped)
