"""Mode theories: finitely presented strict 2-categories and their deciders.

Words of 1-cell generators are stored in applicative order, so the word of
``μ∘ν`` is ``μ.word + ν.word`` and the rightmost generator acts first.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import product


class ModeTheoryError(Exception):
    """Base class for mode theory failures."""


class BoundaryMismatch(ModeTheoryError):
    pass


class Undecided(ModeTheoryError):
    def __init__(self, depth: int, what: str = ""):
        super().__init__(f"undecided within depth {depth}" + (f": {what}" if what else ""))
        self.depth = depth


class SearchExhausted(ModeTheoryError):
    def __init__(self, bound: int, what: str = ""):
        super().__init__(f"search exhausted at bound {bound}" + (f": {what}" if what else ""))
        self.bound = bound


class TheoryParseError(ModeTheoryError):
    pass


# ---------------------------------------------------------------------------
# 1-cells


@dataclass(frozen=True)
class Path:
    """A modality: a composable word of generators from ``src`` to ``dst``."""

    src: str
    dst: str
    word: tuple[str, ...] = ()

    @property
    def is_id(self) -> bool:
        return not self.word

    def __str__(self) -> str:
        return "∘".join(self.word) if self.word else f"1@{self.src}"

    def __repr__(self) -> str:
        return f"Path({self})"


def ident(mode: str) -> Path:
    return Path(mode, mode, ())


def compose_mod(mu: Path, nu: Path) -> Path:
    """``μ∘ν``: first ν, then μ."""
    if nu.dst != mu.src:
        raise BoundaryMismatch(f"cannot compose {mu} : {mu.src}→{mu.dst} after {nu} : {nu.src}→{nu.dst}")
    return Path(nu.src, mu.dst, mu.word + nu.word)


def compose_all(paths, mode: str) -> Path:
    """Fold ``compose_mod`` left to right; ``mode`` is the target when empty."""
    out = None
    for p in paths:
        out = p if out is None else compose_mod(out, p)
    return ident(mode) if out is None else out


# ---------------------------------------------------------------------------
# 2-cells


class Cell:
    """Pasting expression of 2-cells."""


@dataclass(frozen=True)
class Gen(Cell):
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Id(Cell):
    path: Path

    def __str__(self):
        return f"id({self.path})"


@dataclass(frozen=True)
class VComp(Cell):
    """Vertical composite: ``first`` then ``second`` (printed ``second ; first``)."""

    first: Cell
    second: Cell

    def __str__(self):
        return f"({self.second} ; {self.first})"


@dataclass(frozen=True)
class HComp(Cell):
    """Horizontal composite ``left ⋆ right``; ``left`` is the outer factor."""

    left: Cell
    right: Cell

    def __str__(self):
        return f"({self.left} * {self.right})"


@dataclass(frozen=True)
class Canon(Cell):
    """The unique cell ``src ⇒ dst`` of a poset theory.

    In a general theory it is only valid when ``src`` and ``dst`` are equal
    1-cells and then denotes the identity.
    """

    src: Path
    dst: Path

    def __str__(self):
        return f"[{self.src} <= {self.dst}]"


def vcomp(*cells: Cell) -> Cell:
    """Vertical composite in diagrammatic order, dropping nothing."""
    out = cells[0]
    for c in cells[1:]:
        out = VComp(out, c)
    return out


# ---------------------------------------------------------------------------
# theories


@dataclass(frozen=True)
class Gen1:
    name: str
    src: str
    dst: str


@dataclass(frozen=True)
class Gen2:
    name: str
    src: Path
    dst: Path


def _shortlex_key(order: dict[str, int]):
    return lambda w: (len(w), [order[g] for g in w])


@dataclass(frozen=True)
class ModeTheory:
    name: str
    modes: tuple[str, ...]
    one_gens: tuple[Gen1, ...] = ()
    two_gens: tuple[Gen2, ...] = ()
    one_eqs: tuple[tuple[Path, Path], ...] = ()
    two_eqs: tuple[tuple[Cell, Cell], ...] = ()
    enrichment: str = "general"
    # the built-in poset theories come with a hand-checked completeness bound
    search_complete: bool = field(default=False, compare=False)
    planar: bool = field(default=False, compare=False)
    depth: int = field(default=64, compare=False)

    def __post_init__(self):
        names = [g.name for g in self.one_gens] + [g.name for g in self.two_gens]
        if len(set(names)) != len(names):
            raise TheoryParseError(f"duplicate generator name in {names}")
        for g in self.one_gens:
            if g.src not in self.modes or g.dst not in self.modes:
                raise TheoryParseError(f"generator {g.name} names an undeclared mode")
        for g in self.two_gens:
            self.check_path(g.src)
            self.check_path(g.dst)
            if (g.src.src, g.src.dst) != (g.dst.src, g.dst.dst):
                raise TheoryParseError(f"2-cell {g.name} relates non-parallel 1-cells")
        for a, b in self.one_eqs:
            self.check_path(a)
            self.check_path(b)
            if (a.src, a.dst) != (b.src, b.dst):
                raise TheoryParseError(f"equation {a} = {b} relates non-parallel 1-cells")
        if self.enrichment not in ("general", "poset"):
            raise TheoryParseError(f"unknown enrichment {self.enrichment}")
        if self.enrichment == "poset" and self.two_eqs:
            raise TheoryParseError("poset theories carry no 2-cell equations")
        for a, b in self.two_eqs:
            if not self._parallel(self.boundary(a), self.boundary(b)):
                raise TheoryParseError(f"2-cell equation {a} = {b} relates non-parallel cells")

    # -- lookup ------------------------------------------------------------

    @cached_property
    def gens1(self) -> dict[str, Gen1]:
        return {g.name: g for g in self.one_gens}

    @cached_property
    def gens2(self) -> dict[str, Gen2]:
        return {g.name: g for g in self.two_gens}

    @cached_property
    def _order(self) -> dict[str, int]:
        return {g.name: i for i, g in enumerate(self.one_gens)}

    def path(self, word, src: str | None = None, dst: str | None = None) -> Path:
        """Build and validate a path from a word (applicative order)."""
        word = tuple(word)
        if not word:
            mode = src or dst
            if mode is None or (src and dst and src != dst):
                raise BoundaryMismatch("identity path needs a single mode")
            return ident(mode)
        p = Path(self.gens1[word[-1]].src, self.gens1[word[0]].dst, word)
        self.check_path(p)
        if (src and src != p.src) or (dst and dst != p.dst):
            raise BoundaryMismatch(f"{p} is not a path {src}→{dst}")
        return p

    def gen(self, name: str) -> Path:
        if name not in self.gens1:
            raise TheoryParseError(f"unknown modality {name!r} in theory {self.name}")
        g = self.gens1[name]
        return Path(g.src, g.dst, (name,))

    def check_path(self, p: Path) -> None:
        if p.src not in self.modes or p.dst not in self.modes:
            raise BoundaryMismatch(f"path {p} mentions an undeclared mode")
        if not p.word:
            if p.src != p.dst:
                raise BoundaryMismatch(f"identity path with distinct endpoints {p.src}, {p.dst}")
            return
        for g in p.word:
            if g not in self.gens1:
                raise BoundaryMismatch(f"unknown generator {g!r}")
        if self.gens1[p.word[-1]].src != p.src or self.gens1[p.word[0]].dst != p.dst:
            raise BoundaryMismatch(f"endpoints of {p} disagree with its word")
        for outer, inner in zip(p.word, p.word[1:]):
            if self.gens1[outer].src != self.gens1[inner].dst:
                raise BoundaryMismatch(f"{outer} and {inner} are not composable")

    def mode_at(self, p: Path, i: int) -> str:
        """Mode at the gap before ``p.word[i]`` (0 is the dst end)."""
        if i == 0:
            return p.dst
        return self.gens1[p.word[i - 1]].src

    # -- 1-cell equality ---------------------------------------------------

    @cached_property
    def rules(self) -> tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]:
        key = _shortlex_key(self._order)
        out = []
        for a, b in self.one_eqs:
            if a.word == b.word:
                continue
            hi, lo = (a.word, b.word) if key(a.word) > key(b.word) else (b.word, a.word)
            out.append((hi, lo))
        return tuple(out)

    def rewrite(self, word: tuple[str, ...]) -> tuple[str, ...]:
        """Normal form under the shortlex-oriented equations (always terminates)."""
        changed = True
        while changed:
            changed = False
            for lhs, rhs in self.rules:
                i = _find(word, lhs)
                if i >= 0:
                    word = word[:i] + rhs + word[i + len(lhs):]
                    changed = True
                    break
        return word

    @cached_property
    def confluent(self) -> bool:
        """Local confluence by critical pairs; with termination this is confluence."""
        for (l1, r1), (l2, r2) in product(self.rules, repeat=2):
            # l2 inside l1
            if (l1, r1) != (l2, r2):
                i = _find(l1, l2)
                if i >= 0 and self.rewrite(r1) != self.rewrite(l1[:i] + r2 + l1[i + len(l2):]):
                    return False
            # suffix of l1 overlaps prefix of l2
            for k in range(1, min(len(l1), len(l2))):
                if l1[-k:] == l2[:k]:
                    a = r1 + l2[k:]
                    b = l1[:-k] + r2
                    if self.rewrite(a) != self.rewrite(b):
                        return False
        return True

    def normal_form(self, p: Path) -> Path:
        return Path(p.src, p.dst, self.rewrite(p.word))

    def eq_mod(self, mu: Path, nu: Path) -> bool:
        self.check_path(mu)
        self.check_path(nu)
        if (mu.src, mu.dst) != (nu.src, nu.dst):
            return False
        if mu.word == nu.word:
            return True
        if self.confluent:
            return self.rewrite(mu.word) == self.rewrite(nu.word)
        return self._eq_closure(mu, nu)

    def _eq_closure(self, mu: Path, nu: Path) -> bool:
        """Bounded two-sided closure for theories whose rules are not confluent."""
        side = max((len(a.word) + len(b.word) for a, b in self.one_eqs), default=0)
        bound = max(len(mu.word), len(nu.word)) + side
        target = self.rewrite(nu.word)
        seen = {mu.word}
        frontier = deque([(mu.word, 0)])
        truncated = False
        while frontier:
            w, d = frontier.popleft()
            if self.rewrite(w) == target:
                return True
            if d >= self.depth:
                truncated = True
                continue
            for w2 in self._eq_moves(Path(mu.src, mu.dst, w)):
                if len(w2) > bound:
                    truncated = True
                    continue
                if w2 not in seen:
                    seen.add(w2)
                    frontier.append((w2, d + 1))
        if truncated:
            raise Undecided(self.depth, f"{mu} = {nu}")
        return False

    def _occurrences(self, p: Path, pat: Path):
        """Positions where ``pat`` can be replaced inside ``p``."""
        w = p.word
        if pat.word:
            for i in range(len(w) - len(pat.word) + 1):
                if w[i:i + len(pat.word)] == pat.word:
                    yield i, i + len(pat.word)
        else:
            for i in range(len(w) + 1):
                if self.mode_at(p, i) == pat.src:
                    yield i, i

    def _replace(self, p: Path, pat: Path, new: Path):
        for i, j in self._occurrences(p, pat):
            yield i, j, p.word[:i] + new.word + p.word[j:]

    def _eq_moves(self, p: Path):
        for a, b in self.one_eqs:
            for x, y in ((a, b), (b, a)):
                for _, _, w in self._replace(p, x, y):
                    yield w

    # -- 2-cells -----------------------------------------------------------

    def boundary(self, c: Cell) -> tuple[Path, Path]:
        """Source and target 1-cells of a pasting expression."""
        match c:
            case Gen(name):
                if name not in self.gens2:
                    raise BoundaryMismatch(f"unknown 2-cell {name!r} in theory {self.name}")
                g = self.gens2[name]
                return g.src, g.dst
            case Id(p):
                self.check_path(p)
                return p, p
            case Canon(s, d):
                self.check_path(s)
                self.check_path(d)
                if (s.src, s.dst) != (d.src, d.dst):
                    raise BoundaryMismatch(f"cell {c} relates non-parallel paths")
                if self.enrichment != "poset" and not self.eq_mod(s, d):
                    raise BoundaryMismatch(f"{s} and {d} are not equal in {self.name}")
                return s, d
            case VComp(a, b):
                s1, d1 = self.boundary(a)
                s2, d2 = self.boundary(b)
                if not self.eq_mod(d1, s2):
                    raise BoundaryMismatch(f"vertical composite: {d1} does not match {s2}")
                return s1, d2
            case HComp(a, b):
                s1, d1 = self.boundary(a)
                s2, d2 = self.boundary(b)
                if s1.src != s2.dst:
                    raise BoundaryMismatch(f"horizontal composite: {s1} cannot follow {s2}")
                return compose_mod(s1, s2), compose_mod(d1, d2)
        raise TypeError(f"not a cell: {c!r}")

    def _parallel(self, b1, b2) -> bool:
        return self.eq_mod(b1[0], b2[0]) and self.eq_mod(b1[1], b2[1])

    def eq_cell(self, a: Cell, b: Cell) -> bool:
        ba, bb = self.boundary(a), self.boundary(b)
        if not self._parallel(ba, bb):
            return False
        if self.enrichment == "poset" or a == b:
            return True
        if self.planar:
            return planar_form(self, a) == planar_form(self, b)
        return self._eq_cell_search(a, b)

    def _eq_cell_search(self, a: Cell, b: Cell) -> bool:
        """Bounded search for a common rewrite of both sides.

        Equations with an identity side are only applied in the removing direction, so a miss is
        definite only when no such equation exists.
        """
        reach_a, cut_a = self._closure(layers(self, a))
        reach_b, cut_b = self._closure(layers(self, b))
        if reach_a & reach_b:
            return True
        one_way = any(not layers(self, x) or not layers(self, y) for x, y in self.two_eqs)
        if cut_a or cut_b or one_way:
            raise Undecided(self.depth, f"{a} = {b}")
        return False

    def _closure(self, start, budget: int = 20000):
        seen = {start}
        frontier = deque([(start, 0)])
        truncated = False
        while frontier:
            seq, d = frontier.popleft()
            if d >= self.depth:
                truncated = True
                continue
            for nxt in _layer_moves(self, seq):
                if nxt not in seen:
                    if len(seen) > budget:
                        return seen, True
                    seen.add(nxt)
                    frontier.append((nxt, d + 1))
        return seen, truncated

    def find_cell(self, mu: Path, nu: Path) -> Cell | None:
        """Some 2-cell ``μ ⇒ ν``, or None when there is definitely none."""
        self.check_path(mu)
        self.check_path(nu)
        if (mu.src, mu.dst) != (nu.src, nu.dst):
            raise BoundaryMismatch(f"{mu} and {nu} are not parallel")
        if mu.word == nu.word:
            return Id(mu)
        if self.eq_mod(mu, nu):
            return Canon(mu, nu)
        if self.enrichment == "poset":
            return Canon(mu, nu) if self.leq(mu, nu) else None
        return self._search_cell(mu, nu)

    def leq(self, mu: Path, nu: Path) -> bool:
        """Reachability ``μ ≤ ν`` in a poset theory, by bounded word search."""
        if self.eq_mod(mu, nu):
            return True
        target = self.rewrite(nu.word)
        side = max([len(g.src.word) + len(g.dst.word) for g in self.two_gens]
                   + [len(a.word) + len(b.word) for a, b in self.one_eqs] + [0])
        bound = max(len(mu.word), len(nu.word)) + 2 * side
        start = self.rewrite(mu.word)
        seen = {start}
        frontier = deque([start])
        truncated = False
        while frontier:
            w = frontier.popleft()
            if self.rewrite(w) == target:
                return True
            p = Path(mu.src, mu.dst, w)
            moves = list(self._eq_moves(p))
            for g in self.two_gens:
                moves.extend(x for _, _, x in self._replace(p, g.src, g.dst))
            for w2 in moves:
                if len(w2) > bound:
                    truncated = True
                    continue
                if w2 not in seen:
                    seen.add(w2)
                    frontier.append(w2)
        if truncated and not self.search_complete:
            raise SearchExhausted(bound, f"{mu} <= {nu}")
        return False

    def _search_cell(self, mu: Path, nu: Path, max_steps: int = 6) -> Cell | None:
        """Breadth-first search over whiskered generators for a general theory."""
        side = max([len(g.src.word) + len(g.dst.word) for g in self.two_gens] + [0])
        bound = max(len(mu.word), len(nu.word)) + side + 2
        target = self.rewrite(nu.word)
        start = mu.word
        seen = {start: None}
        frontier = deque([(start, 0)])
        truncated = False
        while frontier:
            w, d = frontier.popleft()
            if self.rewrite(w) == target:
                return self._rebuild(seen, w, mu, nu)
            if d >= max_steps:
                truncated = True
                continue
            p = Path(mu.src, mu.dst, w)
            steps = []
            for g in self.two_gens:
                for i, j, w2 in self._replace(p, g.src, g.dst):
                    steps.append((w2, ("gen", g, i, j)))
            for a, b in self.one_eqs:
                for x, y in ((a, b), (b, a)):
                    for i, j, w2 in self._replace(p, x, y):
                        steps.append((w2, ("eq", None, i, j)))
            for w2, how in steps:
                if len(w2) > bound:
                    truncated = True
                    continue
                if w2 not in seen:
                    seen[w2] = (w, how)
                    frontier.append((w2, d + 1))
        if truncated:
            raise SearchExhausted(max_steps, f"no cell {mu} => {nu} found")
        return None

    def _rebuild(self, seen, w, mu: Path, nu: Path) -> Cell:
        steps = []
        while seen[w] is not None:
            prev, (kind, g, i, j) = seen[w]
            src = Path(mu.src, mu.dst, prev)
            dst = Path(mu.src, mu.dst, w)
            if kind == "gen":
                left = Path(self.mode_at(src, i), mu.dst, prev[:i])
                right = Path(mu.src, self.mode_at(src, j), prev[j:])
                step = Gen(g.name)
                if left.word:
                    step = HComp(Id(left), step)
                if right.word:
                    step = HComp(step, Id(right))
                steps.append(step)
            else:
                steps.append(Canon(src, dst))
            w = prev
        steps.reverse()
        if not steps:
            return Id(mu)
        out = vcomp(*steps)
        end = Path(mu.src, mu.dst, w if not steps else self.boundary(out)[1].word)
        if end.word != nu.word:
            out = VComp(out, Canon(end, nu))
        return out

    # -- printing ------------------------------------------------------------

    def __str__(self) -> str:
        return print_theory(self)


def _find(word, pat) -> int:
    n = len(pat)
    for i in range(len(word) - n + 1):
        if word[i:i + n] == pat:
            return i
    return -1


# ---------------------------------------------------------------------------
# layered normal form for the generic 2-cell decider
#
# A layer is (left word, generator name, right word); a cell is the tuple of
# its layers applied bottom to top.  Canon casts appear as layers whose
# generator is ("cast", src word, dst word).


def layers(th: ModeTheory, c: Cell):
    match c:
        case Gen(name):
            return (((), name, ()),)
        case Id(_):
            return ()
        case Canon(s, d):
            return () if s.word == d.word else (((), ("cast", s.word, d.word), ()),)
        case VComp(a, b):
            return layers(th, a) + layers(th, b)
        case HComp(a, b):
            (sa, da), (sb, db) = th.boundary(a), th.boundary(b)
            out = tuple((l, g, r + sb.word) for l, g, r in layers(th, a))
            return out + tuple((da.word + l, g, r) for l, g, r in layers(th, b))
    raise TypeError(c)


def _layer_io(th: ModeTheory, g):
    if isinstance(g, tuple):
        return g[1], g[2]
    gen = th.gens2[g]
    return gen.src.word, gen.dst.word


def _layer_moves(th: ModeTheory, seq):
    # interchange of adjacent independent layers
    for k in range(len(seq) - 1):
        (l1, g1, r1), (l2, g2, r2) = seq[k], seq[k + 1]
        i1, o1 = _layer_io(th, g1)
        i2, o2 = _layer_io(th, g2)
        if len(l2) >= len(l1) + len(o1):
            # the second layer acts to the right of the first one's output
            mid = r1[:len(l2) - len(l1) - len(o1)]
            yield seq[:k] + ((l1 + i1 + mid, g2, r2), (l1, g1, mid + o2 + r2)) + seq[k + 2:]
        if len(r2) >= len(r1) + len(o1):
            # ... or to its left
            mid = l1[len(l2) + len(i2):]
            yield seq[:k] + ((l2, g2, mid + i1 + r1), (l2 + o2 + mid, g1, r1)) + seq[k + 2:]
    # equations, either direction, under a common whisker
    for lhs, rhs in th.two_eqs:
        for x, y in ((lhs, rhs), (rhs, lhs)):
            lx, ly = layers(th, x), layers(th, y)
            if not lx:
                continue
            for k in range(len(seq) - len(lx) + 1):
                w = _whisker_of(seq[k:k + len(lx)], lx)
                if w is None:
                    continue
                u, v = w
                new = tuple((u + l, g, r + v) for l, g, r in ly)
                yield seq[:k] + new + seq[k + len(lx):]


def _whisker_of(block, pattern):
    u = v = None
    for (l, g, r), (pl, pg, pr) in zip(block, pattern):
        if g != pg or len(l) < len(pl) or len(r) < len(pr):
            return None
        if l[len(l) - len(pl):] != pl or r[:len(pr)] != pr:
            return None
        cu, cv = l[:len(l) - len(pl)], r[len(pr):]
        if u is None:
            u, v = cu, cv
        elif (u, v) != (cu, cv):
            return None
    return u, v


# ---------------------------------------------------------------------------
# planar connectivity: a complete invariant for the walking adjunction


@dataclass(frozen=True)
class Planar:
    bottom: tuple[str, ...]
    top: tuple[str, ...]
    pairs: frozenset
    loops: int = 0


def planar_form(th: ModeTheory, c: Cell) -> Planar:
    """Which boundary points of the string diagram are joined by a string."""
    match c:
        case Gen(name):
            g = th.gens2[name]
            bot, top = g.src.word, g.dst.word
            if len(bot) + len(top) != 2:
                raise ModeTheoryError(f"{name} is not a cup or cap")
            pts = [("b", i) for i in range(len(bot))] + [("t", i) for i in range(len(top))]
            return Planar(bot, top, frozenset({frozenset(pts)}))
        case Id(p):
            return Planar(p.word, p.word, frozenset(frozenset({("b", i), ("t", i)}) for i in range(len(p.word))))
        case Canon(s, d):
            if s.word != d.word:
                raise ModeTheoryError("casts between distinct words are not planar")
            return planar_form(th, Id(s))
        case HComp(a, b):
            pa, pb = planar_form(th, a), planar_form(th, b)
            nb, nt = len(pa.bottom), len(pa.top)

            def sh(pt):
                return (pt[0], pt[1] + (nb if pt[0] == "b" else nt))

            pairs = set(pa.pairs) | {frozenset(sh(x) for x in pr) for pr in pb.pairs}
            return Planar(pa.bottom + pb.bottom, pa.top + pb.top, frozenset(pairs), pa.loops + pb.loops)
        case VComp(a, b):
            pa, pb = planar_form(th, a), planar_form(th, b)
            if pa.top != pb.bottom:
                raise BoundaryMismatch("planar composite with mismatched middle word")
            return _glue(pa, pb)
    raise TypeError(c)


def _glue(pa: Planar, pb: Planar) -> Planar:
    # nodes: ('a', pt) for pa, ('c', pt) for pb; pa.top[i] is pb.bottom[i]
    nbr = {}
    for tag, pl in (("a", pa), ("c", pb)):
        for pr in pl.pairs:
            x, y = tuple(pr)
            nbr.setdefault((tag, x), []).append((tag, y))
            nbr.setdefault((tag, y), []).append((tag, x))
    for i in range(len(pa.top)):
        x, y = ("a", ("t", i)), ("c", ("b", i))
        nbr.setdefault(x, []).append(y)
        nbr.setdefault(y, []).append(x)

    def outer(node):
        return (node[0] == "a" and node[1][0] == "b") or (node[0] == "c" and node[1][0] == "t")

    seen, pairs = set(), set()
    for node in list(nbr):
        if node in seen or not outer(node):
            continue
        prev, cur = None, node
        seen.add(cur)
        while True:
            nxt = [n for n in nbr[cur] if n != prev]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            seen.add(cur)
            if outer(cur):
                break
        end = cur

        def rel(n):
            return n[1]

        pairs.add(frozenset({rel(node), rel(end)}))
    loops = pa.loops + pb.loops
    rest = [n for n in nbr if n not in seen]
    while rest:
        stack = [rest[0]]
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            stack.extend(nbr[n])
        loops += 1
        rest = [n for n in nbr if n not in seen]
    return Planar(pa.bottom, pb.top, frozenset(pairs), loops)


# ---------------------------------------------------------------------------
# built-in theories


def _p(th_gens: dict[str, tuple[str, str]], word: str, mode: str | None = None) -> Path:
    w = tuple(word.split("∘")) if word else ()
    if not w:
        return ident(mode)
    return Path(th_gens[w[-1]][0], th_gens[w[0]][1], w)


def builtin(name: str) -> ModeTheory:
    name = ALIASES.get(name, name)
    match name:
        case "trivial":
            return ModeTheory("trivial", ("m",), search_complete=True)
        case "idempotent_comonad":
            g = {"μ": ("m", "m")}
            return ModeTheory(
                "idempotent_comonad",
                ("m",),
                one_gens=(Gen1("μ", "m", "m"),),
                two_gens=(Gen2("ε", _p(g, "μ"), ident("m")),),
                one_eqs=((_p(g, "μ∘μ"), _p(g, "μ")),),
                enrichment="poset",
                search_complete=True,
            )
        case "guarded":
            g = {"ℓ": ("t", "t"), "γ": ("t", "s"), "δ": ("s", "t")}
            return ModeTheory(
                "guarded",
                ("t", "s"),
                one_gens=(Gen1("ℓ", "t", "t"), Gen1("γ", "t", "s"), Gen1("δ", "s", "t")),
                two_gens=(
                    Gen2("extract", _p(g, "δ∘γ"), ident("t")),
                    Gen2("tick", ident("t"), _p(g, "ℓ")),
                ),
                one_eqs=(
                    (_p(g, "γ∘δ"), ident("s")),
                    (_p(g, "γ∘ℓ"), _p(g, "γ")),
                ),
                enrichment="poset",
                search_complete=True,
            )
        case "walking_adjunction":
            g = {"ν": ("m", "n"), "μ": ("n", "m")}
            mu, nu = _p(g, "μ"), _p(g, "ν")
            tri1 = (VComp(HComp(Gen("η"), Id(mu)), HComp(Id(mu), Gen("ε"))), Id(mu))
            tri2 = (VComp(HComp(Id(nu), Gen("η")), HComp(Gen("ε"), Id(nu))), Id(nu))
            return ModeTheory(
                "walking_adjunction",
                ("m", "n"),
                one_gens=(Gen1("ν", "m", "n"), Gen1("μ", "n", "m")),
                two_gens=(
                    Gen2("η", ident("m"), _p(g, "μ∘ν")),
                    Gen2("ε", _p(g, "ν∘μ"), ident("n")),
                ),
                two_eqs=(tri1, tri2),
                enrichment="general",
                planar=True,
            )
    raise KeyError(f"no built-in mode theory named {name!r}")


ALIASES = {
    "adj": "walking_adjunction",
    "adjunction": "walking_adjunction",
    "comonad": "idempotent_comonad",
    "idem": "idempotent_comonad",
}

BUILTINS = ("trivial", "idempotent_comonad", "guarded", "walking_adjunction")


# ---------------------------------------------------------------------------
# concrete syntax for paths, cells and theory files

_TOKEN = re.compile(r"\s*(?:(?P<sym><=|=>|->|[()\[\];*,=∘.@:])|(?P<num>\d+)|(?P<id>[^\W\d][\w']*))", re.UNICODE)


def _tokens(text: str):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise TheoryParseError(f"unexpected character {text[pos:].strip()[:1]!r} in {text!r}")
        out.append(m.group("sym") or m.group("num") or m.group("id"))
        pos = m.end()
    return out


class _Reader:
    def __init__(self, th: ModeTheory, text: str):
        self.th = th
        self.text = text
        self.toks = _tokens(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, expect=None):
        t = self.peek()
        if t is None or (expect is not None and t != expect):
            raise TheoryParseError(f"expected {expect or 'more input'} in {self.text!r}")
        self.i += 1
        return t

    def done(self):
        if self.peek() is not None:
            raise TheoryParseError(f"trailing input {self.toks[self.i:]} in {self.text!r}")

    # path := '1' ['@' mode] | gen (('∘'|'.') gen)*
    def path(self, mode: str | None = None):
        t = self.peek()
        if t == "(":
            self.take("(")
            p = self.path(mode)
            self.take(")")
            return p
        if t == "1":
            self.take()
            if self.peek() == "@":
                self.take()
                return ident(self.take())
            if mode is None and len(self.th.modes) == 1:
                mode = self.th.modes[0]
            return ident(mode) if mode else _Loose()
        word = [self._gen1()]
        while self.peek() in ("∘", "."):
            self.take()
            if self.peek() == "1":
                self.take()
                if self.peek() == "@":
                    self.take()
                    self.take()
                continue
            word.append(self._gen1())
        return self.th.path(word)

    def _gen1(self):
        t = self.take()
        if t not in self.th.gens1:
            raise TheoryParseError(f"unknown modality {t!r} in theory {self.th.name}")
        return t

    # cell := hcell (';' hcell)*      (a ; b is a ∘ b: b acts first)
    def cell(self):
        parts = [self.hcell()]
        while self.peek() == ";":
            self.take()
            parts.append(self.hcell())
        out = parts[-1]
        for c in reversed(parts[:-1]):
            out = VComp(out, c)
        return out

    def hcell(self):
        out = self.catom()
        while self.peek() == "*":
            self.take()
            out = HComp(out, self.catom())
        return out

    def catom(self):
        t = self.peek()
        if t == "(":
            self.take()
            c = self.cell()
            self.take(")")
            return c
        if t == "[":
            self.take()
            s = self.path()
            self.take("<=")
            d = self.path(getattr(s, "src", None))
            self.take("]")
            s, d = _fix_loose(s, d)
            return Canon(s, d)
        if t == "id":
            self.take()
            return Id(_need(self.path()))
        if t == "1":
            self.take()
            if self.peek() == "@":
                self.take()
                return Id(ident(self.take()))
            nxt = self.peek()
            if nxt == "(" or nxt in self.th.gens1:
                return Id(self.path())
            if len(self.th.modes) == 1:
                return Id(ident(self.th.modes[0]))
            raise TheoryParseError("identity cell needs a path or a mode")
        t = self.take()
        if t not in self.th.gens2:
            raise TheoryParseError(f"unknown 2-cell {t!r} in theory {self.th.name}")
        return Gen(t)


class _Loose:
    """An identity path whose mode is fixed by the other side of a relation."""


def _need(p):
    if isinstance(p, _Loose):
        raise TheoryParseError("identity path needs a mode here (write 1@m)")
    return p


def _fix_loose(a, b):
    if isinstance(a, _Loose) and isinstance(b, _Loose):
        raise TheoryParseError("cannot infer the mode of 1 = 1")
    if isinstance(a, _Loose):
        a = ident(b.src)
    if isinstance(b, _Loose):
        b = ident(a.src)
    return a, b


def parse_path(th: ModeTheory, text: str, mode: str | None = None) -> Path:
    r = _Reader(th, text)
    p = r.path(mode)
    r.done()
    return _need(p)


def parse_path_pair(th: ModeTheory, left: str, right: str) -> tuple[Path, Path]:
    a, b = _Reader(th, left), _Reader(th, right)
    pa, pb = a.path(), b.path()
    a.done()
    b.done()
    return _fix_loose(pa, pb)


def parse_cell(th: ModeTheory, text: str) -> Cell:
    r = _Reader(th, text)
    c = r.cell()
    r.done()
    th.boundary(c)
    return c


SECTIONS = ("modes", "gens", "cells", "eq", "leq")


def parse_theory(text: str, name: str = "user") -> ModeTheory:
    """Read the line-oriented theory format (sections modes/gens/cells/eq/leq)."""
    sections: dict[str, list[tuple[int, str]]] = {s: [] for s in SECTIONS}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split("--", 1)[0].strip()
        if not line:
            continue
        head, sep, rest = line.partition(":")
        if sep and head.strip() in SECTIONS:
            current = head.strip()
            if rest.strip():
                sections[current].append((lineno, rest.strip()))
            continue
        if sep and head.strip() == "name" and current is None:
            name = rest.strip()
            continue
        if current is None:
            raise TheoryParseError(f"line {lineno}: text outside any section")
        sections[current].append((lineno, line))

    modes = []
    for lineno, item in sections["modes"]:
        for m in item.split(","):
            m = m.strip()
            if m:
                modes.append(m)
    gens1 = []
    for lineno, item in sections["gens"]:
        m = re.fullmatch(r"(\S+)\s*:\s*(\S+)\s*->\s*(\S+)", item)
        if not m:
            raise TheoryParseError(f"line {lineno}: expected 'name : src -> dst'")
        gens1.append(Gen1(*m.groups()))
    skeleton = ModeTheory(name, tuple(modes), tuple(gens1))
    gens2 = []
    for lineno, item in sections["cells"]:
        m = re.fullmatch(r"(\S+)\s*:\s*(.+?)\s*=>\s*(.+)", item)
        if not m:
            raise TheoryParseError(f"line {lineno}: expected 'name : path => path'")
        s, d = parse_path_pair(skeleton, m.group(2), m.group(3))
        gens2.append(Gen2(m.group(1), s, d))
    for k, (lineno, item) in enumerate(sections["leq"]):
        label = None
        m = re.fullmatch(r"(\S+)\s*:\s*(.+)", item)
        if m and "<=" in m.group(2) and "<=" not in m.group(1):
            label, item = m.group(1), m.group(2)
        if "<=" not in item:
            raise TheoryParseError(f"line {lineno}: expected 'path <= path'")
        left, right = item.split("<=", 1)
        s, d = parse_path_pair(skeleton, left, right)
        gens2.append(Gen2(label or f"le{k}", s, d))
    one_eqs, cell_eq_src = [], []
    for lineno, item in sections["eq"]:
        if "=" not in item:
            raise TheoryParseError(f"line {lineno}: expected 'path = path'")
        left, right = item.split("=", 1)
        try:
            one_eqs.append(parse_path_pair(skeleton, left, right))
        except ModeTheoryError:
            cell_eq_src.append((lineno, left, right))
    enrichment = "poset" if sections["leq"] else "general"
    th = ModeTheory(name, tuple(modes), tuple(gens1), tuple(gens2), tuple(one_eqs), (), enrichment)
    two_eqs = []
    for lineno, left, right in cell_eq_src:
        try:
            two_eqs.append((parse_cell(th, left), parse_cell(th, right)))
        except ModeTheoryError as e:
            raise TheoryParseError(f"line {lineno}: {e}") from None
    if two_eqs:
        th = ModeTheory(name, tuple(modes), tuple(gens1), tuple(gens2), tuple(one_eqs), tuple(two_eqs), enrichment)
    return _recognize(th)


def _recognize(th: ModeTheory) -> ModeTheory:
    """Give a parsed copy of a built-in presentation the built-in's deciders."""
    for b in BUILTINS:
        known = builtin(b)
        if replace(known, name=th.name) == th:
            return replace(known, name=th.name)
    return th


def print_theory(th: ModeTheory) -> str:
    out = [f"name: {th.name}", "modes: " + ", ".join(th.modes)]
    if th.one_gens:
        out.append("gens:")
        out += [f"  {g.name} : {g.src} -> {g.dst}" for g in th.one_gens]
    cells = [g for g in th.two_gens if th.enrichment != "poset"]
    if cells:
        out.append("cells:")
        out += [f"  {g.name} : {g.src} => {g.dst}" for g in cells]
    if th.one_eqs or th.two_eqs:
        out.append("eq:")
        out += [f"  {a} = {b}" for a, b in th.one_eqs]
        out += [f"  {print_cell(a)} = {print_cell(b)}" for a, b in th.two_eqs]
    if th.enrichment == "poset":
        out.append("leq:")
        out += [f"  {g.name} : {g.src} <= {g.dst}" for g in th.two_gens]
    return "\n".join(out) + "\n"


def print_cell(c: Cell) -> str:
    match c:
        case Gen(name):
            return name
        case Id(p):
            return f"id({p})"
        case Canon(s, d):
            return f"[{s} <= {d}]"
        case VComp(a, b):
            return f"({print_cell(b)} ; {print_cell(a)})"
        case HComp(a, b):
            return f"({print_cell(a)} * {print_cell(b)})"
    raise TypeError(c)
