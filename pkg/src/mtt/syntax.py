"""Core syntax: contexts, types, terms and substitutions with de Bruijn indices.

Indices count only context extensions; locks are transparent to indexing.
A variable's cell is ``None`` when it is the identity at an identity
modality (the ordinary case), or ``HOLE`` before the checker fills it in.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .mode_theory import (
    BoundaryMismatch,
    Cell,
    ModeTheory,
    ModeTheoryError,
    Path,
    compose_mod,
    ident,
    parse_cell,
    parse_path,
    print_cell,
)


class _Hole:
    """Placeholder 2-cell, solved by ``find_cell`` during checking."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "HOLE"

    def __reduce__(self):
        return (_Hole, ())


HOLE = _Hole()

LEVELS = (0, 1)


# ---------------------------------------------------------------------------
# contexts


class Ctx:
    pass


@dataclass(frozen=True)
class Empty(Ctx):
    pass


@dataclass(frozen=True)
class Lock(Ctx):
    parent: Ctx
    mu: Path


@dataclass(frozen=True)
class Extend(Ctx):
    parent: Ctx
    mu: Path
    ty: "Ty"
    name: str = "_"  # display only; ignored by equality below

    def __eq__(self, other):
        return (isinstance(other, Extend) and self.parent == other.parent
                and self.mu == other.mu and self.ty == other.ty)

    def __hash__(self):
        return hash((Extend, self.parent, self.mu, self.ty))


EMPTY = Empty()


# ---------------------------------------------------------------------------
# types


class Ty:
    pass


@dataclass(frozen=True)
class Bool(Ty):
    pass


@dataclass(frozen=True)
class Uni(Ty):
    pass


@dataclass(frozen=True)
class Dec(Ty):
    tm: "Tm"


@dataclass(frozen=True)
class Lift(Ty):
    """Lift a type of level ``level`` to level 1."""

    level: int
    ty: Ty


@dataclass(frozen=True)
class IdTy(Ty):
    ty: Ty
    lhs: "Tm"
    rhs: "Tm"


@dataclass(frozen=True)
class Pi(Ty):
    mu: Path
    dom: Ty
    cod: Ty


@dataclass(frozen=True)
class Sigma(Ty):
    dom: Ty
    cod: Ty


@dataclass(frozen=True)
class Modal(Ty):
    mu: Path
    ty: Ty


@dataclass(frozen=True)
class TySub(Ty):
    ty: Ty
    sub: "Sub"


BOOL = Bool()
UNI = Uni()


# ---------------------------------------------------------------------------
# terms


class Tm:
    pass


@dataclass(frozen=True)
class Var(Tm):
    idx: int
    cell: object = None  # Cell | None | HOLE


@dataclass(frozen=True)
class Tt(Tm):
    pass


@dataclass(frozen=True)
class Ff(Tm):
    pass


@dataclass(frozen=True)
class BoolRec(Tm):
    motive: Ty
    t: Tm
    f: Tm
    scrut: Tm


@dataclass(frozen=True)
class Refl(Tm):
    tm: Tm


@dataclass(frozen=True)
class IdRec(Tm):
    motive: Ty
    base: Tm
    n0: Tm
    n1: Tm
    p: Tm


@dataclass(frozen=True)
class Enc(Tm):
    ty: Ty


@dataclass(frozen=True)
class Lam(Tm):
    mu: Path
    body: Tm


@dataclass(frozen=True)
class App(Tm):
    """Application; ``mu`` is the modality of the function's domain."""

    fn: Tm
    arg: Tm
    mu: Path


@dataclass(frozen=True)
class Pair(Tm):
    fst: Tm
    snd: Tm


@dataclass(frozen=True)
class Proj0(Tm):
    tm: Tm


@dataclass(frozen=True)
class Proj1(Tm):
    tm: Tm


@dataclass(frozen=True)
class MkBox(Tm):
    mu: Path
    tm: Tm


@dataclass(frozen=True)
class Open(Tm):
    """``let_ν mod_μ x = scrut in branch`` with motive over ``x : (ν) ⟨μ|A⟩``."""

    nu: Path
    mu: Path
    motive: Ty
    scrut: Tm
    branch: Tm


@dataclass(frozen=True)
class Axiom(Tm):
    """An axiom constant; ``ty`` is the parameter its type schema is instantiated at."""

    name: str
    ty: Ty


@dataclass(frozen=True)
class Ann(Tm):
    """A closed term with its type, as left behind by inlining a definition."""

    tm: Tm
    ty: Ty
    name: str = ""


@dataclass(frozen=True)
class TmSub(Tm):
    tm: Tm
    sub: "Sub"


TT = Tt()
FF = Ff()


# ---------------------------------------------------------------------------
# substitutions


class Sub:
    pass


@dataclass(frozen=True)
class EmpSub(Sub):
    pass


@dataclass(frozen=True)
class Wk(Sub):
    pass


@dataclass(frozen=True)
class IdSub(Sub):
    pass


@dataclass(frozen=True)
class Comp(Sub):
    """``first`` acts on a term before ``second``: ``t[Comp(f, s)] = t[f][s]``."""

    first: Sub
    second: Sub


@dataclass(frozen=True)
class LockSub(Sub):
    mu: Path
    sub: Sub


@dataclass(frozen=True)
class Key(Sub):
    """For α : μ ⇒ ν, the substitution Lock(Γ, ν) → Lock(Γ, μ)."""

    cell: Cell
    at: Ctx


@dataclass(frozen=True)
class ExtSub(Sub):
    """``σ.M`` where ``M`` lives behind a lock of modality ``mu``."""

    sub: Sub
    tm: Tm
    mu: Path


EMP = EmpSub()
WK = Wk()
ID = IdSub()


# ---------------------------------------------------------------------------
# contexts: modes and locks


def ctx_mode(g: Ctx, root: str) -> str:
    """Mode of a context built over ``root``."""
    match g:
        case Empty():
            return root
        case Lock(parent, mu):
            m = ctx_mode(parent, root)
            if mu.dst != m:
                raise BoundaryMismatch(f"lock {mu} : {mu.src}→{mu.dst} applied to a context at mode {m}")
            return mu.src
        case Extend(parent, _, _):
            return ctx_mode(parent, root)
    raise TypeError(g)


def entries(g: Ctx) -> list[Ctx]:
    """Context entries outermost first (each a Lock or Extend node)."""
    out = []
    while not isinstance(g, Empty):
        out.append(g)
        g = g.parent
    out.reverse()
    return out


def locks_of(suffix, mode: str | None = None) -> Path:
    """Locks(Γ₁) for a list of entries: Locks(Γ.lock_μ) = Locks(Γ)∘μ, extensions skipped."""
    out = None
    for e in suffix:
        if isinstance(e, Lock):
            out = e.mu if out is None else compose_mod(out, e.mu)
        elif isinstance(e, str) or isinstance(e, Path):
            if isinstance(e, Path):
                out = e if out is None else compose_mod(out, e)
    if out is None:
        if mode is None:
            for e in suffix:
                if isinstance(e, Extend):
                    mode = e.mu.dst
                    break
        return ident(mode) if mode is not None else Path("?", "?", ())
    return out


def lookup(g: Ctx, idx: int):
    """Find the binding of index ``idx``: (prefix ctx, binding, suffix entries)."""
    es = entries(g)
    k = idx
    for pos in range(len(es) - 1, -1, -1):
        e = es[pos]
        if isinstance(e, Extend):
            if k == 0:
                return e.parent, e, es[pos + 1:]
            k -= 1
    raise IndexError(f"variable {idx} out of scope")


def ctx_len(g: Ctx) -> int:
    return sum(1 for e in entries(g) if isinstance(e, Extend))


def ctx_nf(g: Ctx) -> Ctx:
    """Collapse adjacent locks and drop identity locks (cx/compose, cx/id)."""
    match g:
        case Empty():
            return g
        case Extend(parent, mu, ty, name):
            return Extend(ctx_nf(parent), mu, ty, name)
        case Lock(parent, mu):
            p = ctx_nf(parent)
            if mu.is_id:
                return p
            if isinstance(p, Lock):
                return Lock(p.parent, compose_mod(p.mu, mu))
            return Lock(p, mu)
    raise TypeError(g)


# ---------------------------------------------------------------------------
# shifting


def shift(t: Tm, cutoff: int = 0, by: int = 1) -> Tm:
    """Add ``by`` to every variable at or above ``cutoff``; cells are untouched."""
    if by == 0:
        return t
    return _Shifter(by).tm(t, cutoff)


def shift_ty(a: Ty, cutoff: int = 0, by: int = 1) -> Ty:
    if by == 0:
        return a
    return _Shifter(by).ty(a, cutoff)


class _Shifter:
    def __init__(self, by: int):
        self.by = by

    def tm(self, t: Tm, c: int) -> Tm:
        if t is None:
            return None
        match t:
            case Var(i, cell):
                return Var(i + self.by, cell) if i >= c else t
            case Tt() | Ff():
                return t
            case BoolRec(m, a, b, s):
                return BoolRec(self.ty(m, c + 1), self.tm(a, c), self.tm(b, c), self.tm(s, c))
            case Refl(a):
                return Refl(self.tm(a, c))
            case IdRec(m, base, n0, n1, p):
                return IdRec(self.ty(m, c + 3), self.tm(base, c + 1), self.tm(n0, c), self.tm(n1, c), self.tm(p, c))
            case Enc(a):
                return Enc(self.ty(a, c))
            case Lam(mu, b):
                return Lam(mu, self.tm(b, c + 1))
            case App(f, a, mu):
                return App(self.tm(f, c), self.tm(a, c), mu)
            case Pair(a, b):
                return Pair(self.tm(a, c), self.tm(b, c))
            case Proj0(a):
                return Proj0(self.tm(a, c))
            case Proj1(a):
                return Proj1(self.tm(a, c))
            case MkBox(mu, a):
                return MkBox(mu, self.tm(a, c))
            case Open(nu, mu, m, s, br):
                return Open(nu, mu, self.ty(m, c + 1), self.tm(s, c), self.tm(br, c + 1))
            case Axiom(name, a):
                return Axiom(name, self.ty(a, c))
            case Ann():
                return t
            case TmSub(a, s):
                return TmSub(a, self.sub(s, c))
        raise TypeError(t)

    def ty(self, a: Ty, c: int) -> Ty:
        if a is None:
            return None
        match a:
            case Bool() | Uni():
                return a
            case Dec(m):
                return Dec(self.tm(m, c))
            case Lift(lv, b):
                return Lift(lv, self.ty(b, c))
            case IdTy(b, x, y):
                return IdTy(self.ty(b, c), self.tm(x, c), self.tm(y, c))
            case Pi(mu, d, cod):
                return Pi(mu, self.ty(d, c), self.ty(cod, c + 1))
            case Sigma(d, cod):
                return Sigma(self.ty(d, c), self.ty(cod, c + 1))
            case Modal(mu, b):
                return Modal(mu, self.ty(b, c))
            case TySub(b, s):
                return TySub(b, self.sub(s, c))
        raise TypeError(a)

    def sub(self, s: Sub, c: int) -> Sub:
        # the codomain of s is untouched; only its image moves
        match s:
            case EmpSub():
                return s
            case IdSub() | Wk():
                if c == 0:
                    return Comp(s, _wkn(self.by))
                raise NotImplementedError("shifting under binders through an explicit substitution")
            case Comp(a, b):
                return Comp(a, self.sub(b, c))
            case LockSub(mu, t):
                return LockSub(mu, self.sub(t, c))
            case Key(_, _):
                if c == 0:
                    return Comp(s, _wkn(self.by))
                raise NotImplementedError("shifting under binders through a key")
            case ExtSub(t, m, mu):
                return ExtSub(self.sub(t, c), self.tm(m, c), mu)
        raise TypeError(s)


def _wkn(n: int) -> Sub:
    out = WK
    for _ in range(n - 1):
        out = Comp(out, WK)
    return out


def has_explicit_sub(x) -> bool:
    """Does the tree contain a TmSub or TySub node?"""
    stack = [x]
    while stack:
        y = stack.pop()
        if isinstance(y, (TmSub, TySub)):
            return True
        if isinstance(y, (Tm, Ty)):
            for f in y.__dataclass_fields__:
                v = getattr(y, f)
                if isinstance(v, (Tm, Ty)):
                    stack.append(v)
    return False


def size(x) -> int:
    n, stack = 0, [x]
    while stack:
        y = stack.pop()
        n += 1
        if isinstance(y, (Tm, Ty, Sub, Ctx)):
            for f in y.__dataclass_fields__:
                v = getattr(y, f)
                if isinstance(v, (Tm, Ty, Sub, Ctx)):
                    stack.append(v)
    return n


# ---------------------------------------------------------------------------
# textual core format
#
#   ctx ::= (empty) | (lock ctx path) | (ext ctx path ty)
#   ty  ::= Bool | U | (El tm) | (lift n ty) | (Id ty tm tm) | (Pi path ty ty)
#         | (Sigma ty ty) | (Mod path ty) | (sub ty sub)
#   tm  ::= (var n [cell | ?]) | true | false | (if ty tm tm tm) | (refl tm)
#         | (J ty tm tm tm tm) | (code ty) | (lam path tm) | (app path tm tm)
#         | (pair tm tm) | (fst tm) | (snd tm) | (mod path tm)
#         | (let path path ty tm tm) | (axiom name ty) | (sub tm sub)
#   sub ::= emp | wk | id | (comp sub sub) | (lock path sub) | (key cell ctx)
#         | (ext sub path tm)
#   path ::= bare word such as γ∘δ or 1@t;  cell ::= "quoted cell expression"


def pr_path(p: Path | None) -> str:
    return "_" if p is None else str(p)


def _pr_opt_ty(a) -> str:
    return "_" if a is None else pr_ty(a)


def _pr_opt_tm(t) -> str:
    return "_" if t is None else pr_tm(t)


def pr_cell(c) -> str:
    return '"' + print_cell(c) + '"'


def pr_ctx(g: Ctx) -> str:
    match g:
        case Empty():
            return "(empty)"
        case Lock(p, mu):
            return f"(lock {pr_ctx(p)} {pr_path(mu)})"
        case Extend(p, mu, a):
            return f"(ext {pr_ctx(p)} {pr_path(mu)} {pr_ty(a)})"
    raise TypeError(g)


def pr_ty(a: Ty) -> str:
    match a:
        case Bool():
            return "Bool"
        case Uni():
            return "U"
        case Dec(m):
            return f"(El {pr_tm(m)})"
        case Lift(lv, b):
            return f"(lift {lv} {pr_ty(b)})"
        case IdTy(b, x, y):
            return f"(Id {pr_ty(b)} {pr_tm(x)} {pr_tm(y)})"
        case Pi(mu, d, c):
            return f"(Pi {pr_path(mu)} {pr_ty(d)} {pr_ty(c)})"
        case Sigma(d, c):
            return f"(Sigma {pr_ty(d)} {pr_ty(c)})"
        case Modal(mu, b):
            return f"(Mod {pr_path(mu)} {pr_ty(b)})"
        case TySub(b, s):
            return f"(sub {pr_ty(b)} {pr_sub(s)})"
    raise TypeError(a)


def pr_tm(t: Tm) -> str:
    match t:
        case Var(i, None):
            return f"(var {i})"
        case Var(i, c) if c is HOLE:
            return f"(var {i} ?)"
        case Var(i, c):
            return f"(var {i} {pr_cell(c)})"
        case Tt():
            return "true"
        case Ff():
            return "false"
        case BoolRec(m, a, b, s):
            return f"(if {_pr_opt_ty(m)} {pr_tm(a)} {pr_tm(b)} {pr_tm(s)})"
        case Refl(a):
            return f"(refl {pr_tm(a)})"
        case IdRec(m, base, n0, n1, p):
            return f"(J {pr_ty(m)} {pr_tm(base)} {_pr_opt_tm(n0)} {_pr_opt_tm(n1)} {pr_tm(p)})"
        case Enc(a):
            return f"(code {pr_ty(a)})"
        case Lam(mu, b):
            return f"(lam {pr_path(mu)} {pr_tm(b)})"
        case App(f, a, mu):
            return f"(app {pr_path(mu)} {pr_tm(f)} {pr_tm(a)})"
        case Pair(a, b):
            return f"(pair {pr_tm(a)} {pr_tm(b)})"
        case Proj0(a):
            return f"(fst {pr_tm(a)})"
        case Proj1(a):
            return f"(snd {pr_tm(a)})"
        case MkBox(mu, a):
            return f"(mod {pr_path(mu)} {pr_tm(a)})"
        case Open(nu, mu, m, s, br):
            return f"(let {pr_path(nu)} {pr_path(mu)} {_pr_opt_ty(m)} {pr_tm(s)} {pr_tm(br)})"
        case Axiom(name, a):
            return f"(axiom {name} {pr_ty(a)})"
        case Ann(a, b, name):
            return f"(the {name or '_'} {pr_ty(b)} {pr_tm(a)})"
        case TmSub(a, s):
            return f"(sub {pr_tm(a)} {pr_sub(s)})"
    raise TypeError(t)


def pr_sub(s: Sub) -> str:
    match s:
        case EmpSub():
            return "emp"
        case Wk():
            return "wk"
        case IdSub():
            return "id"
        case Comp(a, b):
            return f"(comp {pr_sub(a)} {pr_sub(b)})"
        case LockSub(mu, a):
            return f"(lock {pr_path(mu)} {pr_sub(a)})"
        case Key(c, g):
            return f"(key {pr_cell(c)} {pr_ctx(g)})"
        case ExtSub(a, m, mu):
            return f"(ext {pr_sub(a)} {pr_path(mu)} {pr_tm(m)})"
    raise TypeError(s)


class CoreParseError(Exception):
    pass


_SEXP = re.compile(r'\s*(?:(?P<open>\()|(?P<close>\))|"(?P<str>[^"]*)"|(?P<atom>[^\s()"]+))')


def _sexp(text: str):
    pos, stack, top = 0, [[]], None
    text = text.strip()
    while pos < len(text):
        m = _SEXP.match(text, pos)
        if not m:
            raise CoreParseError(f"bad character at offset {pos}")
        pos = m.end()
        if m.group("open"):
            stack.append([])
        elif m.group("close"):
            if len(stack) == 1:
                raise CoreParseError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        elif m.group("str") is not None:
            stack[-1].append(("str", m.group("str")))
        else:
            stack[-1].append(m.group("atom"))
        while pos < len(text) and text[pos].isspace():
            pos += 1
    if len(stack) != 1 or len(stack[0]) != 1:
        raise CoreParseError("expected exactly one expression")
    top = stack[0][0]
    return top


class CoreReader:
    def __init__(self, th: ModeTheory):
        self.th = th

    def opt_path(self, x):
        return None if x == "_" else self.path(x)

    def opt_ty(self, x):
        return None if x == "_" else self.ty(x)

    def opt_tm(self, x):
        return None if x == "_" else self.tm(x)

    def path(self, x, mode=None) -> Path:
        if not isinstance(x, str):
            raise CoreParseError(f"expected a modality, got {x!r}")
        try:
            return parse_path(self.th, x, mode)
        except ModeTheoryError as e:
            raise CoreParseError(str(e)) from None

    def cell(self, x):
        if x == "?":
            return HOLE
        if not (isinstance(x, tuple) and x[0] == "str"):
            raise CoreParseError(f"expected a quoted cell, got {x!r}")
        try:
            return parse_cell(self.th, x[1])
        except ModeTheoryError as e:
            raise CoreParseError(str(e)) from None

    def ctx(self, x) -> Ctx:
        match x:
            case ["empty"]:
                return EMPTY
            case ["lock", g, mu]:
                return Lock(self.ctx(g), self.path(mu))
            case ["ext", g, mu, a]:
                return Extend(self.ctx(g), self.path(mu), self.ty(a))
        raise CoreParseError(f"bad context {x!r}")

    def ty(self, x) -> Ty:
        match x:
            case "Bool":
                return BOOL
            case "U":
                return UNI
            case ["El", m]:
                return Dec(self.tm(m))
            case ["lift", lv, a] if lv in ("0", "1"):
                return Lift(int(lv), self.ty(a))
            case ["Id", a, m, n]:
                return IdTy(self.ty(a), self.tm(m), self.tm(n))
            case ["Pi", mu, a, b]:
                return Pi(self.path(mu), self.ty(a), self.ty(b))
            case ["Sigma", a, b]:
                return Sigma(self.ty(a), self.ty(b))
            case ["Mod", mu, a]:
                return Modal(self.path(mu), self.ty(a))
            case ["sub", a, s]:
                return TySub(self.ty(a), self.sub(s))
        raise CoreParseError(f"bad type {x!r}")

    def tm(self, x) -> Tm:
        match x:
            case ["var", i]:
                return Var(int(i))
            case ["var", i, c]:
                return Var(int(i), self.cell(c))
            case "true":
                return TT
            case "false":
                return FF
            case ["if", m, a, b, s]:
                return BoolRec(self.opt_ty(m), self.tm(a), self.tm(b), self.tm(s))
            case ["refl", a]:
                return Refl(self.tm(a))
            case ["J", m, base, n0, n1, p]:
                return IdRec(self.ty(m), self.tm(base), self.opt_tm(n0), self.opt_tm(n1), self.tm(p))
            case ["code", a]:
                return Enc(self.ty(a))
            case ["lam", mu, b]:
                return Lam(self.opt_path(mu), self.tm(b))
            case ["app", mu, f, a]:
                return App(self.tm(f), self.tm(a), self.opt_path(mu))
            case ["pair", a, b]:
                return Pair(self.tm(a), self.tm(b))
            case ["fst", a]:
                return Proj0(self.tm(a))
            case ["snd", a]:
                return Proj1(self.tm(a))
            case ["mod", mu, a]:
                return MkBox(self.path(mu), self.tm(a))
            case ["let", nu, mu, m, s, br]:
                return Open(self.path(nu), self.path(mu), self.opt_ty(m), self.tm(s), self.tm(br))
            case ["axiom", name, a] if isinstance(name, str):
                return Axiom(name, self.ty(a))
            case ["the", name, a, m] if isinstance(name, str):
                return Ann(self.tm(m), self.ty(a), "" if name == "_" else name)
            case ["sub", a, s]:
                return TmSub(self.tm(a), self.sub(s))
        raise CoreParseError(f"bad term {x!r}")

    def sub(self, x) -> Sub:
        match x:
            case "emp":
                return EMP
            case "wk":
                return WK
            case "id":
                return ID
            case ["comp", a, b]:
                return Comp(self.sub(a), self.sub(b))
            case ["lock", mu, a]:
                return LockSub(self.path(mu), self.sub(a))
            case ["key", c, g]:
                return Key(self.cell(c), self.ctx(g))
            case ["ext", a, mu, m]:
                return ExtSub(self.sub(a), self.tm(m), self.path(mu))
        raise CoreParseError(f"bad substitution {x!r}")


def parse_core(text: str, th: ModeTheory, sort: str = "tm"):
    """Parse one core expression of the given sort (tm, ty, sub, ctx)."""
    return getattr(CoreReader(th), sort)(_sexp(text))
