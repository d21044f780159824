"""Definitional equality: weak-head reduction, normal forms, conversion and closed evaluation.

Terms handed to the reducer are free of explicit substitutions (any that
remain are eliminated on sight).  Conversion compares weak-head forms, with
η for Π and Σ decided by the shape of either side and no η for modal types.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Callable

from .mode_theory import BoundaryMismatch, Canon, Gen, Id, ModeTheory, ModeTheoryError, Path, ident
from .subst import Engine, IllFormedSubstitution, NSub, SLock, _ID_PLACEHOLDER as ONE, lock
from .syntax import (
    Ann,
    App,
    Axiom,
    Bool,
    BoolRec,
    Dec,
    Enc,
    Ff,
    IdRec,
    IdTy,
    Lam,
    Lift,
    MkBox,
    Modal,
    Open,
    Pair,
    Pi,
    Proj0,
    Proj1,
    Refl,
    Sigma,
    Tm,
    TmSub,
    Tt,
    Ty,
    TySub,
    Uni,
    Var,
    shift,
    shift_ty,
)

DEFAULT_FUEL = 10_000


class FuelExhausted(Exception):
    def __init__(self, fuel: int):
        super().__init__(f"fuel exhausted after {fuel} axiom unfoldings")
        self.fuel = fuel


class NonCanonicalAxiom(Exception):
    def __init__(self, name: str):
        super().__init__(f"axiom {name} blocks canonicity")
        self.name = name


class CanonicityViolation(AssertionError):
    pass


class OpenTerm(Exception):
    """Closed evaluation was asked to run on a term with free variables or parameters."""


class Fuel:
    """Per-call budget of axiom unfoldings."""

    def __init__(self, amount: int = DEFAULT_FUEL):
        if amount <= 0:
            raise ValueError("fuel must be positive")
        self.initial = amount
        self.left = amount

    def spend(self):
        if self.left <= 0:
            raise FuelExhausted(self.initial)
        self.left -= 1


def ensure_stack():
    if sys.getrecursionlimit() < 20000:
        sys.setrecursionlimit(20000)


# ---------------------------------------------------------------------------
# axioms


@dataclass(frozen=True)
class AxiomSchema:
    """A named constant whose type is computed from a type parameter."""

    name: str
    mode: str | None
    type_of: Callable[[Engine, Ty], Ty]
    unfold: Callable[[Engine, Ty, Tm], Tm] | None = None


def lob_schema(th: ModeTheory) -> AxiomSchema:
    """``lob A : (⟨ℓ|A^tick⟩ → A) → A`` at the mode of ℓ, unfolding to ``M(next(lob A M))``."""
    gens1, gens2 = th.gens1, th.gens2
    if "ℓ" not in gens1 or "tick" not in gens2:
        raise ModeTheoryError(f"theory {th.name} has no later modality ℓ with tick : 1 ⇒ ℓ")
    later = th.gen("ℓ")
    mode = later.src
    one = ident(mode)
    tick = Gen("tick")

    def type_of(eng: Engine, a: Ty) -> Ty:
        dom = Pi(one, Modal(later, eng.key(a, tick)), shift_ty(a))
        return Pi(one, dom, shift_ty(a))

    def unfold(eng: Engine, a: Ty, m: Tm) -> Tm:
        rec = App(Axiom("lob", a), m, one)
        return App(m, MkBox(later, eng.key(rec, tick)), one)

    return AxiomSchema("lob", mode, type_of, unfold)


def postulate(name: str, mode: str) -> AxiomSchema:
    """A user axiom whose parameter is its own (closed) type."""
    return AxiomSchema(name, mode, lambda eng, a: a, None)


# ---------------------------------------------------------------------------
# reduction


class Reducer:
    def __init__(self, th: ModeTheory, axioms: dict[str, AxiomSchema] | None = None,
                 fuel: Fuel | int | None = None):
        ensure_stack()
        self.th = th
        self.eng = Engine(th)
        self.axioms = axioms if axioms is not None else {}
        self.fuel = fuel if isinstance(fuel, Fuel) else Fuel(fuel or DEFAULT_FUEL)
        self.steps = 0

    # -- helpers -----------------------------------------------------------

    def cast_box(self, m: Tm, nu: Path | None, src: Path, dst: Path) -> Tm:
        """Move a term living behind ``src`` (under ``nu``) to behind the eq_mod-equal ``dst``."""
        if src.word == dst.word:
            return m
        s = lock(NSub(), nu) if nu is not None else NSub()
        s = NSub(s.entries + (SLock(src, (dst,) if not dst.is_id else (), Canon(src, dst)),), 0)
        return self.eng.tm(m, s)

    def _unfoldable(self, t: Tm) -> bool:
        if isinstance(t, App) and isinstance(t.fn, Axiom):
            ax = self.axioms.get(t.fn.name)
            return ax is not None and ax.unfold is not None
        return False

    # -- weak head ---------------------------------------------------------

    def whnf(self, t: Tm, unfold: bool = False) -> Tm:
        """Weak-head normal form; ``unfold`` allows axiom unfoldings at the head."""
        eng = self.eng
        while True:
            self.steps += 1
            match t:
                case Ann(m, _, _):
                    t = m
                case TmSub():
                    t = eng.eliminate(t)
                case App(f, a, mu):
                    f1 = self.whnf(f, True)
                    if isinstance(f1, Lam):
                        arg = self.cast_box(a, None, mu, f1.mu) if mu is not None and f1.mu is not None else a
                        t = eng.inst(f1.body, arg, f1.mu)
                        continue
                    t = App(f1, a, mu) if f1 is not f else t
                    if unfold and self._unfoldable(t):
                        self.fuel.spend()
                        ax = self.axioms[t.fn.name]
                        t = ax.unfold(eng, t.fn.ty, t.arg)
                        continue
                    return t
                case Proj0(p):
                    p1 = self.whnf(p, True)
                    if isinstance(p1, Pair):
                        t = p1.fst
                        continue
                    return Proj0(p1)
                case Proj1(p):
                    p1 = self.whnf(p, True)
                    if isinstance(p1, Pair):
                        t = p1.snd
                        continue
                    return Proj1(p1)
                case BoolRec(m, a, b, s):
                    s1 = self.whnf(s, True)
                    if isinstance(s1, Tt):
                        t = a
                        continue
                    if isinstance(s1, Ff):
                        t = b
                        continue
                    return BoolRec(m, a, b, s1)
                case IdRec(m, base, n0, n1, p):
                    p1 = self.whnf(p, True)
                    if isinstance(p1, Refl):
                        t = eng.inst(base, p1.tm, ONE)
                        continue
                    return IdRec(m, base, n0, n1, p1)
                case Open(nu, mu, m, s, br):
                    s1 = self.whnf(s, True)
                    if isinstance(s1, MkBox):
                        m0 = self.cast_box(s1.tm, nu, s1.mu, mu)
                        t = eng.inst(br, m0, _comp(nu, mu))
                        continue
                    return Open(nu, mu, m, s1, br)
                case Enc(a):
                    a1 = self.whnf_ty(a)
                    if isinstance(a1, Dec):
                        t = a1.tm
                        continue
                    return t
                case _:
                    return t

    def whnf_ty(self, a: Ty, unfold: bool = False) -> Ty:
        """Weak-head form of a type; lifts are erased, ``Dec`` unfolds axioms only on request."""
        while True:
            match a:
                case Lift(_, b):
                    a = b
                case TySub():
                    a = self.eng.eliminate(a)
                case Dec(m):
                    m1 = self.whnf(m, unfold)
                    if isinstance(m1, Enc):
                        a = m1.ty
                        continue
                    return Dec(m1)
                case _:
                    return a

    # -- normal forms ------------------------------------------------------

    def nf(self, t: Tm) -> Tm:
        t = self.whnf(t)
        match t:
            case Var() | Tt() | Ff() | Axiom():
                return Axiom(t.name, self.nf_ty(t.ty)) if isinstance(t, Axiom) else t
            case Lam(mu, b):
                return Lam(mu, self.nf(b))
            case App(f, a, mu):
                return App(self.nf(f), self.nf(a), mu)
            case Pair(a, b):
                return Pair(self.nf(a), self.nf(b))
            case Proj0(a):
                return Proj0(self.nf(a))
            case Proj1(a):
                return Proj1(self.nf(a))
            case MkBox(mu, a):
                return MkBox(mu, self.nf(a))
            case Refl(a):
                return Refl(self.nf(a))
            case Enc(a):
                return Enc(self.nf_ty(a))
            case BoolRec(m, a, b, s):
                return BoolRec(self.nf_ty(m) if m is not None else None, self.nf(a), self.nf(b), self.nf(s))
            case IdRec(m, base, n0, n1, p):
                return IdRec(self.nf_ty(m), self.nf(base), n0 and self.nf(n0), n1 and self.nf(n1), self.nf(p))
            case Open(nu, mu, m, s, br):
                return Open(nu, mu, self.nf_ty(m) if m is not None else None, self.nf(s), self.nf(br))
        raise TypeError(f"unexpected weak-head form {t!r}")

    def nf_ty(self, a: Ty) -> Ty:
        a = self.whnf_ty(a)
        match a:
            case Bool() | Uni():
                return a
            case Dec(m):
                return Dec(self.nf(m))
            case IdTy(b, x, y):
                return IdTy(self.nf_ty(b), self.nf(x), self.nf(y))
            case Pi(mu, d, c):
                return Pi(mu, self.nf_ty(d), self.nf_ty(c))
            case Sigma(d, c):
                return Sigma(self.nf_ty(d), self.nf_ty(c))
            case Modal(mu, b):
                return Modal(mu, self.nf_ty(b))
        raise TypeError(f"unexpected type form {a!r}")

    # -- conversion --------------------------------------------------------

    def eq_mod(self, a: Path | None, b: Path | None) -> bool:
        if a is None or b is None:
            return (a is None or a.is_id) and (b is None or b.is_id)
        if a.word == b.word:
            return (a.src, a.dst) == (b.src, b.dst) or not a.word
        return (a.src, a.dst) == (b.src, b.dst) and self.th.eq_mod(a, b)

    def eq_cells(self, c, d) -> bool:
        if c == d:
            return True
        try:
            if c is None or d is None:
                e = d if c is None else c
                s, t = self.th.boundary(e)
                one = ident(s.src)
                if not (self.th.eq_mod(s, one) and self.th.eq_mod(t, one)):
                    return False
                return self.th.enrichment == "poset" or self.th.eq_cell(e, Id(one))
            return self.th.eq_cell(c, d)
        except BoundaryMismatch:
            return False

    def conv(self, a: Tm, b: Tm) -> bool:
        if a == b:
            return True
        a1, b1 = self.whnf(a), self.whnf(b)
        if a1 == b1:
            return True
        match a1, b1:
            case Lam(mu, x), Lam(nu, y):
                return self.eq_mod(mu, nu) and self.conv(x, y)
            case Lam(mu, x), _:
                return self.conv(x, _eta_app(b1, mu))
            case _, Lam(mu, y):
                return self.conv(_eta_app(a1, mu), y)
            case (Pair(), _) | (_, Pair()):
                return self.conv(Proj0(a1), Proj0(b1)) and self.conv(Proj1(a1), Proj1(b1))
            case Enc(x), Enc(y):
                return self.conv_ty(x, y)
            case Enc(x), _:
                return self.conv_ty(x, Dec(b1))
            case _, Enc(y):
                return self.conv_ty(Dec(a1), y)
            case MkBox(mu, x), MkBox(nu, y):
                return self.eq_mod(mu, nu) and self.conv(x, y)
            case Refl(x), Refl(y):
                return self.conv(x, y)
            case Tt(), Tt():
                return True
            case Ff(), Ff():
                return True
        if _is_intro(a1) or _is_intro(b1):
            return False
        if self.conv_ne(a1, b1):
            return True
        # a stuck axiom may still unfold into agreement when scrutinized
        a2, b2 = self.whnf(a1, True), self.whnf(b1, True)
        if a2 != a1 or b2 != b1:
            return self.conv(a2, b2)
        return False

    def conv_ne(self, a: Tm, b: Tm) -> bool:
        match a, b:
            case Var(i, c), Var(j, d):
                return i == j and self.eq_cells(c, d)
            case App(f, x, mu), App(g, y, nu):
                return self.eq_mod(mu, nu) and self.conv(f, g) and self.conv(x, y)
            case Proj0(x), Proj0(y):
                return self.conv(x, y)
            case Proj1(x), Proj1(y):
                return self.conv(x, y)
            case BoolRec(m, t, f, s), BoolRec(m2, t2, f2, s2):
                return (self.conv(s, s2) and self._conv_motive(m, m2) and self.conv(t, t2)
                        and self.conv(f, f2))
            case IdRec(m, base, _, _, p), IdRec(m2, base2, _, _, p2):
                return self.conv(p, p2) and self.conv_ty(m, m2) and self.conv(base, base2)
            case Open(nu, mu, m, s, br), Open(nu2, mu2, m2, s2, br2):
                return (self.eq_mod(nu, nu2) and self.eq_mod(mu, mu2) and self.conv(s, s2)
                        and self._conv_motive(m, m2) and self.conv(br, br2))
            case Axiom(n, x), Axiom(n2, y):
                return n == n2 and self.conv_ty(x, y)
        return False

    def _conv_motive(self, m, m2) -> bool:
        if m is None or m2 is None:
            return True
        return self.conv_ty(m, m2)

    def conv_ty(self, a: Ty, b: Ty) -> bool:
        if a == b:
            return True
        a1, b1 = self.whnf_ty(a), self.whnf_ty(b)
        if a1 == b1:
            return True
        match a1, b1:
            case Dec(m), Dec(n):
                if self.conv(m, n):
                    return True
            case Bool(), Bool():
                return True
            case Uni(), Uni():
                return True
            case Pi(mu, d, c), Pi(nu, d2, c2):
                return self.eq_mod(mu, nu) and self.conv_ty(d, d2) and self.conv_ty(c, c2)
            case Sigma(d, c), Sigma(d2, c2):
                return self.conv_ty(d, d2) and self.conv_ty(c, c2)
            case Modal(mu, x), Modal(nu, y):
                return self.eq_mod(mu, nu) and self.conv_ty(x, y)
            case IdTy(x, l, r), IdTy(y, l2, r2):
                return self.conv_ty(x, y) and self.conv(l, l2) and self.conv(r, r2)
        if isinstance(a1, Dec) or isinstance(b1, Dec):
            a2, b2 = self.whnf_ty(a1, True), self.whnf_ty(b1, True)
            if a2 != a1 or b2 != b1:
                return self.conv_ty(a2, b2)
        return False


def _comp(nu: Path, mu: Path) -> Path:
    from .mode_theory import compose_mod

    return compose_mod(nu, mu)


def _eta_app(f: Tm, mu: Path | None) -> Tm:
    cell = None if mu is None or mu.is_id else Id(mu)
    return App(shift(f), Var(0, cell), mu)


def _is_intro(t: Tm) -> bool:
    return isinstance(t, (Lam, Pair, MkBox, Refl, Tt, Ff, Enc))


def head_of(t: Tm) -> Tm:
    """The head of a neutral: a variable or an axiom."""
    while True:
        match t:
            case App(f, _, _):
                t = f
            case Proj0(p) | Proj1(p):
                t = p
            case BoolRec(_, _, _, s):
                t = s
            case IdRec(_, _, _, _, p):
                t = p
            case Open(_, _, _, s, _):
                t = s
            case _:
                return t


def free_vars(t, depth: int = 0) -> set[int]:
    """Free de Bruijn indices of a substitution-free term or type (relative to the outside)."""
    out: set[int] = set()

    def go(x, d):
        if x is None:
            return
        match x:
            case Var(i, _):
                if i >= d:
                    out.add(i - d)
            case Lam(_, b):
                go(b, d + 1)
            case Pi(_, a, b) | Sigma(a, b):
                go(a, d)
                go(b, d + 1)
            case BoolRec(m, a, b, s):
                go(m, d + 1)
                go(a, d)
                go(b, d)
                go(s, d)
            case IdRec(m, base, n0, n1, p):
                go(m, d + 3)
                go(base, d + 1)
                go(n0, d)
                go(n1, d)
                go(p, d)
            case Open(_, _, m, s, br):
                go(m, d + 1)
                go(s, d)
                go(br, d + 1)
            case Ann():
                return
            case _:
                for f in getattr(x, "__dataclass_fields__", {}):
                    v = getattr(x, f)
                    if isinstance(v, (Tm, Ty)):
                        go(v, d)

    go(t, depth)
    return out


# ---------------------------------------------------------------------------
# closed evaluation


@dataclass(frozen=True)
class CanonicalReport:
    """Outcome of evaluating a closed term: its canonical form and a witness."""

    kind: str  # "bool", "mod", "refl", "whnf"
    value: Tm
    witness: Tm | None = None

    def __str__(self):
        from .syntax import pr_tm

        return pr_tm(self.value)


def eval_closed(th: ModeTheory, t: Tm, a: Ty, fuel: int = 1_000_000,
                axioms: dict[str, AxiomSchema] | None = None) -> CanonicalReport:
    """Evaluate a closed term to canonical form, asserting canonicity on the way."""
    if fv := free_vars(t):
        raise OpenTerm(f"term has free variables {sorted(fv)}")
    red = Reducer(th, axioms, fuel)
    ty = red.whnf_ty(a, True)
    v = red.whnf(t, True)
    head = head_of(v)
    if isinstance(head, Axiom):
        raise NonCanonicalAxiom(head.name)
    if isinstance(head, Var):
        raise CanonicityViolation(f"closed term reduced to a neutral on variable {head.idx}")
    match ty:
        case Bool():
            if not isinstance(v, (Tt, Ff)):
                raise CanonicityViolation(f"closed boolean did not reduce to a literal: {v!r}")
            return CanonicalReport("bool", v)
        case Modal():
            if not isinstance(v, MkBox):
                raise CanonicityViolation("closed modal term did not reduce to mod")
            w = red.nf(v.tm)
            if free_vars(w):
                raise CanonicityViolation("modal witness mentions a free variable")
            return CanonicalReport("mod", MkBox(v.mu, w), w)
        case IdTy(_, lhs, rhs):
            if not isinstance(v, Refl):
                raise CanonicityViolation("closed identity proof did not reduce to refl")
            if not red.conv(lhs, rhs):
                raise CanonicityViolation("closed refl between unequal endpoints")
            return CanonicalReport("refl", v, red.nf(v.tm))
    return CanonicalReport("whnf", v)


__all__ = [
    "AxiomSchema",
    "CanonicalReport",
    "CanonicityViolation",
    "DEFAULT_FUEL",
    "Fuel",
    "FuelExhausted",
    "IllFormedSubstitution",
    "NonCanonicalAxiom",
    "OpenTerm",
    "Reducer",
    "eval_closed",
    "free_vars",
    "head_of",
    "lob_schema",
    "postulate",
]
