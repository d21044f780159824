"""Substitution elimination.

A substitution is first normalized into an ``NSub``: a list of entries that
mirrors the codomain context (outermost first) over a base that is either a
weakening by ``shift`` variables or the empty substitution (``shift=None``).

* ``SExt(tm, mu, sh)`` covers an extension ``x :(mu) A``; the term lives behind
  a ``mu`` lock and still has to be weakened by ``sh``.
* ``SLock(rho, dom, cell)`` covers a lock ``rho`` of the codomain.  ``dom`` is
  the slice of the domain it consumes (``"E"`` for an extension, a Path for a
  lock) and ``cell : rho ⇒ Locks(dom)``; ``None`` stands for the identity,
  which then requires the two words to coincide.

Lock words are tracked syntactically; where two eq_mod-equal words meet, a
``Canon`` cell mediates.
"""

from __future__ import annotations

from dataclasses import dataclass

from .mode_theory import (
    BoundaryMismatch,
    Canon,
    Cell,
    HComp,
    Id,
    ModeTheory,
    Path,
    VComp,
    compose_mod,
    ident,
)
from .syntax import (
    HOLE,
    Ann,
    App,
    Axiom,
    Bool,
    BoolRec,
    Comp,
    Dec,
    EmpSub,
    Enc,
    ExtSub,
    Ff,
    IdRec,
    IdSub,
    IdTy,
    Key,
    Lam,
    Lift,
    LockSub,
    MkBox,
    Modal,
    Open,
    Pair,
    Pi,
    Proj0,
    Proj1,
    Refl,
    Sigma,
    Sub,
    Tm,
    TmSub,
    Tt,
    Ty,
    TySub,
    Uni,
    Var,
    Wk,
    shift,
    shift_ty,
)


class IllFormedSubstitution(Exception):
    pass


@dataclass(frozen=True)
class SExt:
    tm: Tm
    mu: Path
    sh: int = 0


@dataclass(frozen=True)
class SLock:
    rho: Path
    dom: tuple
    cell: Cell | None = None


@dataclass(frozen=True)
class NSub:
    entries: tuple = ()
    shift: int | None = 0

    @property
    def is_id(self) -> bool:
        return not self.entries and self.shift == 0


ID_N = NSub()


def ext_count(dom) -> int:
    return sum(1 for d in dom if d == "E")


def dom_word(dom) -> tuple[str, ...]:
    out: tuple[str, ...] = ()
    for d in dom:
        if d != "E":
            out += d.word
    return out


def _clean_dom(dom) -> tuple:
    return tuple(d for d in dom if d == "E" or not d.is_id)


# ---------------------------------------------------------------------------
# cells


def is_trivial(c) -> bool:
    match c:
        case None:
            return True
        case Id(_):
            return True
        case Canon(s, d):
            return s.word == d.word
        case VComp(a, b) | HComp(a, b):
            return is_trivial(a) and is_trivial(b)
    return False


def simp(c):
    """Drop identity factors and fuse identities; ``None`` for the identity on 1."""
    match c:
        case None:
            return None
        case Id(p):
            return None if p.is_id else c
        case Canon(s, d) if s.word == d.word:
            return None if s.is_id else Id(s)
        case VComp(a, b):
            a, b = simp(a), simp(b)
            if a is None or isinstance(a, Id):
                return b if b is not None or a is None else a
            if b is None or isinstance(b, Id):
                return a
            return VComp(a, b)
        case HComp(a, b):
            a, b = simp(a), simp(b)
            if a is None:
                return b
            if b is None:
                return a
            if isinstance(a, Id) and isinstance(b, Id):
                return Id(compose_mod(a.path, b.path))
            return HComp(a, b)
    return c


def vc(a, b):
    """Vertical composite, ``a`` first; ``None`` is a unit."""
    if a is None:
        return b
    if b is None:
        return a
    return VComp(a, b)


def hc(parts):
    """Horizontal composite of (cell | None, path) pairs, outermost first."""
    if all(c is None for c, _ in parts):
        return None
    out = None
    for c, p in parts:
        x = c if c is not None else (None if p.is_id else Id(p))
        if x is None:
            continue
        out = x if out is None else HComp(out, x)
    return out


# ---------------------------------------------------------------------------
# normalizing substitutions


class Engine:
    """Pushes substitutions through terms for a fixed mode theory."""

    def __init__(self, th: ModeTheory):
        self.th = th

    # -- building ----------------------------------------------------------

    def of(self, s: Sub) -> NSub:
        match s:
            case IdSub():
                return ID_N
            case Wk():
                return NSub((), 1)
            case EmpSub():
                return NSub((), None)
            case Comp(f, g):
                return self.compose(self.of(f), self.of(g))
            case LockSub(mu, a):
                return lock(self.of(a), mu)
            case Key(c, _):
                src, dst = self.th.boundary(c)
                return NSub((SLock(src, _clean_dom((dst,)), c),), 0)
            case ExtSub(a, m, mu):
                base = self.of(a)
                return NSub(base.entries + (SExt(self.eliminate(m), mu),), base.shift)
        raise TypeError(f"not a substitution: {s!r}")

    def split(self, tau: NSub, D: tuple):
        """Peel off the slice of ``tau``'s domain lying over the codomain slice ``D``."""
        ents = tau.entries
        j = len(ents)
        got_dom: list = []
        got_cells: list = []
        pos = len(D)
        while pos > 0:
            while j > 0 and isinstance(ents[j - 1], SLock) and ents[j - 1].rho.is_id:
                e = ents[j - 1]
                got_dom[:0] = list(e.dom)
                got_cells.insert(0, (e.cell, e.rho))
                j -= 1
            if j == 0:
                break
            d = D[pos - 1]
            e = ents[j - 1]
            if d == "E":
                if not isinstance(e, SExt):
                    raise IllFormedSubstitution("extension of the domain meets a lock of the substitution")
            else:
                if not isinstance(e, SLock) or e.rho.word != d.word:
                    raise IllFormedSubstitution(f"lock {d} of the domain is not matched by the substitution")
                got_dom[:0] = list(e.dom)
                got_cells.insert(0, (e.cell, e.rho))
            j -= 1
            pos -= 1
        if pos > 0:
            outer = D[:pos]
            if tau.shift is None:
                raise IllFormedSubstitution("substitution into the empty context has no room for locks")
            locks = [d for d in outer if d != "E"]
            if locks:
                got_cells.insert(0, (None, _concat(locks)))
            new_dom = tuple(outer) + ("E",) * tau.shift + tuple(got_dom)
            return NSub((), 0), new_dom, hc(got_cells)
        return NSub(ents[:j], tau.shift), tuple(got_dom), hc(got_cells)

    def drop(self, tau: NSub, n: int) -> NSub:
        """``Wk^n`` followed by ``tau``."""
        if n == 0:
            return tau
        rest, dom, cell = self.split(tau, ("E",) * n)
        paths = [d for d in dom if d != "E"]
        if not paths and is_trivial(cell):
            for _ in range(len(dom)):
                rest = weaken(rest)
            return rest
        mode = paths[0].dst if paths else self.th.boundary(cell)[1].dst
        return NSub(rest.entries + (SLock(ident(mode), dom, cell),), rest.shift)

    def compose(self, sigma: NSub, tau: NSub) -> NSub:
        """The substitution acting as ``sigma`` then ``tau``."""
        if tau.is_id:
            return sigma
        if sigma.is_id:
            return tau
        out = []
        cur = tau
        for e in reversed(sigma.entries):
            if isinstance(e, SExt):
                base = self.drop(cur, e.sh)
                out.append(SExt(self.tm(e.tm, lock(base, e.mu)), e.mu))
            else:
                cur, dom, gamma = self.split(cur, e.dom)
                out.append(SLock(e.rho, dom, vc(e.cell, gamma)))
        out.reverse()
        if sigma.shift is None:
            return NSub(tuple(out), None)
        cur = self.drop(cur, sigma.shift)
        return NSub(cur.entries + tuple(out), cur.shift)

    # -- variables ---------------------------------------------------------

    def var(self, sigma: NSub, i: int, alpha) -> Tm:
        if alpha is HOLE:
            raise IllFormedSubstitution("unsolved 2-cell placeholder reached substitution")
        idx = i
        walked: list[SLock] = []
        found = None
        for e in reversed(sigma.entries):
            if isinstance(e, SExt):
                if idx == 0:
                    found = e
                    break
                idx -= 1
            else:
                walked.insert(0, e)
        dsuf: tuple = ()
        for e in walked:
            dsuf += e.dom
        n_ext = ext_count(dsuf)
        beta = hc([(e.cell, e.rho) for e in walked])
        if found is not None:
            c = vc(alpha, beta)
            if isinstance(found.tm, Var) and found.tm.idx == 0 and found.tm.cell is None:
                # a renaming: the cell simply carries over to the new variable
                return Var(found.sh + n_ext, simp(c))
            if is_trivial(c) or (self.th.enrichment == "poset" and found.mu.word == dom_word(dsuf)):
                return shift(found.tm, 0, found.sh + n_ext)
            rho = found.mu if not found.mu.is_id else ident(self.th.boundary(c)[0].src)
            sub = NSub((SLock(rho, ("E",) * found.sh + dsuf, c),), 0)
            return self.tm(found.tm, sub)
        if sigma.shift is None:
            raise IllFormedSubstitution(f"variable {i} is not covered by the substitution")
        new_idx = idx + sigma.shift + n_ext
        if beta is None:
            return Var(new_idx, alpha)
        rho_all = _concat([e.rho for e in walked])
        a = alpha if alpha is not None else Id(ident(rho_all.dst))
        _, dst = self.th.boundary(a)
        rw = rho_all.word
        if dst.word[len(dst.word) - len(rw):] != rw:
            raise IllFormedSubstitution(f"annotation ending in {dst} does not end with the locks {rho_all}")
        rest = Path(rho_all.dst, dst.dst, dst.word[:len(dst.word) - len(rw)])
        cell = vc(a, hc([(None, rest), (beta, rho_all)]))
        return Var(new_idx, simp(cell))

    # -- traversal ---------------------------------------------------------

    def tm(self, t: Tm, s: NSub) -> Tm:
        if s.is_id:
            return t
        if not s.entries:
            if s.shift is not None:
                return shift(t, 0, s.shift)
        return self._tm(t, s)

    def ty(self, a: Ty, s: NSub) -> Ty:
        if s.is_id:
            return a
        if not s.entries and s.shift is not None:
            return shift_ty(a, 0, s.shift)
        return self._ty(a, s)

    def _tm(self, t: Tm, s: NSub) -> Tm:
        if t is None:
            return None
        match t:
            case Var(i, cell):
                return self.var(s, i, cell)
            case Tt() | Ff():
                return t
            case BoolRec(m, a, b, sc):
                return BoolRec(self.ty(m, lift(s, None)) if m is not None else None,
                               self.tm(a, s), self.tm(b, s), self.tm(sc, s))
            case Refl(a):
                return Refl(self.tm(a, s))
            case IdRec(m, base, n0, n1, p):
                return IdRec(self.ty(m, lift(lift(lift(s, None), None), None)), self.tm(base, lift(s, None)),
                             self.tm(n0, s) if n0 is not None else None,
                             self.tm(n1, s) if n1 is not None else None, self.tm(p, s))
            case Enc(a):
                return Enc(self.ty(a, s))
            case Lam(mu, b):
                return Lam(mu, self.tm(b, lift(s, mu)))
            case App(f, a, mu):
                return App(self.tm(f, s), self.tm(a, lock(s, mu)), mu)
            case Pair(a, b):
                return Pair(self.tm(a, s), self.tm(b, s))
            case Proj0(a):
                return Proj0(self.tm(a, s))
            case Proj1(a):
                return Proj1(self.tm(a, s))
            case MkBox(mu, a):
                return MkBox(mu, self.tm(a, lock(s, mu)))
            case Open(nu, mu, m, sc, br):
                return Open(nu, mu, self.ty(m, lift(s, nu)) if m is not None else None,
                            self.tm(sc, lock(s, nu)), self.tm(br, lift(s, compose_mod(nu, mu))))
            case Axiom(name, a):
                return Axiom(name, self.ty(a, s))
            case Ann():
                return t
            case TmSub(a, s0):
                return self.tm(self.eliminate(a), self.compose(self.of(s0), s))
        raise TypeError(f"not a term: {t!r}")

    def _ty(self, a: Ty, s: NSub) -> Ty:
        match a:
            case Bool() | Uni():
                return a
            case Dec(m):
                return Dec(self.tm(m, s))
            case Lift(lv, b):
                return Lift(lv, self.ty(b, s))
            case IdTy(b, x, y):
                return IdTy(self.ty(b, s), self.tm(x, s), self.tm(y, s))
            case Pi(mu, d, c):
                return Pi(mu, self.ty(d, lock(s, mu)), self.ty(c, lift(s, mu)))
            case Sigma(d, c):
                return Sigma(self.ty(d, s), self.ty(c, lift(s, None)))
            case Modal(mu, b):
                return Modal(mu, self.ty(b, lock(s, mu)))
            case TySub(b, s0):
                return self.ty(self.eliminate_ty(b), self.compose(self.of(s0), s))
        raise TypeError(f"not a type: {a!r}")

    # -- explicit substitution nodes ---------------------------------------

    def eliminate(self, t):
        """Remove every TmSub/TySub node inside ``t``."""
        if t is None:
            return None
        if isinstance(t, TmSub):
            return self.tm(self.eliminate(t.tm), self.of(t.sub))
        if isinstance(t, TySub):
            return self.ty(self.eliminate_ty(t.ty), self.of(t.sub))
        if isinstance(t, (Tm, Ty)):
            changed = {}
            for f in t.__dataclass_fields__:
                v = getattr(t, f)
                if isinstance(v, (Tm, Ty)):
                    nv = self.eliminate(v)
                    if nv is not v:
                        changed[f] = nv
            if changed:
                return type(t)(**{f: changed.get(f, getattr(t, f)) for f in t.__dataclass_fields__})
        return t

    eliminate_ty = eliminate

    def push(self, t, s: Sub):
        """``push_subst``: the term or type ``t[s]`` without explicit substitutions."""
        t = self.eliminate(t)
        ns = self.of(s)
        if isinstance(t, Ty):
            return self.ty(t, ns)
        return self.tm(t, ns)

    # -- conveniences used by the checker and reduction --------------------

    def inst(self, body, arg: Tm, mu: Path):
        """``body[id.arg]`` for a body over one more variable bound at ``mu``."""
        s = NSub((SExt(arg, mu),), 0)
        return self.ty(body, s) if isinstance(body, Ty) else self.tm(body, s)

    def inst_under(self, body, arg: Tm, mu: Path, k: int):
        """Substitute the variable ``k`` binders out (only extensions in between)."""
        s = NSub((SExt(arg, mu),), 0)
        for _ in range(k):
            s = lift(s, None)
        return self.ty(body, s) if isinstance(body, Ty) else self.tm(body, s)

    def key(self, t, cell: Cell, depth: int = 0):
        """``t[Key(cell)]`` where ``t`` lives over ``depth`` extensions past the lock."""
        src, dst = self.th.boundary(cell)
        s = NSub((SLock(src, _clean_dom((dst,)), cell),), 0)
        for _ in range(depth):
            s = lift(s, None)
        return self.ty(t, s) if isinstance(t, Ty) else self.tm(t, s)

    def under_lock(self, t, nu: Path, s: NSub):
        return self.ty(t, lock(s, nu)) if isinstance(t, Ty) else self.tm(t, lock(s, nu))


def _concat(paths) -> Path:
    out = None
    for p in paths:
        out = p if out is None else compose_mod(out, p)
    return out


def weaken(s: NSub) -> NSub:
    ents = list(s.entries)
    for j in range(len(ents) - 1, -1, -1):
        e = ents[j]
        if isinstance(e, SLock):
            ents[j] = SLock(e.rho, e.dom + ("E",), e.cell)
            return NSub(tuple(ents), s.shift)
        ents[j] = SExt(e.tm, e.mu, e.sh + 1)
    return NSub(tuple(ents), None if s.shift is None else s.shift + 1)


def lift(s: NSub, mu: Path | None) -> NSub:
    """Extend a substitution under a binder at ``mu`` (``None``: identity modality)."""
    if s.is_id:
        return s
    w = weaken(s)
    return NSub(w.entries + (SExt(Var(0, _id_cell(mu)), mu if mu is not None else _ID_PLACEHOLDER),), w.shift)


def lock(s: NSub, mu: Path | None) -> NSub:
    if mu is None or mu.is_id or s.is_id:
        return s
    return NSub(s.entries + (SLock(mu, (mu,), None),), s.shift)


def _id_cell(mu):
    if mu is None or mu.is_id:
        return None
    return Id(mu)


# A binder at the identity modality whose mode is irrelevant: the term stored
# for it is a variable with the trivial cell, so the fast path always applies.
_ID_PLACEHOLDER = Path("·", "·", ())


def check_no_subst(x) -> bool:
    from .syntax import has_explicit_sub

    return not has_explicit_sub(x)


__all__ = [
    "BoundaryMismatch",
    "Engine",
    "IllFormedSubstitution",
    "NSub",
    "SExt",
    "SLock",
    "lift",
    "lock",
    "weaken",
]
