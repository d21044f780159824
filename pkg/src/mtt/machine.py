"""Environment-based evaluator: normalization by evaluation without substitution.

Every lock the evaluator passes through gets a fresh identity (a ``LockId``).
A neutral variable records the ids of the locks between its binder and its
use, together with its 2-cell into their composite.  Keys act on values by
replacing a run of lock ids with another run and whiskering the cell, so no
term is ever substituted into.  This is an independent check on the engine in
``subst``: the two must agree up to conversion.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .mode_theory import Canon, Cell, Gen, HComp, Id, ModeTheory, Path, VComp, compose_mod
from .reduction import FuelExhausted
from .syntax import (
    Ann, App, Axiom, Bool, BoolRec, Comp, Ctx, Dec, EmpSub, Empty, Enc, Extend, ExtSub, Ff, IdRec, IdSub, IdTy, Key,
    Lam, Lift, Lock, LockSub, MkBox, Modal, Open, Pair, Pi, Proj0, Proj1, Refl, Sigma, Sub, Tm, TmSub, Tt, Ty, TySub,
    Uni, Var, Wk,
)


class MachineError(Exception):
    """The evaluator met an ill-formed input (a bug in the caller or the term)."""


_uid = itertools.count()


@dataclass(frozen=True)
class LockId:
    uid: int
    mu: Path | None  # None or an identity path: a transparent lock

    @staticmethod
    def fresh(mu: Path | None) -> "LockId":
        return LockId(next(_uid), mu)


def _real(p: Path | None) -> bool:
    return p is not None and not p.is_id and p.src != "·"


def path_of(ids) -> Path | None:
    """Composite modality of a run of locks (``None`` when all are identities)."""
    out = None
    for k in ids:
        if _real(k.mu):
            out = k.mu if out is None else compose_mod(out, k.mu)
    return out


def _word(p: Path | None) -> tuple:
    return p.word if _real(p) else ()


def vc(first, second):
    """Vertical composite, ``None`` standing for an identity cell."""
    if first is None:
        return second
    if second is None:
        return first
    return VComp(first, second)


def hc(parts):
    """Horizontal composite of (cell-or-None, path-or-None) pairs, outermost first."""
    cells = []
    nontriv = False
    for c, p in parts:
        if c is not None:
            cells.append(c)
            nontriv = True
        elif _real(p):
            cells.append(Id(p))
    if not nontriv:
        return None
    out = cells[0]
    for c in cells[1:]:
        out = HComp(out, c)
    return out


def _strip_transparent(env: tuple) -> tuple:
    """Drop trailing identity locks that carry no cell."""
    while env and isinstance(env[-1], ELock) and not _real(env[-1].mu) and env[-1].cell is None \
            and path_of(env[-1].ids) is None:
        env = env[:-1]
    return env


def _canon(src: Path | None, dst: Path | None) -> Canon:
    """``Canon`` between two eq_mod-equal paths, either of which may be a bare identity."""
    if not _real(src):
        src = Path(dst.src, dst.dst, ())
    if not _real(dst):
        dst = Path(src.src, src.dst, ())
    return Canon(src, dst)


# ---------------------------------------------------------------------------
# values


class V:
    pass


@dataclass(frozen=True)
class VTt(V):
    pass


@dataclass(frozen=True)
class VFf(V):
    pass


@dataclass(frozen=True)
class Clo:
    """A body under ``len(mus)`` binders, with pending key actions for its environment."""

    env: tuple
    body: object
    mus: tuple
    keys: tuple = ()


@dataclass(frozen=True)
class VLam(V):
    mu: Path
    clo: Clo


@dataclass(frozen=True)
class VPair(V):
    fst: V
    snd: V


@dataclass(frozen=True)
class VBox(V):
    mu: Path
    v: V
    k: LockId


@dataclass(frozen=True)
class VRefl(V):
    v: V
    r: LockId  # the identity lock the content lives behind, so J can bind it


@dataclass(frozen=True)
class VEnc(V):
    ty: "TV"


@dataclass(frozen=True)
class NVar:
    level: int
    cell: object  # Cell | None: binding modality ⇒ path_of(ids)
    ids: tuple


@dataclass(frozen=True)
class NAx:
    name: str
    ty: "TV"
    r: LockId  # the identity lock the parameter lives behind


@dataclass(frozen=True)
class FApp:
    arg: V
    mu: Path | None
    r: tuple  # lock ids the argument lives behind


@dataclass(frozen=True)
class FFst:
    pass


@dataclass(frozen=True)
class FSnd:
    pass


@dataclass(frozen=True)
class FIf:
    motive: Clo | None
    t: V
    f: V


@dataclass(frozen=True)
class FJ:
    motive: Clo
    base: Clo
    n0: V | None
    n1: V | None


@dataclass(frozen=True)
class FOpen:
    nu: Path
    mu: Path
    motive: Clo | None
    branch: Clo
    k: LockId  # the lock the scrutinee lives behind


@dataclass(frozen=True)
class VNe(V):
    head: object
    spine: tuple = ()


class TV:
    pass


@dataclass(frozen=True)
class TBool(TV):
    pass


@dataclass(frozen=True)
class TUni(TV):
    pass


@dataclass(frozen=True)
class TDec(TV):
    v: V


@dataclass(frozen=True)
class TId(TV):
    ty: TV
    lhs: V
    rhs: V


@dataclass(frozen=True)
class TPi(TV):
    mu: Path
    dom: TV
    k: LockId
    cod: Clo


@dataclass(frozen=True)
class TSigma(TV):
    dom: TV
    cod: Clo


@dataclass(frozen=True)
class TModal(TV):
    mu: Path
    ty: TV
    k: LockId


# environment entries
@dataclass(frozen=True)
class EVar:
    v: V
    r: tuple  # lock ids the value lives behind (the binder's lock)
    mu: Path | None  # binding modality


@dataclass(frozen=True)
class ELock:
    mu: Path | None  # modality on the source side
    cell: object  # Cell | None : mu ⇒ path_of(ids)
    ids: tuple


# ---------------------------------------------------------------------------
# key action


@dataclass(frozen=True)
class KeyAct:
    """Replace the run ``old`` of lock ids by ``new`` along ``cell : path(old) ⇒ path(new)``."""

    old: tuple
    new: tuple
    cell: object


def _find(ids: tuple, run: tuple) -> int:
    n = len(run)
    for i in range(len(ids) - n + 1):
        if ids[i:i + n] == run:
            return i
    return -1


def _rewrite(ids: tuple, cell, ka: KeyAct):
    i = _find(ids, ka.old)
    if i < 0:
        return ids, cell
    pre, post = ids[:i], ids[i + len(ka.old):]
    whisker = hc([(None, path_of(pre)), (ka.cell, None), (None, path_of(post))]) if ka.cell is not None else None
    return pre + ka.new + post, vc(cell, whisker)


class Keyer:
    def __init__(self, ka: KeyAct):
        self.ka = ka

    def v(self, x: V) -> V:
        match x:
            case VTt() | VFf():
                return x
            case VLam(mu, c):
                return VLam(mu, self.clo(c))
            case VPair(a, b):
                return VPair(self.v(a), self.v(b))
            case VBox(mu, a, k):
                return VBox(mu, self.v(a), k)
            case VRefl(a, r):
                return VRefl(self.v(a), r)
            case VEnc(t):
                return VEnc(self.ty(t))
            case VNe(h, sp):
                return VNe(self.head(h), tuple(self.frame(f) for f in sp))
        raise MachineError(f"cannot key {x!r}")

    def head(self, h):
        match h:
            case NVar(l, c, ids):
                ids2, c2 = _rewrite(ids, c, self.ka)
                return NVar(l, c2, ids2)
            case NAx(n, t, r):
                return NAx(n, self.ty(t), r)
        raise MachineError(h)

    def frame(self, f):
        match f:
            case FApp(a, mu, r):
                return FApp(self.v(a), mu, r)
            case FFst() | FSnd():
                return f
            case FIf(m, t, e):
                return FIf(m and self.clo(m), self.v(t), self.v(e))
            case FJ(m, b, n0, n1):
                return FJ(self.clo(m), self.clo(b), n0 and self.v(n0), n1 and self.v(n1))
            case FOpen(nu, mu, m, br, k):
                return FOpen(nu, mu, m and self.clo(m), self.clo(br), k)
        raise MachineError(f)

    def ty(self, t: TV) -> TV:
        match t:
            case TBool() | TUni():
                return t
            case TDec(a):
                return TDec(self.v(a))
            case TId(a, x, y):
                return TId(self.ty(a), self.v(x), self.v(y))
            case TPi(mu, d, k, c):
                return TPi(mu, self.ty(d), k, self.clo(c))
            case TSigma(d, c):
                return TSigma(self.ty(d), self.clo(c))
            case TModal(mu, a, k):
                return TModal(mu, self.ty(a), k)
        raise MachineError(t)

    def clo(self, c: Clo) -> Clo:
        return Clo(c.env, c.body, c.mus, c.keys + (self.ka,))

    def env(self, env: tuple) -> tuple:
        out = []
        for e in env:
            if isinstance(e, EVar):
                out.append(EVar(self.v(e.v), e.r, e.mu))
            else:
                ids, cell = _rewrite(e.ids, e.cell, self.ka)
                out.append(ELock(e.mu, cell, ids))
        return tuple(out)


def key_value(x, ka: KeyAct):
    if not ka.old and not ka.new:
        return x
    k = Keyer(ka)
    return k.ty(x) if isinstance(x, TV) else k.v(x)


# ---------------------------------------------------------------------------
# the machine


def _id_path(mu: Path | None) -> Path | None:
    return mu if _real(mu) else None


class Machine:
    def __init__(self, th: ModeTheory, fuel: int = 10_000, lob: bool = True):
        self.th = th
        self.fuel = fuel
        self.lob = lob

    # -- fuel ----------------------------------------------------------------

    def _spend(self):
        if self.fuel <= 0:
            raise FuelExhausted(0)
        self.fuel -= 1

    # -- environments ----------------------------------------------------------

    @staticmethod
    def lock(env: tuple, mu: Path | None) -> tuple[tuple, LockId]:
        k = LockId.fresh(mu)
        return env + (ELock(mu, None, (k,)),), k

    def force(self, c: Clo, args) -> tuple:
        """The closure's environment with pending keys applied and ``args`` bound."""
        env = c.env
        for ka in c.keys:
            env = Keyer(ka).env(env)
        return env + tuple(args)

    def lookup(self, env: tuple, i: int, alpha) -> V:
        locks = []
        j = len(env) - 1
        seen = -1
        while j >= 0:
            e = env[j]
            if isinstance(e, EVar):
                seen += 1
                if seen == i:
                    break
            else:
                locks.append(e)
            j -= 1
        if j < 0:
            raise MachineError(f"variable {i} out of scope")
        e = env[j]
        locks.reverse()
        ids = tuple(k for lk in locks for k in lk.ids)
        lifted = hc([(lk.cell, lk.mu) for lk in locks])
        a = alpha if isinstance(alpha, Cell) else None
        cell = vc(a, lifted)
        if _word(path_of(e.r)) != _word(e.mu):
            cell = vc(_canon(path_of(e.r), e.mu), cell)
        if ids == e.r and cell is None:
            return e.v
        return key_value(e.v, KeyAct(e.r, ids, cell))

    def env_of(self, g: Ctx, depth: int = 0) -> tuple[tuple, int]:
        """The generic environment of a context: fresh neutrals for its variables."""
        match g:
            case Empty():
                return (), depth
            case Lock(p, mu):
                env, d = self.env_of(p, depth)
                return self.lock(env, mu)[0], d
            case Extend(p, mu, _):
                env, d = self.env_of(p, depth)
                return env + (self.fresh(d, mu),), d + 1
        raise MachineError(g)

    @staticmethod
    def fresh(level: int, mu: Path | None) -> EVar:
        r = LockId.fresh(mu)
        cell = Id(mu) if _real(mu) else None
        return EVar(VNe(NVar(level, cell, (r,))), (r,), mu)

    # -- substitutions ---------------------------------------------------------

    def sub(self, s: Sub, env: tuple) -> tuple:
        """Environment for the codomain of ``s``, given one for its domain."""
        match s:
            case IdSub():
                return env
            case Wk():
                env = _strip_transparent(env)
                if not env or not isinstance(env[-1], EVar):
                    raise MachineError("weakening past a lock")
                return env[:-1]
            case EmpSub():
                return ()
            case Comp(first, second):
                return self.sub(first, self.sub(second, env))
            case LockSub(mu, t):
                if env and isinstance(env[-1], ELock) and _word(env[-1].mu) == _word(mu):
                    return self.sub(t, env[:-1]) + (env[-1],)
                if not _real(mu):
                    return self.sub(t, env)
                raise MachineError(f"lock substitution at {mu} over a mismatched environment")
            case Key(alpha, _):
                src, dst = self.th.boundary(alpha)
                if env and isinstance(env[-1], ELock) and _word(env[-1].mu) == _word(dst):
                    last = env[-1]
                    return env[:-1] + (ELock(_id_path(src), vc(alpha, last.cell), last.ids),)
                if not _real(dst):
                    return env + (ELock(_id_path(src), alpha, ()),)
                raise MachineError(f"key {alpha} over a mismatched environment")
            case ExtSub(t, m, mu):
                base = self.sub(t, env)
                locked, k = self.lock(env, mu)
                return base + (EVar(self.eval(m, locked), (k,), mu),)
        raise MachineError(f"not a substitution: {s!r}")

    # -- evaluation ------------------------------------------------------------

    def eval(self, t: Tm, env: tuple) -> V:
        match t:
            case Var(i, c):
                return self.lookup(env, i, c)
            case Tt():
                return VTt()
            case Ff():
                return VFf()
            case Ann(m, _, _):
                return self.eval(m, ())
            case TmSub(m, s):
                return self.eval(m, self.sub(s, env))
            case Lam(mu, b):
                return VLam(mu, Clo(env, b, (mu,)))
            case App(f, a, mu):
                fv = self.eval(f, env)
                locked, k = self.lock(env, mu)
                return self.apply(fv, self.eval(a, locked), mu, (k,))
            case Pair(a, b):
                return VPair(self.eval(a, env), self.eval(b, env))
            case Proj0(p):
                return self.fst(self.eval(p, env))
            case Proj1(p):
                return self.snd(self.eval(p, env))
            case MkBox(mu, m):
                locked, k = self.lock(env, mu)
                return VBox(mu, self.eval(m, locked), k)
            case Refl(m):
                locked, r = self.lock(env, None)
                return VRefl(self.eval(m, locked), r)
            case Enc(a):
                tv = self.eval_ty(a, env)
                return tv.v if isinstance(tv, TDec) else VEnc(tv)
            case BoolRec(m, a, b, s):
                sv = self.scrut(self.eval(s, env))
                match sv:
                    case VTt():
                        return self.eval(a, env)
                    case VFf():
                        return self.eval(b, env)
                mot = Clo(env, m, (None,)) if m is not None else None
                return self._extend(sv, FIf(mot, self.eval(a, env), self.eval(b, env)))
            case IdRec(m, base, n0, n1, p):
                pv = self.scrut(self.eval(p, env))
                if isinstance(pv, VRefl):
                    return self.eval(base, env + (EVar(pv.v, (pv.r,), None),))
                return self._extend(pv, FJ(Clo(env, m, (None, None, None)), Clo(env, base, (None,)),
                                           None if n0 is None else self.eval(n0, env),
                                           None if n1 is None else self.eval(n1, env)))
            case Open(nu, mu, m, s, br):
                locked, k = self.lock(env, nu)
                sv = self.scrut(self.eval(s, locked))
                if isinstance(sv, VBox):
                    numu = compose_mod(nu, mu) if _real(nu) and _real(mu) else (_id_path(nu) or _id_path(mu))
                    binding = (k, sv.k)
                    return self.eval(br, env + (EVar(sv.v, binding, numu),))
                mot = Clo(env, m, (nu,)) if m is not None else None
                return self._extend(sv, FOpen(nu, mu, mot, Clo(env, br, (None,)), k))
            case Axiom(name, a):
                locked, r = self.lock(env, None)
                return VNe(NAx(name, self.eval_ty(a, locked), r))
        raise MachineError(f"cannot evaluate {t!r}")

    def eval_ty(self, a: Ty, env: tuple) -> TV:
        match a:
            case Bool():
                return TBool()
            case Uni():
                return TUni()
            case Lift(_, b):
                return self.eval_ty(b, env)
            case TySub(b, s):
                return self.eval_ty(b, self.sub(s, env))
            case Dec(m):
                v = self.eval(m, env)
                return v.ty if isinstance(v, VEnc) else TDec(v)
            case IdTy(b, x, y):
                return TId(self.eval_ty(b, env), self.eval(x, env), self.eval(y, env))
            case Pi(mu, d, c):
                locked, k = self.lock(env, mu)
                return TPi(mu, self.eval_ty(d, locked), k, Clo(env, c, (mu,)))
            case Sigma(d, c):
                return TSigma(self.eval_ty(d, env), Clo(env, c, (None,)))
            case Modal(mu, b):
                locked, k = self.lock(env, mu)
                return TModal(mu, self.eval_ty(b, locked), k)
        raise MachineError(f"cannot evaluate type {a!r}")

    # -- eliminators -----------------------------------------------------------

    @staticmethod
    def _extend(v: V, f) -> V:
        if not isinstance(v, VNe):
            raise MachineError(f"eliminating a non-neutral {v!r} with {f!r}")
        return VNe(v.head, v.spine + (f,))

    def apply(self, f: V, a: V, mu, r: tuple) -> V:
        f = self.scrut(f)
        if isinstance(f, VLam):
            return self.inst(f.clo, [EVar(a, r, f.mu)])
        return self._extend(f, FApp(a, mu, r))

    def inst(self, c: Clo, args):
        env = self.force(c, args)
        return self.eval_ty(c.body, env) if isinstance(c.body, Ty) else self.eval(c.body, env)

    def fst(self, p: V) -> V:
        p = self.scrut(p)
        return p.fst if isinstance(p, VPair) else self._extend(p, FFst())

    def snd(self, p: V) -> V:
        p = self.scrut(p)
        return p.snd if isinstance(p, VPair) else self._extend(p, FSnd())

    def scrut(self, v: V) -> V:
        """Unfold Löb at the head of a scrutinized value."""
        while (self.lob and isinstance(v, VNe) and isinstance(v.head, NAx) and v.head.name == "lob"
               and len(v.spine) == 1 and isinstance(v.spine[0], FApp)):
            self._spend()
            v = self._unfold_lob(v)
        return v

    def _unfold_lob(self, v: VNe) -> V:
        """``lob A M  ↦  M (mod ℓ (lob A M)^tick)``."""
        th = self.th
        later, tick = th.gen("ℓ"), Gen("tick")
        ax, app = v.head, v.spine[0]
        r_arg = LockId.fresh(None)  # the argument slot of the outer application
        k = LockId.fresh(later)  # the lock under mod ℓ
        r_ax, r_m = LockId.fresh(None), LockId.fresh(None)
        a2 = key_value(ax.ty, KeyAct((ax.r,), (r_arg, k, r_ax), tick))
        m2 = key_value(app.arg, KeyAct(app.r, (r_arg, k, r_m), tick))
        rec = VNe(NAx(ax.name, a2, r_ax), (FApp(m2, app.mu, (r_m,)),))
        fn = key_value(app.arg, KeyAct(app.r, (), None))
        return self.apply(fn, VBox(later, rec, k), None, (r_arg,))

    # -- readback ----------------------------------------------------------------

    def quote(self, v: V, depth: int) -> Tm:
        match v:
            case VTt():
                return Tt()
            case VFf():
                return Ff()
            case VLam(mu, c):
                return Lam(mu, self.quote(self.inst(c, [self.fresh(depth, mu)]), depth + 1))
            case VPair(a, b):
                return Pair(self.quote(a, depth), self.quote(b, depth))
            case VBox(mu, a, _):
                return MkBox(mu, self.quote(a, depth))
            case VRefl(a, _):
                return Refl(self.quote(a, depth))
            case VEnc(t):
                return Enc(self.quote_ty(t, depth))
            case VNe(h, sp):
                return self._quote_ne(h, sp, depth)
        raise MachineError(v)

    def _quote_ne(self, h, sp, depth) -> Tm:
        match h:
            case NVar(l, c, _):
                t = Var(depth - 1 - l, c)
            case NAx(n, a, _):
                t = Axiom(n, self.quote_ty(a, depth))
        for f in sp:
            match f:
                case FApp(a, mu, _):
                    t = App(t, self.quote(a, depth), mu)
                case FFst():
                    t = Proj0(t)
                case FSnd():
                    t = Proj1(t)
                case FIf(m, a, b):
                    mq = None if m is None else self.quote_ty(self.inst(m, [self.fresh(depth, None)]), depth + 1)
                    t = BoolRec(mq, self.quote(a, depth), self.quote(b, depth), t)
                case FJ(m, base, n0, n1):
                    xs = [self.fresh(depth + i, None) for i in range(3)]
                    mq = self.quote_ty(self.inst(m, xs), depth + 3)
                    bq = self.quote(self.inst(base, [self.fresh(depth, None)]), depth + 1)
                    t = IdRec(mq, bq, n0 and self.quote(n0, depth), n1 and self.quote(n1, depth), t)
                case FOpen(nu, mu, m, br, _):
                    numu = compose_mod(nu, mu) if _real(nu) and _real(mu) else (_id_path(nu) or _id_path(mu) or mu)
                    mq = None if m is None else self.quote_ty(self.inst(m, [self.fresh(depth, nu)]), depth + 1)
                    bq = self.quote(self.inst(br, [self.fresh(depth, numu)]), depth + 1)
                    t = Open(nu, mu, mq, t, bq)
        return t

    def quote_ty(self, a: TV, depth: int) -> Ty:
        match a:
            case TBool():
                return Bool()
            case TUni():
                return Uni()
            case TDec(v):
                return Dec(self.quote(v, depth))
            case TId(b, x, y):
                return IdTy(self.quote_ty(b, depth), self.quote(x, depth), self.quote(y, depth))
            case TPi(mu, d, _, c):
                return Pi(mu, self.quote_ty(d, depth), self.quote_ty(self.inst(c, [self.fresh(depth, mu)]), depth + 1))
            case TSigma(d, c):
                return Sigma(self.quote_ty(d, depth), self.quote_ty(self.inst(c, [self.fresh(depth, None)]), depth + 1))
            case TModal(mu, b, _):
                return Modal(mu, self.quote_ty(b, depth))
        raise MachineError(a)

    # -- entry points ------------------------------------------------------------

    def normalize(self, t: Tm, g: Ctx = Empty()) -> Tm:
        env, depth = self.env_of(g)
        return self.quote(self.eval(t, env), depth)

    def normalize_ty(self, a: Ty, g: Ctx = Empty()) -> Ty:
        env, depth = self.env_of(g)
        return self.quote_ty(self.eval_ty(a, env), depth)

    def normalize_sub(self, t, s: Sub, delta: Ctx):
        """Normal form of ``t[s]`` over ``delta``, computed by evaluating ``s`` to an environment."""
        env, depth = self.env_of(delta)
        env = self.sub(s, env)
        if isinstance(t, Ty):
            return self.quote_ty(self.eval_ty(t, env), depth)
        return self.quote(self.eval(t, env), depth)


__all__ = ["Machine", "MachineError", "normalize_closed"]


def normalize_closed(th: ModeTheory, t: Tm, fuel: int = 10_000) -> Tm:
    return Machine(th, fuel).normalize(t)
