"""Bidirectional type checker for the core calculus.

Introduction forms are checked, elimination forms inferred.  Every judgment
carries its mode explicitly.  Checking returns the elaborated term: 2-cell
placeholders are solved with ``find_cell``, missing modalities are read off
the expected type, and user cells are padded with ``Canon`` casts so that
their boundaries match the lock words syntactically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .mode_theory import (
    BoundaryMismatch,
    Canon,
    Id,
    ModeTheory,
    ModeTheoryError,
    Path,
    SearchExhausted,
    Undecided,
    compose_mod,
    ident,
    print_cell,
)
from .reduction import AxiomSchema, Fuel, FuelExhausted, Reducer, lob_schema, ONE
from .subst import IllFormedSubstitution, NSub, SExt, SLock, _ID_PLACEHOLDER as ANY_ID, is_trivial, simp, vc
from .syntax import (
    EMPTY,
    HOLE,
    Ann,
    App,
    Axiom,
    Bool,
    BOOL,
    BoolRec,
    Ctx,
    Dec,
    Empty,
    Enc,
    Extend,
    Ff,
    IdRec,
    IdTy,
    Lam,
    Lift,
    Lock,
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
    UNI,
    Uni,
    Var,
    pr_ctx,
    pr_tm,
    pr_ty,
    shift_ty,
)


@dataclass(frozen=True)
class Diagnostic:
    """Why a judgment failed: the rule, where, and the failed obligation if any."""

    rule: str
    message: str
    span: tuple | None = None  # (file, line, col)
    expected: str | None = None
    actual: str | None = None
    obligation: str | None = None

    def record(self) -> dict:
        out = {"rule": self.rule, "message": self.message}
        if self.span is not None:
            out["span"] = "{}:{}:{}".format(*self.span)
        for k in ("expected", "actual", "obligation"):
            v = getattr(self, k)
            if v is not None:
                out[k] = v
        return out

    def __str__(self):
        loc = "{}:{}:{}: ".format(*self.span) if self.span else ""
        s = f"{loc}[{self.rule}] {self.message}"
        if self.expected is not None:
            s += f"\n  expected: {self.expected}"
        if self.actual is not None:
            s += f"\n  actual:   {self.actual}"
        if self.obligation is not None:
            s += f"\n  obligation: {self.obligation}"
        return s


class CheckError(Exception):
    def __init__(self, diag: Diagnostic):
        super().__init__(str(diag))
        self.diag = diag


def _res(mu: Path | None, m: str) -> Path | None:
    """Resolve the mode-agnostic identity placeholder at mode ``m``."""
    if mu is not None and mu.src == ANY_ID.src:
        return ident(m)
    return mu


def _id_cell(p: Path):
    return None if p.is_id else Id(p)


def _lock_word(paths) -> Path | None:
    out = None
    for p in paths:
        out = p if out is None else compose_mod(out, p)
    return out


@dataclass
class Checker:
    th: ModeTheory
    fuel: int = 10_000
    axioms: dict[str, AxiomSchema] = field(default_factory=dict)
    postulates: dict[str, Ty] = field(default_factory=dict)
    spans: dict[int, tuple] = field(default_factory=dict)
    def_modes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.red = Reducer(self.th, self.axioms, Fuel(self.fuel))
        self.eng = self.red.eng
        self._stack: list = []
        self._ann_ok: dict[tuple[int, str], tuple[Ann, Ann]] = {}
        self.modes_seen: list[tuple[str, str, Ctx]] = []  # (node, mode, context) per judgment

    def register_def(self, ann: Ann, mode: str, checked: Ann | None = None):
        """Record a closed definition as checked at ``mode`` (kept alive alongside its id)."""
        self._ann_ok[(id(ann), mode)] = (ann, checked or ann)

    def enable_lob(self):
        self.axioms["lob"] = lob_schema(self.th)

    def add_postulate(self, name: str, mode: str, ty: Ty):
        from .reduction import postulate

        self.axioms[name] = postulate(name, mode)
        self.postulates[name] = ty

    # -- diagnostics ---------------------------------------------------------

    def fail(self, rule: str, msg: str, expected=None, actual=None, obligation=None):
        span = None
        for node in reversed(self._stack):
            span = self.spans.get(id(node))
            if span is not None:
                break
        raise CheckError(Diagnostic(rule, msg, span, expected, actual, obligation))

    def _guard(self, rule: str, fn, *args):
        try:
            return fn(*args)
        except FuelExhausted as e:
            self.fail(rule, str(e))
        except Undecided as e:
            self.fail(rule, "mode theory question left undecided", obligation=str(e))
        except (IllFormedSubstitution, BoundaryMismatch) as e:
            self.fail(rule, str(e))

    def _refuel(self):
        self.red.fuel = Fuel(self.fuel)

    def conv(self, a: Tm, b: Tm) -> bool:
        self._refuel()
        return self._guard("conv", self.red.conv, a, b)

    def conv_ty(self, a: Ty, b: Ty) -> bool:
        self._refuel()
        return self._guard("conv", self.red.conv_ty, a, b)

    def whnf_ty(self, a: Ty) -> Ty:
        self._refuel()
        return self._guard("conv", self.red.whnf_ty, a, True)

    def eq_mod(self, a: Path, b: Path) -> bool:
        try:
            return self.red.eq_mod(a, b)
        except Undecided as e:
            self.fail("mode", "modality equality undecided", obligation=str(e))

    # -- contexts ------------------------------------------------------------

    def check_ctx(self, g: Ctx, root: str) -> str:
        """Validate a context and return its mode."""
        match g:
            case Empty():
                if root not in self.th.modes:
                    self.fail("cx/empty", f"unknown mode {root}")
                return root
            case Lock(p, mu):
                m = self.check_ctx(p, root)
                self._path_ok(mu, "cx/lock")
                if mu.dst != m:
                    self.fail("cx/lock", f"lock {mu} expects a context at mode {mu.dst}",
                              expected=mu.dst, actual=m)
                return mu.src
            case Extend(p, mu, a):
                m = self.check_ctx(p, root)
                self._path_ok(mu, "cx/extend")
                if mu.dst != m:
                    self.fail("cx/extend", f"binding modality {mu} expects mode {mu.dst}",
                              expected=mu.dst, actual=m)
                try:
                    self.check_ty(Lock(p, mu), mu.src, a, 1)
                except CheckError as e:
                    d = e.diag
                    raise CheckError(Diagnostic("cx/extend", f"bad type in context: {d.message}", d.span,
                                                d.expected, d.actual, d.obligation)) from None
                return m
        raise TypeError(g)

    def _path_ok(self, p: Path, rule: str):
        try:
            self.th.check_path(p)
        except ModeTheoryError as e:
            self.fail(rule, str(e))

    def _lock(self, g: Ctx, m: str, mu: Path, rule: str) -> tuple[Ctx, str]:
        self._path_ok(mu, rule)
        if mu.dst != m:
            self.fail(rule, f"modality {mu} : {mu.src} → {mu.dst} used at mode {m}", expected=mu.dst, actual=m)
        return Lock(g, mu), mu.src

    # -- types ---------------------------------------------------------------

    def check_ty(self, g: Ctx, m: str, a: Ty, lv: int) -> Ty:
        self._stack.append(a)
        try:
            return self._check_ty(g, m, a, lv)
        finally:
            self._stack.pop()

    def _check_ty(self, g: Ctx, m: str, a: Ty, lv: int) -> Ty:
        match a:
            case Bool():
                return a
            case Uni():
                if lv != 1:
                    self.fail("tp/uni", "the universe is a large type and has no code", expected="level 1",
                              actual=f"level {lv}")
                return a
            case Dec(t):
                if lv != 0:
                    self.fail("tp/dec", "El yields a small type; lift it to use it at level 1",
                              expected="level 0", actual=f"level {lv}")
                return Dec(self.check(g, m, t, UNI))
            case Lift(l0, b):
                if l0 not in (0, 1) or l0 > lv:
                    self.fail("tp/lift", f"cannot lift level {l0} to level {lv}", expected=f"≤ {lv}",
                              actual=str(l0))
                return Lift(l0, self.check_ty(g, m, b, l0))
            case IdTy(b, x, y):
                b1 = self.check_ty(g, m, b, lv)
                return IdTy(b1, self.check(g, m, x, b1), self.check(g, m, y, b1))
            case Pi(mu, d, c):
                mu = _res(mu, m)
                g1, m1 = self._lock(g, m, mu, "tp/pi")
                d1 = self.check_ty(g1, m1, d, lv)
                c1 = self.check_ty(Extend(g, mu, d1 if lv == 1 else Lift(0, d1)), m, c, lv)
                return Pi(mu, d1, c1)
            case Sigma(d, c):
                d1 = self.check_ty(g, m, d, lv)
                c1 = self.check_ty(Extend(g, ident(m), d1 if lv == 1 else Lift(0, d1)), m, c, lv)
                return Sigma(d1, c1)
            case Modal(mu, b):
                mu = _res(mu, m)
                g1, m1 = self._lock(g, m, mu, "tp/modal")
                return Modal(mu, self.check_ty(g1, m1, b, lv))
            case TySub():
                return self.check_ty(g, m, self._guard("tp/sub", self.eng.eliminate, a), lv)
        self.fail("tp", f"not a type: {a!r}")

    # -- variables -----------------------------------------------------------

    def var(self, g: Ctx, m: str, t: Var) -> tuple[Tm, Ty]:
        idx = t.idx
        locks: list[Path] = []
        dom: list = []
        node = g
        k = idx
        while True:
            match node:
                case Empty():
                    self.fail("tm/var", f"variable {idx} is not bound", actual=pr_ctx(g))
                case Lock(p, mu):
                    if not mu.is_id:
                        locks.insert(0, mu)
                        dom.insert(0, mu)
                    node = p
                case Extend(p, nu, a):
                    if k == 0:
                        break
                    dom.insert(0, "E")
                    k -= 1
                    node = p
        _, nu, a = node.parent, node.mu, node.ty
        big = _lock_word(locks)
        lw = big if big is not None else ident(m)
        cell = self._var_cell(t.cell, nu, lw, idx)
        dom = ("E",) + tuple(dom)
        if is_trivial(cell) and nu.word == lw.word:
            ty = shift_ty(a, 0, sum(1 for d in dom if d == "E"))
        else:
            ty = self._guard("tm/var", self.eng.ty, a, NSub((SLock(nu, dom, cell),), 0))
        return Var(idx, cell), ty

    def _var_cell(self, c, nu: Path, lw: Path, idx: int):
        want = f"{nu} ⇒ {lw}"
        if (nu.src, nu.dst) != (lw.src, lw.dst):
            self.fail("tm/var", f"variable {idx} is bound at {nu} but used behind locks {lw} of a different boundary",
                      obligation=f"find_cell({nu}, {lw})")
        if c is HOLE or (c is None and nu.word != lw.word):
            if nu.word == lw.word:
                return _id_cell(nu)
            try:
                found = self.th.find_cell(nu, lw)
            except SearchExhausted as e:
                self.fail("tm/var", f"no 2-cell found for variable {idx}; annotate it", expected=want,
                          obligation=f"find_cell({nu}, {lw}): {e}")
            except Undecided as e:
                self.fail("tm/var", f"2-cell search undecided for variable {idx}", expected=want,
                          obligation=f"find_cell({nu}, {lw}): {e}")
            if found is None:
                self.fail("tm/var", f"variable {idx} bound at {nu} is not accessible behind {lw}",
                          expected=want, obligation=f"find_cell({nu}, {lw}) = none")
            return simp(found) if not (isinstance(found, Id) and not found.path.is_id) else found
        if c is None:
            return _id_cell(nu)
        try:
            s, d = self.th.boundary(c)
        except ModeTheoryError as e:
            self.fail("tm/var", f"ill-formed 2-cell on variable {idx}: {e}", expected=want)
        try:
            ok = self.th.eq_mod(s, nu) and self.th.eq_mod(d, lw)
        except Undecided as e:
            self.fail("tm/var", "boundary comparison undecided", obligation=str(e))
        if not ok:
            self.fail("tm/var", f"2-cell {print_cell(c)} on variable {idx} has the wrong boundary",
                      expected=want, actual=f"{s} ⇒ {d}", obligation=f"eq_cell boundary ({s}, {d}) = ({nu}, {lw})")
        out = c
        if s.word != nu.word:
            out = VCompSafe(Canon(nu, s), out)
        if d.word != lw.word:
            out = VCompSafe(out, Canon(d, lw))
        res = simp(out)
        if res is None and not nu.is_id:
            return Id(nu)
        return res

    # -- terms ---------------------------------------------------------------

    def infer(self, g: Ctx, m: str, t: Tm) -> tuple[Tm, Ty]:
        self._stack.append(t)
        try:
            self.modes_seen.append((type(t).__name__, m, g))
            return self._infer(g, m, t)
        finally:
            self._stack.pop()

    def check(self, g: Ctx, m: str, t: Tm, a: Ty) -> Tm:
        self._stack.append(t)
        try:
            self.modes_seen.append((type(t).__name__, m, g))
            return self._check(g, m, t, a)
        finally:
            self._stack.pop()

    def _infer(self, g: Ctx, m: str, t: Tm) -> tuple[Tm, Ty]:
        eng = self.eng
        match t:
            case Var():
                return self.var(g, m, t)
            case Tt() | Ff():
                return t, BOOL
            case Enc(a):
                return Enc(self.check_ty(g, m, a, 0)), UNI
            case App(f, a, mu):
                mu = _res(mu, m)
                f1, ft = self.infer(g, m, f)
                ft = self.whnf_ty(ft)
                if not isinstance(ft, Pi):
                    self.fail("tm/app", "applying a term that is not a function", actual=pr_ty(ft))
                if mu is not None and not self.eq_mod(mu, ft.mu):
                    self.fail("tm/app", "application at the wrong modality", expected=str(ft.mu), actual=str(mu))
                g1, m1 = self._lock(g, m, ft.mu, "tm/app")
                a1 = self.check(g1, m1, a, ft.dom)
                return App(f1, a1, ft.mu), self._guard("tm/app", eng.inst, ft.cod, a1, ft.mu)
            case Proj0(p):
                p1, pt = self.infer(g, m, p)
                pt = self.whnf_ty(pt)
                if not isinstance(pt, Sigma):
                    self.fail("tm/fst", "projection from a non-pair type", actual=pr_ty(pt))
                return Proj0(p1), pt.dom
            case Proj1(p):
                p1, pt = self.infer(g, m, p)
                pt = self.whnf_ty(pt)
                if not isinstance(pt, Sigma):
                    self.fail("tm/snd", "projection from a non-pair type", actual=pr_ty(pt))
                return Proj1(p1), self._guard("tm/snd", eng.inst, pt.cod, Proj0(p1), ONE)
            case BoolRec(mot, a, b, s):
                if mot is None:
                    self.fail("tm/infer", "if-expression needs a motive when its type is not known")
                return self._boolrec(g, m, mot, a, b, s)
            case IdRec(mot, base, n0, n1, p):
                if mot is None:
                    self.fail("tm/infer", "J needs a motive when its type is not known")
                return self._idrec(g, m, mot, base, n0, n1, p)
            case Open(nu, mu, mot, s, br):
                if mot is None:
                    self.fail("tm/infer", "let mod needs a motive when its type is not known")
                return self._open(g, m, nu, mu, mot, s, br)
            case Refl(a):
                if a is None:
                    self.fail("tm/infer", "cannot infer the endpoint of refl; supply it")
                a1, at = self.infer(g, m, a)
                return Refl(a1), IdTy(at, a1, a1)
            case Axiom(name, p):
                return self._axiom(g, m, name, p)
            case Ann(body, ty, name):
                home = self.def_modes.get(name)
                if home is not None and home != m:
                    self.fail("mode", f"definition {name} lives at mode {home}, used at mode {m}",
                              expected=home, actual=m)
                key = (id(t), m)
                if key not in self._ann_ok:
                    ty1 = self.check_ty(EMPTY, m, ty, 1)
                    body1 = self.check(EMPTY, m, body, ty1)
                    self.register_def(t, m, Ann(body1, ty1, name))
                done = self._ann_ok[key][1]
                return done, done.ty
            case TmSub():
                return self.infer(g, m, self._guard("tm/sub", eng.eliminate, t))
            case Lam() | Pair() | MkBox():
                self.fail("tm/infer", f"cannot infer the type of {type(t).__name__}; add a type annotation")
        self.fail("tm", f"not a term: {t!r}")

    def _check(self, g: Ctx, m: str, t: Tm, a: Ty) -> Tm:
        eng = self.eng
        match t:
            case Lam(mu, body):
                mu = _res(mu, m)
                at = self.whnf_ty(a)
                if not isinstance(at, Pi):
                    self.fail("tm/lam", "a function is not expected here", expected=pr_ty(at))
                if mu is not None and not self.eq_mod(mu, at.mu):
                    self.fail("tm/lam", "function binds at the wrong modality", expected=str(at.mu), actual=str(mu))
                self._lock(g, m, at.mu, "tm/lam")
                return Lam(at.mu, self.check(Extend(g, at.mu, at.dom), m, body, at.cod))
            case Pair(x, y):
                at = self.whnf_ty(a)
                if not isinstance(at, Sigma):
                    self.fail("tm/pair", "a pair is not expected here", expected=pr_ty(at))
                x1 = self.check(g, m, x, at.dom)
                return Pair(x1, self.check(g, m, y, self._guard("tm/pair", eng.inst, at.cod, x1, ONE)))
            case MkBox(mu, body):
                mu = _res(mu, m)
                at = self.whnf_ty(a)
                if not isinstance(at, Modal):
                    self.fail("tm/modal-intro", f"mod {mu} is not expected here", expected=pr_ty(at))
                if mu is not None and not self.eq_mod(mu, at.mu):
                    self.fail("tm/modal-intro", "modality of mod does not match the type",
                              expected=str(at.mu), actual=str(mu), obligation=f"eq_mod({mu}, {at.mu}) = false")
                g1, m1 = self._lock(g, m, at.mu, "tm/modal-intro")
                return MkBox(at.mu, self.check(g1, m1, body, at.ty))
            case Refl(x):
                at = self.whnf_ty(a)
                if not isinstance(at, IdTy):
                    self.fail("tm/refl", "refl is not expected here", expected=pr_ty(at))
                x1 = at.lhs if x is None else self.check(g, m, x, at.ty)
                for side in (at.lhs, at.rhs):
                    if not self.conv(x1, side):
                        self.fail("tm/refl", "the endpoints of the identity type are not definitionally equal",
                                  expected=pr_tm(self.red.nf(side)), actual=pr_tm(self.red.nf(x1)))
                return Refl(x1)
            case Enc(b):
                at = self.whnf_ty(a)
                if not isinstance(at, Uni):
                    self.fail("tm/code", "a type code is not expected here", expected=pr_ty(at))
                return Enc(self.check_ty(g, m, b, 0))
            case BoolRec(None, x, y, s):
                return self._boolrec(g, m, shift_ty(a), x, y, s)[0]
            case IdRec(None, base, n0, n1, p):
                return self._idrec(g, m, shift_ty(a, 0, 3), base, n0, n1, p)[0]
            case Open(nu, mu, None, s, br):
                return self._open(g, m, nu, mu, shift_ty(a), s, br)[0]
        t1, b = self.infer(g, m, t)
        if not self.conv_ty(b, a):
            self.fail("conv", "type mismatch", expected=pr_ty(self._show_ty(a)), actual=pr_ty(self._show_ty(b)))
        return t1

    def _show_ty(self, a: Ty) -> Ty:
        try:
            return self.red.nf_ty(a)
        except Exception:
            return a

    # -- eliminators ---------------------------------------------------------

    def _boolrec(self, g, m, mot, a, b, s):
        eng = self.eng
        mot1 = self.check_ty(Extend(g, ident(m), BOOL), m, mot, 1)
        s1 = self.check(g, m, s, BOOL)
        a1 = self.check(g, m, a, self._guard("tm/if", eng.inst, mot1, Tt(), ONE))
        b1 = self.check(g, m, b, self._guard("tm/if", eng.inst, mot1, Ff(), ONE))
        return BoolRec(mot1, a1, b1, s1), self._guard("tm/if", eng.inst, mot1, s1, ONE)

    def _idrec(self, g, m, mot, base, n0, n1, p):
        eng = self.eng
        p1, pt = self.infer(g, m, p)
        pt = self.whnf_ty(pt)
        if not isinstance(pt, IdTy):
            self.fail("tm/J", "J eliminates a proof of an identity type", actual=pr_ty(pt))
        a = pt.ty
        for given, side in ((n0, pt.lhs), (n1, pt.rhs)):
            if given is not None and not self.conv(given, side):
                self.fail("tm/J", "endpoint does not match the type of the proof",
                          expected=pr_tm(side), actual=pr_tm(given))
        one = ident(m)
        g1 = Extend(g, one, a)
        g2 = Extend(g1, one, shift_ty(a))
        g3 = Extend(g2, one, IdTy(shift_ty(a, 0, 2), Var(1), Var(0)))
        mot1 = self.check_ty(g3, m, mot, 1)
        z = Var(0)
        refl_sub = NSub((SExt(z, ONE), SExt(z, ONE), SExt(Refl(z), ONE)), 1)
        base1 = self.check(g1, m, base, self._guard("tm/J", eng.ty, mot1, refl_sub))
        res = self._guard("tm/J", eng.ty, mot1, NSub((SExt(pt.lhs, ONE), SExt(pt.rhs, ONE), SExt(p1, ONE)), 0))
        return IdRec(mot1, base1, pt.lhs, pt.rhs, p1), res

    def _open(self, g, m, nu, mu, mot, s, br):
        eng = self.eng
        nu = _res(nu, m)
        mu = _res(mu, nu.src) if nu.dst == m else mu
        g1, m1 = self._lock(g, m, nu, "tm/modal-elim")
        s1, st = self.infer(g1, m1, s)
        st = self.whnf_ty(st)
        if not isinstance(st, Modal):
            self.fail("tm/modal-elim", "let mod eliminates a term of modal type", actual=pr_ty(st))
        if mu is not None and not self.eq_mod(mu, st.mu):
            self.fail("tm/modal-elim", "let mod opens the wrong modality", expected=str(st.mu), actual=str(mu),
                      obligation=f"eq_mod({mu}, {st.mu}) = false")
        mu = st.mu
        numu = compose_mod(nu, mu)
        mot1 = self.check_ty(Extend(g, nu, st), m, mot, 1)
        boxed = MkBox(mu, Var(0, _id_cell(numu)))
        want = self._guard("tm/modal-elim", eng.ty, mot1, NSub((SExt(boxed, nu),), 1))
        br1 = self.check(Extend(g, numu, st.ty), m, br, want)
        return Open(nu, mu, mot1, s1, br1), self._guard("tm/modal-elim", eng.inst, mot1, s1, nu)

    def _axiom(self, g, m, name, p):
        ax = self.axioms.get(name)
        if ax is None:
            self.fail("tm/axiom", f"unknown axiom {name}; enable it with a pragma")
        if ax.mode is not None and ax.mode != m:
            self.fail("tm/axiom", f"axiom {name} lives at mode {ax.mode}", expected=ax.mode, actual=m)
        p1 = self.check_ty(g, m, p, 1)
        if name in self.postulates and not self.conv_ty(p1, self.postulates[name]):
            self.fail("tm/axiom", f"axiom {name} used at the wrong type")
        return Axiom(name, p1), self._guard("tm/axiom", ax.type_of, self.eng, p1)

    # -- public wrappers -------------------------------------------------------

    def run(self, fn, *args):
        """Call a checking function, returning (result, None) or (None, Diagnostic)."""
        try:
            return fn(*args), None
        except CheckError as e:
            return None, e.diag


def VCompSafe(a, b):
    return vc(a, b)


def _mode_of(th: ModeTheory, g: Ctx, root: str) -> str:
    from .syntax import ctx_mode

    return ctx_mode(g, root)


def check_ctx(th: ModeTheory, g: Ctx, root: str) -> Diagnostic | None:
    c = Checker(th)
    return c.run(c.check_ctx, g, root)[1]


def infer(th: ModeTheory, g: Ctx, t: Tm, root: str | None = None, **kw):
    """Infer a type; returns (type, None) or (None, Diagnostic)."""
    root = root or th.modes[0]
    c = Checker(th, **kw)
    d = c.run(c.check_ctx, g, root)[1]
    if d:
        return None, d
    m = _mode_of(th, g, root)
    res, d = c.run(c.infer, g, m, t)
    return (res[1] if res else None), d


def check_tm(th: ModeTheory, g: Ctx, t: Tm, a: Ty, root: str | None = None, **kw) -> Diagnostic | None:
    root = root or th.modes[0]
    c = Checker(th, **kw)
    m = _mode_of(th, g, root)
    _, d = c.run(c.check_ty, g, m, a, 1)
    if d:
        return d
    return c.run(c.check, g, m, t, a)[1]


def check_ty(th: ModeTheory, g: Ctx, a: Ty, level: int, root: str | None = None, **kw) -> Diagnostic | None:
    root = root or th.modes[0]
    c = Checker(th, **kw)
    m = _mode_of(th, g, root)
    return c.run(c.check_ty, g, m, a, level)[1]


__all__ = ["CheckError", "Checker", "Diagnostic", "check_ctx", "check_tm", "check_ty", "infer"]
