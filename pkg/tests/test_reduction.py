import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtt import syntax as C
from mtt.checker import CheckError, Checker
from mtt.machine import Machine, normalize_closed
from mtt.mode_theory import BUILTINS, Gen, HComp, Id, VComp, builtin, compose_mod, ident
from mtt.reduction import (
    Fuel, FuelExhausted, NonCanonicalAxiom, OpenTerm, Reducer, eval_closed, free_vars, head_of, lob_schema,
)
from mtt.subst import check_no_subst
from mtt.surface import load
from mtt.syntax import (
    BOOL, EMPTY, UNI, App, Axiom, BoolRec, Comp, Dec, Enc, ExtSub, Extend, Ff, IdSub, Key, Lam, Lift, Lock, LockSub,
    MkBox, Modal, Open, Pair, Pi, Proj0, TT, Var, Wk,
)

from gen import TermGen, rand_cell, sub_path, words

TRIVIAL = builtin("trivial")
COMONAD = builtin("idempotent_comonad")
GUARDED = builtin("guarded")
ADJ = builtin("walking_adjunction")
ONE = ident("m")


# -- push_subst ------------------------------------------------------------------


def test_push_identity_law():
    eng = Reducer(GUARDED).eng
    a = Pi(ident("t"), BOOL, Modal(GUARDED.gen("ℓ"), BOOL))
    assert eng.push(a, IdSub()) == a


def test_push_under_modality_goes_through_the_lock():
    eng = Reducer(COMONAD).eng
    mu = COMONAD.gen("μ")
    a = Modal(mu, Dec(Var(0, Id(mu))))
    s = ExtSub(Wk(), Enc(BOOL), ONE)  # substitute code Bool for the variable
    assert eng.push(a, s) == Modal(mu, eng.push(Dec(Var(0, Id(mu))), LockSub(mu, s)))
    assert eng.push(a, s) == Modal(mu, Dec(Enc(BOOL)))


def test_push_var_zero_through_extension():
    eng = Reducer(TRIVIAL).eng
    assert eng.push(Var(0), ExtSub(IdSub(), TT, ONE)) == TT
    assert eng.push(Var(1), ExtSub(IdSub(), TT, ONE)) == Var(0)


def test_weakening_after_extension_is_the_first_projection():
    eng = Reducer(TRIVIAL).eng
    s = Comp(Wk(), ExtSub(IdSub(), Ff(), ONE))
    # Var(0)[Wk] is Var(1), which the extension then maps to Var(0)
    assert eng.push(Var(0), s) == Var(0)


def test_push_output_is_substitution_free_on_every_sort():
    eng = Reducer(TRIVIAL).eng
    s = ExtSub(Wk(), TT, ONE)
    for x in (Var(0), Lam(ONE, Var(1)), BoolRec(BOOL, Var(0), Ff(), Var(0)), Pi(ONE, BOOL, Dec(Var(1)))):
        assert check_no_subst(eng.push(x, s))


# -- keys --------------------------------------------------------------------------


def _key_setup(xi):
    """A variable bound at ``xi`` used behind a lock ``xi`` (cell 1), and the context under the lock."""
    at = Extend(EMPTY, xi, BOOL)
    return at, Var(0, Id(xi))


def _cell(v, p):
    """A variable's cell, reading None as the identity on ``p``."""
    return Id(p) if v.cell is None else v.cell


def test_key_identity_acts_trivially():
    mu = ADJ.gen("μ")
    at, x = _key_setup(mu)
    red = Reducer(ADJ)
    assert red.conv(red.eng.push(x, Key(Id(mu), at)), x)


def test_key_composes_into_variable_annotation():
    mu, nu = ADJ.gen("μ"), ADJ.gen("ν")
    at = Extend(EMPTY, ident("m"), BOOL)
    x = Var(0)
    eta = Gen("η")  # 1 ⇒ μ∘ν
    red = Reducer(ADJ)
    out = red.eng.push(x, Key(eta, at))
    assert isinstance(out, Var) and out.idx == 0
    assert ADJ.eq_cell(out.cell, eta)
    # and the result checks behind the new lock
    Checker(ADJ).check(Lock(at, compose_mod(mu, nu)), "m", out, BOOL)


@pytest.mark.parametrize("seed", range(5))
def test_key_laws_randomized(seed):
    """Key(1)=1, Key(α₀;α₁) = Key(α₀) then Key(α₁), and both interchange orientations agree (100 each)."""
    rng = random.Random(seed)
    red = Reducer(ADJ)
    push = red.eng.push
    ws = words(ADJ, 2)
    for _ in range(100):
        xi = rng.choice(ws)
        at, x = _key_setup(xi)
        assert red.conv(push(x, Key(Id(xi), at)), x)
        a0, nu = rand_cell(ADJ, rng, xi, 2)
        a1, rho = rand_cell(ADJ, rng, nu, 2)
        both = push(x, Key(VComp(a0, a1), at))
        seq = push(x, Comp(Key(a0, at), Key(a1, at)))
        assert red.conv(both, seq) and ADJ.eq_cell(_cell(both, rho), _cell(seq, rho))
        i = rng.randrange(len(xi.word) + 1)
        p, q = sub_path(ADJ, xi, 0, i), sub_path(ADJ, xi, i, len(xi.word))
        a, pa = rand_cell(ADJ, rng, p, 2)
        b, qb = rand_cell(ADJ, rng, q, 2)
        left = push(x, Key(VComp(HComp(a, Id(q)), HComp(Id(pa), b)), at))
        right = push(x, Key(VComp(HComp(Id(p), b), HComp(a, Id(qb))), at))
        end = compose_mod(pa, qb)
        assert ADJ.eq_cell(_cell(left, end), _cell(right, end)) and red.conv(left, right)


def test_keys_distinguish_unequal_cells():
    mn = compose_mod(ADJ.gen("μ"), ADJ.gen("ν"))
    at, x = _key_setup(mn)
    red = Reducer(ADJ)
    a = red.eng.push(x, Key(HComp(Gen("η"), Id(mn)), at))
    b = red.eng.push(x, Key(HComp(Id(mn), Gen("η")), at))
    assert not red.conv(a, b)


# -- whnf ----------------------------------------------------------------------------


def test_whnf_beta_pi():
    red = Reducer(TRIVIAL)
    assert red.whnf(App(Lam(ONE, Var(0)), TT, ONE)) == TT


def test_whnf_modal_beta():
    mu = COMONAD.gen("μ")
    red = Reducer(COMONAD)
    assert red.whnf(Open(ONE, mu, BOOL, MkBox(mu, TT), Var(0, Id(mu)))) == TT


def test_whnf_bool_beta():
    red = Reducer(TRIVIAL)
    t = App(Lam(ONE, Var(0)), Ff(), ONE)
    assert red.whnf(BoolRec(BOOL, t, TT, TT)) == red.whnf(t) == Ff()


def test_whnf_stuck_is_not_an_error():
    red = Reducer(TRIVIAL)
    stuck = BoolRec(BOOL, TT, Ff(), Var(3))
    assert red.whnf(stuck) == stuck
    assert head_of(red.whnf(Proj0(App(Var(0), TT, ONE)))) == Var(0)


def test_whnf_leaves_lob_folded_unless_scrutinized():
    red = Reducer(GUARDED, {"lob": lob_schema(GUARDED)}, 5)
    t = App(Axiom("lob", BOOL), Lam(ident("t"), TT), ident("t"))
    assert red.whnf(t) == t
    assert red.fuel.left == 5
    assert red.whnf(BoolRec(BOOL, Ff(), TT, t)) == Ff()
    assert red.fuel.left == 4


# -- conversion ------------------------------------------------------------------------


def test_conv_eta_pi():
    red = Reducer(COMONAD)
    mu = COMONAD.gen("μ")
    f = Var(0)
    assert red.conv(Lam(mu, App(Var(1), Var(0, Id(mu)), mu)), f)


def test_conv_enc_dec():
    red = Reducer(TRIVIAL)
    assert red.conv(Enc(Dec(Var(0))), Var(0))
    assert red.conv_ty(Dec(Enc(BOOL)), BOOL)


def test_conv_lift_commutes():
    red = Reducer(TRIVIAL)
    assert red.conv_ty(Lift(0, Dec(Enc(BOOL))), BOOL)
    a, b = Dec(Var(0)), Dec(Var(1))
    assert red.conv_ty(Lift(0, Pi(ONE, a, b)), Pi(ONE, Lift(0, a), Lift(0, b)))


def test_conv_no_modal_eta():
    red = Reducer(COMONAD)
    mu = COMONAD.gen("μ")
    assert not red.conv(MkBox(mu, Var(0, Id(mu))), Var(1))
    assert not red.conv(Var(1), MkBox(mu, Var(0, Id(mu))))


def test_conv_compares_modalities_up_to_eq_mod():
    red = Reducer(GUARDED)
    g, l = GUARDED.gen("γ"), GUARDED.gen("ℓ")
    assert red.conv_ty(Modal(compose_mod(g, l), BOOL), Modal(g, BOOL))
    assert not red.conv_ty(Modal(l, BOOL), Modal(ident("t"), BOOL))


def test_conv_distinguishes_variables():
    red = Reducer(TRIVIAL)
    assert not red.conv(Var(0), Var(1))
    assert not red.conv(TT, Ff())


def _corpus_terms(programs):
    out = []
    for prog in programs.values():
        red = prog.checker.red
        for d in prog.defs.values():
            out.append((red, prog.theory, d.ann.tm))
    return out


def test_conv_is_an_equivalence_on_the_corpus(programs):
    rng = random.Random(3)
    for red, th, t in _corpus_terms(programs):
        n, m = red.nf(t), Machine(th).normalize(t)
        assert red.conv(t, t)
        assert red.conv(t, n) and red.conv(n, t)
        assert red.conv(n, m) and red.conv(t, m)
    terms = _corpus_terms(programs)
    for _ in range(300):
        (r1, th1, a), (_, th2, b), (_, th3, c) = rng.sample(terms, 3)
        if not (th1 == th2 == th3):
            continue
        ab, bc, ac = r1.conv(a, b), r1.conv(b, c), r1.conv(a, c)
        assert ab == r1.conv(b, a)
        if ab and bc:
            assert ac


def test_conv_is_a_congruence_on_the_corpus(programs):
    for red, th, t in _corpus_terms(programs):
        n = red.nf(t)
        other = Var(7)
        assert red.conv(Pair(t, other), Pair(n, other))
        assert red.conv(App(other, t, None), App(other, n, None))
        p = ident(th.modes[0])
        assert red.conv(MkBox(p, t), MkBox(p, n))


# -- nf against the environment machine -------------------------------------------------


def test_nf_agrees_with_the_environment_machine_on_the_corpus(programs):
    for prog in programs.values():
        red = prog.checker.red
        for d in prog.defs.values():
            assert red.conv(red.nf(d.ann.tm), Machine(prog.theory).normalize(d.ann.tm)), d.name
            assert red.conv_ty(red.nf_ty(d.ann.ty), Machine(prog.theory).normalize_ty(d.ann.ty)), d.name
        for dr in prog.directives:
            assert red.conv(red.nf(dr.term), normalize_closed(prog.theory, dr.term))


# -- eval_closed ---------------------------------------------------------------------------


def test_eval_closed_literal():
    assert eval_closed(TRIVIAL, TT, BOOL).value == TT


TRIV_SRC = """
def triv @ m (A : U) : ⟨1| A⟩ -> A = \\x. let mod 1 y = x in y
def t @ m : Bool = triv Bool (mod 1 true)
"""

EXTRACT_SRC = """
def extract @ m (A :{μ} U) : ⟨μ| A⟩ -> ⟨1| A^ε⟩ = \\x. let mod μ y = x in mod 1 y^ε
def triv @ m (A : U) : ⟨1| A⟩ -> A = \\x. let mod 1 y = x in y
def t @ m : Bool = triv Bool (extract Bool (mod μ true))
"""


def test_eval_closed_triv():
    prog, diag = load(TRIV_SRC, TRIVIAL)
    assert diag is None
    d = prog.defs["t"]
    assert eval_closed(TRIVIAL, d.ann.tm, d.ann.ty).value == TT
    assert normalize_closed(TRIVIAL, d.ann.tm) == TT  # independent environment evaluator


def test_eval_closed_comonad_extract():
    prog, diag = load(EXTRACT_SRC, COMONAD)
    assert diag is None, diag
    d = prog.defs["t"]
    assert eval_closed(COMONAD, d.ann.tm, d.ann.ty).value == TT
    assert normalize_closed(COMONAD, d.ann.tm) == TT


def test_eval_closed_modal_and_refl_reports():
    mu = COMONAD.gen("μ")
    r = eval_closed(COMONAD, MkBox(mu, App(Lam(ONE, Var(0)), TT, ONE)), Modal(mu, BOOL))
    assert r.kind == "mod" and r.witness == TT
    r = eval_closed(TRIVIAL, C.Refl(TT), C.IdTy(BOOL, TT, TT))
    assert r.kind == "refl"


def test_eval_closed_errors():
    with pytest.raises(OpenTerm):
        eval_closed(TRIVIAL, Var(0), BOOL)
    lob = App(Axiom("lob", BOOL), Lam(ident("t"), TT), ident("t"))
    with pytest.raises(NonCanonicalAxiom):
        eval_closed(GUARDED, BoolRec(BOOL, TT, Ff(), lob), BOOL)
    assert eval_closed(GUARDED, lob, BOOL, fuel=1, axioms={"lob": lob_schema(GUARDED)}).value == TT
    twice = BoolRec(BOOL, lob, lob, BoolRec(BOOL, TT, Ff(), lob))
    with pytest.raises(FuelExhausted):
        eval_closed(GUARDED, twice, BOOL, fuel=1, axioms={"lob": lob_schema(GUARDED)})


def test_fuel_must_be_positive():
    with pytest.raises(ValueError):
        Fuel(0)


def test_free_vars():
    assert free_vars(Lam(ONE, Var(0))) == set()
    assert free_vars(Lam(ONE, Var(2))) == {1}
    assert free_vars(Open(ONE, ONE, BOOL, Var(0), Var(1))) == {0}


# -- substitution versus the environment machine on random pairs ----------------------------------


@settings(max_examples=150)
@given(st.integers(0, 10**9))
def test_push_agrees_with_environment_evaluation(seed):
    th = builtin(BUILTINS[seed % len(BUILTINS)])
    rng = random.Random(seed)
    tg = TermGen(th, rng)
    g, m, t, s, delta = tg.pair(rng.choice(th.modes))
    ck = Checker(th)
    try:
        t1 = ck.check(g, m, t, BOOL)
    except CheckError:
        return
    r = ck.eng.push(t1, s)
    assert check_no_subst(r)
    assert ck.red.conv(ck.red.nf(r), Machine(th).normalize_sub(t1, s, delta))
    ck.check(delta, m, ck.red.nf(r), BOOL)


def test_universe_codes_round_trip_through_the_machine():
    t = Enc(Pi(ONE, BOOL, BOOL))
    assert normalize_closed(TRIVIAL, t) == t
    assert Reducer(TRIVIAL).conv(Enc(Dec(t)), t)
    assert Reducer(TRIVIAL).conv_ty(Dec(t), Pi(ONE, BOOL, BOOL))
    assert UNI == C.Uni()
