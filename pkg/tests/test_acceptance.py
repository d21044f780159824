"""The seven acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line (visible even under output
capture) before asserting. Run standalone with ``python tests/test_acceptance.py``.
"""

import dataclasses
import itertools
import random
import sys
import time

import pytest

from mtt import syntax as C
from mtt.checker import CheckError, Checker
from mtt.corpus import run_corpus
from mtt.machine import Machine
from mtt.mode_theory import BUILTINS, Gen, HComp, Id, VComp, builtin, compose_mod, ident
from mtt.reduction import NonCanonicalAxiom, eval_closed
from mtt.subst import check_no_subst
from mtt.surface import load
from mtt.syntax import (
    BOOL, EMPTY, Ann, App, BoolRec, Extend, IdRec, IdTy, Lam, MkBox, Modal, Open, Pair, Pi, Proj0, Proj1, Refl,
    Sigma, TT, Var,
)

from conftest import MANIFEST
from gen import TermGen, equal_variant, identity_variant, positions, rand_cell, words, zigzags
from oracles import eq_oracle


@pytest.fixture
def report(capsys):
    def emit(n: int, title: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {title} [{detail}]")
        assert ok, detail

    return emit


def nodes(x):
    yield x
    if dataclasses.is_dataclass(x):
        for f in dataclasses.fields(x):
            v = getattr(x, f.name)
            if isinstance(v, (C.Tm, C.Ty, C.Sub, C.Ctx)):
                yield from nodes(v)


def _id_cell(p):
    return None if p.is_id else Id(p)


# -- 1. corpus -----------------------------------------------------------------


def test_criterion_1_corpus(report, manifest):
    rep = run_corpus(manifest)
    rejects = [r for r in rep.results if r.entry.verdict == "reject"]
    bad = [f"{r.entry.path}: {r.actual} {r.detail}" for r in rep.results if not r.ok]
    ok = rep.ok and len(rejects) == 20 and all(r.actual == r.entry.rule for r in rejects)
    report(1, "corpus acceptance", ok,
           f"{rep.passed}/{len(rep.results)} entries, {len(rejects)} rejects by named rule" + "".join(
               f"; {b}" for b in bad))


# -- 2. canonicity -------------------------------------------------------------


def test_criterion_2_canonicity(report, programs):
    n, failures, slowest = 0, [], 0.0
    for stem, prog in sorted(programs.items()):
        for name, d in prog.defs.items():
            ty = prog.checker.red.whnf_ty(d.ann.ty)
            if not isinstance(ty, (C.Bool, C.Modal)) or any(isinstance(x, C.Axiom) for x in nodes(d.ann.tm)):
                continue
            n += 1
            t0 = time.perf_counter()
            try:
                r = eval_closed(prog.theory, d.ann.tm, d.ann.ty, fuel=1_000_000)
            except Exception as e:  # noqa: BLE001 - any failure is a criterion failure
                failures.append(f"{stem}.{name}: {type(e).__name__} {e}")
                continue
            dt = time.perf_counter() - t0
            slowest = max(slowest, dt)
            want = "bool" if isinstance(ty, C.Bool) else "mod"
            var_heads = [x for x in nodes(r.value) if isinstance(x, C.Var)]
            if r.kind != want or var_heads or dt >= 5.0:
                failures.append(f"{stem}.{name}: {r.kind} {r} in {dt:.2f}s")
    ok = n > 0 and not failures
    report(2, "canonicity", ok, f"{n} closed Bool/modal definitions, slowest {slowest:.3f}s" + "".join(
        f"; {f}" for f in failures))


def test_criterion_2_axiom_headed_terms_are_reported(programs):
    with pytest.raises(NonCanonicalAxiom):
        d = programs["guarded"].defs["lob_true"]
        eval_closed(programs["guarded"].theory, d.ann.tm, d.ann.ty)


# -- 3. consistency ------------------------------------------------------------

ATTEMPTS = {
    "refl": "def p @ {m} : Id Bool true false = refl",
    "refl at true": "def p @ {m} : Id Bool true false = refl true",
    "dependent if": "def p @ {m} : Id Bool true false = if true return b. Id Bool b false then refl else refl",
    "function": "def f @ {m} : (b : Bool) -> Id Bool b b = \\b. refl\n"
                "def p @ {m} : Id Bool true false = f true",
    "J": "def p @ {m} : Id Bool true false = J (refl true; z. refl; x y q. Id Bool x y)",
    "unboxing": "def box @ {m} : ⟨1| Id Bool true true⟩ = mod 1 refl\n"
                "def p @ {m} : Id Bool true false = let mod 1 q = box in q",
}


def test_criterion_3_consistency(report):
    n, failures = 0, []
    for name in BUILTINS:
        th = builtin(name)
        for m in th.modes:
            for what, src in ATTEMPTS.items():
                src = src.replace("{m}", m)
                n += 1
                helpers = "\n".join(line for line in src.splitlines() if not line.startswith("def p "))
                _, helper_diag = load(helpers, th)
                _, diag = load(src, th)
                if helper_diag is not None:
                    failures.append(f"{name}@{m} {what}: helper rejected by {helper_diag.rule}")
                elif diag is None:
                    failures.append(f"{name}@{m} {what}: ACCEPTED")
                elif diag.rule in ("parse", "scope"):
                    failures.append(f"{name}@{m} {what}: rejected for the wrong reason ({diag.rule})")
    expected = sum(len(builtin(b).modes) for b in BUILTINS) * len(ATTEMPTS)
    report(3, "no proof of Id Bool true false", not failures and n == expected,
           f"{n} attempts across {len(BUILTINS)} theories, all modes" + "".join(f"; {f}" for f in failures))


# -- 4. mode-theory oracles ----------------------------------------------------


def test_criterion_4_mode_theory_oracles(report):
    th = builtin("guarded")
    t0 = time.perf_counter()
    oracle = eq_oracle(th, 4, slack=4)
    ws = words(th, 4)
    pairs = disagree = 0
    for a, b in itertools.product(ws, repeat=2):
        if (a.src, a.dst) != (b.src, b.dst):
            continue
        pairs += 1
        disagree += th.eq_mod(a, b) != oracle(a, b)
    dt = time.perf_counter() - t0

    adj = builtin("walking_adjunction")
    rng = random.Random(2024)
    mu, nu = adj.gen("μ"), adj.gen("ν")
    z = zigzags(adj)
    cell_fail = [] if adj.eq_cell(z["μ"], Id(mu)) and adj.eq_cell(z["ν"], Id(nu)) else ["triangle identities"]
    ws2 = words(adj, 2)
    for i in range(500):
        p = rng.choice(ws2)
        q = rng.choice([w for w in ws2 if w.dst == p.src])
        a, pa = rand_cell(adj, rng, p, 2)
        b, _ = rand_cell(adj, rng, pa, 2)
        c, qc = rand_cell(adj, rng, q, 2)
        d, _ = rand_cell(adj, rng, qc, 2)
        # vertical-of-horizontal against horizontal-of-vertical
        lhs, rhs = VComp(HComp(a, c), HComp(b, d)), HComp(VComp(a, b), VComp(c, d))
        # sliding a past c in both orders
        left = VComp(HComp(a, Id(q)), HComp(Id(pa), c))
        right = VComp(HComp(Id(p), c), HComp(a, Id(qc)))
        # bending a string through a zigzag is invisible
        tri = VComp(a, identity_variant(adj, rng, pa))
        checks = [adj.eq_cell(lhs, rhs), adj.eq_cell(rhs, lhs), adj.eq_cell(left, right),
                  adj.eq_cell(right, left), adj.eq_cell(tri, a)]
        if not all(checks):
            cell_fail.append(f"case {i}: {checks}")
    # the decider is not trivially true
    mn = compose_mod(mu, nu)
    distinct = not adj.eq_cell(HComp(Gen("η"), Id(mn)), HComp(Id(mn), Gen("η")))
    ok = disagree == 0 and dt < 10 and not cell_fail and distinct
    report(4, "mode-theory oracles", ok,
           f"eq_mod: {pairs} guarded word pairs, {disagree} disagreements, {dt:.2f}s; eq_cell: 500 quadruples, "
           f"{len(cell_fail)} failures" + "".join(f"; {f}" for f in cell_fail[:5]))


# -- 5. substitution elimination -----------------------------------------------


def test_criterion_5_substitution_elimination(report, programs, monkeypatch):
    from mtt.subst import Engine

    leaks = []
    depth = [0]
    outer_calls = [0]

    def spy(fn):
        def run(self, *args, **kw):
            depth[0] += 1
            try:
                out = fn(self, *args, **kw)
            finally:
                depth[0] -= 1
            if depth[0] == 0:
                outer_calls[0] += 1
                if not check_no_subst(out):
                    leaks.append(C.pr_tm(out) if isinstance(out, C.Tm) else C.pr_ty(out))
            return out

        return run

    # every substitution the checker eliminates while checking the corpus
    for entry in ("push", "inst", "inst_under", "key", "eliminate", "tm", "ty"):
        monkeypatch.setattr(Engine, entry, spy(getattr(Engine, entry)))
    from mtt.surface import load_file

    for stem in programs:
        load_file(str(MANIFEST.parent / f"{stem}.mtt"))
    monkeypatch.undo()

    # corpus subterms under structural substitutions, against the environment machine
    corpus_pairs = corpus_dis = 0
    for stem, prog in sorted(programs.items()):
        ck, th = prog.checker, prog.theory
        tg = TermGen(th, random.Random(stem))
        for d in prog.defs.values():
            for root in (d.ann.tm, d.ann.ty):
                for x, g, m in positions(root, EMPTY, d.mode):
                    for _ in range(2):
                        s, delta = tg.sub(g, m, 3, structural=True)
                        r = ck.eng.push(x, s)
                        corpus_pairs += 1
                        if not check_no_subst(r):
                            leaks.append(f"{stem}.{d.name}")
                            continue
                        env = Machine(th).normalize_sub(x, s, delta)
                        same = ck.red.conv_ty(ck.red.nf_ty(r), env) if isinstance(x, C.Ty) else \
                            ck.red.conv(ck.red.nf(r), env)
                        corpus_dis += not same

    # random well-typed (term, substitution) pairs
    random_pairs = random_dis = 0
    for name in BUILTINS:
        th = builtin(name)
        rng = random.Random(name)
        tg = TermGen(th, rng)
        got = 0
        while got < 250:
            g, m, t, s, delta = tg.pair(rng.choice(th.modes))
            ck = Checker(th)
            try:
                t1 = ck.check(g, m, t, BOOL)
            except CheckError:
                continue
            got += 1
            r = ck.eng.push(t1, s)
            random_pairs += 1
            if not check_no_subst(r):
                leaks.append(f"{name}: {C.pr_tm(r)}")
                continue
            random_dis += not ck.red.conv(ck.red.nf(r), Machine(th).normalize_sub(t1, s, delta))
    ok = not leaks and corpus_dis == 0 and random_dis == 0 and random_pairs == 1000
    report(5, "substitution elimination", ok,
           f"{outer_calls[0]} eliminations while checking the corpus, {corpus_pairs} corpus pairs ({corpus_dis} disagree with the machine), {random_pairs} random pairs "
           f"({random_dis} disagree), {len(leaks)} outputs with substitutions left")


# -- 6. beta and eta -----------------------------------------------------------


def beta(eng, r, m):
    """The contractum of a head redex built by :func:`redex`."""
    match r:
        case App(Ann(Lam(_, body)), arg, rho):
            return eng.inst(body, arg, rho)
        case Proj0(Ann(Pair(a, _))):
            return a
        case Proj1(Ann(Pair(_, b))):
            return b
        case BoolRec(_, t, f, b):
            return t if b == TT else f
        case IdRec(_, base, _, _, Refl(a)):
            return eng.inst(base, a, ident(m))
        case Open(nu, mu, _, Ann(MkBox(_, c)), br):
            return eng.inst(br, c, compose_mod(nu, mu))
    raise ValueError(f"not a redex: {r!r}")


def redex(tg: TermGen, g, m, kind):
    """A random head redex of one connective, with its type."""
    rng = tg.rng
    match kind:
        case "Π":
            rho = tg.path(m)
            body = tg.bool_tm(Extend(EMPTY, rho, BOOL), m, 2)
            arg = tg.bool_tm(C.Lock(g, rho), rho.src, 2)
            return App(Ann(Lam(rho, body), Pi(rho, BOOL, BOOL)), arg, rho), BOOL
        case "Σ":
            p = Ann(Pair(tg.bool_tm(EMPTY, m, 2), tg.bool_tm(EMPTY, m, 2)), Sigma(BOOL, BOOL))
            return (Proj0(p) if rng.random() < 0.5 else Proj1(p)), BOOL
        case "Bool":
            b = rng.choice([C.TT, C.FF])
            if rng.random() < 0.5:
                return BoolRec(BOOL, tg.bool_tm(g, m, 2), tg.bool_tm(g, m, 2), b), BOOL
            return BoolRec(IdTy(BOOL, Var(0), Var(0)), Refl(C.TT), Refl(C.FF), b), IdTy(BOOL, b, b)
        case "Id":
            a = tg.bool_tm(g, m, 2)
            base = tg.bool_tm(Extend(g, ident(m), BOOL), m, 2)
            return IdRec(BOOL, base, a, a, Refl(a)), BOOL
        case "Modal":
            nu = tg.path(m)
            mu = tg.path(nu.src)
            box = Ann(MkBox(mu, tg.bool_tm(EMPTY, mu.src, 2)), Modal(mu, BOOL))
            br = tg.bool_tm(Extend(g, compose_mod(nu, mu), BOOL), m, 2)
            return Open(nu, mu, BOOL, box, br), BOOL


def test_criterion_6_beta_eta(report):
    stats = {}
    failures = []
    for kind in ("Π", "Σ", "Bool", "Id", "Modal"):
        done = 0
        for name in BUILTINS:
            th = builtin(name)
            rng = random.Random(f"{kind}/{name}")
            tg = TermGen(th, rng)
            target = done + 50
            while done < target:
                g, m = tg.ctx(rng.choice(th.modes), rng.randint(0, 3))
                ck = Checker(th)
                r, a = redex(tg, g, m, kind)
                try:
                    r1 = ck.check(g, m, r, a)
                except CheckError:
                    continue
                done += 1
                d = beta(ck.eng, r1, m)
                try:
                    ck.check(g, m, d, a)
                except CheckError as e:
                    failures.append(f"{kind} subject reduction: {e.diag.rule}")
                if not ck.red.conv(r1, d):
                    failures.append(f"{kind} β: {C.pr_tm(r1)} vs {C.pr_tm(d)}")
        stats[f"β{kind}"] = done

    eta = {"Π": 0, "Σ": 0, "Modal absent": 0}
    for name in BUILTINS:
        th = builtin(name)
        rng = random.Random(f"η/{name}")
        tg = TermGen(th, rng)
        for _ in range(50):
            g, m = tg.ctx(rng.choice(th.modes), rng.randint(0, 3))
            ck = Checker(th)
            one = ident(m)
            rho = tg.path(m)
            pi = Pi(rho, BOOL, BOOL)
            lam = ck.check(Extend(g, one, pi), m, Lam(rho, App(Var(1), Var(0, _id_cell(rho)), rho)), pi)
            eta["Π"] += ck.red.conv(lam, Var(0)) and ck.red.conv(Var(0), lam)
            sg = Sigma(BOOL, BOOL)
            pair = ck.check(Extend(g, one, sg), m, Pair(Proj0(Var(0)), Proj1(Var(0))), sg)
            eta["Σ"] += ck.red.conv(pair, Var(0)) and ck.red.conv(Var(0), pair)
            mu = tg.path(m, 0.2)
            md = Modal(mu, BOOL)
            rebox = ck.check(Extend(g, one, md), m, Open(one, mu, md, Var(0), MkBox(mu, Var(0, _id_cell(mu)))), md)
            eta["Modal absent"] += not ck.red.conv(rebox, Var(0)) and not ck.red.conv(Var(0), rebox)
    ok = not failures and all(v == 200 for v in stats.values()) and all(v == 200 for v in eta.values())
    detail = ", ".join(f"{k} {v}" for k, v in stats.items()) + "; η " + ", ".join(
        f"{k} {v}/200" for k, v in eta.items())
    report(6, "β/η suite", ok, detail + "".join(f"; {f}" for f in failures[:5]))


# -- 7. annotation invariance --------------------------------------------------


def _cell_sites(x, path=()):
    if isinstance(x, Var) and x.cell is not None and x.cell is not C.HOLE:
        yield path
    if dataclasses.is_dataclass(x):
        for f in dataclasses.fields(x):
            v = getattr(x, f.name)
            if isinstance(v, (C.Tm, C.Ty, C.Sub)):
                yield from _cell_sites(v, path + (f.name,))


def _get(x, path):
    for k in path:
        x = getattr(x, k)
    return x


def _put(x, path, v):
    if not path:
        return v
    return dataclasses.replace(x, **{path[0]: _put(getattr(x, path[0]), path[1:], v)})


def _verdict(th, d, tm) -> str:
    try:
        Checker(th).check(EMPTY, d.mode, tm, d.ann.ty)
        return "accept"
    except CheckError as e:
        return e.diag.rule


def test_criterion_7_annotation_invariance(report, programs):
    pool = [(programs[s].theory, d, sites) for s in ("adjunction", "crisp")
            for d in programs[s].defs.values() if (sites := list(_cell_sites(d.ann.tm)))]
    rng = random.Random(7)
    verdicts, changed = [], []
    for i in range(100):
        th, d, sites = rng.choice(pool)
        base = d.ann.tm
        if rng.random() < 0.3:
            # make the base term wrong with a cell of the wrong boundary; the variant must stay wrong
            s = rng.choice(sites)
            c = _get(base, s).cell
            bad = next(Gen(n) for n in ("η", "ε") if th.boundary(Gen(n)) != th.boundary(c))
            base = _put(base, s + ("cell",), bad)
        variant = base
        for s in rng.sample(sites, min(len(sites), rng.randint(1, 3))):
            variant = _put(variant, s + ("cell",), equal_variant(th, rng, _get(variant, s).cell))
        a, b = _verdict(th, d, base), _verdict(th, d, variant)
        verdicts.append(a)
        if a != b:
            changed.append(f"case {i} ({d.name}): {a} became {b}")
    n_acc = verdicts.count("accept")
    ok = not changed and 0 < n_acc < 100
    report(7, "annotation invariance", ok,
           f"100 walking-adjunction cases, {n_acc} accepted, {100 - n_acc} rejected, {len(changed)} verdicts changed"
           + "".join(f"; {c}" for c in changed[:5]))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
