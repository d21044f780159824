"""Named surface syntax: tokenizer, recursive-descent parser, printer and elaborator.

Grammar (EBNF)::

    file     ::= { pragma | decl }
    pragma   ::= "#pragma" ("theory" NAME | "axiom" NAME)
    decl     ::= "def" IDENT [ "@" IDENT ] { binder } [ ":" expr ] "=" expr
               | "axiom" IDENT [ "@" IDENT ] ":" expr
               | "check" [ "@" IDENT ] expr ":" expr
               | "normalize" [ "@" IDENT ] expr ":" expr [ "~>" expr ]
    binder   ::= "(" IDENT { IDENT } ":" [ BRACE ] expr ")"
    expr     ::= ("\\" | "λ") IDENT { IDENT } "." expr
               | "let" "mod" [ path ] path IDENT "=" expr [ "return" IDENT "." expr ] "in" expr
               | "if" expr [ "return" IDENT "." expr ] "then" expr "else" expr
               | "(" IDENT { IDENT } ":" [ BRACE ] expr ")" ("->" | "×") expr
               | prod [ "->" expr ]
    prod     ::= app [ ("×" | "*") prod ]
    app      ::= prefix { prefix }
    prefix   ::= "mod" path prefix | ("fst" | "snd" | "El" | "code" | "lift" | "lob") prefix
               | "Id" prefix prefix prefix | "refl" [ prefix ] | atom
    atom     ::= IDENT [ "^" (IDENT | BRACE) ] | "true" | "false" | "Bool" | "U"
               | "(" expr ")" | "(" expr "," expr ")" | "⟨" PATHTEXT "|" expr "⟩"
               | "J" "(" expr ";" IDENT "." expr [ ";" IDENT IDENT IDENT "." expr ] ")"
    path     ::= BRACE | IDENT { "∘" IDENT } | "1" [ "@" IDENT ]

``BRACE`` is raw text between ``{`` and ``}`` (a modality path or a 2-cell
expression in the mode theory's own syntax).  Comments are ``--`` to end of
line and ``{- ... -}``.  ``->`` and ``→``, ``\\`` and ``λ``, ``⟨⟩`` and ``<>``
are interchangeable.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field

from .checker import CheckError, Checker, Diagnostic
from .mode_theory import (
    ALIASES, BUILTINS, BoundaryMismatch, ModeTheory, ModeTheoryError, Path, builtin, parse_cell, parse_path, parse_theory,
)
from .reduction import DEFAULT_FUEL, FuelExhausted
from .subst import _ID_PLACEHOLDER as ANY_ID
from . import syntax as C


# ---------------------------------------------------------------------------
# errors


class SurfaceError(Exception):
    """An error carrying a diagnostic."""

    def __init__(self, diag: Diagnostic):
        super().__init__(str(diag))
        self.diag = diag


class ParseError(SurfaceError):
    def __init__(self, msg: str, file: str, line: int, col: int, expected: set[str] | frozenset = frozenset()):
        exp = ", ".join(sorted(expected)) if expected else None
        super().__init__(Diagnostic("parse", msg, (file, line, col), expected=exp))
        self.line, self.col, self.expected = line, col, set(expected)


class ScopeError(SurfaceError):
    pass


class ModeError(SurfaceError):
    pass


# ---------------------------------------------------------------------------
# surface AST (spans are excluded from equality)


@dataclass(frozen=True)
class SExpr:
    pass


def _span():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SVar(SExpr):
    name: str
    cell: str | None = None
    span: tuple | None = _span()


@dataclass(frozen=True)
class SLam(SExpr):
    names: tuple[str, ...]
    body: SExpr
    span: tuple | None = _span()


@dataclass(frozen=True)
class SApp(SExpr):
    fn: SExpr
    arg: SExpr
    span: tuple | None = _span()


@dataclass(frozen=True)
class SMod(SExpr):
    mu: str
    body: SExpr
    span: tuple | None = _span()


@dataclass(frozen=True)
class SLet(SExpr):
    nu: str | None
    mu: str
    name: str
    scrut: SExpr
    ret: tuple[str, SExpr] | None
    body: SExpr
    span: tuple | None = _span()


@dataclass(frozen=True)
class SIf(SExpr):
    scrut: SExpr
    ret: tuple[str, SExpr] | None
    then: SExpr
    other: SExpr
    span: tuple | None = _span()


@dataclass(frozen=True)
class SJ(SExpr):
    proof: SExpr
    name: str
    base: SExpr
    ret: tuple[str, str, str, SExpr] | None
    span: tuple | None = _span()


@dataclass(frozen=True)
class SPi(SExpr):
    name: str | None
    mu: str | None
    dom: SExpr
    cod: SExpr
    span: tuple | None = _span()


@dataclass(frozen=True)
class SSigma(SExpr):
    name: str | None
    dom: SExpr
    cod: SExpr
    span: tuple | None = _span()


@dataclass(frozen=True)
class SModal(SExpr):
    mu: str
    ty: SExpr
    span: tuple | None = _span()


@dataclass(frozen=True)
class SPair(SExpr):
    fst: SExpr
    snd: SExpr
    span: tuple | None = _span()


@dataclass(frozen=True)
class SUnary(SExpr):
    """``fst``, ``snd``, ``El``, ``code``, ``lift``, ``lob`` and ``refl`` (argument optional only for refl)."""

    op: str
    arg: SExpr | None
    span: tuple | None = _span()


@dataclass(frozen=True)
class SId(SExpr):
    ty: SExpr
    lhs: SExpr
    rhs: SExpr
    span: tuple | None = _span()


@dataclass(frozen=True)
class SConst(SExpr):
    """``true``, ``false``, ``Bool`` or ``U``."""

    name: str
    span: tuple | None = _span()


@dataclass(frozen=True)
class Binder:
    names: tuple[str, ...]
    mu: str | None
    ty: SExpr


@dataclass(frozen=True)
class Decl:
    span: tuple | None = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Pragma(Decl):
    key: str
    value: str


@dataclass(frozen=True)
class Def(Decl):
    name: str
    mode: str | None
    binders: tuple[Binder, ...]
    ty: SExpr | None
    body: SExpr


@dataclass(frozen=True)
class AxiomDecl(Decl):
    name: str
    mode: str
    ty: SExpr


@dataclass(frozen=True)
class CheckDir(Decl):
    mode: str
    expr: SExpr
    ty: SExpr


@dataclass(frozen=True)
class NormDir(Decl):
    mode: str
    expr: SExpr
    ty: SExpr
    expect: SExpr | None = None


# ---------------------------------------------------------------------------
# tokenizer

KEYWORDS = {
    "def", "axiom", "check", "normalize", "let", "mod", "in", "return", "if", "then", "else",
    "J", "fst", "snd", "refl", "Bool", "U", "El", "code", "lift", "lob", "true", "false", "Id",
}
UNARY = ("fst", "snd", "El", "code", "lift", "lob")
SYMBOLS = {
    "->": "->", "→": "->", "~>": "~>", "⇝": "~>", "\\": "\\", "λ": "\\", "⟨": "⟨", "<": "⟨", "⟩": "⟩",
    ">": "⟩", "×": "×", "*": "×", "(": "(", ")": ")", "|": "|", ".": ".", ",": ",", ":": ":", "=": "=",
    "^": "^", "@": "@", "∘": "∘", ";": ";",
}
_IDENT = r"(?!λ)[^\W\d][\w'⁻¹₀₁₂₃₄₅₆₇₈₉]*"
_TOKEN = re.compile(
    r"(?P<ws>[ \t\r\n]+)|(?P<line>--[^\n]*)|(?P<pragma>\#pragma[^\n]*)"
    rf"|(?P<ident>{_IDENT})|(?P<num>\d+)|(?P<sym>->|→|~>|⇝|[\\λ⟨<⟩>×*()|.,:=^@∘;])"
)


@dataclass(frozen=True)
class Tok:
    kind: str  # ident, kw, num, sym, brace, pragma, eof
    text: str
    line: int
    col: int
    pos: int
    end: int


def tokenize(src: str, file: str = "<input>") -> list[Tok]:
    toks: list[Tok] = []
    i = 0

    def where(p):
        nl = src.count("\n", 0, p)
        return nl + 1, p - (src.rfind("\n", 0, p) + 1) + 1

    while i < len(src):
        if src.startswith("{-", i):
            j = src.find("-}", i + 2)
            if j < 0:
                raise ParseError("unterminated block comment", file, *where(i), {"-}"})
            i = j + 2
            continue
        if src[i] == "{":
            j = src.find("}", i + 1)
            if j < 0:
                raise ParseError("unterminated brace", file, *where(i), {"}"})
            toks.append(Tok("brace", " ".join(src[i + 1:j].split()), *where(i), i, j + 1))
            i = j + 1
            continue
        m = _TOKEN.match(src, i)
        if not m:
            raise ParseError(f"unexpected character {src[i]!r}", file, *where(i))
        kind = m.lastgroup
        text = m.group()
        if kind in ("ident", "num", "sym", "pragma"):
            if kind == "ident" and text in KEYWORDS:
                kind = "kw"
            if kind == "sym":
                text = SYMBOLS[text]
            toks.append(Tok(kind, text, *where(i), i, m.end()))
        i = m.end()
    toks.append(Tok("eof", "", *where(len(src)), len(src), len(src)))
    return toks


# ---------------------------------------------------------------------------
# parser

_ATOM_START = {"ident", "num", "brace"}
_ATOM_KW = {"true", "false", "Bool", "U", "J", "mod", "refl", "Id", *UNARY}
_ATOM_SYM = {"(", "⟨"}


class Parser:
    def __init__(self, src: str, file: str = "<input>"):
        self.src = src
        self.file = file
        self.toks = tokenize(src, file)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def span(self, t: Tok | None = None) -> tuple:
        t = t or self.tok
        return (self.file, t.line, t.col)

    def err(self, msg: str, expected: set[str]):
        t = self.tok
        what = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"{msg}; found {what}", self.file, t.line, t.col, expected)

    def is_(self, text: str, kind: str | None = None) -> bool:
        t = self.tok
        return t.text == text and t.kind in ((kind,) if kind else ("kw", "sym"))

    def eat(self, text: str) -> Tok:
        if not self.is_(text):
            self.err(f"expected {text!r}", {text})
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            self.err("expected an identifier", {"identifier"})
        self.i += 1
        return t.text

    # file level
    def file_(self) -> list[Decl]:
        out = []
        while self.tok.kind != "eof":
            out.append(self.decl())
        return out

    def decl(self) -> Decl:
        t = self.tok
        sp = self.span()
        if t.kind == "pragma":
            self.i += 1
            parts = t.text.split()
            if len(parts) != 3 or parts[1] not in ("theory", "axiom"):
                raise ParseError("malformed pragma; use '#pragma theory NAME' or '#pragma axiom NAME'",
                                 self.file, t.line, t.col, {"theory", "axiom"})
            return Pragma(parts[1], parts[2], span=sp)
        if self.is_("def"):
            self.i += 1
            name = self.ident()
            mode = self.mode_ann() if self.is_("@") else None
            bs = []
            while self.is_("("):
                bs.append(self.binder())
            ty = None
            if self.is_(":"):
                self.i += 1
                ty = self.expr()
            self.eat("=")
            return Def(name, mode, tuple(bs), ty, self.expr(), span=sp)
        if self.is_("axiom"):
            self.i += 1
            name = self.ident()
            mode = self.mode_ann() if self.is_("@") else None
            self.eat(":")
            return AxiomDecl(name, mode, self.expr(), span=sp)
        if self.is_("check"):
            self.i += 1
            mode = self.mode_ann() if self.is_("@") else None
            e = self.expr()
            self.eat(":")
            return CheckDir(mode, e, self.expr(), span=sp)
        if self.is_("normalize"):
            self.i += 1
            mode = self.mode_ann() if self.is_("@") else None
            e = self.expr()
            self.eat(":")
            ty = self.expr()
            exp = None
            if self.is_("~>"):
                self.i += 1
                exp = self.expr()
            return NormDir(mode, e, ty, exp, span=sp)
        self.err("expected a declaration", {"def", "axiom", "check", "normalize", "#pragma"})

    def mode_ann(self) -> str:
        self.eat("@")
        return self.ident()

    def binder(self) -> Binder:
        self.eat("(")
        names = [self.ident()]
        while self.tok.kind == "ident":
            names.append(self.ident())
        self.eat(":")
        mu = None
        if self.tok.kind == "brace":
            mu = "".join(self.tok.text.split())
            self.i += 1
        ty = self.expr()
        self.eat(")")
        return Binder(tuple(names), mu, ty)

    def _binder_ahead(self) -> bool:
        """At '(' : is this a telescope binder '(x y : ...' ?"""
        k = 1
        while self.peek(k).kind == "ident":
            k += 1
        return k > 1 and self.peek(k).text == ":" and self.peek(k).kind == "sym"

    # expressions
    def expr(self) -> SExpr:
        sp = self.span()
        if self.is_("\\"):
            self.i += 1
            names = [self.ident()]
            while self.tok.kind == "ident":
                names.append(self.ident())
            self.eat(".")
            return SLam(tuple(names), self.expr(), span=sp)
        if self.is_("let"):
            return self.let_()
        if self.is_("if"):
            self.i += 1
            s = self.expr()
            ret = self.ret1()
            self.eat("then")
            a = self.expr()
            self.eat("else")
            return SIf(s, ret, a, self.expr(), span=sp)
        if self.is_("(") and self._binder_ahead():
            b = self.binder()
            if self.is_("->"):
                self.i += 1
                cod = self.expr()
                for n in reversed(b.names):
                    cod = SPi(None if n == "_" else n, b.mu, b.ty, cod, span=sp)
                return cod
            if self.is_("×"):
                if b.mu is not None:
                    self.err("a Σ binder has no modality", {"->"})
                self.i += 1
                cod = self.expr()
                for n in reversed(b.names):
                    cod = SSigma(None if n == "_" else n, b.ty, cod, span=sp)
                return cod
            self.err("expected '->' or '×' after a binder", {"->", "×"})
        lhs = self.prod()
        if self.is_("->"):
            self.i += 1
            return SPi(None, None, lhs, self.expr(), span=sp)
        return lhs

    def ret1(self):
        if not self.is_("return"):
            return None
        self.i += 1
        y = self.ident()
        self.eat(".")
        return (y, self.expr())

    def let_(self) -> SExpr:
        sp = self.span()
        self.eat("let")
        self.eat("mod")
        items = []
        while not self.is_("="):
            if len(items) == 3:
                self.err("expected '='", {"="})
            items.append(self.path_item())
        if len(items) not in (2, 3) or not re.fullmatch(_IDENT, items[-1][0]) or items[-1][1]:
            self.err("expected 'let mod [ν] μ x = …'", {"identifier"})
        name = items[-1][0]
        nu = items[0][0] if len(items) == 3 else None
        mu = items[-2][0]
        self.eat("=")
        s = self.expr()
        ret = self.ret1()
        self.eat("in")
        return SLet(nu, mu, name, s, ret, self.expr(), span=sp)

    def path_item(self) -> tuple[str, bool]:
        """A path: raw brace text or a bare composite. Returns (text, braced)."""
        t = self.tok
        if t.kind == "brace":
            self.i += 1
            return "".join(t.text.split()), True
        if t.kind == "num":
            self.i += 1
            text = t.text
            if self.is_("@"):
                self.i += 1
                text += "@" + self.ident()
            return text, False
        parts = [self.ident()]
        while self.is_("∘"):
            self.i += 1
            parts.append(self.ident())
        return "∘".join(parts), False

    def prod(self) -> SExpr:
        sp = self.span()
        lhs = self.app()
        if self.is_("×"):
            self.i += 1
            return SSigma(None, lhs, self.prod(), span=sp)
        return lhs

    def _atom_start(self) -> bool:
        t = self.tok
        if t.kind == "ident":
            return True
        if t.kind == "kw":
            return t.text in _ATOM_KW
        return t.kind == "sym" and t.text in _ATOM_SYM

    def app(self) -> SExpr:
        sp = self.span()
        if not self._atom_start():
            self.err("expected an expression", {"identifier", "(", "⟨", "\\", "let", "if", "mod", "true", "false"})
        e = self.prefix()
        while self._atom_start():
            e = SApp(e, self.prefix(), span=sp)
        return e

    def prefix(self) -> SExpr:
        sp = self.span()
        t = self.tok
        if t.kind == "kw":
            if t.text == "mod":
                self.i += 1
                mu, _ = self.path_item()
                return SMod(mu, self.prefix(), span=sp)
            if t.text in UNARY:
                self.i += 1
                return SUnary(t.text, self.prefix(), span=sp)
            if t.text == "refl":
                self.i += 1
                arg = self.prefix() if self._atom_start() else None
                return SUnary("refl", arg, span=sp)
            if t.text == "Id":
                self.i += 1
                a = self.prefix()
                x = self.prefix()
                return SId(a, x, self.prefix(), span=sp)
        return self.atom()

    def atom(self) -> SExpr:
        sp = self.span()
        t = self.tok
        if t.kind == "ident":
            self.i += 1
            cell = None
            if self.is_("^"):
                self.i += 1
                c = self.tok
                if c.kind not in ("brace", "ident", "num"):
                    self.err("expected a 2-cell after '^'", {"identifier", "{cell}"})
                self.i += 1
                cell = c.text
            return SVar(t.text, cell, span=sp)
        if t.kind == "kw" and t.text in ("true", "false", "Bool", "U"):
            self.i += 1
            return SConst(t.text, span=sp)
        if self.is_("J"):
            self.i += 1
            self.eat("(")
            p = self.expr()
            self.eat(";")
            z = self.ident()
            self.eat(".")
            base = self.expr()
            ret = None
            if self.is_(";"):
                self.i += 1
                x, y, q = self.ident(), self.ident(), self.ident()
                self.eat(".")
                ret = (x, y, q, self.expr())
            self.eat(")")
            return SJ(p, z, base, ret, span=sp)
        if self.is_("("):
            self.i += 1
            e = self.expr()
            if self.is_(","):
                self.i += 1
                e2 = self.expr()
                self.eat(")")
                return SPair(e, e2, span=sp)
            self.eat(")")
            return e
        if self.is_("⟨"):
            start = self.tok.end
            self.i += 1
            while not self.is_("|"):
                if self.tok.kind == "eof":
                    self.err("expected '|'", {"|"})
                self.i += 1
            mu = "".join(self.src[start:self.tok.pos].split())
            if not mu:
                self.err("expected a modality before '|'", {"modality"})
            self.i += 1
            ty = self.expr()
            self.eat("⟩")
            return SModal(mu, ty, span=sp)
        self.err("expected an expression", {"identifier", "(", "⟨"})


def parse(source: str, file: str = "<input>") -> list[Decl]:
    """Parse a whole ``.mtt`` file."""
    return Parser(source, file).file_()


def parse_expr(source: str, file: str = "<input>") -> SExpr:
    p = Parser(source, file)
    e = p.expr()
    if p.tok.kind != "eof":
        p.err("unexpected trailing input", {"end of input"})
    return e


# ---------------------------------------------------------------------------
# printer


def _path_txt(mu: str) -> str:
    return "{" + mu + "}"


def print_expr(e: SExpr, prec: int = 0) -> str:
    """Print with minimal parentheses; parse(print(e)) == e."""

    def par(s, need):
        return f"({s})" if need else s

    match e:
        case SVar(n, c):
            return n if c is None else f"{n}^{{{c}}}"
        case SConst(n):
            return n
        case SLam(ns, b):
            return par("\\" + " ".join(ns) + ". " + print_expr(b, 0), prec > 0)
        case SLet(nu, mu, x, s, ret, b):
            head = "let mod " + (_path_txt(nu) + " " if nu is not None else "") + _path_txt(mu) + f" {x} = "
            r = f" return {ret[0]}. {print_expr(ret[1], 0)}" if ret else ""
            return par(head + print_expr(s, 0) + r + " in " + print_expr(b, 0), prec > 0)
        case SIf(s, ret, a, b):
            r = f" return {ret[0]}. {print_expr(ret[1], 0)}" if ret else ""
            return par(f"if {print_expr(s, 0)}{r} then {print_expr(a, 0)} else {print_expr(b, 0)}", prec > 0)
        case SJ(p, z, base, ret):
            r = f"; {ret[0]} {ret[1]} {ret[2]}. {print_expr(ret[3], 0)}" if ret else ""
            return f"J({print_expr(p, 0)}; {z}. {print_expr(base, 0)}{r})"
        case SPi(n, mu, d, c):
            if n is None and mu is None:
                return par(f"{print_expr(d, 1)} -> {print_expr(c, 0)}", prec > 0)
            ann = ":" + (_path_txt(mu) if mu is not None else "")
            return par(f"({n or '_'} {ann} {print_expr(d, 0)}) -> {print_expr(c, 0)}", prec > 0)
        case SSigma(n, d, c):
            if n is None:
                return par(f"{print_expr(d, 2)} × {print_expr(c, 1)}", prec > 1)
            return par(f"({n} : {print_expr(d, 0)}) × {print_expr(c, 0)}", prec > 0)
        case SModal(mu, t):
            return f"⟨{mu}| {print_expr(t, 0)}⟩"
        case SPair(a, b):
            return f"({print_expr(a, 0)}, {print_expr(b, 0)})"
        case SApp(f, a):
            return par(f"{print_expr(f, 2)} {print_expr(a, 3)}", prec > 2)
        case SMod(mu, b):
            return par(f"mod {_path_txt(mu)} {print_expr(b, 3)}", prec > 2)
        case SUnary(op, a):
            if a is None:
                return par(op, prec >= 2)
            return par(f"{op} {print_expr(a, 3)}", prec > 2)
        case SId(a, x, y):
            return par(f"Id {print_expr(a, 3)} {print_expr(x, 3)} {print_expr(y, 3)}", prec > 2)
    raise TypeError(e)


def _at(m: str | None) -> str:
    return f" @ {m}" if m is not None else ""


def print_decl(d: Decl) -> str:
    match d:
        case Pragma(k, v):
            return f"#pragma {k} {v}"
        case Def(n, m, bs, ty, body):
            tele = "".join(
                f" ({' '.join(b.names)} :{_path_txt(b.mu) if b.mu is not None else ''} {print_expr(b.ty)})"
                for b in bs
            )
            at = f" @ {m}" if m is not None else ""
            sig = f" : {print_expr(ty)}" if ty is not None else ""
            return f"def {n}{at}{tele}{sig} =\n  {print_expr(body)}"
        case AxiomDecl(n, m, ty):
            return f"axiom {n}{_at(m)} : {print_expr(ty)}"
        case CheckDir(m, e, ty):
            return f"check{_at(m)} {print_expr(e)} : {print_expr(ty)}"
        case NormDir(m, e, ty, exp):
            tail = f" ~> {print_expr(exp)}" if exp is not None else ""
            return f"normalize{_at(m)} {print_expr(e)} : {print_expr(ty)}{tail}"
    raise TypeError(d)


def print_decls(ds: list[Decl]) -> str:
    return "\n\n".join(print_decl(d) for d in ds) + "\n"


# ---------------------------------------------------------------------------
# elaboration


def resolve_theory(name: str, base_dir: str | None = None) -> ModeTheory:
    """A built-in name or alias, or a path to a theory file."""
    key = ALIASES.get(name, name)
    if key in BUILTINS:
        return builtin(key)
    path = name if base_dir is None or os.path.isabs(name) else os.path.join(base_dir, name)
    with open(path, encoding="utf-8") as fh:
        return parse_theory(fh.read(), os.path.splitext(os.path.basename(path))[0])


@dataclass
class DefInfo:
    name: str
    mode: str
    ann: C.Ann  # checked, elaborated definition
    span: tuple | None
    params: tuple[str, ...] = ()


@dataclass
class Directive:
    kind: str  # check | normalize
    mode: str
    term: C.Tm
    ty: C.Ty
    normal: C.Tm | None = None
    expect: C.Tm | None = None
    span: tuple | None = None
    source: str = ""  # the directive's term as written


@dataclass
class Program:
    theory: ModeTheory
    checker: Checker
    defs: dict[str, DefInfo] = field(default_factory=dict)
    axioms: dict[str, tuple[str, C.Ty]] = field(default_factory=dict)
    directives: list[Directive] = field(default_factory=list)
    pragmas: list[Pragma] = field(default_factory=list)


class Elaborator:
    """Scope resolution and sort dispatch; every declaration is checked as soon as it is elaborated."""

    def __init__(self, th: ModeTheory, checker: Checker, file: str = "<input>"):
        self.th = th
        self.ck = checker
        self.file = file
        self.globals: dict[str, C.Tm] = {}
        self.axiom_tys: dict[str, C.Ty] = {}
        self.cur: tuple | None = None

    def _fail(self, cls, rule, msg, span=None):
        raise cls(Diagnostic(rule, msg, span or self.cur))

    def _mark(self, node, span):
        if span is not None:
            self.ck.spans[id(node)] = span
        return node

    def path(self, text: str | None, span=None) -> Path:
        if text is None or text == "1":
            return ANY_ID
        try:
            return parse_path(self.th, text)
        except ModeTheoryError as e:
            self._fail(ScopeError, "scope", f"bad modality {text!r}: {e}", span)

    def cell(self, text: str, span=None):
        try:
            return parse_cell(self.th, text)
        except BoundaryMismatch as e:
            self._fail(ScopeError, "cell", f"ill-formed 2-cell {text!r}: {e}", span)
        except ModeTheoryError as e:
            self._fail(ScopeError, "scope", f"bad 2-cell {text!r}: {e}", span)

    # terms
    def tm(self, e: SExpr, env: tuple[str, ...]) -> C.Tm:
        return self._mark(self._tm(e, env), e.span)

    def _tm(self, e: SExpr, env) -> C.Tm:
        match e:
            case SVar(n, c):
                for k in range(len(env) - 1, -1, -1):
                    if env[k] == n:
                        return C.Var(len(env) - 1 - k, C.HOLE if c is None else self.cell(c, e.span))
                if c is not None:
                    self._fail(ScopeError, "scope", f"2-cell annotation on non-local name {n}", e.span)
                if n in self.globals:
                    return self.globals[n]
                if n in self.axiom_tys:
                    return C.Axiom(n, self.axiom_tys[n])
                self._fail(ScopeError, "scope", f"unknown identifier {n}", e.span)
            case SConst("true"):
                return C.Tt()
            case SConst("false"):
                return C.Ff()
            case SLam(ns, b):
                out = self.tm(b, env + ns)
                for _ in ns:
                    out = C.Lam(None, out)
                return out
            case SApp(f, a):
                return C.App(self.tm(f, env), self.tm(a, env), None)
            case SMod(mu, b):
                return C.MkBox(self.path(mu, e.span), self.tm(b, env))
            case SLet(nu, mu, x, s, ret, b):
                mot = self.ty(ret[1], env + (ret[0],), 1) if ret else None
                return C.Open(self.path(nu, e.span), self.path(mu, e.span), mot, self.tm(s, env),
                              self.tm(b, env + (x,)))
            case SIf(s, ret, a, b):
                mot = self.ty(ret[1], env + (ret[0],), 1) if ret else None
                return C.BoolRec(mot, self.tm(a, env), self.tm(b, env), self.tm(s, env))
            case SJ(p, z, base, ret):
                mot = self.ty(ret[3], env + ret[:3], 1) if ret else None
                return C.IdRec(mot, self.tm(base, env + (z,)), None, None, self.tm(p, env))
            case SPair(a, b):
                return C.Pair(self.tm(a, env), self.tm(b, env))
            case SUnary("fst", a):
                return C.Proj0(self.tm(a, env))
            case SUnary("snd", a):
                return C.Proj1(self.tm(a, env))
            case SUnary("refl", a):
                return C.Refl(None if a is None else self.tm(a, env))
            case SUnary("lob", a):
                return C.Axiom("lob", self.ty(a, env, 1))
            case SUnary("code", a):
                return C.Enc(self.ty(a, env, 0))
            case SConst() | SPi() | SSigma() | SModal() | SId() | SUnary("El" | "lift"):
                return C.Enc(self.ty(e, env, 0))
        raise TypeError(e)

    # types
    def ty(self, e: SExpr, env: tuple[str, ...], lv: int) -> C.Ty:
        return self._mark(self._ty(e, env, lv), e.span)

    def _ty(self, e: SExpr, env, lv: int) -> C.Ty:
        match e:
            case SConst("Bool"):
                return C.BOOL
            case SConst("U"):
                return C.UNI
            case SPi(n, mu, d, c):
                return C.Pi(self.path(mu, e.span), self.ty(d, env, lv), self.ty(c, env + (n or " ",), lv))
            case SSigma(n, d, c):
                return C.Sigma(self.ty(d, env, lv), self.ty(c, env + (n or " ",), lv))
            case SModal(mu, a):
                return C.Modal(self.path(mu, e.span), self.ty(a, env, lv))
            case SId(a, x, y):
                return C.IdTy(self.ty(a, env, lv), self.tm(x, env), self.tm(y, env))
            case SUnary("lift", a):
                return C.Lift(0, self.ty(a, env, 0))
            case SUnary("El", a):
                d = C.Dec(self.tm(a, env))
            case _:
                d = C.Dec(self.tm(e, env))
        return C.Lift(0, d) if lv == 1 else d

    # declarations
    def def_(self, d: Def) -> DefInfo:
        self.cur = d.span
        if d.name in self.globals or d.name in self.axiom_tys:
            self._fail(ScopeError, "scope", f"duplicate definition {d.name}")
        mode = self._mode(d.mode, f"definition {d.name}")
        ty_s, body_s, names = d.ty, d.body, []
        for b in reversed(d.binders):
            for n in reversed(b.names):
                if ty_s is None:
                    self._fail(ScopeError, "scope", f"definition {d.name} with parameters needs a result type")
                ty_s = SPi(n, b.mu, b.ty, ty_s, span=d.span)
                names.insert(0, n)
        if names:
            body_s = SLam(tuple(names), body_s, span=d.span)
        body = self.tm(body_s, ())
        ck = self.ck
        if ty_s is None:
            body1, ty1 = self._run(ck.infer, C.EMPTY, mode, body)
        else:
            ty1 = self._run(ck.check_ty, C.EMPTY, mode, self.ty(ty_s, (), 1), 1)
            body1 = self._run(ck.check, C.EMPTY, mode, body, ty1)
        ann = C.Ann(body1, ty1, d.name)
        ck.register_def(ann, mode)
        ck.def_modes[d.name] = mode
        self.globals[d.name] = ann
        return DefInfo(d.name, mode, ann, d.span, tuple(names))

    def axiom(self, d: AxiomDecl) -> C.Ty:
        self.cur = d.span
        if d.name in self.globals or d.name in self.axiom_tys or d.name == "lob":
            self._fail(ScopeError, "scope", f"duplicate definition {d.name}")
        mode = self._mode(d.mode, f"axiom {d.name}")
        ty1 = self._run(self.ck.check_ty, C.EMPTY, mode, self.ty(d.ty, (), 1), 1)
        self.ck.add_postulate(d.name, mode, ty1)
        self.axiom_tys[d.name] = ty1
        return ty1

    def directive(self, d: CheckDir | NormDir) -> Directive:
        self.cur = d.span
        mode = self._mode(d.mode)
        ck = self.ck
        ty1 = self._run(ck.check_ty, C.EMPTY, mode, self.ty(d.ty, (), 1), 1)
        t1 = self._run(ck.check, C.EMPTY, mode, self.tm(d.expr, ()), ty1)
        if isinstance(d, CheckDir):
            return Directive("check", mode, t1, ty1, span=d.span, source=print_expr(d.expr))
        nf = self._run(ck.red.nf, t1)
        out = Directive("normalize", mode, t1, ty1, nf, span=d.span, source=print_expr(d.expr))
        if d.expect is not None:
            e1 = self._run(ck.check, C.EMPTY, mode, self.tm(d.expect, ()), ty1)
            out.expect = self._run(ck.red.nf, e1)
            if out.expect != nf:
                raise SurfaceError(Diagnostic("normalize", "normal form differs from the expected one", d.span,
                                              expected=C.pr_tm(out.expect), actual=C.pr_tm(nf)))
        return out

    def _mode(self, m: str | None, what: str = "this declaration") -> str:
        """Validate a mode annotation; an absent one defaults to the theory's only mode."""
        if m is None:
            if len(self.th.modes) != 1:
                self._fail(ModeError, "mode", f"{what} needs a mode annotation '@ m'")
            return self.th.modes[0]
        if m not in self.th.modes:
            self._fail(ModeError, "mode", f"unknown mode {m} in theory {self.th.name}")
        return m

    def _run(self, fn, *args):
        try:
            self.ck._refuel()
            return fn(*args)
        except CheckError as e:
            d = e.diag
            if d.span is None:
                d = Diagnostic(d.rule, d.message, self.cur, d.expected, d.actual, d.obligation)
            if d.rule == "mode":
                raise ModeError(d) from None
            raise SurfaceError(d) from None
        except FuelExhausted as e:
            raise SurfaceError(Diagnostic("fuel", str(e), self.cur)) from None


def elaborate(decls: list[Decl], theory: ModeTheory | None = None, fuel: int = DEFAULT_FUEL,
              file: str = "<input>", base_dir: str | None = None) -> Program:
    """Elaborate and check a parsed file; raises SurfaceError (with a Diagnostic) on the first failure."""
    pragmas = [d for d in decls if isinstance(d, Pragma)]
    th = theory
    if th is None:
        names = [p.value for p in pragmas if p.key == "theory"]
        if len(names) > 1:
            raise SurfaceError(Diagnostic("pragma", "more than one theory pragma", pragmas[0].span))
        try:
            th = resolve_theory(names[0], base_dir) if names else builtin("trivial")
        except (OSError, ModeTheoryError) as e:
            raise SurfaceError(Diagnostic("pragma", f"cannot load theory: {e}", pragmas[0].span)) from None
    ck = Checker(th, fuel=fuel)
    for p in pragmas:
        if p.key == "axiom":
            if p.value != "lob":
                raise SurfaceError(Diagnostic("pragma", f"unknown axiom package {p.value}", p.span))
            try:
                ck.enable_lob()
            except ModeTheoryError as e:
                raise SurfaceError(Diagnostic("pragma", str(e), p.span)) from None
    prog = Program(th, ck, pragmas=pragmas)
    el = Elaborator(th, ck, file)
    for d in decls:
        match d:
            case Def():
                prog.defs[d.name] = el.def_(d)
            case AxiomDecl():
                ty = el.axiom(d)
                prog.axioms[d.name] = (ck.axioms[d.name].mode, ty)
            case CheckDir() | NormDir():
                prog.directives.append(el.directive(d))
    return prog


def load(source: str, theory: ModeTheory | None = None, fuel: int = DEFAULT_FUEL, file: str = "<input>",
         base_dir: str | None = None) -> tuple[Program | None, Diagnostic | None]:
    """Parse, elaborate and check; returns (program, None) or (None, diagnostic)."""
    try:
        return elaborate(parse(source, file), theory, fuel, file, base_dir), None
    except SurfaceError as e:
        return None, e.diag


def load_file(path: str, theory: ModeTheory | None = None, fuel: int = DEFAULT_FUEL):
    with open(path, encoding="utf-8") as fh:
        src = fh.read()
    return load(src, theory, fuel, path, os.path.dirname(os.path.abspath(path)))


__all__ = [
    "AxiomDecl", "Binder", "CheckDir", "Decl", "Def", "DefInfo", "Directive", "Elaborator", "ModeError",
    "NormDir", "ParseError", "Pragma", "Program", "ScopeError", "SurfaceError", "elaborate", "load",
    "load_file", "parse", "parse_expr", "print_decl", "print_decls", "print_expr", "resolve_theory", "tokenize",
]
