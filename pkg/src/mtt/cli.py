"""Command-line front end: ``mtt check | normalize | eval | theory | corpus``.

Exit codes: 0 success, 1 check or evaluation failure, 2 usage or I/O error.
``--format structured`` prints one JSON object per line with fixed field names.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import syntax as C
from .checker import Diagnostic
from .corpus import ManifestError, default_manifest, load_manifest, run_corpus
from .mode_theory import (
    ModeTheoryError, SearchExhausted, Undecided, parse_cell, parse_path, parse_path_pair, print_cell, print_theory,
)
from .reduction import DEFAULT_FUEL, CanonicityViolation, FuelExhausted, NonCanonicalAxiom, OpenTerm, eval_closed
from .surface import load_file, resolve_theory

FUEL_ENV = "MTT_FUEL"
EVAL_FUEL = 1_000_000

OK, FAIL, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class CliConfig:
    command: str
    theory: str | None
    fuel: int | None  # None: the command's default, possibly overridden by $MTT_FUEL
    fmt: str
    paths: tuple[str, ...]

    def fuel_or(self, default: int) -> int:
        if self.fuel is not None:
            return self.fuel
        env = os.environ.get(FUEL_ENV)
        if env:
            return _positive(env, FUEL_ENV)
        return default


def _positive(text: str, what: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise UsageError(f"{what} must be a positive integer, not {text!r}") from None
    if n <= 0:
        raise UsageError(f"{what} must be a positive integer, not {n}")
    return n


class Out:
    """Serializes results in input order in either output format."""

    def __init__(self, fmt: str, stream=None):
        self.fmt = fmt
        self.stream = stream or sys.stdout

    def emit(self, record: dict, human: str):
        if self.fmt == "structured":
            print(json.dumps(record, ensure_ascii=False), file=self.stream)
        else:
            print(human, file=self.stream)


def excerpt(d: Diagnostic) -> str:
    """The diagnostic followed by its source line and a caret, when the span names a readable file."""
    text = str(d)
    if not d.span:
        return text
    file, line, col = d.span
    try:
        with open(file, encoding="utf-8") as fh:
            src = fh.read().splitlines()
    except OSError:
        return text
    if not 1 <= line <= len(src):
        return text
    code = src[line - 1]
    return f"{text}\n  {line:>4} | {code}\n       | {' ' * max(col - 1, 0)}^"


def _theory(cfg: CliConfig, base_dir: str | None = None):
    if cfg.theory is None:
        return None
    try:
        return resolve_theory(cfg.theory, base_dir)
    except OSError as e:
        raise UsageError(f"cannot read theory {cfg.theory}: {e}") from None
    except ModeTheoryError as e:
        raise UsageError(f"bad theory {cfg.theory}: {e}") from None


def _load(path: str, cfg: CliConfig, fuel: int):
    """Load a file or return (code, record, human) describing why it could not be loaded."""
    if not os.path.isfile(path):
        d = Diagnostic("io", f"no such file: {path}")
        return None, (USAGE, {"file": path, "status": "error", "diagnostic": d.record()}, str(d))
    prog, diag = load_file(path, _theory(cfg), fuel)
    if diag is not None:
        return None, (FAIL, {"file": path, "status": "error", "diagnostic": diag.record()}, excerpt(diag))
    return prog, None


# ---------------------------------------------------------------------------
# commands


def _check_one(path: str, cfg: CliConfig):
    try:
        prog, err = _load(path, cfg, cfg.fuel_or(DEFAULT_FUEL))
    except UsageError as e:
        return USAGE, {"file": path, "status": "error", "diagnostic": {"rule": "usage", "message": str(e)}}, str(e)
    if err:
        return err
    rec = {"file": path, "status": "ok", "theory": prog.theory.name, "defs": list(prog.defs),
           "directives": len(prog.directives)}
    return OK, rec, f"{path}: ok ({len(prog.defs)} definitions, {len(prog.directives)} directives)"


def cmd_check(cfg: CliConfig, out: Out, jobs: int = 1) -> int:
    if jobs > 1 and len(cfg.paths) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_check_one, cfg.paths, [cfg] * len(cfg.paths)))
    else:
        results = [_check_one(p, cfg) for p in cfg.paths]
    for _, rec, human in results:
        out.emit({"command": "check", **rec}, human)
    return max(code for code, _, _ in results)


def cmd_normalize(cfg: CliConfig, names: list[str], out: Out) -> int:
    path = cfg.paths[0]
    prog, err = _load(path, cfg, cfg.fuel_or(DEFAULT_FUEL))
    if err:
        out.emit({"command": "normalize", **err[1]}, err[2])
        return err[0]
    red = prog.checker.red
    if not names:
        for d in prog.directives:
            if d.kind == "normalize":
                nf = C.pr_tm(d.normal)
                out.emit({"command": "normalize", "file": path, "term": d.source, "normal": nf},
                         f"{d.source} ~> {nf}")
        return OK
    for n in names:
        if n not in prog.defs:
            raise UsageError(f"no definition named {n} in {path}")
    for n in names:
        info = prog.defs[n]
        prog.checker._refuel()
        try:
            nf = C.pr_tm(red.nf(info.ann.tm))
        except FuelExhausted as e:
            out.emit({"command": "normalize", "file": path, "def": n, "status": "error",
                      "diagnostic": {"rule": "fuel", "message": str(e)}}, f"{n}: {e}")
            return FAIL
        ty = C.pr_ty(info.ann.ty)
        out.emit({"command": "normalize", "file": path, "def": n, "normal": nf, "type": ty}, f"{n} ~> {nf} : {ty}")
    return OK


def cmd_eval(cfg: CliConfig, name: str, out: Out) -> int:
    path = cfg.paths[0]
    fuel = cfg.fuel_or(EVAL_FUEL)
    prog, err = _load(path, cfg, fuel)
    if err:
        out.emit({"command": "eval", **err[1]}, err[2])
        return err[0]
    if name not in prog.defs:
        raise UsageError(f"no definition named {name} in {path}")
    info = prog.defs[name]
    base = {"command": "eval", "file": path, "def": name}
    try:
        if info.params:
            raise OpenTerm(f"definition {name} has parameters {', '.join(info.params)}")
        rep = eval_closed(prog.theory, info.ann, info.ann.ty, fuel, prog.checker.axioms)
    except (OpenTerm, FuelExhausted, NonCanonicalAxiom, CanonicityViolation) as e:
        kind = type(e).__name__
        out.emit({**base, "status": "error", "error": kind, "message": str(e)}, f"{name}: {kind}: {e}")
        return FAIL
    out.emit({**base, "status": "ok", "kind": rep.kind, "value": str(rep)}, str(rep))
    return OK


def cmd_theory(theory: str, query: str, args: list[str], out: Out) -> int:
    try:
        th = resolve_theory(theory)
    except ModeTheoryError as e:
        raise UsageError(f"bad theory {theory}: {e}") from None
    need = {"eq": 2, "cell-eq": 2, "find-cell": 2, "leq": 2, "show": 0}
    if query not in need:
        raise UsageError(f"unknown theory query {query!r}; expected one of {', '.join(need)}")
    if len(args) != need[query]:
        raise UsageError(f"theory {query} takes {need[query]} arguments")
    rec = {"command": "theory", "theory": th.name, "query": query, "args": args}
    try:
        match query:
            case "show":
                text = print_theory(th).rstrip("\n")
                out.emit({**rec, "answer": text}, text)
                return OK
            case "eq" | "leq" | "find-cell":
                mu, nu = parse_path_pair(th, *args)
                if query == "eq":
                    ans = th.eq_mod(mu, nu)
                elif query == "leq":
                    ans = th.leq(mu, nu)
                else:
                    c = th.find_cell(mu, nu)
                    ans = print_cell(c) if c is not None else None
            case "cell-eq":
                ans = th.eq_cell(parse_cell(th, args[0]), parse_cell(th, args[1]))
    except (Undecided, SearchExhausted) as e:
        out.emit({**rec, "status": "undecided", "message": str(e)}, f"undecided: {e}")
        return FAIL
    except ModeTheoryError as e:
        raise UsageError(str(e)) from None
    human = "none" if ans is None else (str(ans).lower() if isinstance(ans, bool) else ans)
    out.emit({**rec, "answer": ans}, human)
    return OK


def cmd_corpus(manifest: str | None, cfg: CliConfig, out: Out, jobs: int = 1) -> int:
    path = manifest or default_manifest()
    if path is None:
        raise UsageError("no manifest found; pass --manifest or set MTT_MANIFEST")
    try:
        m = load_manifest(path)
    except OSError as e:
        raise UsageError(f"cannot read manifest: {e}") from None
    except (ManifestError, ValueError) as e:
        raise UsageError(f"bad manifest: {e}") from None
    rep = run_corpus(m, cfg.fuel_or(DEFAULT_FUEL), jobs)
    for r in rep.results:
        rec = r.record()
        rec.pop("seconds")
        line = f"{'PASS' if r.ok else 'FAIL'} {r.entry.path} ({rec['expected']}, got {r.actual})"
        out.emit({"command": "corpus", **rec}, line + (f"\n  {r.detail}" if r.detail else ""))
    summary = f"{rep.passed}/{len(rep.results)} entries pass"
    out.emit({"command": "corpus", "summary": {"passed": rep.passed, "total": len(rep.results)}}, summary)
    return OK if rep.ok else FAIL


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--theory", help="built-in theory name, alias, or theory file (overrides the pragma)")
    common.add_argument("--fuel", help=f"axiom unfolding budget (default from ${FUEL_ENV} or per command)")
    common.add_argument("--format", choices=("human", "structured"), default="human", dest="fmt")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for several files")

    p = argparse.ArgumentParser(prog="mtt", description="Checker for multimodal dependent type theory.")
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("check", parents=[common], help="check .mtt files")
    c.add_argument("paths", nargs="+")
    n = sub.add_parser("normalize", parents=[common], help="print normal forms of definitions or directives")
    n.add_argument("path")
    n.add_argument("names", nargs="*")
    e = sub.add_parser("eval", parents=[common], help="evaluate a closed definition to canonical form")
    e.add_argument("path")
    e.add_argument("name")
    t = sub.add_parser("theory", parents=[common], help="query a mode theory: eq, leq, cell-eq, find-cell, show")
    t.add_argument("name", help="theory name, alias, or file")
    t.add_argument("query")
    t.add_argument("args", nargs="*")
    k = sub.add_parser("corpus", parents=[common], help="run the corpus manifest")
    k.add_argument("--manifest")
    return p


def main(argv: list[str] | None = None) -> int:
    p = build_parser()
    try:
        ns = p.parse_args(argv)
    except SystemExit as e:
        return USAGE if e.code else OK
    out = Out(ns.fmt)
    try:
        fuel = _positive(ns.fuel, "--fuel") if ns.fuel is not None else None
        paths = tuple(ns.paths) if ns.command == "check" else (getattr(ns, "path", None),)
        cfg = CliConfig(ns.command, ns.theory, fuel, ns.fmt, paths)
        cfg.fuel_or(DEFAULT_FUEL)  # validate $MTT_FUEL up front
        match ns.command:
            case "check":
                return cmd_check(cfg, out, ns.jobs)
            case "normalize":
                return cmd_normalize(cfg, ns.names, out)
            case "eval":
                return cmd_eval(cfg, ns.name, out)
            case "theory":
                return cmd_theory(ns.name, ns.query, ns.args, out)
            case "corpus":
                return cmd_corpus(ns.manifest, cfg, out, ns.jobs)
    except UsageError as e:
        out.emit({"command": ns.command, "status": "error", "diagnostic": {"rule": "usage", "message": str(e)}},
                 f"mtt: {e}")
        return USAGE
    except OSError as e:
        out.emit({"command": ns.command, "status": "error", "diagnostic": {"rule": "io", "message": str(e)}},
                 f"mtt: {e}")
        return USAGE
    return USAGE


if __name__ == "__main__":
    sys.exit(main())
