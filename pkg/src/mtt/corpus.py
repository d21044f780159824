"""Corpus manifest and runner: check every entry and compare verdicts and normal forms."""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import syntax as C
from .reduction import DEFAULT_FUEL
from .surface import load_file

MANIFEST_ENV = "MTT_MANIFEST"


class ManifestError(Exception):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    path: str  # relative to the manifest's directory
    theory: str
    verdict: str  # accept | reject
    anchor: str
    rule: str | None = None
    normal_forms: tuple[str, ...] | None = None
    notes: str | None = None

    @staticmethod
    def from_json(d: dict) -> "CorpusEntry":
        try:
            e = CorpusEntry(d["path"], d["theory"], d["verdict"], d["anchor"], d.get("rule"),
                            tuple(d["normal_forms"]) if "normal_forms" in d else None, d.get("notes"))
        except KeyError as k:
            raise ManifestError(f"manifest entry {d!r} lacks field {k}") from None
        if e.verdict not in ("accept", "reject"):
            raise ManifestError(f"{e.path}: verdict must be accept or reject, not {e.verdict!r}")
        if e.verdict == "reject" and not e.rule:
            raise ManifestError(f"{e.path}: a reject entry must name its rule")
        if not e.anchor:
            raise ManifestError(f"{e.path}: every entry needs an anchor")
        return e


@dataclass(frozen=True)
class Manifest:
    root: str
    entries: tuple[CorpusEntry, ...]


def load_manifest(path: str | os.PathLike) -> Manifest:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict) or not isinstance(raw.get("entries"), list):
        raise ManifestError("a manifest is a JSON object with an 'entries' list")
    return Manifest(os.path.dirname(os.path.abspath(path)), tuple(CorpusEntry.from_json(e) for e in raw["entries"]))


def default_manifest() -> Path | None:
    """$MTT_MANIFEST, else ./corpus/manifest.json, else the one next to the source tree."""
    env = os.environ.get(MANIFEST_ENV)
    if env:
        return Path(env)
    for cand in (Path.cwd() / "corpus" / "manifest.json",
                 Path(__file__).resolve().parents[2] / "corpus" / "manifest.json"):
        if cand.is_file():
            return cand
    return None


@dataclass
class EntryResult:
    entry: CorpusEntry
    ok: bool
    actual: str  # "accept" or the rejecting rule
    detail: str = ""
    diagnostic: dict | None = None
    seconds: float = 0.0

    def record(self) -> dict:
        return {"path": self.entry.path, "expected": self.entry.verdict if self.entry.verdict == "accept"
                else f"reject({self.entry.rule})", "actual": self.actual, "ok": self.ok,
                "detail": self.detail, "diagnostic": self.diagnostic, "seconds": round(self.seconds, 4)}


@dataclass
class CorpusReport:
    results: list[EntryResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    @property
    def passed(self) -> int:
        return sum(r.ok for r in self.results)

    def records(self) -> list[dict]:
        return [r.record() for r in self.results]


def run_entry(root: str, e: CorpusEntry, fuel: int = DEFAULT_FUEL) -> EntryResult:
    t0 = time.perf_counter()
    path = os.path.join(root, e.path)
    try:
        prog, diag = load_file(path, fuel=fuel)
    except OSError as exc:
        return EntryResult(e, False, "io", str(exc), seconds=time.perf_counter() - t0)
    dt = time.perf_counter() - t0
    if diag is not None:
        ok = e.verdict == "reject" and diag.rule == e.rule
        detail = "" if ok else str(diag)
        return EntryResult(e, ok, diag.rule, detail, diag.record(), dt)
    if e.verdict == "reject":
        return EntryResult(e, False, "accept", f"expected rejection by {e.rule}", seconds=dt)
    if prog.theory.name != e.theory:
        return EntryResult(e, False, "accept", f"checked under {prog.theory.name}, manifest says {e.theory}",
                           seconds=dt)
    if e.normal_forms is not None:
        got = tuple(C.pr_tm(d.normal) for d in prog.directives if d.kind == "normalize")
        if got != e.normal_forms:
            return EntryResult(e, False, "accept", f"normal forms {list(got)} differ from {list(e.normal_forms)}",
                               seconds=dt)
    return EntryResult(e, True, "accept", seconds=dt)


def _run_one(args):
    return run_entry(*args)


def run_corpus(manifest: Manifest | str | os.PathLike, fuel: int = DEFAULT_FUEL, jobs: int = 1) -> CorpusReport:
    """Check every entry; failures are report rows, never exceptions."""
    m = manifest if isinstance(manifest, Manifest) else load_manifest(manifest)
    work = [(m.root, e, fuel) for e in m.entries]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return CorpusReport(list(ex.map(_run_one, work)))
    return CorpusReport([run_entry(*w) for w in work])


__all__ = ["CorpusEntry", "CorpusReport", "EntryResult", "Manifest", "ManifestError", "default_manifest",
           "load_manifest", "run_corpus", "run_entry"]
