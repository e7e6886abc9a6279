"""Parser and pretty-printer for the ``.tm`` modeling language.

The language is keyword driven; line breaks carry no meaning and ``;`` is an
optional separator.  A short example::

    thimac car { create release transfer }
    thimac area { transfer receive }
    flow car.create -> car.release
    flow car.release -> car.transfer.out
    flow car.transfer.out -> area.transfer.in
    flow area.transfer.in -> area.receive
    event E1 "The car arrives" at t1 { region: car.release, car.transfer, area.transfer, area.receive }
    chronology main { E1 }

``parse_model`` never raises on bad input; problems come back as
diagnostics on the :class:`ParseResult`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from tmkit.diagnostics import Diagnostic, SourceSpan, error, has_errors
from tmkit.errors import ModelError
from tmkit.model import (
    IDENT_RE,
    Action,
    BranchGroup,
    Bundle,
    Chronology,
    Duration,
    Edge,
    EdgeKind,
    Event,
    Polarity,
    Port,
    Recurrence,
    StaticModel,
)

__all__ = ["ParseResult", "parse_model", "print_model", "normalize"]

TOP_KEYWORDS = frozenset({"thimac", "flow", "trigger", "event", "compose", "chronology", "recur"})
ACTIONS = {a.value: a for a in Action}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n\f]+|\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<int>\d+(?![A-Za-z_]))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>->|~>|[{}.,;:=+|])
    """,
    re.VERBOSE,
)
_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    col: int
    end_line: int
    end_col: int


class _SyntaxError(Exception):
    def __init__(self, message: str, token: Token):
        super().__init__(message)
        self.token = token


def _unquote(raw: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), raw[1:-1])


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def _tokenize(text: str) -> tuple[list[Token], Token | None]:
    """Return tokens and, on a lexical error, the offending position."""
    tokens: list[Token] = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            bad = Token("error", text[pos], line, col, line, col + 1)
            return tokens, bad
        chunk = m.group()
        nl = chunk.count("\n")
        end_line = line + nl
        end_col = (len(chunk) - chunk.rfind("\n")) if nl else col + len(chunk)
        if m.lastgroup != "ws":
            tokens.append(Token(m.lastgroup, chunk, line, col, end_line, end_col))
        pos, line, col = m.end(), end_line, end_col
    tokens.append(Token("eof", "", line, col, line, col))
    return tokens, None


# -- raw declarations (unresolved) ----------------------------------------


@dataclass
class _Ref:
    path: str
    span: SourceSpan


@dataclass
class _ThimacDecl:
    name: str
    display: str | None
    span: SourceSpan
    stages: list[tuple[Action, SourceSpan]] = field(default_factory=list)
    notes: dict[str, str] = field(default_factory=dict)
    children: list[_ThimacDecl] = field(default_factory=list)


@dataclass
class _ArcDecl:
    kind: str  # flow | trigger
    src: _Ref
    dst: _Ref
    span: SourceSpan
    decreate: bool = False


@dataclass
class _EventDecl:
    name: str
    display: str | None
    time_ref: str | None
    span: SourceSpan
    region: list[_Ref] = field(default_factory=list)
    duration: Duration = Duration.EXTENDED
    notes: dict[str, str] = field(default_factory=dict)
    parts: list[_Ref] | None = None  # compose


@dataclass
class _ChronDecl:
    name: str
    span: SourceSpan
    # (kind, payload, span) in source order
    items: list[tuple[str, object, SourceSpan]] = field(default_factory=list)


@dataclass
class _RecurDecl:
    event: _Ref
    interval: int
    count: int
    unifiers: dict[str, str]
    span: SourceSpan


class _Parser:
    def __init__(self, tokens: list[Token], file: str):
        self.toks = tokens
        self.i = 0
        self.file = file

    # token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, value: str, kind: str | None = None) -> bool:
        t = self.tok
        return t.value == value and (kind is None or t.kind == kind) and t.kind != "string"

    def accept(self, value: str) -> Token | None:
        return self.advance() if self.at(value) else None

    def expect(self, value: str) -> Token:
        if not self.at(value):
            raise _SyntaxError(f"expected {value!r}, found {self._describe(self.tok)}", self.tok)
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.tok.kind != kind:
            raise _SyntaxError(f"expected {what}, found {self._describe(self.tok)}", self.tok)
        return self.advance()

    @staticmethod
    def _describe(t: Token) -> str:
        return "end of input" if t.kind == "eof" else repr(t.value)

    def span(self, first: Token, last: Token | None = None) -> SourceSpan:
        last = last or first
        return SourceSpan(self.file, first.line, first.col, last.end_line, last.end_col)

    def skip_seps(self) -> None:
        while self.tok.kind == "punct" and self.tok.value in ";,":
            self.advance()

    # grammar

    def path(self) -> _Ref:
        first = self.expect_kind("ident", "a name")
        parts, last = [first.value], first
        while self.at(".") and self.peek().kind == "ident":
            self.advance()
            last = self.advance()
            parts.append(last.value)
        return _Ref(".".join(parts), self.span(first, last))

    def optional_display(self) -> str | None:
        if self.tok.kind == "string":
            return _unquote(self.advance().value)
        return None

    def label(self) -> str:
        t = self.tok
        if t.kind == "string":
            return _unquote(self.advance().value)
        if t.kind in ("ident", "int"):
            return self.advance().value
        raise _SyntaxError(f"expected a time label, found {self._describe(t)}", t)

    def note(self) -> tuple[str, str]:
        key = self.expect_kind("ident", "an annotation key").value
        self.expect("=")
        return key, _unquote(self.expect_kind("string", "a quoted annotation value").value)

    def thimac(self, kw: Token) -> _ThimacDecl:
        name = self.expect_kind("ident", "a thimac name")
        decl = _ThimacDecl(name.value, self.optional_display(), self.span(kw, name))
        self.expect("{")
        while True:
            self.skip_seps()
            t = self.tok
            if self.accept("}"):
                return decl
            if t.kind == "ident" and t.value in ACTIONS:
                self.advance()
                last = t
                if t.value == "transfer" and self.tok.kind == "ident" and self.tok.value in ("in", "out"):
                    last = self.advance()
                decl.stages.append((ACTIONS[t.value], self.span(t, last)))
            elif t.kind == "ident" and t.value == "thimac":
                decl.children.append(self.thimac(self.advance()))
            elif t.kind == "ident" and t.value == "note":
                self.advance()
                k, v = self.note()
                decl.notes[k] = v
            else:
                raise _SyntaxError(
                    f"expected a stage, nested thimac, note or '}}', found {self._describe(t)}", t
                )

    def arc(self, kw: Token) -> _ArcDecl:
        src = self.path()
        arrow = "->" if kw.value == "flow" else "~>"
        self.expect(arrow)
        dst = self.path()
        decreate = False
        last = self.toks[self.i - 1]
        if kw.value == "trigger" and self.at("decreate"):
            last = self.advance()
            decreate = True
        return _ArcDecl(kw.value, src, dst, self.span(kw, last), decreate)

    def event(self, kw: Token) -> _EventDecl:
        name = self.expect_kind("ident", "an event name")
        display = self.optional_display()
        time_ref = self.label() if self.accept("at") else None
        decl = _EventDecl(name.value, display, time_ref, self.span(kw, name))
        self.expect("{")
        seen_region = False
        while True:
            self.skip_seps()
            t = self.tok
            if self.accept("}"):
                break
            key = self.expect_kind("ident", "'region', 'duration' or 'note'")
            if key.value == "region":
                self.expect(":")
                decl.region.append(self.path())
                while self.accept(","):
                    decl.region.append(self.path())
                seen_region = True
            elif key.value == "duration":
                self.expect(":")
                d = self.expect_kind("ident", "'instant' or 'extended'")
                if d.value not in ("instant", "extended"):
                    raise _SyntaxError(f"unknown duration {d.value!r}", d)
                decl.duration = Duration(d.value)
            elif key.value == "note":
                k, v = self.note()
                decl.notes[k] = v
            else:
                raise _SyntaxError(f"unknown event field {key.value!r}", t)
            if not self.at("}"):
                self.expect(";")
        if not seen_region:
            raise _SyntaxError(f"event {name.value!r} declares no region", name)
        return decl

    def compose(self, kw: Token) -> _EventDecl:
        name = self.expect_kind("ident", "an event name")
        display = self.optional_display()
        time_ref = self.label() if self.accept("at") else None
        self.expect("=")
        parts = [self.path()]
        while self.accept("+"):
            parts.append(self.path())
        decl = _EventDecl(name.value, display, time_ref, self.span(kw, name), parts=parts)
        return decl

    def chronology(self, kw: Token) -> _ChronDecl:
        name = self.expect_kind("ident", "a chronology name")
        decl = _ChronDecl(name.value, self.span(kw, name))
        self.expect("{")
        while True:
            self.skip_seps()
            t = self.tok
            if self.accept("}"):
                return decl
            if t.kind == "ident" and t.value in ("start", "repeat") and self.peek().kind == "ident":
                self.advance()
                ref = self.path()
                decl.items.append((t.value, ref, self.span(t, self.toks[self.i - 1])))
            elif t.kind == "ident" and t.value == "branch" and self.peek().kind == "ident":
                self.advance()
                src = self.path()
                gid = self.path().path if self.accept("as") else None
                self.expect("{")
                targets = []
                while True:
                    self.expect("->")
                    targets.append(self.path())
                    if not self.accept("|"):
                        break
                end = self.expect("}")
                decl.items.append(("branch", (src, gid, targets), self.span(t, end)))
            else:
                chain = [self.path()]
                while self.accept("->"):
                    chain.append(self.path())
                if len(chain) == 1:
                    decl.items.append(("node", chain[0], chain[0].span))
                for a, b in zip(chain, chain[1:]):
                    decl.items.append(("edge", (a, b), self.span(self._tok_at(a), self.toks[self.i - 1])))

    def _tok_at(self, ref: _Ref) -> Token:
        s = ref.span
        return Token("ident", "", s.start_line, s.start_col, s.end_line, s.end_col)

    def recur(self, kw: Token) -> _RecurDecl:
        ev = self.path()
        self.expect("every")
        interval = int(self.expect_kind("int", "an interval").value)
        self.expect("count")
        count_tok = self.expect_kind("int", "a count")
        unifiers: dict[str, str] = {}
        last = count_tok
        while self.tok.kind == "ident" and self.peek().value == "=" and self.peek().kind == "punct":
            key = self.advance().value
            self.advance()
            v = self.tok
            if v.kind == "string":
                unifiers[key] = _unquote(v.value)
            elif v.kind in ("ident", "int"):
                unifiers[key] = v.value
            else:
                raise _SyntaxError(f"expected a value for {key!r}", v)
            last = self.advance()
        return _RecurDecl(ev, interval, int(count_tok.value), unifiers, self.span(kw, last))

    def declarations(self, diags: list[Diagnostic]) -> list[tuple[str, object]]:
        out: list[tuple[str, object]] = []
        while self.tok.kind != "eof":
            self.skip_seps()
            if self.tok.kind == "eof":
                break
            start = self.i
            kw = self.tok
            try:
                if kw.kind != "ident" or kw.value not in TOP_KEYWORDS:
                    raise _SyntaxError(f"expected a declaration, found {self._describe(kw)}", kw)
                self.advance()
                handler = {
                    "thimac": self.thimac,
                    "flow": self.arc,
                    "trigger": self.arc,
                    "event": self.event,
                    "compose": self.compose,
                    "chronology": self.chronology,
                    "recur": self.recur,
                }[kw.value]
                out.append((kw.value, handler(kw)))
            except _SyntaxError as exc:
                diags.append(error("PARSE-001", str(exc), self.span(exc.token)))
                self._resync(start)
        return out

    def _resync(self, start: int) -> None:
        depth = 0
        j = start
        while self.toks[j].kind != "eof":
            t = self.toks[j]
            if j > start and depth == 0 and t.kind == "ident" and t.value in TOP_KEYWORDS and j >= self.i:
                break
            if t.kind == "punct" and t.value == "{":
                depth += 1
            elif t.kind == "punct" and t.value == "}":
                depth = max(0, depth - 1)
            j += 1
        self.i = max(j, self.i)


# -- resolution ------------------------------------------------------------


@dataclass
class ParseResult:
    bundle: Bundle | None
    diagnostics: list[Diagnostic]
    spans: dict[str, SourceSpan] = field(default_factory=dict)
    file: str = "<input>"

    @property
    def ok(self) -> bool:
        return not has_errors(self.diagnostics)

    @property
    def model(self) -> StaticModel | None:
        return self.bundle.model if self.bundle else None

    @property
    def events(self) -> list[Event]:
        return list(self.bundle.events.values()) if self.bundle else []

    @property
    def chronologies(self) -> list[Chronology]:
        return list(self.bundle.chronologies.values()) if self.bundle else []

    @property
    def recurrences(self) -> list[Recurrence]:
        return list(self.bundle.recurrences) if self.bundle else []


def _split_path(path: str) -> tuple[str, Port | None]:
    parts = path.split(".")
    if len(parts) >= 3 and parts[-1] in ("in", "out") and parts[-2] == "transfer":
        return ".".join(parts[:-1]), Port(parts[-1])
    return path, None


class _Builder:
    def __init__(self, file: str):
        self.file = file
        self.diags: list[Diagnostic] = []
        self.spans: dict[str, SourceSpan] = {}
        self.model = StaticModel()

    def dup(self, what: str, name: str, span: SourceSpan) -> None:
        self.diags.append(error("PARSE-002", f"duplicate {what} {name!r}", span))

    def unknown(self, what: str, ref: _Ref) -> None:
        self.diags.append(error("PARSE-003", f"unknown {what} {ref.path!r}", ref.span))

    def thimac(self, d: _ThimacDecl, parent: str | None) -> None:
        tid = d.name if parent is None else f"{parent}.{d.name}"
        if tid in self.model.thimacs:
            self.dup("thimac", tid, d.span)
            return
        try:
            self.model = self.model.add_thimac(d.name, parent, d.display, d.notes)
        except ModelError as exc:
            self.diags.append(error("PARSE-001", str(exc), d.span))
            return
        self.spans[tid] = d.span
        for action, span in d.stages:
            sid = f"{tid}.{action.value}"
            if sid in self.model.stages:
                self.dup("stage", sid, span)
                continue
            self.model = self.model.add_stage(tid, action)
            self.spans[sid] = span
        for child in d.children:
            self.thimac(child, tid)

    def stage_ref(self, ref: _Ref) -> tuple[str, Port | None] | None:
        sid, port = _split_path(ref.path)
        if sid not in self.model.stages:
            self.unknown("stage", ref)
            return None
        return sid, port

    def arc(self, d: _ArcDecl) -> None:
        a, b = self.stage_ref(d.src), self.stage_ref(d.dst)
        if a is None or b is None:
            return
        if d.kind == "flow":
            self.model = self.model.add_flow(a[0], b[0], a[1], b[1])
            self.spans[self.model.flows[-1].id] = d.span
        else:
            if a[1] is not None or b[1] is not None:
                self.diags.append(error("PARSE-001", "trigger endpoints take no ports", d.span))
                return
            pol = Polarity.DECREATE if d.decreate else Polarity.CREATE
            self.model = self.model.add_trigger(a[0], b[0], pol)
            self.spans[self.model.triggers[-1].id] = d.span


def parse_model(text: str, file: str = "<input>") -> ParseResult:
    """Parse ``.tm`` source into a bundle plus diagnostics."""
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    tokens, bad = _tokenize(text)
    diags: list[Diagnostic] = []
    if bad is not None:
        span = SourceSpan(file, bad.line, bad.col, bad.end_line, bad.end_col)
        diags.append(error("PARSE-001", f"unexpected character {bad.value!r}", span))
        return ParseResult(None, diags, {}, file)
    decls = _Parser(tokens, file).declarations(diags)
    if diags:
        return ParseResult(None, diags, {}, file)

    b = _Builder(file)
    for kind, d in decls:
        if kind == "thimac":
            b.thimac(d, None)
    for kind, d in decls:
        if kind in ("flow", "trigger"):
            b.arc(d)

    events = _resolve_events(b, [d for k, d in decls if k in ("event", "compose")])
    chrons = _resolve_chronologies(b, events, [d for k, d in decls if k == "chronology"])
    recs = []
    for n, d in enumerate((d for k, d in decls if k == "recur"), 1):
        if d.event.path not in events:
            b.unknown("event", d.event)
            continue
        recs.append(Recurrence(d.event.path, d.interval, d.count, d.unifiers))
        b.spans[f"recur:{n}"] = d.span

    if has_errors(b.diags):
        return ParseResult(None, b.diags, b.spans, file)
    bundle = Bundle(b.model, events, chrons, tuple(recs))
    return ParseResult(bundle, b.diags, b.spans, file)


def _resolve_events(b: _Builder, decls: list[_EventDecl]) -> dict[str, Event]:
    names: dict[str, _EventDecl] = {}
    for d in decls:
        if d.name in names:
            b.dup("event", d.name, d.span)
        else:
            names[d.name] = d
    done: dict[str, Event] = {}
    for d in names.values():
        if d.parts is not None:
            continue
        region = set()
        for ref in d.region:
            r = b.stage_ref(ref)
            if r is not None:
                region.add(r[0])
        done[d.name] = Event(
            d.name,
            d.display if d.display is not None else d.name,
            frozenset(region),
            d.time_ref or "",
            d.duration,
            (),
            d.notes,
        )
        b.spans[f"event:{d.name}"] = d.span
    pending = [d for d in names.values() if d.parts is not None]
    # composites may reference composites declared later
    while pending:
        progress = False
        for d in list(pending):
            if all(p.path in done for p in d.parts):
                parts = [done[p.path] for p in d.parts]
                region = frozenset().union(*(p.region for p in parts))
                time_ref = d.time_ref if d.time_ref is not None else parts[0].time_ref
                done[d.name] = Event(
                    d.name,
                    d.display if d.display is not None else d.name,
                    region,
                    time_ref,
                    Duration.EXTENDED,
                    tuple(p.id for p in parts),
                )
                b.spans[f"event:{d.name}"] = d.span
                pending.remove(d)
                progress = True
        if not progress:
            for d in pending:
                for p in d.parts:
                    if p.path not in done and p.path not in {x.name for x in pending}:
                        b.unknown("event", p)
                    elif p.path not in done:
                        b.diags.append(error("PARSE-003", f"cyclic composition through {p.path!r}", p.span))
            break
    # keep declaration order
    return {n: done[n] for n in names if n in done}


def _resolve_chronologies(
    b: _Builder, events: dict[str, Event], decls: list[_ChronDecl]
) -> dict[str, Chronology]:
    out: dict[str, Chronology] = {}
    for d in decls:
        if d.name in out:
            b.dup("chronology", d.name, d.span)
            continue
        key = f"chronology:{d.name}"
        b.spans[key] = d.span
        members: list[str] = []
        edges: list[Edge] = []
        groups: list[BranchGroup] = []
        start = None

        def member(ref: _Ref) -> bool:
            if ref.path not in events:
                b.unknown("event", ref)
                return False
            if ref.path not in members:
                members.append(ref.path)
            return True

        def add_edge(e: Edge, span: SourceSpan) -> bool:
            if e in edges:
                b.dup("edge", f"{e.src} -> {e.dst}", span)
                return False
            edges.append(e)
            b.spans[f"{key}/edge:{e.src}->{e.dst}"] = span
            return True

        for kind, payload, span in d.items:
            if kind == "node":
                member(payload)
            elif kind == "start":
                if member(payload):
                    if start is not None:
                        b.dup("start", payload.path, span)
                    start = payload.path
            elif kind == "repeat":
                if member(payload):
                    add_edge(Edge(payload.path, payload.path, EdgeKind.REPEAT), span)
            elif kind == "edge":
                x, y = payload
                if member(x) & member(y):
                    add_edge(Edge(x.path, y.path), span)
            elif kind == "branch":
                src, gid, targets = payload
                ok = member(src)
                ok = all([member(t) for t in targets]) and ok
                if not ok:
                    continue
                gid = gid or src.path
                if any(g.id == gid for g in groups):
                    b.dup("branch group", gid, span)
                    continue
                gedges = [Edge(src.path, t.path) for t in targets]
                if all([add_edge(e, span) for e in gedges]):
                    groups.append(BranchGroup(gid, tuple(gedges)))
                    b.spans[f"{key}/group:{gid}"] = span
        out[d.name] = Chronology(d.name, tuple(members), tuple(edges), tuple(groups), start)
    return out


# -- printing --------------------------------------------------------------


def _label(text: str) -> str:
    return text if IDENT_RE.match(text) else _quote(text)


def print_model(source: ParseResult | Bundle) -> str:
    """Canonical source text; parsing it back yields a structurally equal bundle."""
    bundle = source.bundle if isinstance(source, ParseResult) else source
    if bundle is None:
        raise ValueError("cannot print a result that failed to parse")
    m = bundle.model
    out: list[str] = []

    def thimac(tid: str, indent: str) -> None:
        t = m.thimacs[tid]
        head = f"{indent}thimac {t.name}"
        if t.display is not None:
            head += f" {_quote(t.display)}"
        body: list[str] = []
        for sid in t.stages:
            body.append(f"{indent}  {m.stages[sid].action.value}")
        for k, v in t.annotations.items():
            body.append(f"{indent}  note {k} = {_quote(v)}")
        if not body and not t.children:
            out.append(head + " {}")
            return
        out.append(head + " {")
        out.extend(body)
        for child in t.children:
            thimac(child, indent + "  ")
        out.append(indent + "}")

    for root in m.roots:
        thimac(root, "")
    if m.flows or m.triggers:
        out.append("")
    for f in m.flows:
        out.append(f"flow {f.src} -> {f.dst}")
    for t in m.triggers:
        suffix = " decreate" if t.polarity is Polarity.DECREATE else ""
        out.append(f"trigger {t.src} ~> {t.dst}{suffix}")

    if bundle.events:
        out.append("")
    for ev in bundle.events.values():
        head = ev.id
        if ev.name != ev.id:
            head += f" {_quote(ev.name)}"
        if ev.time_ref:
            head += f" at {_label(ev.time_ref)}"
        if ev.sub_events:
            out.append(f"compose {head} = {' + '.join(ev.sub_events)}")
            continue
        fields = [f"region: {', '.join(m.ordered(ev.region))}"]
        if ev.duration is Duration.INSTANT:
            fields.append("duration: instant")
        fields += [f"note {k} = {_quote(v)}" for k, v in ev.annotations.items()]
        out.append(f"event {head} {{ {'; '.join(fields)} }}")

    for c in bundle.chronologies.values():
        out.append("")
        out.append(f"chronology {c.id} {{")
        if c.start:
            out.append(f"  start {c.start}")
        touched = {c.start} | {x for e in c.edges for x in (e.src, e.dst)}
        for ev in c.events:
            if ev not in touched:
                out.append(f"  {ev}")
        printed: set[str] = set()
        for e in c.edges:
            if e.kind is EdgeKind.REPEAT:
                out.append(f"  repeat {e.src}")
                continue
            g = c.group_of(e)
            if g is None:
                out.append(f"  {e.src} -> {e.dst}")
            elif g.id not in printed:
                printed.add(g.id)
                alias = f" as {g.id}" if g.id != g.source else ""
                alts = " | ".join(f"-> {x.dst}" for x in g.edges)
                out.append(f"  branch {g.source}{alias} {{ {alts} }}")
        out.append("}")

    if bundle.recurrences:
        out.append("")
    for r in bundle.recurrences:
        extra = "".join(f" {k}={_quote(v)}" for k, v in r.unifiers.items())
        out.append(f"recur {r.event} every {r.interval} count {r.count}{extra}")

    text = "\n".join(out).strip("\n")
    return text + "\n" if text else ""


def normalize(source: ParseResult | Bundle | None) -> dict:
    """Order-insensitive structural summary used for equality checks."""
    bundle = source.bundle if isinstance(source, ParseResult) else source
    if bundle is None:
        return {}
    m = bundle.model
    return {
        "thimacs": sorted(
            (t.id, t.parent, t.display, tuple(sorted(t.annotations.items()))) for t in m.thimacs.values()
        ),
        "stages": sorted((s.id, s.action.value, s.owner) for s in m.stages.values()),
        "flows": sorted((str(f.src), str(f.dst)) for f in m.flows),
        "triggers": sorted((t.src, t.dst, t.polarity.value) for t in m.triggers),
        "events": sorted(
            (
                e.id,
                e.name,
                tuple(sorted(e.region)),
                e.time_ref,
                e.duration.value,
                e.sub_events,
                tuple(sorted(e.annotations.items())),
            )
            for e in bundle.events.values()
        ),
        "chronologies": sorted(
            (
                c.id,
                tuple(sorted(c.events)),
                tuple(sorted((e.src, e.dst, e.kind.value) for e in c.edges)),
                tuple(sorted((g.id, tuple(sorted((e.src, e.dst) for e in g.edges))) for g in c.branch_groups)),
                c.start,
            )
            for c in bundle.chronologies.values()
        ),
        "recurrences": sorted(
            (r.event, r.interval, r.count, tuple(sorted(r.unifiers.items()))) for r in bundle.recurrences
        ),
    }
