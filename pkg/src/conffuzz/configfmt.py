"""Reader and writer for the gNB-style configuration dialect.

The accepted language is a libconfig-shaped subset: ``name = value;``
settings, ``{ ... }`` groups, ``( v, v, ... )`` lists, ``#`` and ``//``
comments, 64-bit signed integers, decimal reals, double-quoted strings, and
bare ``true``/``false``.  Serialization is canonical (one setting per line,
two-space indent), so parse and serialize are exact inverses and document
equality can be read off the serialized bytes.

Individual parameters are addressed by dotted paths such as
``gNBs[0].servingCellConfigCommon[0].dl_carrierBandwidth``.
"""

from __future__ import annotations

import math
import re
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterator, Union

__all__ = [
    "ConfigDocument",
    "ConfigError",
    "ConfigList",
    "ConfigSyntaxError",
    "DuplicateNameError",
    "Group",
    "NotAScalarError",
    "ParamPath",
    "PathNotFoundError",
    "Setting",
    "diff_params",
    "format_scalar",
    "get_param",
    "iter_params",
    "parse_config",
    "serialize_config",
    "set_param",
]

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class ConfigError(Exception):
    """Base class for configuration parsing and addressing failures."""


class ConfigSyntaxError(ConfigError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class DuplicateNameError(ConfigError):
    def __init__(self, name: str, line: int, col: int):
        super().__init__(f"duplicate setting {name!r} (line {line}, column {col})")
        self.name = name
        self.line = line
        self.col = col


class PathNotFoundError(ConfigError):
    pass


class NotAScalarError(ConfigError):
    pass


Scalar = Union[int, float, str, bool]


@dataclass(frozen=True)
class Setting:
    name: str
    value: "Value"


@dataclass(frozen=True)
class Group:
    settings: tuple[Setting, ...] = ()


@dataclass(frozen=True)
class ConfigList:
    values: tuple["Value", ...] = ()


Value = Union[Scalar, Group, ConfigList]


@dataclass(frozen=True, eq=False)
class ConfigDocument:
    root: Group

    # Equality tracks the canonical serialized form; this keeps Int 1 and
    # Bool true apart even though Python's bool subclasses int.
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfigDocument):
            return NotImplemented
        return serialize_config(self) == serialize_config(other)

    def __hash__(self) -> int:
        return hash(serialize_config(self))


@dataclass(frozen=True)
class ParamPath:
    """Dotted parameter address; int segments index into lists."""

    segments: tuple[Union[str, int], ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("empty parameter path")
        if not isinstance(self.segments[0], str):
            raise ValueError("parameter path must start with an identifier")
        for seg in self.segments:
            if isinstance(seg, bool) or not isinstance(seg, (str, int)):
                raise ValueError(f"bad path segment: {seg!r}")
            if isinstance(seg, str) and not IDENT_RE.fullmatch(seg):
                raise ValueError(f"bad identifier in path: {seg!r}")
            if isinstance(seg, int) and seg < 0:
                raise ValueError(f"negative list index in path: {seg}")

    _SEGMENT_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)((?:\[\d+\])*)\Z")

    @classmethod
    def parse(cls, text: str) -> "ParamPath":
        segments: list[Union[str, int]] = []
        for chunk in text.split("."):
            m = cls._SEGMENT_RE.fullmatch(chunk)
            if not m:
                raise ValueError(f"malformed parameter path: {text!r}")
            segments.append(m.group(1))
            for idx in re.findall(r"\[(\d+)\]", m.group(2)):
                segments.append(int(idx))
        return cls(tuple(segments))

    def __str__(self) -> str:
        parts: list[str] = []
        for seg in self.segments:
            if isinstance(seg, str):
                if parts:
                    parts.append(".")
                parts.append(seg)
            else:
                parts.append(f"[{seg}]")
        return "".join(parts)


# ---------------------------------------------------------------------------
# Parsing


_TOKEN_RE = re.compile(
    r"""
      (?P<skip>\s+|\#[^\n]*|//[^\n]*)
    | (?P<real>[+-]?(?:\d+\.\d*|\.\d+)(?:[eE][+-]?\d+)?|[+-]?\d+[eE][+-]?\d+)
    | (?P<int>[+-]?\d+)
    | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<str>"(?:[^"\\\n]|\\.)*")
    | (?P<punct>[={}();,])
    """,
    re.VERBOSE,
)

_ESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t", "r": "\r"}


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.line_starts = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                self.line_starts.append(i + 1)
        self.tokens: list[tuple[str, str, int]] = []  # (kind, lexeme, offset)
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                raise ConfigSyntaxError(
                    f"unexpected character {text[pos]!r}", *self.line_col(pos)
                )
            if m.lastgroup != "skip":
                self.tokens.append((m.lastgroup, m.group(), pos))
            pos = m.end()
        self.tokens.append(("eof", "", len(text)))

    def line_col(self, offset: int) -> tuple[int, int]:
        line = bisect_right(self.line_starts, offset)
        return line, offset - self.line_starts[line - 1] + 1


class _Parser:
    def __init__(self, text: str):
        self.scanner = _Scanner(text)
        self.tokens = self.scanner.tokens
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, offset: int) -> ConfigSyntaxError:
        return ConfigSyntaxError(message, *self.scanner.line_col(offset))

    def expect_punct(self, lexeme: str) -> None:
        kind, lex, off = self.peek()
        if kind != "punct" or lex != lexeme:
            raise self.error(f"expected {lexeme!r}, found {lex or 'end of input'!r}", off)
        self.advance()

    def parse_document(self) -> ConfigDocument:
        settings = self.parse_settings(closer=None)
        return ConfigDocument(Group(settings))

    def parse_settings(self, closer: str | None) -> tuple[Setting, ...]:
        settings: list[Setting] = []
        names: set[str] = set()
        while True:
            kind, lex, off = self.peek()
            if closer is not None and kind == "punct" and lex == closer:
                return tuple(settings)
            if kind == "eof":
                if closer is None:
                    return tuple(settings)
                raise self.error(f"expected {closer!r} before end of input", off)
            if kind != "name":
                raise self.error(f"expected setting name, found {lex!r}", off)
            self.advance()
            if lex in names:
                raise DuplicateNameError(lex, *self.scanner.line_col(off))
            names.add(lex)
            self.expect_punct("=")
            value = self.parse_value()
            self.expect_punct(";")
            settings.append(Setting(lex, value))

    def parse_value(self) -> Value:
        kind, lex, off = self.peek()
        if kind == "punct" and lex == "{":
            self.advance()
            settings = self.parse_settings(closer="}")
            self.expect_punct("}")
            return Group(settings)
        if kind == "punct" and lex == "(":
            self.advance()
            return self.parse_list()
        if kind == "int":
            self.advance()
            value = int(lex)
            if not INT64_MIN <= value <= INT64_MAX:
                raise self.error(f"integer out of 64-bit range: {lex}", off)
            return value
        if kind == "real":
            self.advance()
            return float(lex)
        if kind == "str":
            self.advance()
            return self.unescape(lex, off)
        if kind == "name" and lex in ("true", "false"):
            self.advance()
            return lex == "true"
        raise self.error(f"expected value, found {lex or 'end of input'!r}", off)

    def parse_list(self) -> ConfigList:
        values: list[Value] = []
        kind, lex, _ = self.peek()
        if kind == "punct" and lex == ")":
            self.advance()
            return ConfigList(())
        while True:
            values.append(self.parse_value())
            kind, lex, off = self.peek()
            if kind == "punct" and lex == ",":
                self.advance()
                continue
            if kind == "punct" and lex == ")":
                self.advance()
                return ConfigList(tuple(values))
            raise self.error(f"expected ',' or ')', found {lex or 'end of input'!r}", off)

    def unescape(self, lexeme: str, offset: int) -> str:
        body = lexeme[1:-1]
        out: list[str] = []
        i = 0
        while i < len(body):
            ch = body[i]
            if ch == "\\":
                esc = body[i + 1]
                if esc not in _ESCAPES:
                    raise self.error(f"unsupported escape \\{esc}", offset)
                out.append(_ESCAPES[esc])
                i += 2
            else:
                out.append(ch)
                i += 1
        return "".join(out)


def parse_config(text: str) -> ConfigDocument:
    return _Parser(text).parse_document()


# ---------------------------------------------------------------------------
# Serialization


def format_scalar(v: Scalar) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        if not INT64_MIN <= v <= INT64_MAX:
            raise ValueError(f"integer out of 64-bit range: {v}")
        return str(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError(f"non-finite real not representable: {v!r}")
        return repr(v)
    if isinstance(v, str):
        out = ['"']
        for ch in v:
            if ch == "\\":
                out.append("\\\\")
            elif ch == '"':
                out.append('\\"')
            elif ch == "\n":
                out.append("\\n")
            elif ch == "\t":
                out.append("\\t")
            elif ch == "\r":
                out.append("\\r")
            else:
                out.append(ch)
        out.append('"')
        return "".join(out)
    raise ValueError(f"not a scalar: {v!r}")


def _emit_setting(s: Setting, indent: int, out: list[str]) -> None:
    out.append("  " * indent)
    out.append(s.name)
    out.append(" = ")
    _emit_value(s.value, indent, out)
    out.append(";\n")


def _emit_value(v: Value, indent: int, out: list[str]) -> None:
    if isinstance(v, Group):
        if not v.settings:
            out.append("{ }")
            return
        out.append("{\n")
        for s in v.settings:
            _emit_setting(s, indent + 1, out)
        out.append("  " * indent)
        out.append("}")
    elif isinstance(v, ConfigList):
        if not v.values:
            out.append("( )")
            return
        out.append("(\n")
        last = len(v.values) - 1
        for i, item in enumerate(v.values):
            out.append("  " * (indent + 1))
            _emit_value(item, indent + 1, out)
            out.append(",\n" if i < last else "\n")
        out.append("  " * indent)
        out.append(")")
    else:
        out.append(format_scalar(v))


def serialize_config(d: ConfigDocument) -> str:
    out: list[str] = []
    for s in d.root.settings:
        _emit_setting(s, 0, out)
    return "".join(out)


# ---------------------------------------------------------------------------
# Parameter addressing


def _resolve(d: ConfigDocument, p: ParamPath) -> Value:
    cur: Value = d.root
    for seg in p.segments:
        if isinstance(seg, str):
            if not isinstance(cur, Group):
                raise PathNotFoundError(f"no group at {seg!r} in {p}")
            for s in cur.settings:
                if s.name == seg:
                    cur = s.value
                    break
            else:
                raise PathNotFoundError(f"no setting {seg!r} in {p}")
        else:
            if not isinstance(cur, ConfigList) or seg >= len(cur.values):
                raise PathNotFoundError(f"no list element [{seg}] in {p}")
            cur = cur.values[seg]
    return cur


def get_param(d: ConfigDocument, p: ParamPath) -> Scalar:
    value = _resolve(d, p)
    if isinstance(value, (Group, ConfigList)):
        raise NotAScalarError(f"{p} addresses a {type(value).__name__}")
    return value


def set_param(d: ConfigDocument, p: ParamPath, v: Scalar) -> ConfigDocument:
    if isinstance(v, (Group, ConfigList)) or not isinstance(v, (int, float, str, bool)):
        raise ValueError(f"set_param value must be a scalar, got {v!r}")

    def rebuild(cur: Value, segs: tuple[Union[str, int], ...]) -> Value:
        if not segs:
            return v
        seg = segs[0]
        if isinstance(seg, str):
            if not isinstance(cur, Group):
                raise PathNotFoundError(f"no group at {seg!r} in {p}")
            for i, s in enumerate(cur.settings):
                if s.name == seg:
                    new = Setting(s.name, rebuild(s.value, segs[1:]))
                    return Group(cur.settings[:i] + (new,) + cur.settings[i + 1 :])
            raise PathNotFoundError(f"no setting {seg!r} in {p}")
        if not isinstance(cur, ConfigList) or seg >= len(cur.values):
            raise PathNotFoundError(f"no list element [{seg}] in {p}")
        new_item = rebuild(cur.values[seg], segs[1:])
        return ConfigList(cur.values[:seg] + (new_item,) + cur.values[seg + 1 :])

    root = rebuild(d.root, p.segments)
    assert isinstance(root, Group)
    return ConfigDocument(root)


def iter_params(d: ConfigDocument) -> Iterator[tuple[ParamPath, Scalar]]:
    """All scalar parameters with their paths, in document order."""

    def walk(value: Value, prefix: tuple[Union[str, int], ...]):
        if isinstance(value, Group):
            for s in value.settings:
                yield from walk(s.value, prefix + (s.name,))
        elif isinstance(value, ConfigList):
            for i, item in enumerate(value.values):
                yield from walk(item, prefix + (i,))
        else:
            yield ParamPath(prefix), value

    yield from walk(d.root, ())


def _scalar_eq(a: Scalar, b: Scalar) -> bool:
    # type check keeps 1 != true and 1 != 1.0
    return type(a) is type(b) and a == b


def diff_params(
    a: ConfigDocument, b: ConfigDocument
) -> list[tuple[ParamPath, Scalar, Scalar]]:
    """Scalar paths present in both documents whose values differ, in a's order."""
    b_values = {p: v for p, v in iter_params(b)}
    out = []
    for p, va in iter_params(a):
        if p in b_values and not _scalar_eq(va, b_values[p]):
            out.append((p, va, b_values[p]))
    return out
