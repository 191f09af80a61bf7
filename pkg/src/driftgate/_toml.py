"""Minimal TOML-subset reader for run configs.

Supports exactly what the config format uses: [section] and
[dotted.section] headers, bare/dotted keys, basic strings, ints, floats,
booleans, ISO dates, flat arrays, and # comments.  Written here because
this interpreter predates stdlib tomllib and no TOML package is
available; errors carry line numbers.
"""
from __future__ import annotations

import re
from datetime import date as _date

from .errors import ConfigError

_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_INT_RE = re.compile(r"^[+-]?\d+(_\d+)*$")
_BARE_KEY_RE = re.compile(r"^[A-Za-z0-9_-]+$")

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}


def _strip_comment(line: str) -> str:
    out = []
    in_string = False
    i = 0
    while i < len(line):
        ch = line[i]
        if ch == '"':
            in_string = not in_string
        elif ch == "\\" and in_string and i + 1 < len(line):
            out.append(ch)
            i += 1
            ch = line[i]
        elif ch == "#" and not in_string:
            break
        out.append(ch)
        i += 1
    return "".join(out).strip()


def _parse_string(text: str, where: str) -> str:
    if len(text) < 2 or not text.endswith('"'):
        raise ConfigError(f"{where}: unterminated string {text!r}")
    body = text[1:-1]
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == '"':
            raise ConfigError(f"{where}: stray quote inside string {text!r}")
        if ch == "\\":
            i += 1
            if i >= len(body) or body[i] not in _ESCAPES:
                raise ConfigError(f"{where}: bad escape in {text!r}")
            out.append(_ESCAPES[body[i]])
        else:
            out.append(ch)
        i += 1
    return "".join(out)


def _split_array(body: str, where: str) -> list[str]:
    parts = []
    current = []
    in_string = False
    for ch in body:
        if ch == '"':
            in_string = not in_string
            current.append(ch)
        elif ch == "," and not in_string:
            parts.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    tail = "".join(current).strip()
    if tail:
        parts.append(tail)
    if in_string:
        raise ConfigError(f"{where}: unterminated string in array")
    return [p for p in parts if p]


def parse_value(text: str, where: str = "value") -> object:
    """One scalar or flat array in the supported subset."""
    text = text.strip()
    if not text:
        raise ConfigError(f"{where}: empty value")
    if text.startswith('"'):
        return _parse_string(text, where)
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigError(f"{where}: unterminated array {text!r}")
        return [parse_value(part, where) for part in _split_array(text[1:-1], where)]
    if text == "true":
        return True
    if text == "false":
        return False
    if _DATE_RE.match(text):
        try:
            return _date.fromisoformat(text)
        except ValueError:
            raise ConfigError(f"{where}: bad date {text!r}") from None
    if _INT_RE.match(text):
        return int(text.replace("_", ""))
    try:
        return float(text.replace("_", ""))
    except ValueError:
        raise ConfigError(f"{where}: cannot parse value {text!r}") from None


def _key_path(text: str, where: str) -> list[str]:
    parts = [p.strip() for p in text.split(".")]
    for p in parts:
        if not p or not _BARE_KEY_RE.match(p):
            raise ConfigError(f"{where}: bad key {text!r}")
    return parts


def _descend(root: dict, path: list[str], where: str) -> dict:
    node = root
    for part in path:
        nxt = node.setdefault(part, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"{where}: {'.'.join(path)} clashes with an existing value")
        node = nxt
    return node


def set_path(root: dict, dotted: str, value: object, where: str = "override") -> None:
    """Assign `value` at a dotted path, creating tables along the way."""
    path = _key_path(dotted, where)
    table = _descend(root, path[:-1], where)
    table[path[-1]] = value


def parse_toml(text: str, where: str = "config") -> dict:
    """Parse the subset into nested dicts.  Duplicate keys are errors."""
    root: dict = {}
    table = root
    table_path: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        here = f"{where} line {lineno}"
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{here}: bad table header {line!r}")
            table_path = _key_path(line[1:-1], here)
            table = _descend(root, table_path, here)
            continue
        if "=" not in line:
            raise ConfigError(f"{here}: expected key = value, got {line!r}")
        key_text, value_text = line.split("=", 1)
        path = _key_path(key_text.strip(), here)
        target = _descend(table, path[:-1], here) if len(path) > 1 else table
        key = path[-1]
        if key in target:
            raise ConfigError(f"{here}: duplicate key {'.'.join(table_path + path)!r}")
        target[key] = parse_value(value_text, here)
    return root


def load_toml(path: str) -> dict:
    try:
        with open(path) as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_toml(text, where=path)
