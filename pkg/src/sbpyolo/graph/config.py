"""Plain-text architecture configs.

Grammar (UTF-8, ``#`` starts a comment, blank lines ignored)::

    [meta]
    name = sbp-yolo
    input = 3, 640, 640        # c, h, w
    levels = 4                 # optional: required number of head inputs
    W1 = 16                    # any other key is a named constant

    [layers]
    0: conv(from=input, c2=$W1, k=3, s=2)
    1: concat(from=[0, -1])

Layer ids start at 0 and increase by one. ``from`` takes ``input``, an
earlier id, a negative offset (``-1`` is the previous layer) or a bracketed
list of those. ``$NAME`` substitutes a meta constant.
"""

import re
from dataclasses import dataclass, field

from ..exceptions import (
    ConfigSyntaxError,
    CycleError,
    DanglingReferenceError,
    HeadLevelError,
)
from .kinds import ARG_TYPES, KINDS, REQUIRED

INPUT = "input"
DEFAULT_INPUT_SHAPE = (3, 640, 640)

_LAYER_RE = re.compile(r"^(\s*)(-?\d+)(\s*):(\s*)([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*$")
_META_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


@dataclass
class LayerNode:
    id: int
    kind: str
    inputs: tuple
    args: dict
    line: int = field(default=None, compare=False)
    out_shape: tuple = field(default=None, compare=False)

    @property
    def is_head(self):
        return KINDS[self.kind].head


@dataclass
class ArchGraph:
    nodes: list
    input_shape: tuple = DEFAULT_INPUT_SHAPE
    meta: dict = field(default_factory=dict)

    @property
    def head(self):
        heads = [n for n in self.nodes if n.is_head]
        return heads[0] if heads else None

    @property
    def head_levels(self):
        """Node ids feeding the detection head, finest level first."""
        head = self.head
        return tuple(head.inputs) if head else ()

    @property
    def shaped(self):
        return all(n.out_shape is not None for n in self.nodes)

    def shape_of(self, ref):
        return self.input_shape if ref == INPUT else self.nodes[ref].out_shape


def _strip_comment(raw):
    return raw.split("#", 1)[0].rstrip()


def _split_top(text, offset, lineno):
    """Split on commas outside brackets; yields (piece, column)."""
    depth, start = 0, 0
    for i, ch in enumerate(text):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise ConfigSyntaxError("unbalanced ']'", lineno, offset + i + 1)
        elif ch == "," and depth == 0:
            yield text[start:i], offset + start + 1
            start = i + 1
    if depth:
        raise ConfigSyntaxError("unclosed '['", lineno, offset + len(text))
    yield text[start:], offset + start + 1


def _scalar(token, constants, lineno, col):
    token = token.strip()
    if not token:
        raise ConfigSyntaxError("empty value", lineno, col)
    if token.startswith("$"):
        name = token[1:]
        if name not in constants:
            raise ConfigSyntaxError(f"undefined constant ${name}", lineno, col)
        return constants[name]
    low = token.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "auto"):
        return None
    for cast in (int, float):
        try:
            return cast(token)
        except ValueError:
            pass
    if _IDENT_RE.match(token):
        return token
    raise ConfigSyntaxError(f"cannot parse value {token!r}", lineno, col)


def _value(token, constants, lineno, col):
    stripped = token.strip()
    if stripped.startswith("["):
        if not stripped.endswith("]"):
            raise ConfigSyntaxError("list value must end with ']'", lineno, col)
        inner = stripped[1:-1]
        lead = col + token.index("[") + 1
        if not inner.strip():
            return []
        return [_scalar(t, constants, lineno, c) for t, c in _split_top(inner, lead - 1, lineno)]
    return _scalar(token, constants, lineno, col)


def _coerce(key, value, lineno, col):
    want = ARG_TYPES.get(key)
    if value is None or want is None:
        return value
    if want is bool:
        if isinstance(value, bool):
            return value
    elif want is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif want is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    raise ConfigSyntaxError(f"argument {key} must be {want.__name__}, got {value!r}", lineno, col)


def _check_arg_values(kind, args, lineno, col):
    positive = {"c2", "k", "s", "g", "kc", "dwk", "n", "nc", "r", "d", "reg_ch", "cls_ch"}
    for key, value in args.items():
        if key in positive and value is not None and value < 1:
            raise ConfigSyntaxError(f"argument {key} must be >= 1, got {value}", lineno, col)
    for key in ("k", "kc", "dwk"):
        if key in args and args[key] % 2 == 0:
            raise ConfigSyntaxError(f"kernel {key}={args[key]} must be odd", lineno, col)
    if kind in ("ghost_conv", "gs_conv") and args["c2"] % 2:
        raise ConfigSyntaxError(f"{kind} needs an even c2, got {args['c2']}", lineno, col)
    if kind == "upsample" and args["scale"] != 2:
        raise ConfigSyntaxError("upsample only supports scale=2", lineno, col)
    if "e" in args and not 0 < args["e"] <= 1:
        raise ConfigSyntaxError(f"expansion e={args['e']} must lie in (0, 1]", lineno, col)


def _resolve_refs(raw, node_id, defined_ids, declared_ids, lineno, col):
    refs = raw if isinstance(raw, list) else [raw]
    if not refs:
        raise ConfigSyntaxError(f"node {node_id}: empty 'from' list", lineno, col)
    out = []
    for ref in refs:
        if ref == INPUT:
            out.append(INPUT)
            continue
        if isinstance(ref, bool) or not isinstance(ref, int):
            raise ConfigSyntaxError(f"node {node_id}: bad input reference {ref!r}", lineno, col)
        target = node_id + ref if ref < 0 else ref
        if ref < 0 and target < 0:
            raise DanglingReferenceError(
                f"node {node_id}: relative reference {ref} points before the first layer", lineno, col
            )
        if target >= node_id:
            if target == node_id or target in declared_ids:
                raise CycleError(
                    f"node {node_id} reads from node {target}, which is not defined before it", lineno, col
                )
            raise DanglingReferenceError(f"node {node_id} reads from undefined node {target}", lineno, col)
        if target not in defined_ids:
            raise DanglingReferenceError(f"node {node_id} reads from undefined node {target}", lineno, col)
        out.append(target)
    return tuple(out)


def parse_config(text):
    """Parse config text into an :class:`ArchGraph` (shapes not yet inferred).

    Raises a :class:`~sbpyolo.exceptions.ConfigSyntaxError` subclass carrying
    the line and column of the first problem.
    """
    lines = text.splitlines()
    section = None
    meta, constants = {}, {}
    input_shape = DEFAULT_INPUT_SHAPE
    layer_lines = []
    seen_sections = set()
    for lineno, raw in enumerate(lines, 1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("["):
            if stripped not in ("[meta]", "[layers]"):
                raise ConfigSyntaxError(f"unknown section {stripped}", lineno, line.index("[") + 1)
            if stripped in seen_sections:
                raise ConfigSyntaxError(f"duplicate section {stripped}", lineno, line.index("[") + 1)
            seen_sections.add(stripped)
            section = stripped[1:-1]
            continue
        if section is None:
            raise ConfigSyntaxError("content before the first section header", lineno, 1)
        if section == "meta":
            m = _META_RE.match(line)
            if not m:
                raise ConfigSyntaxError("expected 'key = value'", lineno, len(line) - len(line.lstrip()) + 1)
            key, value_text = m.group(1), m.group(2)
            col = line.index("=") + 2
            if key in meta:
                raise ConfigSyntaxError(f"duplicate meta key {key}", lineno, 1)
            if key == "input":
                parts = [p for p in _split_top(value_text, col - 1, lineno)]
                try:
                    shape = tuple(int(p.strip()) for p, _ in parts)
                except ValueError:
                    raise ConfigSyntaxError("input must be 'c, h, w' integers", lineno, col) from None
                if len(shape) != 3 or min(shape) < 1:
                    raise ConfigSyntaxError("input must be three positive integers c, h, w", lineno, col)
                input_shape = shape
                meta[key] = shape
            else:
                try:
                    value = _value(value_text, constants, lineno, col)
                except ConfigSyntaxError:
                    if key == "levels" or value_text.startswith(("$", "[")):
                        raise
                    value = value_text
                if key == "levels" and (isinstance(value, bool) or not isinstance(value, int) or value < 1):
                    raise ConfigSyntaxError("levels must be a positive integer", lineno, col)
                meta[key] = value
                constants[key] = value
        else:
            layer_lines.append((lineno, line))

    declared = set()
    for lineno, line in layer_lines:
        m = _LAYER_RE.match(line)
        if m:
            declared.add(int(m.group(2)))

    nodes = []
    for lineno, line in layer_lines:
        m = _LAYER_RE.match(line)
        if not m:
            raise ConfigSyntaxError("expected 'id: kind(from=..., key=value, ...)'", lineno, len(line) - len(line.lstrip()) + 1)
        node_id = int(m.group(2))
        if node_id != len(nodes):
            raise ConfigSyntaxError(f"layer id {node_id} out of sequence, expected {len(nodes)}", lineno, m.start(2) + 1)
        kind_name = m.group(5)
        if kind_name not in KINDS:
            raise ConfigSyntaxError(f"unknown layer kind {kind_name!r}", lineno, m.start(5) + 1)
        kind = KINDS[kind_name]
        body, body_col = m.group(6), m.start(6)
        args, raw_from, from_col = {}, None, body_col + 1
        if body.strip():
            for piece, col in _split_top(body, body_col, lineno):
                col += len(piece) - len(piece.lstrip())
                if "=" not in piece:
                    raise ConfigSyntaxError(f"expected key=value, got {piece.strip()!r}", lineno, col)
                key, val = piece.split("=", 1)
                key = key.strip()
                vcol = col + piece.lstrip().index("=") + 1
                if key == "from":
                    raw_from, from_col = _value(val, constants, lineno, vcol), vcol
                    continue
                if key not in kind.schema:
                    raise ConfigSyntaxError(f"{kind_name} has no argument {key!r}", lineno, col)
                if key in args:
                    raise ConfigSyntaxError(f"duplicate argument {key!r}", lineno, col)
                args[key] = _coerce(key, _value(val, constants, lineno, vcol), lineno, vcol)
        if raw_from is None:
            raise ConfigSyntaxError(f"node {node_id}: missing 'from'", lineno, body_col + 1)
        for key, default in kind.schema.items():
            if key not in args:
                if default is REQUIRED:
                    raise ConfigSyntaxError(f"{kind_name} requires argument {key!r}", lineno, body_col + 1)
                args[key] = default
        args = {k: args[k] for k in kind.schema}
        _check_arg_values(kind_name, args, lineno, body_col + 1)
        inputs = _resolve_refs(raw_from, node_id, set(range(len(nodes))), declared, lineno, from_col)
        if not kind.multi_input and len(inputs) != 1:
            raise ConfigSyntaxError(f"{kind_name} takes exactly one input, got {len(inputs)}", lineno, from_col)
        if kind_name == "ledh_head" and len(inputs) != 4:
            raise HeadLevelError(f"ledh_head needs 4 pyramid levels, got {len(inputs)}", lineno, from_col)
        if kind.head and len(inputs) > 4:
            raise HeadLevelError(f"{kind_name} takes at most 4 levels, got {len(inputs)}", lineno, from_col)
        if kind.head and any(n.is_head for n in nodes):
            raise HeadLevelError("only one detection head is allowed", lineno, m.start(5) + 1)
        nodes.append(LayerNode(node_id, kind_name, inputs, args, line=lineno))

    graph = ArchGraph(nodes, input_shape, meta)
    levels = meta.get("levels")
    if levels is not None:
        head = graph.head
        last = layer_lines[-1][0] if layer_lines else max(len(lines), 1)
        if head is None:
            raise HeadLevelError(f"meta declares {levels} head levels but there is no head layer", last, 1)
        if len(head.inputs) != levels:
            raise HeadLevelError(
                f"head node {head.id} has {len(head.inputs)} levels, meta declares {levels}", head.line, 1
            )
    return graph


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "auto"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return repr(value) if isinstance(value, float) else str(value)


def emit_config(graph):
    """Canonical text for ``graph``; ``parse_config(emit_config(g)) == g``."""
    out = ["[meta]"]
    meta = dict(graph.meta)
    meta["input"] = graph.input_shape
    for key, value in meta.items():
        if key == "input":
            out.append("input = " + ", ".join(str(v) for v in value))
        else:
            out.append(f"{key} = {_fmt(value)}")
    out += ["", "[layers]"]
    for node in graph.nodes:
        refs = [INPUT if r == INPUT else r for r in node.inputs]
        src = _fmt(refs[0]) if len(refs) == 1 else _fmt(refs)
        args = "".join(f", {k}={_fmt(v)}" for k, v in node.args.items())
        out.append(f"{node.id}: {node.kind}(from={src}{args})")
    return "\n".join(out) + "\n"
