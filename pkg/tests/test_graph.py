from dataclasses import replace

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from sbpyolo.detector import with_input_size
from sbpyolo.exceptions import (
    ConfigSyntaxError,
    CycleError,
    DanglingReferenceError,
    GraphShapeError,
    HeadLevelError,
    MissingWeightsError,
)
from sbpyolo.graph import WeightStore, emit_config, forward, infer_shapes, load_config, parse_config
from sbpyolo.resources import bundled_configs, resolve_config

CONFIGS = bundled_configs()


def _load(name, size=None):
    g = load_config(resolve_config(name))
    return infer_shapes(with_input_size(g, size) if size else g)


def test_minimal_document_parses_to_two_nodes():
    text = "[layers]\n0: conv(from=input, c2=8, k=3)\n1: plain_head(from=0, nc=2)\n"
    g = parse_config(text)
    assert [n.kind for n in g.nodes] == ["conv", "plain_head"]
    assert g.input_shape == (3, 640, 640)
    shaped = infer_shapes(replace(g, input_shape=(3, 8, 8)))
    assert shaped.nodes[1].out_shape == ((66, 8, 8),)


def test_bundled_sbp_yolo_levels():
    g = _load("sbp-yolo")
    assert [g.shape_of(i)[1] for i in g.head_levels] == [160, 80, 40, 20]
    assert g.nodes[0].out_shape == (16, 320, 320)
    assert g.head.out_shape == tuple((66, s, s) for s in (160, 80, 40, 20))


def test_bundled_configs_present():
    assert {"sbp-yolo.cfg", "yolo11n.cfg", "yolo11n-p2.cfg", "yolo11n-p2-ledh.cfg", "minimal.cfg"} <= set(CONFIGS)


def _chain(n, extra=""):
    lines = ["[layers]", "0: conv(from=input, c2=8, k=3)"]
    lines += [f"{i}: conv(from={i - 1}, c2=8)" for i in range(1, n)]
    return "\n".join(lines) + "\n" + extra


def test_forward_reference_names_reader():
    text = _chain(8).replace("3: conv(from=2, c2=8)", "3: conv(from=7, c2=8)")
    with pytest.raises(CycleError, match="node 3") as err:
        parse_config(text)
    assert err.value.line == 5


def test_dangling_reference():
    text = "[layers]\n0: conv(from=input, c2=8)\n1: conv(from=0, c2=8)\n2: concat(from=[1, 9])\n"
    with pytest.raises(DanglingReferenceError, match="node 2 .*node 9") as err:
        parse_config(text)
    assert err.value.line == 4
    with pytest.raises(DanglingReferenceError):
        parse_config("[layers]\n0: conv(from=-1, c2=4)\n")


def test_self_reference_is_cycle():
    with pytest.raises(CycleError):
        parse_config("[layers]\n0: conv(from=input, c2=4)\n1: conv(from=1, c2=4)\n")


def test_head_level_errors():
    base = _chain(4)
    with pytest.raises(HeadLevelError):
        parse_config(base + "4: ledh_head(from=[0, 1, 2], nc=2)\n")
    with pytest.raises(HeadLevelError):
        parse_config(base + "4: plain_head(from=[0, 1, 2, 3, 3], nc=2)\n")
    with pytest.raises(HeadLevelError):
        parse_config("[meta]\nlevels = 4\n" + base + "4: plain_head(from=[0, 1, 2], nc=2)\n")
    with pytest.raises(HeadLevelError):
        parse_config(base + "4: plain_head(from=[3], nc=2)\n5: plain_head(from=[3], nc=2)\n")


@pytest.mark.parametrize(
    "text,line,column",
    [
        ("[layers]\n0 conv(from=input, c2=4)\n", 2, 1),
        ("[layers]\n0: conv(from=input, c2=4, zz=1)\n", 2, 27),
        ("[layers]\n0: frob(from=input)\n", 2, 4),
        ("[layers]\n1: conv(from=input, c2=4)\n", 2, 1),
        ("[bogus]\n", 1, 1),
        ("0: conv(from=input, c2=4)\n", 1, 1),
        ("[layers]\n0: conv(from=input)\n", 2, 9),
        ("[layers]\n0: conv(from=input, c2=4, k=2)\n", 2, 9),
        ("[layers]\n0: conv(from=input, c2=$W)\n", 2, 24),
    ],
)
def test_syntax_errors_carry_position(text, line, column):
    with pytest.raises(ConfigSyntaxError) as err:
        parse_config(text)
    assert (err.value.line, err.value.column) == (line, column)
    assert f"line {line}, column {column}" in str(err.value)


def test_meta_constants_substitute():
    g = parse_config("[meta]\nW = 12\ninput = 1, 8, 8\n[layers]\n0: conv(from=input, c2=$W)\n")
    assert g.nodes[0].args["c2"] == 12
    assert g.input_shape == (1, 8, 8)


def test_infer_shape_examples():
    text = (
        "[meta]\ninput = 64, 20, 20\n[layers]\n"
        "0: upsample(from=input)\n"
        "1: conv(from=0, c2=32, k=3)\n"
        "2: conv(from=0, c2=32, k=1)\n"
        "3: concat(from=[1, 2])\n"
    )
    g = infer_shapes(parse_config(text))
    assert g.nodes[0].out_shape == (64, 40, 40)
    assert g.nodes[3].out_shape == (64, 40, 40)


def test_concat_mismatch_names_both_producers():
    text = "[meta]\ninput = 4, 8, 8\n[layers]\n0: conv(from=input, c2=4, s=2)\n1: concat(from=[input, 0])\n"
    with pytest.raises(GraphShapeError) as err:
        infer_shapes(parse_config(text))
    msg = str(err.value)
    assert "input" in msg and "node 0" in msg and err.value.node == 1 and err.value.line == 5


def test_block_divisibility_reported_with_node():
    text = "[meta]\ninput = 6, 8, 8\n[layers]\n0: gs_bottleneck(from=input)\n"
    with pytest.raises(GraphShapeError) as err:
        infer_shapes(parse_config(text))
    assert err.value.node == 0


@pytest.mark.parametrize("name", CONFIGS)
def test_round_trip(name):
    g = load_config(resolve_config(name))
    again = parse_config(emit_config(g))
    assert again == g
    assert emit_config(again) == emit_config(g)


@pytest.mark.parametrize("name", CONFIGS)
def test_static_shapes_equal_dynamic(name):
    size = 1 if name == "minimal.cfg" else 128
    g = _load(name, size)
    weights = WeightStore.initialize(g, seed=0)
    x = np.random.default_rng(0).standard_normal((1, *g.input_shape))
    _, values = forward(g, x, weights, return_all=True)
    for node in g.nodes:
        out = values[node.id]
        if isinstance(out, list):
            assert tuple(o.shape[1:] for o in out) == node.out_shape
        else:
            assert out.shape[1:] == node.out_shape, node


def test_reduced_input_scales_heads():
    g = _load("sbp-yolo", 160)
    out = forward(g, np.random.default_rng(1).standard_normal((1, 3, 160, 160)), WeightStore.initialize(g))
    assert [o.shape[2] for o in out] == [40, 20, 10, 5]
    assert all(o.shape[1] == 66 for o in out)


def test_zero_input_zero_bias_gives_zero_logits():
    g = _load("sbp-yolo", 64)
    weights = WeightStore.initialize(g, seed=5)
    from sbpyolo.graph import graph_layers

    layers = graph_layers(g)
    for node_id in weights.arrays:
        params = weights.params_for(node_id, layers[node_id])
        for name, arr in params.items():
            if name.endswith(".bias"):
                arr[...] = 0.0
    out = forward(g, np.zeros((1, 3, 64, 64)), weights)
    assert all(np.all(o == 0.0) for o in out)


def test_forward_rejects_wrong_input_size():
    g = _load("sbp-yolo", 64)
    with pytest.raises(GraphShapeError):
        forward(g, np.zeros((1, 3, 32, 32)), WeightStore.initialize(g))


def test_missing_weights_error():
    g = _load("sbp-yolo", 64)
    weights = WeightStore.initialize(g)
    del weights.arrays[4]
    with pytest.raises(MissingWeightsError) as err:
        forward(g, np.zeros((1, 3, 64, 64)), weights)
    assert err.value.node == 4


def test_weights_roundtrip_bit_exact(tmp_path):
    g = _load("sbp-yolo")
    weights = WeightStore.initialize(g, seed=11)
    blob, manifest = tmp_path / "w.bin", tmp_path / "w.txt"
    weights.save(blob, manifest)
    loaded = WeightStore.load(blob, manifest)
    assert loaded == weights and loaded.seed == 11
    assert blob.stat().st_size == 8 * weights.size
    raw = np.fromfile(blob, dtype="<f8")
    first = manifest.read_text().splitlines()[2].split()
    node, offset, length = map(int, first)
    assert np.array_equal(raw[offset : offset + length], weights.arrays[node])


def test_weights_are_seeded():
    g = _load("yolo11n")
    assert WeightStore.initialize(g, seed=3) == WeightStore.initialize(g, seed=3)
    assert WeightStore.initialize(g, seed=3) != WeightStore.initialize(g, seed=4)


SBP_TEXT = open(resolve_config("sbp-yolo")).read()


@st.composite
def mutated_configs(draw):
    lines = SBP_TEXT.splitlines()
    for _ in range(draw(st.integers(1, 4))):
        i = draw(st.integers(0, len(lines) - 1))
        op = draw(st.sampled_from(["delete", "dup", "replace_char", "insert_text", "swap"]))
        if op == "delete" and len(lines) > 1:
            del lines[i]
        elif op == "dup":
            lines.insert(i, lines[i])
        elif op == "replace_char" and lines[i]:
            j = draw(st.integers(0, len(lines[i]) - 1))
            ch = draw(st.sampled_from(list("()[]=,:$-#0123456789abcxyz ")))
            lines[i] = lines[i][:j] + ch + lines[i][j + 1 :]
        elif op == "insert_text":
            lines.insert(i, draw(st.text(alphabet="()[]=,:$#-01289 abcfromconv", max_size=30)))
        elif op == "swap":
            k = draw(st.integers(0, len(lines) - 1))
            lines[i], lines[k] = lines[k], lines[i]
    return "\n".join(lines) + "\n"


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(mutated_configs())
def test_parser_is_total_under_mutation(text):
    try:
        g = parse_config(text)
    except ConfigSyntaxError as err:
        assert err.line >= 1 and err.column >= 1
        assert str(err).startswith(f"line {err.line}, column {err.column}: ")
        return
    try:
        infer_shapes(g)
    except GraphShapeError as err:
        assert err.line is not None


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=200))
def test_parser_never_crashes_on_noise(text):
    try:
        parse_config(text)
    except ConfigSyntaxError as err:
        assert err.line >= 1
