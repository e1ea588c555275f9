"""Round-trip and rejection tests for the model text format."""

import numpy as np
import pytest

from rankcal.errors import ModelParseError
from rankcal.model import (
    ColorMatrix,
    Lattice3,
    ModelMetadata,
    PipelineModel,
    ToneCurve,
    parameter_count,
)
from rankcal.modelfile import deserialize_model, serialize_model


def random_monotone_curve(rng, direction, channel):
    """Degree-7 monotone polynomial: integral of a squared cubic."""
    p = rng.uniform(-1.0, 1.0, size=4)
    sq = np.polynomial.polynomial.polymul(p, p)  # degree 6, non-negative
    coef = np.zeros(8)
    coef[1:] = sq / np.arange(1, 8)
    coef[0] = rng.uniform(-0.2, 0.2)
    return ToneCurve(coef, direction, channel)


def random_model(seed):
    rng = np.random.default_rng(seed)
    rows = np.eye(3) + rng.uniform(-0.3, 0.3, size=(3, 3))
    lut_f = Lattice3(rng.uniform(-0.1, 1.1, size=(5, 5, 5, 3)))
    lut_b = Lattice3(rng.uniform(-0.1, 1.1, size=(5, 5, 5, 3)))
    curve = tuple(random_monotone_curve(rng, "forward", k) for k in (1, 2, 3))
    # reuse the forward shapes for the inverse so the roundtrip invariant
    # check is exercised with consistent curves
    inverse = tuple(
        ToneCurve.linear("inverse", k) for k in (1, 2, 3)
    )
    fwd = tuple(ToneCurve.linear("forward", k) for k in (1, 2, 3))
    return PipelineModel(
        matrix=ColorMatrix(rows),
        forward_tones=fwd,
        forward_lut=lut_f,
        inverse_tones=inverse,
        backward_lut=lut_b,
        metadata=ModelMetadata.from_dict(
            "sim-a", 140, {"seed": 3, "sphere_count": 100000}
        ),
    ), curve


def test_identity_model_roundtrip():
    model = PipelineModel.identity()
    text = serialize_model(model)
    back = deserialize_model(text)
    assert np.array_equal(back.matrix.rows, model.matrix.rows)
    assert np.array_equal(back.forward_lut.nodes, model.forward_lut.nodes)
    for a, b in zip(back.forward_tones, model.forward_tones):
        assert np.array_equal(a.coefficients, b.coefficients)
    assert back.metadata == model.metadata


@pytest.mark.parametrize("seed", range(8))
def test_random_model_roundtrip_exact(seed):
    model, _ = random_model(seed)
    text = serialize_model(model)
    back = deserialize_model(text)
    assert np.array_equal(back.matrix.rows, model.matrix.rows)
    assert np.array_equal(back.forward_lut.nodes, model.forward_lut.nodes)
    assert np.array_equal(back.backward_lut.nodes, model.backward_lut.nodes)
    for a, b in zip(back.forward_tones + back.inverse_tones,
                    model.forward_tones + model.inverse_tones):
        assert np.array_equal(a.coefficients, b.coefficients)
    assert back.metadata == model.metadata
    # text -> model -> text is also the identity
    assert serialize_model(back) == text


def test_format_is_lf_keyed_lines():
    text = serialize_model(PipelineModel.identity())
    assert "\r" not in text
    assert text.startswith("model.version = 1\n")
    for line in text.strip().split("\n"):
        assert " = " in line


def test_forward_parameter_lines_sum_to_count():
    model = PipelineModel.identity()
    text = serialize_model(model)
    scalars = 0
    for line in text.strip().split("\n"):
        key = line.split(" = ")[0]
        if key.startswith("matrix.") or key.startswith("tone.forward."):
            scalars += 1
        elif key.startswith("lut.forward.node."):
            scalars += 1
    assert scalars == parameter_count(model) == 408


def test_nan_node_rejected_with_key_name():
    text = serialize_model(PipelineModel.identity())
    needle = "lut.forward.node.2.1.0.g = "
    start = text.index(needle)
    end = text.index("\n", start)
    broken = text[:start] + needle + "nan" + text[end:]
    with pytest.raises(ModelParseError, match=r"lut\.forward\.node\.2\.1\.0\.g"):
        deserialize_model(broken)


def test_unknown_version_rejected():
    text = serialize_model(PipelineModel.identity())
    broken = text.replace("model.version = 1", "model.version = 9", 1)
    with pytest.raises(ModelParseError, match="version"):
        deserialize_model(broken)


def test_missing_field_rejected():
    text = serialize_model(PipelineModel.identity())
    lines = [l for l in text.strip().split("\n") if not l.startswith("matrix.r2.c2")]
    with pytest.raises(ModelParseError, match=r"matrix\.r2\.c2"):
        deserialize_model("\n".join(lines) + "\n")


def test_wrong_node_count_rejected():
    text = serialize_model(PipelineModel.identity())
    broken = text.replace("lut.forward.resolution = 5", "lut.forward.resolution = 4", 1)
    with pytest.raises(ModelParseError):
        deserialize_model(broken)


def test_trailing_garbage_rejected():
    text = serialize_model(PipelineModel.identity()) + "extra.key = 1\n"
    with pytest.raises(ModelParseError, match="extra.key"):
        deserialize_model(text)


def test_malformed_line_reports_line_number():
    text = "model.version = 1\nthis is not a key value line\n"
    with pytest.raises(ModelParseError, match="line 2"):
        deserialize_model(text)
