import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metalex.engine import (AdamWState, Checkpoint, Param, adamw_step,
                            checkpoints_equal, load_checkpoint,
                            save_checkpoint)
from metalex.errors import FormatError
from metalex.rng import RngStream


def sample_checkpoint(seed=0, with_opt=True):
    gen = np.random.default_rng(seed)
    names = ["mpd.layer0.w", "mpd.layer0.b", "wsd.layer1.w"]
    params = {n: gen.standard_normal((3, 2)) for n in names}
    opt = None
    if with_opt:
        param_objs = [Param(n, v.copy()) for n, v in params.items()]
        opt = AdamWState(lr=0.003)
        adamw_step(param_objs,
                   {p: gen.standard_normal(p.value.shape) for p in param_objs},
                   opt)
        params = {p.name: p.value for p in param_objs}
    return Checkpoint(
        model_kind="combined",
        config={"train": {"lr": 0.003}, "kind": "combined"},
        step=17,
        phase=2,
        params=params,
        opt=opt,
        rng_states={"root_seed": seed},
    )


def test_round_trip_is_bitwise(tmp_path):
    ck = sample_checkpoint(1)
    path = tmp_path / "model.ckpt"
    save_checkpoint(ck, path)
    loaded = load_checkpoint(path)
    assert checkpoints_equal(ck, loaded)
    for name, arr in ck.params.items():
        assert loaded.params[name].tobytes() == arr.tobytes()
        assert loaded.opt.m[name].tobytes() == ck.opt.m[name].tobytes()
        assert loaded.opt.v[name].tobytes() == ck.opt.v[name].tobytes()
    assert loaded.opt.lr == ck.opt.lr
    assert loaded.opt.step_count == ck.opt.step_count


def test_round_trip_without_optimizer(tmp_path):
    ck = sample_checkpoint(2, with_opt=False)
    path = tmp_path / "model.ckpt"
    save_checkpoint(ck, path)
    loaded = load_checkpoint(path)
    assert loaded.opt is None
    assert checkpoints_equal(ck, loaded)


def test_save_is_byte_deterministic(tmp_path):
    ck = sample_checkpoint(3)
    save_checkpoint(ck, tmp_path / "a.ckpt")
    save_checkpoint(ck, tmp_path / "b.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(sample_checkpoint(), path)
    blob = bytearray(path.read_bytes())
    blob[:4] = b"NOPE"
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_unsupported_version_rejected(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(sample_checkpoint(), path)
    blob = bytearray(path.read_bytes())
    blob[4:8] = (99).to_bytes(4, "little")
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(sample_checkpoint(), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-9])
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_trailing_garbage_rejected(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(sample_checkpoint(), path)
    path.write_bytes(path.read_bytes() + b"\x00" * 8)
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_checkpoints_equal_detects_one_bit_difference(tmp_path):
    a = sample_checkpoint(4)
    b = sample_checkpoint(4)
    assert checkpoints_equal(a, b)
    b.params["mpd.layer0.w"] = b.params["mpd.layer0.w"].copy()
    b.params["mpd.layer0.w"][0, 0] = np.nextafter(
        b.params["mpd.layer0.w"][0, 0], np.inf)
    assert not checkpoints_equal(a, b)


# -- rng streams ---------------------------------------------------------------

def test_same_path_same_sequence():
    a = RngStream(9).split("dropout").gen.random(8)
    b = RngStream(9).split("dropout").gen.random(8)
    assert np.array_equal(a, b)


def test_distinct_names_and_seeds_give_distinct_sequences():
    base = RngStream(9).split("dropout").gen.random(8)
    other_name = RngStream(9).split("shuffle").gen.random(8)
    other_seed = RngStream(10).split("dropout").gen.random(8)
    assert not np.array_equal(base, other_name)
    assert not np.array_equal(base, other_seed)


def test_nested_split_differs_from_flat():
    nested = RngStream(1).split("a").split("b").gen.random(4)
    flat_ab = RngStream(1).split("ab").gen.random(4)
    flat_b = RngStream(1).split("b").gen.random(4)
    assert not np.array_equal(nested, flat_ab)
    assert not np.array_equal(nested, flat_b)


def test_drawing_from_parent_does_not_shift_children():
    parent = RngStream(7)
    before = parent.split("child").gen.random(4)
    parent.gen.random(100)
    after = parent.split("child").gen.random(4)
    assert np.array_equal(before, after)


def test_state_round_trip_resumes_mid_sequence():
    stream = RngStream(3).split("x")
    stream.gen.random(37)  # advance to an odd offset
    snapshot = stream.state()
    expected = stream.gen.random(16)
    resumed = RngStream.from_state(snapshot)
    assert np.array_equal(resumed.gen.random(16), expected)


def test_state_is_json_serializable():
    import json
    state = RngStream(5).split("y").state()
    assert json.loads(json.dumps(state)) == state


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 63 - 1), st.text(min_size=1, max_size=20))
def test_split_is_pure(seed, name):
    a = RngStream(seed).split(name).gen.random(3)
    b = RngStream(seed).split(name).gen.random(3)
    assert np.array_equal(a, b)
