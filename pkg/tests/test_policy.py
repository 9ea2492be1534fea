import json
import math
import struct

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from gpsspoof.geo import LocalPos, wrap_angle
from gpsspoof.nets import BranchNet, DimensionMismatch
from gpsspoof.policy import (
    FORMAT_VERSION,
    DegenerateRelative,
    FormatError,
    MlpPolicy,
    PolicyObservation,
    SurrogateConfig,
    SurrogatePolicy,
    TargetSpec,
    compute_rel,
    compute_rel_batch,
    forward,
    load_d_scale,
    load_policy,
    make_observation,
    normalize_rel,
    save_policy,
    surrogate,
)
from gpsspoof.world import Action

coords = st.floats(-500, 500)


def obs(depth=None, d=0.5, y=0.0, n=16):
    return PolicyObservation(np.ones(n) if depth is None else np.asarray(depth, float), d, y)


def test_rel_examples():
    assert compute_rel(LocalPos(0, 0), 0.0, TargetSpec(LocalPos(100, 0), 100)) == (100.0, 0.0)
    d, y = compute_rel(LocalPos(0, 0), 0.0, TargetSpec(LocalPos(0, 100), 100))
    assert d == 100.0 and y == pytest.approx(math.pi / 2)
    d, y = compute_rel(LocalPos(3, 4), 0.3, TargetSpec(LocalPos(0, 0), 5))
    assert d == pytest.approx(5.0)
    assert y == pytest.approx(wrap_angle(math.atan2(-4, -3) - 0.3))


def test_rel_degenerate():
    with pytest.raises(DegenerateRelative):
        compute_rel(LocalPos(1, 1), 0.0, TargetSpec(LocalPos(1, 1), 1))


@given(coords, coords, coords, coords, coords, coords, st.floats(-3, 3), st.floats(-3, 3))
def test_rel_translation_invariant_and_yaw_shift(px, py, tx, ty, sx, sy, yaw, delta):
    # keep the pair apart so rounding in the shift cannot make them coincide
    assume(math.hypot(tx - px, ty - py) > 1e-6)
    a = compute_rel(LocalPos(px, py), yaw, TargetSpec(LocalPos(tx, ty), 1))
    b = compute_rel(LocalPos(px + sx, py + sy), yaw, TargetSpec(LocalPos(tx + sx, ty + sy), 1))
    assert b.d_rel == pytest.approx(a.d_rel, rel=1e-9, abs=1e-6)
    c = compute_rel(LocalPos(px, py), yaw + delta, TargetSpec(LocalPos(tx, ty), 1))
    assert math.cos(c.yaw_rel - (a.yaw_rel - delta)) == pytest.approx(1.0, abs=1e-9)


@given(coords, coords, st.floats(-math.pi, math.pi))
def test_rel_rotation_equivariant(px, py, th):
    tgt = LocalPos(10.0, -20.0)
    a = compute_rel(LocalPos(px, py), 0.0, TargetSpec(tgt, 1))
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    p2, t2 = R @ [px, py], R @ tgt.as_array()
    if np.allclose(p2, t2):
        return
    b = compute_rel(LocalPos(*p2), th, TargetSpec(LocalPos(*t2), 1))
    assert b.d_rel == pytest.approx(a.d_rel, rel=1e-9, abs=1e-9)


def test_batch_matches_scalar():
    tgt = TargetSpec(LocalPos(5, 80), 80)
    pts = np.random.default_rng(0).uniform(-50, 50, (40, 2))
    d, y = compute_rel_batch(pts, 0.7, tgt)
    for k, p in enumerate(pts):
        r = compute_rel(LocalPos(*p), 0.7, tgt)
        assert d[k] == pytest.approx(r.d_rel) and y[k] == pytest.approx(r.yaw_rel)


def test_spoofed_position_gives_attacker_predicted_inputs():
    # an attacker who knows the spoofed estimate can predict the policy inputs exactly
    tgt = TargetSpec(LocalPos(0, 150), 150)
    p_hat = LocalPos(7.25, 96.5)
    o = make_observation(np.ones(16), compute_rel(p_hat, 1.2, tgt), tgt)
    dx, dy = 0 - 7.25, 150 - 96.5
    assert o.d_rel_norm == pytest.approx(math.hypot(dx, dy) / 150)
    assert o.yaw_rel_norm == pytest.approx(wrap_angle(math.atan2(dy, dx) - 1.2) / math.pi)


def test_normalisation_clips_distance():
    d, y = normalize_rel(300.0, -math.pi, 150.0)
    assert d == 1.0 and y == -1.0


def test_zero_network_is_midpoint():
    p = MlpPolicy.build(seed=None)
    p.net.params = [np.zeros_like(a) for a in p.net.params]
    a = p(obs())
    assert a.speed_cmd == pytest.approx(2.5) and a.yaw_rate_cmd == 0.0


def test_single_layer_matrix_oracle():
    rng = np.random.default_rng(3)
    net = BranchNet([4], [6, 2], "relu", "tanh")  # no depth layers: trunk sees raw rays + 2 extras
    W, b = rng.normal(size=(6, 2)), rng.normal(size=2)
    net.params = [W, b]
    p = MlpPolicy(net)
    o = obs(depth=[0.1, 0.5, 0.9, 1.0], d=0.3, y=-0.2, n=4)
    out = np.tanh(o.as_array() @ W + b)
    a = forward(p, o)
    assert a.speed_cmd == pytest.approx(np.clip(0.5 * (out[0] + 1) * 5, 0, 5))
    assert a.yaw_rate_cmd == pytest.approx(out[1])


def test_forward_deterministic_and_bounded():
    p = MlpPolicy.build(seed=5)
    for s in range(20):
        rng = np.random.default_rng(s)
        o = obs(rng.uniform(0, 1, 16), rng.uniform(0, 1), rng.uniform(-1, 1))
        a, b = p(o), p(o)
        assert a == b
        assert 0 <= a.speed_cmd <= 5 and abs(a.yaw_rate_cmd) <= 1


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        MlpPolicy.build()(obs(n=8))


def test_surrogate_examples():
    cfg = SurrogateConfig()
    a = surrogate(obs(y=0.0), cfg)
    assert a == Action(5.0, 0.0)
    assert surrogate(obs(y=0.5), cfg).yaw_rate_cmd > 0
    blocked = np.ones(16)
    blocked[7] = blocked[8] = 0.2
    a = surrogate(obs(blocked, y=0.0), cfg)
    assert a.speed_cmd == pytest.approx(5.0 * 0.5 * 1.0)
    assert abs(a.yaw_rate_cmd) > 0
    # closest ray is index 7, just right of the nose, so the turn is to the left
    assert a.yaw_rate_cmd > 0


def test_surrogate_turns_away_from_left_obstacle():
    depth = np.ones(16)
    depth[12] = 0.1
    assert surrogate(obs(depth, y=0.0)).yaw_rate_cmd < 0


@given(st.lists(st.floats(0, 1), min_size=16, max_size=16), st.floats(-1, 1))
def test_surrogate_bounded_and_batch_consistent(depth, y):
    o = obs(depth, 0.5, y)
    a = surrogate(o)
    assert 0 <= a.speed_cmd <= 5 and abs(a.yaw_rate_cmd) <= 1
    sp, w = SurrogatePolicy().act_batch(o.as_array()[None, :])
    assert sp[0] == pytest.approx(a.speed_cmd) and w[0] == pytest.approx(a.yaw_rate_cmd)


def test_save_load_bit_exact(tmp_path):
    p = MlpPolicy.build(seed=9)
    path = tmp_path / "p.gsnp"
    save_policy(p, path, metadata={"note": "x"}, d_scale=150.0)
    q = load_policy(path)
    x = np.random.default_rng(0).uniform(0, 1, (50, 18))
    assert np.array_equal(p.normalized_batch(x), q.normalized_batch(x))
    assert load_d_scale(path) == 150.0
    side = json.loads((tmp_path / "p.gsnp.json").read_text())
    assert side["metadata"] == {"note": "x"} and side["format_version"] == FORMAT_VERSION


def test_truncated_file(tmp_path):
    path = tmp_path / "p.gsnp"
    save_policy(MlpPolicy.build(seed=1), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(FormatError):
        load_policy(path)
    path.write_bytes(raw[:6])
    with pytest.raises(FormatError):
        load_policy(path)


def test_version_mismatch_names_versions(tmp_path):
    path = tmp_path / "p.gsnp"
    save_policy(MlpPolicy.build(seed=1), path)
    raw = bytearray(path.read_bytes())
    raw[4:8] = struct.pack("<I", FORMAT_VERSION + 1)
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match=rf"version {FORMAT_VERSION + 1}.*version {FORMAT_VERSION}"):
        load_policy(path)


def test_bad_magic_and_nonfinite(tmp_path):
    path = tmp_path / "p.gsnp"
    path.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(FormatError):
        load_policy(path)
    p = MlpPolicy.build(seed=1)
    p.net.params[0][0, 0] = np.nan
    save_policy(p, path)
    with pytest.raises(FormatError):
        load_policy(path)


def test_target_spec_invariant():
    with pytest.raises(ValueError):
        TargetSpec(LocalPos(0, 0), 0.0)
