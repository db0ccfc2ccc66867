"""Architecture plans, initialization, and forward-pass invariants."""

import numpy as np
import pytest
import torch

import oracles
from tmd import ArchConfig
from tmd.errors import ConfigError, DimensionError, UnsupportedOperationError
from tmd.nets import (
    TANH_CLIP,
    d_forward,
    discriminator_forward,
    generator_forward,
    generator_plan,
    init_buffers,
    init_params,
    one_hot,
    param_groups,
    param_shapes,
    q_forward,
    q_logits,
    trunk_forward,
    trunk_plan,
)
from tmd.seeding import spawn_rng


def test_arch_validation():
    with pytest.raises(ConfigError):
        ArchConfig("resnet", 8, 2, 4)
    with pytest.raises(ConfigError):
        ArchConfig("mlp", 8, 0, 4)  # disconnected needs codes
    with pytest.raises(ConfigError):
        ArchConfig("mlp", 8, 2, 4, disconnected=False)  # baseline is codeless
    with pytest.raises(ConfigError):
        ArchConfig("mlp", 8, 2, 0)
    with pytest.raises(ConfigError):
        ArchConfig("conv768", 512, 2, 4)
    with pytest.raises(ConfigError):
        ArchConfig("conv1024", 768, 2, 4)
    with pytest.raises(ConfigError):
        ArchConfig("mlp", 0, 2, 4)
    with pytest.raises(ConfigError):
        ArchConfig("mlp", 8, 2, 4, mlp_widths=())
    with pytest.raises(ConfigError):
        ArchConfig("mlp", 8, 2, 4, mlp_widths=(16, 0))
    with pytest.raises(ConfigError):
        ArchConfig("conv768", 768, 2, 4, mlp_widths=(16,))
    assert ArchConfig("mlp", 8, 2, 4).widths == (32, 32)
    assert ArchConfig("mlp", 8, 2, 4, mlp_widths=(10, 20, 30)).widths == (10, 20, 30)


def test_conv_stacks_land_on_the_advertised_lengths():
    for preset, dim in (("conv768", 768), ("conv1024", 1024)):
        arch = ArchConfig(preset, dim, 50, 100)
        assert generator_plan(arch)[-1]["out_len"] == dim
        assert trunk_plan(arch)[-1]["out_len"] == 16
        # batch norm everywhere except the generator output and trunk input
        gplan, tplan = generator_plan(arch), trunk_plan(arch)
        assert [l["bn"] for l in gplan] == [True, True, True, True, False]
        assert [l["bn"] for l in tplan] == [False, True, True, True, True]
        assert gplan[-1]["act"] == "tanh"
        assert all(l["act"] == "lrelu" for l in tplan)


def test_conv768_tensor_catalog():
    arch = ArchConfig("conv768", 768, 50, 100)
    shapes = param_shapes(arch)
    assert len(shapes) == 40
    assert shapes["gen.ct0.w"] == (150, 512, 32)
    assert shapes["gen.ct0.bn.g"] == (512,)
    assert shapes["gen.ct4.w"] == (128, 1, 5)
    assert shapes["trunk.c0.w"] == (128, 1, 5)
    assert shapes["trunk.c4.w"] == (768, 512, 4)
    assert shapes["d_head.w"] == (1, 768, 16)
    assert shapes["q_head.w"] == (50, 768 * 16)
    buffers = init_buffers(arch)
    assert len(buffers) == 2 * (4 + 4)  # running mean+var per bn layer


def test_mlp_tensor_catalog():
    arch = ArchConfig("mlp", 8, 3, 4)
    shapes = param_shapes(arch)
    assert list(shapes) == [
        "gen.fc0.w", "gen.fc0.b", "gen.fc1.w", "gen.fc1.b", "gen.fc2.w", "gen.fc2.b",
        "trunk.fc0.w", "trunk.fc0.b", "trunk.fc1.w", "trunk.fc1.b",
        "d_head.w", "d_head.b", "q_head.w", "q_head.b",
    ]
    assert shapes["gen.fc0.w"] == (32, 7)
    assert shapes["gen.fc2.w"] == (8, 32)
    assert shapes["trunk.fc0.w"] == (32, 8)
    assert shapes["d_head.w"] == (1, 32)
    assert shapes["q_head.w"] == (3, 32)
    assert init_buffers(arch) == {}
    connected = ArchConfig("mlp", 8, 0, 4, disconnected=False)
    assert "q_head.w" not in param_shapes(connected)
    assert param_shapes(connected)["gen.fc0.w"] == (32, 4)


def test_init_statistics_and_determinism():
    arch = ArchConfig("mlp", 32, 6, 16, mlp_widths=(256, 256))
    a = init_params(arch, seed=5)
    b = init_params(arch, seed=5)
    c = init_params(arch, seed=6)
    assert all(torch.equal(a[k], b[k]) for k in a)
    assert any(not torch.equal(a[k], c[k]) for k in a)
    w = a["gen.fc0.w"].numpy()
    assert abs(float(w.mean())) < 0.005
    assert abs(float(w.std()) - 0.02) < 0.005
    assert all(torch.all(a[k] == 0) for k in a if k.endswith(".b"))
    # every weight tensor gets its own stream: no two tensors share values
    flat = [a[k].numpy().ravel()[:4].tolist() for k in a if k.endswith(".w")]
    assert len({tuple(row) for row in flat}) == len(flat)
    bn_arch = ArchConfig("conv768", 768, 4, 8)
    bn = init_params(bn_arch, seed=0)
    g = bn["gen.ct0.bn.g"].numpy()
    assert abs(float(g.mean()) - 1.0) < 0.005 and abs(float(g.std()) - 0.02) < 0.01
    assert torch.all(bn["gen.ct0.bn.b"] == 0)


def test_generator_output_strictly_inside_unit_box():
    arch = ArchConfig("mlp", 6, 2, 3)
    params = init_params(arch, seed=1)
    # enormous weights saturate tanh; the clamp must keep outputs < 1
    params["gen.fc2.w"] = params["gen.fc2.w"] * 1e6
    z = torch.from_numpy(spawn_rng(0, "box").standard_normal((16, 3)).astype(np.float32))
    c = one_hot(torch.zeros(16, dtype=torch.int64), 2)
    out = generator_forward(arch, params, init_buffers(arch), z, c)
    assert float(out.abs().max()) <= TANH_CLIP
    assert float(out.abs().max()) < 1.0


def test_mlp_forward_matches_numpy_oracle():
    arch = ArchConfig("mlp", 8, 3, 4)
    params = init_params(arch, seed=2)
    buffers = init_buffers(arch)
    rng = spawn_rng(8, "fwd")
    z = rng.standard_normal((5, 4)).astype(np.float32)
    codes = rng.integers(0, 3, 5)
    c = np.zeros((5, 3), dtype=np.float32)
    c[np.arange(5), codes] = 1.0
    t = rng.uniform(-0.9, 0.9, (5, 8)).astype(np.float32)
    with torch.no_grad():
        fake = generator_forward(arch, params, buffers, torch.from_numpy(z),
                                 one_hot(torch.from_numpy(codes), 3)).numpy()
        d = discriminator_forward(arch, params, buffers, torch.from_numpy(t)).numpy()
        q = q_forward(arch, params, buffers, torch.from_numpy(t)).numpy()
    feats = oracles.mlp_trunk(arch, params, t)
    assert np.abs(fake - oracles.mlp_generator(arch, params, z, c)).max() < 1e-6
    assert np.abs(d - oracles.mlp_d_probs(params, feats)).max() < 1e-6
    assert np.abs(q - oracles.mlp_q_probs(params, feats)).max() < 1e-6
    assert np.allclose(q.sum(1), 1.0, atol=1e-6)


def test_trunk_is_shared_and_heads_are_separate():
    arch = ArchConfig("mlp", 8, 3, 4)
    params = init_params(arch, seed=4)
    buffers = init_buffers(arch)
    t = torch.from_numpy(spawn_rng(1, "share").uniform(-0.9, 0.9, (6, 8)).astype(np.float32))
    with torch.no_grad():
        d0 = discriminator_forward(arch, params, buffers, t)
        q0 = q_forward(arch, params, buffers, t)
        # perturbing a shared trunk weight moves both heads
        bumped = dict(params)
        bumped["trunk.fc0.w"] = params["trunk.fc0.w"] + 0.05
        assert not torch.equal(discriminator_forward(arch, bumped, buffers, t), d0)
        assert not torch.equal(q_forward(arch, bumped, buffers, t), q0)
        # perturbing d_head leaves the posterior untouched, and vice versa
        bumped = dict(params)
        bumped["d_head.w"] = params["d_head.w"] + 0.5
        assert torch.equal(q_forward(arch, bumped, buffers, t), q0)
        assert not torch.equal(discriminator_forward(arch, bumped, buffers, t), d0)
        bumped = dict(params)
        bumped["q_head.w"] = params["q_head.w"] + 0.5
        assert torch.equal(discriminator_forward(arch, bumped, buffers, t), d0)
        assert not torch.equal(q_forward(arch, bumped, buffers, t), q0)


def test_connected_baseline_has_no_posterior():
    arch = ArchConfig("mlp", 8, 0, 4, disconnected=False)
    params = init_params(arch, seed=0)
    buffers = init_buffers(arch)
    t = torch.zeros((2, 8))
    with pytest.raises(UnsupportedOperationError):
        q_logits(arch, params, trunk_forward(arch, params, buffers, t))
    z = torch.zeros((2, 4))
    out = generator_forward(arch, params, buffers, z, one_hot(torch.zeros(2, dtype=torch.int64), 0))
    assert out.shape == (2, 8)


def test_one_hot():
    oh = one_hot(torch.tensor([2, 0, 1]), 4)
    assert oh.dtype == torch.float32
    assert torch.equal(oh, torch.tensor([[0, 0, 1, 0], [1, 0, 0, 0], [0, 1, 0, 0]],
                                        dtype=torch.float32))
    assert one_hot(torch.tensor([0, 0]), 0).shape == (2, 0)


def test_forward_shape_errors():
    arch = ArchConfig("mlp", 8, 3, 4)
    params = init_params(arch, seed=0)
    buffers = init_buffers(arch)
    with pytest.raises(DimensionError):
        trunk_forward(arch, params, buffers, torch.zeros((2, 9)))
    with pytest.raises(DimensionError):
        generator_forward(arch, params, buffers, torch.zeros((2, 5)),
                          one_hot(torch.zeros(2, dtype=torch.int64), 3))
    with pytest.raises(DimensionError):
        generator_forward(arch, params, buffers, torch.zeros((2, 4)),
                          one_hot(torch.zeros(2, dtype=torch.int64), 2))


def test_conv_presets_run_end_to_end():
    for preset, dim in (("conv768", 768), ("conv1024", 1024)):
        arch = ArchConfig(preset, dim, 4, 8)
        params = init_params(arch, seed=0)
        buffers = init_buffers(arch)
        z = torch.from_numpy(spawn_rng(2, "conv-e2e").standard_normal((3, 8)).astype(np.float32))
        c = one_hot(torch.tensor([0, 1, 2]), 4)
        with torch.no_grad():
            fake = generator_forward(arch, params, buffers, z, c, training=True)
            assert fake.shape == (3, dim)
            assert float(fake.abs().max()) <= TANH_CLIP
            feats = trunk_forward(arch, params, buffers, fake, training=True)
            assert feats.shape == (3, 768, 16)
            d = d_forward(arch, params, feats)
            q = q_forward(arch, params, buffers, fake, training=True)
        assert d.shape == (3,)
        assert torch.all((d > 0) & (d < 1))
        assert q.shape == (3, 4)
        assert torch.allclose(q.sum(1), torch.ones(3), atol=1e-5)


def test_batch_norm_running_stats_update_only_on_request():
    arch = ArchConfig("conv768", 768, 2, 4)
    params = init_params(arch, seed=0)
    buffers = init_buffers(arch)
    before = {k: v.clone() for k, v in buffers.items()}
    t = torch.from_numpy(
        spawn_rng(5, "bn").uniform(-0.9, 0.9, (4, 768)).astype(np.float32))
    with torch.no_grad():
        trunk_forward(arch, params, buffers, t, training=True, update_stats=False)
    assert all(torch.equal(buffers[k], before[k]) for k in buffers)
    with torch.no_grad():
        trunk_forward(arch, params, buffers, t, training=True, update_stats=True)
    assert any(not torch.equal(buffers[k], before[k]) for k in buffers)


def test_param_groups_cover_everything_once():
    arch = ArchConfig("mlp", 8, 3, 4)
    groups = param_groups(arch)
    names = [n for g in groups.values() for n in g]
    assert sorted(names) == sorted(param_shapes(arch))
    assert groups["d_head"] == ["d_head.w", "d_head.b"]
    assert groups["q_head"] == ["q_head.w", "q_head.b"]
    connected = ArchConfig("mlp", 8, 0, 4, disconnected=False)
    assert param_groups(connected)["q_head"] == []
