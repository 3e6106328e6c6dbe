import numpy as np
import pytest

from gridnav import nn


def rand_inputs(arch, batch, seed=0, dtype=np.float64):
    rng = np.random.default_rng(seed)
    frames = rng.uniform(-1, 1, (batch, arch.frame_size, arch.frame_size)).astype(dtype)
    rasters = rng.uniform(-1, 1, (batch, arch.map_cells)).astype(dtype)
    return frames, rasters


class TestArchitecture:
    def test_production_spatial_chain(self):
        arch = nn.ArchitectureSpec()
        assert arch.frame_size == 84
        size = arch.frame_size
        for _ in range(3):
            size //= 2
        assert size == 10 == arch.pooled_size  # 84 -> 42 -> 21 -> 10
        assert arch.flatten_size == 10 * 10 * 64 == 6400

    def test_production_feature_widths(self):
        arch = nn.ArchitectureSpec()
        assert arch.image_features == 10
        assert arch.map_features == 100
        assert arch.feature_width == 110
        assert arch.num_actions == 4
        assert arch.dropout_rate == 0.5
        assert arch.conv_channels == (32, 64, 64)
        assert arch.conv_kernels == (8, 4, 3)
        assert arch.dense1_units == 256

    def test_production_parameter_shapes(self):
        net = nn.init_network(nn.ArchitectureSpec(), seed=0)
        p = net.params
        assert p["conv1_k"].shape == (8, 8, 1, 32)
        assert p["conv2_k"].shape == (4, 4, 32, 64)
        assert p["conv3_k"].shape == (3, 3, 64, 64)
        assert p["dense1_w"].shape == (6400, 256)
        assert p["dense2_w"].shape == (256, 10)
        assert p["map_w"].shape == (100, 100)
        assert p["map_slope"].shape == ()
        assert p["head_w"].shape == (110, 4)

    def test_recurrent_cell_width_matches_concat(self):
        net = nn.init_network(nn.ArchitectureSpec(recurrent=True), seed=0)
        assert net.params["lstm_wx"].shape == (110, 440)
        assert net.params["lstm_wh"].shape == (110, 440)
        assert net.params["lstm_b"].shape == (440,)


class TestForward:
    def test_zero_weights_yield_output_biases(self, tiny_arch):
        net = nn.init_network(tiny_arch, seed=0, dtype=np.float64)
        for key in net.params:
            net.params[key] = np.zeros_like(net.params[key])
        net.params["head_b"] = np.array([0.1, -0.2, 0.3, 0.4])
        frames, rasters = rand_inputs(tiny_arch, 3)
        q = nn.forward(net, frames, rasters)
        assert np.allclose(q, np.tile([0.1, -0.2, 0.3, 0.4], (3, 1)))

    def test_eval_mode_is_deterministic(self, tiny_arch):
        net = nn.init_network(tiny_arch, seed=1)
        frames, rasters = rand_inputs(tiny_arch, 4)
        a = nn.forward(net, frames, rasters, mode="eval")
        b = nn.forward(net, frames, rasters, mode="eval")
        assert np.array_equal(a, b)

    def test_train_mode_dropout_is_seeded(self, tiny_arch):
        net = nn.init_network(tiny_arch, seed=1)
        frames, rasters = rand_inputs(tiny_arch, 4)
        a = nn.forward(net, frames, rasters, mode="train", dropout_seed=3)
        b = nn.forward(net, frames, rasters, mode="train", dropout_seed=3)
        c = nn.forward(net, frames, rasters, mode="train", dropout_seed=4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_map_input_changes_the_output(self, tiny_arch):
        net = nn.init_network(tiny_arch, seed=2)
        frames, rasters = rand_inputs(tiny_arch, 2)
        q1 = nn.forward(net, frames, rasters)
        rasters2 = rasters.copy()
        rasters2[:, 0] += 0.5
        q2 = nn.forward(net, frames, rasters2)
        assert not np.allclose(q1, q2)

    def test_shape_mismatch_rejected(self, tiny_arch):
        net = nn.init_network(tiny_arch, seed=0)
        frames, rasters = rand_inputs(tiny_arch, 2)
        with pytest.raises(ValueError):
            nn.forward(net, frames[:, :-1, :], rasters)
        with pytest.raises(ValueError):
            nn.forward(net, frames, rasters[:, :-1])
        with pytest.raises(ValueError):
            nn.forward(net, frames, rasters, mode="predict")

    def test_feature_split_matches_full_forward(self, tiny_arch):
        net = nn.init_network(tiny_arch, seed=3)
        frames, rasters = rand_inputs(tiny_arch, 5)
        feats = nn.image_features(net, frames)
        assert feats.shape == (5, tiny_arch.image_features)
        q_split = nn.q_from_features(net, feats, rasters)
        q_full = nn.forward(net, frames, rasters, mode="eval")
        assert np.allclose(q_split, q_full)

    def test_chunking_is_invisible(self, tiny_arch):
        net = nn.init_network(tiny_arch, seed=4)
        frames, rasters = rand_inputs(tiny_arch, 7)  # not a multiple of the chunk
        q = nn.forward(net, frames, rasters)
        singles = np.concatenate(
            [nn.forward(net, frames[i : i + 1], rasters[i : i + 1]) for i in range(7)]
        )
        assert np.allclose(q, singles)


class TestRecurrent:
    def test_single_step_matches_longer_sequence_prefix(self, tiny_recurrent_arch):
        net = nn.init_network(tiny_recurrent_arch, seed=0, dtype=np.float64)
        rng = np.random.default_rng(1)
        frames = rng.uniform(-1, 1, (3, 2, 8, 8))
        rasters = rng.uniform(-1, 1, (3, 2, 4))
        q_full, _, _ = nn.forward_sequence(net, frames, rasters)
        q_one, _, _ = nn.forward_sequence(net, frames[:1], rasters[:1])
        assert np.allclose(q_full[0], q_one[0])

    def test_hidden_state_carries_across_calls(self, tiny_recurrent_arch):
        net = nn.init_network(tiny_recurrent_arch, seed=0, dtype=np.float64)
        rng = np.random.default_rng(2)
        frames = rng.uniform(-1, 1, (4, 1, 8, 8))
        rasters = rng.uniform(-1, 1, (4, 1, 4))
        q_full, _, _ = nn.forward_sequence(net, frames, rasters)
        _, hidden, _ = nn.forward_sequence(net, frames[:2], rasters[:2])
        q_rest, _, _ = nn.forward_sequence(net, frames[2:], rasters[2:], hidden=hidden)
        assert np.allclose(q_full[2:], q_rest)

    def test_silenced_memory_makes_steps_independent(self, tiny_recurrent_arch):
        # Zeroed recurrent weights alone still leak history through the cell
        # state; shutting the forget gate kills that path too.
        net = nn.init_network(tiny_recurrent_arch, seed=0, dtype=np.float64)
        width = tiny_recurrent_arch.feature_width
        net.params["lstm_wh"] = np.zeros_like(net.params["lstm_wh"])
        net.params["lstm_b"][width : 2 * width] = -30.0
        rng = np.random.default_rng(3)
        shared = rng.uniform(-1, 1, (1, 1, 8, 8)), rng.uniform(-1, 1, (1, 1, 4))
        hist_a = rng.uniform(-1, 1, (2, 1, 8, 8)), rng.uniform(-1, 1, (2, 1, 4))
        hist_b = rng.uniform(-1, 1, (2, 1, 8, 8)), rng.uniform(-1, 1, (2, 1, 4))
        qa, _, _ = nn.forward_sequence(net, np.concatenate([hist_a[0], shared[0]]),
                                       np.concatenate([hist_a[1], shared[1]]))
        qb, _, _ = nn.forward_sequence(net, np.concatenate([hist_b[0], shared[0]]),
                                       np.concatenate([hist_b[1], shared[1]]))
        assert np.allclose(qa[2], qb[2], atol=1e-9)

    def test_repeated_input_settles_toward_a_fixed_point(self, tiny_recurrent_arch):
        net = nn.init_network(tiny_recurrent_arch, seed=5, dtype=np.float64)
        rng = np.random.default_rng(6)
        frame = rng.uniform(-1, 1, (1, 8, 8))
        raster = rng.uniform(-1, 1, (1, 4))
        frames = np.repeat(frame[None], 8, axis=0)
        rasters = np.repeat(raster[None], 8, axis=0)
        _, _, cache = nn.forward_sequence(net, frames, rasters)
        hs = np.stack([c[1] for c in cache[3][1:]] + [cache[3][-1][1]])
        # consecutive hidden-state deltas shrink as the state settles
        deltas = [np.linalg.norm(hs[t + 1] - hs[t]) for t in range(len(hs) - 1)]
        assert all(d2 <= d1 + 1e-9 for d1, d2 in zip(deltas, deltas[1:]))

    def test_empty_sequence_rejected(self, tiny_recurrent_arch):
        net = nn.init_network(tiny_recurrent_arch, seed=0)
        with pytest.raises(ValueError):
            nn.forward_sequence(net, np.zeros((0, 1, 8, 8)), np.zeros((0, 1, 4)))

    def test_feedforward_and_recurrent_apis_do_not_cross(self, tiny_arch,
                                                          tiny_recurrent_arch):
        ff = nn.init_network(tiny_arch, seed=0)
        rec = nn.init_network(tiny_recurrent_arch, seed=0)
        frames, rasters = rand_inputs(tiny_arch, 2)
        with pytest.raises(ValueError):
            nn.forward_sequence(ff, frames[None], rasters[None])
        with pytest.raises(ValueError):
            nn.forward(rec, frames, rasters)


class TestClone:
    def test_clone_is_isolated(self, tiny_arch):
        net = nn.init_network(tiny_arch, seed=7)
        clone = nn.clone_params(net)
        net.params["head_b"] += 1.0
        assert np.all(clone.params["head_b"] == 0.0)

    def test_clone_of_clone_equals_original(self, tiny_arch):
        net = nn.init_network(tiny_arch, seed=7)
        clone2 = nn.clone_params(nn.clone_params(net))
        for key in net.params:
            assert np.array_equal(clone2.params[key], net.params[key])

    def test_clone_forward_matches(self, tiny_arch):
        net = nn.init_network(tiny_arch, seed=8)
        clone = nn.clone_params(net)
        frames, rasters = rand_inputs(tiny_arch, 3)
        assert np.array_equal(
            nn.forward(net, frames, rasters), nn.forward(clone, frames, rasters)
        )


class TestAdam:
    def test_defaults_match_training_setup(self):
        state = nn.init_adam({"w": np.zeros(3)})
        assert state.learning_rate == 0.001
        assert state.beta1 == 0.9
        assert state.beta2 == 0.999
        assert state.epsilon == 1e-8

    def test_zero_gradient_is_identity(self):
        params = {"w": np.array([1.0, -2.0, 3.0])}
        state = nn.init_adam(params)
        new_params, new_state = nn.adam_step(params, {"w": np.zeros(3)}, state)
        assert np.array_equal(new_params["w"], params["w"])
        assert new_state.step == 1

    def test_first_step_hand_calculation(self):
        # scalar parameter 1.0, gradient 0.5: bias correction makes the very
        # first update lr * g / (|g| + eps) = 0.001
        params = {"w": np.array([1.0])}
        state = nn.init_adam(params)
        new_params, _ = nn.adam_step(params, {"w": np.array([0.5])}, state)
        assert new_params["w"][0] == pytest.approx(1.0 - 0.001 * (0.5 / (0.5 + 1e-8)),
                                                   abs=1e-12)

    def test_constant_gradient_update_magnitude_approaches_lr(self):
        params = {"w": np.array([0.0])}
        state = nn.init_adam(params)
        grad = {"w": np.array([0.37])}
        prev = params["w"][0]
        for _ in range(300):
            params, state = nn.adam_step(params, grad, state)
        step_size = abs(params["w"][0] - prev) / 300
        assert step_size == pytest.approx(0.001, rel=0.05)

    def test_mismatched_keys_rejected(self):
        params = {"w": np.zeros(2)}
        state = nn.init_adam(params)
        with pytest.raises(ValueError):
            nn.adam_step(params, {"v": np.zeros(2)}, state)


class TestLoss:
    def test_equal_pred_and_target_gives_zero(self):
        pred = np.array([[1.0, 2.0, 3.0, 4.0]])
        assert nn.mse_loss(pred, pred, np.array([2])) == 0.0

    def test_single_sample_arithmetic(self):
        pred = np.array([[1.0, 0.0, 0.0, 0.0]])
        target = np.array([0.0])
        assert nn.mse_loss(pred, target, np.array([0])) == 1.0

    def test_mean_over_batch(self):
        pred = np.array([[1.0, 0, 0, 0], [0.0, 0, 0, 0]])
        target = np.array([0.0, 0.0])
        assert nn.mse_loss(pred, target, np.array([0, 0])) == 0.5

    def test_non_taken_actions_do_not_contribute(self):
        pred = np.array([[1.0, 99.0, -99.0, 42.0]])
        target = np.array([1.0])
        assert nn.mse_loss(pred, target, np.array([0])) == 0.0
        _, dpred = nn.mse_loss_grad(pred, target, np.array([0]))
        assert np.all(dpred[:, 1:] == 0)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            nn.mse_loss(np.zeros((0, 4)), np.zeros(0), np.zeros(0, dtype=int))


class TestCheckpoint:
    def test_round_trip_with_adam(self, tmp_path, tiny_arch):
        net = nn.init_network(tiny_arch, seed=9)
        adam = nn.init_adam(net.params)
        grads = {k: np.ones_like(v) * 0.01 for k, v in net.params.items()}
        new_params, adam = nn.adam_step(net.params, grads, adam)
        net = nn.QNetwork(arch=tiny_arch, params=new_params)

        path = tmp_path / "ckpt.npz"
        nn.save_checkpoint(path, net, adam, extra={"rule": "eddqn"})
        restored, adam2, extra = nn.load_checkpoint(path)
        assert extra == {"rule": "eddqn"}
        assert restored.arch == tiny_arch
        for key in net.params:
            assert np.array_equal(restored.params[key], net.params[key])
        assert adam2.step == adam.step
        for key in adam.m:
            assert np.array_equal(adam2.m[key], adam.m[key])
            assert np.array_equal(adam2.v[key], adam.v[key])

    def test_architecture_tag(self, tmp_path, tiny_arch, tiny_recurrent_arch):
        import json
        for arch, tag in ((tiny_arch, "feedforward"), (tiny_recurrent_arch, "recurrent")):
            path = tmp_path / f"{tag}.npz"
            nn.save_checkpoint(path, nn.init_network(arch, seed=0))
            with np.load(path) as data:
                meta = json.loads(bytes(data["meta"]).decode())
            assert meta["architecture"] == tag

    def test_restored_network_predicts_identically(self, tmp_path, tiny_arch):
        net = nn.init_network(tiny_arch, seed=10)
        path = tmp_path / "ckpt.npz"
        nn.save_checkpoint(path, net)
        restored, _, _ = nn.load_checkpoint(path)
        frames, rasters = rand_inputs(tiny_arch, 3)
        assert np.array_equal(
            nn.forward(net, frames, rasters), nn.forward(restored, frames, rasters)
        )
