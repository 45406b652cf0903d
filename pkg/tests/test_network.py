import numpy as np
import pytest
import torch

from csipos.errors import ConfigError, ShapeMismatchError
from csipos.network import ModelConfig, build, count_layers, parameter_count, predict_positions, state_arrays


class TestArchitectureContract:
    def test_default_config_is_16_conv_3_fc(self):
        model = build(ModelConfig(), seed=0)
        assert count_layers(model) == (16, 3)

    def test_counts_follow_the_graph_not_the_config(self):
        cfg = ModelConfig(
            num_dense_blocks=2, layers_per_block=3, include_stem=True,
            input_shape=(16, 8), fc_widths=(16, 8),
        )
        assert count_layers(build(cfg)) == (7, 3)  # 2*3 block convs + stem

    def test_single_hidden_fc(self):
        cfg = ModelConfig(fc_widths=(64,), input_shape=(16, 16), growth_rate=4)
        assert count_layers(build(cfg))[1] == 2

    def test_concatenation_growth(self):
        cfg = ModelConfig(input_shape=(32, 16))
        model = build(cfg)
        for block_channels in model.block_input_channels():
            c0 = block_channels[0]
            assert block_channels == [c0 + i * cfg.growth_rate for i in range(cfg.layers_per_block)]

    def test_block_inputs_chain_through_pooling(self):
        model = build(ModelConfig(input_shape=(32, 16)))
        firsts = [bc[0] for bc in model.block_input_channels()]
        assert firsts == [2, 50, 98, 146]

    def test_same_seed_same_parameters(self):
        cfg = ModelConfig(input_shape=(16, 8), growth_rate=4, fc_widths=(8,))
        a, b = state_arrays(build(cfg, seed=5)), state_arrays(build(cfg, seed=5))
        assert a.keys() == b.keys()
        for key in a:
            assert np.array_equal(a[key], b[key])

    def test_different_seed_different_parameters(self):
        cfg = ModelConfig(input_shape=(16, 8), growth_rate=4, fc_widths=(8,))
        a, b = state_arrays(build(cfg, seed=5)), state_arrays(build(cfg, seed=6))
        assert any(not np.array_equal(a[k], b[k]) for k in a)

    def test_parameter_count_is_config_determined(self):
        cfg = ModelConfig(input_shape=(16, 8))
        assert parameter_count(build(cfg, seed=1)) == parameter_count(build(cfg, seed=999))

    def test_pooled_away_input_rejected(self):
        with pytest.raises(ConfigError):
            build(ModelConfig(num_dense_blocks=4, input_shape=(4, 4)))

    def test_even_kernel_rejected(self):
        with pytest.raises(ConfigError):
            ModelConfig(kernel_size=(2, 2))

    def test_output_dim_fixed(self):
        with pytest.raises(ConfigError):
            ModelConfig(output_dim=3)


class TestForward:
    def test_zero_input_finite_output(self):
        model = build(ModelConfig(), seed=0)
        out = predict_positions(model, np.zeros((1, 64, 100, 2), np.float32))
        assert out.shape == (1, 2)
        assert np.all(np.isfinite(out))

    def test_batch_dimension(self):
        model = build(ModelConfig(input_shape=(16, 8), growth_rate=4, fc_widths=(8,)), seed=0)
        out = predict_positions(model, np.random.default_rng(0).standard_normal((7, 16, 8, 2)))
        assert out.shape == (7, 2)

    def test_inference_determinism(self):
        model = build(ModelConfig(input_shape=(16, 8), growth_rate=4, fc_widths=(8,)), seed=0)
        X = np.random.default_rng(1).standard_normal((4, 16, 8, 2)).astype(np.float32)
        assert np.array_equal(predict_positions(model, X), predict_positions(model, X))

    def test_shape_mismatch(self):
        model = build(ModelConfig(input_shape=(16, 8), growth_rate=4, fc_widths=(8,)), seed=0)
        with pytest.raises(ShapeMismatchError):
            predict_positions(model, np.zeros((2, 8, 16, 2), np.float32))
        with pytest.raises(ShapeMismatchError):
            model(torch.zeros(2, 16, 8, 3))

    def test_antenna_permutation_changes_output(self):
        model = build(ModelConfig(input_shape=(16, 8), growth_rate=4, fc_widths=(8,)), seed=0)
        rng = np.random.default_rng(2)
        X = rng.standard_normal((3, 16, 8, 2)).astype(np.float32)
        perm = rng.permutation(16)
        base = predict_positions(model, X)
        shuffled = predict_positions(model, X[:, perm])
        assert np.max(np.abs(base - shuffled)) > 1e-6

    def test_empty_batch(self):
        model = build(ModelConfig(input_shape=(16, 8), growth_rate=4, fc_widths=(8,)), seed=0)
        assert predict_positions(model, np.zeros((0, 16, 8, 2), np.float32)).shape == (0, 2)
