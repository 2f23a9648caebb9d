"""Attention block: reduction property, score algebra, gradients."""

import numpy as np
import pytest

from naada.attention import (
    AttentionConfig,
    AttentionParams,
    attention_score_matrices,
    init_attention,
    nasa_attention,
    standard_attention,
)
from naada.gradcheck import assert_gradients_match
from naada.noisemap import noise_map
from naada.tensor import Tensor


def _params_and_input(channels=16, heads=4, hw=(6, 6), seed=0, gamma=0.0, batch=1):
    rng = np.random.default_rng(seed)
    cfg = AttentionConfig(channels=channels, heads=heads, mode="noise_aware", gamma_init=gamma)
    p = init_attention(cfg, rng, dtype=np.float64)
    z = Tensor(rng.normal(size=(batch, channels, *hw)))
    return cfg, p, z


def _shared_standard(p):
    return AttentionParams(q_proj=p.q_proj, k_proj=p.k_proj, v_proj=p.v_proj,
                           out_proj=p.out_proj)


class TestConfig:
    def test_head_divisibility_enforced(self):
        with pytest.raises(ValueError):
            AttentionConfig(channels=10, heads=4)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            AttentionConfig(channels=8, heads=4, mode="spooky")

    def test_standard_init_has_no_noise_path(self):
        rng = np.random.default_rng(0)
        p = init_attention(AttentionConfig(8, 4, mode="standard"), rng)
        assert p.noise_q_proj is None and p.gamma is None


class TestReduction:
    def test_gamma_zero_equals_standard(self):
        for seed in range(5):
            cfg, p, z = _params_and_input(seed=seed, gamma=0.0)
            psi = noise_map(z)
            a = nasa_attention(z, psi, p, cfg)
            cfg_std = AttentionConfig(cfg.channels, cfg.heads, mode="standard")
            b = standard_attention(z, _shared_standard(p), cfg_std)
            assert np.abs(a.data - b.data).max() < 1e-12

    def test_constant_input_zero_bias_noise_query_is_inert(self):
        # constant input: every token is identical, so keys are identical
        # and the noise scores are constant along each softmax row; both
        # modes collapse to exactly uniform attention over identical values
        cfg, p, _ = _params_and_input(gamma=1.7)
        p.noise_q_proj.bias.data[:] = 0.0
        z = Tensor(np.full((1, cfg.channels, 5, 5), 0.42))
        a = nasa_attention(z, noise_map(z), p, cfg)
        cfg_std = AttentionConfig(cfg.channels, cfg.heads, mode="standard")
        b = standard_attention(z, _shared_standard(p), cfg_std)
        np.testing.assert_array_equal(a.data, b.data)


class TestScores:
    def test_rows_are_probability_distributions(self):
        for mode, gamma in (("standard", 0.0), ("noise_aware", 0.8)):
            cfg, p, z = _params_and_input(seed=3, gamma=gamma)
            cfg = AttentionConfig(cfg.channels, cfg.heads, mode=mode, gamma_init=gamma)
            if mode == "standard":
                p = _shared_standard(p)
            _, attn = attention_score_matrices(z, p, cfg)
            assert attn.min() >= 0.0
            np.testing.assert_allclose(attn.sum(axis=-1), 1.0, atol=1e-6)

    def test_score_distance_identity(self):
        # || S_nasa - S_std ||_F == |gamma| * || scaled noise scores ||_F
        cfg, p, z = _params_and_input(seed=4, gamma=-0.6)
        s_nasa, _ = attention_score_matrices(z, p, cfg)
        cfg_std = AttentionConfig(cfg.channels, cfg.heads, mode="standard")
        s_std, _ = attention_score_matrices(z, _shared_standard(p), cfg_std)

        gamma = p.gamma.item()
        p.gamma.data[...] = 1.0  # re-read the noise term alone
        s_unit, _ = attention_score_matrices(z, p, cfg)
        noise_term = s_unit - s_std
        lhs = np.linalg.norm(s_nasa - s_std)
        rhs = abs(gamma) * np.linalg.norm(noise_term)
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_single_token_attends_to_itself(self):
        cfg, p, _ = _params_and_input(hw=(1, 1), gamma=0.3)
        rng = np.random.default_rng(9)
        z = Tensor(rng.normal(size=(1, cfg.channels, 1, 1)))
        _, attn = attention_score_matrices(z, p, cfg)
        np.testing.assert_allclose(attn, 1.0, atol=1e-12)

    def test_identical_tokens_get_identical_outputs(self):
        cfg, p, _ = _params_and_input(hw=(2, 1))
        rng = np.random.default_rng(10)
        token = rng.normal(size=(1, cfg.channels, 1, 1))
        z = Tensor(np.tile(token, (1, 1, 2, 1)))
        out = standard_attention(z, _shared_standard(p),
                                 AttentionConfig(cfg.channels, cfg.heads, "standard")).data
        np.testing.assert_allclose(out[0, :, 0, 0], out[0, :, 1, 0], atol=1e-12)


class TestPermutationConsistency:
    def test_token_permutation_permutes_outputs(self):
        cfg, p, z = _params_and_input(seed=5, gamma=0.4, hw=(3, 2))
        psi = noise_map(z)
        out = nasa_attention(z, psi, p, cfg).data

        rng = np.random.default_rng(6)
        perm = rng.permutation(6)
        b, m, h, w = z.shape

        def permute(t):
            flat = t.reshape(b, m, h * w)[:, :, perm]
            return flat.reshape(b, m, h, w)

        # permute tokens of z and psi identically; noise_map itself is not
        # permutation-equivariant (it is spatial), so psi is carried along
        zp = Tensor(permute(z.data))
        psip = Tensor(permute(psi.data))
        outp = nasa_attention(zp, psip, p, cfg).data
        np.testing.assert_allclose(outp, permute(out), atol=1e-10)


class TestShapesAndErrors:
    def test_shape_contract(self):
        cfg, p, _ = _params_and_input(channels=64, heads=8, hw=(8, 8))
        rng = np.random.default_rng(11)
        z = Tensor(rng.normal(size=(2, 64, 8, 8)))
        out = nasa_attention(z, noise_map(z), p, cfg)
        assert out.shape == (2, 64, 8, 8)

    def test_noise_map_shape_mismatch_raises(self):
        cfg, p, z = _params_and_input()
        with pytest.raises(ValueError):
            nasa_attention(z, Tensor(np.zeros((1, cfg.channels, 2, 2))), p, cfg)

    def test_standard_params_cannot_run_noise_aware(self):
        cfg, p, z = _params_and_input()
        with pytest.raises(ValueError):
            nasa_attention(z, noise_map(z), _shared_standard(p), cfg)


class TestGradients:
    def test_gamma_gradient(self):
        cfg, p, _ = _params_and_input(channels=16, heads=4, gamma=0.2)
        rng = np.random.default_rng(12)
        z = Tensor(rng.normal(size=(1, 16, 6, 6)), requires_grad=True, dtype=np.float64)

        def loss():
            return (nasa_attention(z, noise_map(z), p, cfg) ** 2).sum()

        errs = assert_gradients_match(loss, {"gamma": p.gamma})
        assert errs["gamma"] < 1e-4

    def test_full_block_gradients_including_psi_path(self):
        cfg, p, _ = _params_and_input(channels=8, heads=2, hw=(4, 4), gamma=0.5)
        rng = np.random.default_rng(13)
        z = Tensor(rng.normal(size=(1, 8, 4, 4)), requires_grad=True, dtype=np.float64)

        def loss():
            return (nasa_attention(z, noise_map(z), p, cfg) ** 2).sum()

        tensors = {"z": z, "gamma": p.gamma}
        for name, t in (("q_w", p.q_proj.weight), ("k_w", p.k_proj.weight),
                        ("v_w", p.v_proj.weight), ("nq_w", p.noise_q_proj.weight),
                        ("out_w", p.out_proj.weight), ("q_b", p.q_proj.bias),
                        ("nq_b", p.noise_q_proj.bias), ("out_b", p.out_proj.bias)):
            tensors[name] = t
        assert_gradients_match(loss, tensors, max_coords=24,
                               rng=np.random.default_rng(0))
