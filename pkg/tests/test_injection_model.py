import math
import time

import numpy as np
import pytest
import torch

from kgtextgen.model.batching import Batch
from kgtextgen.model.network import (
    MASK_NEG,
    KnowledgeInjection,
    ModelConfig,
    Seq2SeqTransformer,
    build_joint_mask,
    masked_lm_loss,
    seq2seq_attention_mask,
)

VOCAB = 23


def random_batch(gen: torch.Generator, B=3, S=6, T=5, N=3, L=4, all_expansion=False) -> Batch:
    src_ids = torch.randint(6, VOCAB, (B, S), generator=gen)
    src_ids[:, 0] = 2
    src_len = torch.randint(3, S + 1, (B,), generator=gen)
    src_pad = torch.arange(S)[None] >= src_len[:, None]
    src_ids[src_pad] = 0
    inner = ~src_pad & (torch.arange(S)[None] > 0)
    coin = torch.rand(B, S, generator=gen) < 0.3
    expansion = inner & (coin | all_expansion)
    given = inner & ~expansion
    tgt_ids = torch.randint(6, VOCAB, (B, T), generator=gen)
    tgt_pad = torch.zeros(B, T, dtype=torch.bool)
    tgt_pad[0, T - 1] = True
    tgt_ids[tgt_pad] = 0
    evidence_lens = torch.randint(0, L + 1, (B, N), generator=gen)
    evidence_lens[:, 0] = L
    evidence_ids = torch.randint(6, VOCAB, (B, N, L), generator=gen)
    evidence_ids[torch.arange(L)[None, None] >= evidence_lens[..., None]] = 0
    return Batch(src_ids, src_pad, given, expansion, tgt_ids, tgt_pad, evidence_ids, evidence_lens)


def tiny(**kw) -> Seq2SeqTransformer:
    cfg = dict(vocab_size=VOCAB, d_model=16, n_layers=2, n_heads=2, cs_encoder_hidden=6, seed=0)
    cfg.update(kw)
    return Seq2SeqTransformer(ModelConfig(**cfg)).eval()


# -- config


def test_model_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(vocab_size=10, d_model=10, n_heads=4)
    with pytest.raises(ValueError):
        ModelConfig(vocab_size=0)
    with pytest.raises(ValueError):
        ModelConfig(vocab_size=10, n_layers=2, injection_layer_index=3)
    cfg = ModelConfig(vocab_size=10, d_model=8, n_heads=2)
    assert cfg.d_ff == 32
    assert ModelConfig.from_dict({**cfg.to_dict(), "unknown": 1}) == cfg


# -- masks


def test_seq2seq_mask_layout():
    src_pad = torch.tensor([[False, False, True]])
    tgt_pad = torch.tensor([[False, False]])
    m = seq2seq_attention_mask(src_pad, tgt_pad)[0].int().tolist()
    assert m == [
        [1, 1, 0, 0, 0],
        [1, 1, 0, 0, 0],
        [1, 1, 0, 0, 0],
        [1, 1, 0, 1, 0],
        [1, 1, 0, 1, 1],
    ]


def test_joint_mask_hand_worked():
    # [CLS] dog run sport, where sport is an expansion concept; the third evidence slot is padding
    given = torch.tensor([[False, True, True, False]])
    expansion = torch.tensor([[False, False, False, True]])
    cs_pad = torch.tensor([[False, False, True]])
    n = MASK_NEG
    expected = torch.tensor([[[n, n, n], [0.0, 0.0, n], [0.0, 0.0, n], [n, n, n]]])
    assert torch.equal(build_joint_mask(given, expansion, cs_pad), expected)


def test_joint_mask_trivial_cases():
    given = torch.ones(2, 3, dtype=torch.bool)
    none = torch.zeros(2, 3, dtype=torch.bool)
    assert torch.equal(build_joint_mask(given, none, torch.zeros(2, 4, dtype=torch.bool)), torch.zeros(2, 3, 4))
    assert bool((build_joint_mask(none, given, torch.zeros(2, 4, dtype=torch.bool)) == MASK_NEG).all())
    with pytest.raises(ValueError):
        build_joint_mask(given, given, torch.zeros(2, 4, dtype=torch.bool))
    with pytest.raises(ValueError):
        build_joint_mask(given, none[:, :2], torch.zeros(2, 4, dtype=torch.bool))


# -- injection layer


def oracle_inject(layer: KnowledgeInjection, h_hid, cs, M):
    """Straight-line numpy version of the three injection equations."""
    h, c, m = (t.detach().double().numpy() for t in (h_hid, cs, M))
    p = {k: v.detach().double().numpy() for k, v in layer.state_dict().items()}
    Q = h @ p["q.weight"].T + p["q.bias"]
    K = c @ p["k.weight"].T + p["k.bias"]
    V = c @ p["v.weight"].T + p["v.bias"]
    out = np.empty_like(h)
    for b in range(h.shape[0]):
        for i in range(h.shape[1]):
            row = Q[b, i] @ K[b].T + m[b, i]
            if (m[b, i] == 0).any():
                a = np.exp(row - row.max())
                a /= a.sum()
            else:
                a = np.zeros_like(row)
            out[b, i] = p["w.weight"] @ (a @ V[b]) + h[b, i]
    return out


def test_inject_matches_oracle():
    gen = torch.Generator().manual_seed(0)
    for trial in range(20):
        torch.manual_seed(trial)
        layer = KnowledgeInjection(8).double()
        B, S, L = 2, 5, 7
        h = torch.randn(B, S, 8, generator=gen, dtype=torch.float64)
        cs = torch.randn(B, L, 8, generator=gen, dtype=torch.float64)
        given = torch.rand(B, S, generator=gen) < 0.6
        pad = torch.rand(B, L, generator=gen) < 0.3
        M = build_joint_mask(given, torch.zeros_like(given), pad)
        got = layer(h, cs, M).detach().numpy()
        assert np.allclose(got, oracle_inject(layer, h, cs, M), rtol=0, atol=1e-12)


def test_inject_w_zero_is_identity_and_singleton_rows():
    layer = KnowledgeInjection(8)
    with torch.no_grad():
        layer.w.weight.zero_()
    h = torch.randn(2, 4, 8)
    cs = torch.randn(2, 1, 8)
    M = torch.zeros(2, 4, 1)
    out, state = layer(h, cs, M, return_state=True)
    assert torch.equal(out, h)
    assert torch.equal(state.A, torch.ones(2, 4, 1))
    assert out.shape == h.shape


def test_inject_shape_errors():
    layer = KnowledgeInjection(8)
    with pytest.raises(ValueError):
        layer(torch.randn(2, 4, 8), torch.randn(2, 3, 6), torch.zeros(2, 4, 3))
    with pytest.raises(ValueError):
        layer(torch.randn(2, 4, 8), torch.randn(2, 3, 8), torch.zeros(2, 4, 2))


def test_attention_rows_normalized_and_masked_rows_zero():
    gen = torch.Generator().manual_seed(1)
    model = tiny()
    for _ in range(30):
        batch = random_batch(gen)
        _, state = model.hidden_states(batch, "inject")
        live = (state.M == 0).any(-1)
        sums = state.A.sum(-1)
        assert torch.all((sums[live] - 1).abs() <= 1e-6)
        assert torch.all(state.A[~live] == 0)
        # masked keys get no weight at all
        assert torch.all(state.A[state.M != 0] < 1e-30)
        assert torch.equal(state.H_attn[~live], state.H_hid[~live])
        assert state.H_attn.shape == state.H_hid.shape


# -- full model


def test_logits_shape_and_modes():
    model = tiny()
    batch = random_batch(torch.Generator().manual_seed(2))
    for mode in ("baseline", "concat", "inject"):
        assert model(batch, mode).shape == (3, 5, VOCAB)
    with pytest.raises(ValueError):
        model(batch, "fused")


def test_w_zero_ablation_equals_baseline_exactly():
    gen = torch.Generator().manual_seed(3)
    model = tiny()
    with torch.no_grad():
        model.injection.w.weight.zero_()
        for _ in range(20):
            batch = random_batch(gen)
            assert torch.equal(model(batch, "inject"), model(batch, "baseline"))


def test_injection_changes_output_when_active():
    model = tiny()
    batch = random_batch(torch.Generator().manual_seed(4))
    with torch.no_grad():
        assert not torch.equal(model(batch, "inject"), model(batch, "baseline"))


def test_mask_causality_future_target_perturbation():
    gen = torch.Generator().manual_seed(5)
    model = tiny()
    with torch.no_grad():
        for _ in range(50):
            batch = random_batch(gen)
            T = batch.tgt_ids.shape[1]
            t = int(torch.randint(0, T - 1, (1,), generator=gen))
            tgt = batch.tgt_ids.clone()
            tgt[:, t + 1 :] = torch.randint(6, VOCAB, tgt[:, t + 1 :].shape, generator=gen)
            for mode in ("baseline", "inject"):
                a = model(batch, mode)[:, : t + 1]
                b = model(batch.with_target(tgt, batch.tgt_pad), mode)[:, : t + 1]
                assert torch.equal(a, b)


def test_expansion_isolation():
    gen = torch.Generator().manual_seed(6)
    model = tiny()
    k = model.config.injection_layer_index
    with torch.no_grad():
        for _ in range(20):
            batch = random_batch(gen, all_expansion=True)
            inj, state = model.hidden_states(batch, "inject")
            base, _ = model.hidden_states(batch, "baseline")
            S = batch.src_ids.shape[1]
            pos = batch.expansion
            assert bool(pos.any())
            assert torch.equal(inj[k][:, :S][pos], base[k][:, :S][pos])
            assert torch.all(state.A == 0)


def test_empty_evidence_makes_injection_identity():
    batch = random_batch(torch.Generator().manual_seed(7))
    empty = Batch(batch.src_ids, batch.src_pad, batch.given, batch.expansion, batch.tgt_ids, batch.tgt_pad,
                  torch.zeros(3, 0, 0, dtype=torch.long), torch.zeros(3, 0, dtype=torch.long))
    model = tiny()
    enc, pad = model.encode_commonsense(empty.evidence_ids, empty.evidence_lens)
    assert enc.shape == (3, 0, 16) and pad.shape == (3, 0)
    with torch.no_grad():
        assert torch.equal(model(empty, "inject"), model(empty, "baseline"))


def test_encoder_shapes_padding_and_determinism():
    model = tiny()
    ids = torch.tensor([[[7]]])
    enc, pad = model.encode_commonsense(ids, torch.tensor([[1]]))
    assert enc.shape == (1, 1, 16) and pad.tolist() == [[False]]
    batch = random_batch(torch.Generator().manual_seed(8))
    enc1, pad1 = model.encode_commonsense(batch.evidence_ids, batch.evidence_lens)
    enc2, pad2 = tiny().encode_commonsense(batch.evidence_ids, batch.evidence_lens)
    assert torch.equal(enc1, enc2) and torch.equal(pad1, pad2)
    assert enc1.shape == (3, 3 * 4, 16)
    assert torch.all(enc1[pad1] == 0)
    expected_pad = torch.arange(4)[None, None] >= batch.evidence_lens[..., None]
    assert torch.equal(pad1, expected_pad.view(3, 12))


# -- loss


def test_masked_lm_loss_cases():
    V = 7
    target = torch.tensor([[1, 2, 3]])
    mask = torch.tensor([[True, False, True]])
    assert masked_lm_loss(torch.zeros(1, 3, V), target, mask).item() == pytest.approx(math.log(V), abs=1e-6)
    peaked = torch.full((1, 3, V), -50.0).scatter(2, target[..., None], 50.0)
    assert masked_lm_loss(peaked, target, mask).item() < 1e-12
    assert masked_lm_loss(torch.randn(1, 3, V), target, torch.zeros_like(mask)).item() == 0.0


def test_masked_lm_loss_hand_case():
    logits = torch.tensor([[[2.0, 0.0, 0.0], [0.0, math.log(3.0), 0.0], [9.0, -9.0, 1.0]]], dtype=torch.float64)
    target = torch.tensor([[0, 1, 2]])
    mask = torch.tensor([[True, True, False]])
    first = -2.0 + math.log(math.exp(2.0) + 2.0)
    second = math.log(5.0 / 3.0)
    assert masked_lm_loss(logits, target, mask).item() == pytest.approx((first + second) / 2, abs=1e-12)


# -- gradient check


def test_finite_difference_gradients_on_injection_parameters():
    start = time.perf_counter()
    model = Seq2SeqTransformer(
        ModelConfig(vocab_size=VOCAB, d_model=8, n_layers=2, n_heads=2, cs_encoder_hidden=4, seed=0)
    ).double()
    model.eval()
    gen = torch.Generator().manual_seed(9)
    batch = random_batch(gen, B=2, S=5, T=4, N=2, L=3)
    positions = torch.ones_like(batch.tgt_ids, dtype=torch.bool) & ~batch.tgt_pad

    def loss():
        return masked_lm_loss(model(batch, "inject"), batch.tgt_ids, positions)

    params = model.injection_parameters()
    # at the default init the logits are nearly uniform and every gradient sits close to
    # roundoff level; re-draw all weights at a generic scale so the check is informative
    with torch.no_grad():
        for p in model.parameters():
            p.copy_(torch.randn(p.shape, generator=gen, dtype=torch.float64) * 0.5)
    model.zero_grad()
    loss().backward()
    eps = 1e-6
    for name, p in params.items():
        analytic = p.grad.detach().clone().flatten()
        numeric = torch.zeros_like(analytic)
        flat = p.data.view(-1)
        with torch.no_grad():
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + eps
                up = loss().item()
                flat[i] = orig - eps
                down = loss().item()
                flat[i] = orig
                numeric[i] = (up - down) / (2 * eps)
        scale = max(analytic.norm().item(), numeric.norm().item())
        if name == "injection.k.bias":
            # the key bias shifts every score in a row by the same q.b, which softmax ignores
            assert scale < 1e-6
            continue
        assert scale > 1e-4, name
        rel = (analytic - numeric).norm().item() / scale
        assert rel <= 1e-4, (name, rel)
    assert time.perf_counter() - start < 60
