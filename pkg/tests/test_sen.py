import numpy as np
import pytest

from oocstance import neuralcore as nc
from oocstance import sen
from oocstance.neuralcore import BatchNormState, Param, Tensor


def _head(kind="sen", c_in=5, e_in=6, d=4, seed=0, **kw):
    return sen.HEADS[kind](kind, np.random.default_rng(seed), c_in, e_in, d, **kw)


def _inputs(b=3, m=5, c_in=5, e_in=6, seed=1):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(b, c_in)), rng.normal(size=(b, m, e_in))


def test_project_claim_zero_and_identity():
    proj = sen.Projections.create("p", np.random.default_rng(0), 3, 3, 3)
    assert not nc.as_tensor(sen.project_claim(np.zeros((1, 3)), proj).data).data.any()
    proj.Wc.data = np.eye(3)
    x = np.array([[0.5, 1.0, 2.0]])
    np.testing.assert_allclose(sen.project_claim(x, proj).data, x)


def test_project_claim_random_vs_matrix():
    rng = np.random.default_rng(3)
    proj = sen.Projections.create("p", rng, 4, 4, 3)
    proj.bc.data = rng.normal(size=3)
    x = rng.normal(size=(2, 4))
    want = np.maximum(0, x @ proj.Wc.data.T + proj.bc.data)
    np.testing.assert_allclose(sen.project_claim(x, proj).data, want)


def test_project_evidence_shapes():
    proj = sen.Projections.create("p", np.random.default_rng(0), 3, 8, 4)
    k, v = sen.project_evidence(np.zeros((1, 0, 8)), proj)
    assert k.shape == (1, 0, 4) and v.shape == (1, 0, 4)
    k, v = sen.project_evidence(np.ones((1, 1, 8)), proj)
    assert k.shape == v.shape == (1, 1, 4)
    with pytest.raises(ValueError):
        sen.project_evidence(np.ones((1, 1, 7)), proj)


def _bn(d):
    return BatchNormState.create("bn", d)


def test_single_member_cluster():
    rng = np.random.default_rng(0)
    hc = Tensor(rng.random((1, 3)))
    keys, values = Tensor(rng.random((1, 2, 3))), Tensor(rng.random((1, 2, 3)))
    mask = np.array([[False, True]])
    rep, alpha = sen.cluster_attention(hc, keys, values, mask, _bn(3), train=False)
    np.testing.assert_allclose(alpha.data, [[0.0, 1.0]])
    want = nc.batchnorm(Tensor(values.data[:, 1] + hc.data), _bn(3), train=False).data
    np.testing.assert_allclose(rep.data, want)


def test_identical_keys_equal_weights():
    hc = Tensor(np.ones((1, 2)))
    keys = Tensor(np.ones((1, 2, 2)))
    values = Tensor(np.array([[[1.0, 0.0], [0.0, 1.0]]]))
    _, alpha = sen.cluster_attention(hc, keys, values, np.ones((1, 2), bool), _bn(2), False)
    np.testing.assert_allclose(alpha.data, [[0.5, 0.5]])


def test_empty_cluster_is_bn_of_claim():
    rng = np.random.default_rng(1)
    hc = Tensor(rng.random((4, 3)))
    keys, values = Tensor(rng.random((4, 2, 3))), Tensor(rng.random((4, 2, 3)))
    bn1, bn2 = _bn(3), _bn(3)
    rep, alpha = sen.cluster_attention(hc, keys, values, np.zeros((4, 2), bool), bn1, True)
    np.testing.assert_allclose(rep.data, nc.batchnorm(hc, bn2, True).data, atol=1e-12)
    assert not alpha.data.any()


def test_attention_weights_sum_to_one():
    head = _head()
    claim, ev = _inputs()
    rng = np.random.default_rng(5)
    masks = {c: rng.random((3, 5)) < 0.6 for c in sen.CLUSTERS}
    _, weights = head.forward(claim, ev, masks, train=True)
    for c in sen.CLUSTERS:
        for row, m in zip(weights[c], masks[c]):
            if m.any():
                assert abs(row[m].sum() - 1) < 1e-9
                assert np.all(row[m] > 0)
            assert not row[~m].any()


def test_permutation_within_cluster():
    head = _head()
    claim, ev = _inputs(b=2)
    masks = {"suc": np.array([[1, 1, 1, 0, 0], [1, 0, 1, 0, 1]], bool)}
    masks["rec"] = masks["suc"].copy()
    masks["coc"] = ~masks["suc"]
    out1, _ = head.forward(claim, ev, masks, train=True)
    perm = [2, 0, 1, 4, 3]
    pmasks = {k: v[:, perm] for k, v in masks.items()}
    out2, _ = head.forward(claim, ev[:, perm], pmasks, train=True)
    np.testing.assert_allclose(out1.data, out2.data, atol=1e-9)


def test_no_evidence_depends_only_on_claim():
    head = _head()
    claim, ev = _inputs(b=2)
    empty = {c: np.zeros((2, 5), bool) for c in sen.CLUSTERS}
    out1, _ = head.forward(claim, ev, empty, train=True)
    out2, _ = head.forward(claim, ev * 100 + 3, empty, train=True)
    np.testing.assert_allclose(out1.data, out2.data)


def test_memory_equals_single_cluster_attention():
    claim, ev = _inputs(b=3)
    mem = _head("memory", seed=7)
    full = _head("sen", seed=7)
    # share the projections and attention stage
    full.proj = mem.proj
    mask = np.array([[1, 1, 1, 1, 0], [1, 0, 0, 0, 0], [0, 0, 0, 0, 0]], bool)
    m_out, m_w = sen.memory_forward(claim, ev, mask, mem, train=True)
    hc = sen.project_claim(claim, full.proj)
    keys, values = sen.project_evidence(ev, full.proj)
    rep, alpha = sen.cluster_attention(hc, keys, values, mask, full.bn["suc"], True)
    np.testing.assert_allclose(rep.data, m_out.data, atol=1e-9)
    np.testing.assert_allclose(alpha.data, m_w["all"], atol=1e-9)


def test_memory_no_evidence_and_single():
    mem = _head("memory", c_in=3, e_in=3, d=3)
    mem.proj.Wc.data = np.eye(3)
    mem.proj.Wv.data = np.eye(3)
    claim = np.array([[1.0, 2.0, 3.0]])
    ev = np.array([[[0.5, 0.5, 0.5]]])
    out, _ = sen.memory_forward(claim, ev, np.zeros((1, 1), bool), mem)
    np.testing.assert_allclose(out.data, claim / np.sqrt(1 + 1e-5))
    out, _ = sen.memory_forward(claim, ev, np.ones((1, 1), bool), mem)
    np.testing.assert_allclose(out.data, (claim + 0.5) / np.sqrt(1 + 1e-5))


def test_fuse_zero_clusters_gives_relu_claim():
    d = 2
    W = Param("W", np.random.default_rng(0).normal(size=(d, 3 * d)))
    b = Param("b", np.zeros(d))
    hc = Tensor([[1.0, -1.0]])
    z = Tensor(np.zeros((1, d)))
    np.testing.assert_allclose(sen.fuse([z, z, z], hc, "concat", W, b).data, [[1.0, 0.0]])


def test_fuse_concat_vs_hand():
    W = np.arange(12.0).reshape(2, 6) / 10
    b = np.array([0.1, -5.0])
    reps = [Tensor([[1.0, 2.0]]), Tensor([[0.0, -1.0]]), Tensor([[3.0, 0.5]])]
    hc = Tensor([[0.2, 0.3]])
    h = np.array([1.0, 2.0, 0.0, -1.0, 3.0, 0.5])
    want = np.maximum(0, W @ h + b + hc.data[0])
    got = sen.fuse(reps, hc, "concat", Param("W", W), Param("b", b)).data[0]
    np.testing.assert_allclose(got, want)


def test_reductions():
    reps = [Tensor([[1.0, 0.0]]), Tensor([[0.0, 1.0]]), Tensor([[0.5, 0.5]])]
    np.testing.assert_allclose(sen.reduce_clusters(reps, "max_pool").data, [[1, 1]])
    np.testing.assert_allclose(sen.reduce_clusters(reps, "avg_pool").data, [[0.5, 0.5]])
    np.testing.assert_allclose(sen.reduce_clusters(reps, "elementwise_mul").data, [[0, 0]])
    assert sen.reduce_clusters(reps, "all_with_fc").shape == (1, 6)


@pytest.mark.parametrize("strategy", sen.FUSION_STRATEGIES)
def test_strategies_run_and_check_width(strategy):
    head = _head(fusion=strategy)
    claim, ev = _inputs(b=2)
    masks = {c: np.ones((2, 5), bool) for c in sen.CLUSTERS}
    out, _ = head.forward(claim, ev, masks, True)
    assert out.shape == (2, 4)
    bad = Param("W", np.zeros((4, 5)))
    with pytest.raises(ValueError):
        sen.fuse([out, out, out], out, strategy, bad, Param("b", np.zeros(4)))


def test_signed_single_evidence():
    hc = Tensor([[1.0, 2.0]])
    keys = Tensor([[[0.3, 0.1]]])
    v = np.array([[[0.5, -1.0]]])
    W = Param("W", np.eye(2, 4))
    W2 = Param("W2", np.hstack([np.zeros((2, 2)), np.eye(2)]))
    b = Param("b", np.zeros(2))
    mask = np.ones((1, 1), bool)
    pos, _ = sen.signed_attention_forward(hc, keys, Tensor(v), mask, W, b)
    neg, _ = sen.signed_attention_forward(hc, keys, Tensor(v), mask, W2, b)
    np.testing.assert_allclose(pos.data, v[:, 0] + hc.data)
    np.testing.assert_allclose(neg.data, -v[:, 0] + hc.data)


def test_signed_symmetric_keys():
    hc = Tensor([[1.0, 1.0]])
    keys = Tensor(np.ones((1, 3, 2)))
    _, w = sen.signed_attention_forward(
        hc, keys, Tensor(np.ones((1, 3, 2))), np.ones((1, 3), bool),
        Param("W", np.eye(2, 4)), Param("b", np.zeros(2)),
    )
    np.testing.assert_allclose(w["positive"], 1 / 3)
    np.testing.assert_allclose(w["negative"], 1 / 3)


def test_signed_random_vs_formula():
    rng = np.random.default_rng(8)
    hc, k, v = rng.normal(size=(1, 3)), rng.normal(size=(1, 4, 3)), rng.normal(size=(1, 4, 3))
    W, b = rng.normal(size=(3, 6)), rng.normal(size=3)
    s = k[0] @ hc[0]
    ap = np.exp(s) / np.exp(s).sum()
    an = np.exp(-s) / np.exp(-s).sum()
    want = W @ np.concatenate([ap @ v[0] + hc[0], -(an @ v[0]) + hc[0]]) + b
    got, _ = sen.signed_attention_forward(
        Tensor(hc), Tensor(k), Tensor(v), np.ones((1, 4), bool), Param("W", W), Param("b", b)
    )
    np.testing.assert_allclose(got.data[0], want)


def test_arith_identities():
    hc = Tensor([[2.0, -3.0]])
    Ws = Param("Ws", np.eye(2))
    W = Param("W", np.eye(2, 4))
    W_second = Param("W2", np.hstack([np.zeros((2, 2)), np.eye(2)]))
    b = Param("b", np.zeros(2))
    first = sen.stance_arith_forward(hc, Tensor([[1.0, 1.0]]), Ws, W, b)
    np.testing.assert_allclose(first.data, hc.data)
    second = sen.stance_arith_forward(hc, hc, Ws, W_second, b)
    np.testing.assert_allclose(second.data, 0)


def test_arith_random_vs_formula():
    rng = np.random.default_rng(2)
    hc, pooled = rng.normal(size=(1, 3)), rng.normal(size=(1, 3))
    Ws, W, b = rng.normal(size=(3, 3)), rng.normal(size=(3, 6)), rng.normal(size=3)
    p = Ws @ pooled[0]
    want = W @ np.concatenate([p * hc[0], p - hc[0]]) + b
    got = sen.stance_arith_forward(Tensor(hc), Tensor(pooled), Param("Ws", Ws), Param("W", W), Param("b", b))
    np.testing.assert_allclose(got.data[0], want)


@pytest.mark.parametrize("kind", ["sen", "memory", "signed", "arith"])
def test_head_gradients(kind):
    head = _head(kind, seed=3)
    claim, ev = _inputs(b=4, seed=4)
    rng = np.random.default_rng(6)
    masks = {c: rng.random((4, 5)) < 0.6 for c in sen.CLUSTERS}
    masks["all"] = np.ones((4, 5), bool)
    target = rng.normal(size=(4, 4))

    def loss():
        out, _ = head.forward(claim, ev, masks, True)
        return nc.sum_(out * Tensor(target))

    assert nc.check_gradients(loss, head.params()) < 1e-4
