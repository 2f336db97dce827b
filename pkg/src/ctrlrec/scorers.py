"""Differentiable sequential scorers.

Two production scorers share one contract: embed the (masked) interaction
window, produce a per-slot sequence representation, read the representation
at the last used slot, and score a candidate item by inner product with its
embedding.

- ``attention``: one pre-norm self-attention block with learned positional
  embeddings, causal masking and a position-wise feed-forward layer.
- ``gru``: a single gated recurrent layer run left to right.

A third ``linear`` scorer (sum of masked-embedding dot products) exists for
tests and analytic fixtures: its score is exactly
``sum_t keep_t * <e_t, e_item>``.

Padding slots contribute the zero vector, so revoking a behavior (mask 1)
is indistinguishable from the behavior never having happened.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ContractViolation, InvalidItemError
from .windows import PAD, RELAXED, MaskVector, SequenceWindow, check_mask, keep_coefficients

GRU = "gru"
ATTENTION = "attention"
LINEAR = "linear"
KINDS = (GRU, ATTENTION, LINEAR)

_NEG = -1e30


@dataclass
class ScorerParams:
    """Scorer weights plus the dimensions everything else needs.

    Weights are plain float64 arrays; training wraps them in shared leaf
    tensors (updated in place), inference wraps them in constants so no
    graph is recorded. ``readout_window`` > 1 reads the causal moving
    average of that many trailing per-position states instead of the last
    state alone, which spreads each recommendation's attribution over
    several window slots.
    """

    kind: str
    n_items: int
    dim: int
    max_len: int
    dropout: float = 0.2
    readout_window: int = 1
    weights: dict[str, np.ndarray] = field(default_factory=dict)
    _leaves: dict = field(default_factory=dict, repr=False, compare=False)

    def weight(self, name: str, train: bool = False) -> ad.Tensor:
        if train:
            if name not in self._leaves:
                self._leaves[name] = ad.leaf(self.weights[name])
            return self._leaves[name]
        return ad.Tensor(self.weights[name])

    def leaves(self) -> list[ad.Tensor]:
        return [self.weight(name, train=True) for name in sorted(self.weights)]

    def check_item(self, item: int) -> int:
        if not (0 <= item < self.n_items):
            raise InvalidItemError(f"item {item} outside catalog of {self.n_items}")
        return item

    def copy(self) -> "ScorerParams":
        return ScorerParams(
            kind=self.kind,
            n_items=self.n_items,
            dim=self.dim,
            max_len=self.max_len,
            dropout=self.dropout,
            readout_window=self.readout_window,
            weights={k: v.copy() for k, v in self.weights.items()},
        )

    @property
    def embeddings(self) -> np.ndarray:
        return self.weights["emb"]


def init_params(
    kind: str,
    n_items: int,
    dim: int,
    max_len: int,
    dropout: float = 0.2,
    seed: int = 0,
    readout_window: int | None = None,
) -> ScorerParams:
    if kind not in KINDS:
        raise ContractViolation(f"unknown scorer kind {kind!r}")
    if readout_window is None:
        readout_window = 1
    rng = np.random.default_rng(seed)
    d = dim

    def xavier(fan_in, fan_out):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-s, s, size=(fan_in, fan_out))

    w = {"emb": rng.normal(0.0, 1.0 / np.sqrt(d), size=(n_items, d))}
    if kind == ATTENTION:
        w["pos"] = rng.normal(0.0, 1.0 / np.sqrt(d), size=(max_len, d))
        for name in ("wq", "wk", "wv", "wo", "w1", "w2"):
            w[name] = xavier(d, d)
        for name in ("bq", "bk", "bv", "bo", "c1", "c2"):
            w[name] = np.zeros(d)
        for i in (1, 2, 3):
            w[f"ln{i}_g"] = np.ones(d)
            w[f"ln{i}_b"] = np.zeros(d)
    elif kind == GRU:
        w["wg"] = xavier(d, 3 * d)
        w["bg"] = np.zeros(3 * d)
        w["uzr"] = xavier(d, 2 * d)
        w["un"] = xavier(d, d)
    return ScorerParams(kind=kind, n_items=n_items, dim=d, max_len=max_len,
                        dropout=dropout, readout_window=readout_window, weights=w)


# ---------------------------------------------------------------- forwards

def _masked_inputs(params, ids, inv, train, rng):
    """(B, T, d) tensor of keep-scaled item embeddings."""
    clipped = np.maximum(ids, 0)
    emb = ad.gather_rows(params.weight("emb", train), clipped)
    inv_t = inv if isinstance(inv, ad.Tensor) else ad.Tensor(inv)
    x = ad.mul(emb, ad.expand_last(inv_t))
    return x


def _attention_states(params, ids, inv, train, rng):
    # No input residual into the block output: the per-position state is the
    # attention aggregate itself, so each window slot's influence follows its
    # attention weight instead of the raw last-item embedding dominating the
    # readout.
    p = params
    d = p.dim
    x = _masked_inputs(p, ids, inv, train, rng)
    x = ad.add(x, p.weight("pos", train))
    if train:
        x = ad.dropout(x, p.dropout, rng)

    a = ad.layer_norm(x, p.weight("ln1_g", train), p.weight("ln1_b", train))
    q = ad.add(ad.matmul(a, p.weight("wq", train)), p.weight("bq", train))
    k = ad.add(ad.matmul(a, p.weight("wk", train)), p.weight("bk", train))
    v = ad.add(ad.matmul(a, p.weight("wv", train)), p.weight("bv", train))
    att = ad.mul(ad.matmul(q, ad.transpose_last(k)), 1.0 / np.sqrt(d))
    causal = np.triu(np.full((p.max_len, p.max_len), _NEG), k=1)
    att = ad.add(att, ad.Tensor(causal))
    wts = ad.softmax_last(att)
    if train:
        wts = ad.dropout(wts, p.dropout, rng)
    o = ad.add(ad.matmul(ad.matmul(wts, v), p.weight("wo", train)), p.weight("bo", train))
    if train:
        o = ad.dropout(o, p.dropout, rng)

    f = ad.layer_norm(o, p.weight("ln2_g", train), p.weight("ln2_b", train))
    ff = ad.relu(ad.add(ad.matmul(f, p.weight("w1", train)), p.weight("c1", train)))
    if train:
        ff = ad.dropout(ff, p.dropout, rng)
    ff = ad.add(ad.matmul(ff, p.weight("w2", train)), p.weight("c2", train))
    if train:
        ff = ad.dropout(ff, p.dropout, rng)
    h2 = ad.add(o, ff)
    return ad.layer_norm(h2, p.weight("ln3_g", train), p.weight("ln3_b", train))


def _gru_states(params, ids, inv, train, rng):
    p = params
    d = p.dim
    x = _masked_inputs(p, ids, inv, train, rng)
    if train:
        x = ad.dropout(x, p.dropout, rng)
    gates_in = ad.add(ad.matmul(x, p.weight("wg", train)), p.weight("bg", train))
    uzr = p.weight("uzr", train)
    un = p.weight("un", train)
    batch = ids.shape[0]
    h = ad.Tensor(np.zeros((batch, d)))
    states = []
    for t in range(p.max_len):
        g_t = ad.select_step(gates_in, t)
        zr = ad.add(ad.slice_last(g_t, 0, 2 * d), ad.matmul(h, uzr))
        z = ad.sigmoid(ad.slice_last(zr, 0, d))
        r = ad.sigmoid(ad.slice_last(zr, d, 2 * d))
        n = ad.tanh(ad.add(ad.slice_last(g_t, 2 * d, 3 * d), ad.matmul(ad.mul(r, h), un)))
        # h' = (1 - z) * n + z * h, written as n + z * (h - n)
        h = ad.add(n, ad.mul(z, ad.sub(h, n)))
        states.append(h)
    out = ad.stack_steps(states)
    if train:
        out = ad.dropout(out, p.dropout, rng)
    return out


def _linear_states(params, ids, inv, train, rng):
    return ad.cumsum_time(_masked_inputs(params, ids, inv, train, rng))


_STATE_FNS = {ATTENTION: _attention_states, GRU: _gru_states, LINEAR: _linear_states}


def _readout_matrix(max_len: int, window: int) -> np.ndarray:
    """Causal moving-average operator: row t averages states t-window+1..t."""
    out = np.zeros((max_len, max_len))
    for t in range(max_len):
        lo = max(0, t - window + 1)
        out[t, lo : t + 1] = 1.0 / (t + 1 - lo)
    return out


def forward_states(params, ids, inv, train=False, rng=None) -> ad.Tensor:
    """Per-slot sequence representations, shape (B, T, d).

    ``ids`` is (B, T) int with PAD fill; ``inv`` is (B, T) keep coefficients
    ((1 - mask) with padding slots zeroed), a Tensor when gradients w.r.t.
    the mask are wanted.
    """
    if ids.ndim != 2 or ids.shape[1] != params.max_len:
        raise ContractViolation("ids must be (batch, max_len)")
    states = _STATE_FNS[params.kind](params, ids, inv, train, rng)
    if params.readout_window > 1:
        states = ad.matmul(
            ad.Tensor(_readout_matrix(params.max_len, params.readout_window)),
            states,
        )
    return states


def forward_final(params, ids, inv, lengths, train=False, rng=None) -> ad.Tensor:
    """Representation at each row's last used slot, shape (B, d)."""
    lengths = np.asarray(lengths)
    if np.any(lengths < 1):
        raise ContractViolation("cannot score an empty window")
    states = forward_states(params, ids, inv, train=train, rng=rng)
    return ad.select_positions(states, lengths - 1)


# ---------------------------------------------------------------- scoring

def _prep(window: SequenceWindow, mask: MaskVector):
    check_mask(window, mask)
    ids = window.ids_array()[None, :]
    inv = keep_coefficients(window, mask)[None, :]
    lengths = np.array([window.used])
    return ids, inv, lengths


def window_final_state(params: ScorerParams, window: SequenceWindow, mask: MaskVector) -> np.ndarray:
    if window.capacity != params.max_len:
        raise ContractViolation("window capacity differs from model max_len")
    ids, inv, lengths = _prep(window, mask)
    return forward_final(params, ids, inv, lengths).data[0]


def score(params: ScorerParams, window: SequenceWindow, mask: MaskVector, item: int) -> float:
    """Ranking score of ``item`` for the masked window (inference mode)."""
    params.check_item(item)
    h = window_final_state(params, window, mask)
    return float(h @ params.embeddings[item])


def score_items(params, window, mask, items) -> np.ndarray:
    items = [params.check_item(i) for i in items]
    h = window_final_state(params, window, mask)
    return params.embeddings[np.asarray(items, dtype=np.int64)] @ h


def all_scores(params, window, mask) -> np.ndarray:
    """Scores for every catalog item, shape (n_items,)."""
    h = window_final_state(params, window, mask)
    return params.embeddings @ h


def score_gradient(params, window, mask, items):
    """Scores and exact d(score)/d(mask) rows for a relaxed mask.

    Returns ``(scores, grads)`` with scores shape (k,) and grads shape
    (k, capacity); gradient entries at padding slots are exactly zero.
    """
    if mask.mode != RELAXED:
        raise ContractViolation("score_gradient requires a relaxed-mode mask")
    check_mask(window, mask)
    items = [params.check_item(i) for i in items]
    ids = window.ids_array()[None, :]
    real = (ids != PAD).astype(np.float64)
    m = ad.leaf(mask.values.copy())
    inv = ad.mul(ad.sub(1.0, ad.reshape(m, (1, len(mask)))), ad.Tensor(real))
    final = forward_final(params, ids, inv, np.array([window.used]))
    scores = np.empty(len(items))
    grads = np.empty((len(items), len(mask)))
    for row, item in enumerate(items):
        s = ad.tsum(ad.mul(final, ad.Tensor(params.embeddings[item][None, :])))
        scores[row] = s.data
        ad.backward(s, zero=True)
        grads[row] = m.grad
    return scores, grads
