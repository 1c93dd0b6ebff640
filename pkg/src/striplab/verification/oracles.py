"""Literal-loop reference implementations.

Each function transcribes its formula with explicit Python loops over nested
lists. Nothing here calls into the optimized modules; extractors and scorers
are treated as black boxes supplied by the caller.
"""

import math

import numpy as np


def _arr(x):
    return np.asarray(x, dtype=np.float64)


def oracle_matmul(a, b):
    a, b = _arr(a).tolist(), _arr(b).tolist()
    m, k, n = len(a), len(b), len(b[0])
    out = [[0.0] * n for _ in range(m)]
    for i in range(m):
        for j in range(n):
            s = 0.0
            for p in range(k):
                s += a[i][p] * b[p][j]
            out[i][j] = s
    return np.array(out)


def _sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


def oracle_gap(x):
    x = _arr(x).tolist()
    out = []
    for plane in x:
        s, n = 0.0, 0
        for row in plane:
            for v in row:
                s += v
                n += 1
        out.append(s / n)
    return np.array(out)


def oracle_self_attention(x, w_q, w_k, w_v, scale=False):
    x = _arr(x)
    c, h, w = x.shape
    xl = x.tolist()
    tokens = [[xl[ch][i][j] for ch in range(c)] for i in range(h) for j in range(w)]
    wq, wk, wv = _arr(w_q).tolist(), _arr(w_k).tolist(), _arr(w_v).tolist()

    def project(t, m):
        return [sum(t[a] * m[a][b] for a in range(c)) for b in range(c)]

    q = [project(t, wq) for t in tokens]
    k = [project(t, wk) for t in tokens]
    v = [project(t, wv) for t in tokens]
    n = len(tokens)
    out = np.zeros((c, h, w))
    for i in range(n):
        scores = []
        for j in range(n):
            s = sum(q[i][a] * k[j][a] for a in range(c))
            scores.append(s / math.sqrt(c) if scale else s)
        top = max(scores)
        e = [math.exp(s - top) for s in scores]
        z = sum(e)
        for ch in range(c):
            out[ch, i // w, i % w] = sum(e[j] / z * v[j][ch] for j in range(n))
    return out


def oracle_strip_weights(x, weight, bias):
    g = oracle_gap(x).tolist()
    weight, bias = _arr(weight).tolist(), _arr(bias).tolist()
    return np.array([_sigmoid(sum(weight[k][c] * g[c] for c in range(len(g))) + bias[k])
                     for k in range(len(bias))])


def oracle_strip_apply(x, a, horizontal):
    x = _arr(x)
    c_, h_, w_ = x.shape
    xl, a = x.tolist(), _arr(a).tolist()
    K = len(a)
    half = K // 2
    out = np.zeros(x.shape)
    for c in range(c_):
        for h in range(h_):
            for w in range(w_):
                s = 0.0
                for k in range(K):
                    if horizontal:
                        hh, ww = h, w - half + k
                    else:
                        hh, ww = h - half + k, w
                    if 0 <= hh < h_ and 0 <= ww < w_:
                        s += a[k] * xl[c][hh][ww]
                out[c, h, w] = s
    return out


def oracle_stda(x, wh, bh, wv, bv):
    y = oracle_strip_apply(x, oracle_strip_weights(x, wh, bh), horizontal=True)
    return oracle_strip_apply(y, oracle_strip_weights(y, wv, bv), horizontal=False)


def oracle_frame_pool(x):
    x = _arr(x)
    b_, c_, t_, h_, w_ = x.shape
    out = np.zeros((b_, t_, c_))
    for b in range(b_):
        for t in range(t_):
            for c in range(c_):
                s = 0.0
                for h in range(h_):
                    for w in range(w_):
                        s += x[b, c, t, h, w]
                out[b, t, c] = s / (h_ * w_)
    return out


def _act(name, z):
    if name == "tanh":
        return math.tanh(z)
    if name == "relu":
        return z if z > 0 else 0.0
    return z


def oracle_message_passing(nodes, edges, w_self, w_nbr, bias, activation, layers):
    """``nodes`` is (..., n, C); ``edges`` are zero-based (src, dst) pairs."""
    nodes = _arr(nodes)
    lead = nodes.shape[:-2]
    n, C = nodes.shape[-2:]
    ws, wn, bb = _arr(w_self).tolist(), _arr(w_nbr).tolist(), _arr(bias).tolist()
    out = np.empty(nodes.shape)
    for idx in np.ndindex(*lead):
        h = nodes[idx].tolist()
        for _ in range(layers):
            new = []
            for t in range(n):
                nbrs = [s for s, d in edges if d == t]
                agg = [0.0] * C
                for s in nbrs:
                    for c in range(C):
                        agg[c] += h[s][c]
                if nbrs:
                    agg = [v / len(nbrs) for v in agg]
                row = []
                for i in range(C):
                    z = bb[i]
                    z += sum(ws[i][j] * h[t][j] for j in range(C))
                    z += sum(wn[i][j] * agg[j] for j in range(C))
                    row.append(_act(activation, z))
                new.append(row)
            h = new
        out[idx] = np.array(h).reshape(n, C)
    return out


def oracle_chain_edges(t):
    edges = []
    for i in range(t - 1):
        edges.append((i, i + 1))
        edges.append((i + 1, i))
    return edges


def oracle_gnn_forward(nodes, w_self, w_nbr, bias, activation, layers):
    nodes = _arr(nodes)
    return oracle_message_passing(nodes, oracle_chain_edges(nodes.shape[1]),
                                  w_self, w_nbr, bias, activation, layers)


def oracle_broadcast_add(x, f):
    x = _arr(x)
    out = x.copy()
    b_, c_, t_, h_, w_ = x.shape
    for b in range(b_):
        for c in range(c_):
            for t in range(t_):
                for h in range(h_):
                    for w in range(w_):
                        out[b, c, t, h, w] = x[b, c, t, h, w] + f[b, t, c]
    return out


def oracle_object_branch(x, objects, w_self, w_nbr, bias, activation, layers):
    objects = _arr(objects)
    b_, t_, n_, c_ = objects.shape
    edges = [(i, j) for i in range(n_) for j in range(n_) if i != j]
    refined = oracle_message_passing(objects, edges, w_self, w_nbr, bias, activation, layers)
    g = np.zeros((b_, t_, c_))
    for b in range(b_):
        for t in range(t_):
            for c in range(c_):
                g[b, t, c] = sum(refined[b, t, n, c] for n in range(n_)) / n_
    return oracle_broadcast_add(x, g)


def oracle_tfrm(x, frame_params, objects=None, object_params=None):
    """``frame_params`` / ``object_params`` are (w_self, w_nbr, bias, activation, layers)."""
    f = oracle_gnn_forward(oracle_frame_pool(x), *frame_params)
    out = oracle_broadcast_add(x, f)
    if objects is not None:
        out = oracle_object_branch(out, objects, *object_params)
    return out


def oracle_fuse(audio, tokens, w, b, lam):
    audio, tokens, w, b = (_arr(v).tolist() for v in (audio, tokens, w, b))
    d_a, d_t, n = len(w), len(w[0]), len(tokens)
    out = []
    for i in range(d_a):
        acc = 0.0
        for tok in tokens:
            acc += sum(tok[j] * w[i][j] for j in range(d_t)) + b[i]
        out.append(audio[i] + lam * (acc / n))
    return np.array(out)


def oracle_cosine(a, b):
    a, b = _arr(a).tolist(), _arr(b).tolist()
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))


def _flat(x):
    return _arr(x).reshape(-1).tolist()


def oracle_mse(a, b):
    a, b = _flat(a), _flat(b)
    s = 0.0
    for x, y in zip(a, b):
        s += (x - y) ** 2
    return s / len(a)


def oracle_noise_loss(eps_true, eps_pred):
    return oracle_mse(eps_true, eps_pred)


def oracle_estimate_clean_latent(z_t, eps_pred, alpha_bar_t):
    z, e = _arr(z_t), _arr(eps_pred)
    out = np.empty(z.shape)
    for idx in np.ndindex(*z.shape):
        out[idx] = (z[idx] - math.sqrt(1.0 - alpha_bar_t) * e[idx]) / math.sqrt(alpha_bar_t)
    return out


def oracle_sync_loss(video, audio, scorer, decoder=None):
    return float(scorer(video if decoder is None else decoder(video), audio))


def oracle_lpips_loss(x_hat, x, extractor, layers):
    return sum(oracle_mse(extractor.layer_output(x_hat, l), extractor.layer_output(x, l))
               for l in layers)


def oracle_trepa_loss(clip_hat, clip, encoder):
    return oracle_mse(encoder(clip_hat), encoder(clip))


def oracle_total_loss(components, weights):
    s = 0.0
    for c, w in zip(components, weights):
        s += c * w
    return s
