"""Independent reference implementations used to check the library.

Nothing here imports solver or model code from twingrid; each oracle
solves the underlying mathematics a different way.
"""

import itertools
import math

import numpy as np
from scipy.optimize import root


def nodal_power_flow(n, lines, slack_v, s_inj, load_exponents=None):
    """Solve S_k = V_k conj((Y V)_k) for every non-slack bus with a Newton root finder.

    ``lines`` are (from, to, r, x) with 0-based bus indices, bus 0 is slack.
    ``s_inj`` is the constant net complex injection at each bus (pu).
    With ``load_exponents`` (n_p, n_q, p0, q0 per bus), the consumption is
    voltage dependent: S_load = p0 |V|^np + j q0 |V|^nq.
    """
    Y = np.zeros((n, n), dtype=complex)
    for a, b, r, x in lines:
        y = 1.0 / complex(r, x)
        Y[a, a] += y
        Y[b, b] += y
        Y[a, b] -= y
        Y[b, a] -= y

    def mismatch(z):
        v = np.empty(n, dtype=complex)
        v[0] = slack_v
        v[1:] = z[: n - 1] + 1j * z[n - 1:]
        s = v * np.conj(Y @ v)
        target = np.array(s_inj, dtype=complex).copy()
        if load_exponents is not None:
            for k, (npw, nqw, p0, q0) in enumerate(load_exponents):
                vm = abs(v[k])
                target[k] -= p0 * vm ** npw + 1j * q0 * vm ** nqw
        d = (s - target)[1:]
        return np.concatenate([d.real, d.imag])

    z0 = np.concatenate([np.full(n - 1, slack_v.real), np.full(n - 1, slack_v.imag)])
    sol = root(mismatch, z0, method="hybr", tol=1e-14)
    # hybr may report slow progress once it is at round-off; trust the residual
    assert np.max(np.abs(mismatch(sol.x))) < 1e-12, sol.message
    v = np.empty(n, dtype=complex)
    v[0] = slack_v
    v[1:] = sol.x[: n - 1] + 1j * sol.x[n - 1:]
    return v


def two_bus_quadratic(p, q, r, x, v1=1.0):
    """|V2| for a constant-power load via the closed-form quartic in |V2|."""
    b = 2 * (p * r + q * x) - v1 ** 2
    c = (p * p + q * q) * (r * r + x * x)
    u = (-b + math.sqrt(b * b - 4 * c)) / 2
    return math.sqrt(u)


def metrics_closed_form(tp, tn, fp, fn):
    n = tp + tn + fp + fn
    acc = (tp + tn) / n
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return acc, prec, rec, f1


def best_stump(X, y):
    """Exhaustive single-split search: (best weighted Gini, feature, threshold)."""
    def gini(lbl):
        if len(lbl) == 0:
            return 0.0
        p = lbl.mean()
        return 2 * p * (1 - p)

    best = (gini(y), None, None)
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for a, b in zip(vals[:-1], vals[1:]):
            t = (a + b) / 2
            m = X[:, f] <= t
            g = (m.sum() * gini(y[m]) + (~m).sum() * gini(y[~m])) / len(y)
            if g < best[0] - 1e-15:
                best = (g, f, t)
    return best


def linearly_separable(X, y, n_dirs=3600):
    """Scan directions in the plane for one that separates the two classes."""
    for k in range(n_dirs):
        th = math.pi * k / n_dirs
        w = np.array([math.cos(th), math.sin(th)])
        s = X @ w
        if s[y == 0].max() < s[y == 1].min() or s[y == 1].max() < s[y == 0].min():
            return True
    return False


def lstm_numeric_grad(loss_fn, params, h=1e-5):
    """Central finite differences of ``loss_fn(params)`` for every entry."""
    grads = {}
    for k, arr in params.items():
        g = np.zeros_like(arr)
        for ix in itertools.product(*(range(s) for s in arr.shape)):
            old = arr[ix]
            arr[ix] = old + h
            lp = loss_fn(params)
            arr[ix] = old - h
            lm = loss_fn(params)
            arr[ix] = old
            g[ix] = (lp - lm) / (2 * h)
        grads[k] = g
    return grads


def xor_checksum(body: bytes) -> int:
    c = 0
    for b in body:
        c ^= b
    return c


def knn_brute(P, k):
    """Indices of the k nearest other rows of P (Euclidean), ties included."""
    D = np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(-1))
    np.fill_diagonal(D, np.inf)
    out = []
    for i in range(len(P)):
        kth = np.sort(D[i])[k - 1]
        out.append(set(np.flatnonzero(D[i] <= kth + 1e-12).tolist()))
    return out


def on_segment(s, a, b, tol=1e-9):
    """True when s = a + u (b - a) for some u in [0, 1]."""
    d = b - a
    dd = float(d @ d)
    if dd == 0:
        return bool(np.allclose(s, a, atol=tol))
    u = float((s - a) @ d) / dd
    return -tol <= u <= 1 + tol and bool(np.allclose(a + u * d, s, atol=tol))


def smote_member(s, P, neighbors):
    """Membership test: s lies on a segment between a minority point and one of its k neighbours."""
    return any(on_segment(s, P[i], P[j]) for i in range(len(P)) for j in neighbors[i])


def symmetric_xor(seed, n=100):
    """XOR data mirrored into all four quadrants.

    Every point (a, b) comes with (a, -b) of the opposite label, so any cut
    on one axis leaves both sides exactly balanced.
    """
    rng = np.random.default_rng(seed)
    P = rng.uniform(0.05, 1.0, size=(n, 2))
    X = np.vstack([P * s for s in ((1, 1), (-1, 1), (1, -1), (-1, -1))])
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)
    return X, y
