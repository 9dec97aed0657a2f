"""Independent brute-force oracles.

Everything here is deliberately naive -- literal loops over the defining
formulas -- and shares no code with the library paths it checks.
"""

import numpy as np


def contract_bruteforce(g_i, g_j, g_n):
    """Literal 6-nested-loop evaluation of the element-wise reconstruction."""
    ii, f, _ = g_i.shape
    jj = g_j.shape[1]
    nn = g_n.shape[2]
    out = np.zeros((ii, jj, nn))
    for i in range(ii):
        for j in range(jj):
            for n in range(nn):
                acc = 0.0
                for x in range(f):
                    for y in range(f):
                        for z in range(f):
                            acc += g_i[i, x, y] * g_j[x, j, z] * g_n[y, z, n]
                out[i, j, n] = acc
    return out


def unfold_bruteforce(tensor, mode):
    """Entry-by-entry construction of the declared unfolding layouts."""
    ii, jj, nn = tensor.shape
    if mode == "i":
        out = np.zeros((ii, jj * nn))
        for i in range(ii):
            for j in range(jj):
                for n in range(nn):
                    out[i, n * jj + j] = tensor[i, j, n]
    elif mode == "j":
        out = np.zeros((jj, ii * nn))
        for i in range(ii):
            for j in range(jj):
                for n in range(nn):
                    out[j, n * ii + i] = tensor[i, j, n]
    elif mode == "n":
        out = np.zeros((nn, ii * jj))
        for i in range(ii):
            for j in range(jj):
                for n in range(nn):
                    out[n, j * ii + i] = tensor[i, j, n]
    else:
        raise ValueError(mode)
    return out


def auc_bruteforce(scores, labels):
    """All-pairs Mann-Whitney count: wins 1, ties 1/2, over P*N pairs."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels != 1]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def objective_bruteforce(x, g_i, g_j, g_n):
    """Half the squared error, accumulated entry by entry."""
    recon = contract_bruteforce(g_i, g_j, g_n)
    acc = 0.0
    for v, r in zip(x.ravel(), recon.ravel()):
        acc += (v - r) ** 2
    return 0.5 * acc


def scalar_rank1_factor_update(x_mat, h_row, g_old_col, lambda1, lambda2):
    """f=1 factor update: each row of the matricized factor is one division.

    h_row: the 1 x R pair contraction flattened to a vector; x_mat: d x R;
    g_old_col: d. The quasi-identity contributes lambda1 to row 0 only.
    """
    denom = float(np.dot(h_row, h_row)) + lambda2
    out = np.zeros(len(g_old_col))
    for r in range(len(g_old_col)):
        num = float(np.dot(x_mat[r], h_row)) + lambda2 * g_old_col[r]
        if r == 0:
            num += lambda1
        out[r] = num / denom
    return out


def random_factors(rng, dims, f, lo=-1.0, hi=1.0):
    ii, jj, nn = dims
    from evtensor.tensor_ops import FactorTriple

    return FactorTriple(
        g_i=rng.uniform(lo, hi, size=(ii, f, f)),
        g_j=rng.uniform(lo, hi, size=(f, jj, f)),
        g_n=rng.uniform(lo, hi, size=(f, f, nn)),
    )
