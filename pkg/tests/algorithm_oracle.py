"""Straight-line re-implementation of the joint beamformer/canceller design.

Written independently of ``fdisac.optimizer`` from the step list: it shares
no helpers with the package beyond numpy, so agreement between the two is a
meaningful check.
"""

import numpy as np


def _steer(n, spacing_over_lambda, theta):
    i = np.arange(n)
    return np.exp(-2j * np.pi * spacing_over_lambda * i * np.sin(theta)) / np.sqrt(n)


def _greedy(scores, distinct):
    picks, used = [], set()
    for row in scores:
        best_val, best_k = -np.inf, None
        for k, val in enumerate(row):
            if distinct and k in used:
                continue
            if val > best_val:
                best_val, best_k = val, k
        used.add(best_k)
        picks.append(best_k)
    return picks


def _block(beams, picks, n_sub):
    out = np.zeros((len(picks) * n_sub, len(picks)), dtype=complex)
    for r, k in enumerate(picks):
        out[r * n_sub:(r + 1) * n_sub, r] = beams[k]
    return out


def run(h_si, h_dl, n_taps, p_b, rho_b, doas, spacing_over_lambda, tx_beams, rx_beams, n_rf, m_rf, distinct):
    n_sub_tx, n_sub_rx = tx_beams.shape[1], rx_beams.shape[1]
    n, m = n_rf * n_sub_tx, m_rf * n_sub_rx

    h_r = np.zeros((m, n), dtype=complex)
    for th in doas:
        h_r += np.outer(_steer(m, spacing_over_lambda, th), _steer(n, spacing_over_lambda, th).conj())

    tx_scores = np.zeros((n_rf, len(tx_beams)))
    for c in range(n_rf):
        cols = h_r[:, c * n_sub_tx:(c + 1) * n_sub_tx]
        for k, b in enumerate(tx_beams):
            tx_scores[c, k] = np.linalg.norm(cols @ b) ** 2
    tx_picks = _greedy(tx_scores, distinct)
    v = _block(tx_beams, tx_picks, n_sub_tx)

    si_v = np.zeros((m, n_rf), dtype=complex) if h_si is None else h_si @ v
    eps = 1e-12 * np.linalg.norm(si_v) ** 2
    if eps == 0:
        eps = 1.0
    rad_v = h_r @ v
    rx_scores = np.zeros((m_rf, len(rx_beams)))
    for c in range(m_rf):
        rows = slice(c * n_sub_rx, (c + 1) * n_sub_rx)
        for k, w in enumerate(rx_beams):
            num = np.linalg.norm(w.conj() @ rad_v[rows]) ** 2
            den = np.linalg.norm(w.conj() @ si_v[rows]) ** 2
            rx_scores[c, k] = num / (den + eps)
    rx_picks = _greedy(rx_scores, distinct)
    w_mat = _block(rx_beams, rx_picks, n_sub_rx)

    h_eff = w_mat.conj().T @ si_v
    ranked = sorted(range(h_eff.size), key=lambda i: (-abs(h_eff.flat[i]), i))
    order = ranked[:n_taps]
    mags = [abs(h_eff.flat[i]) for i in ranked]
    # relative gap between the last cancelled and first uncancelled entry
    if 0 < n_taps < h_eff.size and mags[0] > 0:
        tap_gap = (mags[n_taps - 1] - mags[n_taps]) / mags[0]
    else:
        tap_gap = np.inf
    c_mat = np.zeros_like(h_eff)
    for i in order:
        c_mat.flat[i] = -h_eff.flat[i]
    resid = h_eff + c_mat
    b_mat = np.linalg.svd(resid)[2].conj().T
    dl_eff = [h @ v for h in h_dl]
    n_users = len(h_dl)

    tried = []
    accepted = None
    for alpha in range(n_rf, 1, -1):
        f = b_mat[:, n_rf - alpha:]
        blocks = []
        deficient = False
        for u in range(n_users):
            others = [dl_eff[j] @ f for j in range(n_users) if j != u]
            if others:
                stack = np.vstack(others)
                _, s, vh = np.linalg.svd(stack)
                rank = int(np.sum(s > 1e-10 * s[0])) if s[0] > 0 else 0
                null = vh[rank:].conj().T
            else:
                null = np.eye(alpha, dtype=complex)
            n_streams = dl_eff[u].shape[0]
            if null.shape[1] < n_streams:
                deficient = True
                break
            e = np.linalg.svd(dl_eff[u] @ f @ null)[2][:n_streams].conj().T
            blocks.append(np.sqrt(p_b / n_users) * null @ e)
        if deficient:
            if alpha == n_rf:
                raise ValueError("rank deficient at full subspace")
            break
        v_bb = f @ np.hstack(blocks)
        power = np.linalg.norm(v @ v_bb) ** 2
        if power > 0:
            v_bb = v_bb * np.sqrt(p_b / power)
        rows = np.array([np.linalg.norm(r) ** 2 for r in resid @ v_bb])
        tried.append((alpha, v_bb, rows))
        if np.all(rows <= rho_b):
            accepted = tried[-1]
            break
    chosen = accepted if accepted is not None else min(tried, key=lambda t: np.max(t[2]))
    return {
        "tx_beams": tx_picks,
        "rx_beams": rx_picks,
        "alpha": chosen[0],
        "v_bb": chosen[1],
        "success": accepted is not None,
        "tap_gap": tap_gap,
        "taps": sorted(order),
    }
