"""Inner stepping loop for jump-unfolded trajectories.

Compiled with numba when available; the pure-Python fallback executes the
same function body, only slowly. Everything is passed as plain arrays and
scalars, and a trajectory's output depends only on its own inputs, never on
batch composition or thread scheduling. That is what makes ensembles
byte-reproducible under any --threads setting.

The cycle is represented by precomposed dense matrices:

  u_cycle      full-cycle no-jump propagator (pulses included)
  a_ops[j]     no-jump evolution from the cycle start to the midpoint of
               in-cycle time cell j
  b_ops[j]     no-jump evolution from that midpoint to the cycle end
  corr_ops[j]  correction applied at the cycle end for a detected jump in
               cell j: project onto the error subspace the emission leaves
               behind there (which depends on how many echo pulses followed
               it) and re-encode onto the code space

A jump that fires in a cycle is placed by inverse-CDF sampling over the
per-cell emission rate (the excited population at each cell midpoint):
sigma_minus acts between a_ops[j] and b_ops[j]. The jump *probability* uses
the exact full-cycle norm loss, so survival statistics are exact; only the
within-cycle placement is discretized, at O(dt) fidelity to the true
waiting density. Rate-weighted placement matters for echo cycles, where
the pulses park the population in the ground state for entire half-cycles
and a uniform draw would put emissions where none can occur.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


@njit(cache=True, nogil=True)
def _matvec(m, v, out):
    d = v.shape[0]
    for i in range(d):
        acc = 0.0 + 0.0j
        for j in range(d):
            acc += m[i, j] * v[j]
        out[i] = acc


@njit(cache=True, nogil=True)
def _norm2(v):
    n2 = 0.0
    for i in range(v.shape[0]):
        n2 += v[i].real * v[i].real + v[i].imag * v[i].imag
    return n2


@njit(cache=True, nogil=True)
def run_span(
    psi,            # (d,) complex128, normalized; advanced in place
    u_cycle,        # (d, d) complex128
    a_ops,          # (cells, d, d) complex128
    b_ops,          # (cells, d, d) complex128
    jump_op,        # (d, d) complex128, bare lowering operator
    corr_ops,       # (cells, d, d) complex128
    eta,            # float64
    corrections,    # bool
    jump_u,         # (n,) float64, one decision uniform per cycle
    event_u,        # (n, 2) float64, (time fraction, detection) per cycle
    snap_cycles,    # (ns,) int64, 1-based local cycle numbers, increasing
    code0,          # (d,) complex128 codeword kets for readout projections
    code1,          # (d,) complex128
    out_ab,         # (ns, 2) complex128: <code0|psi>, <code1|psi>
    out_counts,     # (ns, 2) int64: cumulative (jumps, detected)
    state_cycles,   # (nss,) int64, 1-based local cycle numbers, increasing
    out_states,     # (nss, d) complex128
    out_events,     # (ne_cap, 4) float64: cycle, time cell, detected, corrected
    jumps0,         # int64 starting cumulative counts
    detected0,      # int64
):
    """Advance one trajectory by len(jump_u) cycles.

    Returns (events_recorded, jumps_total, detected_total, err). err is 0 on
    success, 1 if a jump hit a state with no excited amplitude (a logic
    error upstream).
    """
    d = psi.shape[0]
    n = jump_u.shape[0]
    cells = a_ops.shape[0]
    ns = snap_cycles.shape[0]
    nss = state_cycles.shape[0]
    ne_cap = out_events.shape[0]

    work = np.empty(d, dtype=np.complex128)
    work2 = np.empty(d, dtype=np.complex128)
    qcell = np.empty(cells, dtype=np.float64)

    si = 0
    ssi = 0
    ne = 0
    jumps = jumps0
    detected_total = detected0
    err = 0

    for k in range(n):
        _matvec(u_cycle, psi, work)
        n2 = _norm2(work)
        p = 1.0 - n2
        if p < 0.0:
            p = 0.0
        elif p > 1.0:
            p = 1.0

        if jump_u[k] < p:
            jumps += 1
            # emission-rate profile across the cycle; cells holding no
            # excited amplitude receive no jumps
            qsum = 0.0
            for jj in range(cells):
                _matvec(a_ops[jj], psi, work)
                _matvec(jump_op, work, work2)
                qcell[jj] = _norm2(work2)
                qsum += qcell[jj]
            if qsum <= 0.0:
                err = 1
                break
            target = event_u[k, 0] * qsum
            j = -1
            lastpos = -1
            acc = 0.0
            for jj in range(cells):
                acc += qcell[jj]
                if qcell[jj] > 0.0:
                    lastpos = jj
                    if acc >= target:
                        j = jj
                        break
            if j < 0:
                j = lastpos
            # evolve to the jump time, lower, evolve the remainder
            _matvec(a_ops[j], psi, work)
            _matvec(jump_op, work, work2)
            if _norm2(work2) <= 1e-300:
                err = 1
                break
            _matvec(b_ops[j], work2, work)

            det = event_u[k, 1] < eta
            corr = False
            if det:
                detected_total += 1
                if corrections:
                    _matvec(corr_ops[j], work, work2)
                    if _norm2(work2) <= 1e-300:
                        err = 1
                        break
                    for i in range(d):
                        work[i] = work2[i]
                    corr = True
            if ne < ne_cap:
                out_events[ne, 0] = k
                out_events[ne, 1] = j
                out_events[ne, 2] = 1.0 if det else 0.0
                out_events[ne, 3] = 1.0 if corr else 0.0
                ne += 1
            n2 = _norm2(work)

        s = 1.0 / np.sqrt(n2)
        for i in range(d):
            psi[i] = work[i] * s

        if si < ns and snap_cycles[si] == k + 1:
            a = 0.0 + 0.0j
            b = 0.0 + 0.0j
            for i in range(d):
                a += np.conj(code0[i]) * psi[i]
                b += np.conj(code1[i]) * psi[i]
            out_ab[si, 0] = a
            out_ab[si, 1] = b
            out_counts[si, 0] = jumps
            out_counts[si, 1] = detected_total
            si += 1
        if ssi < nss and state_cycles[ssi] == k + 1:
            for i in range(d):
                out_states[ssi, i] = psi[i]
            ssi += 1

    return ne, jumps, detected_total, err
