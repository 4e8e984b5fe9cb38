"""Forward/backward sweep power flow, vectorised over snapshots.

Loads are constant power: the current drawn by a customer is
``conj(S / V)`` at its phase. The backward sweep accumulates bus
injections up the tree level by level; the forward sweep applies the 3x3
line drops from the source down. A snapshot has converged when no phase
voltage moved by more than ``tol`` (pu) in the last iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lvmc.errors import ConvergenceError, InvalidInputError
from lvmc.powerflow.feeder import FeederModel

TOL_PU = 1e-6
MAX_ITER = 100
_A = np.exp(2j * np.pi / 3)
_PHASE_ROT = np.array([1.0, _A ** 2, _A])  # a-b-c sequence, phase b lags by 120 degrees


@dataclass
class PowerFlowSolution:
    """One snapshot: bus voltages (V), line currents (A) and convergence data."""

    voltages: np.ndarray       # (n_buses, 3)
    currents: np.ndarray       # (n_lines, 3)
    iterations: int
    mismatch: float
    conservation: float

    @property
    def head_current(self):
        return self.currents[0]


@dataclass
class TimeSeriesSolution:
    """Many snapshots; arrays carry the time axis first."""

    voltages: np.ndarray       # (T, n_buses, 3) complex V
    head_current: np.ndarray   # (T, 3) complex A
    iterations: np.ndarray     # (T,) sweeps until each snapshot converged
    mismatch: np.ndarray       # (T,) last voltage update, pu
    conservation: np.ndarray   # (T,) relative power-balance residual
    v_base: float

    def __len__(self):
        return self.voltages.shape[0]

    def snapshot(self, t) -> "PowerFlowSolution":
        return PowerFlowSolution(self.voltages[t], None, int(self.iterations[t]),
                                 float(self.mismatch[t]), float(self.conservation[t]))

    def customer_voltage_pu(self, feeder: FeederModel) -> np.ndarray:
        """Phase-to-neutral magnitude at each customer's connection, (T, n_customers)."""
        v = self.voltages[:, feeder.load_bus, feeder.load_phase]
        return np.abs(v) / self.v_base


def source_voltage(feeder: FeederModel) -> np.ndarray:
    return feeder.source_pu * feeder.v_base * _PHASE_ROT


def _bus_power(feeder: FeederModel, p_kw, q_kvar):
    """Per-bus per-phase complex load power in VA, shape (n_buses, 3, T)."""
    p_kw = np.asarray(p_kw, dtype=float)
    q_kvar = np.zeros_like(p_kw) if q_kvar is None else np.asarray(q_kvar, dtype=float)
    if p_kw.ndim == 1:
        p_kw, q_kvar = p_kw[:, None], q_kvar[:, None]
    if p_kw.shape[0] != feeder.n_customers or q_kvar.shape != p_kw.shape:
        raise InvalidInputError(
            f"injections must have one row per customer ({feeder.n_customers}), got {p_kw.shape}"
        )
    if not (np.all(np.isfinite(p_kw)) and np.all(np.isfinite(q_kvar))):
        raise InvalidInputError("injections must be finite")
    s = np.zeros((feeder.n_buses, 3, p_kw.shape[1]), dtype=complex)
    np.add.at(s, (feeder.load_bus, feeder.load_phase), 1e3 * (p_kw + 1j * q_kvar))
    return s


def _sweep(feeder, s, v, tol, max_iter):
    """Iterate FBS on a (n_buses, 3, T) batch in place; returns voltages, line currents, stats."""
    T = s.shape[2]
    v0 = source_voltage(feeder)[:, None]
    fb, tb, z = feeder.from_bus, feeder.to_bus, feeder.z
    levels = feeder.levels
    iters = np.zeros(T, dtype=np.int64)
    delta = np.full(T, np.inf)
    active = np.arange(T)
    loaded = s != 0
    i_line = np.zeros((feeder.n_lines, 3, T), dtype=complex)
    scale = feeder.v_base
    for it in range(1, max_iter + 1):
        sa = s[:, :, active]
        va = v[:, :, active]
        inj = np.zeros_like(sa)
        la = loaded[:, :, active]
        inj[la] = np.conj(sa[la] / va[la])
        # backward: bus injections plus everything downstream
        acc = inj
        il = np.empty((feeder.n_lines, 3, active.size), dtype=complex)
        for lines in reversed(levels):
            cur = acc[tb[lines]]
            il[lines] = cur
            np.add.at(acc, fb[lines], cur)
        # forward: voltage drops from the source outward
        vn = np.empty_like(va)
        vn[0] = v0
        for lines in levels:
            vn[tb[lines]] = vn[fb[lines]] - np.einsum("lij,ljt->lit", z[lines], il[lines])
        change = np.abs(vn - va).max(axis=(0, 1)) / scale
        v[:, :, active] = vn
        i_line[:, :, active] = il
        delta[active] = change
        done = change < tol
        iters[active[done]] = it
        active = active[~done]
        if active.size == 0:
            break
    return v, i_line, iters, delta, active


def _conservation(feeder, s, v, i_line):
    """Relative residual of head power = load power + losses, per snapshot."""
    v0 = source_voltage(feeder)
    s_head = (v0[:, None] * np.conj(i_line[0])).sum(axis=0)
    drop = np.einsum("lij,ljt->lit", feeder.z, i_line)
    losses = (drop * np.conj(i_line)).sum(axis=(0, 1))
    s_load = s.sum(axis=(0, 1))
    scale = np.maximum(np.abs(s_head), np.abs(s_load))
    scale = np.maximum(scale, 1.0)
    return np.abs(s_head - s_load - losses) / scale


def _raise_unconverged(feeder, v_prev, v, active, delta):
    worst = active[np.argmax(delta[active])]
    dv = np.abs(v[:, :, worst] - v_prev[:, :, worst]).max(axis=1)
    bus = feeder.bus_names[int(np.argmax(dv))]
    raise ConvergenceError(
        f"power flow did not converge for {active.size} snapshot(s); worst update "
        f"{delta[worst]:.3g} pu at bus {bus}",
        bus=bus,
        mismatch=float(delta[worst]),
    )


def solve_batch(feeder: FeederModel, p_kw, q_kvar=None, v_init=None, tol=TOL_PU, max_iter=MAX_ITER):
    """Solve many snapshots at once; ``p_kw``/``q_kvar`` are (n_customers, T), load positive."""
    s = _bus_power(feeder, p_kw, q_kvar)
    T = s.shape[2]
    if v_init is None:
        v = np.broadcast_to(source_voltage(feeder)[None, :, None], s.shape).copy()
    else:
        v = np.asarray(v_init, dtype=complex)
        v = np.broadcast_to(v if v.ndim == 3 else v[:, :, None], s.shape).copy()
    v_start = v.copy()
    v, i_line, iters, delta, active = _sweep(feeder, s, v, tol, max_iter)
    if active.size:
        _raise_unconverged(feeder, v_start, v, active, delta)
    return v, i_line, iters, delta, _conservation(feeder, s, v, i_line), s


def solve_snapshot(feeder: FeederModel, p_kw, q_kvar=None, v_init=None, tol=TOL_PU, max_iter=MAX_ITER):
    """Single snapshot; ``p_kw`` has one entry per customer (positive = consumption)."""
    p = np.asarray(p_kw, dtype=float).reshape(-1)
    q = None if q_kvar is None else np.asarray(q_kvar, dtype=float).reshape(-1)
    v, i_line, iters, delta, cons, _ = solve_batch(feeder, p, q, v_init, tol, max_iter)
    return PowerFlowSolution(v[:, :, 0], i_line[:, :, 0], int(iters[0]), float(delta[0]), float(cons[0]))


def solve_timeseries(
    feeder: FeederModel,
    p_kw,
    q_kvar=None,
    chunk: int = 1024,
    warm_start: bool = True,
    tol=TOL_PU,
    max_iter=MAX_ITER,
) -> TimeSeriesSolution:
    """Solve a (n_customers, T) injection series in chunks of snapshots.

    Each chunk starts from the last solved snapshot of the previous chunk
    when ``warm_start`` is set, otherwise from the flat source voltage.
    With ``chunk=1`` every snapshot is warm-started from its predecessor.
    """
    p_kw = np.asarray(p_kw, dtype=float)
    if p_kw.ndim != 2:
        raise InvalidInputError("injection series must be (n_customers, T)")
    q_kvar = np.zeros_like(p_kw) if q_kvar is None else np.asarray(q_kvar, dtype=float)
    if q_kvar.shape != p_kw.shape:
        raise InvalidInputError("p and q series must have the same shape")
    T = p_kw.shape[1]
    volts = np.empty((T, feeder.n_buses, 3), dtype=complex)
    head = np.empty((T, 3), dtype=complex)
    iters = np.empty(T, dtype=np.int64)
    mism = np.empty(T)
    cons = np.empty(T)
    v_prev = None
    for a in range(0, T, chunk):
        b = min(a + chunk, T)
        v, i_line, it, dl, cs, _ = solve_batch(
            feeder, p_kw[:, a:b], q_kvar[:, a:b], v_prev if warm_start else None, tol, max_iter
        )
        volts[a:b] = v.transpose(2, 0, 1)
        head[a:b] = i_line[0].T
        iters[a:b], mism[a:b], cons[a:b] = it, dl, cs
        v_prev = v[:, :, -1]
    return TimeSeriesSolution(volts, head, iters, mism, cons, feeder.v_base)
