"""Single-time-step cell implementations and the stepwise sequence executor.

Three cell types are supported:

* LSTM: forget/input/output gates and the candidate all mix the current
  input with the previous output, so every step depends on the one before
  it through both c and h.
* SRU: gates depend on the current input only; the recurrence runs through
  c alone, and a highway term mixes the raw input into the output (which
  forces d_in == d_h).
* QRNN: gates are a two-tap filter over the current and previous inputs;
  like the SRU, only c carries across steps.

``run_stepwise`` executes a sequence one step at a time with the strict
reference kernels by default. It is the correctness oracle that blocked
execution is measured against.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .kernels import gemv, sigmoid, tanh_act


class CellKind(Enum):
    LSTM = "lstm"
    SRU = "sru"
    QRNN = "qrnn"

    @classmethod
    def parse(cls, name: str) -> "CellKind":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown cell kind {name!r}; expected lstm, sru, or qrnn") from None


def _expect(cond, msg):
    if not cond:
        raise ValueError(msg)


@dataclass
class LstmWeights:
    w_forget: np.ndarray
    w_input: np.ndarray
    w_output: np.ndarray
    w_cand: np.ndarray
    u_forget: np.ndarray
    u_input: np.ndarray
    u_output: np.ndarray
    u_cand: np.ndarray
    b_forget: np.ndarray
    b_input: np.ndarray
    b_output: np.ndarray
    b_cand: np.ndarray

    def __post_init__(self):
        d_h, d_in = self.w_forget.shape
        for w in (self.w_input, self.w_output, self.w_cand):
            _expect(w.shape == (d_h, d_in), "input-side weight shapes disagree")
        for u in (self.u_forget, self.u_input, self.u_output, self.u_cand):
            _expect(u.shape == (d_h, d_h), "recurrent weights must be square d_h x d_h")
        for b in (self.b_forget, self.b_input, self.b_output, self.b_cand):
            _expect(b.shape == (d_h,), "bias length must equal d_h")

    @property
    def d_in(self):
        return self.w_forget.shape[1]

    @property
    def d_h(self):
        return self.w_forget.shape[0]


@dataclass
class SruWeights:
    w_cand: np.ndarray
    w_forget: np.ndarray
    w_highway: np.ndarray
    b_forget: np.ndarray
    b_highway: np.ndarray

    def __post_init__(self):
        d_h, d_in = self.w_cand.shape
        # the highway term adds the raw input to the output, so widths match
        _expect(d_in == d_h, "SRU requires d_in == d_h")
        _expect(self.w_forget.shape == (d_h, d_in), "weight shapes disagree")
        _expect(self.w_highway.shape == (d_h, d_in), "weight shapes disagree")
        _expect(self.b_forget.shape == (d_h,), "bias length must equal d_h")
        _expect(self.b_highway.shape == (d_h,), "bias length must equal d_h")

    @property
    def d_in(self):
        return self.w_cand.shape[1]

    @property
    def d_h(self):
        return self.w_cand.shape[0]


@dataclass
class QrnnWeights:
    # two taps per gate (current input and the one before it); no biases
    w_cand: np.ndarray
    w_cand_prev: np.ndarray
    w_forget: np.ndarray
    w_forget_prev: np.ndarray
    w_out: np.ndarray
    w_out_prev: np.ndarray

    def __post_init__(self):
        shape = self.w_cand.shape
        for w in (self.w_cand_prev, self.w_forget, self.w_forget_prev,
                  self.w_out, self.w_out_prev):
            _expect(w.shape == shape, "all six tap matrices must share one shape")

    @property
    def d_in(self):
        return self.w_cand.shape[1]

    @property
    def d_h(self):
        return self.w_cand.shape[0]


@dataclass
class CellState:
    """Recurrent carriers. x_prev is the t-1 input tap (QRNN only)."""

    c: np.ndarray
    h: np.ndarray
    x_prev: np.ndarray


def zero_state(d_in: int, d_h: int, dtype) -> CellState:
    return CellState(
        c=np.zeros(d_h, dtype),
        h=np.zeros(d_h, dtype),
        x_prev=np.zeros(d_in, dtype),
    )


def _check_step_args(w, x_t, state):
    if x_t.shape != (w.d_in,):
        raise ValueError(f"input length {x_t.shape} does not match d_in={w.d_in}")
    if state.c.shape != (w.d_h,) or state.h.shape != (w.d_h,):
        raise ValueError("state width does not match d_h")


def lstm_step(w: LstmWeights, x_t: np.ndarray, state: CellState,
              kernel: str = "reference") -> CellState:
    """One LSTM step. Gates use the previous output h_{t-1}."""
    _check_step_args(w, x_t, state)
    h_prev, c_prev = state.h, state.c
    f = sigmoid(gemv(w.w_forget, x_t, kernel) + gemv(w.u_forget, h_prev, kernel) + w.b_forget)
    i = sigmoid(gemv(w.w_input, x_t, kernel) + gemv(w.u_input, h_prev, kernel) + w.b_input)
    o = sigmoid(gemv(w.w_output, x_t, kernel) + gemv(w.u_output, h_prev, kernel) + w.b_output)
    cand = tanh_act(gemv(w.w_cand, x_t, kernel) + gemv(w.u_cand, h_prev, kernel) + w.b_cand)
    c = f * c_prev + i * cand
    h = o * tanh_act(c)
    return CellState(c=c, h=h, x_prev=x_t)


def sru_step(w: SruWeights, x_t: np.ndarray, state: CellState,
             kernel: str = "reference") -> CellState:
    """One SRU step. Gates read only x_t; the recurrence is c alone."""
    _check_step_args(w, x_t, state)
    cand = gemv(w.w_cand, x_t, kernel)
    f = sigmoid(gemv(w.w_forget, x_t, kernel) + w.b_forget)
    r = sigmoid(gemv(w.w_highway, x_t, kernel) + w.b_highway)
    c = f * state.c + (1.0 - f) * cand
    h = r * tanh_act(c) + (1.0 - r) * x_t
    return CellState(c=c, h=h, x_prev=x_t)


def qrnn_step(w: QrnnWeights, x_t: np.ndarray, state: CellState,
              kernel: str = "reference") -> CellState:
    """One QRNN step. Gates filter (x_t, x_{t-1}); x_{-1} is zero."""
    _check_step_args(w, x_t, state)
    xp = state.x_prev
    cand = tanh_act(gemv(w.w_cand, x_t, kernel) + gemv(w.w_cand_prev, xp, kernel))
    f = sigmoid(gemv(w.w_forget, x_t, kernel) + gemv(w.w_forget_prev, xp, kernel))
    o = sigmoid(gemv(w.w_out, x_t, kernel) + gemv(w.w_out_prev, xp, kernel))
    c = f * state.c + (1.0 - f) * cand
    h = o * tanh_act(c)
    return CellState(c=c, h=h, x_prev=x_t)


_STEP_FN = {
    CellKind.LSTM: lstm_step,
    CellKind.SRU: sru_step,
    CellKind.QRNN: qrnn_step,
}


def step(kind: CellKind, w, x_t, state, kernel: str = "reference") -> CellState:
    return _STEP_FN[kind](w, x_t, state, kernel)


def run_layer_stepwise(kind: CellKind, w, X: np.ndarray,
                       kernel: str = "reference") -> np.ndarray:
    """Run one layer over X (rows are time steps) from the zero state."""
    if X.ndim != 2 or X.shape[1] != w.d_in:
        raise ValueError(f"input must be [L x {w.d_in}], got {X.shape}")
    fn = _STEP_FN[kind]
    state = zero_state(w.d_in, w.d_h, X.dtype)
    H = np.empty((X.shape[0], w.d_h), X.dtype)
    for t in range(X.shape[0]):
        state = fn(w, X[t], state, kernel)
        H[t] = state.h
    return H


def run_stepwise(cfg, weights, X: np.ndarray, kernel: str = "reference") -> np.ndarray:
    """Step-by-step execution of the whole (possibly stacked) network.

    Row t of the result is h_t of the last layer. This is the oracle
    blocked execution must agree with.
    """
    if X.shape[1] != cfg.d_in:
        raise ValueError(f"input width {X.shape[1]} does not match config d_in={cfg.d_in}")
    out = X
    for layer in weights.layers:
        out = run_layer_stepwise(cfg.kind, layer, np.ascontiguousarray(out), kernel)
    return out
