"""Independent reference implementations used by the tests.

Nothing here imports the code under test except for plain data types.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

# ---------------------------------------------------------------------------
# Philox4x64-10, straight from the published round function

_MASK = (1 << 64) - 1
_M0, _M1 = 0xD2E7470EE14C6C93, 0xCA5A826395121157
_W0, _W1 = 0x9E3779B97F4A7C15, 0xBB67AE8584CAA73B


def philox4x64(counter, key):
    c, k = list(counter), list(key)
    for r in range(10):
        if r:
            k = [(k[0] + _W0) & _MASK, (k[1] + _W1) & _MASK]
        p0, p1 = _M0 * c[0], _M1 * c[2]
        c = [(p1 >> 64) ^ c[1] ^ k[0], p1 & _MASK, (p0 >> 64) ^ c[3] ^ k[1], p0 & _MASK]
    return c


def uniform_oracle(seed: int, index: int) -> float:
    word = philox4x64([index // 4 + 1, 0, 0, 0], [seed & _MASK, seed >> 64])[index % 4]
    return ((word >> 12) + 0.5) / 2.0**52


# ---------------------------------------------------------------------------
# Gillespie direct method for a finite-state chain


def gillespie(Q: np.ndarray, state: int, uniforms, horizon: float, transitions):
    """Jump times and visited states; ``uniforms(k)`` is the ``k``-th draw.

    The waiting time uses draw ``2n - 2`` and the target draw ``2n - 1``;
    targets are chosen by scanning ``transitions`` (a list of ``(i, j)``)
    in order and accumulating ``Q[i, j] / -Q[i, i]`` for the current ``i``.
    """
    t, n = 0.0, 1
    times, states = [0.0], [state]
    while True:
        rate = -Q[state, state]
        tau = -math.log(uniforms(2 * n - 2)) / rate
        if t + tau >= horizon:
            return times, states
        t += tau
        u = uniforms(2 * n - 1)
        acc = 0.0
        chosen = None
        for i, j in transitions:
            if i != state:
                continue
            acc += Q[i, j] / rate
            if u < acc:
                chosen = j
                break
        if chosen is None:  # round-off in the last cumulative sum
            chosen = [j for i, j in transitions if i == state and Q[i, j] > 0][-1]
        state = chosen
        times.append(t)
        states.append(state)
        n += 1


# ---------------------------------------------------------------------------
# closed-form pieces of the toy models


def quad_hazard_tau(y0: float, c: float) -> float:
    """Root of ``y0 tau + tau^2 / 2 = c``."""
    return -y0 + math.sqrt(y0 * y0 + 2.0 * c)


def const_rate_jump_times(uniforms, rate: float, horizon: float) -> list[float]:
    t, n, out = 0.0, 1, []
    while True:
        t += -math.log(uniforms(2 * n - 2)) / rate
        if t >= horizon:
            return out
        out.append(t)
        n += 1


# ---------------------------------------------------------------------------
# Hodgkin-Huxley kinetics built from the gate picture rather than a table


def hh_p1_rates(y: float) -> dict:
    def safe(num_over, z):
        return num_over if z != 0 else None

    an = (10 - y) / (100 * (math.exp((10 - y) / 10) - 1)) if y != 10 else 0.1
    am = (25 - y) / (10 * (math.exp((25 - y) / 10) - 1)) if y != 25 else 1.0
    return {
        "a_n": an, "a_m": am, "a_h": 0.07 * math.exp(-y / 20),
        "b_n": 0.125 * math.exp(-y / 80), "b_m": 4 * math.exp(-y / 18),
        "b_h": 1 / (math.exp((30 - y) / 10) + 1),
    }


def na_state(k_open_m: int, h_open: int) -> int:
    """1-based sodium state index for ``k`` open m-gates and the h-gate state."""
    return 1 + k_open_m + 4 * h_open


def hh_transitions(rates: dict) -> list[tuple[int, int, float]]:
    """All single-channel transitions ``(from, to, per-channel rate)`` of both schemes."""
    out = []
    for h in (0, 1):
        for k in range(4):
            s = na_state(k, h)
            if k < 3:
                out.append((s, na_state(k + 1, h), (3 - k) * rates["a_m"]))
            if k > 0:
                out.append((s, na_state(k - 1, h), k * rates["b_m"]))
            if h == 0:
                out.append((s, na_state(k, 1), rates["a_h"]))
            else:
                out.append((s, na_state(k, 0), rates["b_h"]))
    for k in range(5):
        s = 9 + k
        if k < 4:
            out.append((s, s + 1, (4 - k) * rates["a_n"]))
        if k > 0:
            out.append((s, s - 1, k * rates["b_n"]))
    return out


def hh_total_rate(rates: dict, theta) -> float:
    return sum(r * theta[i - 1] for i, _, r in hh_transitions(rates))


# ---------------------------------------------------------------------------
# exact rational tableau data


PUBLISHED_TABLEAUS = {
    "trapezoidal": {
        "c": [Fraction(0), Fraction(1)],
        "beta": [Fraction(1, 2), Fraction(1, 2)],
        "b": [lambda x: Fraction(1, 2) * x * (2 - x), lambda x: Fraction(1, 2) * x * x],
    },
    "radau2": {
        "c": [Fraction(1, 3), Fraction(1)],
        "beta": [Fraction(3, 4), Fraction(1, 4)],
        "b": [lambda x: Fraction(3, 4) * x * (2 - x), lambda x: Fraction(3, 4) * x * (x - Fraction(2, 3))],
    },
    "lobatto3": {
        "c": [Fraction(0), Fraction(1, 2), Fraction(1)],
        "beta": [Fraction(1, 6), Fraction(2, 3), Fraction(1, 6)],
        "b": [lambda x: 2 * x * (Fraction(1, 3) * x * x - Fraction(3, 4) * x + Fraction(1, 2)),
              lambda x: 4 * x * x * (Fraction(1, 2) - Fraction(1, 3) * x),
              lambda x: 2 * x * x * (Fraction(1, 3) * x - Fraction(1, 4))],
    },
    "euler": {
        "c": [Fraction(0)],
        "beta": [Fraction(1)],
        "b": [lambda x: x],
    },
}
