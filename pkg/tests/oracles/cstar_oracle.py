"""Independent reference for c*(mu=a=b=d=1).

Uses scipy's adaptive DOP853 with terminal events instead of the package's
fixed-step RK4 classifier, and brentq instead of bisection for the outer root.
Run once; the printed value is frozen in tests/test_semiwave.py.
"""
import math

from scipy.integrate import solve_ivp
from scipy.optimize import brentq


def classify(s, k, a=1.0, b=1.0, d=1.0, r_max=60.0):
    cap = a / b

    def rhs(r, y):
        return [y[1], (k * y[1] - a * y[0] + b * y[0] ** 2) / d]

    def over(r, y):
        return y[0] - cap * (1 + 1e-13)
    over.terminal = True

    def turn(r, y):
        return y[1]
    turn.terminal = True
    turn.direction = -1

    sol = solve_ivp(rhs, (0.0, r_max), [0.0, s], method="DOP853", rtol=1e-13, atol=1e-15,
                    events=[over, turn])
    if sol.t_events[0].size:
        return 1
    if sol.t_events[1].size:
        return -1
    return 0


def slope(k, tol=1e-13):
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        m = 0.5 * (lo + hi)
        c = classify(m, k)
        if c > 0:
            hi = m
        elif c < 0:
            lo = m
        else:
            return m
    return 0.5 * (lo + hi)


if __name__ == "__main__":
    print("slope(0) =", repr(slope(0.0)), "closed form", repr(1 / math.sqrt(3)))
    c = brentq(lambda k: slope(k) - k, 0.05, 1.9, xtol=1e-12)
    print("c* =", repr(c))
