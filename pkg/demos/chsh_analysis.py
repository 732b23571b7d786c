"""Walk through the self-test analysis of CHSH and a family of tilted games.

Finds the maxima of the score landscape, reports their curvature, and
prints the second-order robustness constant for each game.
"""

import numpy as np

from xorselftest.game import chsh, h_alpha
from xorselftest.verdict import classify

np.set_printoptions(precision=5, suppress=True)


def describe(label, game):
    v = classify(game)
    print(f"== {label}: {game.players} players, table {np.round(game.table, 3).tolist()}")
    print(f"   quantum value  {v.q_f:.10f}")
    for m in v.maxima.maxima:
        print(f"   maximum at {m.point}  hessian eigenvalues {m.hessian_eigenvalues}")
    if v.is_robust_self_test:
        print(f"   robust self-test, restricted max {v.q_f_prime:.6f}, K2 = {v.K2:.6f}")
    else:
        print(f"   not a robust self-test ({v.reason()} fails)")
    print()


if __name__ == "__main__":
    describe("CHSH", chsh())
    for alpha in (1.5, 2.0, 3.0):
        describe(f"tilted game alpha={alpha}", h_alpha(alpha))
