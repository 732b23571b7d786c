"""Sample near-optimal CHSH strategies and fit the square-root envelope.

For each strategy class the distance to the closest optimal strategy should
scale like sqrt(eps) where eps is the score deficit.
"""

import numpy as np

from xorselftest.game import chsh
from xorselftest.robustness import run_robustness_experiment
from xorselftest.verdict import classify

EPS_GRID = np.logspace(-4, -1, 4)

if __name__ == "__main__":
    game = chsh()
    verdict = classify(game)
    print(f"K2 for CHSH: {verdict.K2:.5f}")
    for cls in ("T", "S", "qubit", "canonical"):
        cert = run_robustness_experiment(game, cls, EPS_GRID, 100, seed=1, verdict=verdict, game_id="chsh")
        print(f"{cls:>9}: C = {cert.fitted_C:7.4f}  log-log slope = {cert.fitted_slope:.3f}")
        eps = np.array([e for e, _ in cert.samples])
        dist = np.array([d for _, d in cert.samples])
        for e in EPS_GRID:
            sel = np.isclose(eps, e, rtol=0.5)
            if sel.any():
                print(f"           eps~{e:.0e}  median d = {np.median(dist[sel]):.2e}"
                      f"  C*sqrt(eps) = {cert.fitted_C * np.sqrt(e):.2e}")
