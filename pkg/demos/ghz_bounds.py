"""Check the GHZ robustness bounds on ideal and noisy devices."""

import numpy as np

from xorselftest.ghz import (
    check_all_qubit_bounds,
    check_entangled_bound,
    ideal_device,
    pass_probability_direct,
    pass_probability_formula,
    random_canonical_device,
    random_qubit_device,
)

if __name__ == "__main__":
    dev = ideal_device()
    print(f"ideal device passes with probability {pass_probability_formula(dev):.12f}")

    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(500):
        d = random_qubit_device(rng)
        worst = max(worst, abs(pass_probability_formula(d) - pass_probability_direct(d)))
        rep = check_all_qubit_bounds(d)
        assert rep.ok, rep.to_dict()
    print(f"500 qubit devices: formula vs direct max gap {worst:.1e}, all bounds hold")

    slack = []
    for _ in range(50):
        rep = check_entangled_bound(random_canonical_device(rng))
        assert rep.ok
        slack.append(min(c.slack for c in rep.checks))
    print(f"50 entangled devices: all bounds hold, smallest slack {min(slack):.3e}")
