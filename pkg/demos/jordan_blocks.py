"""Split a pair of random involutions into 2x2 blocks and rebuild them."""

import numpy as np

from xorselftest.jordan import InvolutionPair, block_decompose, random_block_pair, random_involution

if __name__ == "__main__":
    rng = np.random.default_rng(3)
    pair = InvolutionPair(random_involution(7, rng, plus_dim=3), random_involution(7, rng, plus_dim=4))
    dec = block_decompose(pair)
    print(f"dimension 7 -> {dec.m} blocks")
    for b in dec.blocks:
        print(f"  theta = {b.theta:.6f}  ({b.origin})")
    print("reconstruction residuals:", dec.residuals(pair))
    print("isometry defect:", dec.isometry_defect())

    # planted angles come back out
    planted = np.array([0.3, 1.1, 2.5])
    rec = block_decompose(random_block_pair(planted, [], rng)).thetas
    print("planted", planted, "recovered", np.sort(rec))
