"""Smoke test for the pyunary extension.

Build and install first, e.g.

    pip install maturin
    maturin develop -m crates/py/Cargo.toml --release
"""

import math

import pyunary as pu


def main():
    params = pu.BsmParams.reference()
    dist = pu.discretize(params, 8)
    assert len(dist) == 8
    assert abs(sum(dist.probs) - 1.0) < 1e-12

    fixture = pu.DiscreteDistribution([1.0, 2.0, 3.0], [0.25, 0.5, 0.25])
    circuit = pu.PricingCircuit(fixture, 1.5)
    alpha = circuit.alpha
    for m in range(5):
        assert abs(circuit.hit_probability(m) - math.sin((2 * m + 1) * alpha) ** 2) < 1e-9

    res = pu.estimate_payoff(fixture, 1.5, depths=list(range(11)), shots_per_depth=1000, repeats=4, seed=1)
    lo, hi = res.payoff_ci
    print(f"payoff {res.payoff_hat:.5f} in [{lo:.5f}, {hi:.5f}], exact 0.625, oracle calls {res.oracle_calls}")
    assert lo <= 0.625 <= hi

    est, se = pu.mc_price(params, 100_000, seed=0)
    print(f"mc {est:.5f} +- {se:.5f}")

    angles = pu.fit_loader(dist)
    assert pu.l2_norm(pu.generate_distribution(angles), dist.probs) < 1e-12
    hist = pu.train_gan(dist.probs, generations=20, seed=0)
    print(f"gan l2 after 20 generations {hist.best_l2:.4f}")

    print("smoke ok")


if __name__ == "__main__":
    main()
