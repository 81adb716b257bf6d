"""End-to-end smoke test of the ellipgen Python bindings.

Build and install first:
    pip install --no-build-isolation ./crates/python
then run:
    python python/smoke_test.py
"""

import math

import ellipgen

STEP = 0.005
NODES = 2001


def check(cond, what):
    if not cond:
        raise AssertionError(what)
    print(f"ok  {what}")


def main():
    # e^{-pi t} already satisfies the constraints with b = 1
    values = [math.exp(-math.pi * k * STEP) for k in range(NODES)]
    g = ellipgen.Generator(2, values, step=STEP)
    n = g.normalize(b=1.0)
    e1, e2 = n.residuals
    check(max(abs(e1), abs(e2)) < 1e-6, f"normalized residuals {e1:.1e}, {e2:.1e}")
    gauss = n.generator

    law = gauss.marginal()
    check(abs(law.quantile(0.5)) < 1e-12, "marginal median is zero")
    check(all(abs(law.cdf(law.quantile(u)) - u) < 1e-3 for u in (0.1, 0.3, 0.9)), "quantile roundtrip")
    check(abs(gauss.subvector(1)(0.7) - gauss(0.7)) < 1e-4, "Gaussian generator is consistent across dimensions")

    identity = [[1.0, 0.0], [0.0, 1.0]]
    dens = ellipgen.copula_density(gauss, identity, [[0.3, 0.8], [0.5, 0.5]])
    check(all(abs(c - 1.0) < 1e-3 for c in dens), f"independence copula density {dens}")

    sigma = [[1.0, 0.5], [0.5, 1.0]]
    u = ellipgen.sample_copula(gauss, sigma, 2000, seed=1)
    check(all(0.0 < v < 1.0 for row in u for v in row), "copula draws lie in the unit square")
    s_hat = ellipgen.kendall_sigma(u)
    check(abs(s_hat[0][1] - 0.5) < 0.1, f"Kendall correlation {s_hat[0][1]:.3f}")

    z = ellipgen.sample_elliptical(gauss, sigma, 10, seed=2)
    check(len(z) == 10 and len(z[0]) == 2, "elliptical draws have the requested shape")

    fit = ellipgen.mecip_estimate(u[:400], n_max=2, seed=3)
    e1, e2 = fit.generator.residuals
    check(max(abs(e1), abs(e2)) <= 1e-3, f"estimate is normalized after {fit.iterations} iterations")
    check(len(fit.history) == fit.iterations, "one distance per iteration")

    x3 = ellipgen.sample_copula(ellipgen.Generator.builtin("exponential", 3).generator,
                                [[1.0, 0.3, 0.3], [0.3, 1.0, 0.3], [0.3, 0.3, 1.0]], 200, seed=4)
    holes = ellipgen.inject_missing(x3, 20, seed=5)
    check(sum(v is None for row in holes for v in row) > 0, "missing entries injected")
    fit3 = ellipgen.mecip_estimate(holes, n_max=2, seed=6)
    check(all(math.isfinite(v) for v in fit3.generator.generator.values), "estimate with missing data is finite")

    sf = ellipgen.simfit_estimate(u[:300], "pearson7", [1.0, 2.0], [2.5, 3.5], n_sim=300, seed=7)
    check(len(sf.table) == 4 and sf.theta in [(a, b) for a, b, _ in sf.table], f"simfit picks {sf.theta}")

    rows = ellipgen.run_experiment("gaussian", 2, rho=[0.3], n=[150], h=[0.1], replications=2, n_max=2, seed=8)
    check(len(rows) == 1 and rows[0].failures == 0 and math.isfinite(rows[0].median), repr(rows[0]))

    try:
        g.normalize(b=-1.0)
    except ValueError as e:
        check(True, f"invalid b raises ValueError ({e})")
    else:
        raise AssertionError("negative b accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
