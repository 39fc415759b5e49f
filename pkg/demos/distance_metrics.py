"""
Distances between predictive densities
======================================

Squared Hellinger distance is the package's central loss.  This script
checks the Gaussian closed forms against direct quadrature, shows the
inequality chain against KL divergence and absolute distance, and runs
the discrete variants used for classification.
"""

import numpy as np

from mdlpredict import (
    abs_distance,
    adaptive_simpson,
    gaussian_density,
    hellinger_sq,
    hellinger_sq_gaussian,
    kl_divergence,
    kl_gaussian,
    quadratic_distance,
    tabular_density,
)

# closed form vs a hand-rolled integral of (sqrt p - sqrt q)^2
pairs = [(0.0, 1.0, 2.0, 1.0),
         (0.0, 1.0, 0.0, 2.0),
         (1.0, 0.5, -1.0, 1.5)]
print("pair                        closed form     via quadrature")
for m1, s1, m2, s2 in pairs:
    closed = hellinger_sq_gaussian(m1, s1, m2, s2)
    p, q = gaussian_density(m1, s1), gaussian_density(m2, s2)

    def integrand(ys, p=p, q=q):
        return (np.exp(0.5 * p.log_pdf_fn(ys))
                - np.exp(0.5 * q.log_pdf_fn(ys))) ** 2

    lo = min(m1 - 12 * s1, m2 - 12 * s2)
    hi = max(m1 + 12 * s1, m2 + 12 * s2)
    by_quad, _ = adaptive_simpson(integrand, lo, hi,
                                  breakpoints=np.array([m1, m2]))
    print(f"N({m1},{s1:.1f}) vs N({m2},{s2:.1f})  "
          f"{closed:.12f}  {by_quad:.12f}")

# h^2 <= KL and h^2 <= absolute distance, on random pairs
rng = np.random.default_rng(11)
worst_margin = np.inf
for _ in range(500):
    m1, m2 = rng.uniform(-3, 3, size=2)
    s1, s2 = rng.uniform(0.4, 2.0, size=2)
    h2 = hellinger_sq_gaussian(m1, s1, m2, s2)
    kl = kl_gaussian(m1, s1, m2, s2)
    ad = abs_distance(gaussian_density(m1, s1), gaussian_density(m2, s2))
    worst_margin = min(worst_margin, kl - h2, ad - h2)
print(f"\nmin(KL - h^2, |p-q| - h^2) over 500 random pairs: "
      f"{worst_margin:.3g} (never negative)")

# KL is infinite when the second density loses support the first keeps
narrow = tabular_density(np.array([0.5, 0.5, 0.0]))
wide = tabular_density(np.array([0.4, 0.3, 0.3]))
print("\ndiscrete distances for p = [0.5, 0.5, 0.0], q = [0.4, 0.3, 0.3]")
print("  h^2       ", round(hellinger_sq(wide, narrow), 6))
print("  quadratic ", round(quadratic_distance(wide, narrow), 6))
print("  KL(p||q)  ", kl_divergence(narrow, wide))
print("  KL(q||p)  ", kl_divergence(wide, narrow), " (support lost)")
