"""
The noise density
=================

Tabulate the law of z0(1) for a few indices and look at its two tails.
"""

import numpy as np

from stablecir import build_density, laplace_exponent

# One table per index. The build inverts the characteristic function on a grid
# and attaches analytic tails, so evaluation works on the whole real line.
laws = {alpha: build_density(alpha) for alpha in (1.2, 1.5, 1.8)}

for alpha, law in laws.items():
    lo, hi = law.window
    print(f"alpha={alpha}: window [{lo:.1f}, {hi:.1f}], mass error {abs(law.total_mass() - 1):.1e}")

# The right tail falls like x^(-1-alpha)
for alpha, law in laws.items():
    x = np.geomspace(50, 500, 20)
    slope = np.polyfit(np.log(x), law.log_pdf(x), 1)[0]
    print(f"alpha={alpha}: log-log slope {slope:.3f} (expect {-(alpha + 1):.1f})")

# while the left tail dies off faster than any exponential
law = laws[1.5]
print("log p at -2, -4, -8:", np.round(law.log_pdf(np.array([-2.0, -4.0, -8.0])), 2))

# Laplace transform from the table against the closed form
lam = 1.0
body = np.exp(-lam * law.x) * law.p
approx = np.trapezoid(body, law.x)
print(f"E exp(-z) from the table {approx:.8f}, exact {np.exp(laplace_exponent(1.5, lam)):.8f}")

# The score H0 = (log p)' drives the estimator; it is bounded on the right
x = np.array([-3.0, -1.0, 0.0, 1.0, 5.0, 50.0])
print("score:", np.round(law.score(x), 4))
