# # Projecting onto the clipped simplex
#
# The sampler keeps a probability vector over data providers. After each
# round it tilts that vector by the estimated utilities and projects it back
# onto the simplex with a floor of alpha / n per provider, so nobody's
# probability ever reaches zero.

import numpy as np

from datamarket import Distribution, kl_project, osmd_update

np.set_printoptions(precision=4, suppress=True)

# Start with four providers, one of them nearly worthless.

y = np.array([0.01, 1.0, 1.0, 1.0])
for alpha in (0.0, 0.4, 1.0):
    print(f"alpha={alpha}:", kl_project(y, alpha).probs)

# With alpha = 0 we just normalize. With alpha = 0.4 the floor is 0.1 and
# the small weight is pinned there; the others share what is left in
# proportion to their weights. With alpha = 1 everything is uniform.

# Now one update step. Provider 0 reports a large gain and provider 3 a loss.

p = Distribution.uniform(4, alpha=0.2)
u_hat = np.array([3.0, 0.0, 0.0, -3.0])
for eta in (0.1, 1.0, 10.0):
    q = osmd_update(p, u_hat, eta)
    print(f"eta={eta:>4}:", q.probs, " floor =", 0.2 / 4)

# A bigger step size moves more mass toward provider 0, and provider 3 ends
# up pinned on the floor once the tilt is strong enough.

# Repeating the step shows the floor is sticky: a provider on the floor
# that keeps getting no good news stays exactly there.

q = p
for _ in range(5):
    q = osmd_update(q, np.array([1.0, 0.5, 0.5, 0.0]), 5.0)
    print(q.probs, q.probs[3] == 0.05)
