"""
How much does the prior matter?
===============================

Closed-form evaluation without simulation: for a fixed schedule the MSE
of the weighted-sum reconstructor is a closed-form function of the kernel
it was designed with and the true covariance.  Here the true covariance is
estimated from many clustered channels and three priors are compared.
"""

import numpy as np

import fasbar
from fasbar.analysis import lemma1_mse, lemma2_min_mse
from fasbar.kernels import covariance_kernel

geometry = fasbar.ArrayGeometry(64)
noise = 0.01
truth = covariance_kernel(
    [fasbar.generate_ssc_channel(geometry, fasbar.SscParams(), (3, t)) for t in range(4000)]
)
training = covariance_kernel(
    [fasbar.generate_ssc_channel(geometry, fasbar.SscParams(), (4, t)) for t in range(100)]
)
power = np.trace(truth.matrix).real

priors = {
    "exponential": fasbar.exponential_kernel(geometry),
    "bessel": fasbar.bessel_kernel(geometry),
    "sample covariance (T=100)": training,
}

print(f"{'P*M':>5}" + "".join(f"{k:>28}" for k in priors))
for count in (4, 8, 16, 24, 32):
    row = []
    for kernel in priors.values():
        plan = fasbar.design_plan(kernel, count, 1, noise)
        row.append(10 * np.log10(lemma1_mse(kernel, truth, plan.schedule, noise) / power))
    print(f"{count:>5}" + "".join(f"{v:>28.2f}" for v in row))
print(f"full-observation LMMSE floor: {10 * np.log10(lemma2_min_mse(truth, noise) / power):.2f} dB")
