"""Closed-form math for spotting spoofed-address floods with a small monitor.

An attacker forges source addresses uniformly over the 2^32 IPv4 space; a
monitor watching w addresses sees each attack packet independently with
probability w / 2^32.  That single binomial fact yields the detection
probability, the expected evidence, and an attack-size estimate.
"""
from nettomo import (
    MonitorConfig,
    attack_size_mle,
    detection_probability,
    expected_gap,
    expected_observed,
    observed_count_pmf,
)

m = MonitorConfig(w=2 ** 16)  # a /16 of monitored address space
print(f"monitoring {m.w} of {m.address_space} addresses (fraction {m.w/m.address_space:.2e})")

print("\nattack size d -> detection probability, expected observed packets")
for d in (10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6, 10 ** 7):
    print(f"  d = {d:>9,d}: P(detect) = {detection_probability(m, d):8.6f}, "
          f"E[observed] = {expected_observed(m, d):9.2f}")

d = 10 ** 6
print(f"\ndistribution of the observed count at d = {d:,d}:")
for j in (5, 10, 15, 20, 25):
    print(f"  P(see {j:2d} packets) = {observed_count_pmf(m, d, j):.5f}")

print("\nobserved count -> attack-size estimate (floor(j * N / w)):")
for j in (1, 3, 15, 100):
    print(f"  j = {j:>3d}: d_hat = {attack_size_mle(m, j):,d}")

gap = expected_gap(m)
print("\nexpected attack packets between two detected ones:")
print(f"  geometric mean N/w:          {gap.gap_geometric:,.0f}")
print(f"  series truncated at s = w:   {gap.gap_truncated_as_printed:,.4f}")
print("  (the truncated reading keeps the conventional finite upper limit;")
print("   both are reported since the truncation looks inconsistent)")
