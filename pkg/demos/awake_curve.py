"""
Awake time of the block-partitioned variant
===========================================

Fixed f, growing n: awake time does not move.  Fixed n, growing f: it grows
like log f.
"""
from sleepagree.harness import SweepConfig, rows_to_csv, sweep

print(rows_to_csv(sweep(SweepConfig("opt_rca", ns=[16, 64, 256, 1024], fs=[3]))))
print(rows_to_csv(sweep(SweepConfig("opt_rca", ns=[256], fs=[1, 3, 7, 15, 31, 63]))))

###############################################################################
# For comparison the plain recursive protocol, whose awake time tracks log n.

print(rows_to_csv(sweep(SweepConfig("rca", ns=[16, 64, 256, 1024]))))
