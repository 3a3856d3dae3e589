"""
The recursive crash agreement calendar
======================================

Who is awake when, for four processors with base-case size 2.
"""
from sleepagree import ProtocolConfig, make_protocol, run_simulation

protocol = make_protocol(ProtocolConfig("rca", f=3), 4)
transcript, outputs, metrics = run_simulation(4, {1: 1, 2: 0, 3: 0, 4: 0}, protocol)

# one row per processor, one column per round; '#' awake, '.' asleep
for pid in range(1, 5):
    row = "".join("#" if pid in rec.awake else "." for rec in transcript.rounds)
    print(f"p{pid}  {row}")

print("outputs   ", outputs)
print("rounds    ", metrics.total_rounds)
print("max awake ", metrics.max_awake)

###############################################################################
# The calendar grows linearly in n while awake time grows with log n.

from sleepagree.protocols import awake_bound, duration

cfg = ProtocolConfig("rca", f=0)
for n in (4, 8, 16, 64, 256, 1024):
    print(f"n={n:5d}  rounds={duration(n, cfg):5d}  awake={awake_bound(n, cfg)}")
