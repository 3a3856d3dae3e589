"""
Checking every crash schedule at n=4
====================================

Every input vector, every crashing set of up to three processors, every
crash round, every subset of recipients for the crash round.
"""
import time

from sleepagree import ProtocolConfig
from sleepagree.verify import exhaustive_verify

start = time.time()
summary = exhaustive_verify(ProtocolConfig("rca", f=3), 4)
for line in summary.lines():
    print(line)
print(f"{summary.runs} runs in {time.time() - start:.1f}s")

###############################################################################
# Schedules whose differences no survivor can observe are collapsed to one
# representative; ``mode="full"`` walks all of them literally (slower).

summary = exhaustive_verify(ProtocolConfig("rca1p", f=3), 4, properties=("one_preference",))
print(summary.to_json()["properties"])
