"""
Graded agreement under Byzantine equivocation
=============================================

Seven processors, two of them Byzantine.  The corrupted pair shows its
1-votes to processor 1 only, then confirms 1 to processor 1 and 0 to
processor 2.
"""
from sleepagree.harness import check_scripted_attacks, scripted_confirm_equivocation

for mode in ("paper", "strict"):
    outcome = scripted_confirm_equivocation(mode)
    print(f"-- {mode} thresholds")
    for pid, out in sorted(outcome.result.outputs.items()):
        print(f"   p{pid} -> value {out.value} grade {out.grade}")
    for v in outcome.verdicts:
        print(f"   {v.name:20s} {v.status}")

###############################################################################
# With the ``paper`` thresholds processor 2 adopts the value with the most
# confirmations it saw, which the attackers control.  Requiring f+1
# confirmations before adopting avoids that.

report = check_scripted_attacks()
print("paper_mode_consistency ", report["paper_mode_consistency"])
print("strict_mode_consistency", report["strict_mode_consistency"])
