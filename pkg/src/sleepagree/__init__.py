"""Agreement protocols with low awake time in the synchronous sleeping model.

A deterministic round simulator with sleep and crash/Byzantine semantics,
graded agreement, recursive crash agreement (plain, 1-preference and the
f+1-block optimization), fault enumeration and property checkers.
"""
from .adversary import (AdversarySpec, Crash, CrashSchedule, builtin_strategy,
                        enumerate_crash_schedules, random_crash_schedule, validate)
from .engine import SimConfig, SimResult, metrics_of, replay_hash, run_simulation
from .errors import (ConfigInvalid, EmptySubgroup, NonBinaryValue, ProtocolStuck, SizeLimit,
                     UnknownStrategy)
from .model import BOTTOM, GradedOutput, Metrics, Transcript
from .protocols import (BaseVariant, ProtocolConfig, Thresholds, awake_bound, duration,
                        make_protocol, partition_opt, subgroup)
from .verify import (FaultView, Verdict, check_1_preference, check_agreement, check_complexity,
                     check_gba, check_honest_confirm_uniqueness, check_validity, exhaustive_verify)

__version__ = "0.1.0"
