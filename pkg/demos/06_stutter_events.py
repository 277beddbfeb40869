"""Stutter-event detection over a hand-built phone timeline.

One prolonged fricative, one part-word repetition, and one block, plus a
silence at a turn boundary that must NOT count as a block.
"""

from stanalyzer.events import (
    detect_blocks,
    detect_prolongations,
    detect_repetitions,
    merge_events,
)
from stanalyzer.phones import PhoneSegment, parse_phone_table

phone_set = parse_phone_table(
    "\n".join(["a\tvowel", "k\tplosive", "s\tfricative",
               "n\tnasal", "l\tapproximant", "sil\tsilence"])
)

def seq(start, *items):
    out, t = [], start
    for phone, duration in items:
        out.append(PhoneSegment(phone, t, t + duration, 0.9))
        t += duration
    return out

# client turn one: s-s-s repetition, then a prolonged s later on
turn_one = seq(
    0.0,
    ("s", 0.1), ("sil", 0.1), ("s", 0.1), ("sil", 0.1), ("s", 0.1),
    ("a", 0.2), ("n", 0.1), ("s", 0.1), ("a", 0.15),
    ("s", 0.55),                      # prolonged: >= 3x the s median
    ("a", 0.2),
)
# client turn two (after a therapist turn): block inside, 0.9 s of stuck silence
turn_two = seq(4.0, ("k", 0.1), ("a", 0.2), ("sil", 0.9), ("a", 0.3), ("n", 0.1))

phones = turn_one + turn_two
labeled_segments = [
    (0.0, 1.8, "client"),
    (2.2, 3.6, "therapist"),
    (4.0, 5.6, "client"),
]

events = merge_events(
    detect_prolongations(phones, phone_set)
    + detect_repetitions(phones)
    + detect_blocks(phones, labeled_segments)
)

print(f"{len(events)} events:")
for event in events:
    print(f"  {event.kind:<12} [{event.start_s:.2f}, {event.end_s:.2f}] s "
          f"score {event.score:.2f}  evidence {event.evidence}")
