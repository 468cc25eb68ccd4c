"""
Scoring evidence against a caption
==================================

Each textual evidence document gets a support-refutation score: +1 for every
caption entity it mentions, minus a penalty for frequent entities the caption
does not mention.
"""

from oocstance.entitymatch import EntitySet, build_frequency_index, extract_entities
from oocstance.srs import SrsConfig, srs_score

caption = extract_entities("Barack Obama speaks to reporters in Chicago on Tuesday.")
print("caption entities:", caption.entities)

# three retrieved articles; the last two keep talking about someone else
docs = [
    EntitySet.from_raw(["Obama's", "Chicago"]),
    EntitySet.from_raw(["Angela Merkel", "Berlin"]),
    EntitySet.from_raw(["Angela Merkel", "Chicago"]),
]

# the frequency index ranks entities by how many documents mention them
index = build_frequency_index(docs)
for e in index.entries:
    print(f"  rank {e.rank}: {e.entity!r} in {e.count} docs")

for doc in docs:
    s = srs_score(doc, caption, index)
    conflicts = ", ".join(f"{t.entity}@{t.rank}" for t in s.conflict_terms) or "none"
    print(f"{doc.entities}: SRS {s.value:+.4f}  shared {s.shared_count}  conflicts {conflicts}")

# the proportional normalizer damps penalties more when many entities agree
cfg = SrsConfig(zeta_mode="proportion", zeta_scale=0.5)
print("proportion mode:", [round(srs_score(d, caption, index, cfg).value, 4) for d in docs])
