"""Build benchmark splits and per-category statistics from a video catalog.

Constructs a 2000-video catalog across the 14 anomaly categories, draws the
per-category (20 abnormal, 20 normal) test sets for each supervision mode,
and prints the dataset statistics table.
"""

from ctxvad import CATEGORIES, compute_stats, make_split
from ctxvad.toydata import make_unlabeled_catalog

per_category = {cat: (72, 71 if i < 12 else 70)
                for i, cat in enumerate(CATEGORIES)}
catalog = make_unlabeled_catalog(per_category=per_category)
print(f"catalog: {len(catalog)} videos, {len(CATEGORIES)} categories")

for mode in ("fully", "weakly", "unsupervised"):
    split = make_split(catalog, mode, per_category_test=(20, 20), seed=0)
    by_id = {e.video_id: e for e in catalog}
    train_abnormal = sum(by_id[v].is_abnormal for v in split.train_ids)
    visible = [k for k, v in split.visible_labels.items() if v]
    print(f"{mode:>13}: train {len(split.train_ids):4d} "
          f"({train_abnormal} abnormal), test {len(split.test_ids)}, "
          f"visible labels: {', '.join(visible) or 'none'}")

stats = compute_stats(catalog)
by_cat = {cat: [e for e in catalog if e.category == cat] for cat in CATEGORIES}
print(f"\n{'category':>15}  videos  abnormal  abnormal-frame ratio")
for cat in CATEGORIES:
    entries = by_cat[cat]
    n_abn = sum(e.is_abnormal for e in entries)
    r = stats.per_category_ratio[cat]
    ratio = "-" if r is None else f"{r:.3f}"
    print(f"{cat:>15}  {len(entries):6d}  {n_abn:8d}  {ratio:>8}")
