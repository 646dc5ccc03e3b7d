"""Aggregate per-annotator interval marks into a single frame-label track.

Five annotators each mark abnormal intervals on the same 100-frame video.
The consensus track labels a frame abnormal when the mean of the binary
annotator tracks reaches 0.5, i.e. a majority for an odd annotator count.
"""

import numpy as np

from ctxvad import AnnotationRecord, aggregate_frame_labels, video_label

FRAMES = 100

records = [
    AnnotationRecord("demo", "a0", ((30, 50),)),
    AnnotationRecord("demo", "a1", ((28, 48),)),
    AnnotationRecord("demo", "a2", ((32, 55),)),
    AnnotationRecord("demo", "a3", ()),            # saw nothing abnormal
    AnnotationRecord("demo", "a4", ((30, 50), (80, 85))),
]

track = aggregate_frame_labels(records, FRAMES)
abnormal = np.nonzero(track.labels)[0]
print(f"abnormal frames: {abnormal.min()}..{abnormal.max()} "
      f"({len(abnormal)} of {FRAMES})")
print(f"video label: {'abnormal' if video_label(track) else 'normal'}")

# the lone [80, 85] mark is below the threshold, so it drops out
assert track.labels[80:86].sum() == 0
# frames 32..48 carry 3+ of 5 votes and survive
assert track.labels[32:49].all()
