"""Writes embeddings-synthetic.txt: random 16-d word vectors for every word
in the COCO class names, with a few class pairs placed close together so
that bottle->wine glass, cup->bowl, spoon->fork, surfboard->skateboard,
motorcycle->bicycle and sink->toilet are nearest neighbours."""

import random

CLASSES = [
    "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train", "truck", "boat",
    "traffic light", "fire hydrant", "stop sign", "parking meter", "bench", "bird", "cat", "dog",
    "horse", "sheep", "cow", "elephant", "bear", "zebra", "giraffe", "backpack", "umbrella",
    "handbag", "tie", "suitcase", "frisbee", "skis", "snowboard", "sports ball", "kite",
    "baseball bat", "baseball glove", "skateboard", "surfboard", "tennis racket", "bottle",
    "wine glass", "cup", "fork", "knife", "spoon", "bowl", "banana", "apple", "sandwich", "orange",
    "broccoli", "carrot", "hot dog", "pizza", "donut", "cake", "chair", "couch", "potted plant",
    "bed", "dining table", "toilet", "tv", "laptop", "mouse", "remote", "keyboard", "cell phone",
    "microwave", "oven", "toaster", "sink", "refrigerator", "book", "clock", "vase", "scissors",
    "teddy bear", "hair drier", "toothbrush",
]
DIM = 16
PAIRS = [("bottle", "wine glass"), ("cup", "bowl"), ("spoon", "fork"),
         ("surfboard", "skateboard"), ("motorcycle", "bicycle"), ("sink", "toilet")]

rng = random.Random(20210901)
vec = {}
for name in CLASSES:
    for w in name.split():
        if w not in vec:
            vec[w] = [rng.gauss(0, 1) for _ in range(DIM)]


def near(src, scale=0.1):
    return [x + rng.gauss(0, scale) for x in src]


for src, dst in PAIRS:
    words = dst.split()
    if len(words) == 1:
        vec[dst] = near(vec[src])
    else:
        # two words whose mean lands next to src
        centre = near(vec[src])
        offset = [rng.gauss(0, 1) for _ in range(DIM)]
        vec[words[0]] = [c + o for c, o in zip(centre, offset)]
        vec[words[1]] = [c - o for c, o in zip(centre, offset)]

with open("embeddings-synthetic.txt", "w") as f:
    for w in sorted(vec):
        f.write(w + " " + " ".join(f"{x:.5f}" for x in vec[w]) + "\n")
