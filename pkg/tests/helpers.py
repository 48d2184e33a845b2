from __future__ import annotations

from hypothesis import strategies as st

import oracles
from pancap.evaluate import PreExtracted
from pancap.fixtures import render_caption
from pancap.matching import SynonymLexicon
from pancap.types import BoundingBox, EntityInstance, SemanticContent, SemanticItem


@st.composite
def boxes(draw, limit: int = 1000) -> BoundingBox:
    x1 = draw(st.integers(0, limit - 2))
    y1 = draw(st.integers(0, limit - 2))
    x2 = draw(st.integers(x1 + 1, limit - 1))
    y2 = draw(st.integers(y1 + 1, limit - 1))
    return BoundingBox(x1, y1, x2, y2)


def pre(content) -> PreExtracted:
    """Pre-extracted input carrying its rendered caption as judge prose."""
    return PreExtracted(content, render_caption(content))


# Ten single-token tags with three synonym entries. Under the hashed
# bag-of-words embedder distinct single tokens have cosine 0, so pair scores
# can be computed exactly.
VOCAB = ["dog", "puppy", "cat", "car", "automobile", "tree", "mat", "sofa", "couch", "lamp"]
VOCAB_LEX = SynonymLexicon({"dog": ["puppy"], "car": ["automobile"], "sofa": ["couch"]})


def random_instances(rng, k):
    out = []
    for i in range(k):
        x1, y1 = rng.randrange(0, 900), rng.randrange(0, 900)
        box = BoundingBox(x1, y1, x1 + rng.randrange(1, 100), y1 + rng.randrange(1, 100))
        out.append(EntityInstance(i + 1, rng.choice(VOCAB), box))
    return out


def exact_pair_score(g, p, mu=10):
    """Pair score from first principles; the vocabulary is single-token, so cosine is 0 or 1."""
    eq = int(g.tag == p.tag)
    syn = int(eq or VOCAB_LEX.share_synset(g.tag, p.tag))
    return mu * mu * eq + mu * syn + eq + oracles.box_iou(g.box.as_list(), p.box.as_list())


def random_content(rng) -> SemanticContent:
    tags = ["dog", "puppy", "cat", "car", "tree", "mat"]
    insts = []
    for i in range(rng.randrange(0, 5)):
        x, y = rng.randrange(0, 800), rng.randrange(0, 800)
        insts.append(EntityInstance(i + 1, rng.choice(tags), BoundingBox(x, y, x + rng.randrange(5, 150), y + rng.randrange(5, 150))))
    items = [SemanticItem("attribute", i.id, rng.choice(["is red", "is small", "is wet"])) for i in insts if rng.random() < 0.5]
    if rng.random() < 0.5:
        items.append(SemanticItem("global", None, rng.choice(["it is dark", "the sky is blue"])))
    return SemanticContent(tuple(insts), tuple(items))
