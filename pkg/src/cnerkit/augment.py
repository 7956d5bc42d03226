"""Pseudo labeled samples by same-concept entity replacement.

Every entity surface in the corpus is collected into a per-type inventory.
A pseudo sample picks a random labeled sentence and replaces each of its
mentions (left to right) with a random same-type inventory entry; the
sampled entry may be the original surface.  Entity labels are re-derived
for the new spans and word-boundary labels treat each replaced entity as a
single word, all other characters and boundaries carried over verbatim.

Generation is a pure function of (dataset, inventory, count, seed) and can
be parallelized by splitting the count across derived seeds.
"""

from dataclasses import dataclass

import numpy as np

from . import tagset
from .corpus import Dataset, LabeledSentence


class AugmentError(ValueError):
    pass


def extract_inventory(dataset):
    """Per-type lists of distinct entity surfaces, first-occurrence order."""
    inventory = {}
    for sent in dataset:
        for m in sent.mentions():
            surfaces = inventory.setdefault(m.type, [])
            surface = sent.text[m.start:m.end]
            if surface not in surfaces:
                surfaces.append(surface)
    return inventory


@dataclass
class PseudoSample:
    sample: LabeledSentence
    source_index: int
    replacements: list  # (original Mention, new surface)


def replace_mentions(sent, picks):
    """Rebuild a sentence with each mention's surface swapped for its pick.

    `picks` aligns with sent.mentions() left to right.  Non-entity
    characters, their labels and their word boundaries are preserved; each
    new surface is labeled B,I.. for both tasks.
    """
    mentions = sent.mentions()
    if len(picks) != len(mentions):
        raise AugmentError(f"{len(picks)} picks for {len(mentions)} mentions")
    parts, ner, cws = [], [], []
    cursor = 0
    new_mentions = []
    for m, new in zip(mentions, picks):
        if not new:
            raise AugmentError("empty replacement surface")
        parts.append(sent.text[cursor:m.start])
        ner.extend(sent.ner[cursor:m.start])
        if sent.cws is not None:
            cws.extend(sent.cws[cursor:m.start])
        offset = sum(len(p) for p in parts)
        new_mentions.append(tagset.Mention(m.type, offset, offset + len(new)))
        parts.append(new)
        ner.append(f"B-{m.type}")
        ner.extend([f"I-{m.type}"] * (len(new) - 1))
        if sent.cws is not None:
            cws.extend(tagset.encode_segmentation([len(new)]))
        cursor = m.end
    parts.append(sent.text[cursor:])
    ner.extend(sent.ner[cursor:])
    if sent.cws is not None:
        cws.extend(sent.cws[cursor:])
    out = LabeledSentence("".join(parts), ner,
                          cws if sent.cws is not None else None, pseudo=True)
    return out, new_mentions


def generate_pseudo(dataset, inventory, count, seed=0):
    """Draw `count` pseudo samples; sentences are chosen uniformly with
    replacement, so entity-free sentences yield unmodified copies."""
    if count < 0:
        raise AugmentError("count must be >= 0")
    if len(dataset) == 0 and count > 0:
        raise AugmentError("cannot generate from an empty dataset")
    rng = np.random.default_rng(seed)
    out = []
    samples = dataset.samples
    for _ in range(count):
        si = int(rng.integers(len(samples)))
        sent = samples[si]
        picks = []
        for m in sent.mentions():
            pool = inventory.get(m.type)
            if not pool:
                raise AugmentError(f"no inventory entries for type {m.type!r}")
            picks.append(pool[int(rng.integers(len(pool)))])
        pseudo, _ = replace_mentions(sent, picks)
        out.append(PseudoSample(pseudo, si, list(zip(sent.mentions(), picks))))
    return out


def merge(dataset, pseudo_samples):
    """Concatenate real and pseudo samples into one dataset, provenance kept."""
    samples = list(dataset.samples)
    for ps in pseudo_samples:
        samples.append(ps.sample if isinstance(ps, PseudoSample) else ps)
    return Dataset.from_samples(samples)
