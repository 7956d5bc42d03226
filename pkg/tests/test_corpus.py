import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cnerkit import corpus, tagset
from cnerkit.corpus import (CorpusError, Dataset, LabeledSentence, Vocabulary,
                            build_vocab, load_column_file, load_embeddings,
                            split_train_val, subsample, write_column_file)


def write(tmp_path, text, name="corpus.tsv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_minimal_block(tmp_path):
    path = write(tmp_path, "我\tO\n爱\tO\n北\tB-LOC\n京\tI-LOC\n\n")
    ds = load_column_file(path)
    assert len(ds) == 1
    assert ds.samples[0].text == "我爱北京"
    assert ds.entity_types == {"LOC"}
    assert ds.samples[0].mentions() == [tagset.Mention("LOC", 2, 4)]


def test_load_empty_file(tmp_path):
    ds = load_column_file(write(tmp_path, ""))
    assert len(ds) == 0
    assert ds.entity_types == set()


def test_load_two_mention_block(tmp_path):
    labels = ["B-PER", "I-PER", "O", "B-ORG", "I-ORG", "O", "O"]
    text = "李刚在阿里工作"
    content = "".join(f"{c}\t{l}\n" for c, l in zip(text, labels)) + "\n"
    ds = load_column_file(write(tmp_path, content))
    assert len(ds) == 1
    assert ds.samples[0].mentions() == [
        tagset.Mention("PER", 0, 2), tagset.Mention("ORG", 3, 5)]
    assert ds.entity_types == {"PER", "ORG"}


def test_load_with_cws_column(tmp_path):
    path = write(tmp_path, "北\tB-LOC\tB\n京\tI-LOC\tI\n\n")
    ds = load_column_file(path, has_cws=True)
    assert ds.samples[0].cws == ["B", "I"]


def test_load_reports_line_numbers(tmp_path):
    path = write(tmp_path, "好\tO\n坏\n\n")
    with pytest.raises(CorpusError, match=r":2: expected 2 columns"):
        load_column_file(path)


def test_load_strict_rejects_invalid_bio(tmp_path):
    path = write(tmp_path, "甲\tO\n乙\tI-PER\n\n")
    with pytest.raises(CorpusError, match=r":2: invalid label sequence"):
        load_column_file(path, strict=True)


def test_load_lenient_repairs(tmp_path):
    path = write(tmp_path, "甲\tO\n乙\tI-PER\n\n")
    ds = load_column_file(path, strict=False)
    assert ds.samples[0].ner == ["O", "B-PER"]
    assert ds.repairs == 1


def test_load_bad_label_string(tmp_path):
    path = write(tmp_path, "甲\tQ-PER\n\n")
    with pytest.raises(CorpusError, match=r":1: bad entity label"):
        load_column_file(path)


def test_pseudo_marker_roundtrip(tmp_path):
    ds = Dataset.from_samples([
        LabeledSentence("北京", ["B-LOC", "I-LOC"], pseudo=True),
        LabeledSentence("平安", ["O", "O"]),
    ])
    path = str(tmp_path / "out.tsv")
    write_column_file(ds, path)
    back = load_column_file(path)
    assert [s.pseudo for s in back] == [True, False]


@st.composite
def corpora(draw):
    sentences = []
    for _ in range(draw(st.integers(1, 4))):
        n = draw(st.integers(1, 8))
        text = "".join(draw(st.sampled_from("甲乙丙丁戊")) for _ in range(n))
        mentions = []
        cursor = 0
        while cursor < n and draw(st.booleans()):
            start = draw(st.integers(cursor, n - 1))
            end = draw(st.integers(start + 1, n))
            mentions.append(tagset.Mention(draw(st.sampled_from(["PER", "ORG"])),
                                           start, end))
            cursor = end
        lengths = draw(st.permutations(list(range(1, n + 1)))
                       .filter(lambda p: sum(p) >= n))
        words, total = [], 0
        for w in lengths:
            if total + w > n:
                w = n - total
            if w <= 0:
                break
            words.append(w)
            total += w
        if total < n:
            words.append(n - total)
        sentences.append(LabeledSentence(
            text, tagset.encode_mentions(n, mentions),
            tagset.encode_segmentation(words),
            pseudo=draw(st.booleans())))
    return Dataset.from_samples(sentences)


@given(corpora())
def test_roundtrip_write_then_load(tmp_path_factory, ds):
    path = str(tmp_path_factory.mktemp("rt") / "corpus.tsv")
    write_column_file(ds, path)
    first = open(path, encoding="utf-8").read()
    back = load_column_file(path, has_cws=True)
    assert len(back) == len(ds)
    for a, b in zip(ds, back):
        assert (a.text, a.ner, a.cws, a.pseudo) == (b.text, b.ner, b.cws, b.pseudo)
    write_column_file(back, path)
    assert open(path, encoding="utf-8").read() == first


def test_vocab_counts():
    ds = Dataset.from_samples([
        LabeledSentence("北京", ["O", "O"]),
        LabeledSentence("北", ["O"]),
    ])
    v1 = build_vocab(ds, min_count=1)
    assert len(v1) == 4  # PAD, UNK, 北, 京
    assert set(v1.chars) == {corpus.PAD, corpus.UNK, "北", "京"}
    v2 = build_vocab(ds, min_count=2)
    assert len(v2) == 3
    assert "京" not in v2


def test_vocab_unknown_maps_to_unk():
    v = build_vocab(Dataset.from_samples([LabeledSentence("北", ["O"])]))
    assert v.index("南") == v.unk_index
    assert v.index("北") not in (v.pad_index, v.unk_index)


def test_vocab_indices_are_dense_bijection():
    v = Vocabulary(list("abcdef"))
    indices = [v.index(c) for c in v.chars]
    assert sorted(indices) == list(range(len(v)))


def test_load_embeddings_full_coverage(tmp_path):
    v = Vocabulary(["北", "京"])
    path = write(tmp_path, "北 1.0 2.0\n京 -0.5 0.25\n", "emb.txt")
    loaded = load_embeddings(path, v, dim=2)
    assert loaded.coverage == 1.0
    np.testing.assert_array_equal(loaded.matrix[v.index("北")], [1.0, 2.0])
    np.testing.assert_array_equal(loaded.matrix[v.index("京")], [-0.5, 0.25])
    np.testing.assert_array_equal(loaded.matrix[v.pad_index], 0.0)


def test_load_embeddings_none_found(tmp_path):
    v = Vocabulary(["北", "京"])
    path = write(tmp_path, "南 1.0 2.0\n", "emb.txt")
    loaded = load_embeddings(path, v, dim=2, seed=5)
    assert loaded.coverage == 0.0
    bound = 0.25 / np.sqrt(2)
    rows = np.delete(loaded.matrix, v.pad_index, axis=0)
    assert np.all(np.abs(rows) <= bound)
    assert np.any(rows != 0.0)


def test_load_embeddings_header_and_dim_check(tmp_path):
    v = Vocabulary(["北"])
    path = write(tmp_path, "1 2\n北 1.0 2.0\n", "emb.txt")
    assert load_embeddings(path, v, dim=2).found == 1
    bad = write(tmp_path, "北 1.0\n", "emb2.txt")
    with pytest.raises(CorpusError, match="expected dim"):
        load_embeddings(bad, v, dim=2)
    unparseable = write(tmp_path, "北 1.0 x\n", "emb3.txt")
    with pytest.raises(CorpusError, match="unparseable float"):
        load_embeddings(unparseable, v, dim=2)


def _dataset(n_real, n_pseudo):
    samples = [LabeledSentence(f"{i % 10}", ["O"]) for i in range(n_real)]
    samples += [LabeledSentence(f"{i % 10}", ["O"], pseudo=True)
                for i in range(n_pseudo)]
    return Dataset.from_samples(samples)


def test_split_sizes_and_determinism():
    ds = _dataset(10, 0)
    train1, val1 = split_train_val(ds, 0.1, seed=7)
    train2, val2 = split_train_val(ds, 0.1, seed=7)
    assert len(val1) == 1 and len(train1) == 9
    assert [s.text for s in val1] == [s.text for s in val2]
    assert [s.text for s in train1] == [s.text for s in train2]


def test_split_different_seeds_differ():
    ds = _dataset(100, 0)
    _, val_a = split_train_val(ds, 0.2, seed=1)
    _, val_b = split_train_val(ds, 0.2, seed=2)
    ids = lambda part: {id(s) for s in part}
    assert ids(val_a) != ids(val_b)


def test_split_validation_is_real_only():
    ds = _dataset(5, 5)
    for seed in range(20):
        _, val = split_train_val(ds, 0.2, seed=seed)
        assert len(val) == 2
        assert all(not s.pseudo for s in val)


def test_split_errors():
    with pytest.raises(ValueError):
        split_train_val(_dataset(10, 0), 0.0, seed=0)
    with pytest.raises(CorpusError):
        split_train_val(_dataset(1, 0), 0.5, seed=0)
    # not enough real samples to fill the validation quota
    with pytest.raises(CorpusError):
        split_train_val(_dataset(1, 9), 0.5, seed=0)


def test_subsample_deterministic():
    ds = _dataset(40, 0)
    a = subsample(ds, 0.25, seed=3)
    b = subsample(ds, 0.25, seed=3)
    assert len(a) == 10
    assert [s.text for s in a] == [s.text for s in b]


def test_labeled_sentence_validation():
    with pytest.raises(CorpusError):
        LabeledSentence("", [])
    with pytest.raises(CorpusError):
        LabeledSentence("ab", ["O"])
    with pytest.raises(CorpusError):
        LabeledSentence("a\nb", ["O", "O", "O"])
    with pytest.raises(CorpusError):
        LabeledSentence("ab", ["O", "O"], ["B"])
