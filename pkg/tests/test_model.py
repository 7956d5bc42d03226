import numpy as np
import pytest

from cnerkit import tagset
from cnerkit.corpus import Dataset, LabeledSentence, build_vocab
from cnerkit.model import ModelError, TaggerModel
from synthcorpus import templated_corpus


def small_model(seed=0):
    ds = templated_corpus(10, seed=1)
    return TaggerModel(build_vocab(ds), tagset.label_alphabet(ds.entity_types),
                       embed_dim=6, filters=8, hidden=4, dropout_rate=0.1,
                       seed=seed), ds


def test_parameter_names_cover_contract():
    model, _ = small_model()
    names = [p.name for p in model.parameters()]
    for required in ["embed.E", "cnn.K2.w", "cnn.K5.b", "lstm.fwd.wx",
                     "lstm.bwd.b", "crf.ner.W", "crf.ner.T", "crf.ner.start",
                     "crf.cws.W", "crf.cws.T", "crf.cws.start"]:
        assert required in names
    assert len(names) == len(set(names))


def test_save_load_roundtrip(tmp_path):
    model, ds = small_model()
    path = str(tmp_path / "model.stfc")
    model.save(path)
    back = TaggerModel.load(path)
    assert back.ner_labels == model.ner_labels
    assert back.vocab.chars == model.vocab.chars
    for p, q in zip(model.parameters(), back.parameters()):
        assert p.name == q.name
        np.testing.assert_array_equal(p.data, q.data)
    text = ds.samples[0].text
    assert back.decode(text) == model.decode(text)


def test_save_is_deterministic(tmp_path):
    model, _ = small_model()
    p1, p2 = str(tmp_path / "a.stfc"), str(tmp_path / "b.stfc")
    model.save(p1)
    model.save(p2)
    assert open(p1, "rb").read() == open(p2, "rb").read()
    assert (open(p1 + ".meta.json", encoding="utf-8").read()
            == open(p2 + ".meta.json", encoding="utf-8").read())


def test_load_rejects_shape_mismatch(tmp_path):
    model, _ = small_model()
    path = str(tmp_path / "model.stfc")
    model.save(path)
    other, _ = small_model()
    other.hidden = 4
    meta = open(path + ".meta.json", encoding="utf-8").read()
    bigger = TaggerModel(model.vocab, model.ner_labels, embed_dim=6,
                         filters=8, hidden=9, dropout_rate=0.1)
    bigger.save(str(tmp_path / "big.stfc"))
    # mix the big meta with the small parameter file
    import shutil
    shutil.copy(path, str(tmp_path / "big.stfc"))
    with pytest.raises(ModelError, match="shape"):
        TaggerModel.load(str(tmp_path / "big.stfc"))


def test_decode_constrained_has_legal_transitions():
    # the mask forbids illegal pairs; only position 0 can still be ill-formed
    model, ds = small_model()
    for s in list(ds)[:5]:
        labels, _, _ = model.decode(s.text, constrain_bio=True)
        for a, b in zip(labels, labels[1:]):
            pa, ta = tagset.parse_label(a)
            pb, tb = tagset.parse_label(b)
            if pb == "I":
                assert pa in ("B", "I") and ta == tb


def test_unknown_label_rejected():
    model, _ = small_model()
    with pytest.raises(ModelError):
        model.ner_indices(["B-GPE"])
