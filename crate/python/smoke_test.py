"""Smoke test for the wuglab Python module.

Build first:
    cargo build -p wuglab-py --release --features extension-module
then run with pytest or plain python from the repository root.
"""

import importlib.machinery
import importlib.util
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load_module():
    names = ["libwuglab_py.so", "libwuglab_py.dylib", "wuglab_py.dll"]
    for name in names:
        path = ROOT / "target" / "release" / name
        if path.exists():
            loader = importlib.machinery.ExtensionFileLoader("wuglab", str(path))
            spec = importlib.util.spec_from_file_location("wuglab", path, loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    raise RuntimeError("extension not built; see the module docstring")


wuglab = load_module()

NOUNS = [
    ("Hund", "Hunde", "m"),
    ("Katze", "Katzen", "f"),
    ("Kind", "Kinder", "n"),
    ("Auto", "Autos", "n"),
    ("Lehrer", "Lehrer", "m"),
    ("Buch", "Bücher", "n"),
]


def test_morphology():
    assert wuglab.classify_plural("Kuh", "Kühe") == ("e", True)
    assert wuglab.classify_plural("Auto", "Autos") == ("s", False)
    assert wuglab.umlautize("Haus") == "Häus"
    assert wuglab.apply_class("Wald", "er", True) == "Wälder"
    forms = [f for _, _, f in wuglab.candidate_forms("Bral")]
    assert forms == ["Bral", "Bräl", "Brale", "Bräle", "Bralen", "Braler", "Bräler", "Brals"]
    assert wuglab.syllable_count("Strasse") == 2


def test_spearman():
    assert abs(wuglab.spearman_rho([1, 2, 3, 4], [10, 20, 30, 40]) - 1.0) < 1e-12
    assert wuglab.spearman_rho([1, 1, 1], [1, 2, 3]) is None


def test_bad_input_raises():
    for call in (lambda: wuglab.umlautize("Bild"), lambda: wuglab.apply_class("Hund", "xx")):
        try:
            call()
        except ValueError:
            continue
        raise AssertionError("expected ValueError")


def test_corpus_stats():
    with tempfile.TemporaryDirectory() as tmp:
        corpus = pathlib.Path(tmp, "nouns.tsv")
        genders = pathlib.Path(tmp, "genders.csv")
        rows = []
        for lemma, plural, _ in NOUNS:
            rows += [f"{lemma}\t{lemma}\tN;NOM;SG", f"{lemma}\t{plural}\tN;NOM;PL"]
        corpus.write_text("\n".join(rows) + "\n", encoding="utf-8")
        genders.write_text("".join(f"{l},{g}\n" for l, _, g in NOUNS), encoding="utf-8")
        stats = wuglab.corpus_stats(str(corpus), str(genders))
    assert stats["all"]["N"] == 6
    assert stats["all"]["e"] == 1
    assert stats["all"]["er"] == 2
    assert stats["neuter"]["N"] == 3


def test_model_train_save_load():
    model = wuglab.Model(NOUNS, seed=3, emb_dim=8, dec_emb_dim=8, hidden=12, layers=1)
    history = model.train(NOUNS, epochs=20, batch_size=3, dropout=0.0)
    assert len(history) == 20
    assert history[-1][1] < history[0][1]
    best = model.inflect("Hund", "m", k=3, beam=4)
    assert len(best) == 3
    assert best[0][1] >= best[1][1] >= best[2][1]
    with tempfile.TemporaryDirectory() as tmp:
        model.save(tmp)
        again = wuglab.Model.load(tmp)
        assert again.seed == 3
        assert again.param_count == model.param_count
        assert again.inflect("Hund", "m", k=3, beam=4) == best


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok {name}")
    sys.exit(0)
