import http.server
import struct
import threading
import urllib.parse

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wikibitext.embeddings import (EmbeddingProviderSpec, VectorFile, builtin_fallback_embed,
                                   decode_records, embed_batch, embed_matrix, encode_records,
                                   write_vector_file)
from wikibitext.errors import DegenerateInputError, MissingVectorError, ProviderError, ShapeError
from wikibitext.ingest import Sentence
from wikibitext.mining import MiningConfig, mine_pairs, pairs_tsv

FALLBACK = EmbeddingProviderSpec("builtin-fallback", 64)


def sentences(lang, texts, title="T"):
    return [Sentence((lang, title), i, t) for i, t in enumerate(texts)]


def cos(a, b):
    return float(np.dot(builtin_fallback_embed(a, 256).values, builtin_fallback_embed(b, 256).values))


def test_spec_validation():
    with pytest.raises(ValueError):
        EmbeddingProviderSpec("builtin-fallback", 1)
    with pytest.raises(ValueError):
        EmbeddingProviderSpec("precomputed-file", 8)
    with pytest.raises(ValueError):
        EmbeddingProviderSpec("laser", 8, "x")


def test_fallback_is_deterministic():
    a = builtin_fallback_embed("The cat sat on the mat.", 128).values
    b = builtin_fallback_embed("The cat sat on the mat.", 128).values
    assert a.tobytes() == b.tobytes()


def test_fallback_identical_text_has_cosine_one():
    assert cos("cat sat", "cat sat") == pytest.approx(1.0, abs=1e-12)


def test_fallback_similarity_ordering():
    assert cos("cat sat", "xylophone quarry") < cos("cat sat", "the cat sat")


def test_fallback_is_case_insensitive():
    assert cos("Cat Sat", "cat sat") == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("text", ["", "   \n"])
def test_fallback_empty_text(text):
    with pytest.raises(DegenerateInputError):
        builtin_fallback_embed(text, 16)


def test_single_character_still_embeds():
    v = builtin_fallback_embed("a", 16).values
    assert np.linalg.norm(v) == pytest.approx(1.0)


@settings(max_examples=200, deadline=None)
@given(st.text(min_size=1).filter(lambda s: s.strip()), st.integers(2, 512))
def test_fallback_unit_norm(text, dim):
    v = builtin_fallback_embed(text, dim).values
    assert v.shape == (dim,)
    assert abs(np.linalg.norm(v) - 1.0) <= 1e-6


def test_embed_batch_order_and_refs():
    sents = sentences("en", ["First one here.", "Second one here.", "Third."])
    out = embed_batch(FALLBACK, sents)
    assert [v.sentence_ref for v in out] == [s.ref for s in sents]
    for v, s in zip(out, sents):
        assert np.allclose(v.values, builtin_fallback_embed(s.text, 64).values, rtol=0, atol=1e-12)
    again = embed_batch(FALLBACK, sents)
    assert all(a.values.tobytes() == b.values.tobytes() for a, b in zip(out, again))
    assert embed_batch(FALLBACK, []) == []


def test_vector_file_is_bit_exact(tmp_path):
    path = tmp_path / "v.bin"
    write_vector_file(path, 2, [("en\tA\t0", [1.0, 2.0]), ("es\tÁ\t1", [0.5, -0.25])])
    k0, k1 = "en\tA\t0".encode(), "es\tÁ\t1".encode()
    expected = (struct.pack("<4sIIQ", b"WBVF", 1, 2, 2)
                + struct.pack("<I", len(k0)) + k0 + struct.pack("<2f", 1.0, 2.0)
                + struct.pack("<I", len(k1)) + k1 + struct.pack("<2f", 0.5, -0.25))
    assert path.read_bytes() == expected


def test_precomputed_vectors_are_renormalized(tmp_path):
    path = tmp_path / "v.bin"
    sents = sentences("es", ["Uno.", "Dos.", "Tres."])
    raw = np.array([[3.0, 4.0, 0.0], [0.0, 0.0, 2.0], [1.0, 1.0, 1.0]])
    write_vector_file(path, 3, [(s.ref.key(), row) for s, row in zip(sents, raw)])
    spec = EmbeddingProviderSpec("precomputed-file", 3, str(path))
    out = embed_batch(spec, list(reversed(sents)))
    expected = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    for v in out:
        assert np.allclose(v.values, expected[v.sentence_ref.index], atol=1e-7)
        assert abs(np.linalg.norm(v.values) - 1) <= 1e-6


def test_precomputed_without_sidecar(tmp_path):
    path = tmp_path / "v.bin"
    write_vector_file(path, 2, [("en\tA\t0", [1.0, 0.0]), ("en\tA\t1", [0.0, 1.0])])
    (tmp_path / "v.bin.idx").unlink()
    vf = VectorFile(path)
    assert vf.get("en\tA\t1").tolist() == [0.0, 1.0]
    assert vf.get("en\tA\t2") is None


def test_missing_vector_names_the_sentence(tmp_path):
    path = tmp_path / "v.bin"
    write_vector_file(path, 2, [("en\tA\t0", [1.0, 0.0])])
    spec = EmbeddingProviderSpec("precomputed-file", 2, str(path))
    with pytest.raises(MissingVectorError) as info:
        embed_batch(spec, [Sentence(("en", "A"), 1, "Missing.")])
    assert "en" in str(info.value) and "A" in str(info.value) and "1" in str(info.value)


def test_dimension_mismatch(tmp_path):
    path = tmp_path / "v.bin"
    write_vector_file(path, 2, [("en\tA\t0", [1.0, 0.0])])
    with pytest.raises(ShapeError):
        embed_batch(EmbeddingProviderSpec("precomputed-file", 3, str(path)),
                    [Sentence(("en", "A"), 0, "x")])


def test_unreadable_vector_file(tmp_path):
    with pytest.raises(ProviderError):
        embed_batch(EmbeddingProviderSpec("precomputed-file", 2, str(tmp_path / "none.bin")),
                    [Sentence(("en", "A"), 0, "x")])


def test_record_codec_round_trip():
    m = np.arange(6, dtype=np.float32).reshape(2, 3)
    recs = decode_records(encode_records(["a", "b"], m), 3)
    assert [k for k, _ in recs] == ["a", "b"]
    assert np.array_equal(np.stack([v for _, v in recs]), m)
    with pytest.raises(ProviderError):
        decode_records(encode_records(["a"], m[:1])[:-1], 3)


class _EncoderHandler(http.server.BaseHTTPRequestHandler):
    calls: list = []

    def do_POST(self):
        lang = urllib.parse.parse_qs(urllib.parse.urlparse(self.path).query)["language"][0]
        body = self.rfile.read(int(self.headers["Content-Length"])).decode("utf-8")
        texts = body.split("\n")
        self.calls.append((lang, texts))
        # scaled so the client has to renormalize
        matrix = np.stack([3.0 * builtin_fallback_embed(t, 64).values for t in texts])
        payload = encode_records([""] * len(texts), matrix)
        self.send_response(200)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture()
def encoder_service():
    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _EncoderHandler)
    _EncoderHandler.calls = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/embed"
    server.shutdown()
    server.server_close()


def test_service_provider(encoder_service):
    spec = EmbeddingProviderSpec("external-service", 64, encoder_service)
    sents = sentences("en", ["Hello there.", "General news."]) + sentences("es", ["Hola."])
    out = embed_matrix(spec, sents)
    ref = embed_matrix(FALLBACK, sents)
    assert np.allclose(out, ref, atol=1e-6)
    assert sorted(_EncoderHandler.calls) == [("en", ["Hello there.", "General news."]), ("es", ["Hola."])]


def test_service_unavailable():
    spec = EmbeddingProviderSpec("external-service", 8, "http://127.0.0.1:9/none")
    with pytest.raises(ProviderError):
        embed_batch(spec, sentences("en", ["x y z"]))


def test_provider_substitutability(tmp_path):
    src = sentences("en", ["The river runs north.", "She wrote two novels.", "A cold winter came."])
    tgt = sentences("es", ["The river runs north!", "She wrote two novel.", "Completely different."])
    path = tmp_path / "v.bin"
    write_vector_file(path, 64, [(s.ref.key(), builtin_fallback_embed(s.text, 64).values)
                                 for s in src + tgt])
    file_spec = EmbeddingProviderSpec("precomputed-file", 64, str(path))
    config = MiningConfig(margin_threshold=0)
    a = mine_pairs(embed_batch(FALLBACK, src), embed_batch(FALLBACK, tgt), config)
    b = mine_pairs(embed_batch(file_spec, src), embed_batch(file_spec, tgt), config)
    # the file stores float32, so compare the mined alignment and rounded scores
    assert [(p.source_ref, p.target_ref) for p in a] == [(p.source_ref, p.target_ref) for p in b]
    assert pairs_tsv(a) == pairs_tsv(b)


def test_cosine_equals_dot_for_unit_vectors():
    rng = np.random.default_rng(0)
    texts = [" ".join(rng.choice(list("abcdefghij"), size=8)) for _ in range(40)]
    vecs = [builtin_fallback_embed(t, 96).values for t in texts]
    for _ in range(200):
        i, j = rng.integers(0, len(vecs), size=2)
        a, b = vecs[i], vecs[j]
        cosine = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
        assert abs(cosine - np.dot(a, b)) <= 1e-9
