"""Subcommand pipeline, exit codes, manifests, determinism."""

import json

import pytest

from paperatlas.cli import run_command
from paperatlas.corpus import CorpusStore
from paperatlas.synth import generate_corpus, write_corpus


@pytest.fixture(scope="module")
def corpus_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "corpus.jsonl"
    records, _ = generate_corpus(n_records=240, n_topics=3, seed=5)
    return write_corpus(records, path)


@pytest.fixture()
def store(tmp_path, corpus_file):
    store_dir = tmp_path / "db"
    assert run_command(["ingest", "--input", str(corpus_file),
                        "--store", str(store_dir)]) == 0
    return store_dir


def _run_chain(store_dir):
    chain = [
        ["vectorize", "--store", str(store_dir), "--dims", "128",
         "--reduce", "pca:8"],
        ["cluster", "--store", str(store_dir), "--min-cluster-size", "30"],
        ["topics", "--store", str(store_dir), "--ngrams", "1,1"],
        ["analyze", "--store", str(store_dir)],
    ]
    for argv in chain:
        assert run_command(argv) == 0, argv


class TestPipeline:
    def test_full_chain_outputs_and_manifests(self, store):
        _run_chain(store)
        for name in ["records.jsonl", "stats.json", "vectors.jsonl",
                     "reduced.jsonl", "clustering.json", "topics.json",
                     "topic_tree.json", "lifecycle.csv", "compute.csv",
                     "benchmark_share.csv", "dataset_usage.csv",
                     "institutions.csv", "collab_pairs.csv", "manifest.jsonl"]:
            assert (store / name).exists(), name
        commands = [json.loads(line)["command"]
                    for line in (store / "manifest.jsonl").read_text().splitlines()]
        assert commands == ["ingest", "vectorize", "cluster", "topics", "analyze"]

    def test_records_carry_topics_after_topics_stage(self, store):
        _run_chain(store)
        loaded = CorpusStore.load(store)
        assert all(r.topic_name for r in loaded.records)
        labels = {r.topic_id for r in loaded.records}
        assert labels - {-1}, "expected at least one real topic"

    def test_rerun_is_byte_identical(self, store):
        _run_chain(store)
        before = {
            name: (store / name).read_bytes()
            for name in ["vectors.jsonl", "reduced.jsonl", "clustering.json",
                         "topics.json", "lifecycle.csv"]
        }
        _run_chain(store)
        for name, blob in before.items():
            assert (store / name).read_bytes() == blob, name

    def test_rerun_manifests_differ_only_in_timestamps(self, store):
        # vectorize twice with untouched inputs: entries must agree on
        # everything except the started/finished stamps
        argv = ["vectorize", "--store", str(store), "--dims", "64"]
        assert run_command(argv) == 0
        assert run_command(argv) == 0
        entries = [json.loads(line) for line in
                   (store / "manifest.jsonl").read_text().splitlines()]
        first, second = entries[-2], entries[-1]
        for key in ("command", "config", "inputs", "version", "warnings"):
            assert first[key] == second[key], key
        assert second["started"] >= first["finished"]

    def test_cluster_before_vectorize_fails_cleanly(self, store, capsys):
        rc = run_command(["cluster", "--store", str(store)])
        assert rc == 1
        assert "missing vectors" in capsys.readouterr().err

    def test_locked_store_is_an_environment_error(self, store):
        (store / ".lock").write_text("123")
        rc = run_command(["vectorize", "--store", str(store), "--dims", "64"])
        assert rc == 2
        (store / ".lock").unlink()


class TestVectorizeImportPath:
    def test_externally_reduced_vectors_flow_through(self, store, tmp_path):
        assert run_command(["vectorize", "--store", str(store),
                            "--dims", "64", "--reduce", "pca:4"]) == 0
        # re-export the reduced space as if an external reducer made it
        from paperatlas.vectorize import VectorSet, export_vectors, import_vectors

        loaded = CorpusStore.load(store)
        reduced = import_vectors(store / "reduced.jsonl", loaded.ids,
                                 space_tag="reduced")
        external = tmp_path / "external.jsonl"
        export_vectors(VectorSet(ids=reduced.ids, vectors=reduced.vectors * 2.0,
                                 space_tag="reduced",
                                 zero_rows=reduced.zero_rows), external)
        assert run_command(["vectorize", "--store", str(store), "--dims", "64",
                            "--reduce", f"import:{external}"]) == 0
        again = import_vectors(store / "reduced.jsonl", loaded.ids,
                               space_tag="reduced")
        assert abs(again.vectors[0][0] - 2.0 * reduced.vectors[0][0]) < 1e-6
        assert run_command(["cluster", "--store", str(store),
                            "--min-cluster-size", "30"]) == 0

    def test_bad_reduce_value_rejected(self, store, capsys):
        rc = run_command(["vectorize", "--store", str(store),
                          "--reduce", "umap:40"])
        assert rc == 1
        assert "--reduce" in capsys.readouterr().err


class TestAnalyzeConfig:
    def test_config_file_changes_outputs(self, store, tmp_path):
        _run_chain(store)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "alpha": 0.9,
            "reference_year": 2025,
            "gpu_table": {"A100": 1.0, "V100": 0.35, "H100": 2.4,
                          "RTX3090": 0.4},
            "dataset_aliases": {"ogb-arxiv": "arxiv"},
        }))
        assert run_command(["analyze", "--store", str(store),
                            "--config", str(cfg)]) == 0
        datasets = (store / "dataset_usage.csv").read_text()
        assert "arxiv" in datasets and "ogb-arxiv" not in datasets
        compute = (store / "compute.csv").read_text().splitlines()
        assert len(compute) > 1  # V100/H100 rows resolve under the table

    def test_bad_config_value_rejected(self, store, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"alpha": 3.0}))
        assert run_command(["analyze", "--store", str(store),
                            "--config", str(cfg)]) == 1


class TestUsageErrors:
    def test_unknown_subcommand(self, capsys):
        assert run_command(["defragment"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_flag(self, capsys):
        assert run_command(["ingest", "--bogus", "x"]) == 1

    def test_missing_input_file_is_io_error(self, tmp_path):
        rc = run_command(["ingest", "--input", str(tmp_path / "nope.jsonl"),
                          "--store", str(tmp_path / "db")])
        assert rc == 2


class TestQueryCommand:
    PLAN = {
        "abstract_summary": "graph message passing",
        "methods": "spectral aggregation",
        "vector_search_plan": [
            {"field": "abstract_summary", "weight": 0.5},
            {"field": "methods", "weight": 0.5},
        ],
    }

    def _prepare(self, store, tmp_path):
        assert run_command(["vectorize", "--store", str(store),
                            "--dims", "128"]) == 0
        plan_path = tmp_path / "plan.json"
        plan_path.write_text(json.dumps(self.PLAN))
        return plan_path

    def test_plan_query_emits_bundle_json(self, store, tmp_path, capsys):
        plan_path = self._prepare(store, tmp_path)
        rc = run_command(["query", "--store", str(store),
                          "--plan", str(plan_path), "-k", "3"])
        assert rc == 0
        bundle = json.loads(capsys.readouterr().out)
        assert len(bundle["sections"][0]["results"]) == 3

    def test_question_fallback_is_deterministic(self, store, tmp_path):
        self._prepare(store, tmp_path)
        outs = []
        for i in range(2):
            out = tmp_path / f"out{i}.json"
            rc = run_command(["query", "--store", str(store),
                              "--question", "graph message passing",
                              "--output", str(out)])
            assert rc == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_table_format(self, store, tmp_path, capsys):
        plan_path = self._prepare(store, tmp_path)
        rc = run_command(["query", "--store", str(store),
                          "--plan", str(plan_path), "--format", "table"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "# sub-query 0" in out

    def test_query_without_plan_or_question(self, store, capsys):
        assert run_command(["query", "--store", str(store)]) == 1

    def test_query_before_vectorize_fails(self, store, tmp_path, capsys):
        plan_path = tmp_path / "plan.json"
        plan_path.write_text(json.dumps(self.PLAN))
        rc = run_command(["query", "--store", str(store),
                          "--plan", str(plan_path)])
        assert rc == 1
        assert "vectorize" in capsys.readouterr().err

    def test_llm_query_with_failing_gateway_succeeds(self, store, tmp_path,
                                                     monkeypatch, capsys):
        self._prepare(store, tmp_path)
        script = tmp_path / "mock.json"
        script.write_text(json.dumps({"*": [{"fail": "gateway down"}]}))
        monkeypatch.setenv("LLM_MOCK_SCRIPT", str(script))
        rc = run_command(["query", "--store", str(store),
                          "--question", "graph methods", "--llm"])
        assert rc == 0
        assert json.loads(capsys.readouterr().out)["sections"]


class TestTopicsWithGateway:
    def test_failing_gateway_still_exits_zero_with_warnings(
            self, store, tmp_path, monkeypatch):
        assert run_command(["vectorize", "--store", str(store), "--dims", "128",
                            "--reduce", "pca:8"]) == 0
        assert run_command(["cluster", "--store", str(store),
                            "--min-cluster-size", "30"]) == 0
        script = tmp_path / "mock.json"
        script.write_text(json.dumps({"*": [{"fail": "always down"}]}))
        monkeypatch.setenv("LLM_MOCK_SCRIPT", str(script))
        rc = run_command(["topics", "--store", str(store), "--llm"])
        assert rc == 0
        last = json.loads(
            (store / "manifest.jsonl").read_text().splitlines()[-1])
        assert last["command"] == "topics"
        assert last["warnings"] > 0

    def test_mock_gateway_names_adopted(self, store, tmp_path, monkeypatch):
        assert run_command(["vectorize", "--store", str(store), "--dims", "128",
                            "--reduce", "pca:8"]) == 0
        assert run_command(["cluster", "--store", str(store),
                            "--min-cluster-size", "30"]) == 0
        script = tmp_path / "mock.json"
        script.write_text(json.dumps({"topic_name": [
            {"response": '{"name": "Scripted Topic", "summary": "From mock."}'}
        ]}))
        monkeypatch.setenv("LLM_MOCK_SCRIPT", str(script))
        assert run_command(["topics", "--store", str(store), "--llm"]) == 0
        topics = json.loads((store / "topics.json").read_text())
        assert all(t["name"] == "Scripted Topic" for t in topics)


class TestExport:
    @pytest.fixture()
    def ready(self, store):
        _run_chain(store)
        return store

    @pytest.mark.parametrize("what", ["lifecycle", "compute", "datasets",
                                      "institutions", "topics"])
    def test_csv_and_json(self, ready, what, capsys):
        assert run_command(["export", "--store", str(ready), "--what", what,
                            "--format", "csv"]) == 0
        csv_text = capsys.readouterr().out
        assert csv_text.strip()
        assert run_command(["export", "--store", str(ready), "--what", what,
                            "--format", "json"]) == 0
        json.loads(capsys.readouterr().out)

    def test_output_flag_writes_file(self, ready, tmp_path):
        out = tmp_path / "lifecycle.json"
        assert run_command(["export", "--store", str(ready),
                            "--what", "lifecycle", "--format", "json",
                            "--output", str(out)]) == 0
        data = json.loads(out.read_text())
        assert data and "topic_id" in data[0]

    def test_topics_export_requires_topics_stage(self, store, capsys):
        assert run_command(["export", "--store", str(store),
                            "--what", "topics"]) == 1
        assert "topics" in capsys.readouterr().err


class TestParsePapers:
    CANNED = {
        "abstract_summary": "A compressed summary.",
        "keywords": ["graphs", "attention"],
        "keywords_explanation": {"graphs": "structure"},
        "methods": "message passing",
        "gpu_info": "8*A100*24",
        "datasets": ["Cora"],
        "novelty_type": "Algorithm / Model",
        "field_positioning": "Methodological Innovation",
        "institution": ["Granite AI"],
    }

    def _inputs(self, tmp_path):
        md_dir = tmp_path / "papers"
        md_dir.mkdir()
        (md_dir / "alpha.md").write_text("# Alpha\nGraphs are nice.")
        (md_dir / "beta.md").write_text("# Beta\nMore graphs.")
        meta = {"alpha.md": {"year": 2024, "conference": "ICML"},
                "beta.md": {"year": 2023, "conference": "CVPR",
                            "paper_name": "Beta Paper"}}
        meta_path = tmp_path / "meta.json"
        meta_path.write_text(json.dumps(meta))
        return md_dir, meta_path

    def test_mocked_parse_populates_fields(self, tmp_path, monkeypatch):
        md_dir, meta_path = self._inputs(tmp_path)
        script = tmp_path / "mock.json"
        script.write_text(json.dumps(
            {"paper_parse": [{"response": json.dumps(self.CANNED)}]}))
        monkeypatch.setenv("LLM_MOCK_SCRIPT", str(script))
        out = tmp_path / "parsed.jsonl"
        rc = run_command(["parse-papers", "--input", str(md_dir),
                          "--meta", str(meta_path), "--output", str(out)])
        assert rc == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 2
        assert lines[0]["paper_name"] == "alpha"
        assert lines[0]["keywords"] == ["graphs", "attention"]
        assert lines[0]["keywords_description"] == {"graphs": "structure"}
        assert lines[1]["paper_name"] == "Beta Paper"
        store_ok = all("year" in l for l in lines)
        assert store_ok

    def test_failing_gateway_degrades_to_metadata(self, tmp_path, monkeypatch):
        md_dir, meta_path = self._inputs(tmp_path)
        script = tmp_path / "mock.json"
        script.write_text(json.dumps({"*": [{"fail": "no service"}]}))
        monkeypatch.setenv("LLM_MOCK_SCRIPT", str(script))
        out = tmp_path / "parsed.jsonl"
        rc = run_command(["parse-papers", "--input", str(md_dir),
                          "--meta", str(meta_path), "--output", str(out)])
        assert rc == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 2
        assert all(not l["keywords"] for l in lines)

    def test_requires_gateway(self, tmp_path, monkeypatch, capsys):
        monkeypatch.delenv("LLM_MOCK_SCRIPT", raising=False)
        monkeypatch.delenv("LLM_ENDPOINT", raising=False)
        md_dir, meta_path = self._inputs(tmp_path)
        rc = run_command(["parse-papers", "--input", str(md_dir),
                          "--meta", str(meta_path),
                          "--output", str(tmp_path / "o.jsonl")])
        assert rc == 1
