"""Synthetic corpus generator with known ground truth.

Generates record files whose planted structure (topic membership,
per-year totals, dataset tallies, benchmark fractions) is returned
alongside the records, so pipeline output can be checked against exact
expectations. Each planted topic draws from its own disjoint term pool
plus a shared common pool, which keeps topics linearly separable in
embedding space without making documents identical.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import VENUES, PaperRecord, serialize_record

_TOPIC_POOLS = [
    ["graph", "node", "edge", "spectral", "message", "passing", "adjacency",
     "laplacian", "heterophily", "subgraph", "motif", "random", "walk",
     "embedding", "link", "prediction", "community", "propagation",
     "attention", "pooling", "readout", "topology", "neighborhood",
     "aggregation", "relational", "knowledge", "entity", "triple"],
    ["diffusion", "denoising", "latent", "sampler", "guidance", "noise",
     "schedule", "generative", "image", "synthesis", "inpainting", "pixel",
     "score", "stochastic", "reverse", "process", "conditioning", "text",
     "prompt", "editing", "style", "fidelity", "resolution", "upscaling",
     "artifact", "perceptual", "photorealistic", "rendering"],
    ["translation", "multilingual", "token", "decoder", "encoder", "beam",
     "search", "bilingual", "corpus", "alignment", "subword", "vocabulary",
     "fluency", "adequacy", "bleu", "low", "resource", "transfer",
     "language", "pair", "sentence", "parallel", "back", "transliteration",
     "morphology", "syntax", "pivot", "lexicon"],
    ["reinforcement", "policy", "reward", "agent", "environment", "exploration",
     "exploitation", "bellman", "value", "critic", "actor", "trajectory",
     "rollout", "discount", "markov", "bandit", "regret", "horizon",
     "simulator", "planning", "offline", "replay", "buffer", "curriculum",
     "imitation", "demonstration", "safety", "constraint"],
    ["adversarial", "attack", "robustness", "perturbation", "defense",
     "certified", "threat", "poisoning", "backdoor", "detection", "privacy",
     "differential", "membership", "inference", "watermark", "evasion",
     "gradient", "masking", "transferability", "norm", "bounded", "epsilon",
     "malware", "intrusion", "anomaly", "forensics", "obfuscation", "audit"],
    ["speech", "acoustic", "phoneme", "recognition", "audio", "waveform",
     "spectrogram", "prosody", "speaker", "diarization", "enhancement",
     "separation", "vocoder", "synthesis", "utterance", "transcription",
     "keyword", "spotting", "voice", "conversion", "emotion", "accent",
     "microphone", "noise", "reverberation", "codec", "streaming", "latency"],
]

_COMMON_POOL = [
    "model", "learning", "training", "method", "data", "results",
    "performance", "approach", "task", "evaluation", "deep", "neural",
    "network", "framework", "analysis", "benchmark", "baseline", "study",
]

_TOPIC_DATASETS = [
    ["OGB-Arxiv", "Cora"],
    ["LAION", "CelebA"],
    ["WMT14", "FLORES"],
    ["Atari", "MuJoCo"],
    ["CIFAR-10-C", "MalwareDB"],
    ["LibriSpeech", "VoxCeleb"],
]

_SHARED_DATASETS = ["ImageNet", "COCO", "MMLU", "GSM8K", "MATH"]

_ARCHITECTURES = ["transformer", "resnet", "unet", "mlp", "conformer", "gnn"]

_INSTITUTIONS = [
    "Aalto University", "Basel Institute", "Cascadia Labs", "Delta Research",
    "Evergreen University", "Fermat Institute", "Granite AI", "Harbor College",
    "Iris Computing", "Juniper University",
]

_NOVELTY_TYPES = [
    "Algorithm / Model", "Theory / Analysis", "Application / System",
    "Methodological Improvement",
]
_FIELD_POSITIONS = [
    "Methodological Innovation", "Foundational Work", "Application Validation",
    "Trend Extension",
]


@dataclass
class GroundTruth:
    """Planted facts about a generated corpus."""

    topic_of: dict[str, int] = field(default_factory=dict)
    year_counts: Counter = field(default_factory=Counter)
    venue_counts: Counter = field(default_factory=Counter)
    dataset_counts: dict = field(default_factory=lambda: defaultdict(Counter))
    benchmark_by_year: Counter = field(default_factory=Counter)
    totals_by_year: Counter = field(default_factory=Counter)
    n_topics: int = 0


def _topic_pool(index: int) -> list[str]:
    if index < len(_TOPIC_POOLS):
        return _TOPIC_POOLS[index]
    return [f"field{index}term{j}" for j in range(28)]


def _topic_datasets(index: int) -> list[str]:
    if index < len(_TOPIC_DATASETS):
        return _TOPIC_DATASETS[index]
    return [f"SynthSet{index}A", f"SynthSet{index}B"]


def generate_corpus(n_records: int = 2000, n_topics: int = 6, seed: int = 42,
                    years: tuple[int, ...] = (2020, 2021, 2022, 2023, 2024, 2025),
                    benchmark_fraction: float = 0.12,
                    topic_token_share: float = 0.8,
                    doc_tokens: int = 48,
                    gpu_fraction: float = 0.6,
                    malformed_gpu_fraction: float = 0.02,
                    ) -> tuple[list[PaperRecord], GroundTruth]:
    """Generate records with planted topics and recorded ground truth."""
    rng = np.random.default_rng(seed)
    truth = GroundTruth(n_topics=n_topics)
    records: list[PaperRecord] = []

    year_weights = np.linspace(1.0, 2.0, len(years))
    year_weights /= year_weights.sum()

    for i in range(n_records):
        topic = i % n_topics
        pool = _topic_pool(topic)
        year = int(rng.choice(years, p=year_weights))
        venue = VENUES[int(rng.integers(0, len(VENUES)))]

        def draw(count: int) -> list[str]:
            words = []
            for _ in range(count):
                if rng.random() < topic_token_share:
                    words.append(pool[int(rng.integers(0, len(pool)))])
                else:
                    words.append(_COMMON_POOL[int(rng.integers(0, len(_COMMON_POOL)))])
            return words

        title_words = draw(6)
        title = " ".join(title_words).title() + f" {i:05d}"
        abstract = " ".join(draw(doc_tokens))
        keywords = sorted({pool[int(rng.integers(0, len(pool)))] for _ in range(4)})

        datasets = []
        for name in _topic_datasets(topic):
            if rng.random() < 0.5:
                datasets.append(name)
        if rng.random() < 0.3:
            datasets.append(_SHARED_DATASETS[int(rng.integers(0, len(_SHARED_DATASETS)))])

        is_benchmark = rng.random() < benchmark_fraction
        if is_benchmark:
            field_positioning = "Benchmark / Dataset Contribution"
            novelty = "Benchmark / Dataset"
        else:
            field_positioning = _FIELD_POSITIONS[int(rng.integers(0, len(_FIELD_POSITIONS)))]
            novelty = _NOVELTY_TYPES[int(rng.integers(0, len(_NOVELTY_TYPES)))]

        gpu_info = ""
        if rng.random() < gpu_fraction:
            if rng.random() < malformed_gpu_fraction:
                gpu_info = "A100 x8"
            else:
                count = int(rng.choice([1, 2, 4, 8]))
                model = ["A100", "V100", "H100", "RTX3090"][int(rng.integers(0, 4))]
                hours = int(rng.integers(1, 200))
                gpu_info = f"{count}*{model}*{hours}"

        n_inst = int(rng.integers(1, 4))
        institutions = sorted(
            {_INSTITUTIONS[int(rng.integers(0, len(_INSTITUTIONS)))] for _ in range(n_inst)}
        )

        age = max(years) - year
        citations = int(rng.poisson(3.0 * (age + 1)))

        record = PaperRecord(
            record_id=f"syn-{i:05d}",
            paper_name=title,
            year=year,
            conference=venue,
            authors=[f"Author {chr(65 + int(rng.integers(0, 26)))}. {j}" for j in range(int(rng.integers(1, 4)))],
            citations=citations,
            keywords=keywords,
            keywords_description={k: f"term used for {k}" for k in keywords[:2]},
            abstract_ori=abstract,
            abstract_summary=abstract,
            problem_statement=" ".join(draw(12)),
            contributions=[" ".join(draw(8)) for _ in range(2)],
            methods=" ".join(draw(16)),
            architecture=_ARCHITECTURES[topic % len(_ARCHITECTURES)],
            loss_function="cross entropy" if topic % 2 == 0 else "contrastive loss",
            training_setup=" ".join(draw(10)),
            datasets=datasets,
            metrics=["accuracy", "f1"] if topic % 2 == 0 else ["bleu", "recall"],
            gpu_info=gpu_info,
            limitations=[" ".join(draw(8))],
            field_positioning=field_positioning,
            novelty_type=novelty,
            institution=institutions,
        )
        records.append(record)

        truth.topic_of[record.record_id] = topic
        truth.year_counts[year] += 1
        truth.venue_counts[venue] += 1
        truth.totals_by_year[year] += 1
        if is_benchmark:
            truth.benchmark_by_year[year] += 1
        for name in datasets:
            truth.dataset_counts[name.lower()][year] += 1

    return records, truth


def write_corpus(records: list[PaperRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(serialize_record(record) + "\n")
    return path
