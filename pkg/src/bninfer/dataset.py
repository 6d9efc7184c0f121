"""Dataset generation: evidence draws labeled by exact inference, one-hot
encoding, train/test splitting and line-record persistence.

The flat encoding concatenates one block per variable, sized by its
cardinality. An observed variable contributes a one-hot block to the input
vector; unobserved blocks stay zero. Targets concatenate the exact posterior
of every variable in the same layout.

Datasets persist as JSONL (one self-describing record per example) next to a
manifest carrying the generation config, the network fingerprint, file
checksums and the train/test evidence overlap rate. Identical seeds produce
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exact import CliqueTree, ImpossibleEvidence
from .network import Evidence, Network, PosteriorSet
from .sampler import forward_sample
from .seeding import EVIDENCE_TAG, SPLIT_TAG, check_seed, rng_for

SCHEMA = "bninfer-dataset-v1"


class GenerationStalled(Exception):
    """Raised when impossible evidence draws keep the generator from making
    progress (100 * n consecutive rejections)."""


@dataclass(frozen=True)
class EncodingLayout:
    """Per-variable offsets into the flat encoding; block i spans
    [offsets[i], offsets[i] + cards[i])."""

    offsets: tuple[int, ...]
    cards: tuple[int, ...]
    total_dim: int

    @classmethod
    def from_cards(cls, cards) -> "EncodingLayout":
        cards = tuple(int(c) for c in cards)
        offsets = tuple(int(x) for x in np.concatenate([[0], np.cumsum(cards)[:-1]]))
        return cls(offsets, cards, int(sum(cards)))

    @classmethod
    def from_network(cls, net: Network) -> "EncodingLayout":
        return cls.from_cards(net.cards)

    def block(self, var: int) -> slice:
        return slice(self.offsets[var], self.offsets[var] + self.cards[var])


@dataclass
class Example:
    evidence: dict[int, int]
    input: np.ndarray
    target: np.ndarray
    p_evidence: float


@dataclass
class DatasetSplit:
    train: list[Example]
    test: list[Example]
    seed: int
    config: dict
    stats: dict = field(default_factory=dict)


def encode_evidence(layout: EncodingLayout, evidence: Evidence) -> np.ndarray:
    """One-hot input vector: a single 1 in each observed variable's block."""
    vec = np.zeros(layout.total_dim)
    for var, val in evidence.items():
        vec[layout.offsets[var] + val] = 1.0
    return vec


def decode_evidence(layout: EncodingLayout, vec: np.ndarray) -> dict[int, int]:
    """Inverse of :func:`encode_evidence`."""
    evidence: dict[int, int] = {}
    for var in range(len(layout.cards)):
        block = np.asarray(vec[layout.block(var)])
        hits = np.flatnonzero(block == 1.0)
        if hits.size > 1:
            raise ValueError(f"block of variable {var} has {hits.size} set entries")
        if hits.size == 1:
            evidence[var] = int(hits[0])
    return evidence


def posteriors_to_target(layout: EncodingLayout, posteriors: PosteriorSet) -> np.ndarray:
    return np.concatenate([np.asarray(p) for p in posteriors])


def target_to_posteriors(layout: EncodingLayout, target: np.ndarray) -> list[np.ndarray]:
    return [np.asarray(target[layout.block(i)]) for i in range(len(layout.cards))]


def sample_evidence(
    net: Network,
    p_obs: float,
    mode: str,
    rng: np.random.Generator,
) -> dict[int, int]:
    """Observe each variable independently with probability ``p_obs``.

    ``uniform`` mode draws each observed value uniformly over the variable's
    values (may produce impossible evidence); ``consistent`` mode reads the
    values off one forward sample, so the evidence always has positive
    probability.
    """
    if not 0.0 <= p_obs <= 1.0:
        raise ValueError(f"p_obs must be in [0, 1], got {p_obs}")
    if mode not in ("uniform", "consistent"):
        raise ValueError(f"mode must be 'uniform' or 'consistent', got {mode!r}")
    observed = rng.random(net.n_variables) < p_obs
    evidence: dict[int, int] = {}
    if mode == "uniform":
        for var in range(net.n_variables):
            if observed[var]:
                evidence[var] = int(rng.integers(net.cards[var]))
    else:
        assignment = forward_sample(net, rng)
        for var in range(net.n_variables):
            if observed[var]:
                evidence[var] = int(assignment[var])
    return evidence


def generate_dataset(
    net: Network,
    n: int,
    p_obs: float = 0.3,
    mode: str = "uniform",
    seed: int = 0,
) -> DatasetSplit:
    """Draw evidence sets, label each with exact posteriors, split 50/50.

    Impossible draws (evidence probability below 1e-12) are discarded and
    redrawn. Each attempt uses a sub-seed derived from (seed, attempt), so
    the retained corpus does not depend on scheduling.
    """
    if n < 2:
        raise ValueError("need n >= 2 to form a train/test split")
    check_seed(seed)
    layout = EncodingLayout.from_network(net)
    tree = CliqueTree(net)
    examples: list[Example] = []
    attempt = 0
    consecutive_bad = 0
    rejected = 0
    while len(examples) < n:
        rng = rng_for(seed, EVIDENCE_TAG, attempt)
        attempt += 1
        evidence = sample_evidence(net, p_obs, mode, rng)
        try:
            posteriors, p_evidence = tree.posteriors(evidence)
        except ImpossibleEvidence:
            rejected += 1
            consecutive_bad += 1
            if consecutive_bad >= 100 * n:
                raise GenerationStalled(
                    f"{consecutive_bad} consecutive impossible evidence draws"
                ) from None
            continue
        consecutive_bad = 0
        examples.append(
            Example(
                evidence=dict(sorted(evidence.items())),
                input=encode_evidence(layout, evidence),
                target=posteriors_to_target(layout, posteriors),
                p_evidence=p_evidence,
            )
        )
    perm = rng_for(seed, SPLIT_TAG).permutation(n)
    n_train = (n + 1) // 2
    train = [examples[i] for i in perm[:n_train]]
    test = [examples[i] for i in perm[n_train:]]
    config = {"n": n, "p_obs": p_obs, "mode": mode, "seed": seed}
    stats = {"attempts": attempt, "rejected_impossible": rejected}
    return DatasetSplit(train, test, seed, config, stats)


# ------------------------------------------------------------- persistence

def network_fingerprint(net: Network) -> str:
    """Stable hash of the network structure and CPT values."""
    h = hashlib.sha256()
    h.update(
        json.dumps(
            {
                "name": net.name,
                "names": net.names,
                "labels": net.labels,
                "parents": net.parents,
            },
            sort_keys=True,
        ).encode()
    )
    for cpt in net.cpts:
        h.update(np.ascontiguousarray(cpt, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def _example_record(net: Network, example: Example) -> str:
    record = {
        "evidence": {
            net.names[var]: net.labels[var][val]
            for var, val in sorted(example.evidence.items())
        },
        "input": [int(x) for x in example.input],
        "target": [float(x) for x in example.target],
        "p_evidence": float(example.p_evidence),
    }
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def _parse_record(net: Network, layout: EncodingLayout, line: str) -> Example:
    record = json.loads(line)
    evidence = {
        net.index(name): net.value_index(net.index(name), label)
        for name, label in record["evidence"].items()
    }
    input_vec = np.asarray(record["input"], dtype=np.float64)
    target = np.asarray(record["target"], dtype=np.float64)
    if input_vec.shape != (layout.total_dim,) or target.shape != (layout.total_dim,):
        raise ValueError("record vectors do not match the network layout")
    return Example(dict(sorted(evidence.items())), input_vec, target, record["p_evidence"])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def evidence_overlap_rate(split: DatasetSplit) -> float:
    """Fraction of test examples whose evidence set also occurs in train."""
    if not split.test:
        return 0.0
    train_keys = {frozenset(ex.evidence.items()) for ex in split.train}
    hits = sum(1 for ex in split.test if frozenset(ex.evidence.items()) in train_keys)
    return hits / len(split.test)


def save_split(split: DatasetSplit, out_dir: str | Path, net: Network) -> dict:
    """Write train.jsonl, test.jsonl and manifest.json; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"train": "train.jsonl", "test": "test.jsonl"}
    for part, rows in (("train", split.train), ("test", split.test)):
        path = out / files[part]
        with open(path, "w", newline="\n") as fh:
            for example in rows:
                fh.write(_example_record(net, example) + "\n")
    manifest = {
        "schema": SCHEMA,
        "network": {"name": net.name, "fingerprint": network_fingerprint(net)},
        "config": split.config,
        "counts": {
            "train": len(split.train),
            "test": len(split.test),
            **split.stats,
        },
        "files": files,
        "checksums": {name: _sha256(out / name) for name in files.values()},
        "evidence_overlap_rate": evidence_overlap_rate(split),
    }
    with open(out / "manifest.json", "w", newline="\n") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def load_split(data_dir: str | Path, net: Network, verify: bool = True) -> DatasetSplit:
    """Read a persisted dataset back; checks the manifest fingerprint against
    ``net`` and the file checksums unless ``verify`` is disabled."""
    data_dir = Path(data_dir)
    manifest = json.loads((data_dir / "manifest.json").read_text())
    if manifest.get("schema") != SCHEMA:
        raise ValueError(f"unrecognized dataset schema {manifest.get('schema')!r}")
    if verify:
        expected = network_fingerprint(net)
        found = manifest["network"]["fingerprint"]
        if found != expected:
            raise ValueError(
                f"dataset was generated against network fingerprint {found}, "
                f"current network is {expected}"
            )
        for name, digest in manifest["checksums"].items():
            actual = _sha256(data_dir / name)
            if actual != digest:
                raise ValueError(f"checksum mismatch for {name}")
    layout = EncodingLayout.from_network(net)
    parts = {}
    for part, name in manifest["files"].items():
        with open(data_dir / name) as fh:
            parts[part] = [_parse_record(net, layout, line) for line in fh]
    config = manifest["config"]
    return DatasetSplit(
        parts["train"], parts["test"], config["seed"], config, manifest["counts"]
    )
