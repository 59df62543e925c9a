"""Retrieval evaluation: score grids, recall@K, reports, distance stats.

Scores are cosines.  Ranking sorts descending by score with ties broken
by ascending candidate index, so results never depend on sort internals.
An image-to-text query hits when any of the image's captions lands in
the top K; a text-to-image query hits when the caption's image does.
Recalls are percentages in [0, 100]; mR is the mean of the six recalls.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import no_grad
from .batching import Batch
from .config import TrainConfig, config_hash
from .dataio import Dataset
from .model import CaptionCode, ImageCode, Model
from .rng import PRNG_NAME
from . import roam

REPORT_VERSION = 1
RECALL_KS = (1, 5, 10)


class DegenerateEmbeddingError(ValueError):
    """An embedding that must be compared by cosine has near-zero norm."""


def _normalized(rows: np.ndarray, kind: str, ids: list[int]) -> np.ndarray:
    norms = np.sqrt((rows * rows).sum(axis=1))
    bad = norms < 1e-12
    if bad.any():
        which = ids[int(np.argmax(bad))]
        raise DegenerateEmbeddingError(
            f"{kind} {which} has a near-zero embedding")
    return rows / norms[:, None]


def encode_images(model: Model, ds: Dataset,
                  image_indices: list[int]) -> list[ImageCode]:
    with no_grad():
        return [model.encode_image(ds.msv[i], ds.roi[i]) for i in image_indices]


def encode_captions(model: Model, ds: Dataset, caption_indices: list[int],
                    threads: int = 1) -> list[CaptionCode]:
    if threads <= 1 or len(caption_indices) < 2:
        with no_grad():
            return [model.encode_caption(ds.captions[k].token_ids)
                    for k in caption_indices]
    from concurrent.futures import ThreadPoolExecutor

    def work(k):
        with no_grad():
            return model.encode_caption(ds.captions[k].token_ids)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, caption_indices))


@dataclass
class SimilarityResult:
    scores: np.ndarray        # (n_images, n_texts)
    image_ids: list[int]      # dataset image index per row
    caption_ids: list[int]    # dataset caption index per column
    text_to_image: np.ndarray  # image index per column


def similarity_matrix(model: Model, ds: Dataset, image_indices: list[int],
                      caption_indices: list[int], mode: str = "final",
                      threads: int = 1) -> SimilarityResult:
    """Pairwise cosine grid between images and captions.

    mode "global" scores (V_M, T_G); mode "final" scores
    (V_MR, T_RG(i, j)) -- honoring the configured ablations.
    """
    if mode not in ("final", "global"):
        raise ValueError(f"unknown similarity mode {mode!r}")
    if not image_indices or not caption_indices:
        raise ValueError("similarity_matrix needs nonempty query sets")
    images = encode_images(model, ds, image_indices)
    captions = encode_captions(model, ds, caption_indices, threads)
    t_g = np.stack([c.t_g.data for c in captions])
    tn = _normalized(t_g, "caption", caption_indices)

    if mode == "global":
        v = np.stack([im.v_m.data for im in images])
        scores = _normalized(v, "image", image_indices) @ tn.T
    elif model.cfg.no_iga:
        v = np.stack([im.v_mr.data for im in images])
        scores = _normalized(v, "image", image_indices) @ tn.T
    else:
        with no_grad():
            f_g_rows = roam.iga_transform_text(ag.constant(t_g), model.reg)
            rows = []
            for pos, im in enumerate(images):
                guided = model.guided_text_rows(im, f_g_rows).data
                gn = _normalized(guided, "caption", caption_indices)
                v = im.v_mr.data
                norm = float(np.sqrt((v * v).sum()))
                if norm < 1e-12:
                    raise DegenerateEmbeddingError(
                        f"image {image_indices[pos]} has a near-zero embedding")
                rows.append((gn @ (v / norm)))
            scores = np.stack(rows)
    text_to_image = np.array([ds.captions[k].image_index
                              for k in caption_indices], dtype=np.int64)
    return SimilarityResult(scores, list(image_indices),
                            list(caption_indices), text_to_image)


# ----------------------------------------------------------------- recalls

def _ranked(scores_row: np.ndarray) -> np.ndarray:
    # descending score, ascending candidate index on ties
    n = scores_row.shape[0]
    return np.lexsort((np.arange(n), -scores_row))


def recall_at_k(sim: SimilarityResult, k: int, direction: str) -> float:
    """Percentage of queries with a ground-truth hit in the top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = sim.scores
    if direction == "i2t":
        kk = min(k, scores.shape[1])
        hits = 0
        for qi in range(scores.shape[0]):
            top = _ranked(scores[qi])[:kk]
            gt = sim.text_to_image[top] == sim.image_ids[qi]
            hits += bool(gt.any())
        return 100.0 * hits / scores.shape[0]
    if direction == "t2i":
        kk = min(k, scores.shape[0])
        image_ids = np.array(sim.image_ids, dtype=np.int64)
        hits = 0
        for qj in range(scores.shape[1]):
            top = _ranked(scores[:, qj])[:kk]
            hits += bool((image_ids[top] == sim.text_to_image[qj]).any())
        return 100.0 * hits / scores.shape[1]
    raise ValueError(f"unknown direction {direction!r}")


def recall_block(sim: SimilarityResult) -> dict[str, float]:
    block = {}
    for k in RECALL_KS:
        block[f"r{k}_i2t"] = recall_at_k(sim, k, "i2t")
    for k in RECALL_KS:
        block[f"r{k}_t2i"] = recall_at_k(sim, k, "t2i")
    block["mr"] = mean_recall([block[f"r{k}_i2t"] for k in RECALL_KS]
                              + [block[f"r{k}_t2i"] for k in RECALL_KS])
    return block


def mean_recall(recalls: list[float]) -> float:
    if len(recalls) != 6:
        raise ValueError(f"mean recall is defined over 6 values, got {len(recalls)}")
    return float(sum(recalls) / 6.0)


# --------------------------------------------------------------- distances

DISTANCE_KEYS = ("v_mr__t_rg", "v_m__t_g", "v_r__v_mr", "v_r__v_m",
                 "v_r__t_rg", "v_r__t_g")


def euclidean(a, b) -> float:
    """Euclidean distance between two equal-length vectors."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.ndim != 1 or av.shape != bv.shape:
        raise ValueError(f"euclidean expects two equal-length vectors, "
                         f"got shapes {av.shape} and {bv.shape}")
    return float(np.linalg.norm(av - bv))


def embedding_distances(model: Model, ds: Dataset, image_indices: list[int],
                        caption_indices: list[int] | None = None,
                        threads: int = 1) -> dict:
    """Euclidean distance statistics over positive (image, caption) pairs.

    Distances are measured between unit-normalized embeddings -- the
    coordinates the similarity actually compares.  Raw norms are never
    trained (the cosine score is scale-free), so distances between raw
    vectors would mostly report arbitrary per-branch scale.
    """
    image_set = set(image_indices)
    if caption_indices is None:
        caption_indices = [k for k, rec in enumerate(ds.captions)
                           if rec.image_index in image_set]
    pairs = [(ds.captions[k].image_index, k) for k in caption_indices
             if ds.captions[k].image_index in image_set]
    if not pairs:
        raise ValueError("no positive pairs in the requested subset")
    codes = {i: c for i, c in zip(image_indices,
                                  encode_images(model, ds, image_indices))}
    caps = {k: c for k, c in zip(caption_indices,
                                 encode_captions(model, ds, caption_indices,
                                                 threads))}

    def unit(vec: np.ndarray, what: str) -> np.ndarray:
        norm = np.linalg.norm(vec)
        if norm < 1e-12:
            raise DegenerateEmbeddingError(f"{what} has near-zero norm")
        return vec / norm

    samples = {key: [] for key in DISTANCE_KEYS}
    with no_grad():
        for img, cap in pairs:
            im, c = codes[img], caps[cap]
            t_rg = unit(model.pair_text_embedding(im, c).data,
                        f"t_rg(image {img}, caption {cap})")
            v_m = unit(im.v_m.data, f"v_m(image {img})")
            v_r = unit(im.v_r.data, f"v_r(image {img})")
            v_mr = unit(im.v_mr.data, f"v_mr(image {img})")
            t_g = unit(c.t_g.data, f"t_g(caption {cap})")
            samples["v_mr__t_rg"].append(euclidean(v_mr, t_rg))
            samples["v_m__t_g"].append(euclidean(v_m, t_g))
            samples["v_r__v_mr"].append(euclidean(v_r, v_mr))
            samples["v_r__v_m"].append(euclidean(v_r, v_m))
            samples["v_r__t_rg"].append(euclidean(v_r, t_rg))
            samples["v_r__t_g"].append(euclidean(v_r, t_g))
    stats = {}
    for key, values in samples.items():
        arr = np.array(values)
        stats[key] = {"mean": float(arr.mean()),
                      "median": float(np.median(arr)),
                      "stddev": float(arr.std()),
                      "n_pairs": int(arr.size)}
    return stats


# ------------------------------------------------------------------ report

@dataclass
class RetrievalReport:
    config_hash: str
    seed: int
    split: str
    n_images: int
    n_texts: int
    full: dict[str, float]
    subsets: list[dict] = field(default_factory=list)
    distances: dict | None = None

    def to_json(self) -> str:
        payload = {
            "report_version": REPORT_VERSION,
            "prng": PRNG_NAME,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "split": self.split,
            "n_images": self.n_images,
            "n_texts": self.n_texts,
            "full": self.full,
            "subsets": self.subsets,
            "distances": self.distances,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def build_report(model: Model, ds: Dataset, image_indices: list[int],
                 split_name: str, subset_files: list[tuple[str, list[int]]] = (),
                 with_distances: bool = True, threads: int = 1) -> RetrievalReport:
    caption_indices = [k for k, rec in enumerate(ds.captions)
                       if rec.image_index in set(image_indices)]
    sim = similarity_matrix(model, ds, image_indices, caption_indices,
                            mode="final", threads=threads)
    report = RetrievalReport(
        config_hash=config_hash(model.cfg),
        seed=model.cfg.seed,
        split=split_name,
        n_images=len(image_indices),
        n_texts=len(caption_indices),
        full=recall_block(sim),
    )
    for name, subset in subset_files:
        block = subset_eval(model, ds, image_indices, subset, threads=threads)
        block["source"] = name
        report.subsets.append(block)
    if with_distances:
        report.distances = embedding_distances(model, ds, image_indices,
                                               caption_indices, threads)
    return report


def subset_eval(model: Model, ds: Dataset, eval_images: list[int],
                subset_indices: list[int], threads: int = 1) -> dict:
    """Metrics with queries AND candidate pool restricted to the subset."""
    for i in subset_indices:
        if not 0 <= i < ds.n_images:
            raise ValueError(f"subset image index {i} out of range "
                             f"0..{ds.n_images - 1}")
    keep = [i for i in eval_images if i in set(subset_indices)]
    if not keep:
        raise ValueError("subset does not intersect the evaluated images")
    captions = [k for k, rec in enumerate(ds.captions)
                if rec.image_index in set(keep)]
    sim = similarity_matrix(model, ds, keep, captions, mode="final",
                            threads=threads)
    block = recall_block(sim)
    block["n_images"] = len(keep)
    block["n_texts"] = len(captions)
    return block


def load_subset_file(path: str) -> list[int]:
    """One image index per line; blanks ignored."""
    indices = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                indices.append(int(line))
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: expected an image index, got {line!r}"
                ) from None
    if not indices:
        raise ValueError(f"{path}: subset file is empty")
    return indices


def render_table(report: RetrievalReport) -> str:
    """Fixed-width text table; recalls rounded to 2 decimals."""
    def fmt(block, label):
        return (f"{label:<10} "
                f"{block['r1_i2t']:>7.2f} {block['r5_i2t']:>7.2f} "
                f"{block['r10_i2t']:>7.2f} {block['r1_t2i']:>7.2f} "
                f"{block['r5_t2i']:>7.2f} {block['r10_t2i']:>7.2f} "
                f"{block['mr']:>7.2f}")

    lines = [
        f"split={report.split} images={report.n_images} texts={report.n_texts}",
        f"config={report.config_hash[:12]} seed={report.seed} prng={PRNG_NAME}",
        f"{'':<10} {'R@1 i2t':>7} {'R@5 i2t':>7} {'R@10':>7} "
        f"{'R@1 t2i':>7} {'R@5 t2i':>7} {'R@10':>7} {'mR':>7}",
        fmt(report.full, "full"),
    ]
    for block in report.subsets:
        lines.append(fmt(block, f"subset[{block.get('source', '?')}]"))
    return "\n".join(lines) + "\n"
