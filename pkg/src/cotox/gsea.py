"""Preranked gene set enrichment with gene-set permutation p-values.

The running-sum statistic increments by |score|**p normalized over the
in-set weight mass at each hit and decrements by 1/(N - N_hits) at each
miss, so it always returns to zero after the last gene. The enrichment
score is the extreme deviation (ties resolved toward the positive peak).
Null distributions come from random same-size gene subsets of the ranked
universe; p-values use the plus-one estimator restricted to permutations
whose extreme has the observed sign, and FDR is Benjamini-Hochberg
applied separately to the positive and negative score groups.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError
from .ingest import BioContext, GeneSet, RankedList, Term, TermKind

logger = logging.getLogger(__name__)

# cap on elements per permutation chunk, keeps the hit matrix small
_CHUNK_ELEMENTS = 4_000_000


class NoOverlapError(DataError):
    pass


class FullOverlapError(DataError):
    pass


class ZeroNormalizerError(DataError):
    pass


class NoAdmissibleSetsError(DataError):
    pass


@dataclass(frozen=True)
class GseaParams:
    weight_exponent: float = 1.0
    permutations: int = 1000
    seed: int = 0
    min_set_size: int = 3
    max_set_size: int = 500

    def __post_init__(self) -> None:
        if self.weight_exponent < 0:
            raise ValueError("weight_exponent must be >= 0")
        if self.permutations < 1:
            raise ValueError("permutations must be >= 1")
        if not 1 <= self.min_set_size <= self.max_set_size:
            raise ValueError("need 1 <= min_set_size <= max_set_size")


@dataclass(frozen=True)
class EnrichmentResult:
    set_name: str
    es: float
    p_value: float
    q_value: float
    hit_count: int
    direction: int

    def __post_init__(self) -> None:
        if self.direction not in (-1, 1):
            raise ValueError("direction must be -1 or +1")


def _hit_mask(ranked: RankedList, genes: frozenset[str]) -> np.ndarray:
    return np.fromiter((g in genes for g in ranked.genes), dtype=bool, count=len(ranked))


def _extreme(running: np.ndarray) -> float:
    """Pick the deviation with the larger magnitude; ties go positive."""
    hi = float(running.max())
    lo = float(running.min())
    return hi if abs(hi) >= abs(lo) else lo


def enrichment_score(
    ranked: RankedList, gene_set: GeneSet, weight_exponent: float = 1.0
) -> tuple[float, list[float]]:
    """Return (es, running_sum) for one gene set against one ranked list.

    Raises NoOverlapError / FullOverlapError when the set hits none or all
    of the list, and ZeroNormalizerError when every in-set score is zero
    under a positive exponent.
    """
    hits = _hit_mask(ranked, gene_set.genes)
    n = len(ranked)
    n_hits = int(hits.sum())
    if n_hits == 0:
        raise NoOverlapError(f"set {gene_set.name!r} shares no genes with the list")
    if n_hits == n:
        raise FullOverlapError(f"set {gene_set.name!r} covers the entire list")
    weights = np.abs(np.asarray(ranked.scores, dtype=float)) ** weight_exponent
    norm = float(weights[hits].sum())
    if norm == 0.0:
        raise ZeroNormalizerError(
            f"set {gene_set.name!r}: all in-set scores are zero"
        )
    steps = np.where(hits, weights / norm, -1.0 / (n - n_hits))
    running = np.cumsum(steps)
    return _extreme(running), [float(x) for x in running]


def derive_set_seed(base_seed: int, set_name: str) -> np.random.SeedSequence:
    """Per-set seed: stable under set reordering and parallel execution."""
    digest = hashlib.sha256(set_name.encode("utf-8")).digest()
    name_word = int.from_bytes(digest[:8], "big")
    return np.random.SeedSequence([base_seed & 0xFFFFFFFFFFFFFFFF, name_word])


def permuted_scores(
    ranked: RankedList, set_size: int, params: GseaParams, set_name: str
) -> np.ndarray:
    """Null enrichment scores for `permutations` random size-k gene subsets.

    Degenerate draws whose weight normalizer is zero get es = 0 so they
    can never register as extreme.
    """
    n = len(ranked)
    if not 0 < set_size < n:
        raise ValueError(f"set_size must be in (0, {n}), got {set_size}")
    weights = np.abs(np.asarray(ranked.scores, dtype=float)) ** params.weight_exponent
    miss_step = 1.0 / (n - set_size)
    rng = np.random.default_rng(derive_set_seed(params.seed, set_name))
    out = np.empty(params.permutations, dtype=float)
    chunk_rows = max(1, min(params.permutations, _CHUNK_ELEMENTS // n))
    done = 0
    while done < params.permutations:
        rows = min(chunk_rows, params.permutations - done)
        # random k-subsets per row: take the k smallest of n uniform keys
        keys = rng.random((rows, n))
        idx = np.argpartition(keys, set_size - 1, axis=1)[:, :set_size]
        hit_matrix = np.zeros((rows, n), dtype=bool)
        hit_matrix[np.arange(rows)[:, None], idx] = True
        norms = (weights * hit_matrix).sum(axis=1, keepdims=True)
        degenerate = norms[:, 0] == 0.0
        norms[degenerate] = 1.0
        steps = np.where(hit_matrix, weights / norms, -miss_step)
        running = np.cumsum(steps, axis=1)
        hi = running.max(axis=1)
        lo = running.min(axis=1)
        es = np.where(np.abs(hi) >= np.abs(lo), hi, lo)
        es[degenerate] = 0.0
        out[done : done + rows] = es
        done += rows
    return out


def permutation_pvalue(
    ranked: RankedList, gene_set: GeneSet, params: GseaParams
) -> float:
    """Plus-one permutation p-value over same-sign null scores."""
    es_obs, _ = enrichment_score(ranked, gene_set, params.weight_exponent)
    in_list = int(_hit_mask(ranked, gene_set.genes).sum())
    null = permuted_scores(ranked, in_list, params, gene_set.name)
    if es_obs >= 0:
        same_sign = null > 0
    else:
        same_sign = null < 0
    n_same = int(same_sign.sum())
    if n_same == 0:
        logger.warning(
            "set %s: no same-sign permutation, p-value saturates at 1.0", gene_set.name
        )
    n_extreme = int((same_sign & (np.abs(null) >= abs(es_obs))).sum())
    return (1 + n_extreme) / (1 + n_same)


def bh_fdr(p_values: Sequence[float]) -> list[float]:
    """Benjamini-Hochberg step-up q-values, returned in input order."""
    p = np.asarray(p_values, dtype=float)
    if p.size == 0:
        return []
    if np.any(p <= 0) or np.any(p > 1):
        raise ValueError("p-values must lie in (0, 1]")
    n = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * n / np.arange(1, n + 1)
    q_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    q_sorted = np.minimum(q_sorted, 1.0)
    q = np.empty(n, dtype=float)
    q[order] = q_sorted
    return [float(x) for x in q]


def run_gsea(
    ranked: RankedList, sets: Sequence[GeneSet], params: GseaParams
) -> list[EnrichmentResult]:
    """Score every admissible set and attach sign-grouped q-values.

    A set is admissible when its in-list overlap k satisfies
    min_set_size <= k <= max_set_size and 0 < k < N. Results keep the
    input set order.
    """
    admissible: list[tuple[GeneSet, int]] = []
    for gs in sets:
        k = int(_hit_mask(ranked, gs.genes).sum())
        if k < params.min_set_size or k > params.max_set_size or k >= len(ranked):
            logger.info("set %s skipped: overlap %d inadmissible", gs.name, k)
            continue
        admissible.append((gs, k))
    scored: list[tuple[str, float, float, int]] = []
    for gs, k in admissible:
        try:
            es, _ = enrichment_score(ranked, gs, params.weight_exponent)
        except ZeroNormalizerError:
            logger.info("set %s skipped: zero weight normalizer", gs.name)
            continue
        p = permutation_pvalue(ranked, gs, params)
        scored.append((gs.name, es, p, k))
    # BH within each sign group (es == 0 counts as positive, like the tie rule)
    q_values: dict[str, float] = {}
    for positive in (True, False):
        group = [row for row in scored if (row[1] >= 0) == positive]
        qs = bh_fdr([row[2] for row in group])
        for row, q in zip(group, qs):
            q_values[row[0]] = q
    return [
        EnrichmentResult(
            set_name=name,
            es=es,
            p_value=p,
            q_value=q_values[name],
            hit_count=k,
            direction=1 if es >= 0 else -1,
        )
        for name, es, p, k in scored
    ]


DEFAULT_KIND_MAP: Mapping[str, TermKind] = {
    "REACTOME": TermKind.PATHWAY,
    "KEGG": TermKind.PATHWAY,
    "WP": TermKind.PATHWAY,
    "GOBP": TermKind.GO_BP,
    "GOMF": TermKind.GO_MF,
    "GOCC": TermKind.GO_CC,
}


def _kind_for(set_name: str, kind_map: Mapping[str, TermKind]) -> TermKind:
    for prefix in sorted(kind_map, key=len, reverse=True):
        if set_name.upper().startswith(prefix.upper()):
            return kind_map[prefix]
    return TermKind.PATHWAY


def enrich_to_context(
    ranked: RankedList,
    sets: Sequence[GeneSet],
    params: GseaParams,
    compound_id: str,
    p_max: float = 0.01,
    q_max: float = 0.25,
    kind_map: Mapping[str, TermKind] | None = None,
) -> tuple[BioContext, list[EnrichmentResult]]:
    """Turn significant enrichment results into an unfiltered BioContext.

    Keeps sets with p < p_max and q < q_max; set names double as term ids
    and names. Raises NoAdmissibleSetsError when nothing survives the
    size filters (an empty context after thresholding is still valid).
    """
    if kind_map is None:
        kind_map = DEFAULT_KIND_MAP
    results = run_gsea(ranked, sets, params)
    if not results:
        raise NoAdmissibleSetsError(
            f"{compound_id}: no gene set passes the size filters"
        )
    kept = [r for r in results if r.p_value < p_max and r.q_value < q_max]
    if not kept:
        logger.warning("%s: no enrichment passes p<%g and q<%g", compound_id, p_max, q_max)
    pathways: list[Term] = []
    go_terms: list[Term] = []
    for r in kept:
        kind = _kind_for(r.set_name, kind_map)
        term = Term(r.set_name, r.set_name, kind, source="GSEA")
        (pathways if kind is TermKind.PATHWAY else go_terms).append(term)
    ctx = BioContext(
        compound_id=compound_id,
        pathways=tuple(pathways),
        go_terms=tuple(go_terms),
        filtered=False,
    )
    return ctx, results


def write_enrichment_report(
    results: Sequence[EnrichmentResult],
    kept_names: set[str],
    path: str | Path,
) -> None:
    """Write the per-set TSV: set_name, es, p, q, hits, kept."""
    lines = ["set_name\tes\tp\tq\thits\tkept"]
    for r in results:
        lines.append(
            f"{r.set_name}\t{r.es:.6g}\t{r.p_value:.6g}\t{r.q_value:.6g}"
            f"\t{r.hit_count}\t{str(r.set_name in kept_names).lower()}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
