"""Gaussian PLDA scoring backend over ingested embeddings.

The chain mirrors the usual telephone-speech recipe: center and whiten on
training data, unit-length normalize, project with LDA, length normalize
again, then score with a two-covariance PLDA model

    x = y + eps,   y ~ N(mu, B),   eps ~ N(0, W),

where B is the (full-rank) between-speaker covariance and W the
within-speaker covariance. The trial LLR is the Gaussian two-covariance
score

    LLR = ln N([e; t]; [mu; mu], [[B+W, B], [B, B+W]])
        - ln N(e; mu, B+W) - ln N(t; mu, B+W).

Multi-segment enrollment averages the per-segment processed vectors and
re-normalizes; this is a documented convention, not multi-observation
scoring.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

EM_MAX_ITER = 200
EM_REL_TOL = 1e-7


class BackendError(ValueError):
    pass


# ---------------------------------------------------------------------------
# embedding files: float matrix (TSV or .npy) + row-aligned sidecar metadata


@dataclass
class EmbeddingSet:
    segment_ids: list[str]
    vectors: np.ndarray  # (n, d)
    speaker_ids: list[str] | None = None
    degraded: np.ndarray | None = None  # bool per row

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.segment_ids):
            raise BackendError("vector matrix does not align with segment ids")
        if not np.all(np.isfinite(self.vectors)):
            raise BackendError("embeddings contain non-finite entries")

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def by_segment(self) -> dict[str, np.ndarray]:
        return {sid: self.vectors[i] for i, sid in enumerate(self.segment_ids)}

    def originals(self) -> "EmbeddingSet":
        """Rows not flagged as degraded (PLDA training uses only these)."""
        if self.degraded is None:
            return self
        keep = ~self.degraded
        return EmbeddingSet(
            [s for s, k in zip(self.segment_ids, keep) if k],
            self.vectors[keep],
            [s for s, k in zip(self.speaker_ids, keep) if k] if self.speaker_ids else None,
            self.degraded[keep],
        )


def save_embeddings(emb: EmbeddingSet, matrix_path: str, meta_path: str) -> None:
    if matrix_path.endswith(".npy"):
        np.save(matrix_path, emb.vectors)
    else:
        with open(matrix_path, "w", encoding="utf-8", newline="\n") as f:
            for row in emb.vectors:
                f.write("\t".join(repr(float(v)) for v in row) + "\n")
    with open(meta_path, "w", encoding="utf-8", newline="\n") as f:
        f.write("segmentid\tspeakerid\tdegraded\n")
        for i, sid in enumerate(emb.segment_ids):
            spk = emb.speaker_ids[i] if emb.speaker_ids else "-"
            deg = "1" if emb.degraded is not None and emb.degraded[i] else "0"
            f.write(f"{sid}\t{spk}\t{deg}\n")


def load_embeddings(matrix_path: str, meta_path: str) -> EmbeddingSet:
    if matrix_path.endswith(".npy"):
        vectors = np.load(matrix_path)
    else:
        vectors = np.loadtxt(matrix_path, delimiter="\t", dtype=np.float64, ndmin=2)
    segment_ids: list[str] = []
    speaker_ids: list[str] = []
    degraded: list[bool] = []
    with open(meta_path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        if header != ["segmentid", "speakerid", "degraded"]:
            raise BackendError(f"{meta_path}: bad sidecar header {header}")
        for line in f:
            sid, spk, deg = line.rstrip("\n").split("\t")
            segment_ids.append(sid)
            speaker_ids.append(spk)
            degraded.append(deg == "1")
    spk_list = None if all(s == "-" for s in speaker_ids) else speaker_ids
    return EmbeddingSet(segment_ids, np.asarray(vectors, dtype=np.float64), spk_list,
                        np.array(degraded, dtype=bool))


# ---------------------------------------------------------------------------
# preprocessing chain


def length_normalize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise BackendError("zero vector cannot be length normalized")
    return x / norms


def fit_centering_whitening(x: np.ndarray, ridge: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Mean and symmetric inverse-sqrt whitener from training embeddings.

    Whitening uses the eigendecomposition (not Cholesky) so the transform is
    rotation-equivariant. A rank-deficient covariance raises; pass a small
    ridge (e.g. 1e-6) to regularize the diagonal instead.
    """
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if n <= d:
        raise BackendError(f"need more than dim={d} training vectors, got {n}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / n
    if ridge > 0.0:
        cov = cov + ridge * np.eye(d)
    evals, evecs = np.linalg.eigh(cov)
    tiny = np.finfo(np.float64).eps * d * float(evals[-1])
    if evals[0] <= tiny:
        raise BackendError(
            "training covariance is rank deficient; pass ridge (e.g. ridge=1e-6) to regularize"
        )
    whitener = (evecs / np.sqrt(evals)) @ evecs.T
    return mean, whitener


def fit_lda(x: np.ndarray, labels: list[str] | np.ndarray, out_dim: int = 250) -> np.ndarray:
    """LDA projection (d -> out_dim) maximizing between/within scatter ratio.

    Solved as a generalized symmetric eigenproblem via the within-class
    whitening trick; the returned columns are orthonormal in the
    within-class metric.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    classes, class_idx = np.unique(labels, return_inverse=True)
    n, d = x.shape
    if len(classes) < out_dim + 1:
        raise BackendError(
            f"LDA to {out_dim} needs at least {out_dim + 1} speakers, got {len(classes)}"
        )
    counts = np.bincount(class_idx)
    if counts.min() < 2:
        raise BackendError("every speaker needs at least 2 segments for LDA")
    mean = x.mean(axis=0)
    class_sums = np.zeros((len(classes), d))
    np.add.at(class_sums, class_idx, x)
    class_means = class_sums / counts[:, None]
    centered = x - class_means[class_idx]
    s_within = centered.T @ centered / n
    dm = (class_means - mean) * np.sqrt(counts)[:, None]
    s_between = dm.T @ dm / n

    evals, evecs = np.linalg.eigh(s_within)
    tiny = np.finfo(np.float64).eps * d * float(evals[-1])
    if evals[0] <= tiny:
        raise BackendError("within-class scatter is rank deficient")
    t = (evecs / np.sqrt(evals)) @ evecs.T
    m = t @ s_between @ t
    evals_b, evecs_b = np.linalg.eigh(m)
    top = evecs_b[:, ::-1][:, :out_dim]
    return t @ top


@dataclass
class Preprocessor:
    """center -> whiten -> length norm -> LDA -> length norm."""

    mean: np.ndarray | None = None
    whitener: np.ndarray | None = None
    lda: np.ndarray | None = None

    @property
    def fitted(self) -> bool:
        return self.mean is not None and self.whitener is not None

    @property
    def out_dim(self) -> int:
        if self.lda is not None:
            return int(self.lda.shape[1])
        if self.whitener is not None:
            return int(self.whitener.shape[1])
        raise BackendError("preprocessor not fitted")

    def fit(self, x: np.ndarray, labels=None, lda_dim: int | None = 250,
            ridge: float = 0.0) -> "Preprocessor":
        self.mean, self.whitener = fit_centering_whitening(x, ridge=ridge)
        if lda_dim is not None:
            if labels is None:
                raise BackendError("LDA fitting requires speaker labels")
            stage1 = length_normalize((x - self.mean) @ self.whitener)
            self.lda = fit_lda(stage1, labels, out_dim=lda_dim)
        return self

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if not self.fitted:
            raise BackendError("preprocessor not fitted")
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        out = length_normalize((x - self.mean) @ self.whitener)
        if self.lda is not None:
            out = length_normalize(out @ self.lda)
        return out[0] if single else out


def apply_chain(x: np.ndarray, preprocessor: Preprocessor) -> np.ndarray:
    """Processed, unit-length vector(s) for one embedding or a batch."""
    return preprocessor(x)


def enroll(segment_embeddings: np.ndarray, preprocessor: Preprocessor) -> np.ndarray:
    """Enrollment vector from 1 or 3 segment embeddings.

    Per-segment chain outputs are averaged and re-length-normalized; a
    single segment therefore equals its own chain output.
    """
    emb = np.atleast_2d(np.asarray(segment_embeddings, dtype=np.float64))
    if emb.shape[0] not in (1, 3):
        raise BackendError(f"enrollment takes 1 or 3 segments, got {emb.shape[0]}")
    processed = preprocessor(emb)
    return length_normalize(processed.mean(axis=0))


# ---------------------------------------------------------------------------
# two-covariance PLDA


@dataclass
class PldaModel:
    mu: np.ndarray
    between: np.ndarray  # B
    within: np.ndarray   # W
    loglik_path: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.mu.shape[0])

    def scorer(self) -> "PldaScorer":
        return PldaScorer(self)


def _suff_stats(x: np.ndarray, labels) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    classes, class_idx = np.unique(labels, return_inverse=True)
    counts = np.bincount(class_idx).astype(np.float64)
    sums = np.zeros((len(classes), x.shape[1]))
    np.add.at(sums, class_idx, x)
    return sums, counts


def fit_plda(x: np.ndarray, labels, max_iter: int = EM_MAX_ITER,
             rel_tol: float = EM_REL_TOL) -> PldaModel:
    """EM for the two-covariance model; full-rank B, positive-definite W.

    Initialization splits the total covariance evenly between B and W
    (deterministic). Iteration stops when the relative gain in total
    marginal log-likelihood drops below rel_tol or after max_iter rounds;
    the log-likelihood sequence is recorded on the model.
    """
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    sums, counts = _suff_stats(x, labels)
    n_speakers = len(counts)
    if n_speakers < 2:
        raise BackendError("PLDA needs at least 2 speakers")
    if counts.min() < 2:
        raise BackendError("every speaker needs at least 2 segments for PLDA")

    mu = x.mean(axis=0)
    total_cov = (x - mu).T @ (x - mu) / n
    b = 0.5 * total_cov.copy()
    w = 0.5 * total_cov.copy()
    second_moment = x.T @ x  # reused every M-step

    group_of = {}
    for size in np.unique(counts):
        group_of[float(size)] = np.nonzero(counts == size)[0]

    loglik_path: list[float] = []
    for _ in range(max_iter):
        b_inv = np.linalg.inv(b)
        w_inv = np.linalg.inv(w)
        _, logdet_b = np.linalg.slogdet(b)
        _, logdet_w = np.linalg.slogdet(w)

        y_hat = np.zeros((n_speakers, d))
        sigma_sum = np.zeros((d, d))          # sum_i Sigma_i
        n_sigma_sum = np.zeros((d, d))        # sum_i n_i Sigma_i
        loglik = 0.0
        for size, idx in group_of.items():
            lam = b_inv + size * w_inv
            sigma = np.linalg.inv(lam)
            sigma = 0.5 * (sigma + sigma.T)
            _, logdet_lam = np.linalg.slogdet(lam)
            s_c = sums[idx] - size * mu       # centered segment sums
            rhs = s_c @ w_inv.T
            y_hat[idx] = rhs @ sigma + mu
            sigma_sum += len(idx) * sigma
            n_sigma_sum += len(idx) * size * sigma
            # marginal log-likelihood of each speaker's segment block
            xs = x  # quadratic term accumulated globally below
            quad_post = np.einsum("ij,jk,ik->i", rhs, sigma, rhs)
            loglik += float(
                -0.5 * len(idx) * (size * d * np.log(2 * np.pi) + size * logdet_w
                                   + logdet_b + logdet_lam)
                + 0.5 * quad_post.sum()
            )
        xc = x - mu
        loglik -= 0.5 * float(np.einsum("ij,jk,ik->", xc, w_inv, xc))
        loglik_path.append(loglik)
        if len(loglik_path) > 1:
            prev, cur = loglik_path[-2], loglik_path[-1]
            if abs(cur - prev) < rel_tol * abs(prev):
                break

        # M-step
        mu_new = y_hat.mean(axis=0)
        dy = y_hat - mu_new
        b = (sigma_sum + dy.T @ dy) / n_speakers
        b = 0.5 * (b + b.T)
        cross = sums.T @ y_hat
        yy = (y_hat * counts[:, None]).T @ y_hat
        w = (second_moment - cross - cross.T + yy + n_sigma_sum) / n
        w = 0.5 * (w + w.T)
        mu = mu_new

    return PldaModel(mu=mu, between=b, within=w, loglik_path=loglik_path)


class PldaScorer:
    """Precomputed quadratic forms for batch two-covariance LLR scoring."""

    def __init__(self, model: PldaModel):
        self.model = model
        b, w = model.between, model.within
        sigma_tot = b + w
        evals = np.linalg.eigvalsh(sigma_tot)
        if evals.min() <= 0:
            raise BackendError("B + W is not positive definite")
        tot_inv = np.linalg.inv(sigma_tot)
        schur = sigma_tot - b @ tot_inv @ b
        evals_s = np.linalg.eigvalsh(0.5 * (schur + schur.T))
        if evals_s.min() <= 0:
            raise BackendError("two-covariance score covariance assembly is not positive definite")
        a = np.linalg.inv(schur)
        self.q = 0.5 * (a - tot_inv)
        self.q = 0.5 * (self.q + self.q.T)
        h = tot_inv @ b @ a
        self.h = 0.5 * (h + h.T)
        _, logdet_tot = np.linalg.slogdet(sigma_tot)
        _, logdet_schur = np.linalg.slogdet(schur)
        self.const = 0.5 * (logdet_tot - logdet_schur)

    def llr(self, enroll_vec: np.ndarray, test_vec: np.ndarray) -> float:
        e = np.asarray(enroll_vec, dtype=np.float64) - self.model.mu
        t = np.asarray(test_vec, dtype=np.float64) - self.model.mu
        return float(
            -(e @ self.q @ e) - (t @ self.q @ t) + e @ self.h @ t + self.const
        )

    def score_trials(self, enroll_mat: np.ndarray, test_mat: np.ndarray) -> np.ndarray:
        """LLRs for paired rows of (n, d) enrollment and test matrices."""
        e = np.atleast_2d(enroll_mat) - self.model.mu
        t = np.atleast_2d(test_mat) - self.model.mu
        qe = np.einsum("ij,jk,ik->i", e, self.q, e)
        qt = np.einsum("ij,jk,ik->i", t, self.q, t)
        cross = np.einsum("ij,jk,ik->i", e, self.h, t)
        return -qe - qt + cross + self.const


def plda_llr(model: PldaModel, enroll_vec: np.ndarray, test_vec: np.ndarray) -> float:
    return model.scorer().llr(enroll_vec, test_vec)


def score_trial_pairs(
    preprocessor: Preprocessor,
    model: PldaModel,
    embeddings: EmbeddingSet,
    enrollment_models: dict,
    pairs: list[tuple[str, str]],
) -> dict[tuple[str, str], float]:
    """LLRs for blind (modelid, segmentid) pairs from a fitted backend."""
    by_seg = embeddings.by_segment()
    scorer = model.scorer()
    enroll_cache: dict[str, np.ndarray] = {}

    def enroll_vec(model_id: str) -> np.ndarray:
        vec = enroll_cache.get(model_id)
        if vec is None:
            definition = enrollment_models.get(model_id)
            if definition is None:
                raise BackendError(f"no enrollment definition for model {model_id!r}")
            try:
                segs = np.stack([by_seg[s] for s in definition.segments])
            except KeyError as e:
                raise BackendError(f"missing embedding for segment {e.args[0]!r}") from None
            vec = enroll_cache[model_id] = enroll(segs, preprocessor)
        return vec

    e_rows = np.stack([enroll_vec(m) for m, _ in pairs])
    try:
        t_raw = np.stack([by_seg[s] for _, s in pairs])
    except KeyError as e:
        raise BackendError(f"missing embedding for segment {e.args[0]!r}") from None
    t_rows = preprocessor(t_raw)
    llr = scorer.score_trials(e_rows, t_rows)
    return {pair: float(llr[i]) for i, pair in enumerate(pairs)}


def save_scores_from_backend(
    preprocessor: Preprocessor,
    model: PldaModel,
    embeddings: EmbeddingSet,
    enrollment_models: dict,
    pairs: list[tuple[str, str]],
    out_path: str,
) -> None:
    from .submission import save_scores

    save_scores(score_trial_pairs(preprocessor, model, embeddings, enrollment_models, pairs),
                out_path)


# ---------------------------------------------------------------------------
# serialization: one self-describing JSON bundle for the whole scoring stack

BUNDLE_FORMAT = "ctseval-backend/1"


def save_backend(preprocessor: Preprocessor, model: PldaModel, path: str) -> None:
    doc = {
        "format": BUNDLE_FORMAT,
        "dim_in": int(preprocessor.mean.shape[0]),
        "dim_out": preprocessor.out_dim,
        "mean": preprocessor.mean.tolist(),
        "whitener": preprocessor.whitener.tolist(),
        "lda": preprocessor.lda.tolist() if preprocessor.lda is not None else None,
        "plda": {
            "mu": model.mu.tolist(),
            "between": model.between.tolist(),
            "within": model.within.tolist(),
        },
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)
        f.write("\n")


def load_backend(path: str) -> tuple[Preprocessor, PldaModel]:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format") != BUNDLE_FORMAT:
        raise BackendError(f"{path}: unknown model format {doc.get('format')!r}")
    pre = Preprocessor(
        mean=np.array(doc["mean"], dtype=np.float64),
        whitener=np.array(doc["whitener"], dtype=np.float64),
        lda=np.array(doc["lda"], dtype=np.float64) if doc["lda"] is not None else None,
    )
    plda = doc["plda"]
    model = PldaModel(
        mu=np.array(plda["mu"], dtype=np.float64),
        between=np.array(plda["between"], dtype=np.float64),
        within=np.array(plda["within"], dtype=np.float64),
    )
    return pre, model
