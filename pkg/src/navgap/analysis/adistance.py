"""Proxy A-distance from a linear source-vs-target classifier."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

VAR_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class DomainSamples:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("domain samples must be a 2-D array (m', dim)")
        if len(v) < 2:
            raise ValueError("need at least two samples per domain")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass
class ClassifierConfig:
    epochs: int = 500
    lr: float = 1.0  # multiple of 1/L, L the smoothness constant of the loss
    l2: float = 1e-3

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class LinearDomainClassifier:
    """Predicts "source" (1) iff ``w . y + b > 0``."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        if not (np.all(np.isfinite(self.w)) and np.isfinite(self.b)):
            raise ValueError("classifier parameters must be finite")

    def predict(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y) @ self.w + self.b > 0).astype(np.int64)

    def flipped(self) -> "LinearDomainClassifier":
        return LinearDomainClassifier(-self.w, -self.b)


@dataclass
class ADistanceResult:
    err_raw: float
    err_min: float
    d_a: float
    classifier: LinearDomainClassifier
    m_prime: int
    dims: int
    kept_dims: int
    mode: str = "train"
    trimmed: dict = field(default_factory=dict)

    def to_dict(self, config: ClassifierConfig | None = None) -> dict:
        d = {
            "err_raw": self.err_raw,
            "err_min": self.err_min,
            "d_a": self.d_a,
            "m_prime": self.m_prime,
            "dims": self.dims,
            "kept_dims": self.kept_dims,
            "mode": self.mode,
            "trimmed": self.trimmed,
        }
        if config is not None:
            d["config"] = config.to_dict()
        return d


def _as_samples(u) -> DomainSamples:
    return u if isinstance(u, DomainSamples) else DomainSamples(np.asarray(u))


def _top_singular_sq(x: np.ndarray, iters: int = 100) -> float:
    # power iteration on x^T x from a fixed start, so the result is deterministic
    v = np.ones(x.shape[1]) / np.sqrt(x.shape[1])
    s = 0.0
    for _ in range(iters):
        u = x.T @ (x @ v)
        s_new = float(np.linalg.norm(u))
        if s_new == 0.0:
            return 0.0
        v = u / s_new
        if abs(s_new - s) <= 1e-10 * s_new:
            s = s_new
            break
        s = s_new
    return s


def fit_domain_classifier(u_s, u_t, cfg: ClassifierConfig = ClassifierConfig()) -> LinearDomainClassifier:
    """L2-regularised logistic regression, full-batch gradient descent from zero.

    Features are standardised over the pooled sample; features with
    variance below ``VAR_FLOOR`` get zero weight. The returned classifier
    acts on raw (unstandardised) features.
    """
    u_s, u_t = _as_samples(u_s), _as_samples(u_t)
    if u_s.dim != u_t.dim:
        raise ValueError(f"dimension mismatch: {u_s.dim} vs {u_t.dim}")
    x = np.vstack([u_s.values, u_t.values])
    y = np.concatenate([np.ones(len(u_s)), np.zeros(len(u_t))])
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    keep = var >= VAR_FLOOR
    std = np.sqrt(var[keep])
    z = (x[:, keep] - mean[keep]) / std
    n, d = z.shape
    w = np.zeros(d)
    b = 0.0
    if d:
        L = 0.25 * _top_singular_sq(z) / n * 1.1 + cfg.l2 + 0.25
    else:
        L = 0.25
    eta = cfg.lr / L
    for _ in range(cfg.epochs):
        s = z @ w + b
        p = 0.5 * (1.0 + np.tanh(0.5 * s))  # sigmoid without overflow
        r = p - y
        gw = z.T @ r / n + cfg.l2 * w
        gb = r.mean()
        w -= eta * gw
        b -= eta * gb
    w_raw = np.zeros(x.shape[1])
    w_raw[keep] = w / std
    b_raw = float(b - np.dot(w, mean[keep] / std))
    return LinearDomainClassifier(w_raw, b_raw)


def _equalize(u_s: DomainSamples, u_t: DomainSamples, seed: int):
    trimmed = {}
    m = min(len(u_s), len(u_t))
    rng = np.random.default_rng(seed)
    out = []
    for name, u in (("source", u_s), ("target", u_t)):
        if len(u) > m:
            idx = np.sort(rng.choice(len(u), size=m, replace=False))
            trimmed[name] = {"from": len(u), "to": m}
            u = DomainSamples(u.values[idx])
        out.append(u)
    return out[0], out[1], trimmed


def classifier_err(clf: LinearDomainClassifier, u_s, u_t, seed: int = 0) -> float:
    """Pooled 0-1 error against the indicator of membership in the source set."""
    u_s, u_t = _as_samples(u_s), _as_samples(u_t)
    if u_s.dim != u_t.dim or u_s.dim != len(clf.w):
        raise ValueError("dimension mismatch between classifier and samples")
    u_s, u_t, _ = _equalize(u_s, u_t, seed)
    pred = np.concatenate([clf.predict(u_s.values), clf.predict(u_t.values)])
    truth = np.concatenate([np.ones(len(u_s), dtype=np.int64), np.zeros(len(u_t), dtype=np.int64)])
    return float(np.abs(pred - truth).sum() / (2 * len(u_s)))


def a_distance(u_s, u_t, cfg: ClassifierConfig = ClassifierConfig(), *, holdout: bool = False,
               seed: int = 0) -> ADistanceResult:
    """``2 (1 - 2 min(err, 1 - err))`` for the fitted linear classifier.

    By default the error is measured on the same samples used for fitting.
    ``holdout=True`` fits on one half of each domain and scores the other.
    """
    u_s, u_t = _as_samples(u_s), _as_samples(u_t)
    if u_s.dim != u_t.dim:
        raise ValueError(f"dimension mismatch: {u_s.dim} vs {u_t.dim}")
    u_s, u_t, trimmed = _equalize(u_s, u_t, seed)
    if holdout:
        rng = np.random.default_rng([seed, 1])
        ps, pt = rng.permutation(len(u_s)), rng.permutation(len(u_t))
        h = len(u_s) // 2
        if h < 2 or len(u_s) - h < 2:
            raise ValueError("holdout mode needs at least four samples per domain")
        fit_s, eval_s = DomainSamples(u_s.values[ps[:h]]), DomainSamples(u_s.values[ps[h:]])
        fit_t, eval_t = DomainSamples(u_t.values[pt[:h]]), DomainSamples(u_t.values[pt[h:]])
    else:
        fit_s, fit_t, eval_s, eval_t = u_s, u_t, u_s, u_t
    clf = fit_domain_classifier(fit_s, fit_t, cfg)
    err = classifier_err(clf, eval_s, eval_t, seed)
    err_min = min(err, 1.0 - err)
    kept = int((np.vstack([fit_s.values, fit_t.values]).var(axis=0) >= VAR_FLOOR).sum())
    return ADistanceResult(err, err_min, 2.0 * (1.0 - 2.0 * err_min), clf, len(u_s), u_s.dim, kept,
                           "holdout" if holdout else "train", trimmed)
