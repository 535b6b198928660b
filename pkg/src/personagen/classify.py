"""Downstream emotion classification over embeddings.

The reference classifier is multinomial logistic regression trained by
full-batch gradient descent. Anything with ``class_labels`` and a
``predict`` method can stand in for it (see :class:`Classifier`).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Protocol, Sequence

import numpy as np

from .embedding import EmbeddedCorpus
from .errors import DegenerateLabels, InsufficientSamples, LabelSetMismatch, UnknownLabel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


def _n_train(n: int, fraction: float) -> int:
    return min(max(int(math.floor(fraction * n + 0.5)), 1), n - 1)


def split(corpus: EmbeddedCorpus, spec: SplitSpec = SplitSpec()) -> tuple[EmbeddedCorpus, EmbeddedCorpus]:
    """Seeded train/test split; both sides keep the corpus's original order."""
    n = len(corpus)
    if n < 2:
        raise InsufficientSamples("need at least two samples to split")
    rng = np.random.default_rng(spec.seed)
    train_idx: list[int] = []
    if spec.stratified:
        labels = np.asarray(corpus.labels)
        for lbl in corpus.label_set:
            idx = np.flatnonzero(labels == lbl)
            if idx.size < 2:
                raise InsufficientSamples(f"class {lbl!r} has {idx.size} sample(s); need 2 to stratify")
            perm = rng.permutation(idx)
            train_idx.extend(perm[: _n_train(idx.size, spec.train_fraction)].tolist())
    else:
        perm = rng.permutation(n)
        train_idx = perm[: _n_train(n, spec.train_fraction)].tolist()
    in_train = np.zeros(n, dtype=bool)
    in_train[train_idx] = True
    return corpus.subset(np.flatnonzero(in_train)), corpus.subset(np.flatnonzero(~in_train))


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 0.1
    l2: float = 1e-4
    epochs: int = 500
    seed: int = 0


class Classifier(Protocol):
    class_labels: list[str]

    def predict(self, x: np.ndarray) -> list[str]: ...


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(
    weights: np.ndarray, bias: np.ndarray, x: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy plus ``l2/2 * ||W||^2``, and its gradients.

    ``y`` holds integer class indices.
    """
    n = x.shape[0]
    logits = x @ weights.T + bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_p = shifted[np.arange(n), y] - log_norm
    loss = float(-log_p.mean() + 0.5 * l2 * np.sum(weights * weights))
    delta = softmax(logits)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    return loss, delta.T @ x + l2 * weights, delta.sum(axis=0)


@dataclass
class ClassifierModel:
    weights: np.ndarray
    bias: np.ndarray
    class_labels: list[str]
    hyperparams: Hyperparams = Hyperparams()
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(set(self.class_labels)) != len(self.class_labels):
            raise ValueError("class labels must be unique")
        if self.weights.shape[0] != len(self.class_labels) or self.bias.shape != (len(self.class_labels),):
            raise ValueError("parameter shapes do not match the class count")

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(np.asarray(x, dtype=float) @ self.weights.T + self.bias)

    def predict_indices(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)

    def predict(self, x: np.ndarray) -> list[str]:
        return [self.class_labels[i] for i in self.predict_indices(x)]

    def encode(self, labels: Sequence[str]) -> np.ndarray:
        index = {lbl: i for i, lbl in enumerate(self.class_labels)}
        try:
            return np.array([index[lbl] for lbl in labels], dtype=int)
        except KeyError as exc:
            raise UnknownLabel(f"label {exc.args[0]!r} is not one of {self.class_labels}") from None


def train(
    train_set: EmbeddedCorpus,
    hyperparams: Hyperparams = Hyperparams(),
    class_labels: Sequence[str] | None = None,
) -> ClassifierModel:
    """Fit the reference classifier from zero-initialized parameters.

    A step that would raise the loss is rejected and the learning rate
    halved, so the recorded loss never increases.
    """
    present = sorted(set(train_set.labels))
    if len(present) < 2:
        raise DegenerateLabels(f"training data has a single class {present}")
    labels = list(class_labels) if class_labels is not None else present
    x = train_set.vectors
    k, d = len(labels), train_set.dim
    model = ClassifierModel(np.zeros((k, d)), np.zeros(k), labels, hyperparams)
    y = model.encode(train_set.labels)

    w, b = model.weights, model.bias
    lr = hyperparams.learning_rate
    loss, gw, gb = loss_and_grad(w, b, x, y, hyperparams.l2)
    history = [loss]
    for _ in range(hyperparams.epochs):
        while lr > 1e-12:
            w_new, b_new = w - lr * gw, b - lr * gb
            new_loss, gw_new, gb_new = loss_and_grad(w_new, b_new, x, y, hyperparams.l2)
            if new_loss <= loss:
                w, b, loss, gw, gb = w_new, b_new, new_loss, gw_new, gb_new
                break
            lr /= 2.0
        else:
            logger.debug("step size underflow; stopping early")
            break
        history.append(loss)
    model.weights, model.bias, model.loss_history = w, b, history
    return model


def gradient_check(
    model: ClassifierModel,
    x: np.ndarray,
    labels: Sequence[str],
    l2: float | None = None,
    h: float = 1e-5,
    n_coords: int | None = None,
    seed: int = 0,
) -> float:
    """Largest relative gap between analytic and central-difference gradients.

    The relative error of one coordinate is ``|a - n| / max(|a|, |n|, 1e-8)``.
    ``n_coords`` limits the check to a random subset of parameters.
    """
    x = np.asarray(x, dtype=float)
    y = model.encode(labels)
    reg = model.hyperparams.l2 if l2 is None else l2
    w, b = model.weights.astype(float), model.bias.astype(float)
    _, gw, gb = loss_and_grad(w, b, x, y, reg)
    params = np.concatenate([w.ravel(), b])
    analytic = np.concatenate([gw.ravel(), gb])
    coords = np.arange(params.size)
    if n_coords is not None and n_coords < params.size:
        coords = np.random.default_rng(seed).choice(params.size, n_coords, replace=False)

    def loss_at(flat: np.ndarray) -> float:
        ww = flat[: w.size].reshape(w.shape)
        return loss_and_grad(ww, flat[w.size :], x, y, reg)[0]

    worst = 0.0
    for i in coords:
        up, down = params.copy(), params.copy()
        up[i] += h
        down[i] -= h
        numeric = (loss_at(up) - loss_at(down)) / (2 * h)
        a = analytic[i]
        worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), 1e-8))
    return worst


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    class_labels: list[str]
    confusion: np.ndarray
    per_class: dict[str, ClassMetrics]
    macro: dict[str, float]
    weighted: dict[str, float]
    accuracy: float
    undefined_precision: list[str] = field(default_factory=list)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "eval_report",
            "class_labels": list(self.class_labels),
            "accuracy": self.accuracy,
            "macro": dict(self.macro),
            "weighted": dict(self.weighted),
            "per_class": {
                lbl: {"precision": m.precision, "recall": m.recall, "f1": m.f1, "support": m.support}
                for lbl, m in self.per_class.items()
            },
            "confusion": self.confusion.tolist(),
            "undefined_precision": list(self.undefined_precision),
        }

    def confusion_rows(self) -> list[dict[str, Any]]:
        return [
            {"true": lbl, **{pred: int(c) for pred, c in zip(self.class_labels, row)}}
            for lbl, row in zip(self.class_labels, self.confusion)
        ]


def _safe_div(a: float, b: float) -> float:
    return a / b if b else 0.0


def report_from_confusion(confusion: np.ndarray, class_labels: Sequence[str]) -> EvalReport:
    """Per-class and aggregate scores from a (true x predicted) count matrix."""
    cm = np.asarray(confusion, dtype=np.int64)
    labels = list(class_labels)
    if cm.shape != (len(labels), len(labels)):
        raise ValueError("confusion matrix shape does not match the label list")
    tp = np.diag(cm)
    predicted = cm.sum(axis=0)
    support = cm.sum(axis=1)
    per_class, undefined = {}, []
    for i, lbl in enumerate(labels):
        if predicted[i] == 0:
            undefined.append(lbl)
        p = _safe_div(tp[i], predicted[i])
        r = _safe_div(tp[i], support[i])
        per_class[lbl] = ClassMetrics(float(p), float(r), float(_safe_div(2 * p * r, p + r)), int(support[i]))
    total = int(cm.sum())

    def _avg(weights: np.ndarray) -> dict[str, float]:
        wsum = weights.sum()
        return {
            key: float(_safe_div(sum(getattr(m, key) * w for m, w in zip(per_class.values(), weights)), wsum))
            for key in ("precision", "recall", "f1")
        }

    return EvalReport(
        class_labels=labels,
        confusion=cm,
        per_class=per_class,
        macro=_avg(np.ones(len(labels))),
        weighted=_avg(support.astype(float)),
        accuracy=float(_safe_div(tp.sum(), total)),
        undefined_precision=undefined,
    )


def confusion_matrix(true: Sequence[str], predicted: Sequence[str], class_labels: Sequence[str]) -> np.ndarray:
    index = {lbl: i for i, lbl in enumerate(class_labels)}
    cm = np.zeros((len(index), len(index)), dtype=np.int64)
    for t, p in zip(true, predicted):
        if t not in index:
            raise UnknownLabel(f"label {t!r} is not one of {list(class_labels)}")
        cm[index[t], index[p]] += 1
    return cm


def evaluate(model: Classifier, test: EmbeddedCorpus) -> EvalReport:
    if len(test) == 0:
        raise InsufficientSamples("empty test set")
    unknown = sorted(set(test.labels) - set(model.class_labels))
    if unknown:
        raise UnknownLabel(f"test labels {unknown} are unknown to the model")
    predicted = model.predict(test.vectors)
    return report_from_confusion(
        confusion_matrix(test.labels, predicted, model.class_labels), model.class_labels
    )


class SubstitutionResult(NamedTuple):
    golden: EvalReport
    synthetic: EvalReport


Trainer = Callable[[EmbeddedCorpus, Hyperparams, Sequence[str]], Classifier]


def substitution_experiment(
    golden: EmbeddedCorpus,
    synthetic: EmbeddedCorpus,
    spec: SplitSpec = SplitSpec(),
    hyperparams: Hyperparams = Hyperparams(),
    trainer: Trainer = train,
) -> SubstitutionResult:
    """Train once on the golden training split and once on the synthetic corpus.

    Both models are scored on the same golden test split.
    """
    if set(golden.label_set) != set(synthetic.label_set):
        raise LabelSetMismatch(
            f"golden labels {sorted(golden.label_set)} vs synthetic {sorted(synthetic.label_set)}"
        )
    if golden.provider_tag != synthetic.provider_tag:
        logger.warning(
            "embedding providers differ: %s vs %s", golden.provider_tag, synthetic.provider_tag
        )
    labels = sorted(golden.label_set)
    golden_train, golden_test = split(golden, spec)
    golden_model = trainer(golden_train, hyperparams, labels)
    synthetic_model = trainer(synthetic, hyperparams, labels)
    return SubstitutionResult(evaluate(golden_model, golden_test), evaluate(synthetic_model, golden_test))


def single_corpus_experiment(
    corpus: EmbeddedCorpus, spec: SplitSpec = SplitSpec(), hyperparams: Hyperparams = Hyperparams()
) -> EvalReport:
    train_set, test_set = split(corpus, spec)
    return evaluate(train(train_set, hyperparams, sorted(corpus.label_set)), test_set)
