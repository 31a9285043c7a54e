"""Repeated end-to-end experiment: KNN, NoFed, Fed and FedHealth per client subject."""

from __future__ import annotations

import json
import logging
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data.har import HarDataset, partition_by_subject
from .evaluation.metrics import accuracy, confusion_and_prf
from .federation.config import RunConfig
from .federation.protocol import build_parties, run_protocol

logger = logging.getLogger(__name__)

# Fed is the aggregated cloud model without personalization
METHODS = ("KNN", "NoFed", "Fed", "FedHealth")
TARGET = "FedHealth"


@dataclass
class ExperimentReport:
    subjects: tuple
    variant: str
    seeds: list = field(default_factory=list)
    # method -> list (per repetition) of per-subject accuracy lists; None for aborted repetitions
    accuracies: dict = field(default_factory=lambda: {m: [] for m in METHODS})
    knn_k: list = field(default_factory=list)
    cloud_accuracy: list = field(default_factory=list)
    # repetition -> {(subject, method): (predictions, truths)}
    predictions: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)
    audits: list = field(default_factory=list)

    @property
    def complete(self):
        return not self.errors

    @property
    def completed(self):
        return [i for i in range(len(self.seeds)) if i not in self.errors]

    def table(self, method):
        """``[n_completed, n_subjects]`` accuracies."""
        rows = [self.accuracies[method][i] for i in self.completed]
        return np.array(rows, dtype=np.float64).reshape(len(rows), len(self.subjects))

    def subject_means(self, method):
        return self.table(method).mean(axis=0)

    def average(self, method):
        return float(self.subject_means(method).mean())

    def delta(self, baseline, method=TARGET):
        return self.average(method) - self.average(baseline)

    def best_repetition(self):
        """Completed repetition with the highest FedHealth average (earliest on ties)."""
        done = self.completed
        if not done:
            return None
        scores = [np.mean(self.accuracies[TARGET][i]) for i in done]
        return done[int(np.argmax(scores))]

    def confusion(self, subject, method, repetition=None):
        rep = self.best_repetition() if repetition is None else repetition
        preds, truths = self.predictions[rep][(subject, method)]
        return confusion_and_prf(preds, truths)

    def macro_f1(self, method, repetition=None):
        """Macro F1 averaged over clients on one repetition (best by default)."""
        return float(np.mean([self.confusion(s, method, repetition)[1].macro_f1 for s in self.subjects]))

    # ------------------------------------------------------------------ output

    def to_csv(self):
        f = lambda v: f"{v:.6f}"  # noqa: E731
        lines = ["section,subject,repetition,seed,knn_k," + ",".join(METHODS)]
        for i, seed in enumerate(self.seeds):
            if i in self.errors:
                lines.append(f"aborted,all,{i},{seed},," + ",".join("" for _ in METHODS))
                continue
            for j, s in enumerate(self.subjects):
                row = ",".join(f(self.accuracies[m][i][j]) for m in METHODS)
                lines.append(f"repetition,{s},{i},{seed},{self.knn_k[i][j]},{row}")
        if self.completed:
            for j, s in enumerate(self.subjects):
                lines.append(f"mean,{s},,,," + ",".join(f(self.subject_means(m)[j]) for m in METHODS))
            lines.append("average,all,,,," + ",".join(f(self.average(m)) for m in METHODS))
            lines.append("delta_fedhealth,all,,,," + ",".join(f(self.delta(m)) for m in METHODS))
            best = self.best_repetition()
            for metric in ("macro_precision", "macro_recall", "macro_f1"):
                for s in self.subjects:
                    vals = [getattr(self.confusion(s, m, best)[1], metric) for m in METHODS]
                    lines.append(f"{metric},{s},{best},{self.seeds[best]},," + ",".join(f(v) for v in vals))
        return "\n".join(lines) + "\n"

    def summary(self):
        out = [f"Activity recognition accuracy per client subject (variant: {self.variant})"]
        out.append(f"repetitions: {len(self.completed)} of {len(self.seeds)} completed, seeds {self.seeds}")
        if self.errors:
            out.append("INCOMPLETE: " + "; ".join(f"repetition {i}: {e}" for i, e in sorted(self.errors.items())))
        if not self.completed:
            return "\n".join(out) + "\n"
        out.append("")
        out.append("subject  " + "".join(f"{m:>11}" for m in METHODS))
        for j, s in enumerate(self.subjects):
            out.append(f"{s:<9}" + "".join(f"{100 * self.subject_means(m)[j]:>10.2f}%" for m in METHODS))
        out.append(f"{'average':<9}" + "".join(f"{100 * self.average(m):>10.2f}%" for m in METHODS))
        out.append("")
        for m in METHODS[:-1]:
            out.append(f"FedHealth - {m}: {100 * self.delta(m):+.2f} points")
        best = self.best_repetition()
        out.append("")
        out.append(f"macro F1 averaged over clients (repetition {best}):")
        for m in METHODS:
            out.append(f"  {m:<10} {self.macro_f1(m, best):.4f}")
        out.append("")
        out.append("SVM and random forest baselines are not reproduced.")
        return "\n".join(out) + "\n"

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(self.to_csv())
        (out / "summary.txt").write_text(self.summary())
        best = self.best_repetition()
        if best is not None:
            for s in self.subjects:
                for m in METHODS:
                    cm, _ = self.confusion(s, m, best)
                    (out / f"confusion_{s}_{m}.csv").write_text(cm.to_csv())
        with open(out / "audit.log", "w") as fh:
            for i, audit in enumerate(self.audits):
                for rec in audit:
                    fh.write(json.dumps({"repetition": i, **rec.__dict__}, sort_keys=True) + "\n")
        return out


def repetition_seeds(seed, repeats):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(repeats)]


def run_repetition(config: RunConfig, dataset: HarDataset, seed):
    """One full pass. Returns ``(per-method accuracies, ks, cloud accuracy, predictions, audit)``."""
    if config.federation.rounds == 0:
        raise ValueError("an experiment needs at least one federation round")
    subjects = config.client_subjects
    clients_data = {s: partition_by_subject(dataset, [s])[0] for s in subjects}
    cloud = partition_by_subject(dataset, subjects)[1]
    authority, server, clients = build_parties(
        cloud, clients_data, config.crypto, config.model, config.train_ratio, seed
    )
    result = run_protocol(
        server,
        clients,
        authority,
        config.cloud,
        config.client,
        config.transfer,
        config.federation,
        config.crypto.obfuscation,
    )
    accs = {m: [] for m in METHODS}
    ks, preds = [], {}
    reference = server.cloud_train if config.knn.train_source == "cloud" else None
    for c in clients:
        models = {"NoFed": result.cloud_model, "Fed": result.received[c.client_id], "FedHealth": result.personalized[c.client_id]}
        for m, params in models.items():
            preds[(c.client_id, m)] = c.evaluate(params)
        p, t, k = c.knn(reference, None, config.knn.candidates, config.knn.cv, seed)
        preds[(c.client_id, "KNN")] = (p, t)
        ks.append(k)
        for m in METHODS:
            accs[m].append(accuracy(*preds[(c.client_id, m)]))
    return accs, ks, server.cloud_eval_accuracy, preds, result.audit


def run_experiment(config: RunConfig, dataset: HarDataset) -> ExperimentReport:
    report = ExperimentReport(config.client_subjects, config.transfer.variant)
    for i, seed in enumerate(repetition_seeds(config.seed, config.repeats)):
        report.seeds.append(seed)
        logger.info("repetition %d/%d (seed %d)", i + 1, config.repeats, seed)
        try:
            accs, ks, cloud_acc, preds, audit = run_repetition(config, dataset, seed)
        except Exception as exc:  # recorded, the remaining repetitions still run
            logger.error("repetition %d aborted: %s", i, exc)
            logger.debug("%s", traceback.format_exc())
            report.errors[i] = str(exc)
            for m in METHODS:
                report.accuracies[m].append(None)
            report.knn_k.append(None)
            report.cloud_accuracy.append(None)
            report.predictions.append(None)
            report.audits.append([])
            continue
        for m in METHODS:
            report.accuracies[m].append(accs[m])
        report.knn_k.append(ks)
        report.cloud_accuracy.append(cloud_acc)
        report.predictions.append(preds)
        report.audits.append(audit)
        logger.info(
            "repetition %d: %s",
            i,
            ", ".join(f"{m} {np.mean(accs[m]):.4f}" for m in METHODS),
        )
    if config.output_dir:
        report.write(config.output_dir)
    return report
