"""``adscreen`` command line."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import llmgen
from .config import ConfigError, RunConfig, load_config
from .ingest import IngestError
from .model import (
    ForestModel,
    ablation_sweep,
    anova_f,
    evaluate,
    grid_search,
    metrics_from_predictions,
    rank_by_f,
    train_forest,
)
from .pipeline import (
    PipelineError,
    atomic_write_text,
    column_means,
    featurize_manifest,
    features_to_csv,
    fit_from_manifest,
    matrix,
    read_features_csv,
)
from .taskfeat import FEATURE_NAMES, dump_keyword_sets, load_keyword_sets
from .tfidf import TfIdfModel

log = logging.getLogger("adscreen")

DEFAULT_GRID = [
    {"n_trees": n, "max_depth": d, "min_samples_leaf": leaf}
    for n in (100, 300)
    for d in (None, 4, 8)
    for leaf in (1, 2)
]


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return "inf" if x == float("inf") else f"{x:.6f}"


class App:
    def __init__(self, args: argparse.Namespace, cfg: RunConfig):
        self.args = args
        self.cfg = cfg
        self.out = Path(cfg.out_dir)

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        atomic_write_text(path, text)
        return path

    def snapshot(self) -> None:
        self.write(f"resolved_config.{self.args.command}.txt", self.cfg.dumps())

    # -- features ---------------------------------------------------------

    def fit(self):
        model = fit_from_manifest(self.args.train_manifest, self.cfg)
        path = self.write("tfidf_model.json", model.dumps())
        print(f"vocabulary size: {len(model.vocab)}")
        print("top30: " + ", ".join(model.top30))
        print(f"wrote {path}")

    def featurize(self):
        model = TfIdfModel.loads(Path(self.args.model).read_text(encoding="utf-8"))
        means = None
        if self.args.impute_from:
            means = column_means(read_features_csv(self.args.impute_from))
        result = featurize_manifest(self.args.manifest, model, self.cfg, means)
        path = self.write(self.args.output, features_to_csv(result.rows))
        self.write(self.args.output + ".notes.log", "".join(n + "\n" for n in result.notes))
        print(f"wrote {len(result.rows)} rows to {path} ({len(result.notes)} notes)")

    # -- modelling --------------------------------------------------------

    def _matrix(self, path):
        return matrix(read_features_csv(path))

    def train(self):
        X, y = self._matrix(self.args.features)
        model = train_forest(X, y, self.cfg.forest_config(), FEATURE_NAMES)
        path = self.write("forest.json", model.dumps())
        print(f"trained {model.n_trees} trees (seed {self.cfg.seed}); wrote {path}")

    def eval(self):
        rows = read_features_csv(self.args.features)
        _, y = matrix(rows)
        if self.args.predictions:
            preds = {}
            with open(self.args.predictions, newline="", encoding="utf-8") as fh:
                for r in csv.DictReader(fh):
                    preds[r["subject_id"].strip()] = r["prediction"].strip().upper()
            missing = [r.subject_id for r in rows if r.subject_id not in preds]
            if missing:
                raise PipelineError(f"no prediction for: {', '.join(missing)}")
            report = metrics_from_predictions(y, [preds[r.subject_id] for r in rows])
        else:
            if not self.args.forest:
                raise PipelineError("eval needs --forest or --predictions")
            model = ForestModel.loads(Path(self.args.forest).read_text(encoding="utf-8"))
            X, _ = matrix(rows)
            report = evaluate(model, X, y)
        pct = [report.accuracy, report.precision, report.recall, report.f1]
        text = _csv([
            ["ACC", "PRE", "REC", "F1", "accuracy", "precision", "recall", "f1", "tp", "fp", "fn", "tn", "seed"],
            [*(f"{100 * v:.1f}" for v in pct), *(f"{v:.6f}" for v in pct),
             report.tp, report.fp, report.fn, report.tn, self.cfg.seed],
        ])
        self.write("metrics.csv", text)
        print(text, end="")

    def anova(self):
        X, y = self._matrix(self.args.features)
        f = anova_f(X, y)
        order = rank_by_f(f)
        rows = [["rank", "feature", "f_value"]]
        rows += [[k + 1, FEATURE_NAMES[j], _fmt(f[j])] for k, j in enumerate(order)]
        self.write("anova.csv", _csv(rows))
        print(_csv(rows), end="")

    def importance(self):
        model = ForestModel.loads(Path(self.args.forest).read_text(encoding="utf-8"))
        order = sorted(range(len(model.importance)), key=lambda j: (-model.importance[j], j))
        rows = [["rank", "feature", "importance"]]
        rows += [[k + 1, model.feature_names[j], f"{model.importance[j]:.6f}"] for k, j in enumerate(order)]
        self.write("importance.csv", _csv(rows))
        print(_csv(rows), end="")

    def ablate(self):
        X_tr, y_tr = self._matrix(self.args.train)
        X_te, y_te = self._matrix(self.args.test)
        curve = ablation_sweep(X_tr, y_tr, X_te, y_te, self.cfg.forest_config(), FEATURE_NAMES)
        rows = [["n_features", "accuracy", "added_feature"]]
        rows += [[n, f"{acc:.6f}", FEATURE_NAMES[j]] for n, acc, j in curve]
        self.write("ablation.csv", _csv(rows))
        print(_csv(rows), end="")

    def grid_search(self):
        X, y = self._matrix(self.args.features)
        grid = DEFAULT_GRID
        if self.args.grid:
            grid = json.loads(Path(self.args.grid).read_text(encoding="utf-8"))
        best, results = grid_search(X, y, grid, self.args.folds, self.cfg.forest_config())
        rows = [["n_trees", "max_depth", "min_samples_leaf", "max_features", "cv_accuracy"]]
        for c, acc in results:
            rows.append([c.n_trees, c.max_depth or 0, c.min_samples_leaf, c.max_features or 0, f"{acc:.6f}"])
        self.write("grid_search.csv", _csv(rows))
        snippet = (f"n_trees = {best.n_trees}\nmax_depth = {best.max_depth or 0}\n"
                   f"min_samples_leaf = {best.min_samples_leaf}\nmax_features = {best.max_features or 0}\n"
                   f"seed = {best.seed}\n")
        self.write("best_config.txt", snippet)
        print(snippet, end="")

    # -- LLM generation ---------------------------------------------------

    def _endpoint(self) -> llmgen.EndpointConfig:
        c = self.cfg
        return llmgen.EndpointConfig(
            endpoint_url=c.endpoint_url, model_name=c.model_name, temperature=c.temperature,
            api_key_env=c.api_key_env, max_retries=c.max_retries, retry_backoff=c.retry_backoff,
            parallelism=c.parallelism,
        )

    def gen_keywords(self):
        a = self.args
        log_path = Path(a.run_log) if a.run_log else self.out / f"{a.name}_run.jsonl"
        if a.from_log:
            run = llmgen.load_run(a.from_log)
        else:
            run = llmgen.generate("keywords", a.iterations, self._endpoint(), log_path, image_path=a.image)
            print(f"{len(run.responses)}/{run.iterations} responses logged to {log_path}")
        cands = llmgen.aggregate_keywords(run, self.cfg.min_frequency)
        self.out.mkdir(parents=True, exist_ok=True)
        llmgen.write_candidates(cands, self.out / f"{a.name}_candidates.csv")
        decisions = self.out / f"{a.name}_decisions.csv"
        if not decisions.exists():
            llmgen.write_decision_template(cands, decisions)
        print(f"{len(cands)} candidates; mark each accept/reject in {decisions}, then run `adscreen curate`")

    def gen_refs(self):
        a = self.args
        log_path = Path(a.run_log) if a.run_log else self.out / "refs_run.jsonl"
        if a.from_log:
            run = llmgen.load_run(a.from_log)
        else:
            run = llmgen.generate("descriptions", a.iterations, self._endpoint(), log_path, image_path=a.image)
        lines = llmgen.responses_to_reference_lines(run)
        header = (f"# golden descriptions: {len(lines)} responses, model {run.model_name}, "
                  f"run {run.timestamp}\n")
        path = self.write(a.output, header + "".join(ln + "\n" for ln in lines))
        print(f"wrote {len(lines)} references to {path}")

    def curate(self):
        a = self.args
        cands = llmgen.read_candidates(a.candidates)
        kw = llmgen.curate(cands, a.decisions, a.set_id, a.topic)
        out = Path(a.keywords_out)
        sets = load_keyword_sets(out) if out.exists() else []
        sets = [s for s in sets if s.id != kw.id] + [kw]
        sets.sort(key=lambda s: s.id)
        atomic_write_text(out, dump_keyword_sets(sets))
        print(f"keyword set {kw.id} ({kw.topic or 'untagged'}): {', '.join(kw.words)} -> {out}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--strict", action="store_true", default=None,
                        help="fail instead of imputing missing trees/ASR")
    common.add_argument("--out-dir")
    common.add_argument("--keywords", dest="keywords_path")
    common.add_argument("--references", dest="references_path")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="adscreen", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("fit", parents=[common], help="fit the TF-IDF model on a training manifest")
    s.add_argument("train_manifest")

    s = sub.add_parser("featurize", parents=[common], help="compute the 15 features for a manifest")
    s.add_argument("manifest")
    s.add_argument("--model", required=True, help="tfidf_model.json")
    s.add_argument("--output", default="features.csv")
    s.add_argument("--impute-from", help="features CSV whose column means fill missing values")

    s = sub.add_parser("train", parents=[common], help="train the random forest")
    s.add_argument("features")
    s.add_argument("--n-trees", type=int)
    s.add_argument("--n-jobs", type=int)

    s = sub.add_parser("eval", parents=[common], help="accuracy/precision/recall/F1 on a test set")
    s.add_argument("features")
    s.add_argument("--forest")
    s.add_argument("--predictions", help="CSV subject_id,prediction from an external classifier")

    s = sub.add_parser("anova", parents=[common], help="per-feature ANOVA F-values")
    s.add_argument("features")

    s = sub.add_parser("importance", parents=[common], help="Gini importance table of a forest")
    s.add_argument("forest")

    s = sub.add_parser("ablate", parents=[common], help="accuracy vs. number of top-F features")
    s.add_argument("train")
    s.add_argument("test")
    s.add_argument("--n-trees", type=int)
    s.add_argument("--n-jobs", type=int)

    s = sub.add_parser("grid-search", parents=[common], help="cross-validated forest grid search")
    s.add_argument("features")
    s.add_argument("--grid", help="JSON list of parameter dicts")
    s.add_argument("--folds", type=int, default=5)

    s = sub.add_parser("gen-keywords", parents=[common], help="LLM keyword generation for a sub-picture")
    s.add_argument("--image")
    s.add_argument("--iterations", type=int, default=llmgen.DEFAULT_ITERATIONS["keywords"])
    s.add_argument("--name", default="topic")
    s.add_argument("--run-log")
    s.add_argument("--from-log", help="re-aggregate an existing run log without network access")

    s = sub.add_parser("gen-refs", parents=[common], help="LLM golden-description generation")
    s.add_argument("--image")
    s.add_argument("--iterations", type=int, default=llmgen.DEFAULT_ITERATIONS["descriptions"])
    s.add_argument("--output", default="references.txt")
    s.add_argument("--run-log")
    s.add_argument("--from-log")

    s = sub.add_parser("curate", parents=[common], help="apply accept/reject decisions to candidates")
    s.add_argument("--candidates", required=True)
    s.add_argument("--decisions", required=True)
    s.add_argument("--set-id", type=int, required=True)
    s.add_argument("--topic", default="")
    s.add_argument("--keywords-out", required=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen-keywords" and not args.image and not args.from_log:
        parser.error("gen-keywords needs --image (or --from-log to re-aggregate a run)")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {
        "seed": args.seed,
        "strict": args.strict,
        "out_dir": args.out_dir,
        "keywords_path": args.keywords_path,
        "references_path": args.references_path,
        "n_trees": getattr(args, "n_trees", None),
        "n_jobs": getattr(args, "n_jobs", None),
    }
    try:
        cfg = load_config(args.config, overrides)
        app = App(args, cfg)
        handler = getattr(app, args.command.replace("-", "_"))
        handler()
        app.snapshot()
    except (ConfigError, IngestError, PipelineError, llmgen.GenerationError, ValueError, OSError) as exc:
        print(f"adscreen {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
