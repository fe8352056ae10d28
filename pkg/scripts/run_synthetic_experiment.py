"""Full pipeline on the seeded synthetic corpus: features, forest, metrics, ANOVA, importance, ablation.

    python scripts/run_synthetic_experiment.py --out runs/synthetic --seed 0
"""
import argparse
from pathlib import Path

from adscreen.cli import main as cli
from adscreen.synthetic import make_corpus


def step(*argv):
    argv = [str(a) for a in argv]
    print("$ adscreen " + " ".join(argv))
    if cli(argv) != 0:
        raise SystemExit(f"step failed: {argv[0]}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/synthetic")
    ap.add_argument("--seed", type=int, default=0, help="corpus and forest seed")
    ap.add_argument("--per-class", type=int, default=60)
    ap.add_argument("--n-trees", type=int, default=300)
    args = ap.parse_args()

    out = Path(args.out)
    train, test = make_corpus(out / "corpus", n_per_class=args.per_class, seed=args.seed)
    common = ["--out-dir", out, "--seed", args.seed]
    step("fit", train, *common)
    model = out / "tfidf_model.json"
    step("featurize", train, "--model", model, "--output", "train.csv", *common)
    step("featurize", test, "--model", model, "--output", "test.csv", "--impute-from", out / "train.csv", *common)
    step("train", out / "train.csv", "--n-trees", args.n_trees, *common)
    step("eval", out / "test.csv", "--forest", out / "forest.json", *common)
    step("anova", out / "train.csv", *common)
    step("importance", out / "forest.json", *common)
    step("ablate", out / "train.csv", out / "test.csv", "--n-trees", args.n_trees, *common)
    print(f"outputs in {out}")


if __name__ == "__main__":
    main()
