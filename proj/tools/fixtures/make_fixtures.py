#!/usr/bin/env python3
"""Regenerates the model and dataset fixtures under tests/fixtures.

The C++ project never trains models; this script is the documented converter
from scikit-learn / LightGBM into the two ingest formats (json_interchange and
the LightGBM text dump). Outputs are committed, so running it is only needed
when fixtures change.

Requirements: numpy, scikit-learn, lightgbm, keel-ds (for the Australian
credit approval data; pass --australian to use a local copy instead).
"""

import argparse
import io
import json
import os
import zipfile

import numpy as np

CREDIT_ATTRIBUTES = [
    # (name, kind, categories or None); order follows the Statlog columns A1..A14.
    ("Gender", "categorical", ["0", "1"]),
    ("Age", "numeric", None),
    ("Debt", "numeric", None),
    ("Married", "categorical", ["1", "2", "3"]),
    ("Industry", "categorical", [str(k) for k in range(1, 15)]),
    ("Ethnicity", "categorical", [str(k) for k in range(1, 10)]),
    ("YearsEmployed", "numeric", None),
    ("PriorDefault", "categorical", ["no", "yes"]),
    ("Employed", "categorical", ["no", "yes"]),
    ("CreditScore", "numeric", None),
    ("DriversLicense", "categorical", ["no", "yes"]),
    ("Citizen", "categorical", ["g", "p", "s"]),
    ("ZipCode", "numeric", None),
    ("Income", "numeric", None),
]
CREDIT_CLASSES = ["rejected", "approved"]


def load_australian(path):
    if path:
        text = open(path).read()
    else:
        import keel_ds

        wheel_dir = os.path.dirname(keel_ds.__file__)
        with open(os.path.join(wheel_dir, "data/balanced/raw/australian.dat")) as f:
            text = f.read()
    rows = [l for l in text.splitlines() if l and not l.startswith("@")]
    return np.array([[float(v) for v in r.split(",")] for r in rows])


def category_index(attr, raw):
    """Maps the raw Statlog code to the schema category index."""
    name, kind, cats = attr
    if name in ("Gender", "PriorDefault", "Employed", "DriversLicense"):
        return int(raw)
    return int(raw) - 1


def write_schema(path, attributes, classes):
    doc = {"attributes": [], "classes": classes}
    for name, kind, cats in attributes:
        entry = {"name": name, "kind": kind}
        if cats is not None:
            entry["categories"] = cats
        doc["attributes"].append(entry)
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def fmt_num(v):
    return repr(float(v)) if v != int(v) else str(int(v))


def write_csv(path, attributes, classes, X, y, split):
    with open(path, "w") as f:
        f.write(",".join([a[0] for a in attributes] + ["__label__", "__split__"]) + "\n")
        for row, label, s in zip(X, y, split):
            cells = []
            for attr, v in zip(attributes, row):
                cells.append(attr[2][int(v)] if attr[1] == "categorical" else fmt_num(v))
            cells += [classes[int(label)], s]
            f.write(",".join(cells) + "\n")


def export_sklearn_forest(forest, attributes, num_classes):
    trees = []
    for est in forest.estimators_:
        t = est.tree_
        nodes = []
        for i in range(t.node_count):
            if t.children_left[i] == -1:
                counts = t.value[i][0] * t.weighted_n_node_samples[i]
                nodes.append({"leaf": [round(float(c), 6) for c in counts]})
                continue
            feat = int(t.feature[i])
            thr = float(t.threshold[i])
            name, kind, cats = attributes[feat]
            node = {"attr": feat, "left": int(t.children_left[i]),
                    "right": int(t.children_right[i])}
            if kind == "categorical":
                node["kind"] = "categorical"
                node["categories"] = [k for k in range(len(cats)) if k <= thr]
            else:
                node["kind"] = "numeric"
                node["threshold"] = thr
            nodes.append(node)
        trees.append({"target_class": None, "nodes": nodes})
    return {"model_kind": "random_forest", "base_scores": [0.0] * num_classes,
            "trees": trees}


def hard_vote_predictions(forest, X, num_classes):
    votes = np.zeros((X.shape[0], num_classes))
    for est in forest.estimators_:
        leaf = est.apply(X.astype(np.float32))
        value = est.tree_.value[leaf][:, 0, :]
        votes[np.arange(X.shape[0]), np.argmax(value, axis=1)] += 1
    return np.argmax(votes, axis=1)


def write_expected(path, preds):
    with open(path, "w") as f:
        f.write("\n".join(str(int(p)) for p in preds) + "\n")


def credit(out_dir, australian_path):
    from sklearn.ensemble import RandomForestClassifier
    from sklearn.model_selection import train_test_split
    import lightgbm as lgb

    data = load_australian(australian_path)
    X_raw, y = data[:, :14], data[:, 14].astype(int)
    X = np.zeros_like(X_raw)
    for j, attr in enumerate(CREDIT_ATTRIBUTES):
        if attr[1] == "categorical":
            X[:, j] = [category_index(attr, v) for v in X_raw[:, j]]
        else:
            X[:, j] = X_raw[:, j]
    idx_train, idx_test = train_test_split(np.arange(len(y)), test_size=0.25,
                                           random_state=0, stratify=y)
    split = np.array(["train"] * len(y), dtype=object)
    split[idx_test] = "test"

    os.makedirs(out_dir, exist_ok=True)
    write_schema(os.path.join(out_dir, "schema.json"), CREDIT_ATTRIBUTES, CREDIT_CLASSES)
    write_csv(os.path.join(out_dir, "credit.csv"), CREDIT_ATTRIBUTES, CREDIT_CLASSES, X, y, split)

    forest = RandomForestClassifier(n_estimators=200, max_depth=10, min_samples_leaf=4,
                                    random_state=0)
    forest.fit(X[idx_train], y[idx_train])
    model = export_sklearn_forest(forest, CREDIT_ATTRIBUTES, 2)
    with open(os.path.join(out_dir, "rf.json"), "w") as f:
        json.dump(model, f, separators=(",", ":"))
    write_expected(os.path.join(out_dir, "rf_expected.txt"),
                   hard_vote_predictions(forest, X, 2))
    print("credit rf leaves:", sum(e.tree_.n_leaves for e in forest.estimators_))

    cat_cols = [j for j, a in enumerate(CREDIT_ATTRIBUTES) if a[1] == "categorical"]
    booster = lgb.train({"objective": "binary", "num_leaves": 15, "learning_rate": 0.1,
                         "min_data_in_leaf": 5, "min_data_per_group": 5, "cat_smooth": 1,
                         "verbose": -1, "seed": 0, "deterministic": True},
                        lgb.Dataset(X[idx_train], y[idx_train],
                                    categorical_feature=cat_cols, free_raw_data=False,
                                    feature_name=[a[0] for a in CREDIT_ATTRIBUTES]),
                        num_boost_round=60)
    booster.save_model(os.path.join(out_dir, "gbt.txt"))
    raw = booster.predict(X, raw_score=True)
    write_expected(os.path.join(out_dir, "gbt_expected.txt"), (raw > 0).astype(int))


def multiclass(out_dir):
    from sklearn.ensemble import RandomForestClassifier
    import lightgbm as lgb

    rng = np.random.default_rng(7)
    attributes = [("x1", "numeric", None), ("x2", "numeric", None),
                  ("color", "categorical", ["red", "green", "blue", "black"]),
                  ("x3", "numeric", None)]
    classes = ["low", "mid", "high"]
    n = 360
    # Multiples of 1/8 keep float32 thresholds exact.
    x1 = np.round(rng.normal(0, 2, n) * 8) / 8
    x2 = np.round(rng.uniform(-4, 4, n) * 8) / 8
    color = rng.integers(0, 4, n)
    x3 = np.round(rng.normal(1, 1, n) * 8) / 8
    score = x1 + 0.5 * x2 + np.where(color == 2, 1.5, 0) - np.where(color == 3, 1.0, 0)
    score += rng.normal(0, 0.7, n)
    y = np.digitize(score, [-1.0, 1.0])
    X = np.column_stack([x1, x2, color, x3])
    split = np.where(rng.uniform(size=n) < 0.75, "train", "test")
    train = split == "train"

    os.makedirs(out_dir, exist_ok=True)
    write_schema(os.path.join(out_dir, "schema.json"), attributes, classes)
    write_csv(os.path.join(out_dir, "data.csv"), attributes, classes, X, y, split)

    forest = RandomForestClassifier(n_estimators=12, max_depth=5, random_state=1)
    forest.fit(X[train], y[train])
    with open(os.path.join(out_dir, "rf.json"), "w") as f:
        json.dump(export_sklearn_forest(forest, attributes, 3), f, separators=(",", ":"))
    write_expected(os.path.join(out_dir, "rf_expected.txt"), hard_vote_predictions(forest, X, 3))

    booster = lgb.train({"objective": "multiclass", "num_class": 3, "num_leaves": 6,
                         "learning_rate": 0.2, "min_data_in_leaf": 5,
                         "min_data_per_group": 5, "cat_smooth": 1, "max_cat_to_onehot": 2,
                         "verbose": -1, "seed": 0, "deterministic": True},
                        lgb.Dataset(X[train], y[train], categorical_feature=[2],
                                    free_raw_data=False,
                                    feature_name=[a[0] for a in attributes]),
                        num_boost_round=8)
    booster.save_model(os.path.join(out_dir, "gbt.txt"))
    raw = booster.predict(X, raw_score=True)
    write_expected(os.path.join(out_dir, "gbt_expected.txt"), np.argmax(raw, axis=1))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=os.path.join(os.path.dirname(__file__),
                                                      "../../tests/fixtures"))
    parser.add_argument("--australian", default=None,
                        help="path to australian.dat (KEEL raw layout)")
    args = parser.parse_args()
    credit(os.path.join(args.out, "credit"), args.australian)
    multiclass(os.path.join(args.out, "multiclass"))


if __name__ == "__main__":
    main()
