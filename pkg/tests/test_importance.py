"""Feature-ranking scores: signal detection, subset locality, per-node
formulas and the summary roll-ups."""

import numpy as np
import pytest

from satml import synth
from satml.importance import (ImportanceReport, compute_importance,
                              genie3_importance, permutation_importance,
                              summarize, symbolic_importance)
from satml.learners import ModelSpec, train


@pytest.fixture(scope="module")
def linear_forest():
    ds = synth.gen_linear_dataset(n=300, seed=11)
    model = train(ds, ModelSpec("forest", {"n_trees": 20, "min_leaf": 5},
                                seed=1))
    return ds, model


class TestSignalDetection:
    def test_permutation_ranks_signal_first(self, linear_forest):
        ds, model = linear_forest
        rep = permutation_importance(model, ds, repeats=3, seed=0)
        ranked = sorted(rep.aggregate, key=rep.aggregate.get, reverse=True)
        assert ranked[0] == "x1"
        assert rep.aggregate["x1"] > 10 * max(
            abs(rep.aggregate[f]) for f in ds.feature_names if f != "x1")

    def test_genie3_ranks_signal_first(self, linear_forest):
        ds, model = linear_forest
        rep = genie3_importance(model, ds)
        ranked = sorted(rep.aggregate, key=rep.aggregate.get, reverse=True)
        assert ranked[0] == "x1"

    def test_symbolic_ranks_signal_first(self, linear_forest):
        ds, model = linear_forest
        rep = symbolic_importance(model, ds)
        ranked = sorted(rep.aggregate, key=rep.aggregate.get, reverse=True)
        assert ranked[0] == "x1"

    def test_tree_scores_nonnegative(self, linear_forest):
        ds, model = linear_forest
        for fn in (genie3_importance, symbolic_importance):
            rep = fn(model, ds)
            assert all(v >= 0 for v in rep.aggregate.values())

    def test_gboost_scores_work(self):
        ds = synth.gen_linear_dataset(n=200, seed=3)
        model = train(ds, ModelSpec("gboost", {"n_rounds": 10}, seed=0))
        for kind in ("permutation", "genie3", "symbolic"):
            rep = compute_importance(kind, model, ds, repeats=2)
            ranked = sorted(rep.aggregate, key=rep.aggregate.get, reverse=True)
            assert ranked[0] == "x1"


class TestNeverSplitFeature:
    def test_tree_scores_zero_for_constant_feature(self):
        # a constant column can never host a split, so both scores are zero
        from satml.data import Dataset

        base = synth.gen_linear_dataset(n=150, seed=7)
        X = np.column_stack([base.X, np.zeros(base.n_rows)])
        names = base.feature_names + ["const"]
        cats = {**base.categories, "const": "DECOY"}
        ds = Dataset(X, base.Y, names, base.target_names, cats,
                     time_index=base.time_index)
        model = train(ds, ModelSpec("forest", {"n_trees": 5}, seed=2))
        for fn in (genie3_importance, symbolic_importance):
            rep = fn(model, ds)
            assert rep.aggregate["const"] == 0.0
            assert rep.per_target["y"]["const"] == 0.0


class TestSubsets:
    def test_subset_depends_only_on_selected_rows(self, linear_forest):
        ds, model = linear_forest
        sub = np.arange(50)
        base = genie3_importance(model, ds, subset=sub)
        perturbed = ds.take(np.arange(ds.n_rows))
        perturbed.X[200:] += 1000.0  # far outside the subset
        after = genie3_importance(model, perturbed, subset=sub)
        assert base.aggregate == after.aggregate

    def test_permutation_subset_locality(self, linear_forest):
        ds, model = linear_forest
        sub = np.arange(80)
        a = permutation_importance(model, ds, repeats=2, subset=sub, seed=5)
        perturbed = ds.take(np.arange(ds.n_rows))
        perturbed.Y[200:] += 99.0
        b = permutation_importance(model, perturbed, repeats=2, subset=sub,
                                   seed=5)
        assert a.aggregate == b.aggregate

    def test_boolean_mask_subset(self, linear_forest):
        ds, model = linear_forest
        mask = np.zeros(ds.n_rows, dtype=bool)
        mask[:60] = True
        rep = symbolic_importance(model, ds, subset=mask)
        assert rep.subset == {"kind": "rows", "count": 60}

    def test_empty_subset_rejected(self, linear_forest):
        ds, model = linear_forest
        with pytest.raises(ValueError):
            symbolic_importance(model, ds, subset=np.array([], dtype=int))


class TestNodeFormulas:
    def single_split_model(self):
        # one tree, one root split at x <= 0, constant-by-side targets
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]] * 10)
        Y = np.where(X < 0, -1.0, 1.0)
        ds = synth.gen_linear_dataset(n=1, seed=0)  # only for the shape
        from satml.data import Dataset

        ds = Dataset(X, Y, ["x"], ["y"], {"x": "SIGNAL"},
                     time_index=np.arange(len(X), dtype=np.int64))
        model = train(ds, ModelSpec("forest",
                                    {"n_trees": 1, "bootstrap": False,
                                     "max_depth": 1, "min_leaf": 1}, seed=0))
        return ds, model

    def test_genie3_equals_n_times_variance_drop(self):
        ds, model = self.single_split_model()
        assert model.trees()[0][0].n_nodes == 3
        rep = genie3_importance(model, ds)
        # standardized target has unit population variance and the split is
        # perfect, so the root contributes n * (1 - 0) over 1 tree
        assert rep.aggregate["x"] == pytest.approx(ds.n_rows * 1.0)

    def test_symbolic_root_fraction_is_one(self):
        ds, model = self.single_split_model()
        rep = symbolic_importance(model, ds)
        assert rep.aggregate["x"] == pytest.approx(1.0)

    def test_non_tree_model_rejected(self):
        ds = synth.gen_linear_dataset(n=50, seed=1)
        model = train(ds, ModelSpec("knn", {"k": 3}))
        for kind in ("genie3", "symbolic"):
            with pytest.raises(ValueError):
                compute_importance(kind, model, ds)
        # permutation works for any model
        compute_importance("permutation", model, ds, repeats=1)

    def test_permutation_seed_determinism(self, linear_forest):
        ds, model = linear_forest
        a = permutation_importance(model, ds, repeats=2, seed=3)
        b = permutation_importance(model, ds, repeats=2, seed=3)
        assert a.aggregate == b.aggregate


class TestSummarize:
    def report(self):
        return ImportanceReport(
            "permutation",
            {"y": {"a": 2.0, "b": 1.0, "c": 3.0}},
            {"a": 2.0, "b": 1.0, "c": 3.0})

    def test_category_rollup_sums_scores(self):
        cats = {"a": "SAA", "b": "SAA", "c": "DMOP"}
        out = summarize(self.report(), cats, top_k=10)
        assert out["category_rollup"]["aggregate"] == {"SAA": 3.0, "DMOP": 3.0}
        assert out["category_rollup"]["per_target"]["y"]["SAA"] == 3.0

    def test_top_k_order_and_truncation(self):
        cats = {"a": "SAA", "b": "SAA", "c": "SAA"}
        out = summarize(self.report(), cats, top_k=2)
        top = out["top_features"]["aggregate"]
        assert [e["feature"] for e in top] == ["c", "a"]

    def test_tie_broken_by_name(self):
        rep = ImportanceReport("permutation", {"y": {"b": 1.0, "a": 1.0}},
                               {"b": 1.0, "a": 1.0})
        out = summarize(rep, {"a": "SAA", "b": "SAA"}, top_k=2)
        assert [e["feature"] for e in out["top_features"]["aggregate"]] == ["a", "b"]

    def test_top_k_larger_than_feature_count(self):
        out = summarize(self.report(), {"a": "S", "b": "S", "c": "S"}, top_k=99)
        assert len(out["top_features"]["aggregate"]) == 3

    def test_uncategorized_feature_rejected(self):
        with pytest.raises(ValueError):
            summarize(self.report(), {"a": "SAA", "b": "SAA"}, top_k=2)

    def test_report_dict_roundtrip(self):
        rep = self.report()
        back = ImportanceReport.from_dict(rep.to_dict())
        assert back.aggregate == rep.aggregate
        assert back.score_kind == rep.score_kind
