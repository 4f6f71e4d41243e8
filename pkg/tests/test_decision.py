import random
from dataclasses import replace

import pytest

from smarthangar import decision
from smarthangar.decision import (
    ACTION_NAMES,
    ActionVector,
    Atom,
    BadRulesFile,
    BadTreeFile,
    ConflictAtEqualPriority,
    DecisionInput,
    EmptyCorpus,
    ExpertRule,
    InconsistentLabels,
    NO_ACTION,
    TreeParams,
    UnsatisfiableRule,
    apply_rules,
    build_training_corpus,
    export_tree,
    feature_vector,
    import_tree,
    predict,
    predict_detailed,
    retrain,
    train_tree,
    training_error,
)


def situation(**overrides):
    base = dict(
        near_sea=False, ac_installed=False, heating_installed=False,
        filters_installed=False, insulation_installed=False, barriers_installed=False,
        carpets_installed=False, walls_material="wood", roof_material="steel",
        floor_material="concrete", walls_area=1004.8, roof_area=985.6,
        floor_area=985.6, exhibition_area=985.6, volume=7884.8,
        time_of_wetness=0.0, iso_category=1, mean_risk=0.05, max_risk=0.1,
        freeze_thaw_events=0.0, indoor_so2_annual=3.0, indoor_pm10_annual=6.0,
        indoor_pm25_annual=3.0, rh_indoor_minus_outdoor=2.0, occupancy=None,
    )
    base.update(overrides)
    return DecisionInput(**base)


CARPET_RULE = ExpertRule(
    name="carpets",
    atoms=(Atom("carpets_installed", "==", True),),
    consequent={"uninstall_carpets": "yes"},
    priority=10,
    citation="carpets trap dust",
)


class TestRules:
    def test_single_rule_two_point_grid(self):
        build = build_training_corpus(
            [CARPET_RULE],
            [situation(carpets_installed=True), situation(carpets_installed=False)],
        )
        assert len(build.corpus) == 2
        by_flag = {inp.carpets_installed: labels for inp, labels in build.corpus}
        assert by_flag[True].uninstall_carpets == "yes"
        assert by_flag[False] == ActionVector()
        assert build.coverage == {"carpets": 1}

    def test_empty_rule_list_labels_everything_no_action(self):
        build = build_training_corpus([], [situation(), situation(near_sea=True)])
        assert all(labels == ActionVector() for _, labels in build.corpus)

    def test_unsatisfiable_rule_surfaces(self):
        with pytest.raises(UnsatisfiableRule) as err:
            build_training_corpus([CARPET_RULE], [situation(carpets_installed=False)])
        assert "carpets" in str(err.value)

    def test_equal_priority_conflict_is_hard_error(self):
        increase = ExpertRule(
            "up", (Atom("max_risk", ">=", 0.0),), {"air_exchange": "increase"}, 5, ""
        )
        decrease = ExpertRule(
            "down", (Atom("max_risk", ">=", 0.0),), {"air_exchange": "decrease"}, 5, ""
        )
        with pytest.raises(ConflictAtEqualPriority):
            apply_rules([increase, decrease], situation())

    def test_higher_priority_wins(self):
        lo = ExpertRule("lo", (), {"air_exchange": "increase"}, 1, "")
        hi = ExpertRule("hi", (), {"air_exchange": "decrease"}, 9, "")
        labels, fired = apply_rules([lo, hi], situation())
        assert labels.air_exchange == "decrease"
        assert fired == ["lo", "hi"]

    def test_equal_priority_same_value_is_fine(self):
        a = ExpertRule("a", (), {"install_filters": "yes"}, 5, "")
        b = ExpertRule("b", (), {"install_filters": "yes"}, 5, "")
        labels, _ = apply_rules([a, b], situation(filters_installed=False))
        assert labels.install_filters == "yes"

    def test_unknown_feature_or_action_rejected(self):
        with pytest.raises(BadRulesFile):
            Atom("wing_span", ">=", 1.0)
        with pytest.raises(BadRulesFile):
            ExpertRule("x", (), {"paint_walls": "yes"}, 1, "")

    def test_rules_file_round_trip(self, tmp_path):
        rules = decision.load_rules()
        path = tmp_path / "rules.json"
        decision.save_rules(rules, path)
        assert decision.load_rules(path) == rules

    def test_shipped_rules_cover_grid(self):
        rules = decision.load_rules()
        build = decision.default_corpus(rules)
        assert set(build.coverage) == {rule.name for rule in rules}
        assert min(build.coverage.values()) >= 1


class TestTraining:
    def test_single_example_single_leaf(self):
        inp = situation(carpets_installed=True)
        labels = ActionVector(uninstall_carpets="yes")
        tree = train_tree([(inp, labels)], TreeParams(min_samples_leaf=1))
        assert tree.root.is_leaf
        assert predict(tree, situation()) == ActionVector()  # repair strips it
        assert predict(tree, inp) == labels

    def test_forced_split_on_single_differing_feature(self):
        a = situation(carpets_installed=True)
        b = situation(carpets_installed=False)
        corpus = [
            (a, ActionVector(uninstall_carpets="yes")),
            (b, ActionVector()),
        ]
        tree = train_tree(corpus, TreeParams(min_samples_leaf=1))
        root = tree.root
        assert not root.is_leaf
        assert decision.FEATURE_NAMES[root.feature] == "carpets_installed"
        assert root.left.is_leaf and root.right.is_leaf

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            train_tree([])

    def test_inconsistent_labels_detected(self):
        inp = situation()
        corpus = [(inp, ActionVector()), (inp, ActionVector(exhibition_ratio_op="change"))]
        with pytest.raises(InconsistentLabels):
            train_tree(corpus)

    def test_duplicate_consistent_rows_collapse(self):
        inp = situation()
        tree = train_tree([(inp, ActionVector()), (inp, ActionVector())],
                          TreeParams(min_samples_leaf=1))
        assert tree.n_samples == 1

    def test_shipped_corpus_memorized(self, default_build, default_tree):
        assert training_error(default_tree, default_build.corpus) == 0.0

    def test_deterministic_fingerprint_and_bytes(self, default_build, default_tree):
        again = train_tree(default_build.corpus)
        assert again.fingerprint == default_tree.fingerprint
        assert export_tree(again) == export_tree(default_tree)

    def test_depth_within_default_limit(self, default_tree):
        def depth(node, d=0):
            if node.is_leaf:
                return d
            return max(depth(node.left, d + 1), depth(node.right, d + 1))

        assert depth(default_tree.root) <= 12

    def test_rescaling_a_numeric_feature_changes_nothing(self, default_build, default_tree):
        factor = 3.7
        scaled_corpus = [
            (replace(inp, volume=inp.volume * factor), labels)
            for inp, labels in default_build.corpus
        ]
        scaled_tree = train_tree(scaled_corpus)
        for inp, _ in default_build.corpus[:200]:
            scaled_inp = replace(inp, volume=inp.volume * factor)
            assert predict(scaled_tree, scaled_inp) == predict(default_tree, inp)


class TestPrediction:
    def test_training_inputs_reproduce_labels(self, default_build, default_tree):
        for inp, labels in default_build.corpus:
            raw = decision._route(default_tree.root, feature_vector(inp))
            assert raw.labels == labels.as_tuple()

    def test_benign_fully_equipped_hangar_all_no_action(self, default_tree):
        inp = situation(
            ac_installed=True, heating_installed=True, filters_installed=True,
            insulation_installed=True, barriers_installed=True, carpets_installed=False,
        )
        assert predict(default_tree, inp) == ActionVector()

    def test_repair_coerces_and_reports(self):
        inp = situation(heating_installed=True)
        raw = ActionVector(install_heating="yes")
        fixed, notes = decision.repair_actions(raw, inp)
        assert fixed.install_heating == NO_ACTION
        assert notes and "install_heating" in notes[0]

    def test_post_repair_invariants_hold_on_random_inputs(self, default_tree):
        rng = random.Random(99)
        flags = ("near_sea", "ac_installed", "heating_installed", "filters_installed",
                 "insulation_installed", "barriers_installed", "carpets_installed")
        for _ in range(1000):
            overrides = {name: rng.random() < 0.5 for name in flags}
            inp = situation(
                time_of_wetness=rng.uniform(0, 400),
                iso_category=rng.randint(1, 5),
                mean_risk=rng.uniform(0, 1),
                max_risk=rng.uniform(0, 1),
                freeze_thaw_events=float(rng.randint(0, 40)),
                indoor_so2_annual=rng.uniform(0, 60),
                indoor_pm10_annual=rng.uniform(0, 80),
                indoor_pm25_annual=rng.uniform(0, 40),
                rh_indoor_minus_outdoor=rng.uniform(-10, 10),
                **overrides,
            )
            actions, _ = predict_detailed(default_tree, inp)
            assert actions.violations(inp) == []

    def test_untrained_model(self):
        with pytest.raises(decision.UntrainedModel):
            predict(None, situation())


class TestRetrain:
    def test_empty_delta_preserves_predictions(self, default_build, default_tree):
        tree = retrain(default_build.corpus, [], default_tree.params)
        for inp, _ in default_build.corpus[:300]:
            assert predict(tree, inp) == predict(default_tree, inp)
        assert tree.fingerprint == default_tree.fingerprint

    def test_contradiction_rejected(self, default_build, default_tree):
        inp, labels = default_build.corpus[0]
        flipped = replace(
            labels,
            exhibition_ratio_op="change" if labels.exhibition_ratio_op == NO_ACTION else NO_ACTION,
        )
        with pytest.raises(InconsistentLabels):
            retrain(default_build.corpus, [(inp, flipped)], default_tree.params)

    def test_new_block_flips_exactly_intended_predictions(self, default_build, default_tree):
        new_inputs = [
            situation(iso_category=5, max_risk=0.95, mean_risk=0.8,
                      rh_indoor_minus_outdoor=-8.0, time_of_wetness=3000.0 + k)
            for k in range(4)
        ]
        new_examples = [
            (inp, ActionVector(exhibition_ratio_op="change")) for inp in new_inputs
        ]
        tree = retrain(default_build.corpus, new_examples, default_tree.params)
        for inp, labels in new_examples:
            assert predict(tree, inp) == labels
        unchanged = 0
        for inp, _ in default_build.corpus[:300]:
            if predict(tree, inp) == predict(default_tree, inp):
                unchanged += 1
        assert unchanged == 300

    def test_old_tree_untouched(self, default_build, default_tree):
        before = export_tree(default_tree)
        retrain(default_build.corpus, [], default_tree.params)
        assert export_tree(default_tree) == before


class TestTreeFile:
    def test_round_trip_identity(self, default_tree):
        text = export_tree(default_tree)
        again = import_tree(text)
        assert export_tree(again) == text
        assert again.fingerprint == default_tree.fingerprint

    def test_truncated_file_rejected(self, default_tree):
        text = export_tree(default_tree)
        with pytest.raises(BadTreeFile):
            import_tree(text[: len(text) // 2])

    def test_imported_tree_predicts_identically(self, default_build, default_tree):
        clone = import_tree(export_tree(default_tree))
        for inp, _ in default_build.corpus[:300]:
            assert predict(clone, inp) == predict(default_tree, inp)

    def test_vocabulary_mismatch_rejected(self, default_tree):
        import json

        doc = json.loads(export_tree(default_tree))
        doc["actions"] = doc["actions"][:-1]
        with pytest.raises(BadTreeFile):
            import_tree(json.dumps(doc))

    def test_leaf_label_domain_checked(self, default_tree):
        import json

        doc = json.loads(export_tree(default_tree))

        def first_leaf(node):
            while node["kind"] != "leaf":
                node = node["left"]
            return node

        first_leaf(doc["root"])["labels"]["ac_op"] = "explode"
        with pytest.raises(BadTreeFile):
            import_tree(json.dumps(doc))


class TestActionVector:
    def test_domains_enforced(self):
        with pytest.raises(decision.DecisionError):
            ActionVector(air_exchange="sideways").validate()

    def test_order_is_stable(self):
        assert ACTION_NAMES[0] == "air_exchange"
        assert ACTION_NAMES[-1] == "uninstall_carpets"
        assert len(ACTION_NAMES) == 11

    def test_document_round_trip(self):
        vec = ActionVector(install_heating="yes")
        assert ActionVector.from_dict(vec.to_dict()) == vec
        with pytest.raises(decision.DecisionError):
            ActionVector.from_dict({"warp_drive": "yes"})
