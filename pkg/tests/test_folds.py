import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_corpus, make_task
from ood_harness.errors import ValidationError
from ood_harness.folds import (
    FoldPlan,
    compose_id,
    compose_ood,
    fold_count,
    load_plan,
    plan_to_dict,
    save_plan,
    verify_plan,
)


@pytest.mark.parametrize(
    "n_groups,expected",
    [(2, 2), (3, 3), (4, 4), (5, 3), (8, 3), (12, 3), (118, 3)],
)
def test_fold_count(n_groups, expected):
    assert fold_count(n_groups) == expected


def test_fold_count_rejects_single_group():
    with pytest.raises(ValidationError):
        fold_count(1)


def equal_topics(n_groups, size, labels=("pro", "con")):
    return make_corpus(
        {f"g{i}": [labels[j % 2] for j in range(size)] for i in range(n_groups)}
    )


def test_three_groups_leave_one_out():
    corpus = equal_topics(3, 6)
    plan = compose_ood(corpus, seed=7)
    assert len(plan.folds) == 3
    assert sorted(len(tg) for tg in plan.test_groups_per_fold) == [1, 1, 1]
    assert verify_plan(plan, corpus) == []


def test_eight_equal_topics_greedy_balance():
    # 8 topics x 10 instances: greedy largest-first gives test-group
    # counts {3, 3, 2} and the test splits cover all 80 ids.
    corpus = equal_topics(8, 10)
    plan = compose_ood(corpus, seed=0)
    assert sorted(len(tg) for tg in plan.test_groups_per_fold) == [2, 3, 3]
    test_ids = [i for split in plan.folds for i in split.test_ids]
    assert len(test_ids) == 80
    assert len(set(test_ids)) == 80
    assert verify_plan(plan, corpus) == []


def test_four_domains_four_folds():
    task = make_task(shift_kind="domain")
    corpus = make_corpus(
        {d: ["pro", "con"] * 5 for d in ("books", "dvd", "kitchen", "electronics")},
        task=task,
    )
    plan = compose_ood(corpus, seed=1)
    assert len(plan.folds) == 4
    for f, groups in enumerate(plan.test_groups_per_fold):
        assert len(groups) == 1
        train_groups = {corpus.by_id(i).groups["domain"] for i in plan.folds[f].train_ids}
        dev_groups = {corpus.by_id(i).groups["domain"] for i in plan.folds[f].dev_ids}
        assert len(dev_groups) == 1
        assert len(train_groups) == 2
        assert not dev_groups & train_groups
        assert not (dev_groups | train_groups) & groups
    assert verify_plan(plan, corpus) == []


def test_compose_ood_deterministic():
    corpus = equal_topics(10, 8)
    a = compose_ood(corpus, seed=42)
    b = compose_ood(corpus, seed=42)
    assert a == b
    assert plan_to_dict(a) == plan_to_dict(b)


def test_seed_changes_dev_choice():
    corpus = equal_topics(10, 8)
    plans = {compose_ood(corpus, seed=s).folds[0].dev_ids for s in range(8)}
    assert len(plans) > 1


def test_two_group_corpus_gets_instance_level_dev():
    corpus = equal_topics(2, 20)
    plan = compose_ood(corpus, seed=3)
    assert len(plan.folds) == 2
    assert verify_plan(plan, corpus) == []
    split = plan.folds[0]
    assert len(split.dev_ids) == 2  # ceil(10% of 20)
    assert len(split.train_ids) == 18
    all_test = {i for s in plan.folds for i in s.test_ids}
    assert all_test == set(corpus.ids)


def test_single_instance_leftover_group_fails():
    corpus = make_corpus({"A": ["pro"] * 9 + ["con"], "B": ["con"]})
    with pytest.raises(ValidationError, match="empty"):
        compose_ood(corpus, seed=0)


def test_fold_override_validated():
    corpus = equal_topics(5, 4)
    with pytest.raises(ValidationError):
        compose_ood(corpus, seed=0, n_folds=6)
    plan = compose_ood(corpus, seed=0, n_folds=5)
    assert len(plan.folds) == 5


def test_compose_id_sizes_match():
    corpus = equal_topics(8, 10)
    ood = compose_ood(corpus, seed=0)
    id_plan = compose_id(corpus, ood, seed=0)
    assert id_plan.mode == "ID"
    for a, b in zip(ood.folds, id_plan.folds):
        assert len(a.train_ids) == len(b.train_ids)
        assert len(a.dev_ids) == len(b.dev_ids)
        assert len(a.test_ids) == len(b.test_ids)
    assert verify_plan(id_plan, corpus) == []
    test_ids = [i for s in id_plan.folds for i in s.test_ids]
    assert sorted(test_ids) == sorted(corpus.ids)


def test_compose_id_deterministic():
    corpus = equal_topics(6, 9)
    ood = compose_ood(corpus, seed=5)
    assert compose_id(corpus, ood, seed=5) == compose_id(corpus, ood, seed=5)


def test_id_plan_differs_from_ood_grouping():
    # With many groups a random shuffle fitting the group boundaries
    # exactly is vanishingly unlikely.
    corpus = equal_topics(9, 12)
    ood = compose_ood(corpus, seed=11)
    id_plan = compose_id(corpus, ood, seed=11)
    assert any(a.test_ids != b.test_ids for a, b in zip(ood.folds, id_plan.folds))


def test_verify_plan_flags_duplicated_test_id():
    corpus = equal_topics(3, 4)
    plan = compose_ood(corpus, seed=0)
    folds = list(plan.folds)
    moved = folds[0].test_ids[0]
    folds[2] = dataclasses.replace(folds[2], test_ids=folds[2].test_ids + (moved,))
    broken = dataclasses.replace(plan, folds=tuple(folds))
    violations = verify_plan(broken, corpus)
    assert f"test-coverage: id {moved} appears in folds 0 and 2" in violations


def test_verify_plan_flags_dev_train_group_overlap():
    corpus = equal_topics(5, 4)
    plan = compose_ood(corpus, seed=0)
    folds = list(plan.folds)
    # move one train instance of fold 1 into its dev split
    train_groups = sorted(
        {corpus.by_id(i).groups["topic"] for i in folds[1].train_ids}
    )
    leak = next(
        i for i in folds[1].train_ids
        if corpus.by_id(i).groups["topic"] == train_groups[0]
    )
    folds[1] = dataclasses.replace(
        folds[1],
        train_ids=tuple(i for i in folds[1].train_ids if i != leak),
        dev_ids=folds[1].dev_ids + (leak,),
    )
    broken = dataclasses.replace(plan, folds=tuple(folds))
    assert any("dev-disjointness" in v and "fold 1" in v for v in verify_plan(broken, corpus))


def test_verify_plan_ok_on_valid_plans():
    corpus = equal_topics(7, 5)
    plan = compose_ood(corpus, seed=2)
    assert verify_plan(plan, corpus) == []


def test_plan_roundtrip(tmp_path):
    corpus = equal_topics(5, 6)
    plan = compose_ood(corpus, seed=9)
    path = tmp_path / "plan.json"
    save_plan(plan, path)
    assert load_plan(path) == plan
    id_plan = compose_id(corpus, plan, seed=9)
    save_plan(id_plan, tmp_path / "id.json")
    assert load_plan(tmp_path / "id.json") == id_plan


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_plan_invariants_random_corpora(data):
    n_groups = data.draw(st.integers(2, 12))
    sizes = data.draw(
        st.lists(st.integers(2, 40), min_size=n_groups, max_size=n_groups)
    )
    seed = data.draw(st.integers(0, 2**63 - 1))
    corpus = make_corpus(
        {
            f"g{i}": [("pro", "con")[j % 2] for j in range(size)]
            for i, size in enumerate(sizes)
        }
    )
    ood = compose_ood(corpus, seed)
    assert verify_plan(ood, corpus) == []
    test_ids = [i for s in ood.folds for i in s.test_ids]
    assert sorted(test_ids) == sorted(corpus.ids)
    id_plan = compose_id(corpus, ood, seed)
    assert verify_plan(id_plan, corpus) == []
    for a, b in zip(ood.folds, id_plan.folds):
        assert (len(a.train_ids), len(a.dev_ids), len(a.test_ids)) == (
            len(b.train_ids),
            len(b.dev_ids),
            len(b.test_ids),
        )
