import random

import pytest
from hypothesis import given, settings, strategies as st

from mbrx.core import CandidateSet, candidate_loglik
from mbrx.selection import (
    RiskFunction,
    RiskMatrix,
    filter_executable,
    mbr_select,
    pairwise_loss_bleu,
    pairwise_loss_exec,
    select,
    select_mall,
    select_ml,
)

from conftest import fail_outcome, make_candidate, make_set, ok_outcome
from oracles import brute_force_mbr, reference_bleu


def outcome_matrix(statuses, outputs):
    """Build a matrix from per-candidate status strings and output values."""
    matrix = []
    for ci, (status_row, output_row) in enumerate(zip(statuses, outputs)):
        row = []
        for ti, (status, output) in enumerate(zip(status_row, output_row)):
            cid, iid = f"c{ci}", f"t{ti}"
            row.append(ok_outcome(cid, iid, output) if status == "ok"
                       else fail_outcome(cid, iid, status))
        matrix.append(row)
    return matrix


class TestPairwiseLossExec:
    def test_agreement_is_zero(self):
        m = outcome_matrix([["ok"], ["ok"]], [["3"], ["3"]])
        risk = pairwise_loss_exec(m)
        assert risk.values == ((0.0, 0.0), (0.0, 0.0))

    def test_both_timeouts_not_equivalent(self):
        m = outcome_matrix([["timeout"], ["timeout"]], [[None], [None]])
        risk = pairwise_loss_exec(m)
        assert risk.values == ((1.0, 1.0), (1.0, 1.0))

    def test_partial_agreement_soft_vs_hard(self):
        m = outcome_matrix(
            [["ok", "ok", "ok"], ["ok", "ok", "ok"]],
            [["1", "2", "3"], ["1", "2", "999"]],
        )
        hard = pairwise_loss_exec(m, soft=False)
        soft = pairwise_loss_exec(m, soft=True)
        assert hard.values[0][1] == 1.0
        assert soft.values[0][1] == pytest.approx(1 / 3)

    def test_single_test_hard_equals_soft(self):
        m = outcome_matrix(
            [["ok"], ["runtime_error"], ["ok"]],
            [["a"], [None], ["b"]],
        )
        assert pairwise_loss_exec(m, soft=False).values == pairwise_loss_exec(m, soft=True).values

    def test_failing_diagonal_is_one(self):
        m = outcome_matrix([["ok"], ["parse_error"]], [["x"], [None]])
        risk = pairwise_loss_exec(m)
        assert risk.values[0][0] == 0.0
        assert risk.values[1][1] == 1.0

    @given(st.data())
    @settings(max_examples=60, deadline=None)
    def test_symmetry_and_hard_dominates_soft(self, data):
        n = data.draw(st.integers(1, 5))
        n_tests = data.draw(st.integers(1, 3))
        statuses = [
            [data.draw(st.sampled_from(["ok", "ok", "timeout", "runtime_error"]))
             for _ in range(n_tests)]
            for _ in range(n)
        ]
        outputs = [
            [data.draw(st.sampled_from(["a", "b", "c"])) for _ in range(n_tests)]
            for _ in range(n)
        ]
        m = outcome_matrix(statuses, outputs)
        hard = pairwise_loss_exec(m, soft=False)
        soft = pairwise_loss_exec(m, soft=True)
        for i in range(n):
            for j in range(n):
                assert hard.values[i][j] == hard.values[j][i]
                assert soft.values[i][j] == soft.values[j][i]
                assert hard.values[i][j] >= soft.values[i][j]
                assert hard.values[i][j] in (0.0, 1.0)
                assert 0.0 <= soft.values[i][j] <= 1.0


class TestPairwiseLossBleu:
    def test_identical_programs(self):
        cset = make_set(2, texts=["def f(): return 1"] * 2)
        risk = pairwise_loss_bleu(cset, level="char")
        assert risk.values[0][1] == pytest.approx(-1.0)

    def test_disjoint_characters(self):
        cset = make_set(2, texts=["aaaaaaa", "zzzzzzz"])
        risk = pairwise_loss_bleu(cset, level="char")
        assert -0.05 < risk.values[0][1] < 0.0

    def test_entries_match_symmetrized_reference(self):
        texts = ["ls -l", "ls -la", "cat file"]
        cset = make_set(3, texts=texts)
        risk = pairwise_loss_bleu(cset, level="char")
        for i in range(3):
            for j in range(3):
                expected = -(
                    reference_bleu(texts[i], texts[j]) + reference_bleu(texts[j], texts[i])
                ) / 2
                assert risk.values[i][j] == pytest.approx(expected, abs=1e-9)

    def test_symmetric(self):
        cset = make_set(4, texts=["ab", "abc", "abcd", "xyz"])
        for level in ("char", "token"):
            risk = pairwise_loss_bleu(cset, level=level)
            assert risk.values == tuple(zip(*risk.values))

    def test_no_execution_needed(self):
        assert not RiskFunction("bleu-char").needs_execution
        assert not RiskFunction("bleu-token").needs_execution
        assert RiskFunction("exec-hard").needs_execution


def random_risk_case(rng, n):
    values = tuple(
        tuple(rng.choice([0.0, 0.5, 1.0]) for _ in range(n)) for _ in range(n)
    )
    logliks = [round(rng.uniform(-10, 0), 3) for _ in range(n)]
    cset = make_set(n, logliks=logliks)
    risk = RiskMatrix(RiskFunction("exec-hard"), values)
    return cset, risk, values, logliks


class TestMbrSelect:
    def test_figure_one_scenario(self):
        # three programs, pairwise hard losses 1/0/1, self-losses 0
        values = (
            (0.0, 1.0, 0.0),
            (1.0, 0.0, 1.0),
            (0.0, 1.0, 0.0),
        )
        logliks = [-2.0, -1.0, -3.0]
        cset = make_set(3, logliks=logliks)
        risks = [sum(row) for row in values]
        assert risks == [1.0, 2.0, 1.0]
        winner = mbr_select(cset, RiskMatrix(RiskFunction("exec-hard"), values))
        # candidates 0 and 2 tie; 0 has the larger likelihood
        assert winner.candidate_id == "c0"

    def test_singleton(self):
        cset = make_set(1)
        risk = RiskMatrix(RiskFunction("exec-hard"), ((0.0,),))
        assert mbr_select(cset, risk).candidate_id == "c0"

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            mbr_select(CandidateSet("p", ()), RiskMatrix(RiskFunction("exec-hard"), ()))

    def test_matches_brute_force_oracle(self):
        rng = random.Random(1234)
        for _ in range(200):
            n = rng.randrange(1, 6)
            cset, risk, values, logliks = random_risk_case(rng, n)
            expected = brute_force_mbr(values, logliks)
            assert mbr_select(cset, risk).candidate_id == f"c{expected}"

    def test_index_tiebreak_without_logprobs(self):
        cset = make_set(3)
        values = ((0.0, 0.0, 0.0),) * 3
        assert mbr_select(cset, RiskMatrix(RiskFunction("exec-hard"), values)).candidate_id == "c0"

    def test_permutation_invariance(self):
        rng = random.Random(55)
        for _ in range(30):
            n = rng.randrange(2, 6)
            cset, risk, values, logliks = random_risk_case(rng, n)
            winner = mbr_select(cset, risk)
            perm = list(range(n))
            rng.shuffle(perm)
            permuted_set = CandidateSet("p", tuple(cset[i] for i in perm))
            permuted_values = tuple(
                tuple(values[perm[i]][perm[j]] for j in range(n)) for i in range(n)
            )
            permuted_winner = mbr_select(
                permuted_set, RiskMatrix(RiskFunction("exec-hard"), permuted_values)
            )
            # decisive likelihood tiebreak makes the winner order-independent
            tied_logliks = [
                logliks[i] for i in range(n)
                if sum(values[i]) == min(sum(r) for r in values)
            ]
            if tied_logliks.count(max(tied_logliks)) == 1:
                assert permuted_winner.program_text == winner.program_text

    def test_duplicate_winner_monotonicity(self):
        rng = random.Random(77)
        for _ in range(30):
            n = rng.randrange(2, 5)
            statuses = [["ok"] for _ in range(n)]
            outputs = [[rng.choice(["a", "b"])] for _ in range(n)]
            m = outcome_matrix(statuses, outputs)
            logliks = [rng.uniform(-5, -1) for _ in range(n)]
            cset = make_set(n, logliks=logliks)
            winner = mbr_select(cset, pairwise_loss_exec(m))
            wi = next(i for i in range(n) if cset[i].candidate_id == winner.candidate_id)
            dup = make_candidate(f"c{n}", "p", winner.program_text, [logliks[wi]])
            bigger = CandidateSet("p", tuple(cset) + (dup,))
            # rebuild the outcome matrix with the duplicate's copied outputs
            statuses2 = statuses + [statuses[wi]]
            outputs2 = outputs + [outputs[wi]]
            m2 = outcome_matrix(statuses2, outputs2)
            new_winner = mbr_select(bigger, pairwise_loss_exec(m2))
            assert new_winner.program_text == winner.program_text


class TestLikelihoodSelection:
    def test_ml_picks_larger_loglik(self):
        cset = make_set(2, logliks=[-3.0, -2.0])
        assert select_ml(cset).candidate_id == "c1"

    def test_ml_favors_shorter_mall_ties(self):
        short = make_candidate("c0", "p", "a", [-1.0, -1.0])
        long = make_candidate("c1", "p", "b", [-1.0, -1.0, -1.0])
        cset = CandidateSet("p", (short, long))
        assert select_ml(cset).candidate_id == "c0"
        # equal means: lowest index wins
        assert select_mall(cset).candidate_id == "c0"

    def test_mall_matches_brute_scan(self):
        rng = random.Random(9)
        cands = []
        for i in range(25):
            lps = [rng.uniform(-4, 0) for _ in range(rng.randrange(1, 12))]
            cands.append(make_candidate(f"c{i}", "p", f"prog {i}", lps))
        cset = CandidateSet("p", tuple(cands))
        means = [candidate_loglik(c) / len(c.tokens) for c in cset]
        expected = means.index(max(means))
        assert select_mall(cset).candidate_id == f"c{expected}"

    def test_missing_logprobs_named_error(self):
        cset = make_set(2)
        with pytest.raises(ValueError, match="ml"):
            select_ml(cset)
        with pytest.raises(ValueError, match="mall"):
            select_mall(cset)

    @given(st.lists(st.floats(-10, -0.01), min_size=2, max_size=8),
           st.floats(0.5, 4.0))
    def test_scale_invariance(self, logliks, scale):
        cset = make_set(len(logliks), logliks=logliks)
        scaled = make_set(len(logliks), logliks=[lp * scale for lp in logliks])
        assert select_ml(cset).candidate_id == select_ml(scaled).candidate_id
        assert select_mall(cset).candidate_id == select_mall(scaled).candidate_id


class TestFilterExecutable:
    def test_all_ok_is_identity(self):
        cset = make_set(3)
        m = outcome_matrix([["ok"]] * 3, [["x"], ["y"], ["z"]])
        filtered, kept, fallback = filter_executable(cset, m)
        assert filtered == cset and kept == [0, 1, 2] and not fallback

    def test_one_survivor(self):
        cset = make_set(5)
        statuses = [["timeout"], ["ok"], ["runtime_error"], ["parse_error"], ["timeout"]]
        m = outcome_matrix(statuses, [[None], ["v"], [None], [None], [None]])
        filtered, kept, fallback = filter_executable(cset, m)
        assert [c.candidate_id for c in filtered] == ["c1"]
        assert kept == [1] and not fallback

    def test_none_ok_falls_back_flagged(self):
        cset = make_set(3)
        m = outcome_matrix([["timeout"]] * 3, [[None]] * 3)
        filtered, kept, fallback = filter_executable(cset, m)
        assert filtered == cset and fallback


class TestSelectDispatcher:
    def test_executability_ml_composition(self):
        # even-indexed candidates execute; filtered ML == ML over evens
        logliks = [-5.0, -1.0, -4.0, -2.0, -3.0, -1.5]
        cset = make_set(6, logliks=logliks)
        statuses = [["ok" if i % 2 == 0 else "runtime_error"] for i in range(6)]
        m = outcome_matrix(statuses, [[f"v{i}"] for i in range(6)])
        entry = select(cset, "ml", outcomes=m, filtered=True)
        evens = CandidateSet("p", tuple(cset[i] for i in range(0, 6, 2)))
        assert entry.candidate_id == select_ml(evens).candidate_id
        assert entry.method == "executability-ml"

    def test_all_fail_uniform_risk_likelihood_tiebreak(self):
        logliks = [-3.0, -0.5, -2.0]
        cset = make_set(3, logliks=logliks)
        m = outcome_matrix([["timeout"]] * 3, [[None]] * 3)
        entry = select(cset, "mbr-exec", outcomes=m)
        assert entry.candidate_id == "c1"

    def test_soft_equals_hard_single_test(self):
        cset = make_set(4, logliks=[-1, -2, -3, -4])
        statuses = [["ok"], ["ok"], ["runtime_error"], ["ok"]]
        m = outcome_matrix(statuses, [["a"], ["a"], [None], ["b"]])
        hard = select(cset, "mbr-exec", outcomes=m)
        soft = select(cset, "mbr-exec-soft", outcomes=m)
        assert hard.candidate_id == soft.candidate_id

    def test_greedy_first_and_random_sample(self):
        cset = make_set(5)
        assert select(cset, "greedy-first").candidate_id == "c0"
        a = select(cset, "random-sample", seed=3)
        b = select(cset, "random-sample", seed=3)
        assert a.candidate_id == b.candidate_id

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError, match="unknown method"):
            select(make_set(2), "best-effort")

    def test_exec_method_requires_outcomes(self):
        with pytest.raises(ValueError, match="needs execution outcomes"):
            select(make_set(2), "mbr-exec")
