import copy

import numpy as np
import pytest
import torch

from conftest import norm_image
from sitadda.engine import STATUS_DIVERGENT, STATUS_OK, AdaptationConfig
from sitadda.ensemble import (
    Candidate,
    EnsembleConfig,
    EnsembleMember,
    auto_select,
    default_candidates,
    ensemble_predict,
    exclude_members,
    uncertainty_score,
)
from sitadda.errors import ConfigError, SelectionError
from sitadda.models import FreezeSchedule, build_discriminator, build_generator


def tiny_gen(seed=0):
    torch.manual_seed(seed)
    return build_generator(depth=2, base_channels=4, channel_cap=8)


def constant_model(value: float):
    """Depth-1 generator that predicts atanh(value) -> value everywhere."""
    torch.manual_seed(0)
    g = build_generator(depth=1, base_channels=2)
    with torch.no_grad():
        for p in g.parameters():
            p.zero_()
        # output block bias drives the constant through the final Tanh
        g.decoders[-1].conv.bias.fill_(float(np.arctanh(value)))
    return g


class TestEnsemblePredict:
    def test_identical_members_zero_std(self, rng):
        g = tiny_gen(seed=1)
        members = [copy.deepcopy(g) for _ in range(4)]
        x = norm_image(rng.uniform(-1, 1, (16, 16)))
        stats = ensemble_predict(members, x)
        assert np.all(stats.std == 0.0)

    def test_two_constant_members_std(self):
        models = [constant_model(0.0), constant_model(1.0 - 1e-9)]
        x = norm_image(np.zeros((8, 8)))
        stats = ensemble_predict(models, x)
        assert stats.std == pytest.approx(np.full((8, 8), np.sqrt(0.5)), abs=1e-4)
        assert stats.mean == pytest.approx(np.full((8, 8), 0.5), abs=1e-6)

    def test_mean_matches_member_average(self, rng):
        members = [tiny_gen(seed=s) for s in range(3)]
        x = norm_image(rng.uniform(-1, 1, (16, 16)))
        from sitadda.engine import infer

        preds = np.stack([infer(m, x).values for m in members]).astype(np.float64)
        stats = ensemble_predict(members, x)
        assert np.allclose(stats.mean, preds.mean(axis=0), atol=1e-6)

    def test_architecture_mismatch_rejected(self, rng):
        a = tiny_gen(seed=0)
        torch.manual_seed(1)
        b = build_generator(depth=3, base_channels=4, channel_cap=8)
        with pytest.raises(ConfigError):
            ensemble_predict([a, b], norm_image(rng.uniform(-1, 1, (16, 16))))

    def test_needs_two_members(self, rng):
        with pytest.raises(ConfigError):
            ensemble_predict([tiny_gen()], norm_image(rng.uniform(-1, 1, (8, 8))))


class TestUncertaintyScore:
    def test_identical_models_zero(self, rng):
        g = tiny_gen(seed=2)
        members = [copy.deepcopy(g), copy.deepcopy(g)]
        imgs = [norm_image(rng.uniform(-1, 1, (8, 8))) for _ in range(3)]
        assert uncertainty_score(members, imgs) == 0.0

    def test_order_invariant(self, rng):
        members = [tiny_gen(seed=s) for s in range(3)]
        imgs = [norm_image(rng.uniform(-1, 1, (8, 8))) for _ in range(4)]
        assert uncertainty_score(members, imgs) == pytest.approx(
            uncertainty_score(members, imgs[::-1])
        )

    def test_empty_dataset_rejected(self):
        with pytest.raises(ConfigError):
            uncertainty_score([tiny_gen(), tiny_gen(seed=1)], [])


class TestEnsembleConfig:
    def test_k_lower_bound(self):
        with pytest.raises(ConfigError):
            EnsembleConfig(k=1)

    def test_seed_validation(self):
        with pytest.raises(ConfigError):
            EnsembleConfig(k=3, member_seeds=(1, 1, 2))
        with pytest.raises(ConfigError):
            EnsembleConfig(k=3, member_seeds=(1, 2))
        assert EnsembleConfig(k=3).seeds(root_seed=5) == (5, 6, 7)

    def test_exclusion_rule(self):
        cfg = EnsembleConfig(k=2, exclusion_pearson=0.1)
        members = [
            EnsembleMember(tiny_gen(0), 0, STATUS_OK, 0.9),
            EnsembleMember(tiny_gen(1), 1, STATUS_DIVERGENT, 0.95),
            EnsembleMember(tiny_gen(2), 2, STATUS_OK, 0.05),
        ]
        kept = exclude_members(members, cfg)
        assert [m.seed for m in kept] == [0]


def domain_inputs(n, seed, size=8):
    rng = np.random.default_rng(seed)
    return [norm_image(rng.uniform(-1, 1, (size, size))) for _ in range(n)]


class TestAutoSelect:
    def make_members(self, k=2):
        return [
            EnsembleMember(tiny_gen(seed=s), seed=s, status=STATUS_OK, val_pearson=0.9)
            for s in range(k)
        ]

    def adapt_cfg(self):
        return AdaptationConfig(steps=2, batch_size=2, gen_lr=1e-4, seed=0)

    def factory(self):
        return build_discriminator(num_layers=2, base_channels=4, in_channels=1)

    def test_single_candidate_chosen(self):
        cands = [Candidate(FreezeSchedule.trainable_prefix(1), 1e-4)]
        result = auto_select(
            self.make_members(), domain_inputs(3, 0), domain_inputs(3, 1), cands,
            self.adapt_cfg(), EnsembleConfig(k=2), discriminator_factory=self.factory,
        )
        assert result.chosen == cands[0]
        assert len(result.ranking) == 1
        assert len(result.winner_models) == 2

    def test_argmin_with_tie_break_to_fewer_params(self):
        # scores {prefix1: 0.12, prefix2: 0.08, prefix3: 0.08} -> prefix2
        scores = {"prefix:1": 0.12, "prefix:2": 0.08, "prefix:3": 0.08}
        import sitadda.ensemble as ens

        original = ens.uncertainty_score

        def patched(models, images):
            return scores[patched.current]

        cands = [Candidate(FreezeSchedule.trainable_prefix(k), 1e-4) for k in (1, 2, 3)]
        try:
            def scripted(models, images):
                return scripted.values.pop(0)

            scripted.values = [0.12, 0.08, 0.08]
            ens.uncertainty_score = scripted
            result = auto_select(
                self.make_members(), domain_inputs(3, 2), domain_inputs(3, 3), cands,
                self.adapt_cfg(), EnsembleConfig(k=2), discriminator_factory=self.factory,
            )
        finally:
            ens.uncertainty_score = original
        assert result.chosen.schedule.describe() == "prefix:2"
        ranked = [o.candidate.schedule.describe() for o in result.ranking]
        assert ranked == ["prefix:2", "prefix:3", "prefix:1"]

    def test_all_members_excluded_raises(self):
        members = [
            EnsembleMember(tiny_gen(0), 0, STATUS_DIVERGENT, 0.9),
            EnsembleMember(tiny_gen(1), 1, STATUS_OK, 0.01),
        ]
        with pytest.raises(SelectionError):
            auto_select(
                members, domain_inputs(2, 4), domain_inputs(2, 5),
                [Candidate(FreezeSchedule.trainable_prefix(1), 1e-4)],
                self.adapt_cfg(), EnsembleConfig(k=2), discriminator_factory=self.factory,
            )

    def test_deterministic_given_seeds(self):
        cands = default_candidates([1e-3, 1e-4], max_prefix=1)
        kwargs = dict(
            adapt_cfg=self.adapt_cfg(),
            ensemble_cfg=EnsembleConfig(k=2),
            discriminator_factory=self.factory,
        )
        r1 = auto_select(self.make_members(), domain_inputs(3, 6), domain_inputs(3, 7), cands, **kwargs)
        r2 = auto_select(self.make_members(), domain_inputs(3, 6), domain_inputs(3, 7), cands, **kwargs)
        assert r1.chosen == r2.chosen
        assert [o.row() for o in r1.ranking] == [o.row() for o in r2.ranking]


def test_default_candidates_grid():
    cands = default_candidates([1e-3, 1e-4], max_prefix=4)
    assert len(cands) == 8
    assert {c.schedule.describe() for c in cands} == {f"prefix:{k}" for k in (1, 2, 3, 4)}
