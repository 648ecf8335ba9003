import numpy as np
import pytest

from stdec import (
    ConfigError,
    DecodeError,
    DecoderConfig,
    StepPrediction,
    ThresholdMap,
    Vocab,
    commit,
    force_commit,
    new_state,
)


class TestVocab:
    def test_valid_token_excludes_mask_and_range(self):
        v = Vocab(size=10, mask_id=9)
        assert v.valid_token(0) and v.valid_token(8)
        assert not v.valid_token(9)
        assert not v.valid_token(10)
        assert not v.valid_token(-1)

    def test_mask_id_may_sit_anywhere(self):
        v = Vocab(size=10, mask_id=0)
        assert not v.valid_token(0)
        assert v.valid_token(9)

    @pytest.mark.parametrize("size,mask_id", [(1, 0), (0, 0), (10, 10), (10, -1)])
    def test_rejects_bad_shapes(self, size, mask_id):
        with pytest.raises(ConfigError):
            Vocab(size=size, mask_id=mask_id)


class TestDecoderConfig:
    def test_defaults(self):
        cfg = DecoderConfig()
        assert cfg.tau_high == 0.9
        assert cfg.tau_low == 0.3
        assert cfg.alpha == 0.85
        assert cfg.kernel == "gaussian"
        assert cfg.sigma == 1.0
        assert cfg.radius == 2
        assert cfg.boundary == "replicate"
        assert cfg.gen_length == 64
        assert cfg.block_size == 32
        assert cfg.max_steps == 64
        assert not cfg.full_window_queries

    def test_dict_round_trip(self):
        cfg = DecoderConfig(tau_high=0.8, tau_low=0.2, block_size=16)
        assert DecoderConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config"):
            DecoderConfig.from_dict({"tau_hgih": 0.9})

    def test_partial_dict_uses_defaults(self):
        cfg = DecoderConfig.from_dict({"alpha": 0.5})
        assert cfg.alpha == 0.5
        assert cfg.tau_high == 0.9

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"tau_low": 0.9, "tau_high": 0.3},
            {"tau_low": 0.0},
            {"tau_high": 1.0001},
            {"alpha": 0.0},
            {"alpha": 1.5},
            {"kernel": "box"},
            {"sigma": 0.0},
            {"radius": -1},
            {"boundary": "wrap"},
            {"gen_length": 0},
            {"block_size": 0},
            {"gen_length": 10, "block_size": 4},
            {"max_steps": 0},
            {"seed": -1},
        ],
    )
    def test_rejects_invalid_fields(self, kwargs):
        with pytest.raises(ConfigError):
            DecoderConfig(**kwargs)

    def test_num_blocks(self):
        assert DecoderConfig(gen_length=64, block_size=16).num_blocks == 4


class TestNewState:
    def test_fresh_state_layout(self, small_cfg, vocab):
        state = new_state([1, 2, 3], small_cfg, vocab)
        assert state.prompt_len == 3
        assert state.window_len == 3 + 8
        assert not state.masked[:3].any()
        assert state.masked[3:].all()
        assert (state.tokens[:3] == [1, 2, 3]).all()
        assert (state.tokens[3:] == vocab.mask_id).all()
        assert state.step == 0 and state.block_index == 0
        assert (state.streak == 0).all()
        assert (state.prev_id == -1).all()
        assert np.isnan(state.prev_conf).all()

    def test_empty_prompt_allowed(self, small_cfg, vocab):
        state = new_state([], small_cfg, vocab)
        assert state.prompt_len == 0
        assert state.masked.all()

    def test_mask_id_in_prompt_rejected(self, small_cfg, vocab):
        with pytest.raises(ConfigError, match="invalid prompt token"):
            new_state([1, vocab.mask_id], small_cfg, vocab)

    def test_out_of_range_prompt_rejected(self, small_cfg, vocab):
        with pytest.raises(ConfigError):
            new_state([vocab.size], small_cfg, vocab)


class TestStepPrediction:
    def make(self, positions, ids, confs):
        return StepPrediction(
            positions=np.array(positions), ids=np.array(ids), confs=np.array(confs)
        )

    def test_valid_prediction_passes(self, small_state):
        pred = self.make([0, 1, 3], [5, 6, 7], [0.5, 0.4, 1.0])
        pred.validate(small_state)

    def test_rejects_unsorted_positions(self, small_state):
        pred = self.make([1, 0], [5, 6], [0.5, 0.4])
        with pytest.raises(DecodeError, match="ascending"):
            pred.validate(small_state)

    def test_rejects_duplicate_positions(self, small_state):
        pred = self.make([1, 1], [5, 6], [0.5, 0.4])
        with pytest.raises(DecodeError, match="ascending"):
            pred.validate(small_state)

    def test_rejects_decoded_position(self, small_state):
        state = commit(small_state, np.array([0]), np.array([4]))
        pred = self.make([0], [5], [0.5])
        with pytest.raises(DecodeError, match="already-decoded"):
            pred.validate(state)

    def test_rejects_mask_id(self, small_state, vocab):
        pred = self.make([0], [vocab.mask_id], [0.5])
        with pytest.raises(DecodeError, match="mask id"):
            pred.validate(small_state)

    def test_rejects_out_of_window(self, small_state):
        pred = self.make([8], [5], [0.5])
        with pytest.raises(DecodeError, match="outside generation window"):
            pred.validate(small_state)

    def test_rejects_bad_confidence(self, small_state):
        pred = self.make([0], [5], [1.2])
        with pytest.raises(DecodeError, match="confidence"):
            pred.validate(small_state)
        pred = self.make([0], [5], [-0.1])
        with pytest.raises(DecodeError, match="confidence"):
            pred.validate(small_state)

    def test_rejects_empty(self, small_state):
        pred = self.make([], [], [])
        with pytest.raises(DecodeError, match="no positions"):
            pred.validate(small_state)

    def test_lookup_by_position(self):
        pred = self.make([0, 2, 5], [7, 8, 9], [0.1, 0.2, 0.3])
        assert pred.conf_at(np.array([2, 5])).tolist() == [0.2, 0.3]
        assert pred.ids_at(np.array([0, 5])).tolist() == [7, 9]
        with pytest.raises(DecodeError, match="missing"):
            pred.conf_at(np.array([1]))
        with pytest.raises(DecodeError, match="missing"):
            pred.ids_at(np.array([6]))


class TestCommit:
    def test_commit_writes_and_advances_step(self, small_state):
        state = commit(small_state, np.array([1, 3]), np.array([4, 5]))
        assert state.step == 1
        assert state.tokens[small_state.prompt_len + 1] == 4
        assert state.tokens[small_state.prompt_len + 3] == 5
        assert not state.masked[small_state.prompt_len + 1]
        assert state.block_index == 0
        # the original state is untouched
        assert small_state.masked[small_state.prompt_len + 1]

    def test_block_advances_when_emptied(self, small_state):
        state = commit(small_state, np.arange(4), np.array([4, 5, 6, 7]))
        assert state.block_index == 1
        assert state.block_range() == (4, 8)

    def test_completion_after_last_block(self, small_state):
        state = commit(small_state, np.arange(4), np.array([4, 5, 6, 7]))
        state = commit(state, np.arange(4, 8), np.array([4, 5, 6, 7]))
        assert state.complete
        assert state.block_index == state.num_blocks

    def test_rejects_out_of_block(self, small_state):
        with pytest.raises(DecodeError, match="outside active block"):
            commit(small_state, np.array([4]), np.array([5]))

    def test_rejects_recommit(self, small_state):
        state = commit(small_state, np.array([0]), np.array([4]))
        with pytest.raises(DecodeError, match="already decoded"):
            commit(state, np.array([0]), np.array([5]))

    def test_rejects_empty_and_duplicates(self, small_state):
        with pytest.raises(DecodeError, match="empty"):
            commit(small_state, np.array([], dtype=np.int64), np.array([], dtype=np.int64))
        with pytest.raises(DecodeError, match="duplicate"):
            commit(small_state, np.array([1, 1]), np.array([4, 4]))

    def test_rejects_mask_id_and_out_of_vocab(self, small_state, vocab):
        with pytest.raises(DecodeError, match="mask id"):
            commit(small_state, np.array([0]), np.array([vocab.mask_id]))
        with pytest.raises(DecodeError, match="outside vocab"):
            commit(small_state, np.array([0]), np.array([vocab.size]))


class TestForceCommit:
    def test_commits_everything_at_once(self, small_state):
        state = commit(small_state, np.array([0]), np.array([4]))
        rest = state.masked_positions()
        ids = np.full(rest.size, 6)
        state = force_commit(state, rest, ids)
        assert state.complete
        assert state.block_index == state.num_blocks

    def test_rejects_partial_cover(self, small_state):
        with pytest.raises(DecodeError, match="exactly the masked set"):
            force_commit(small_state, np.array([0, 1]), np.array([4, 5]))


class TestStateViews:
    def test_masked_position_views(self, small_state):
        state = commit(small_state, np.array([0, 2]), np.array([4, 5]))
        assert state.masked_positions().tolist() == [1, 3, 4, 5, 6, 7]
        assert state.active_masked_positions().tolist() == [1, 3]

    def test_threshold_map_gen_slice(self):
        tm = ThresholdMap(values=np.array([0.3, 0.3, 0.9, 0.9]), stage="initial", prompt_len=2)
        assert tm.gen_values().tolist() == [0.9, 0.9]
