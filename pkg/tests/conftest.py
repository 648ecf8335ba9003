import numpy as np
import pytest

from stdec import DecoderConfig, DecodeState, Vocab, new_state


@pytest.fixture
def vocab() -> Vocab:
    return Vocab(size=32, mask_id=31)


@pytest.fixture
def small_cfg() -> DecoderConfig:
    return DecoderConfig(gen_length=8, block_size=4, max_steps=8)


@pytest.fixture
def small_state(small_cfg, vocab) -> DecodeState:
    return new_state([1, 2], small_cfg, vocab)


def random_state(rng: np.random.Generator, cfg: DecoderConfig, vocab: Vocab) -> DecodeState:
    """A mid-decode state with a random valid decode history.

    Decodes a random number of positions block-prefix first (earlier blocks
    fully decoded, the active block partially), matching what the loop can
    actually produce, then fills random streak/prev fields for every
    position that has ever been predicted.
    """
    prompt = [int(t) for t in rng.integers(0, vocab.size - 1, size=rng.integers(0, 4))]
    state = new_state(prompt, cfg, vocab)
    n_done = int(rng.integers(0, cfg.gen_length))
    blocks_done, in_block = divmod(n_done, cfg.block_size)
    done = list(range(blocks_done * cfg.block_size))
    block_lo = blocks_done * cfg.block_size
    extra = rng.choice(np.arange(block_lo, block_lo + cfg.block_size), size=in_block, replace=False)
    done.extend(int(p) for p in extra)
    for pos in done:
        w = state.prompt_len + pos
        state.tokens[w] = int(rng.integers(0, vocab.size - 1))
        state.masked[w] = False
    state.block_index = blocks_done
    state.step = int(rng.integers(0, cfg.max_steps))
    # positions seen at least once get history; the rest keep sentinels
    seen = rng.random(cfg.gen_length) < 0.8
    seen[done] = True
    state.prev_id[seen] = rng.integers(0, vocab.size - 1, size=int(seen.sum()))
    state.prev_conf[seen] = rng.random(int(seen.sum()))
    state.streak[seen] = rng.integers(0, 6, size=int(seen.sum()))
    return state
