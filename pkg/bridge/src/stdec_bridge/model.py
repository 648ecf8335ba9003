"""Bundled toy masked-diffusion model.

Randomly initialized and deterministic per seed; it exists so trace exports
can be produced and checked without trained weights. Real checkpoints would
plug in behind the same load_model surface.
"""

from __future__ import annotations

import re

import torch
from torch import nn

from .errors import SessionError

TOY_VOCAB_SIZE = 64
TOY_MASK_ID = 63
TOY_MAX_LEN = 512

_TOY_ID = re.compile(r"^toy(?:-(\d+))?$")


def parse_model_id(model_id: str) -> int:
    """Seed encoded in a toy model id ("toy" or "toy-<seed>")."""
    m = _TOY_ID.match(model_id)
    if m is None:
        raise SessionError(
            f"unknown model id {model_id!r}: this build bundles only the toy "
            f"models ('toy', 'toy-<seed>')"
        )
    return int(m.group(1) or 0)


class ToyMaskedLM(nn.Module):
    """Two-layer bidirectional encoder over token + position embeddings.

    forward() maps a 1-D id tensor to [len, vocab] logits; every position
    attends to the whole sequence, mask tokens included. Weights come from
    the global torch generator seeded in the constructor, so the same seed
    always yields the same model.
    """

    def __init__(self, seed: int, d_model: int = 64, n_heads: int = 4,
                 n_layers: int = 2):
        super().__init__()
        self.vocab_size = TOY_VOCAB_SIZE
        self.mask_id = TOY_MASK_ID
        self.seed = seed
        torch.manual_seed(seed)
        self.tok = nn.Embedding(TOY_VOCAB_SIZE, d_model)
        self.pos = nn.Embedding(TOY_MAX_LEN, d_model)
        layer = nn.TransformerEncoderLayer(
            d_model, n_heads, dim_feedforward=4 * d_model,
            dropout=0.0, batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, n_layers)
        self.head = nn.Linear(d_model, TOY_VOCAB_SIZE)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        if ids.dim() != 1:
            raise SessionError(
                f"expected a 1-D id tensor, got shape {tuple(ids.shape)}"
            )
        if ids.numel() > TOY_MAX_LEN:
            raise SessionError(
                f"sequence length {ids.numel()} exceeds model maximum {TOY_MAX_LEN}"
            )
        x = self.tok(ids) + self.pos(torch.arange(ids.numel()))
        h = self.encoder(x.unsqueeze(0))
        return self.head(h).squeeze(0)


def load_model(model_id: str) -> ToyMaskedLM:
    """Build the model named by ``model_id``, in eval mode."""
    model = ToyMaskedLM(parse_model_id(model_id))
    model.eval()
    return model
