"""hallmt: grounded machine translation with hallucinated visual tokens.

Subpackages:
  engine      - reverse-mode autodiff core (tensors, tape, Adam, gradcheck)
  textpipe    - BPE tokenization, vocabulary, token-budgeted batching
  world       - synthetic grounded scenes, renderer, target language, masking
  vq          - discrete visual encoder/decoder with codebook quantization
  halluc      - autoregressive text+visual token model with Gumbel relaxation
  translator  - multimodal encoder-decoder translation model
  pipeline    - staged training, beam search, BLEU, reports, CLI
"""

__version__ = "0.1.0"
