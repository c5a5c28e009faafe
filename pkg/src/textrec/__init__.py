"""Sequential recommendation from frozen text-derived item vectors.

Subpackages/modules:
  tensor      -- dense tensors with reverse-mode gradients (float32/float64)
  kernels     -- compiled or numpy backend for the hot kernels
  adam        -- Adam optimizer over named parameter dicts
  corpus      -- interaction logs, 5-core filter, leave-one-out splits, batches
  synthetic   -- attribute-driven synthetic interaction generator
  embfile     -- binary .emb item-embedding matrix format + pseudo embeddings
  model       -- adapter + position table + self-attention backbone + scoring
  checkpoint  -- binary .idac parameter container
  training    -- pre-training (3 tasks), fine-tuning (2 modes), ID baseline
  evaluation  -- full-catalog ranking, HR@k/NDCG@k, popularity buckets
  cli         -- command-line pipeline driver
"""

__version__ = "0.1.0"
