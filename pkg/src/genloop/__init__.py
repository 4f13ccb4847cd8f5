"""genloop: constrained decoding and self-imitation for generic statements.

The pipeline in one breath: expand seed concepts into templated prompts
paired with CNF constraints, beam-search each prompt under a penalty for
violated clauses, keep what a critic approves, fine-tune the generator
on the keepers, and repeat; the evaluation kit measures precision-recall
and estimates how many unique statements a corpus really holds.
"""

from .benchmark import Benchmark, Grammar, build_benchmark, default_grammar
from .constraints import (ConstraintSet, ConstraintState, CountLiteral, PhraseLiteral,
                          build_standard_set, connective_words, function_words)
from .critic import (CriticModel, FeatureSpec, LabeledExample, OracleCritic,
                     filter_generations, train_critic)
from .decoder import (DecodeJob, DecoderConfig, Generation, Hypothesis, batch_decode,
                      decode, step)
from .errors import BridgeError, ConfigError, GenloopError, InputError, LoopHalted
from .evalkit import (MnrEstimate, MnrReport, PRCurve, ScoredLabeledItem, accuracy,
                      average_precision, bleu, chapman, estimate_unique, pr_curve)
from .lm import (NGramModel, Scorer, TableModel, UniformModel, Vocabulary, fit,
                 fit_texts, finetune, finetune_texts, per_word_perplexity,
                 sequence_logprob)
from .prompts import (Concept, PromptJob, RelationalPhrase, build_jobs, expand_goal,
                      expand_noun, gate, select_best_variant)
from .selfimit import IterationReport, LoopConfig, LoopResult, dedup_generations, run
from .text import detokenize, tokenize

__version__ = "0.1.0"
