"""Class-incremental continual learning of compound classes.

A compact engine that learns basic classes first, then adds compound
classes one at a time, fighting catastrophic forgetting with knowledge
distillation from a frozen basic-phase teacher plus predictive-sorting
memory replay. Includes a few-shot mode, Grad-CAM introspection, and a
synthetic compositional dataset for desk-scale experiments.
"""

__version__ = "0.1.0"
