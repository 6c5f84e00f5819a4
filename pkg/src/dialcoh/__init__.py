"""dialcoh: turn-by-turn dialogue coherence from entity and dialogue-act
structure.

Builds weakly supervised response-selection datasets from annotated
dialogues, trains grid-feature and recurrent neural rankers, and evaluates
them on binary response selection and graded turn-coherence rating.
"""

__version__ = "0.1.0"
